from __future__ import annotations

import numpy as np

from ..errors import ResourceLimitError
from .constellation import Constellation
from .result import DetectionResult

MAX_HYPOTHESES = 1 << 20


def _hypotheses(start: int, stop: int, K: int, Q: int) -> np.ndarray:
    """Base-Q digits of hypothesis numbers [start, stop); cell 0 is most significant."""
    n = np.arange(start, stop, dtype=np.int64)
    digits = np.empty((n.size, K), dtype=np.int64)
    for i in range(K - 1, -1, -1):
        n, digits[:, i] = np.divmod(n, Q)
    return digits


def detect_map(y, H, noise_var: float, constellation: Constellation,
               chunk: int = 1 << 16) -> DetectionResult:
    """Exact symbol-wise marginals by enumerating every transmit vector."""
    H = np.atleast_2d(np.asarray(H, dtype=complex))
    y = np.asarray(y, dtype=complex)
    K = H.shape[1]
    Q = constellation.order
    total = Q**K
    if total > MAX_HYPOTHESES:
        raise ResourceLimitError(f"{Q}^{K} hypotheses exceed the cap of {MAX_HYPOTHESES}")
    pts = constellation.points

    def metrics(start, stop):
        d = _hypotheses(start, stop, K, Q)
        resid = y[None, :] - pts[d] @ H.T
        return d, np.sum(np.abs(resid) ** 2, axis=1)

    d_min = min(metrics(s, min(s + chunk, total))[1].min() for s in range(0, total, chunk))
    marg = np.zeros((K, Q))
    for s in range(0, total, chunk):
        d, dist = metrics(s, min(s + chunk, total))
        if noise_var > 0:
            w = np.exp(-(dist - d_min) / noise_var)
        else:
            w = (dist <= d_min * (1 + 1e-12) + 1e-300).astype(float)
        for i in range(K):
            marg[i] += np.bincount(d[:, i], weights=w, minlength=Q)
    post = marg / marg.sum(axis=1, keepdims=True)
    return DetectionResult(post, constellation)
