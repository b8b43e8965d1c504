from __future__ import annotations

import numpy as np
import scipy.linalg as sla

from .constellation import Constellation, gaussian_posteriors
from .result import DetectionResult

_SINGULAR_FALLBACK = 1e-12


def lmmse_equalize(y, H, noise_var: float):
    """x_hat = (H^H H + s2 I)^-1 H^H y with per-stream bias and error variance.

    Returns (x_hat, bias, var, regularized). Assumes unit-energy symbols.
    """
    H = np.atleast_2d(np.asarray(H, dtype=complex))
    y = np.asarray(y, dtype=complex)
    K = H.shape[1]
    s2 = float(noise_var)
    if s2 < 0:
        raise ValueError("noise_var must be >= 0")
    regularized = False
    gram = H.conj().T @ H
    if s2 == 0.0 and np.linalg.matrix_rank(gram) < K:
        s2, regularized = _SINGULAR_FALLBACK, True
    A = gram + s2 * np.eye(K)
    A_inv = sla.inv(A)
    x_hat = A_inv @ (H.conj().T @ y)
    bias = np.real(1.0 - s2 * np.diag(A_inv))
    var = np.maximum(bias * (1.0 - bias), 0.0)
    return x_hat, bias, var, regularized


def detect_lmmse(y, H, noise_var: float, constellation: Constellation) -> DetectionResult:
    x_hat, bias, var, regularized = lmmse_equalize(y, H, noise_var)
    post = gaussian_posteriors(x_hat, bias, var, constellation)
    return DetectionResult(post, constellation, flags={"regularized": regularized, "x_hat": x_hat})


def detect_ofdm_onetap(y_tf, H_tf, noise_var: float, constellation: Constellation,
                       interference_var=0.0) -> DetectionResult:
    """Per-cell scalar MMSE x_hat = H* y / (|H|^2 + s2). Output in vec order.

    ``interference_var`` (scalar or grid) is extra per-cell disturbance power,
    such as inter-carrier leakage. It widens the soft output only; the
    estimate and hard decisions are unchanged.
    """
    y = np.asarray(y_tf, dtype=complex)
    H = np.asarray(H_tf, dtype=complex)
    denom = np.abs(H) ** 2 + noise_var
    safe = np.where(denom > 0, denom, 1.0)
    x_hat = np.where(denom > 0, H.conj() * y / safe, 0.0)
    bias = np.where(denom > 0, np.abs(H) ** 2 / safe, 0.0)
    extra = np.broadcast_to(np.asarray(interference_var, dtype=float), denom.shape)
    if np.any(extra < 0):
        raise ValueError("interference_var must be >= 0")
    var = bias * (1.0 - bias) + bias * extra / safe
    to_vec = lambda a: np.swapaxes(a, -1, -2).reshape(-1) if a.ndim >= 2 else a
    post = gaussian_posteriors(to_vec(x_hat), to_vec(bias), to_vec(var), constellation)
    return DetectionResult(post, constellation, flags={"x_hat": to_vec(x_hat)})
