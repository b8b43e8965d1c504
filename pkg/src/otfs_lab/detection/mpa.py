"""Gaussian-approximation message passing on the sparse DD factor graph."""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .constellation import Constellation, softmax
from .result import DetectionResult


def sparsify(H, energy: float = 0.99, rel_tol: float = 1e-9) -> sp.csr_matrix:
    """Keep, per column, the strongest entries holding ``energy`` of its power.

    Used for fractional-Doppler operators whose columns leak into every
    Doppler bin. Entries below ``rel_tol`` of the column peak are always dropped.
    """
    H = H.toarray() if sp.issparse(H) else np.asarray(H)
    power = np.abs(H) ** 2
    order = np.argsort(-power, axis=0, kind="stable")
    sorted_p = np.take_along_axis(power, order, axis=0)
    cum = np.cumsum(sorted_p, axis=0)
    total = cum[-1:, :]
    # keep the entries needed to reach the target, plus the one that crosses it
    keep_sorted = np.concatenate([np.ones((1, H.shape[1]), bool), cum[:-1] < energy * total], axis=0)
    keep_sorted &= sorted_p > (rel_tol**2) * sorted_p[:1]
    keep = np.zeros_like(keep_sorted)
    np.put_along_axis(keep, order, keep_sorted, axis=0)
    return sp.csr_matrix(np.where(keep, H, 0))


class FactorGraph:
    """Edge list of a sparse observation matrix with row/column incidence maps."""

    def __init__(self, H, rel_tol: float = 1e-9, max_degree: int = 64):
        Hs = sp.coo_matrix(H)
        peak = np.max(np.abs(Hs.data)) if Hs.nnz else 0.0
        keep = np.abs(Hs.data) > rel_tol * peak
        self.rows = Hs.row[keep]
        self.cols = Hs.col[keep]
        self.h = Hs.data[keep].astype(complex)
        self.K_rows, self.K_cols = Hs.shape
        E = self.h.size
        self.row_inc = sp.csr_matrix((np.ones(E), (self.rows, np.arange(E))), shape=(self.K_rows, E))
        self.col_inc = sp.csr_matrix((np.ones(E), (self.cols, np.arange(E))), shape=(self.K_cols, E))
        self.row_degree = int(np.bincount(self.rows, minlength=1).max())
        degree = max(self.row_degree, np.bincount(self.cols, minlength=1).max())
        if degree > max_degree:
            raise ValueError(
                f"operator is not sparse (degree {degree} > {max_degree}); truncate it with sparsify()"
            )
        self.degree = int(degree)


def detect_mpa(y, H, noise_var: float, constellation: Constellation, max_iters: int = 30,
               damping: float = 0.6, tol: float = 1e-6, max_degree: int = 64) -> DetectionResult:
    """Damped Gaussian-interference message passing.

    Convergence is declared when no symbol posterior moves by more than ``tol``
    between successive iterations.
    """
    if not 0 < damping <= 1:
        raise ValueError("damping must lie in (0, 1]")
    if max_iters < 1:
        raise ValueError("max_iters must be >= 1")
    g = H if isinstance(H, FactorGraph) else FactorGraph(H, max_degree=max_degree)
    y = np.asarray(y, dtype=complex)
    a = constellation.points
    a2 = np.abs(a) ** 2
    Q = a.size
    E = g.h.size
    h = g.h
    y_e = y[g.rows]
    s2 = max(float(noise_var), 1e-12)

    msg = np.full((E, Q), 1.0 / Q)  # variable -> factor beliefs
    post = np.full((g.K_cols, Q), 1.0 / Q)
    converged = False
    it = 0
    for it in range(1, max_iters + 1):
        mean_x = msg @ a
        mean_e = h * mean_x
        var_e = np.abs(h) ** 2 * (msg @ a2 - np.abs(mean_x) ** 2)
        row_mean = g.row_inc @ mean_e
        row_var = g.row_inc @ var_e
        mu = row_mean[g.rows] - mean_e
        v = np.maximum(row_var[g.rows] - var_e, 0.0) + s2
        ll = -np.abs(y_e[:, None] - mu[:, None] - h[:, None] * a[None, :]) ** 2 / v[:, None]
        col_ll = g.col_inc @ ll
        new = softmax(col_ll[g.cols] - ll)
        msg = damping * new + (1 - damping) * msg
        new_post = softmax(col_ll)
        change = np.max(np.abs(new_post - post))
        post = new_post
        # without interference the first pass is already the fixed point
        if change < tol or g.row_degree <= 1:
            converged = True
            break
    return DetectionResult(post, constellation, iterations_used=it, converged=converged)
