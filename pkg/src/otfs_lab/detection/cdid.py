"""Cross-domain iterative detection.

Alternates a time-domain LMMSE stage on the sparse (banded) channel matrix
with a symbol-wise DD-domain denoiser, exchanging extrinsic Gaussian messages
through the unitary DD <-> time map.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ..channel import ChannelRealization, time_domain_matrix
from ..params import OtfsFrameParams
from .constellation import Constellation, gaussian_posteriors
from .result import DetectionResult

_VAR_FLOOR = 1e-12


def dd_to_time(x, params: OtfsFrameParams) -> np.ndarray:
    """payload = (F_N^H kron I_M) vec(x), vectors in vec order."""
    X = np.asarray(x).reshape(params.N, params.M)  # row n = Doppler bin k
    return np.fft.ifft(X, axis=0, norm="ortho").reshape(-1)


def time_to_dd(s, params: OtfsFrameParams) -> np.ndarray:
    S = np.asarray(s).reshape(params.N, params.M)
    return np.fft.fft(S, axis=0, norm="ortho").reshape(-1)


def strip_cp(y_time, params: OtfsFrameParams) -> np.ndarray:
    slots = np.asarray(y_time).reshape(params.N, params.M + params.cp_len)
    return slots[:, params.cp_len:].reshape(-1)


class _TimeLmmse:
    """LMMSE with scalar prior variance on r = H s + w.

    Uses per-slot dense blocks when H is block diagonal, otherwise a sparse LU
    of the banded system.
    """

    def __init__(self, Ht: sp.csr_matrix, params: OtfsFrameParams, noise_var: float):
        self.H = Ht.tocsr()
        self.params = params
        self.s2 = float(noise_var)
        M, N = params.M, params.N
        coo = self.H.tocoo()
        self.blocked = bool(np.all(coo.row // M == coo.col // M))
        if self.blocked:
            dense = self.H.toarray()
            self.blocks = [dense[n * M:(n + 1) * M, n * M:(n + 1) * M] for n in range(N)]
            self.grams = [B @ B.conj().T for B in self.blocks]
            self.flops_per_iter = N * M**3
        else:
            self.gram = (self.H @ self.H.conj().T).tocsc()
            K = M * N
            bw = int(np.max(np.abs(coo.row - coo.col))) + 1
            self.flops_per_iter = K * bw**2 + K * K * bw

    def __call__(self, r, s_mean, v_s):
        """Posterior mean and average posterior variance of s."""
        resid = r - self.H @ s_mean
        K = r.size
        if self.blocked:
            M = self.params.M
            s_hat = np.empty(K, dtype=complex)
            trace = 0.0
            for n, (B, G) in enumerate(zip(self.blocks, self.grams)):
                C = v_s * G + self.s2 * np.eye(M)
                sl = slice(n * M, (n + 1) * M)
                z = np.linalg.solve(C, np.column_stack([resid[sl], B]))
                s_hat[sl] = s_mean[sl] + v_s * (B.conj().T @ z[:, 0])
                trace += np.real(np.trace(B.conj().T @ z[:, 1:]))
        else:
            C = (v_s * self.gram + self.s2 * sp.identity(K, format="csc")).tocsc()
            lu = spla.splu(C)
            z = lu.solve(resid)
            s_hat = s_mean + v_s * (self.H.conj().T @ z)
            trace = np.real(np.sum(self.H.conj().toarray() * lu.solve(self.H.toarray())))
        v_post = v_s - v_s**2 * trace / K
        return s_hat, max(v_post, _VAR_FLOOR * v_s)


def detect_cdid(y_time, ch: ChannelRealization, noise_var: float, constellation: Constellation,
                max_iters: int = 10, tol: float = 1e-6, damping: float = 1.0) -> DetectionResult:
    """``y_time`` is the received frame including cyclic prefixes."""
    if max_iters < 1:
        raise ValueError("max_iters must be >= 1")
    params = ch.params
    r = strip_cp(y_time, params)
    lmmse = _TimeLmmse(time_domain_matrix(ch), params, noise_var)
    K = params.size

    s_mean = np.zeros(K, dtype=complex)
    v_s = 1.0
    x_e_prev = None
    post = None
    converged = False
    it = 0
    for it in range(1, max_iters + 1):
        s_hat, v_post = lmmse(r, s_mean, v_s)
        # time-domain extrinsic
        v_e = 1.0 / max(1.0 / v_post - 1.0 / v_s, _VAR_FLOOR)
        s_e = v_e * (s_hat / v_post - s_mean / v_s)
        x_e = time_to_dd(s_e, params)
        post = gaussian_posteriors(x_e, 1.0, v_e, constellation)
        x_post = post @ constellation.points
        v_dd = float(np.mean(post @ np.abs(constellation.points) ** 2 - np.abs(x_post) ** 2))
        if v_dd <= _VAR_FLOOR or v_dd >= v_e:
            x_d, v_d = x_post, max(v_dd, _VAR_FLOOR)
        else:
            v_d = 1.0 / (1.0 / v_dd - 1.0 / v_e)
            x_d = v_d * (x_post / v_dd - x_e / v_e)
        new_mean = dd_to_time(x_d, params)
        s_mean = damping * new_mean + (1 - damping) * s_mean
        v_s = damping * v_d + (1 - damping) * v_s
        if v_dd < tol or (x_e_prev is not None and np.max(np.abs(x_e - x_e_prev)) < tol):
            converged = True
            break
        x_e_prev = x_e
    flops = it * lmmse.flops_per_iter
    return DetectionResult(post, constellation, iterations_used=it, converged=converged,
                           flags={"flops": flops, "x_e": x_e, "v_e": v_e})
