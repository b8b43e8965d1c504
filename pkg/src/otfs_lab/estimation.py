"""Embedded-pilot DD estimation, TF-domain baseline, decision-directed refinement."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
import scipy.sparse as sp

from .channel import ChannelRealization, _doppler_step, impulse_response, shift_operator
from .params import OtfsFrameParams
from .transforms import RECTANGULAR, WindowSpec, isfft, sfft, unvec, vec, window_spill

_NOISELESS_FLOOR = 1e-8  # relative to the pilot amplitude


@dataclass(frozen=True)
class PilotScheme:
    """Single DD pilot with a zeroed guard box and a tap search region.

    Guard and search sizes are half-widths in bins. Taps are searched at
    delay offsets ``-spill_delay..search_delay`` and Doppler offsets
    ``-search_doppler..search_doppler`` from the pilot. A non-zero spill covers
    the leakage of a TF window's main lobe to negative delays.
    """

    params: OtfsFrameParams
    pilot_pos: tuple[int, int]
    pilot_amplitude: float
    guard_delay: int
    guard_doppler: int
    search_delay: int
    search_doppler: int
    spill_delay: int = 0

    def __post_init__(self):
        M, N = self.params.M, self.params.N
        lp, kp = self.pilot_pos
        if not (0 <= lp < M and 0 <= kp < N):
            raise ValueError("pilot outside the grid")
        if self.pilot_amplitude <= 0:
            raise ValueError("pilot amplitude must be positive")
        sizes = (self.guard_delay, self.guard_doppler, self.search_delay, self.search_doppler,
                 self.spill_delay)
        if min(sizes) < 0:
            raise ValueError("guard and search half-widths must be >= 0")
        if 2 * self.guard_delay + 1 > M or 2 * self.guard_doppler + 1 > N:
            raise ValueError("guard region does not fit in the grid")
        if not 0 < self.eta < 1:
            raise ValueError("guard region leaves no data cells")
        if self.search_delay + self.spill_delay >= M or 2 * self.search_doppler + 1 > N:
            raise ValueError("search region does not fit in the grid")

    @property
    def guard_mask(self) -> np.ndarray:
        """Cells reserved for pilot and guard (True)."""
        M, N = self.params.M, self.params.N
        lp, kp = self.pilot_pos
        mask = np.zeros((M, N), dtype=bool)
        rows = (lp + np.arange(-self.guard_delay, self.guard_delay + 1)) % M
        cols = (kp + np.arange(-self.guard_doppler, self.guard_doppler + 1)) % N
        mask[np.ix_(rows, cols)] = True
        return mask

    @property
    def data_mask(self) -> np.ndarray:
        return ~self.guard_mask

    @property
    def eta(self) -> float:
        """Fraction of the grid spent on pilot and guard."""
        return (2 * self.guard_delay + 1) * (2 * self.guard_doppler + 1) / self.params.size

    @property
    def n_data(self) -> int:
        return self.params.size - (2 * self.guard_delay + 1) * (2 * self.guard_doppler + 1)

    def pilot_grid(self) -> np.ndarray:
        g = np.zeros((self.params.M, self.params.N), dtype=complex)
        g[self.pilot_pos] = self.pilot_amplitude
        return g


def default_scheme(params: OtfsFrameParams, l_max: int, kappa_max: float, fractional: bool = False,
                   pilot_boost_db: float = 0.0, guard: bool = True,
                   window: WindowSpec = RECTANGULAR, extra_doppler: int | None = None) -> PilotScheme:
    """Pilot at the grid centre, guard sized for the channel support.

    Delay guard half-width is ``l_max`` and Doppler half-width ``2 kappa_max``;
    fractional Doppler adds ``ceil(N/16)`` bins and a TF window adds its
    main-lobe spill on both axes. ``guard=False`` gives the single pilot with
    no guard.
    """
    M, N = params.M, params.N
    k_sup = math.ceil(kappa_max)
    if extra_doppler is None:
        extra_doppler = math.ceil(N / 16) if fractional else 0
    spill_l = window_spill(M, window)
    spill_k = window_spill(N, window)
    amp = math.sqrt(params.size) * 10 ** (pilot_boost_db / 20)
    search_delay = min(l_max + spill_l, M - 1 - spill_l)
    search_doppler = min(k_sup + extra_doppler + spill_k, (N - 1) // 2)
    if guard:
        gd = min(l_max + 2 * spill_l, (M - 1) // 2)
        gk = min(2 * k_sup + extra_doppler + 2 * spill_k, (N - 1) // 2)
    else:
        gd = gk = 0
    return PilotScheme(params, (M // 2, N // 2), amp, gd, gk, search_delay, search_doppler, spill_l)


def embed_pilot(data, scheme: PilotScheme) -> np.ndarray:
    """Zero the guard box, place the pilot, leave data elsewhere untouched."""
    frame = np.array(data, dtype=complex, copy=True)
    if frame.shape != (scheme.params.M, scheme.params.N):
        raise ValueError("data grid does not match the scheme's frame size")
    frame[scheme.guard_mask] = 0.0
    frame[scheme.pilot_pos] = scheme.pilot_amplitude
    return frame


class Tap(NamedTuple):
    """Estimated on-grid tap: gain at a (delay, Doppler) offset in bins."""

    gain: complex
    delay: int
    doppler: int


@dataclass
class ChannelEstimate:
    """Estimated DD channel as on-grid taps plus the dense response they imply.

    ``dense`` is the response to an impulse at ``ref`` (the pilot position),
    indexed by offset from it. Taps describe the effective channel, TF window
    included, under the closed-form shift model of :func:`shift_operator`.
    """

    taps: tuple[Tap, ...]
    dense: np.ndarray
    params: OtfsFrameParams
    ref: tuple[int, int]
    window_used: WindowSpec = RECTANGULAR
    noise_var_est: float = 0.0
    flags: dict = field(default_factory=dict)

    def operator(self) -> sp.csr_matrix:
        return shift_operator(self.params, self.taps)

    @classmethod
    def from_taps(cls, taps, params: OtfsFrameParams, ref, window_used: WindowSpec = RECTANGULAR,
                  noise_var_est: float = 0.0, flags=None) -> "ChannelEstimate":
        taps = tuple(Tap(complex(g), int(d), int(k)) for g, d, k in taps)
        dense = np.zeros((params.M, params.N), dtype=complex)
        lp, kp = ref
        for g, d, k in taps:
            l_out = (lp + d) % params.M
            dense[d % params.M, k % params.N] += g * _tap_phase(params, l_out, d, k)
        return cls(taps, dense, params, tuple(ref), window_used, noise_var_est, dict(flags or {}))


def _tap_phase(params: OtfsFrameParams, l_out, delay, kappa):
    """Phase a unit tap (delay, kappa) puts on output delay bin ``l_out``."""
    return np.exp(2j * np.pi * kappa * _doppler_step(params) * (params.cp_len + l_out - delay))


def estimate_dd(received, scheme: PilotScheme, threshold_factor: float = 3.0,
                window: WindowSpec = RECTANGULAR, noise_var: float | None = None) -> ChannelEstimate:
    """Declare a tap wherever the pilot's search region exceeds ``threshold_factor`` sigma.

    Without ``noise_var`` the noise level is a median estimate over the search
    region. Taps occupy few of its cells, while guard cells outside it collect
    data leaking across the guard edge, so the median there is the more
    faithful noise reference. Without a guard the estimate includes data
    interference, which is what the threshold has to clear.
    """
    params = scheme.params
    M, N = params.M, params.N
    Y = np.asarray(received)
    lp, kp = scheme.pilot_pos
    A = scheme.pilot_amplitude
    dks = np.arange(-scheme.search_doppler, scheme.search_doppler + 1)
    dls = np.arange(-scheme.spill_delay, scheme.search_delay + 1)
    region = Y[np.ix_((lp + dls) % M, (kp + dks) % N)]

    if noise_var is None:
        sigma2 = float(np.median(np.abs(region) ** 2) / math.log(2))
    else:
        sigma2 = float(noise_var)
    threshold = max(threshold_factor * math.sqrt(sigma2), _NOISELESS_FLOOR * A)

    taps = []
    for i, dl in enumerate(dls):
        l_out = (lp + dl) % M
        for j, dk in enumerate(dks):
            c = region[i, j]
            if abs(c) > threshold:
                taps.append((c / (A * _tap_phase(params, l_out, dl, dk)), int(dl), int(dk)))
    return ChannelEstimate.from_taps(taps, params, (lp, kp), window, sigma2, {"threshold": threshold})


def nmse(est: ChannelEstimate, truth: ChannelRealization) -> float:
    """||h_hat - h||^2 / ||h||^2 over dense DD responses seen from ``est.ref``."""
    h = impulse_response(truth, est.window_used, est.ref)
    energy = np.sum(np.abs(h) ** 2)
    if energy == 0:
        raise ValueError("truth has zero energy")
    return float(np.sum(np.abs(est.dense - h) ** 2) / energy)


def tf_pilot_lattice(params: OtfsFrameParams, step_m: int, step_n: int) -> np.ndarray:
    """Pilots every ``step_m`` subcarriers and ``step_n`` slots, centred in the grid."""
    mask = np.zeros((params.M, params.N), dtype=bool)
    m0 = (params.M - 1) % step_m // 2
    n0 = (params.N - 1) % step_n // 2
    mask[m0::step_m, n0::step_n] = True
    return mask


def _interp_complex(target, known, values):
    return np.interp(target, known, values.real) + 1j * np.interp(target, known, values.imag)


def estimate_tf(received_tf, pilot_mask, known_pilots) -> np.ndarray:
    """LS at pilot cells, bilinear interpolation (edge-clamped) everywhere else.

    Pilots must sit on a lattice: every pilot row has pilots in the same columns.
    """
    Y = np.asarray(received_tf)
    mask = np.asarray(pilot_mask, dtype=bool)
    X = np.asarray(known_pilots)
    rows = np.flatnonzero(mask.any(axis=1))
    cols = np.flatnonzero(mask.any(axis=0))
    if rows.size == 0:
        raise ValueError("pilot mask is empty")
    lattice = np.zeros_like(mask)
    lattice[np.ix_(rows, cols)] = True
    if not np.array_equal(lattice, mask):
        raise ValueError("pilot mask is not a rectangular lattice")
    Xp = X[np.ix_(rows, cols)]
    if np.any(Xp == 0):
        raise ValueError("zero-valued pilot")
    H_p = Y[np.ix_(rows, cols)] / Xp
    M, N = Y.shape
    H_cols = np.stack([_interp_complex(np.arange(M), rows, H_p[:, j]) for j in range(cols.size)], axis=1)
    return np.stack([_interp_complex(np.arange(N), cols, H_cols[m]) for m in range(M)], axis=0)


def tf_estimate_dense(H_tf, params: OtfsFrameParams, ref) -> np.ndarray:
    """Dense DD response of a one-tap-per-cell TF channel to an impulse at ``ref``."""
    dd = np.zeros((params.M, params.N), dtype=complex)
    dd[tuple(ref)] = 1.0
    out = sfft(np.asarray(H_tf) * isfft(dd))
    return np.roll(out, (-ref[0], -ref[1]), axis=(0, 1))


def ddce_refine(received, detected, reliabilities, prior: ChannelEstimate, scheme: PilotScheme,
                reliability_threshold: float = 0.99, noise_var: float | None = None,
                soft=None, threshold_factor: float | None = 3.0) -> ChannelEstimate:
    """Weighted least-squares tap re-estimation with reliable decisions as virtual pilots.

    Pilot and guard cells are known exactly; data cells whose reliability
    reaches the threshold act as virtual pilots. The remaining cells enter as
    interference: zero-mean with unit energy, or, when ``soft = (means,
    variances)`` grids are given, with those moments. Every observation row is
    weighted by the inverse of its noise-plus-interference power.

    The tap support is the prior's support plus any offset around the pilot
    that exceeds ``threshold_factor`` sigma once the data contribution has been
    cancelled with the prior (``None`` keeps the prior support). With nothing
    reliable the prior is returned with ``flags['unchanged']`` set.
    """
    params = scheme.params
    M, N = params.M, params.N
    y = vec(np.asarray(received))
    rel = np.asarray(reliabilities, dtype=float)
    reliable = scheme.data_mask & (rel >= reliability_threshold)
    reliable_data = int(np.count_nonzero(reliable))
    if reliable_data == 0 or not prior.taps:
        return ChannelEstimate(prior.taps, prior.dense, prior.params, prior.ref, prior.window_used,
                               prior.noise_var_est, dict(prior.flags, unchanged=True))

    detected = np.asarray(detected, dtype=complex)
    nv = prior.noise_var_est if noise_var is None else float(noise_var)
    prior_op = prior.operator()
    power_op = abs(prior_op).power(2)

    def moments(means, var):
        x_grid = np.where(reliable, detected, np.where(scheme.data_mask, means, 0.0))
        x_grid[scheme.pilot_pos] = scheme.pilot_amplitude
        return vec(x_grid), power_op @ vec(np.where(scheme.data_mask & ~reliable, var, 0.0))

    if soft is None:
        x, interference = moments(np.zeros((M, N), dtype=complex), np.ones((M, N)))
    else:
        x, interference = moments(np.asarray(soft[0], dtype=complex), np.asarray(soft[1], dtype=float))
    support = {(t.delay, t.doppler) for t in prior.taps}
    if threshold_factor is not None:
        data_only = x.copy()
        data_only[scheme.pilot_pos[0] + M * scheme.pilot_pos[1]] = 0.0
        resid = unvec(y - prior_op @ data_only, M, N)
        level = unvec(np.sqrt(nv + interference), M, N)
        lp, kp = scheme.pilot_pos
        floor = _NOISELESS_FLOOR * scheme.pilot_amplitude
        for dl in range(-scheme.spill_delay, scheme.search_delay + 1):
            for dk in range(-scheme.search_doppler, scheme.search_doppler + 1):
                cell = ((lp + dl) % M, (kp + dk) % N)
                if abs(resid[cell]) > max(threshold_factor * level[cell], floor):
                    support.add((dl, dk))
    support = sorted(support)

    bases = [shift_operator(params, [(1.0, d, k)]) for d, k in support]
    sw = 1.0 / np.sqrt(np.maximum(nv + interference, 1e-12))
    A = np.column_stack([B @ x for B in bases])
    gains, *_ = np.linalg.lstsq(A * sw[:, None], y * sw, rcond=None)
    clean = interference == 0
    resid = (y - A @ gains)[clean]
    noise = float(np.mean(np.abs(resid) ** 2)) if resid.size else nv
    taps = [(g, d, k) for g, (d, k) in zip(gains, support)]
    return ChannelEstimate.from_taps(taps, params, prior.ref, prior.window_used, noise,
                                     {"unchanged": False, "reliable": reliable_data,
                                      "support_size": len(support)})
