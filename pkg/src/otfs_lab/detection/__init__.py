"""Detector suite: LMMSE, MPA, CDID, exhaustive MAP and the OFDM one-tap baseline."""

from dataclasses import dataclass

from .cdid import detect_cdid, dd_to_time, strip_cp, time_to_dd
from .constellation import QPSK, Constellation, gaussian_posteriors, soft_demap
from .linear import detect_lmmse, detect_ofdm_onetap, lmmse_equalize
from .map import detect_map
from .mpa import FactorGraph, detect_mpa, sparsify
from .result import DetectionResult

VARIANTS = ("ofdm_onetap", "lmmse", "mpa", "cdid", "map")


@dataclass(frozen=True)
class DetectorConfig:
    variant: str = "mpa"
    max_iters: int = 30
    damping: float = 0.6
    tol: float = 1e-6

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown detector {self.variant!r}; choose from {VARIANTS}")
        if not 0 < self.damping <= 1:
            raise ValueError("damping must lie in (0, 1]")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")


__all__ = [
    "Constellation", "QPSK", "DetectionResult", "DetectorConfig", "FactorGraph", "VARIANTS",
    "detect_cdid", "detect_lmmse", "detect_map", "detect_mpa", "detect_ofdm_onetap",
    "dd_to_time", "gaussian_posteriors", "lmmse_equalize", "soft_demap", "sparsify",
    "strip_cp", "time_to_dd",
]
