from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .constellation import Constellation, soft_demap


@dataclass
class DetectionResult:
    """Posteriors over constellation points for each DD cell (vec order)."""

    posteriors: np.ndarray
    constellation: Constellation
    iterations_used: int = 1
    converged: bool = True
    flags: dict = field(default_factory=dict)

    @property
    def hard_indices(self) -> np.ndarray:
        return np.argmax(self.posteriors, axis=-1)

    @property
    def hard_symbols(self) -> np.ndarray:
        return self.constellation.points[self.hard_indices]

    @property
    def reliabilities(self) -> np.ndarray:
        return np.max(self.posteriors, axis=-1)

    @property
    def llrs(self) -> np.ndarray:
        return soft_demap(self.posteriors, self.constellation)

    @property
    def hard_bits(self) -> np.ndarray:
        return self.constellation.indices_to_bits(self.hard_indices)
