from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True, eq=False)
class SurvivalCurve:
    """Right-continuous step function over event times.

    ``S(t)`` is the value at the largest time ``<= t``, and 1 before the
    first time.  After the last time the value is held constant.
    ``n_clipped`` counts hazards that had to be clipped to 1.
    """

    times: np.ndarray
    survival: np.ndarray
    n_clipped: int = 0

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float).reshape(-1)
        surv = np.asarray(self.survival, dtype=float).reshape(-1)
        if times.shape != surv.shape:
            raise ValueError("times and survival must have the same length")
        if np.any(np.diff(times) <= 0):
            raise ValueError("times must be strictly increasing")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "survival", surv)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        idx = np.searchsorted(self.times, t, side="right")
        vals = np.concatenate([[1.0], self.survival])[idx]
        return float(vals) if vals.ndim == 0 else vals

    def left_limit(self, t):
        """``S(t-)``: value just before ``t``."""
        t = np.asarray(t, dtype=float)
        idx = np.searchsorted(self.times, t, side="left")
        vals = np.concatenate([[1.0], self.survival])[idx]
        return float(vals) if vals.ndim == 0 else vals

    def __len__(self) -> int:
        return self.times.shape[0]

    @classmethod
    def from_hazards(cls, times, hazards, n_clipped: int = 0) -> "SurvivalCurve":
        return cls(np.asarray(times, dtype=float), np.cumprod(1.0 - np.asarray(hazards, dtype=float)),
                   n_clipped)
