"""Power-law fits in log-log coordinates."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np


@dataclass(frozen=True)
class PowerFit:
    slope: float
    intercept: float
    r2: float

    def predict(self, n):
        return np.exp(self.intercept) * np.asarray(n, dtype=float) ** self.slope


def fit_exponent(points: Iterable[tuple[float, float]]) -> PowerFit:
    """Least-squares line through (log n, log value)."""
    pts = np.asarray(list(points), dtype=float)
    if pts.ndim != 2 or pts.shape[0] < 3 or pts.shape[1] != 2:
        raise ValueError("need at least 3 (n, value) points")
    if np.any(pts <= 0) or not np.all(np.isfinite(pts)):
        raise ValueError("n and values must be positive and finite")
    x, y = np.log(pts[:, 0]), np.log(pts[:, 1])
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return PowerFit(float(slope), float(intercept), r2)
