"""RBF basis matrices and kernel-width grids.

The width convention is ``k(x, x') = exp(-||x - x'||^2 / (2 theta^2))``; it is
stored with every model so artifacts stay self-describing.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist, pdist


@dataclass(frozen=True)
class KernelConfig:
    theta: float = 1.0
    kind: str = "rbf"

    def __post_init__(self):
        if self.kind != "rbf":
            raise ValueError(f"unsupported kernel kind {self.kind!r}")
        if not (np.isfinite(self.theta) and self.theta > 0):
            raise ValueError(f"theta must be positive and finite, got {self.theta}")


@dataclass(frozen=True)
class BasisMatrix:
    """Design matrix ``values[i, j] = k(row_points[i], col_points[j])``."""

    values: np.ndarray
    row_points: np.ndarray
    col_points: np.ndarray
    config: KernelConfig


def _as_points(x, name):
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2 or x.shape[0] == 0:
        raise ValueError(f"{name} must be a non-empty 2-D matrix")
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{name} contains non-finite values")
    return x


def cross(config: KernelConfig, rows, cols) -> BasisMatrix:
    rows = _as_points(rows, "rows")
    cols = _as_points(cols, "cols")
    if rows.shape[1] != cols.shape[1]:
        raise ValueError(f"dimension mismatch: {rows.shape[1]} vs {cols.shape[1]}")
    sq = cdist(rows, cols, "sqeuclidean")
    return BasisMatrix(np.exp(-sq / (2.0 * config.theta ** 2)), rows, cols, config)


def gram(config: KernelConfig, points) -> BasisMatrix:
    points = _as_points(points, "points")
    basis = cross(config, points, points)
    values = 0.5 * (basis.values + basis.values.T)
    np.fill_diagonal(values, 1.0)
    return BasisMatrix(values, points, points, config)


def theta_grid(points, count: int = 9) -> list[float]:
    """``count`` widths, geometric in 2^-4..2^4 around the median pairwise distance."""
    points = _as_points(points, "points")
    if count < 1:
        raise ValueError("count must be positive")
    d = pdist(points)
    d = d[d > 0]
    if d.size == 0:
        raise ValueError("theta_grid needs at least 2 distinct points")
    centre = float(np.median(d))
    if count == 1:
        return [centre]
    return [centre * 2.0 ** e for e in np.linspace(-4.0, 4.0, count)]
