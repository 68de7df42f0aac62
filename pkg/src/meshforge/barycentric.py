"""Barycentric interpolation plans for facet-level convolutions.

Each facet gets a triangular lattice of interior points, sized by its area
relative to the mesh's area range. The lattice resolution k yields
K = k (k + 1) / 2 points per facet.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np


@dataclass
class BarycentricPlan:
    """Per-facet barycentric sample points, stored flat.

    Facet f owns rows ``offsets[f]:offsets[f+1]`` of `xi`; each row is a
    nonnegative triple summing to one. `resolution` holds the per-facet k.
    """

    xi: np.ndarray          # (total_points, 3)
    offsets: np.ndarray     # (m + 1,) int64
    resolution: np.ndarray  # (m,) int64
    alpha: int
    beta: int

    @property
    def points_per_facet(self) -> np.ndarray:
        return np.diff(self.offsets)

    @property
    def n_facets(self) -> int:
        return len(self.offsets) - 1


@lru_cache(maxsize=64)
def lattice_points(k: int) -> np.ndarray:
    """The K = k(k+1)/2 uniform barycentric lattice points for resolution k.

    k == 1 is the single centroid. For k >= 2 the rows are
    (i/k', j/k', (k'-i-j)/k') with k' = k - 1, i outer and j inner, which
    includes the facet corners; the point set is symmetric under any
    permutation of the three barycentric axes.
    """
    if k < 1:
        raise ValueError("lattice resolution must be >= 1")
    if k == 1:
        third = 1.0 / 3.0
        return np.array([[third, third, third]])
    span = k - 1
    rows = [
        (i / span, j / span, (span - i - j) / span)
        for i in range(k)
        for j in range(k - i)
    ]
    return np.array(rows)


def facet_resolution(
    areas: np.ndarray, alpha: int = 1, beta: int = 1, alpha_inside_floor: bool = False
) -> np.ndarray:
    """Lattice resolution k per facet from its area.

    Default rule: k = floor((A - A_min) / (A_max - A_min)) * alpha + beta,
    so k is beta everywhere except the maximum-area facets, which get
    alpha + beta. With `alpha_inside_floor`, alpha scales the ratio before
    the floor instead, spreading k over beta..alpha+beta.
    When all areas are equal, k is beta everywhere.
    """
    if alpha < 1 or beta < 1:
        raise ValueError("alpha and beta must be positive integers")
    areas = np.asarray(areas, dtype=np.float64)
    lo, hi = float(areas.min()), float(areas.max())
    if hi > lo:
        ratio = (areas - lo) / (hi - lo)
    else:
        ratio = np.zeros_like(areas)
    if alpha_inside_floor:
        k = np.floor(alpha * ratio).astype(np.int64) + beta
    else:
        k = np.floor(ratio).astype(np.int64) * alpha + beta
    return k


def build_barycentric_plan(
    areas: np.ndarray, alpha: int = 1, beta: int = 1, alpha_inside_floor: bool = False
) -> BarycentricPlan:
    """Barycentric sample plan for all facets given their areas."""
    k = facet_resolution(areas, alpha, beta, alpha_inside_floor)
    points = (k * (k + 1)) // 2
    offsets = np.zeros(len(k) + 1, dtype=np.int64)
    np.cumsum(points, out=offsets[1:])
    xi = np.empty((int(offsets[-1]), 3))
    for value in np.unique(k):
        block = lattice_points(int(value))
        facets = np.flatnonzero(k == value)
        rows = (offsets[facets, None] + np.arange(len(block))[None, :]).ravel()
        xi[rows] = np.tile(block, (len(facets), 1))
    return BarycentricPlan(
        xi=xi, offsets=offsets, resolution=k, alpha=alpha, beta=beta
    )
