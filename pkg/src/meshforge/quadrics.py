"""Quadric error forms for planes, vertices, and vertex clusters.

A quadric (a, b, c) assigns the error x^T a x + 2 b^T x + c to any point x.
For a facet plane it equals the squared point-to-plane distance, so sums of
facet quadrics measure total squared deviation from a set of planes.
"""

from dataclasses import dataclass

import numpy as np

from .mesh import FacetGeometry

# Below this reciprocal condition number the matrix term is treated as
# singular and optimal placement falls back to the member average.
RCOND_LIMIT = 1e-10


@dataclass
class Quadric:
    """Batched quadric forms: a is (..., 3, 3) symmetric, b is (..., 3), c is (...,)."""

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray

    @classmethod
    def zeros(cls, shape) -> "Quadric":
        shape = (shape,) if np.isscalar(shape) else tuple(shape)
        return cls(
            a=np.zeros(shape + (3, 3)),
            b=np.zeros(shape + (3,)),
            c=np.zeros(shape),
        )

    @classmethod
    def from_planes(cls, normals: np.ndarray, intercepts: np.ndarray) -> "Quadric":
        """Quadric of the plane n @ x + d = 0: (n n^T, d n, d^2)."""
        normals = np.atleast_2d(normals)
        intercepts = np.atleast_1d(intercepts)
        return cls(
            a=normals[..., :, None] * normals[..., None, :],
            b=intercepts[..., None] * normals,
            c=intercepts**2,
        )

    def __add__(self, other: "Quadric") -> "Quadric":
        return Quadric(self.a + other.a, self.b + other.b, self.c + other.c)

    def take(self, index) -> "Quadric":
        return Quadric(self.a[index], self.b[index], self.c[index])

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        """Error at each point: x^T a x + 2 b^T x + c."""
        points = np.asarray(points, dtype=np.float64)
        quad = np.einsum("...i,...ij,...j->...", points, self.a, points)
        lin = 2.0 * np.einsum("...i,...i->...", self.b, points)
        return quad + lin + self.c


def facet_quadrics(geometry: FacetGeometry) -> Quadric:
    """One plane quadric per facet; degenerate facets get the zero quadric."""
    q = Quadric.from_planes(geometry.normal, geometry.intercept)
    # zero normals already give zero a and b; force c for safety
    q.c = np.where(geometry.degenerate, 0.0, q.c)
    return q


def vertex_quadrics(n_vertices: int, facets: np.ndarray, facet_q: Quadric) -> Quadric:
    """Per-vertex quadrics: the sum over each vertex's adjacent facets."""
    out = Quadric.zeros(n_vertices)
    for corner in range(3):
        idx = facets[:, corner]
        np.add.at(out.a, idx, facet_q.a)
        np.add.at(out.b, idx, facet_q.b)
        np.add.at(out.c, idx, facet_q.c)
    return out


def accumulate_quadrics(vertex_q: Quadric, groups: np.ndarray, n_groups: int) -> Quadric:
    """Sum vertex quadrics into `n_groups` buckets given per-vertex group ids."""
    out = Quadric.zeros(n_groups)
    np.add.at(out.a, groups, vertex_q.a)
    np.add.at(out.b, groups, vertex_q.b)
    np.add.at(out.c, groups, vertex_q.c)
    return out


def optimal_positions(
    quadric: Quadric, average_positions: np.ndarray, placement: str
) -> np.ndarray:
    """Contraction target for each quadric.

    'average' returns the member average unchanged. 'inverse' solves
    a x = -b per quadric, falling back to the average wherever the matrix
    term has reciprocal condition number below RCOND_LIMIT.
    """
    if placement == "average":
        return np.array(average_positions, dtype=np.float64)
    if placement != "inverse":
        raise ValueError(f"placement must be 'average' or 'inverse', got {placement!r}")
    targets = np.array(average_positions, dtype=np.float64)
    eig = np.linalg.eigvalsh(quadric.a)
    lo = np.abs(eig).min(axis=-1)
    hi = np.abs(eig).max(axis=-1)
    ok = hi > 0
    rcond = np.zeros_like(hi)
    rcond[ok] = lo[ok] / hi[ok]
    solvable = rcond >= RCOND_LIMIT
    if solvable.any():
        targets[solvable] = np.linalg.solve(
            quadric.a[solvable], -quadric.b[solvable][..., None]
        )[..., 0]
    return targets


def pair_costs(
    positions: np.ndarray,
    vertex_q: Quadric,
    pairs: np.ndarray,
    placement: str = "average",
) -> tuple[np.ndarray, np.ndarray]:
    """Contraction cost and target position for each vertex pair.

    The pair quadric is the sum of the two vertex quadrics, evaluated at the
    placement target.
    """
    pairs = np.atleast_2d(np.asarray(pairs, dtype=np.int64))
    q = vertex_q.take(pairs[:, 0]) + vertex_q.take(pairs[:, 1])
    midpoints = 0.5 * (positions[pairs[:, 0]] + positions[pairs[:, 1]])
    targets = optimal_positions(q, midpoints, placement)
    return q.evaluate(targets), targets
