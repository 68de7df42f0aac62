"""Input validation helpers used across the public API."""

import numpy as np

from .errors import StructuralError


def as_positions(positions) -> np.ndarray:
    """Coerce to a contiguous (n, 3) float64 array of vertex positions."""
    arr = np.ascontiguousarray(positions, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise StructuralError(f"positions must have shape (n, 3), got {arr.shape}")
    if not np.isfinite(arr).all():
        raise StructuralError("positions contain NaN or infinite values")
    return arr


def as_facets(facets, n_vertices: int) -> np.ndarray:
    """Coerce to (m, 3) int64 facet indices and check them against the mesh.

    Rejects out-of-range indices and facets that repeat a vertex.
    """
    arr = np.ascontiguousarray(facets, dtype=np.int64)
    if arr.size == 0:
        return arr.reshape(0, 3)
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise StructuralError(f"facets must have shape (m, 3), got {arr.shape}")
    bad = np.flatnonzero((arr < 0).any(axis=1) | (arr >= n_vertices).any(axis=1))
    if bad.size:
        f = int(bad[0])
        raise StructuralError(
            f"facet {f} references vertex {int(arr[f].max())} "
            f"but the mesh has {n_vertices} vertices"
        )
    repeated = np.flatnonzero(
        (arr[:, 0] == arr[:, 1]) | (arr[:, 1] == arr[:, 2]) | (arr[:, 0] == arr[:, 2])
    )
    if repeated.size:
        f = int(repeated[0])
        raise StructuralError(f"facet {f} {tuple(arr[f])} repeats a vertex index")
    return arr


def as_feature_matrix(features, n_rows: int, name: str = "features") -> np.ndarray:
    """Coerce to an (n_rows, c) float array, preserving float32/float64."""
    arr = np.asarray(features)
    if arr.dtype not in (np.float32, np.float64):
        arr = arr.astype(np.float64)
    arr = np.ascontiguousarray(arr)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2 or arr.shape[0] != n_rows:
        raise StructuralError(
            f"{name} must have shape ({n_rows}, c), got {arr.shape}"
        )
    return arr


def check_nonempty(mesh, operation: str) -> None:
    """Enforce the minimum mesh size downstream operations rely on."""
    if mesh.n_vertices < 3 or mesh.n_facets < 1:
        raise StructuralError(
            f"{operation} requires a mesh with at least 3 vertices and 1 facet, "
            f"got {mesh.n_vertices} vertices / {mesh.n_facets} facets"
        )
