"""Triangle mesh containers, adjacency queries, and per-facet geometry."""

from dataclasses import dataclass

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .errors import StructuralError
from .validation import as_facets, as_feature_matrix, as_positions


class TriMesh:
    """A triangular mesh of vertex positions, per-vertex features, and facets.

    positions : (n, 3) float64
    features  : (n, c) float, c >= 0; defaults to a copy of the positions so
                every mesh carries usable x/y/z input channels
    facets    : (m, 3) int64 vertex indices; m may be 0 (e.g. for fully
                collapsed decimation outputs)
    """

    __slots__ = ("positions", "features", "facets")

    def __init__(self, positions, facets, features=None):
        self.positions = as_positions(positions)
        self.facets = as_facets(facets, len(self.positions))
        if features is None:
            self.features = self.positions.copy()
        else:
            self.features = as_feature_matrix(features, len(self.positions))

    @property
    def n_vertices(self) -> int:
        return len(self.positions)

    @property
    def n_facets(self) -> int:
        return len(self.facets)

    @property
    def n_channels(self) -> int:
        return self.features.shape[1]

    def copy(self) -> "TriMesh":
        return TriMesh(self.positions.copy(), self.facets.copy(), self.features.copy())

    def __repr__(self):
        return (
            f"TriMesh(n_vertices={self.n_vertices}, n_facets={self.n_facets}, "
            f"n_channels={self.n_channels})"
        )


@dataclass
class FacetGeometry:
    """Per-facet plane geometry, stored as arrays over all facets.

    The plane of facet i satisfies ``normal[i] @ x + intercept[i] == 0``.
    Zero-area facets keep a zero normal and are marked in `degenerate`.
    """

    normal: np.ndarray      # (m, 3) unit vectors, zero rows for degenerate facets
    area: np.ndarray        # (m,)
    intercept: np.ndarray   # (m,)
    degenerate: np.ndarray  # (m,) bool

    def __len__(self):
        return len(self.area)


def compute_facet_geometry(mesh: TriMesh) -> FacetGeometry:
    """Unit normal, area, and plane intercept for every facet.

    Area is half the magnitude of the cross product of two edge vectors.
    """
    v0 = mesh.positions[mesh.facets[:, 0]]
    v1 = mesh.positions[mesh.facets[:, 1]]
    v2 = mesh.positions[mesh.facets[:, 2]]
    cross = np.cross(v1 - v0, v2 - v0)
    cross_norm = np.linalg.norm(cross, axis=1)
    area = 0.5 * cross_norm
    degenerate = cross_norm == 0.0
    normal = np.zeros_like(cross)
    ok = ~degenerate
    normal[ok] = cross[ok] / cross_norm[ok, None]
    intercept = -np.einsum("ij,ij->i", normal, v0)
    return FacetGeometry(normal=normal, area=area, intercept=intercept, degenerate=degenerate)


@dataclass
class VertexFacetAdjacency:
    """CSR-style map from each vertex to the facets containing it.

    ``facet_ids[offsets[v]:offsets[v+1]]`` are the facets adjacent to vertex
    v, in ascending order. The total entry count is exactly 3 * n_facets.
    """

    offsets: np.ndarray    # (n + 1,) int64
    facet_ids: np.ndarray  # (3 m,) int64

    @property
    def counts(self) -> np.ndarray:
        return np.diff(self.offsets)

    @property
    def n_vertices(self) -> int:
        return len(self.offsets) - 1

    def facets_of(self, vertex: int) -> np.ndarray:
        return self.facet_ids[self.offsets[vertex]:self.offsets[vertex + 1]]


def vertex_facet_adjacency(mesh: TriMesh) -> VertexFacetAdjacency:
    """Build the vertex -> adjacent-facet map for the whole mesh."""
    flat_vertices = mesh.facets.ravel()
    flat_facets = np.repeat(np.arange(mesh.n_facets, dtype=np.int64), 3)
    order = np.argsort(flat_vertices, kind="stable")
    counts = np.bincount(flat_vertices, minlength=mesh.n_vertices)
    offsets = np.zeros(mesh.n_vertices + 1, dtype=np.int64)
    np.cumsum(counts, out=offsets[1:])
    return VertexFacetAdjacency(offsets=offsets, facet_ids=flat_facets[order])


def edge_list(mesh: TriMesh) -> np.ndarray:
    """Unique undirected edges as an (e, 2) array with pairs sorted low-high.

    Rows are in lexicographic order. Every returned pair appears in at least
    one facet, and e <= 3 * n_facets.
    """
    f = mesh.facets
    raw = np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]], axis=0)
    raw.sort(axis=1)
    return np.unique(raw, axis=0)


@dataclass
class BatchedMesh:
    """Several meshes concatenated into one, with per-mesh offset bookkeeping.

    Facet indices of mesh b are shifted so they reference the global vertex
    range [vertex_offsets[b], vertex_offsets[b+1]).
    """

    mesh: TriMesh
    vertex_offsets: np.ndarray  # (b + 1,) int64, starts at 0
    facet_offsets: np.ndarray   # (b + 1,) int64, starts at 0

    def __post_init__(self):
        self.vertex_offsets = np.ascontiguousarray(self.vertex_offsets, dtype=np.int64)
        self.facet_offsets = np.ascontiguousarray(self.facet_offsets, dtype=np.int64)
        for name, offs, total in (
            ("vertex_offsets", self.vertex_offsets, self.mesh.n_vertices),
            ("facet_offsets", self.facet_offsets, self.mesh.n_facets),
        ):
            if offs[0] != 0 or offs[-1] != total or (np.diff(offs) < 0).any():
                raise StructuralError(f"{name} must be monotone from 0 to {total}")
        lo = self.vertex_offsets[:-1]
        hi = self.vertex_offsets[1:]
        for b in range(self.n_meshes):
            sub = self.mesh.facets[self.facet_offsets[b]:self.facet_offsets[b + 1]]
            if sub.size and (sub.min() < lo[b] or sub.max() >= hi[b]):
                raise StructuralError(
                    f"facets of batch entry {b} reference vertices outside "
                    f"[{lo[b]}, {hi[b]})"
                )

    @property
    def n_meshes(self) -> int:
        return len(self.vertex_offsets) - 1

    @property
    def n_vertices(self) -> int:
        return self.mesh.n_vertices

    @property
    def n_facets(self) -> int:
        return self.mesh.n_facets

    @property
    def positions(self) -> np.ndarray:
        return self.mesh.positions

    @property
    def features(self) -> np.ndarray:
        return self.mesh.features

    @property
    def facets(self) -> np.ndarray:
        return self.mesh.facets

    def split(self) -> list[TriMesh]:
        """Recover the individual meshes (the inverse of concat_batch)."""
        out = []
        for b in range(self.n_meshes):
            v0, v1 = self.vertex_offsets[b], self.vertex_offsets[b + 1]
            f0, f1 = self.facet_offsets[b], self.facet_offsets[b + 1]
            out.append(
                TriMesh(
                    self.mesh.positions[v0:v1],
                    self.mesh.facets[f0:f1] - v0,
                    self.mesh.features[v0:v1],
                )
            )
        return out


def duplicate_facet_count(mesh: TriMesh) -> int:
    """Number of facets that repeat an earlier facet's vertex set.

    Duplicates are kept in the mesh; this only reports them.
    """
    if mesh.n_facets == 0:
        return 0
    key = np.sort(mesh.facets, axis=1)
    return mesh.n_facets - len(np.unique(key, axis=0))


def connected_component_count(mesh: TriMesh) -> int:
    """Number of vertex-connected components (isolated vertices count)."""
    if mesh.n_vertices == 0:
        return 0
    if mesh.n_facets == 0:
        return mesh.n_vertices
    edges = edge_list(mesh)
    ones = np.ones(len(edges))
    adj = coo_matrix(
        (ones, (edges[:, 0], edges[:, 1])),
        shape=(mesh.n_vertices, mesh.n_vertices),
    )
    return int(connected_components(adj, directed=False, return_labels=False))
