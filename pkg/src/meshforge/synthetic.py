"""Deterministic synthetic meshes for tests and benchmarks.

Generators instead of binary fixtures keep the repository data-free; every
function is reproducible from its seed.
"""

import numpy as np
from scipy.spatial import Delaunay

from .mesh import TriMesh


def perturbed_grid(nx: int, ny: int | None = None, noise: float = 0.05, seed: int = 0) -> TriMesh:
    """Regular nx-by-ny height-field grid, two triangles per cell."""
    ny = nx if ny is None else ny
    rng = np.random.default_rng(seed)
    xs, ys = np.meshgrid(np.linspace(0, 1, nx), np.linspace(0, 1, ny), indexing="ij")
    z = 0.25 * np.sin(3.0 * np.pi * xs) * np.cos(2.0 * np.pi * ys)
    z += noise * rng.standard_normal(z.shape)
    positions = np.stack([xs.ravel(), ys.ravel(), z.ravel()], axis=1)

    idx = np.arange(nx * ny).reshape(nx, ny)
    a = idx[:-1, :-1].ravel()
    b = idx[1:, :-1].ravel()
    c = idx[:-1, 1:].ravel()
    d = idx[1:, 1:].ravel()
    facets = np.concatenate(
        [np.stack([a, b, c], axis=1), np.stack([b, d, c], axis=1)], axis=0
    )
    return TriMesh(positions, facets)


def delaunay_terrain(n_vertices: int, noise: float = 0.05, seed: int = 0) -> TriMesh:
    """Irregular triangulated height field with an exact vertex count.

    Closer to scanned real-world surface meshes than a regular grid: vertex
    valences and facet shapes vary.
    """
    rng = np.random.default_rng(seed)
    xy = rng.random((n_vertices, 2))
    tri = Delaunay(xy)
    z = 0.25 * np.sin(3.0 * np.pi * xy[:, 0]) * np.cos(2.0 * np.pi * xy[:, 1])
    z += noise * rng.standard_normal(n_vertices)
    positions = np.concatenate([xy, z[:, None]], axis=1)
    return TriMesh(positions, tri.simplices.astype(np.int64))


def icosphere(subdivisions: int = 2, radius: float = 1.0) -> TriMesh:
    """Watertight sphere mesh: subdivided icosahedron, 20 * 4^s facets."""
    phi = (1.0 + np.sqrt(5.0)) / 2.0
    raw = np.array(
        [
            [-1, phi, 0], [1, phi, 0], [-1, -phi, 0], [1, -phi, 0],
            [0, -1, phi], [0, 1, phi], [0, -1, -phi], [0, 1, -phi],
            [phi, 0, -1], [phi, 0, 1], [-phi, 0, -1], [-phi, 0, 1],
        ],
        dtype=np.float64,
    )
    vertices = [v / np.linalg.norm(v) for v in raw]
    facets = [
        (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
        (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
        (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
        (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
    ]
    for _ in range(subdivisions):
        midpoint: dict[tuple[int, int], int] = {}

        def split(i, j):
            key = (min(i, j), max(i, j))
            if key not in midpoint:
                v = vertices[i] + vertices[j]
                vertices.append(v / np.linalg.norm(v))
                midpoint[key] = len(vertices) - 1
            return midpoint[key]

        refined = []
        for i, j, k in facets:
            ij, jk, ki = split(i, j), split(j, k), split(k, i)
            refined += [(i, ij, ki), (j, jk, ij), (k, ki, jk), (ij, jk, ki)]
        facets = refined
    positions = radius * np.asarray(vertices)
    return TriMesh(positions, np.asarray(facets, dtype=np.int64))


def random_small_mesh(n_vertices: int, rng) -> TriMesh:
    """Tiny irregular mesh for randomized property tests and gradchecks."""
    rng = np.random.default_rng(rng)
    xy = rng.random((n_vertices, 2))
    tri = Delaunay(xy)
    z = 0.3 * rng.standard_normal(n_vertices)
    positions = np.concatenate([xy, z[:, None]], axis=1)
    mesh = TriMesh(positions, tri.simplices.astype(np.int64))
    mesh.features = rng.standard_normal((n_vertices, mesh.n_channels))
    return mesh
