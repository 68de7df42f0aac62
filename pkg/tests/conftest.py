import numpy as np
import pytest

from meshforge.mesh import TriMesh

# 6-vertex clustering fixture (vertices a..f = 0..5).
#
# Facets (a,c,e), (f,c,e), (c,d,e) keep a, c, e, f in the z=0 plane while d
# and b are lifted. Edges (c,e) and (a,f) then cost exactly zero (both lie
# on every incident plane of their endpoints) while every other edge costs
# more, so a greedy scan seeds exactly {c,e} and {a,f}; d and b have no
# edge to each other and get absorbed, giving clusters {c,d,e} and {a,b,f}.
TOY_POSITIONS = np.array(
    [
        [-0.8, 0.9, 0.0],   # a
        [0.5, 1.8, 0.9],    # b (lifted)
        [0.0, 0.0, 0.0],    # c
        [0.5, -0.9, 0.3],   # d (lifted)
        [1.0, 0.0, 0.0],    # e
        [1.8, 0.9, 0.0],    # f
    ]
)
TOY_FACETS = np.array([[0, 2, 4], [5, 2, 4], [2, 3, 4], [0, 1, 5]])
TOY_CLUSTERS = [(0, 1, 5), (2, 3, 4)]  # {a,b,f}, {c,d,e}


@pytest.fixture
def toy_cluster_mesh() -> TriMesh:
    return TriMesh(TOY_POSITIONS.copy(), TOY_FACETS.copy())


@pytest.fixture
def right_triangle() -> TriMesh:
    return TriMesh([[0, 0, 0], [1, 0, 0], [0, 1, 0]], [[0, 1, 2]])


@pytest.fixture
def hinge_mesh() -> TriMesh:
    # two triangles folded along the shared edge (1, 2); contracting that
    # edge is the only zero-cost move and kills both facets
    positions = np.array(
        [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.5, 1.0, 0.0], [1.5, 1.0, 0.8]]
    )
    return TriMesh(positions, np.array([[0, 1, 2], [1, 3, 2]]))


# Asymmetric mesh on a dyadic grid: coordinates are multiples of 0.25, so
# integer translations and power-of-two scalings are exact in float64 and
# leave computed facet normals bit-identical.
DYADIC_POSITIONS = np.array(
    [
        [0.0, 0.0, 0.25], [1.25, 0.0, 0.5], [0.5, 1.0, 0.0], [1.75, 1.25, 0.75],
        [0.25, 2.0, 0.5], [2.5, 0.25, 0.0], [1.0, 2.25, 1.25],
    ]
)
DYADIC_FACETS = np.array([[0, 1, 2], [1, 3, 2], [2, 3, 4], [3, 5, 1], [3, 6, 4]])


@pytest.fixture
def dyadic_mesh() -> TriMesh:
    return TriMesh(DYADIC_POSITIONS.copy(), DYADIC_FACETS.copy())
