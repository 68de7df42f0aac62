import numpy as np
import pytest

from meshforge.decimate import (
    DecimationConfig,
    clusters,
    decimate_parallel,
    decimate_qem_oracle,
    quality_report,
    representative_vertices,
)
from meshforge.errors import InfeasibleTargetError
from meshforge.io import concat_batch
from meshforge.mesh import TriMesh, compute_facet_geometry, edge_list
from meshforge.quadrics import facet_quadrics, pair_costs, vertex_quadrics
from meshforge.synthetic import delaunay_terrain, perturbed_grid

from conftest import TOY_CLUSTERS


def halve(n):
    return -(-n // 2)


def test_toy_mesh_clusters(toy_cluster_mesh):
    result = decimate_parallel(
        toy_cluster_mesh, DecimationConfig(target_vertices=2, rounds=1)
    )
    assert [c.members for c in clusters(result)] == TOY_CLUSTERS
    assert result.mesh.n_vertices == 2
    np.testing.assert_array_equal(result.replace, [0, 0, 1, 1, 1, 0])
    # all four facets collapse, so every vertex degenerates away
    np.testing.assert_array_equal(result.mapping, [-1] * 6)


def test_toy_mesh_clusters_any_seed(toy_cluster_mesh):
    # the two zero-cost seed pairs dominate any shuffle of near-ties
    for seed in (None, 0, 1, 12345):
        result = decimate_parallel(
            toy_cluster_mesh,
            DecimationConfig(target_vertices=2, rounds=1, shuffle_seed=seed),
        )
        assert [c.members for c in clusters(result)] == TOY_CLUSTERS


def test_exact_vertex_count_one_round():
    mesh = delaunay_terrain(400, seed=1)
    target = halve(mesh.n_vertices)
    result = decimate_parallel(mesh, DecimationConfig(target_vertices=target))
    assert result.mesh.n_vertices == target
    assert len(np.unique(result.replace)) == target


def test_replace_is_partition():
    mesh = delaunay_terrain(300, seed=2)
    result = decimate_parallel(mesh, DecimationConfig(target_vertices=150))
    assert result.replace.shape == (300,)
    assert result.replace.min() == 0
    assert result.replace.max() == 149
    # idempotent as a cluster map: rows of one cluster share one output id
    for cluster in clusters(result):
        assert len({int(result.replace[m]) for m in cluster.members}) == 1
    # mapping agrees with replace wherever it is not -1
    live = result.mapping >= 0
    np.testing.assert_array_equal(result.mapping[live], result.replace[live])


def test_output_mesh_is_valid():
    mesh = delaunay_terrain(500, seed=3)
    result = decimate_parallel(mesh, DecimationConfig(target_vertices=250))
    out = result.mesh
    assert out.facets.min() >= 0 and out.facets.max() < out.n_vertices
    f = out.facets
    assert (f[:, 0] != f[:, 1]).all() and (f[:, 1] != f[:, 2]).all() and (f[:, 0] != f[:, 2]).all()
    # no duplicated facets
    assert len(np.unique(np.sort(f, axis=1), axis=0)) == len(f)


def test_minimum_cost_edge_contracted_first():
    mesh = delaunay_terrain(200, seed=4)
    vq = vertex_quadrics(
        mesh.n_vertices, mesh.facets, facet_quadrics(compute_facet_geometry(mesh))
    )
    edges = edge_list(mesh)
    costs, _ = pair_costs(mesh.positions, vq, edges, "average")
    result = decimate_parallel(
        mesh, DecimationConfig(target_vertices=mesh.n_vertices - 1)
    )
    sizes = result.cluster_sizes()
    assert (sizes == 2).sum() == 1 and (sizes == 1).sum() == mesh.n_vertices - 2
    pair = clusters(result)[int(np.flatnonzero(sizes == 2)[0])].members
    best = edges[np.lexsort((edges[:, 1], edges[:, 0], costs))[0]]
    assert tuple(best.tolist()) == pair


def test_determinism_with_seed():
    mesh = delaunay_terrain(300, seed=5)
    config = DecimationConfig(target_vertices=150, shuffle_seed=7)
    a = decimate_parallel(mesh, config)
    b = decimate_parallel(mesh, config)
    np.testing.assert_array_equal(a.replace, b.replace)
    np.testing.assert_array_equal(a.mapping, b.mapping)
    np.testing.assert_array_equal(a.mesh.positions, b.mesh.positions)
    np.testing.assert_array_equal(a.mesh.facets, b.mesh.facets)


def flat_grid(n):
    base = perturbed_grid(n, noise=0.0, seed=0)
    positions = base.positions.copy()
    positions[:, 2] = 0.0  # exactly planar
    return TriMesh(positions, base.facets)


def test_seeds_vary_flat_region_clustering():
    # a flat grid has massive cost ties; different seeds should regroup them
    mesh = flat_grid(20)
    a = decimate_parallel(mesh, DecimationConfig(target_vertices=200, shuffle_seed=1))
    b = decimate_parallel(mesh, DecimationConfig(target_vertices=200, shuffle_seed=2))
    assert not np.array_equal(a.replace, b.replace)


def test_multi_round_auto():
    mesh = delaunay_terrain(1000, seed=6)
    result = decimate_parallel(mesh, DecimationConfig(target_vertices=130))
    assert result.mesh.n_vertices == 130
    assert result.replace.shape == (1000,)


def test_rounds_zero_is_identity():
    mesh = delaunay_terrain(50, seed=7)
    result = decimate_parallel(
        mesh, DecimationConfig(target_vertices=50, rounds=0)
    )
    np.testing.assert_array_equal(result.replace, np.arange(50))
    np.testing.assert_array_equal(result.mapping, np.arange(50))
    np.testing.assert_array_equal(result.mesh.positions, mesh.positions)
    assert quality_report(mesh, result).max_quadric_error <= 1e-9


def test_monotone_round_counts():
    mesh = delaunay_terrain(900, seed=8)
    previous = mesh.n_vertices
    current = mesh
    for target in (450, 230, 120):
        result = decimate_parallel(current, DecimationConfig(target_vertices=target))
        assert result.mesh.n_vertices == target <= previous
        previous = target
        current = result.mesh


def test_infeasible_target_names_achievable():
    # two disconnected triangles can shrink to 2 vertices but never 1
    mesh = TriMesh(
        np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [5, 5, 5], [6, 5, 5], [5, 6, 5]], float),
        [[0, 1, 2], [3, 4, 5]],
    )
    result = decimate_parallel(mesh, DecimationConfig(target_vertices=2, rounds=1))
    assert result.mesh.n_vertices == 2
    with pytest.raises(InfeasibleTargetError) as err:
        decimate_parallel(mesh, DecimationConfig(target_vertices=1, rounds=1))
    assert err.value.achievable_vertices == 2


def test_isolated_vertex_stays_singleton():
    mesh = TriMesh(
        np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [9, 9, 9]], float), [[0, 1, 2]]
    )
    result = decimate_parallel(mesh, DecimationConfig(target_vertices=3, rounds=1))
    assert result.cluster_sizes().tolist().count(1) >= 1
    assert result.replace[3] != result.replace[0]
    # isolated vertex never had facets; it survives as its own output vertex
    assert result.mapping[3] == result.replace[3]


def test_batch_equals_per_mesh():
    meshes = [delaunay_terrain(120 + 31 * b, seed=20 + b) for b in range(4)]
    config = DecimationConfig(target_vertices=60, shuffle_seed=3)
    batch_result = decimate_parallel(concat_batch(meshes), config)
    assert batch_result.mesh.n_meshes == 4
    offset_v = 0
    outs = [decimate_parallel(m, config) for m in meshes]
    for b, (mesh, single) in enumerate(zip(meshes, outs)):
        lo, hi = batch_result.mesh.vertex_offsets[b], batch_result.mesh.vertex_offsets[b + 1]
        part = batch_result.mesh.split()[b]
        np.testing.assert_array_equal(part.positions, single.mesh.positions)
        np.testing.assert_array_equal(part.facets, single.mesh.facets)
        sel = slice(offset_v, offset_v + mesh.n_vertices)
        np.testing.assert_array_equal(batch_result.replace[sel] - lo, single.replace)
        expected_mapping = np.where(single.mapping < 0, -1, single.mapping + lo)
        np.testing.assert_array_equal(batch_result.mapping[sel], expected_mapping)
        offset_v += mesh.n_vertices


def test_representatives_are_min_members(toy_cluster_mesh):
    result = decimate_parallel(
        toy_cluster_mesh, DecimationConfig(target_vertices=2, rounds=1)
    )
    np.testing.assert_array_equal(representative_vertices(result), [0, 2])


# --- iterative oracle ---------------------------------------------------


def test_oracle_single_triangle_to_zero(right_triangle):
    result = decimate_qem_oracle(right_triangle, target_facets=0)
    assert result.mesh.n_facets == 0
    assert result.reached_target


def test_oracle_hinge_contracts_shared_edge(hinge_mesh):
    # folded shared edge (1,2) is the only zero-cost pair; contracting it
    # degenerates both facets at once
    result = decimate_qem_oracle(hinge_mesh, target_facets=1)
    assert result.mesh.n_facets == 0
    assert result.mesh.n_vertices == 3
    assert result.replace[1] == result.replace[2]
    np.testing.assert_array_equal(result.mapping, [-1, -1, -1, -1])


def test_oracle_reaches_vertex_target():
    mesh = delaunay_terrain(300, seed=9)
    result = decimate_qem_oracle(mesh, target_vertices=150)
    assert result.mesh.n_vertices == 150
    assert result.reached_target


def test_oracle_partial_flagged():
    mesh = TriMesh(
        np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [5, 5, 5], [6, 5, 5], [5, 6, 5]], float),
        [[0, 1, 2], [3, 4, 5]],
    )
    result = decimate_qem_oracle(mesh, target_vertices=1)
    assert not result.reached_target
    assert result.mesh.n_vertices == 2


def test_oracle_tau_allows_non_edge_pairs():
    # two nearby disconnected triangles: tau bridges the gap
    mesh = TriMesh(
        np.array(
            [[0, 0, 0], [1, 0, 0], [0, 1, 0], [0.05, 0.05, 0], [1.05, 0.05, 0], [0.05, 1.05, 0]]
        ),
        [[0, 1, 2], [3, 4, 5]],
    )
    result = decimate_qem_oracle(mesh, target_vertices=3, tau=0.2)
    assert result.mesh.n_vertices == 3
    assert result.reached_target


def test_oracle_requires_exactly_one_target(right_triangle):
    with pytest.raises(ValueError):
        decimate_qem_oracle(right_triangle)
    with pytest.raises(ValueError):
        decimate_qem_oracle(right_triangle, target_facets=1, target_vertices=2)


# --- quality report ------------------------------------------------------


def test_quality_identity_zero_error():
    mesh = delaunay_terrain(60, seed=10)
    result = decimate_parallel(mesh, DecimationConfig(target_vertices=60, rounds=0))
    report = quality_report(mesh, result)
    assert report.mean_quadric_error <= 1e-9
    assert report.cluster_size_counts[1] == 60


def test_quality_plane_halving_zero_error():
    mesh = flat_grid(16)
    result = decimate_parallel(
        mesh, DecimationConfig(target_vertices=halve(mesh.n_vertices))
    )
    report = quality_report(mesh, result)
    assert report.max_quadric_error <= 1e-9


def test_quality_report_counts():
    mesh = delaunay_terrain(200, seed=11)
    result = decimate_parallel(mesh, DecimationConfig(target_vertices=100))
    report = quality_report(mesh, result)
    assert report.n_vertices_in == 200
    assert report.n_vertices_out == 100
    assert report.n_facets_out == result.mesh.n_facets
    assert report.cluster_size_counts.sum() == 100
    assert "vertices 200 -> 100" in report.describe()


def test_explicit_round_count():
    mesh = delaunay_terrain(400, seed=12)
    result = decimate_parallel(
        mesh, DecimationConfig(target_vertices=100, rounds=2)
    )
    assert result.mesh.n_vertices == 100
    assert result.replace.shape == (400,)
    live = result.mapping >= 0
    np.testing.assert_array_equal(result.mapping[live], result.replace[live])


def test_rounds_validation():
    with pytest.raises(ValueError):
        DecimationConfig(target_vertices=10, rounds=-1)
    with pytest.raises(ValueError):
        DecimationConfig(target_vertices=10, rounds="three")
    with pytest.raises(ValueError):
        DecimationConfig(target_vertices=0)
    mesh = delaunay_terrain(50, seed=13)
    with pytest.raises(ValueError, match="rounds=0"):
        decimate_parallel(mesh, DecimationConfig(target_vertices=25, rounds=0))
    with pytest.raises(ValueError, match="exceeds"):
        decimate_parallel(mesh, DecimationConfig(target_vertices=51))
