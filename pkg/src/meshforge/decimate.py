"""Mesh decimation.

Two simplifiers share one output contract:

* `decimate_parallel` sorts all edges by contraction cost once, greedily
  groups disjoint vertex pairs into clusters, absorbs leftover vertices into
  adjacent clusters, and contracts every cluster independently. All heavy
  stages are vectorized over pairs/clusters; only the greedy grouping is
  sequential. Vertex count of the output is controlled exactly.

* `decimate_qem_oracle` is the classical iterative greedy simplifier:
  repeatedly contract the cheapest candidate pair, update the merged vertex
  quadric, and recompute affected pair costs. Slow but a quality baseline.

Both emit `replace` (per input vertex: index of its output vertex) and
`mapping` (same, or -1 for vertices whose every incident facet collapsed),
which drive pooling and unpooling.
"""

import heapq
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .errors import InfeasibleTargetError
from .mesh import BatchedMesh, TriMesh, compute_facet_geometry, edge_list
from .quadrics import (
    Quadric,
    accumulate_quadrics,
    facet_quadrics,
    optimal_positions,
    pair_costs,
    vertex_quadrics,
)
from .runtime import worker_count
from .validation import check_nonempty

# Near-tie window for the seeded shuffle: costs within this fraction of the
# full cost range land in the same sort bucket and may swap order.
SHUFFLE_BUCKET_FRACTION = 1e-12


@dataclass(frozen=True)
class DecimationConfig:
    """Settings for decimate_parallel.

    target_vertices : exact vertex count of the output
    placement       : 'average' contracts clusters to their member mean,
                      'inverse' solves the cluster quadric for the optimal
                      position (mean fallback for ill-conditioned clusters)
    shuffle_seed    : None for a fully deterministic cost sort; an int seeds
                      the tie-shuffling used to vary results across epochs
    rounds          : 'auto' halves the vertex count per round until the
                      target is within reach; an int forces that many rounds
                      (0 = identity, requires target_vertices == input size)
    """

    target_vertices: int
    placement: str = "average"
    shuffle_seed: int | None = None
    rounds: int | str = "auto"

    def __post_init__(self):
        if self.target_vertices < 1:
            raise ValueError("target_vertices must be >= 1")
        if self.placement not in ("average", "inverse"):
            raise ValueError(f"unknown placement {self.placement!r}")
        if self.rounds != "auto" and (not isinstance(self.rounds, int) or self.rounds < 0):
            raise ValueError("rounds must be 'auto' or a non-negative integer")


@dataclass
class DecimationResult:
    """Decimated mesh plus the cluster tensors over the input vertices."""

    mesh: TriMesh | BatchedMesh
    replace: np.ndarray  # (n_in,) output-vertex index of each input vertex
    mapping: np.ndarray  # (n_in,) same, or -1 where every incident facet collapsed
    reached_target: bool = True

    @property
    def n_vertices_in(self) -> int:
        return len(self.replace)

    @property
    def n_vertices_out(self) -> int:
        return self.mesh.n_vertices

    def cluster_sizes(self) -> np.ndarray:
        return np.bincount(self.replace, minlength=self.n_vertices_out)


@dataclass(frozen=True)
class VertexCluster:
    """One contracted vertex group: input members and its output vertex."""

    members: tuple[int, ...]
    representative: int


def clusters(result: DecimationResult) -> list[VertexCluster]:
    """The vertex clusters of a decimation, ordered by output index."""
    order = np.argsort(result.replace, kind="stable")
    sorted_ids = result.replace[order]
    starts = np.flatnonzero(np.r_[True, sorted_ids[1:] != sorted_ids[:-1]])
    bounds = np.r_[starts, len(sorted_ids)]
    return [
        VertexCluster(
            members=tuple(int(v) for v in np.sort(order[bounds[k]:bounds[k + 1]])),
            representative=int(sorted_ids[bounds[k]]),
        )
        for k in range(len(starts))
    ]


def representative_vertices(result: DecimationResult) -> np.ndarray:
    """Lowest input-vertex index of each output vertex's cluster."""
    n_in = len(result.replace)
    rep = np.full(result.n_vertices_out, n_in, dtype=np.int64)
    np.minimum.at(rep, result.replace, np.arange(n_in, dtype=np.int64))
    return rep


# ---------------------------------------------------------------------------
# shared finalization


def _output_order(cluster_ids: np.ndarray, n_clusters: int) -> np.ndarray:
    """Output index per input vertex; clusters ordered by their lowest member."""
    n = len(cluster_ids)
    rep = np.full(n_clusters, n, dtype=np.int64)
    np.minimum.at(rep, cluster_ids, np.arange(n, dtype=np.int64))
    out_of_cluster = np.empty(n_clusters, dtype=np.int64)
    out_of_cluster[np.argsort(rep)] = np.arange(n_clusters)
    return out_of_cluster[cluster_ids]


def _build_output(mesh, replace, n_out, positions_out):
    """Output mesh (remapped facets, averaged features) and mapping tensor."""
    counts = np.bincount(replace, minlength=n_out)
    feats = np.zeros((n_out, mesh.features.shape[1]))
    np.add.at(feats, replace, mesh.features)
    feats /= counts[:, None]

    mapped = replace[mesh.facets]
    degenerate = (
        (mapped[:, 0] == mapped[:, 1])
        | (mapped[:, 1] == mapped[:, 2])
        | (mapped[:, 0] == mapped[:, 2])
    )
    live = mapped[~degenerate]
    if len(live):
        key = np.sort(live, axis=1)
        _, first = np.unique(key, axis=0, return_index=True)
        live = live[np.sort(first)]

    n_in = mesh.positions.shape[0]
    had_facet = np.zeros(n_in, dtype=bool)
    has_live = np.zeros(n_in, dtype=bool)
    if len(mesh.facets):
        had_facet[np.unique(mesh.facets)] = True
    if (~degenerate).any():
        has_live[np.unique(mesh.facets[~degenerate])] = True
    mapping = replace.copy()
    mapping[had_facet & ~has_live] = -1

    return TriMesh(positions_out, live, feats), mapping


def _identity_result(mesh: TriMesh) -> DecimationResult:
    idx = np.arange(mesh.n_vertices, dtype=np.int64)
    return DecimationResult(mesh=mesh.copy(), replace=idx, mapping=idx.copy())


# ---------------------------------------------------------------------------
# parallel path


def _sorted_pair_order(costs: np.ndarray, edges: np.ndarray, seed) -> np.ndarray:
    if seed is None:
        return np.lexsort((edges[:, 1], edges[:, 0], costs))
    lo = float(costs.min())
    width = SHUFFLE_BUCKET_FRACTION * (float(costs.max()) - lo)
    if width > 0.0:
        buckets = np.floor((costs - lo) / width).astype(np.int64)
    else:
        buckets = np.zeros(len(costs), dtype=np.int64)
    keys = np.random.default_rng(seed).random(len(costs))
    return np.lexsort((keys, buckets))


def _absorb_leftovers(cluster, seeded_count, edges, costs, budget, removed):
    """Attach unclustered vertices to adjacent clusters, cheapest edge first.

    A vertex joins the cluster reachable through its lowest-cost incident
    edge; cost ties break toward the cluster with the lowest representative.
    Each absorption removes one more vertex. Runs in passes so vertices that
    only connect to freshly absorbed ones get picked up too.
    """
    n = len(cluster)
    rep = np.full(seeded_count, n, dtype=np.int64)
    members = np.flatnonzero(cluster >= 0)
    np.minimum.at(rep, cluster[members], members)
    e0, e1 = edges[:, 0], edges[:, 1]
    while removed < budget:
        c0, c1 = cluster[e0], cluster[e1]
        half = (c0 < 0) != (c1 < 0)
        if not half.any():
            break
        loose = np.where(c0[half] < 0, e0[half], e1[half])
        target = np.where(c0[half] < 0, c1[half], c0[half])
        edge_cost = costs[half]
        target_rep = rep[target]

        group = np.lexsort((target_rep, edge_cost, loose))
        lg = loose[group]
        best = group[np.flatnonzero(np.r_[True, lg[1:] != lg[:-1]])]
        order = np.lexsort((loose[best], target_rep[best], edge_cost[best]))
        chosen = best[order[: budget - removed]]

        cluster[loose[chosen]] = target[chosen]
        np.minimum.at(rep, target[chosen], loose[chosen])
        removed += len(chosen)
    return removed


def _decimate_round(mesh: TriMesh, target: int, placement: str, shuffle_seed):
    n_in = mesh.n_vertices
    if target == n_in:
        r = _identity_result(mesh)
        return r.mesh, r.replace, r.mapping
    budget = n_in - target

    geometry = compute_facet_geometry(mesh)
    vq = vertex_quadrics(n_in, mesh.facets, facet_quadrics(geometry))
    edges = edge_list(mesh)
    if len(edges) == 0:
        raise InfeasibleTargetError(
            f"mesh has no edges; cannot reach {target} vertices "
            f"(achievable minimum is {n_in})",
            achievable_vertices=n_in,
        )
    costs, _ = pair_costs(mesh.positions, vq, edges, placement)
    order = _sorted_pair_order(costs, edges, shuffle_seed)

    # Greedy scan over the sorted pairs: disjoint pairs become 2-vertex
    # clusters until enough vertices are scheduled for removal. Plain Python
    # lists keep the per-pair cost low.
    first = edges[order, 0].tolist()
    second = edges[order, 1].tolist()
    assignment = [-1] * n_in
    next_id = 0
    removed = 0
    for i, j in zip(first, second):
        if removed == budget:
            break
        if assignment[i] < 0 and assignment[j] < 0:
            assignment[i] = next_id
            assignment[j] = next_id
            next_id += 1
            removed += 1

    cluster = np.asarray(assignment, dtype=np.int64)
    if removed < budget and next_id > 0:
        removed = _absorb_leftovers(cluster, next_id, edges, costs, budget, removed)
    if removed < budget:
        raise InfeasibleTargetError(
            f"cannot reach {target} vertices in one pass; achievable minimum "
            f"is {n_in - removed}",
            achievable_vertices=n_in - removed,
        )

    loose = np.flatnonzero(cluster < 0)
    cluster[loose] = next_id + np.arange(len(loose))
    n_clusters = next_id + len(loose)
    replace = _output_order(cluster, n_clusters)

    counts = np.bincount(replace, minlength=n_clusters).astype(np.float64)
    sums = np.zeros((n_clusters, 3))
    np.add.at(sums, replace, mesh.positions)
    averages = sums / counts[:, None]
    if placement == "inverse":
        cluster_q = accumulate_quadrics(vq, replace, n_clusters)
        positions_out = optimal_positions(cluster_q, averages, "inverse")
    else:
        positions_out = averages

    out_mesh, mapping = _build_output(mesh, replace, n_clusters, positions_out)
    return out_mesh, replace, mapping


def _round_targets(n_in: int, target: int, rounds) -> list[int]:
    if rounds == "auto":
        chain = []
        current = n_in
        while -(-current // 2) > target:
            current = -(-current // 2)
            chain.append(current)
        chain.append(target)
        return chain
    k = int(rounds)
    if k == 1:
        return [target]
    # fixed round count: geometric interpolation down to the target
    ratio = (target / n_in) ** (1.0 / k)
    chain = []
    current = n_in
    for r in range(1, k):
        step = int(np.ceil(n_in * ratio**r))
        step = min(max(step, target), current)
        chain.append(step)
        current = step
    chain.append(target)
    return chain


def _merge_batch_results(results: list[DecimationResult]) -> DecimationResult:
    meshes = [r.mesh for r in results]
    vertex_offsets = np.zeros(len(meshes) + 1, dtype=np.int64)
    facet_offsets = np.zeros(len(meshes) + 1, dtype=np.int64)
    np.cumsum([m.n_vertices for m in meshes], out=vertex_offsets[1:])
    np.cumsum([m.n_facets for m in meshes], out=facet_offsets[1:])
    merged = TriMesh(
        np.concatenate([m.positions for m in meshes]),
        np.concatenate([m.facets + vertex_offsets[b] for b, m in enumerate(meshes)]),
        np.concatenate([m.features for m in meshes]),
    )
    replace = np.concatenate(
        [r.replace + vertex_offsets[b] for b, r in enumerate(results)]
    )
    mapping = np.concatenate(
        [np.where(r.mapping < 0, -1, r.mapping + vertex_offsets[b]) for b, r in enumerate(results)]
    )
    return DecimationResult(
        mesh=BatchedMesh(mesh=merged, vertex_offsets=vertex_offsets, facet_offsets=facet_offsets),
        replace=replace,
        mapping=mapping,
        reached_target=all(r.reached_target for r in results),
    )


def decimate_parallel(mesh, config: DecimationConfig) -> DecimationResult:
    """Cluster-based decimation to an exact output vertex count.

    Accepts a TriMesh or a BatchedMesh; a batch is decimated entry by entry
    (each to config.target_vertices) and re-concatenated, which is exactly
    equivalent to decimating the entries separately.

    Raises InfeasibleTargetError when the edge graph cannot support the
    requested reduction; the error names the achievable minimum.
    """
    if isinstance(mesh, BatchedMesh):
        parts = mesh.split()
        if len(parts) > 1:
            with ThreadPoolExecutor(max_workers=min(worker_count(), len(parts))) as pool:
                results = list(pool.map(lambda m: decimate_parallel(m, config), parts))
        else:
            results = [decimate_parallel(parts[0], config)]
        return _merge_batch_results(results)

    n_in = mesh.n_vertices
    target = config.target_vertices
    if target > n_in:
        raise ValueError(f"target_vertices={target} exceeds the input size {n_in}")
    if config.rounds == 0 or target == n_in:
        if target != n_in:
            raise ValueError("rounds=0 requires target_vertices == input vertex count")
        return _identity_result(mesh)
    check_nonempty(mesh, "decimate_parallel")

    replace = np.arange(n_in, dtype=np.int64)
    mapping = replace.copy()
    current = mesh
    for step in _round_targets(n_in, target, config.rounds):
        current, step_replace, step_mapping = _decimate_round(
            current, step, config.placement, config.shuffle_seed
        )
        replace = step_replace[replace]
        mapping = np.where(mapping < 0, -1, step_mapping[np.maximum(mapping, 0)])
    return DecimationResult(mesh=current, replace=replace, mapping=mapping)


# ---------------------------------------------------------------------------
# iterative oracle


def _scalar_normal(p0, p1, p2):
    ax, ay, az = p1[0] - p0[0], p1[1] - p0[1], p1[2] - p0[2]
    bx, by, bz = p2[0] - p0[0], p2[1] - p0[1], p2[2] - p0[2]
    return (ay * bz - az * by, az * bx - ax * bz, ax * by - ay * bx)


def decimate_qem_oracle(
    mesh: TriMesh,
    target_facets: int | None = None,
    tau: float = 0.0,
    *,
    target_vertices: int | None = None,
    placement: str = "average",
) -> DecimationResult:
    """Iterative greedy pair-contraction simplifier.

    Candidate pairs are mesh edges plus, for tau > 0, any vertex pair closer
    than tau. The cheapest pair is contracted, the surviving vertex inherits
    the sum of both quadrics, and costs of affected pairs are recomputed.
    Contractions that would flip a surviving facet normal are rejected.
    The default placement matches the numerically stable member-average rule
    used by the parallel path; placement='inverse' restores the classical
    optimal-position variant.

    Stops when the live facet count drops below `target_facets` (or, if
    `target_vertices` is given instead, when that many vertices remain).
    If candidates run out first the partial result is returned with
    reached_target=False.
    """
    if (target_facets is None) == (target_vertices is None):
        raise ValueError("pass exactly one of target_facets / target_vertices")
    if tau < 0:
        raise ValueError("tau must be >= 0")
    check_nonempty(mesh, "decimate_qem_oracle")

    n = mesh.n_vertices
    positions = mesh.positions.copy()
    geometry = compute_facet_geometry(mesh)
    vq = vertex_quadrics(n, mesh.facets, facet_quadrics(geometry))

    facet_v = mesh.facets.copy()
    live_facets = mesh.n_facets
    vert_facets = [set() for _ in range(n)]
    for f, (i, j, k) in enumerate(mesh.facets):
        vert_facets[i].add(f)
        vert_facets[j].add(f)
        vert_facets[k].add(f)

    pairs = {tuple(e) for e in edge_list(mesh).tolist()}
    if tau > 0.0:
        for i, j in cKDTree(positions).query_pairs(tau):
            pairs.add((min(i, j), max(i, j)))
    neighbors = [set() for _ in range(n)]
    for i, j in pairs:
        neighbors[i].add(j)
        neighbors[j].add(i)

    pair_array = np.array(sorted(pairs), dtype=np.int64)
    quadric_view = Quadric(vq.a, vq.b, vq.c)
    costs, targets = pair_costs(positions, quadric_view, pair_array, placement)

    generation: dict[tuple[int, int], int] = {}
    heap: list[tuple[float, int, int, int]] = []
    for idx, (i, j) in enumerate(pair_array.tolist()):
        generation[(i, j)] = 0
        heap.append((float(costs[idx]), i, j, 0))
    heapq.heapify(heap)
    pair_target = {
        (i, j): targets[idx] for idx, (i, j) in enumerate(pair_array.tolist())
    }

    alive = np.ones(n, dtype=bool)
    alive_count = n
    parent = np.arange(n, dtype=np.int64)

    if target_facets is not None:
        stop_facets = max(target_facets, 1)

        def done():
            return live_facets < stop_facets
    else:
        def done():
            return alive_count <= target_vertices

    while heap and not done():
        cost, i, j, gen = heapq.heappop(heap)
        key = (i, j)
        if not alive[i] or not alive[j] or generation.get(key) != gen:
            continue
        target = pair_target[key]

        # reject contractions that flip a surviving facet's orientation
        shared = vert_facets[i] & vert_facets[j]
        flipped = False
        tpos = (target[0], target[1], target[2])
        for f in (vert_facets[i] | vert_facets[j]) - shared:
            a, b, c = facet_v[f]
            p = [positions[a], positions[b], positions[c]]
            before = _scalar_normal(*p)
            corners = [tpos if v in (i, j) else p[s] for s, v in enumerate((a, b, c))]
            after = _scalar_normal(*corners)
            if before[0] * after[0] + before[1] * after[1] + before[2] * after[2] < 0:
                flipped = True
                break
        if flipped:
            continue

        # contract j into i
        positions[i] = target
        vq.a[i] += vq.a[j]
        vq.b[i] += vq.b[j]
        vq.c[i] += vq.c[j]
        for f in shared:
            for v in facet_v[f]:
                vert_facets[v].discard(f)
            live_facets -= 1
        for f in vert_facets[j].copy():
            facet_v[f][facet_v[f] == j] = i
            vert_facets[i].add(f)
        vert_facets[j].clear()

        neighbors[i].discard(j)
        for k in neighbors[j]:
            if k == i:
                continue
            neighbors[k].discard(j)
            neighbors[k].add(i)
            neighbors[i].add(k)
        neighbors[j].clear()
        alive[j] = False
        alive_count -= 1
        parent[j] = i

        affected = [(min(i, k), max(i, k)) for k in neighbors[i]]
        if affected:
            arr = np.array(affected, dtype=np.int64)
            new_costs, new_targets = pair_costs(positions, quadric_view, arr, placement)
            for idx, key2 in enumerate(affected):
                gen2 = generation.get(key2, -1) + 1
                generation[key2] = gen2
                pair_target[key2] = new_targets[idx]
                heapq.heappush(heap, (float(new_costs[idx]), key2[0], key2[1], gen2))

    # resolve contraction chains to roots
    roots = parent.copy()
    while True:
        hop = roots[roots]
        if (hop == roots).all():
            break
        roots = hop
    unique_roots, cluster_ids = np.unique(roots, return_inverse=True)
    replace = _output_order(cluster_ids, len(unique_roots))
    positions_out = np.empty((len(unique_roots), 3))
    positions_out[replace[unique_roots]] = positions[unique_roots]
    out_mesh, mapping = _build_output(mesh, replace, len(unique_roots), positions_out)
    return DecimationResult(
        mesh=out_mesh, replace=replace, mapping=mapping, reached_target=done()
    )


# ---------------------------------------------------------------------------
# quality metrics


@dataclass
class QualityReport:
    """Decimation quality summary against the original facet planes."""

    n_vertices_in: int
    n_facets_in: int
    n_vertices_out: int
    n_facets_out: int
    mean_quadric_error: float
    max_quadric_error: float
    cluster_size_counts: np.ndarray = field(repr=False)  # index = cluster size

    def describe(self) -> str:
        sizes = ", ".join(
            f"{size}: {count}"
            for size, count in enumerate(self.cluster_size_counts)
            if size > 0 and count > 0
        )
        return (
            f"vertices {self.n_vertices_in} -> {self.n_vertices_out}, "
            f"facets {self.n_facets_in} -> {self.n_facets_out}\n"
            f"quadric error vs original planes: mean {self.mean_quadric_error:.6g}, "
            f"max {self.max_quadric_error:.6g}\n"
            f"cluster sizes {{{sizes}}}"
        )


def quality_report(original, result: DecimationResult) -> QualityReport:
    """Counts, per-output-vertex quadric error, and the cluster-size histogram.

    The error of an output vertex is its cluster's accumulated quadric (sum
    of the members' original vertex quadrics) evaluated at the output
    position: the total squared deviation from the original adjacent planes.
    """
    geometry = compute_facet_geometry(original if isinstance(original, TriMesh) else original.mesh)
    facets = original.facets
    vq = vertex_quadrics(original.n_vertices, facets, facet_quadrics(geometry))
    n_out = result.n_vertices_out
    cluster_q = accumulate_quadrics(vq, result.replace, n_out)
    errors = cluster_q.evaluate(result.mesh.positions)
    sizes = result.cluster_sizes()
    return QualityReport(
        n_vertices_in=original.n_vertices,
        n_facets_in=original.n_facets,
        n_vertices_out=n_out,
        n_facets_out=result.mesh.n_facets,
        mean_quadric_error=float(errors.mean()) if n_out else 0.0,
        max_quadric_error=float(errors.max()) if n_out else 0.0,
        cluster_size_counts=np.bincount(sizes),
    )
