"""Finite-difference verification of every analytic backward pass.

Each check builds a small random fixture, computes a scalar loss
sum(upstream * forward), and compares the analytic gradients against
central differences taken on the same loss. Reference dtype is float64;
the float32 path is supported for precision studies (expect errors around
1e-4..1e-3 there instead of <1e-6).
"""

import numpy as np

from .barycentric import build_barycentric_plan
from .conv import (
    ConvKernel,
    TexturedFacetFeatures,
    facet2facet_backward,
    facet2facet_forward,
    facet2vertex_backward,
    facet2vertex_forward,
    pointwise_backward,
    pointwise_forward,
    vertex2facet_backward,
    vertex2facet_forward,
    vertex2vertex_backward,
    vertex2vertex_forward,
)
from .decimate import DecimationConfig, decimate_parallel
from .gmm import SphereGMM, fibonacci_sphere, gmm_coefficients
from .mesh import compute_facet_geometry, vertex_facet_adjacency
from .pooling import pool, pool_backward, unpool, unpool_backward
from .synthetic import random_small_mesh

DEFAULT_TOLERANCE = 1e-4


def finite_difference(loss, array, eps):
    """Central-difference gradient of `loss` w.r.t. `array` (mutated in place)."""
    grad = np.zeros(array.shape, dtype=np.float64)
    flat = array.reshape(-1)
    out = grad.reshape(-1)
    for i in range(flat.size):
        keep = flat[i]
        flat[i] = keep + eps
        hi = loss()
        flat[i] = keep - eps
        lo = loss()
        flat[i] = keep
        out[i] = (hi - lo) / (2.0 * eps)
    return grad


def max_relative_error(analytic, numeric) -> float:
    """max |a - n| / max(1, |a|, |n|); absolute below 1, relative above."""
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    scale = np.maximum(1.0, np.maximum(np.abs(analytic), np.abs(numeric)))
    return float((np.abs(analytic - numeric) / scale).max())


def _compare(loss, pairs, eps):
    """Max relative error over (analytic, parameter array) pairs."""
    worst = 0.0
    for analytic, array in pairs:
        numeric = finite_difference(loss, array, eps)
        worst = max(worst, max_relative_error(analytic, numeric))
    return worst


def check_vertex2facet(rng, size=8, channels=2, multiplier=2, eps=1e-5, dtype=np.float64):
    mesh = random_small_mesh(size, rng)
    features = rng.standard_normal((size, channels)).astype(dtype)
    kernel = ConvKernel.random(3, channels, multiplier, rng)
    kernel.weights = kernel.weights.astype(dtype)
    plan = build_barycentric_plan(compute_facet_geometry(mesh).area)
    upstream = rng.standard_normal((mesh.n_facets, channels * multiplier)).astype(dtype)

    def loss():
        return float((vertex2facet_forward(mesh.facets, features, kernel, plan) * upstream).sum())

    grad_features, grad_w = vertex2facet_backward(
        mesh.facets, features, kernel, plan, upstream
    )
    return _compare(loss, [(grad_features, features), (grad_w, kernel.weights)], eps)


def check_facet2facet(rng, size=8, channels=2, multiplier=2, eps=1e-5, dtype=np.float64):
    mesh = random_small_mesh(size, rng)
    m = mesh.n_facets
    per_facet = rng.integers(1, 4, size=m)
    offsets = np.zeros(m + 1, dtype=np.int64)
    np.cumsum(per_facet, out=offsets[1:])
    raw = rng.random((int(offsets[-1]), 3))
    xi = raw / raw.sum(axis=1, keepdims=True)
    values = rng.standard_normal((int(offsets[-1]), channels)).astype(dtype)
    textures = TexturedFacetFeatures(xi=xi, values=values, offsets=offsets)
    kernel = ConvKernel.random(3, channels, multiplier, rng)
    upstream = rng.standard_normal((m, channels * multiplier)).astype(dtype)

    def loss():
        return float((facet2facet_forward(textures, kernel) * upstream).sum())

    grad_values, grad_w = facet2facet_backward(textures, kernel, upstream)
    return _compare(loss, [(grad_values, textures.values), (grad_w, kernel.weights)], eps)


def check_facet2vertex(rng, size=8, channels=2, multiplier=2, components=4,
                       eps=1e-5, dtype=np.float64):
    mesh = random_small_mesh(size, rng)
    geometry = compute_facet_geometry(mesh)
    adjacency = vertex_facet_adjacency(mesh)
    facet_feats = rng.standard_normal((mesh.n_facets, channels)).astype(dtype)
    kernel = ConvKernel.random(components, channels, multiplier, rng)
    gmm = SphereGMM(
        means=fibonacci_sphere(components),
        sigmas=0.3 + 0.4 * rng.random(components),
        train_means=True,
        train_sigmas=True,
    )
    upstream = rng.standard_normal((size, channels * multiplier)).astype(dtype)

    def loss():
        coeff = gmm_coefficients(geometry.normal, gmm)
        out = facet2vertex_forward(adjacency, facet_feats, kernel, coeff)
        return float((out * upstream).sum())

    coeff = gmm_coefficients(geometry.normal, gmm)
    grads = facet2vertex_backward(
        adjacency, facet_feats, kernel, coeff, upstream,
        gmm=gmm, normals=geometry.normal,
    )
    return _compare(
        loss,
        [
            (grads.facet_features, facet_feats),
            (grads.weights, kernel.weights),
            (grads.sigmas, gmm.sigmas),
            (grads.means, gmm.means),
        ],
        eps,
    )


def check_vertex2vertex(rng, size=8, channels=2, components=3, eps=1e-5, dtype=np.float64):
    mesh = random_small_mesh(size, rng)
    features = rng.standard_normal((size, channels)).astype(dtype)
    facet_kernel = ConvKernel.random(3, channels, 2, rng)
    vertex_kernel = ConvKernel.random(components, channels * 2, 1, rng)
    plan = build_barycentric_plan(compute_facet_geometry(mesh).area)
    gmm = SphereGMM(
        means=fibonacci_sphere(components),
        sigmas=0.3 + 0.4 * rng.random(components),
        train_sigmas=True,
    )
    upstream = rng.standard_normal((size, channels * 2)).astype(dtype)

    def loss():
        out = vertex2vertex_forward(mesh, features, facet_kernel, plan, vertex_kernel, gmm)
        return float((out * upstream).sum())

    grads = vertex2vertex_backward(
        mesh, features, facet_kernel, plan, vertex_kernel, gmm, upstream
    )
    return _compare(
        loss,
        [
            (grads.features, features),
            (grads.facet_weights, facet_kernel.weights),
            (grads.vertex_weights, vertex_kernel.weights),
            (grads.sigmas, gmm.sigmas),
        ],
        eps,
    )


def _pool_fixture(rng, size, channels, dtype):
    mesh = random_small_mesh(size, rng)
    result = decimate_parallel(
        mesh, DecimationConfig(target_vertices=max(2, size // 2))
    )
    features = rng.standard_normal((size, channels)).astype(dtype)
    upstream = rng.standard_normal((result.n_vertices_out, channels)).astype(dtype)
    return result, features, upstream


def check_pooling(rng, size=9, channels=2, mode="average", eps=1e-5, dtype=np.float64):
    result, features, upstream = _pool_fixture(rng, size, channels, dtype)
    weights = (0.5 + rng.random(size)).astype(dtype) if mode == "weighted" else None

    def loss():
        return float((pool(features, result, mode=mode, weights=weights) * upstream).sum())

    analytic = pool_backward(upstream, features, result, mode=mode, weights=weights)
    return _compare(loss, [(analytic, features)], eps)


def check_unpool(rng, size=9, channels=2, eps=1e-5, dtype=np.float64):
    result, _, _ = _pool_fixture(rng, size, channels, dtype)
    coarse = rng.standard_normal((result.n_vertices_out, channels)).astype(dtype)
    upstream = rng.standard_normal((size, channels)).astype(dtype)

    def loss():
        return float((unpool(coarse, result) * upstream).sum())

    analytic = unpool_backward(upstream, result)
    return _compare(loss, [(analytic, coarse)], eps)


def check_pointwise(rng, rows=6, c_in=3, c_out=2, eps=1e-5, dtype=np.float64):
    features = rng.standard_normal((rows, c_in)).astype(dtype)
    weight = rng.standard_normal((c_in, c_out)).astype(dtype)
    bias = rng.standard_normal(c_out).astype(dtype)
    upstream = rng.standard_normal((rows, c_out)).astype(dtype)

    def loss():
        return float((pointwise_forward(features, weight, bias) * upstream).sum())

    gx, gw, gb = pointwise_backward(features, weight, upstream, bias)
    return _compare(loss, [(gx, features), (gw, weight), (gb, bias)], eps)


def run_all(seed=0, cases=20, eps=1e-5, dtype=np.float64, sizes=(6, 9, 12)) -> dict[str, float]:
    """Max relative error per operation over `cases` random fixtures each."""
    checks = {
        "vertex2facet": lambda rng, s: check_vertex2facet(rng, s, eps=eps, dtype=dtype),
        "facet2facet": lambda rng, s: check_facet2facet(rng, s, eps=eps, dtype=dtype),
        "facet2vertex": lambda rng, s: check_facet2vertex(rng, s, eps=eps, dtype=dtype),
        "vertex2vertex": lambda rng, s: check_vertex2vertex(rng, s, eps=eps, dtype=dtype),
        "pool_average": lambda rng, s: check_pooling(rng, s, mode="average", eps=eps, dtype=dtype),
        "pool_max": lambda rng, s: check_pooling(rng, s, mode="max", eps=eps, dtype=dtype),
        "pool_weighted": lambda rng, s: check_pooling(rng, s, mode="weighted", eps=eps, dtype=dtype),
        "pool_sum": lambda rng, s: check_pooling(rng, s, mode="sum", eps=eps, dtype=dtype),
        "unpool": lambda rng, s: check_unpool(rng, s, eps=eps, dtype=dtype),
        "pointwise": lambda rng, s: check_pointwise(rng, eps=eps, dtype=dtype),
    }
    rng = np.random.default_rng(seed)
    report = {}
    for name, check in checks.items():
        worst = 0.0
        for case in range(cases):
            size = sizes[case % len(sizes)]
            worst = max(worst, check(rng, size))
        report[name] = worst
    return report
