"""Mesh convolutions: vertex2facet, facet2facet, facet2vertex, vertex2vertex.

All three are depthwise: a kernel holds one (in_channels, multiplier) filter
per slot (the three facet corners for the barycentric convolutions, the
mixture components for facet2vertex), and an input channel c contributes to
output channels c*multiplier .. c*multiplier+multiplier-1. Channel mixing,
when wanted, is a separate pointwise (1x1) layer.

Every forward has an analytic backward that matches central finite
differences; see meshforge.gradcheck.
"""

from dataclasses import dataclass

import numpy as np

from .barycentric import BarycentricPlan
from .gmm import SphereGMM, gmm_coefficients, gmm_coefficients_backward
from .mesh import TriMesh, VertexFacetAdjacency, compute_facet_geometry, vertex_facet_adjacency
from .validation import as_feature_matrix


@dataclass
class ConvKernel:
    """Depthwise filter bank: weights has shape (filters, in_channels, multiplier)."""

    weights: np.ndarray

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if self.weights.ndim != 3:
            raise ValueError(
                f"kernel weights must be (filters, in_channels, multiplier), "
                f"got shape {self.weights.shape}"
            )

    @property
    def n_filters(self) -> int:
        return self.weights.shape[0]

    @property
    def in_channels(self) -> int:
        return self.weights.shape[1]

    @property
    def multiplier(self) -> int:
        return self.weights.shape[2]

    @classmethod
    def random(cls, n_filters, in_channels, multiplier=1, rng=None, scale=0.5) -> "ConvKernel":
        rng = np.random.default_rng(rng)
        return cls(scale * rng.standard_normal((n_filters, in_channels, multiplier)))


@dataclass
class TexturedFacetFeatures:
    """Pre-sampled per-facet surface features (e.g. texture colors).

    Facet f owns sample rows ``offsets[f]:offsets[f+1]``; each sample has a
    barycentric position `xi` on the facet and a feature row in `values`.
    Every facet needs at least one sample.
    """

    xi: np.ndarray       # (total_samples, 3)
    values: np.ndarray   # (total_samples, c)
    offsets: np.ndarray  # (m + 1,) int64

    def __post_init__(self):
        self.xi = np.asarray(self.xi, dtype=np.float64)
        self.values = np.atleast_2d(np.asarray(self.values, dtype=np.float64))
        self.offsets = np.asarray(self.offsets, dtype=np.int64)
        if len(self.xi) != len(self.values):
            raise ValueError("xi and values must have one row per sample")
        if (np.diff(self.offsets) < 1).any():
            raise ValueError("every facet needs at least one texture sample")
        if np.abs(self.xi.sum(axis=1) - 1.0).max() > 1e-9 or (self.xi < -1e-12).any():
            raise ValueError("xi rows must be nonnegative and sum to 1")

    @property
    def n_facets(self) -> int:
        return len(self.offsets) - 1

    @property
    def samples_per_facet(self) -> np.ndarray:
        return np.diff(self.offsets)


def _facet_row_index(offsets: np.ndarray) -> np.ndarray:
    """Facet id of every flat sample row."""
    return np.repeat(np.arange(len(offsets) - 1, dtype=np.int64), np.diff(offsets))


def _check_kernel(kernel: ConvKernel, n_filters: int, channels: int, who: str):
    if kernel.n_filters != n_filters or kernel.in_channels != channels:
        raise ValueError(
            f"{who} expects kernel shape ({n_filters}, {channels}, multiplier), "
            f"got {kernel.weights.shape}"
        )


# ---------------------------------------------------------------------------
# vertex2facet


def _interp_gram(plan: BarycentricPlan) -> np.ndarray:
    """(m, 3, 3) per-facet matrix g with g[s, t] = mean_k xi[k, s] xi[k, t].

    Collapses the sum over interpolated points: the convolution output is
    sum_{s,t} g[s,t] * w_s * features[corner_t].
    """
    gram = np.empty((plan.n_facets, 3, 3))
    # identical lattices share one gram matrix
    for value in np.unique(plan.resolution):
        sel = plan.resolution == value
        f = int(np.flatnonzero(sel)[0])
        xi = plan.xi[plan.offsets[f]:plan.offsets[f + 1]]
        gram[sel] = xi.T @ xi / len(xi)
    return gram


def vertex2facet_forward(
    facets: np.ndarray, features: np.ndarray, kernel: ConvKernel, plan: BarycentricPlan
) -> np.ndarray:
    """Per-facet features from the facet's three vertices.

    At every plan point both the vertex features and the three filters are
    barycentrically interpolated, multiplied depthwise, and averaged over
    the points. Output shape (m, in_channels * multiplier), channel-major.
    """
    features = np.asarray(features)
    if plan.n_facets != len(facets):
        raise ValueError("plan facet count does not match the mesh")
    _check_kernel(kernel, 3, features.shape[1], "vertex2facet")
    w = kernel.weights.astype(features.dtype, copy=False)
    gram = _interp_gram(plan).astype(features.dtype, copy=False)
    corner = features[facets]                      # (m, 3, c)
    mixed = np.einsum("fst,ftc->fsc", gram, corner)
    out = np.einsum("fsc,scl->fcl", mixed, w)
    return out.reshape(len(facets), -1)


def vertex2facet_backward(
    facets: np.ndarray,
    features: np.ndarray,
    kernel: ConvKernel,
    plan: BarycentricPlan,
    grad_output: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """Gradients (d features, d kernel weights) for vertex2facet."""
    features = np.asarray(features)
    n, c = features.shape
    w = kernel.weights.astype(features.dtype, copy=False)
    grad = np.asarray(grad_output).reshape(len(facets), c, kernel.multiplier)
    gram = _interp_gram(plan).astype(features.dtype, copy=False)
    corner = features[facets]
    mixed = np.einsum("fst,ftc->fsc", gram, corner)
    grad_w = np.einsum("fsc,fcl->scl", mixed, grad)

    per_slot = np.einsum("scl,fcl->fsc", w, grad)     # d out / d interpolated corner
    spread = np.einsum("fst,fsc->ftc", gram, per_slot)
    grad_features = np.zeros((n, c), dtype=features.dtype)
    for t in range(3):
        np.add.at(grad_features, facets[:, t], spread[:, t])
    return grad_features, grad_w


# ---------------------------------------------------------------------------
# facet2facet


def facet2facet_forward(textures: TexturedFacetFeatures, kernel: ConvKernel) -> np.ndarray:
    """Per-facet features from pre-sampled surface features.

    Sample features are given, so only the filters are interpolated at each
    sample's barycentric position; products are averaged per facet.
    """
    _check_kernel(kernel, 3, textures.values.shape[1], "facet2facet")
    c, lam = kernel.in_channels, kernel.multiplier
    w_at = np.einsum("sk,kcl->scl", textures.xi, kernel.weights)
    contrib = w_at * textures.values[:, :, None]
    rows = _facet_row_index(textures.offsets)
    out = np.zeros((textures.n_facets, c, lam))
    np.add.at(out, rows, contrib)
    out /= textures.samples_per_facet[:, None, None]
    return out.reshape(textures.n_facets, -1)


def facet2facet_backward(
    textures: TexturedFacetFeatures, kernel: ConvKernel, grad_output: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Gradients (d sample values, d kernel weights) for facet2facet."""
    c, lam = kernel.in_channels, kernel.multiplier
    rows = _facet_row_index(textures.offsets)
    grad = np.asarray(grad_output).reshape(textures.n_facets, c, lam)
    per_sample = grad[rows] / textures.samples_per_facet[rows, None, None]
    w_at = np.einsum("sk,kcl->scl", textures.xi, kernel.weights)
    grad_values = np.einsum("scl,scl->sc", w_at, per_sample)
    grad_w = np.einsum("sk,sc,scl->kcl", textures.xi, textures.values, per_sample)
    return grad_values, grad_w


# ---------------------------------------------------------------------------
# facet2vertex


def _entry_table(adjacency: VertexFacetAdjacency, vertex_ids):
    """Flat (output_row, facet, count) triples for the requested vertices."""
    if vertex_ids is None:
        counts = adjacency.counts
        rows = np.repeat(np.arange(adjacency.n_vertices, dtype=np.int64), counts)
        return rows, adjacency.facet_ids, counts
    vertex_ids = np.asarray(vertex_ids, dtype=np.int64)
    counts = adjacency.counts[vertex_ids]
    starts = adjacency.offsets[vertex_ids]
    rows = np.repeat(np.arange(len(vertex_ids), dtype=np.int64), counts)
    if counts.sum() == 0:
        return rows, np.empty(0, dtype=np.int64), counts
    flat = np.concatenate([np.arange(s, s + n) for s, n in zip(starts, counts) if n])
    return rows, adjacency.facet_ids[flat], counts


def facet2vertex_forward(
    adjacency: VertexFacetAdjacency,
    facet_features: np.ndarray,
    kernel: ConvKernel,
    coeff: np.ndarray,
    vertex_ids=None,
) -> np.ndarray:
    """Per-vertex features averaged over adjacent facets.

    Each facet's effective filter is the fuzzy-coefficient blend of the
    kernel's component filters; the products with the facet features are
    averaged over the vertex's adjacency. Vertices with no adjacent facets
    produce zero rows. `vertex_ids` restricts (and orders) the output rows
    to a subset of vertices, for strided/down-sampling layers.
    """
    facet_features = np.asarray(facet_features)
    m, c = facet_features.shape
    _check_kernel(kernel, coeff.shape[1], c, "facet2vertex")
    if coeff.shape[0] != m:
        raise ValueError("fuzzy coefficients must have one row per facet")
    w = kernel.weights.astype(facet_features.dtype, copy=False)
    effective = np.einsum("ft,tcl->fcl", coeff, w)
    contrib = effective * facet_features[:, :, None]
    rows, entry_facets, counts = _entry_table(adjacency, vertex_ids)
    out = np.zeros((len(counts), c, kernel.multiplier), dtype=facet_features.dtype)
    np.add.at(out, rows, contrib[entry_facets])
    nonzero = counts > 0
    out[nonzero] /= counts[nonzero, None, None]
    return out.reshape(len(counts), -1)


@dataclass
class Facet2VertexGrads:
    """Gradients emitted by facet2vertex_backward."""

    facet_features: np.ndarray
    weights: np.ndarray
    sigmas: np.ndarray | None = None
    means: np.ndarray | None = None


def facet2vertex_backward(
    adjacency: VertexFacetAdjacency,
    facet_features: np.ndarray,
    kernel: ConvKernel,
    coeff: np.ndarray,
    grad_output: np.ndarray,
    vertex_ids=None,
    gmm: SphereGMM | None = None,
    normals: np.ndarray | None = None,
) -> Facet2VertexGrads:
    """Gradients for facet2vertex.

    Always emits d facet_features and d weights. When `gmm` and `normals`
    are supplied, also emits d sigmas / d means for whichever of the GMM's
    trainable flags are set (the coefficients are differentiated through
    their softmax).
    """
    facet_features = np.asarray(facet_features)
    m, c = facet_features.shape
    w = kernel.weights.astype(facet_features.dtype, copy=False)
    rows, entry_facets, counts = _entry_table(adjacency, vertex_ids)
    grad = np.asarray(grad_output).reshape(len(counts), c, kernel.multiplier)
    scaled = np.zeros_like(grad)
    nonzero = counts > 0
    scaled[nonzero] = grad[nonzero] / counts[nonzero, None, None]

    # per-facet accumulated upstream: sum over output rows the facet feeds
    spread = np.zeros((m, c, kernel.multiplier), dtype=facet_features.dtype)
    np.add.at(spread, entry_facets, scaled[rows])

    effective = np.einsum("ft,tcl->fcl", coeff, w)
    grad_features = np.einsum("fcl,fcl->fc", effective, spread)
    grad_w = np.einsum("ft,fc,fcl->tcl", coeff, facet_features, spread)

    grad_sigma = grad_means = None
    if gmm is not None and (gmm.train_sigmas or gmm.train_means):
        if normals is None:
            raise ValueError("GMM parameter gradients need the facet normals")
        grad_coeff = np.einsum("tcl,fc,fcl->ft", w, facet_features, spread)
        gs, gm = gmm_coefficients_backward(normals, gmm, coeff, grad_coeff)
        if gmm.train_sigmas:
            grad_sigma = gs
        if gmm.train_means:
            grad_means = gm
    return Facet2VertexGrads(
        facet_features=grad_features, weights=grad_w, sigmas=grad_sigma, means=grad_means
    )


# ---------------------------------------------------------------------------
# vertex2vertex composition


@dataclass
class Vertex2VertexGrads:
    """Gradients emitted by vertex2vertex_backward."""

    features: np.ndarray
    facet_weights: np.ndarray
    vertex_weights: np.ndarray
    sigmas: np.ndarray | None = None
    means: np.ndarray | None = None


def vertex2vertex_forward(
    mesh: TriMesh,
    features: np.ndarray,
    facet_kernel: ConvKernel,
    plan: BarycentricPlan,
    vertex_kernel: ConvKernel,
    gmm: SphereGMM,
) -> np.ndarray:
    """vertex2facet followed by facet2vertex; the first-order neighborhood conv."""
    features = as_feature_matrix(features, mesh.n_vertices)
    geometry = compute_facet_geometry(mesh)
    adjacency = vertex_facet_adjacency(mesh)
    facet_feats = vertex2facet_forward(mesh.facets, features, facet_kernel, plan)
    coeff = gmm_coefficients(geometry.normal, gmm)
    return facet2vertex_forward(adjacency, facet_feats, vertex_kernel, coeff)


def vertex2vertex_backward(
    mesh: TriMesh,
    features: np.ndarray,
    facet_kernel: ConvKernel,
    plan: BarycentricPlan,
    vertex_kernel: ConvKernel,
    gmm: SphereGMM,
    grad_output: np.ndarray,
) -> Vertex2VertexGrads:
    """Chained adjoints of the two stages."""
    features = as_feature_matrix(features, mesh.n_vertices)
    geometry = compute_facet_geometry(mesh)
    adjacency = vertex_facet_adjacency(mesh)
    facet_feats = vertex2facet_forward(mesh.facets, features, facet_kernel, plan)
    coeff = gmm_coefficients(geometry.normal, gmm)
    inner = facet2vertex_backward(
        adjacency, facet_feats, vertex_kernel, coeff, grad_output,
        gmm=gmm, normals=geometry.normal,
    )
    grad_features, grad_fw = vertex2facet_backward(
        mesh.facets, features, facet_kernel, plan, inner.facet_features
    )
    return Vertex2VertexGrads(
        features=grad_features,
        facet_weights=grad_fw,
        vertex_weights=inner.weights,
        sigmas=inner.sigmas,
        means=inner.means,
    )


# ---------------------------------------------------------------------------
# pointwise (1x1) channel mixing


def pointwise_forward(features: np.ndarray, weight: np.ndarray, bias=None) -> np.ndarray:
    """Dense per-row channel mixing: features @ weight (+ bias)."""
    out = np.asarray(features) @ np.asarray(weight)
    if bias is not None:
        out = out + np.asarray(bias)
    return out


def pointwise_backward(features, weight, grad_output, bias=None):
    """Gradients (d features, d weight[, d bias]) of pointwise_forward."""
    features = np.asarray(features)
    weight = np.asarray(weight)
    grad_output = np.asarray(grad_output)
    grad_features = grad_output @ weight.T
    grad_weight = features.T @ grad_output
    if bias is None:
        return grad_features, grad_weight
    return grad_features, grad_weight, grad_output.sum(axis=0)
