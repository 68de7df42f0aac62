"""Cluster pooling and unpooling driven by decimation `replace` tensors.

Pooling reduces a fine-resolution feature matrix to one row per output
vertex; unpooling broadcasts coarse rows back to the fine vertices. The
backward companions implement the exact adjoints so the operations can sit
inside a network: the adjoint of unpool is sum pooling, the adjoint of
average pooling is a 1/size-scaled unpool, and max pooling routes gradients
to its argmax rows (ties to the lowest input index).
"""

import numpy as np

from .validation import as_feature_matrix

POOL_MODES = ("average", "max", "weighted", "sum")


def _check(features, result, weights, mode):
    if mode not in POOL_MODES:
        raise ValueError(f"mode must be one of {POOL_MODES}, got {mode!r}")
    replace = result.replace
    features = as_feature_matrix(features, len(replace))
    n_out = result.n_vertices_out
    counts = np.bincount(replace, minlength=n_out)
    if counts.min() == 0:
        raise RuntimeError("replace tensor does not cover every output vertex")
    if mode == "weighted":
        if weights is None:
            raise ValueError("weighted pooling requires per-input-vertex weights")
        weights = np.asarray(weights, dtype=features.dtype)
        if weights.shape != (len(replace),):
            raise ValueError(f"weights must have shape ({len(replace)},)")
    return features, replace, n_out, counts, weights


def _segment_max_argmax(features, replace, n_out):
    """Per-cluster channel-wise max and the input row achieving it."""
    n, c = features.shape
    out = np.full((n_out, c), -np.inf, dtype=features.dtype)
    np.maximum.at(out, replace, features)
    winner = np.full((n_out, c), n, dtype=np.int64)
    hit = features == out[replace]
    rows = np.broadcast_to(np.arange(n, dtype=np.int64)[:, None], (n, c))
    flat = np.where(hit, rows, n)
    np.minimum.at(winner.reshape(-1), (replace[:, None] * c + np.arange(c)).reshape(-1), flat.reshape(-1))
    return out, winner


def pool(features, result, mode: str = "average", weights=None) -> np.ndarray:
    """Reduce per-input-vertex features over the clusters of a decimation.

    Row r of the output reduces the feature rows of all input vertices whose
    `replace` entry is r. Weighted mode computes sum(w_i f_i) / sum(w_i).
    """
    features, replace, n_out, counts, weights = _check(features, result, weights, mode)
    c = features.shape[1]
    if mode == "max":
        out, _ = _segment_max_argmax(features, replace, n_out)
        return out
    out = np.zeros((n_out, c), dtype=features.dtype)
    if mode == "weighted":
        np.add.at(out, replace, features * weights[:, None])
        denom = np.zeros(n_out, dtype=features.dtype)
        np.add.at(denom, replace, weights)
        if (denom == 0).any():
            raise ValueError("weighted pooling: some cluster has zero total weight")
        return out / denom[:, None]
    np.add.at(out, replace, features)
    if mode == "average":
        out /= counts[:, None]
    return out


def unpool(coarse_features, result) -> np.ndarray:
    """Broadcast each output vertex's features to its whole cluster."""
    coarse = as_feature_matrix(coarse_features, result.n_vertices_out, "coarse_features")
    return coarse[result.replace]


def pool_backward(grad_output, features, result, mode: str = "average", weights=None) -> np.ndarray:
    """Gradient of pool(...) with respect to the input features."""
    features, replace, n_out, counts, weights = _check(features, result, weights, mode)
    grad_output = as_feature_matrix(grad_output, n_out, "grad_output")
    if mode == "sum":
        return grad_output[replace]
    if mode == "average":
        return grad_output[replace] / counts[replace][:, None]
    if mode == "weighted":
        denom = np.zeros(n_out, dtype=features.dtype)
        np.add.at(denom, replace, weights)
        return grad_output[replace] * (weights / denom[replace])[:, None]
    # max: route each output gradient entry to the winning input row
    _, winner = _segment_max_argmax(features, replace, n_out)
    grad = np.zeros_like(features)
    cols = np.broadcast_to(np.arange(features.shape[1]), winner.shape)
    np.add.at(grad, (winner.reshape(-1), cols.reshape(-1)), grad_output.reshape(-1))
    return grad


def unpool_backward(grad_output, result) -> np.ndarray:
    """Gradient of unpool(...): sum pooling of the fine-level gradient."""
    return pool(grad_output, result, mode="sum")
