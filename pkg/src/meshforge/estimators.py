"""Estimator-style wrappers so decimation composes with sklearn pipelines.

`fit` runs a decimation on a mesh and stores the cluster tensors;
`transform` then pools any per-vertex feature matrix to the coarse
resolution and `inverse_transform` broadcasts coarse features back, the
same contract scikit-learn's FeatureAgglomeration follows for feature
groups. Hyperparameters live in __init__ so get_params/set_params and
cloning work as usual.
"""

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .decimate import (
    DecimationConfig,
    decimate_parallel,
    decimate_qem_oracle,
    quality_report,
)
from .mesh import BatchedMesh, TriMesh
from .pooling import pool, unpool


class _DecimatorBase(BaseEstimator, TransformerMixin):
    def _store(self, X, result):
        self.result_ = result
        self.decimated_mesh_ = result.mesh
        self.replace_ = result.replace
        self.mapping_ = result.mapping
        self.n_vertices_in_ = X.n_vertices
        self.n_vertices_out_ = result.n_vertices_out
        return self

    def transform(self, X):
        """Pool an (n_vertices_in, c) feature matrix onto the coarse mesh."""
        check_is_fitted(self, "result_")
        return pool(X, self.result_, mode=self.pool_mode, weights=self.pool_weights)

    def inverse_transform(self, X):
        """Broadcast coarse features back to the fine vertices."""
        check_is_fitted(self, "result_")
        return unpool(X, self.result_)

    def fit_transform(self, X, y=None):
        """Fit on a mesh and pool its own feature channels."""
        return self.fit(X, y).transform(X.features)

    def report(self, original=None):
        """Quality metrics of the fitted decimation."""
        check_is_fitted(self, "result_")
        return quality_report(original if original is not None else self._fit_input, self.result_)


class ClusterDecimator(_DecimatorBase):
    """Cluster-parallel decimation to an exact vertex count.

    Either `target_vertices` or `ratio` (output/input vertex fraction,
    default one half) decides the output size at fit time.
    """

    def __init__(
        self,
        target_vertices=None,
        ratio=0.5,
        placement="average",
        shuffle_seed=None,
        rounds="auto",
        pool_mode="max",
        pool_weights=None,
    ):
        self.target_vertices = target_vertices
        self.ratio = ratio
        self.placement = placement
        self.shuffle_seed = shuffle_seed
        self.rounds = rounds
        self.pool_mode = pool_mode
        self.pool_weights = pool_weights

    def fit(self, X, y=None):
        if not isinstance(X, (TriMesh, BatchedMesh)):
            raise TypeError("ClusterDecimator.fit expects a TriMesh or BatchedMesh")
        target = self.target_vertices
        if target is None:
            base = min(np.diff(X.vertex_offsets)) if isinstance(X, BatchedMesh) else X.n_vertices
            target = max(1, int(np.ceil(self.ratio * base)))
        config = DecimationConfig(
            target_vertices=target,
            placement=self.placement,
            shuffle_seed=self.shuffle_seed,
            rounds=self.rounds,
        )
        self._fit_input = X
        return self._store(X, decimate_parallel(X, config))


class QEMDecimator(_DecimatorBase):
    """Iterative greedy quadric-error decimation (the quality baseline)."""

    def __init__(
        self,
        target_facets=None,
        target_vertices=None,
        tau=0.0,
        placement="average",
        pool_mode="max",
        pool_weights=None,
    ):
        self.target_facets = target_facets
        self.target_vertices = target_vertices
        self.tau = tau
        self.placement = placement
        self.pool_mode = pool_mode
        self.pool_weights = pool_weights

    def fit(self, X, y=None):
        if not isinstance(X, TriMesh):
            raise TypeError("QEMDecimator.fit expects a TriMesh")
        self._fit_input = X
        result = decimate_qem_oracle(
            X,
            target_facets=self.target_facets,
            tau=self.tau,
            target_vertices=self.target_vertices,
            placement=self.placement,
        )
        return self._store(X, result)
