"""Gaussian mixtures on the unit sphere and the fuzzy facet coefficients.

Facet normals live on the unit sphere, so filter weights are tied to sphere
positions through an isotropic Gaussian mixture: each facet gets a softmax
responsibility over the components, computed from the squared Mahalanobis
distance of its normal to each component center.
"""

from dataclasses import dataclass

import numpy as np


def _axis_directions() -> np.ndarray:
    return np.array(
        [
            [1.0, 0.0, 0.0], [-1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0], [0.0, -1.0, 0.0],
            [0.0, 0.0, 1.0], [0.0, 0.0, -1.0],
        ]
    )


def _edge_midpoint_directions() -> np.ndarray:
    s = 1.0 / np.sqrt(2.0)
    rows = []
    for sa in (1.0, -1.0):
        for sb in (1.0, -1.0):
            rows.append([sa * s, sb * s, 0.0])
    for sa in (1.0, -1.0):
        for sb in (1.0, -1.0):
            rows.append([sa * s, 0.0, sb * s])
    for sa in (1.0, -1.0):
        for sb in (1.0, -1.0):
            rows.append([0.0, sa * s, sb * s])
    return np.array(rows)


def fibonacci_sphere(n: int) -> np.ndarray:
    """n roughly evenly spread unit vectors (golden-angle spiral)."""
    k = np.arange(n, dtype=np.float64)
    z = 1.0 - (2.0 * k + 1.0) / n
    radius = np.sqrt(np.maximum(0.0, 1.0 - z * z))
    theta = np.pi * (1.0 + np.sqrt(5.0)) * k
    return np.stack([radius * np.cos(theta), radius * np.sin(theta), z], axis=1)


def default_sphere_means(n_components: int) -> np.ndarray:
    """Regularly placed unit vectors to initialize component centers.

    6 gives the signed coordinate axes (+x, -x, +y, -y, +z, -z). 18 gives
    those six plus the twelve normalized edge midpoints (+-1, +-1, 0)/sqrt(2)
    and permutations, grouped xy, xz, yz with sign order ++, +-, -+, --.
    Any other count falls back to a Fibonacci spiral.
    """
    if n_components <= 0:
        raise ValueError("n_components must be positive")
    if n_components == 6:
        return _axis_directions()
    if n_components == 18:
        return np.concatenate([_axis_directions(), _edge_midpoint_directions()])
    return fibonacci_sphere(n_components)


@dataclass
class SphereGMM:
    """Isotropic Gaussian components on the unit sphere.

    means  : (t, 3) unit vectors
    sigmas : (t,) positive standard deviations (covariance sigma^2 I)

    The trainable flags record which parameters gradients should be emitted
    for; centers are frozen by default.
    """

    means: np.ndarray
    sigmas: np.ndarray
    train_means: bool = False
    train_sigmas: bool = True

    def __post_init__(self):
        self.means = np.atleast_2d(np.asarray(self.means, dtype=np.float64))
        self.sigmas = np.atleast_1d(np.asarray(self.sigmas, dtype=np.float64))
        if self.means.shape != (len(self.sigmas), 3):
            raise ValueError(
                f"means {self.means.shape} and sigmas {self.sigmas.shape} disagree"
            )
        norms = np.linalg.norm(self.means, axis=1)
        if np.abs(norms - 1.0).max() > 1e-9:
            raise ValueError("component means must be unit vectors")
        if (self.sigmas <= 0).any():
            raise ValueError("component sigmas must be positive")

    @property
    def n_components(self) -> int:
        return len(self.sigmas)

    @classmethod
    def default(cls, n_components: int = 18, sigma: float = 0.25, **flags) -> "SphereGMM":
        return cls(
            means=default_sphere_means(n_components),
            sigmas=np.full(n_components, sigma),
            **flags,
        )


def _squared_mahalanobis(normals: np.ndarray, gmm: SphereGMM) -> np.ndarray:
    diff = normals[:, None, :] - gmm.means[None, :, :]
    return np.einsum("ftk,ftk->ft", diff, diff) / (gmm.sigmas**2)[None, :]


def gmm_coefficients(normals: np.ndarray, gmm: SphereGMM) -> np.ndarray:
    """Fuzzy coefficients: softmax of the negated squared distances.

    Returns an (m, t) row-stochastic matrix. Zero normals (degenerate
    facets) get the uniform row 1/t so they stay NaN-free downstream.
    """
    normals = np.atleast_2d(np.asarray(normals, dtype=np.float64))
    z = _squared_mahalanobis(normals, gmm)
    logits = -z
    logits -= logits.max(axis=1, keepdims=True)
    weights = np.exp(logits)
    coeff = weights / weights.sum(axis=1, keepdims=True)
    zero = np.einsum("fk,fk->f", normals, normals) == 0.0
    if zero.any():
        coeff[zero] = 1.0 / gmm.n_components
    return coeff


def gmm_coefficients_backward(
    normals: np.ndarray, gmm: SphereGMM, coeff: np.ndarray, grad_coeff: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Gradients of a loss w.r.t. the mixture sigmas and means.

    `coeff` must be the forward output for `normals`; `grad_coeff` is the
    upstream gradient on it. Degenerate (zero-normal) rows carry constant
    uniform coefficients and contribute nothing.
    """
    normals = np.atleast_2d(np.asarray(normals, dtype=np.float64))
    zero = np.einsum("fk,fk->f", normals, normals) == 0.0
    # softmax backward on logits = -z
    inner = np.einsum("ft,ft->f", grad_coeff, coeff)
    grad_z = -coeff * (grad_coeff - inner[:, None])
    grad_z[zero] = 0.0

    z = _squared_mahalanobis(normals, gmm)
    grad_sigma = np.einsum("ft,ft->t", grad_z, -2.0 * z / gmm.sigmas[None, :])
    diff = normals[:, None, :] - gmm.means[None, :, :]
    grad_means = np.einsum(
        "ft,ftk->tk", grad_z, -2.0 * diff / (gmm.sigmas**2)[None, :, None]
    )
    return grad_sigma, grad_means
