"""Multivariate Gaussian class models.

Shrinkage convention: the regularized covariance is

    (1 - lam) * cov + lam * (trace(cov) / B) * I

i.e. a convex blend with the average-variance identity. This differs from
scikit-learn's QDA ``reg_param`` (which blends with the plain identity), so
absolute accuracies at a given lam are not interchangeable between the two.
Shrinkage also breaks the exact affine equivariance that unregularized
discriminant analysis has.
"""

import math
from dataclasses import dataclass
from typing import Sequence, Tuple, Union

import numpy as np
from scipy import linalg
from scipy.special import logsumexp

from crop_spectra.core.exceptions import ModelError, NumericalError

ArrayLike = Union[np.ndarray, Sequence[Sequence[float]]]

LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True, eq=False)
class ClassGaussian:
    """Mean, lower Cholesky factor and log-determinant of one class covariance."""

    mean: np.ndarray
    factor: np.ndarray
    log_det: float
    sample_count: int

    @property
    def band_count(self) -> int:
        return int(self.mean.shape[0])

    @classmethod
    def from_covariance(
        cls, mean: np.ndarray, covariance: np.ndarray, sample_count: int
    ) -> "ClassGaussian":
        factor, log_det = factorize(covariance)
        return cls(np.asarray(mean, dtype=float), factor, log_det, sample_count)


def check_shrinkage(lam: float) -> float:
    """Validate a shrinkage parameter and return it as float."""
    lam = float(lam)
    if not 0.0 <= lam <= 1.0:
        raise ModelError(f"Shrinkage parameter must lie in [0, 1], got {lam}")
    return lam


def estimate_mean_cov(samples: ArrayLike) -> Tuple[np.ndarray, np.ndarray]:
    """Arithmetic mean and biased (divide-by-n) sample covariance.

    Raises:
        ModelError: If there are no samples or their lengths differ.
    """
    try:
        matrix = np.asarray(samples, dtype=float)
    except ValueError as exc:
        raise ModelError(f"Samples have inconsistent lengths: {exc}") from exc
    if matrix.ndim != 2:
        raise ModelError(f"Samples must form an (n, B) matrix, got shape {matrix.shape}")
    if matrix.shape[0] == 0:
        raise ModelError("Cannot estimate a Gaussian from zero samples")
    mean = matrix.mean(axis=0)
    centered = matrix - mean
    cov = centered.T @ centered / matrix.shape[0]
    return mean, (cov + cov.T) / 2.0


def shrink_covariance(cov: np.ndarray, lam: float) -> np.ndarray:
    """Blend a covariance with its average-variance identity (see module doc)."""
    lam = check_shrinkage(lam)
    cov = np.asarray(cov, dtype=float)
    if cov.ndim != 2 or cov.shape[0] != cov.shape[1]:
        raise ModelError(f"Covariance must be square, got shape {cov.shape}")
    if lam == 0.0:
        return cov.copy()
    band_count = cov.shape[0]
    average_variance = float(np.trace(cov)) / band_count
    if lam == 1.0:
        return average_variance * np.eye(band_count)
    shrunk = (1.0 - lam) * cov
    shrunk[np.diag_indices(band_count)] += lam * average_variance
    return shrunk


def factorize(cov: np.ndarray) -> Tuple[np.ndarray, float]:
    """Lower Cholesky factor and log-determinant of an SPD matrix.

    Raises:
        NumericalError: If the matrix is not positive definite; the caller
            should increase shrinkage.
    """
    cov = np.asarray(cov, dtype=float)
    try:
        factor = linalg.cholesky(cov, lower=True, check_finite=True)
    except (linalg.LinAlgError, ValueError) as exc:
        raise NumericalError(
            f"Covariance is not positive definite ({exc}); increase the shrinkage parameter"
        ) from exc
    diagonal = np.diag(factor)
    if np.any(diagonal <= 0.0):
        raise NumericalError(
            "Covariance factor has a non-positive pivot; increase the shrinkage parameter"
        )
    return factor, float(2.0 * np.sum(np.log(diagonal)))


def mahalanobis_squared(g: ClassGaussian, x: np.ndarray) -> np.ndarray:
    """Squared norm of factor^-1 (x - mean), for one spectrum or a batch."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != g.band_count:
        raise ModelError(f"Spectrum has {x.shape[-1]} bands, model expects {g.band_count}")
    diff = np.atleast_2d(x) - g.mean
    whitened = linalg.solve_triangular(g.factor, diff.T, lower=True, check_finite=False)
    distances = np.sum(whitened**2, axis=0)
    return distances if x.ndim > 1 else distances[0]


def log_density(g: ClassGaussian, x: np.ndarray) -> Union[float, np.ndarray]:
    """Gaussian log-density via a triangular solve (no explicit inverse).

    Accepts a single spectrum (returns float) or an (n, B) batch.
    """
    distances = mahalanobis_squared(g, x)
    values = -0.5 * (g.band_count * LOG_2PI + g.log_det + distances)
    return float(values) if np.ndim(values) == 0 else values


def log_sum_exp(values: Sequence[float]) -> float:
    """log(sum(exp(values))) with max subtraction; entries may be -inf."""
    array = np.asarray(values, dtype=float)
    if array.size == 0:
        raise ModelError("log_sum_exp of an empty list")
    if array.size == 1:
        return float(array[0])
    return float(logsumexp(array))
