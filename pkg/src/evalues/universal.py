"""Batch universal inference with split, cross-fit and subsampled likelihood ratios."""

from dataclasses import dataclass, field
import math
from typing import Callable

import numpy as np
from scipy import stats

from . import _kernels
from .confset import grid_hull
from .core import exchangeable_markov_test
from .errors import DegenerateSampleError, DomainError, EmptyInputError
from .seeding import derive_rng
from .sets import UncertaintySet


@dataclass(frozen=True, eq=False)
class SplitPlan:
    """Fold labels: ``True`` marks the inference fold D0, ``False`` the fitting fold D1."""

    assignment: np.ndarray
    seed: int
    fraction: float

    def __post_init__(self):
        a = np.asarray(self.assignment, dtype=bool)
        if a.all() or not a.any():
            raise EmptyInputError("both folds must be non-empty")
        object.__setattr__(self, "assignment", a)

    @property
    def inference(self):
        return np.flatnonzero(self.assignment)

    @property
    def fitting(self):
        return np.flatnonzero(~self.assignment)

    def swapped(self):
        return SplitPlan(~self.assignment, self.seed, 1 - self.fraction)


def make_split_plan(n, seed, fraction=0.5, label="split"):
    """Independent coin flips with ``P(D0) = fraction``, redrawn until both folds are non-empty."""
    if n < 2:
        raise EmptyInputError("need at least two points to split")
    if not 0 < fraction < 1:
        raise DomainError("fraction must lie in (0, 1)")
    rng = derive_rng(seed, label)
    while True:
        a = rng.random(n) < fraction
        if a.any() and not a.all():
            return SplitPlan(a, seed, fraction)


@dataclass(frozen=True)
class FittedModel:
    log_density: Callable
    metadata: dict = field(default_factory=dict)


def _sample(x):
    x = np.asarray(x, dtype=float)
    if x.shape[0] == 0:
        raise EmptyInputError("empty sample")
    return x


# -- fitters -------------------------------------------------------------------

_LOG_2PI = math.log(2 * math.pi)


def _gauss_logpdf(x, mean, var=1.0):
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        return -0.5 * (_LOG_2PI + math.log(var)) - 0.5 * (x - mean) ** 2 / var
    d = x.shape[1]
    return -0.5 * d * _LOG_2PI - 0.5 * np.sum((x - mean) ** 2, axis=1) / var


def fit_gaussian_mean(x):
    """Unit-variance Gaussian with the sample mean (vector data by rows)."""
    x = _sample(x)
    mean = x.mean(axis=0)
    return FittedModel(lambda y: _gauss_logpdf(y, mean), {"mean": mean})


def fit_gaussian_mean_var(x):
    x = _sample(x)
    mean, var = float(x.mean()), float(x.var())
    if var <= 0:
        raise DegenerateSampleError("sample variance is zero")
    return FittedModel(lambda y: _gauss_logpdf(y, mean, var), {"mean": mean, "var": var})


def fit_bernoulli(x):
    x = _sample(x)
    p = float(x.mean())

    def logpmf(y):
        y = np.asarray(y, dtype=float)
        with np.errstate(divide="ignore"):
            return np.where(y == 1, np.log(p), np.log1p(-p))

    return FittedModel(logpmf, {"p": p})


def fit_two_means_mixture(x, weight=0.25, restarts=10, n_iter=200, rng=None):
    """EM fit of ``w N(m1, 1) + (1-w) N(m2, 1)`` with the weight held fixed."""
    x = _sample(x)
    rng = np.random.default_rng(0) if rng is None else rng
    spread = max(float(x.std()), 1e-3)
    inits = float(x.mean()) + spread * rng.standard_normal((restarts, 2))
    m1, m2 = _kernels.em_two_means(x, weight, inits, n_iter=n_iter)
    lw1, lw2 = math.log(weight), math.log1p(-weight)

    def logpdf(y):
        y = np.asarray(y, dtype=float)
        return np.logaddexp(lw1 + _gauss_logpdf(y, m1), lw2 + _gauss_logpdf(y, m2))

    return FittedModel(logpdf, {"means": (m1, m2), "weight": weight})


# -- e-values ------------------------------------------------------------------


def split_lrt_log_e(sample, plan, fit_alternative, fit_null_mle):
    x = _sample(sample)
    if plan.assignment.shape[0] != x.shape[0]:
        raise DomainError("plan size does not match the sample")
    d0, d1 = x[plan.inference], x[plan.fitting]
    alt = fit_alternative(d1)
    null = fit_null_mle(d0)
    with np.errstate(invalid="ignore"):
        diff = np.asarray(alt.log_density(d0)) - np.asarray(null.log_density(d0))
    if np.any(np.isnan(diff)):
        raise DegenerateSampleError("fitted densities are both zero at a point")
    return float(np.sum(diff))


def split_lrt_e(sample, plan, fit_alternative, fit_null_mle):
    """Likelihood ratio on D0 of the alternative fitted on D1 against the null MLE on D0."""
    lg = split_lrt_log_e(sample, plan, fit_alternative, fit_null_mle)
    return math.exp(lg) if lg < 709.7 else math.inf


def crossfit_e(sample, plan, fit_alternative, fit_null_mle):
    """Average of the split e-value and the one with the folds swapped."""
    a = split_lrt_e(sample, plan, fit_alternative, fit_null_mle)
    b = split_lrt_e(sample, plan.swapped(), fit_alternative, fit_null_mle)
    return (a + b) / 2


def split_evalues(sample, B, seed, fit_alternative, fit_null_mle, fraction=0.5, label="split"):
    """Split e-values for ``B`` independent plans; plan ``b`` uses the stream ``(seed, f"{label}/{b}")``."""
    if B < 1:
        raise DomainError("B must be at least 1")
    n = np.asarray(sample).shape[0]
    return np.array(
        [
            split_lrt_e(sample, make_split_plan(n, seed, fraction, f"{label}/{b}"), fit_alternative, fit_null_mle)
            for b in range(B)
        ]
    )


def subsampled_e(sample, B, seed, fit_alternative, fit_null_mle, fraction=0.5, label="split"):
    """Mean of :func:`split_evalues`."""
    return float(np.mean(split_evalues(sample, B, seed, fit_alternative, fit_null_mle, fraction, label)))


def subsampled_lrt_sequential_test(split_e_stream, alpha):
    """Reject when any running average of the split e-values reaches ``1/alpha``."""
    return exchangeable_markov_test(split_e_stream, alpha)


def universal_confidence_set(sample, plan, fit_alternative, per_theta_log_likelihood, grid, alpha):
    """Grid points ``theta`` whose split ratio stays below ``1/alpha``.

    ``per_theta_log_likelihood(points, theta)`` is the total log-likelihood.
    The returned set lists grid points; :func:`grid_hull` gives the hull.
    """
    x = _sample(sample)
    grid = list(grid)
    if not grid:
        raise EmptyInputError("parameter grid is empty")
    if not 0 < alpha < 1:
        raise DomainError("alpha must lie in (0, 1)")
    d0, d1 = x[plan.inference], x[plan.fitting]
    num = float(np.sum(fit_alternative(d1).log_density(d0)))
    cut = math.log(1 / alpha)
    kept = [theta for theta in grid if num - per_theta_log_likelihood(d0, theta) < cut]
    return UncertaintySet.from_labels(kept, level=1 - alpha)


def confidence_hull(cs, grid):
    return grid_hull(cs.labels, grid)


# -- Gaussian identity-covariance formulas --------------------------------------


def optimal_split_fraction(d, alpha):
    """Inference-fold fraction minimising the expected squared radius of the split set."""
    if d < 1:
        raise DomainError("d must be at least 1")
    if not 0 < alpha < 1:
        raise DomainError("alpha must lie in (0, 1)")
    L = math.log(1 / alpha)
    return 1 - (math.sqrt(4 * d * d + 8 * d * L) - 2 * d) / (4 * L)


def split_squared_radius(x, plan, alpha):
    """Squared radius of the split set for ``N(theta, I_d)``: ``2 log(1/alpha)/n0 + |mean0 - mean1|^2``."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    d0, d1 = x[plan.inference], x[plan.fitting]
    gap = d0.mean(axis=0) - d1.mean(axis=0)
    return 2 * math.log(1 / alpha) / d0.shape[0] + float(gap @ gap)


def expected_split_squared_radius(n, d, alpha, fraction=0.5):
    n0, n1 = fraction * n, (1 - fraction) * n
    return 2 * math.log(1 / alpha) / n0 + d / n0 + d / n1


def classical_squared_radius(n, d, alpha):
    return float(stats.chi2.ppf(1 - alpha, d)) / n
