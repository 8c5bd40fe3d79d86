"""Value-at-risk, expected shortfall and sequential backtests of risk forecasts."""

from dataclasses import dataclass
import math
from typing import Callable, Optional

import numpy as np

from .eprocess import EProcessState, adaptive_lambda, adaptive_wealth_path, step_bet, step_product, ville_test
from .errors import DomainError, EmptyInputError
from .evariables import DiscreteDist

# slack when comparing cumulative probabilities against beta
_CDF_SLACK = 1e-12


def _law(data):
    if isinstance(data, DiscreteDist):
        pts, m = data.arrays()
    else:
        pts = np.asarray(data, dtype=float).ravel()
        if pts.size == 0:
            raise EmptyInputError("empty sample")
        m = np.full(pts.size, 1 / pts.size)
    if np.any(np.isnan(pts)):
        raise DomainError("sample contains NaN")
    order = np.argsort(pts, kind="stable")
    return pts[order], m[order]


def _check_beta(beta):
    if not 0 < beta < 1:
        raise DomainError("beta must lie in (0, 1)")


def var_beta(data, beta):
    """Left ``beta``-quantile; on a sample of size n, the ``ceil(beta n)``-th order statistic."""
    _check_beta(beta)
    pts, m = _law(data)
    cdf = np.cumsum(m)
    i = int(np.searchsorted(cdf, beta - _CDF_SLACK, side="left"))
    return float(pts[min(i, pts.size - 1)])


def es_beta(data, beta):
    """Expected shortfall: the average of the left quantiles over levels in ``[beta, 1]``."""
    _check_beta(beta)
    pts, m = _law(data)
    if np.any(np.isinf(pts)):
        raise DomainError("expected shortfall needs a finite mean")
    upper = np.cumsum(m)
    lower = upper - m
    # snap levels that differ from beta only by rounding
    upper = np.where(np.abs(upper - beta) < _CDF_SLACK, beta, upper)
    lower = np.where(np.abs(lower - beta) < _CDF_SLACK, beta, lower)
    weight = np.clip(np.minimum(upper, 1.0) - np.maximum(lower, beta), 0, None)
    return float(np.dot(weight, pts) / (1 - beta))


def es_minimization(data, beta, z):
    """``z + E(X - z)_+ / (1 - beta)``; its minimum over ``z`` is the expected shortfall."""
    pts, m = _law(data)
    return float(z + np.dot(m, np.clip(pts - z, 0, None)) / (1 - beta))


@dataclass(frozen=True)
class ForecastRecord:
    x: float
    r: float
    z: Optional[float] = None
    t: int = 0


ESTAT_KINDS = ("mean", "variance_mean", "quantile", "expected_loss", "es_var")


@dataclass(frozen=True)
class EStatSpec:
    kind: str
    beta: float = 0.975
    loss: Optional[Callable] = None
    floor: float = 0.0

    def __post_init__(self):
        if self.kind not in ESTAT_KINDS:
            raise DomainError(f"unknown e-statistic {self.kind!r}")
        if self.kind in ("quantile", "es_var"):
            _check_beta(self.beta)
        if self.kind == "expected_loss" and self.loss is None:
            raise DomainError("expected_loss needs a loss function")


def _ratio(num, den):
    # 0/0 = 1 and c/0 = inf
    if den == 0:
        return 1.0 if num == 0 else math.inf
    return num / den


def e_stat(record, spec):
    """Backtest e-statistic of one forecast record; decreasing in the forecast ``r``."""
    x, r, z = record.x, record.r, record.z
    kind = spec.kind
    if kind == "mean":
        if x < 0:
            raise DomainError("the mean statistic needs x >= 0")
        if r < 0:
            raise DomainError("the mean statistic needs r >= 0")
        return _ratio(x, r)
    if kind == "variance_mean":
        if z is None:
            raise DomainError("variance_mean needs the mean forecast z")
        if r <= 0:
            raise DomainError("the variance forecast must be positive")
        return (x - z) ** 2 / r
    if kind == "quantile":
        return (1.0 if x > r else 0.0) / (1 - spec.beta)
    if kind == "expected_loss":
        a = spec.floor
        if r <= a:
            raise DomainError("expected_loss needs r > a")
        value = spec.loss(x) - a
        if value < 0:
            raise DomainError("loss is below its stated floor")
        return value / (r - a)
    # es_var
    if z is None:
        raise DomainError("es_var needs the VaR forecast z")
    if r < z:
        return math.inf
    return _ratio(max(x - z, 0.0), (1 - spec.beta) * (r - z))


def e_stats(records, spec):
    return np.array([e_stat(rec, spec) for rec in records])


def backtest(records, spec, betting="adaptive", gamma=0.5, alpha=0.05):
    """Feed the e-statistics into a betting e-process and yield ``(state, rejected)`` per record.

    ``betting`` is ``"adaptive"`` (empirically adaptive fraction capped at
    ``gamma``), ``"product"`` (all-in), or a fixed fraction in ``[0, 1]``.
    The fraction for step ``t`` is computed before record ``t`` is read.
    """
    state = EProcessState()
    for rec in records:
        if betting == "adaptive":
            lam = adaptive_lambda(state, gamma)
        elif betting == "product":
            lam = None
        else:
            lam = float(betting)
        e = e_stat(rec, spec)
        state = step_product(state, e) if lam is None else step_bet(state, e, lam)
        yield state, ville_test(state, alpha)


def backtest_path(es, gamma=0.5):
    """Fast log-wealth path of the adaptive backtest from precomputed e-statistics."""
    _, log_wealth = adaptive_wealth_path(es, gamma)
    return log_wealth
