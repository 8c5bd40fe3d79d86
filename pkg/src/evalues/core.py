"""Calibration between p-values and e-values, Markov-type tests and the
post-hoc decision rule.

E-values are plain floats (``math.inf`` allowed) and p-values are plain
floats; validation happens at the function boundary.
"""

from dataclasses import dataclass
import math

import numpy as np

from .errors import DomainError, EmptyInputError, NoFeasibleDecisionError

CALIBRATOR_KINDS = (
    "power",
    "mixture",
    "linear2",
    "sqrtinv",
    "neglog",
    "all_or_nothing",
    "bhy_truncation",
)


def harmonic_number(K):
    """``1 + 1/2 + ... + 1/K``."""
    return float(np.sum(1.0 / np.arange(1, int(K) + 1)))


def truncate_boost(x, K):
    """Boosting truncation ``T(x) = K / ceil(K / x)`` for ``x >= 1`` and 0 below 1.

    ``T(inf) = K``. Vectorised over ``x``.
    """
    K = int(K)
    if K < 1:
        raise DomainError("K must be a positive integer")
    x = np.asarray(x, dtype=float)
    if np.any(x < 0) or np.any(np.isnan(x)):
        raise DomainError("truncation input must be nonnegative")
    out = np.zeros_like(x)
    big = x >= 1
    with np.errstate(divide="ignore"):
        out[big] = K / np.maximum(np.ceil(K / x[big]), 1.0)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class Calibrator:
    """A decreasing p-to-e calibrator.

    ``kind`` is one of :data:`CALIBRATOR_KINDS`. ``kappa`` parametrises the
    power family, ``alpha`` the all-or-nothing and truncated-BHY kinds and
    ``K`` the latter's number of hypotheses.
    """

    kind: str
    kappa: float | None = None
    alpha: float | None = None
    K: int | None = None

    def __post_init__(self):
        if self.kind not in CALIBRATOR_KINDS:
            raise DomainError(f"unknown calibrator kind {self.kind!r}")
        if self.kind == "power":
            if self.kappa is None or not 0 < self.kappa < 1:
                raise DomainError("power calibrator needs kappa in (0, 1)")
        if self.kind in ("all_or_nothing", "bhy_truncation"):
            if self.alpha is None or not 0 < self.alpha < 1:
                raise DomainError(f"{self.kind} calibrator needs alpha in (0, 1)")
        if self.kind == "bhy_truncation":
            if self.K is None or int(self.K) != self.K or self.K < 1:
                raise DomainError("bhy_truncation needs a positive integer K")

    # -- evaluation ---------------------------------------------------------

    def __call__(self, p):
        p = np.asarray(p, dtype=float)
        if np.any(np.isnan(p)) or np.any(p < 0):
            raise DomainError("p-values must be nonnegative")
        out = np.zeros_like(p)
        inside = p <= 1
        q = p[inside]
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            out[inside] = self._inside(q)
        return out if out.ndim else float(out)

    def _inside(self, q):
        kind = self.kind
        if kind == "power":
            return self.kappa * q ** (self.kappa - 1)
        if kind == "mixture":
            lg = np.log(q)
            val = (1 - q + q * lg) / (q * lg**2)
            val = np.where(q == 1, 0.5, val)
            return np.where(q == 0, np.inf, val)
        if kind == "linear2":
            return 2 * (1 - q)
        if kind == "sqrtinv":
            return q**-0.5 - 1
        if kind == "neglog":
            return -np.log(q)
        if kind == "all_or_nothing":
            return np.where(q <= self.alpha, 1 / self.alpha, 0.0)
        # bhy_truncation
        K, alpha = int(self.K), self.alpha
        x = np.where(q == 0, np.inf, alpha / (harmonic_number(K) * q))
        return np.asarray(truncate_boost(x, K)) / alpha

    # -- analytic integral and inverse --------------------------------------

    def antiderivative(self, p):
        """``F(p) = integral of f over [0, p]`` for ``p`` in ``[0, 1]``."""
        p = float(p)
        if not 0 <= p <= 1:
            raise DomainError("antiderivative is defined on [0, 1]")
        kind = self.kind
        if kind == "power":
            return p**self.kappa
        if kind == "mixture":
            if p == 0:
                return 0.0
            if p == 1:
                return 1.0
            return (p - 1) / math.log(p)
        if kind == "linear2":
            return 2 * p - p * p
        if kind == "sqrtinv":
            return 2 * math.sqrt(p) - p
        if kind == "neglog":
            return p - p * math.log(p) if p > 0 else 0.0
        if kind == "all_or_nothing":
            return min(p, self.alpha) / self.alpha
        K, alpha = int(self.K), self.alpha
        width = alpha / (K * harmonic_number(K))
        total = 0.0
        for j in range(1, K + 1):
            lo, hi = (j - 1) * width, j * width
            if p <= lo:
                break
            total += (min(p, hi) - lo) * K / (j * alpha)
        return total

    def integral(self):
        """Integral of the calibrator over ``[0, 1]``."""
        return self.antiderivative(1.0)

    def inverse(self, x):
        """``sup{p in [0, 1] : f(p) >= x}``, with ``sup of the empty set = 0``."""
        x = float(x)
        if x <= 0:
            return 1.0
        kind = self.kind
        if kind == "power":
            return min(1.0, (x / self.kappa) ** (1 / (self.kappa - 1)))
        if kind == "linear2":
            return max(0.0, 1 - x / 2)
        if kind == "sqrtinv":
            return min(1.0, (1 + x) ** -2)
        if kind == "neglog":
            return min(1.0, math.exp(-x))
        if kind == "all_or_nothing":
            return self.alpha if x <= 1 / self.alpha else 0.0
        if kind == "bhy_truncation":
            K, alpha = int(self.K), self.alpha
            j = min(K, math.floor(K / (alpha * x) + 1e-12))
            return j * alpha / (K * harmonic_number(K)) if j >= 1 else 0.0
        # mixture: decreasing from inf to 1/2, bisection on log p
        if x <= 0.5:
            return 1.0
        lo, hi = -745.0, 0.0
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if self(math.exp(mid)) >= x:
                lo = mid
            else:
                hi = mid
            if hi - lo < 1e-14:
                break
        return math.exp(lo)


def calibrate_p_to_e(p, spec):
    """Turn a p-value into an e-value through the calibrator ``spec``."""
    if isinstance(spec, str):
        spec = Calibrator(spec)
    return spec(p)


def calibrate_e_to_p(e):
    """The dominating e-to-p calibrator ``min(1, 1/e)``."""
    e = np.asarray(e, dtype=float)
    if np.any(np.isnan(e)) or np.any(e < 0):
        raise DomainError("e-values must be nonnegative")
    with np.errstate(divide="ignore", over="ignore"):
        out = np.minimum(1.0, 1.0 / e)
    return out if out.ndim else float(out)


def _check_level(alpha):
    if not 0 < alpha <= 1:
        raise DomainError("alpha must lie in (0, 1]")


def _check_e(e):
    if math.isnan(e) or e < 0:
        raise DomainError("e-values must be nonnegative")


def markov_test(e, alpha):
    """Reject when ``e >= 1/alpha``."""
    _check_level(alpha)
    _check_e(e)
    return e >= 1 / alpha


def randomized_markov_test(e, alpha, u):
    """Reject when ``e >= u/alpha``; ``u`` must be an independent uniform."""
    _check_level(alpha)
    _check_e(e)
    if not 0 <= u <= 1:
        raise DomainError("u must lie in [0, 1]")
    return e >= u / alpha


def exchangeable_markov_test(es, alpha):
    """Reject at the first prefix whose running mean reaches ``1/alpha``.

    Returns ``(rejected, index)`` with a 1-based index, or ``(False, None)``.
    """
    _check_level(alpha)
    es = np.asarray(es, dtype=float)
    if es.size == 0:
        raise EmptyInputError("need at least one e-value")
    if np.any(np.isnan(es)) or np.any(es < 0):
        raise DomainError("e-values must be nonnegative")
    means = np.cumsum(es) / np.arange(1, es.size + 1)
    hits = np.flatnonzero(means >= 1 / alpha)
    if hits.size == 0:
        return False, None
    return True, int(hits[0]) + 1


def eumi_test(first, es, alpha, u):
    """Exchangeable test that also gets the randomised threshold on the first value."""
    _check_level(alpha)
    _check_e(first)
    if not 0 <= u <= 1:
        raise DomainError("u must lie in [0, 1]")
    if first >= u / alpha:
        return True
    es = np.asarray(es, dtype=float)
    if es.size == 0:
        return False
    return exchangeable_markov_test(es, alpha)[0]


@dataclass(frozen=True)
class SignificanceGrid:
    breakpoints: tuple = (1.0, 3.16, 10.0, 31.6, 100.0)
    labels: tuple = (
        "null hypothesis is supported",
        "no more than a bare mention",
        "substantial",
        "strong",
        "very strong",
        "decisive",
    )

    def __post_init__(self):
        b = self.breakpoints
        if any(b[i] >= b[i + 1] for i in range(len(b) - 1)):
            raise DomainError("breakpoints must be strictly ascending")
        if len(self.labels) != len(b) + 1:
            raise DomainError("need one more label than breakpoints")


JEFFREYS = SignificanceGrid()


def jeffreys_label(e, grid=JEFFREYS):
    """Evidence category for ``e``; a value on a breakpoint takes the lower label."""
    _check_e(e)
    if e < grid.breakpoints[0]:
        return grid.labels[0]
    idx = int(np.searchsorted(grid.breakpoints, e, side="left"))
    return grid.labels[idx]


@dataclass(frozen=True)
class LossTable:
    """Null losses ``L(0, d)`` for decisions ``d = 0..D`` and a budget ``gamma``."""

    null_losses: tuple
    gamma: float = 1.0

    def __post_init__(self):
        losses = tuple(float(v) for v in self.null_losses)
        object.__setattr__(self, "null_losses", losses)
        if not losses:
            raise EmptyInputError("need at least one decision")
        if any(v < 0 for v in losses):
            raise DomainError("null losses must be nonnegative")
        if any(losses[i] >= losses[i + 1] for i in range(len(losses) - 1)):
            raise DomainError("null losses must be strictly increasing in the decision")
        if not self.gamma > 0:
            raise DomainError("budget gamma must be positive")


def posthoc_decision(e, losses):
    """Most aggressive decision whose null loss fits under ``gamma * e``."""
    _check_e(e)
    budget = losses.gamma * e
    if losses.null_losses[0] > budget:
        raise NoFeasibleDecisionError("even decision 0 exceeds the loss budget")
    affordable = [d for d, loss in enumerate(losses.null_losses) if loss <= budget]
    return max(affordable)
