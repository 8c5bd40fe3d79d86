"""Streaming e-processes and sequential tests.

:class:`EProcessState` is an immutable value: every update returns a new
state. Wealth is kept on the log scale; a zero betting factor latches the
process at 0 for good.
"""

from dataclasses import dataclass, field, replace
import math
from typing import NamedTuple

import numpy as np

from . import _kernels
from .errors import DomainError, EmptyInputError


@dataclass(frozen=True)
class EProcessState:
    log_wealth: float = 0.0
    t: int = 0
    log_max: float = 0.0
    history: tuple = ()
    data: tuple = ()
    log_numerator: float = 0.0

    @property
    def wealth(self):
        return math.exp(self.log_wealth) if self.log_wealth < 709 else math.inf

    @property
    def history_max(self):
        return math.exp(self.log_max) if self.log_max < 709 else math.inf

    def _advance(self, log_factor, e=None, **changes):
        lw = -math.inf if (self.log_wealth == -math.inf or log_factor == -math.inf) else self.log_wealth + log_factor
        history = self.history + ((e,) if e is not None else ())
        return replace(self, log_wealth=lw, t=self.t + 1, log_max=max(self.log_max, lw), history=history, **changes)


class PredictableBet(NamedTuple):
    """A betting fraction stamped with the step count of the state it was computed from."""

    fraction: float
    at_step: int


def _log(x):
    if x == 0:
        return -math.inf
    return math.log(x)


def step_product(state, e):
    """Multiply the wealth by a sequential e-value."""
    if math.isnan(e) or e < 0:
        raise DomainError("e-values must be nonnegative")
    return state._advance(_log(e), e)


def step_bet(state, e, lam):
    """Multiply the wealth by ``1 - lam + lam e``.

    ``lam`` may be a :class:`PredictableBet`; its stamp must match ``state.t``
    so that a fraction computed after seeing the current observation is caught.
    """
    if isinstance(lam, PredictableBet):
        if lam.at_step != state.t:
            raise DomainError("betting fraction was not computed from the current state")
        lam = lam.fraction
    if not 0 <= lam <= 1:
        raise DomainError("lam must lie in [0, 1]")
    if math.isnan(e) or e < 0:
        raise DomainError("e-values must be nonnegative")
    factor = 1.0 if lam == 0 else 1 - lam + lam * e
    return state._advance(_log(factor), e)


def adaptive_lambda(state, gamma=1.0):
    """Empirically adaptive fraction from the e-values seen so far (0 on an empty history)."""
    if not 0 < gamma <= 1:
        raise DomainError("gamma must lie in (0, 1]")
    if not state.history:
        return PredictableBet(0.0, state.t)
    values, counts = np.unique(np.asarray(state.history, dtype=float), return_counts=True)
    return PredictableBet(_kernels.bet_fraction(values, counts, gamma), state.t)


def ville_test(state, alpha):
    """Reject once the running maximum of the wealth has reached ``1/alpha``."""
    if not 0 < alpha <= 1:
        raise DomainError("alpha must lie in (0, 1]")
    return state.log_max >= math.log(1 / alpha) - 1e-12


def adaptive_wealth_path(es, gamma=0.5):
    """Betting fractions and log-wealth of the empirically adaptive process along ``es``."""
    if not 0 < gamma <= 1:
        raise DomainError("gamma must lie in (0, 1]")
    es = np.asarray(es, dtype=float)
    if np.any(np.isnan(es)) or np.any(es < 0):
        raise DomainError("e-values must be nonnegative")
    return _kernels.adaptive_path(es, gamma)


# -- SPRT --------------------------------------------------------------------


@dataclass(frozen=True)
class SprtConfig:
    alpha: float = 0.05
    beta: float = 0.05
    mode: str = "conservative"

    def __post_init__(self):
        if not (0 < self.alpha < 1 and 0 < self.beta < 1):
            raise DomainError("alpha and beta must lie in (0, 1)")
        if self.mode not in ("conservative", "classical"):
            raise DomainError("mode must be 'conservative' or 'classical'")
        lo, hi = self.thresholds
        if not lo < 1 < hi:
            raise DomainError("thresholds must straddle 1")

    @property
    def thresholds(self):
        if self.mode == "conservative":
            return self.beta, 1 / self.alpha
        return self.beta / (1 - self.alpha), (1 - self.beta) / self.alpha


class SprtResult(NamedTuple):
    decision: str  # "reject", "accept" or "inconclusive"
    stopping_time: int


def sprt(log_ratios, config=SprtConfig()):
    """Run the SPRT on a stream of per-observation log likelihood ratios."""
    lo, hi = (math.log(v) for v in config.thresholds)
    s = 0.0
    t = 0
    for t, llr in enumerate(log_ratios, start=1):
        s += llr
        if s >= hi:
            return SprtResult("reject", t)
        if s <= lo:
            return SprtResult("accept", t)
    return SprtResult("inconclusive", t)


def bernoulli_llr(p0, p1):
    """Per-observation log likelihood ratios for a success and a failure."""
    return math.log(p1 / p0), math.log((1 - p1) / (1 - p0))


def sprt_bernoulli_paths(p_true, p0, p1, config, n_paths, rng, block=512, max_steps=100_000):
    """Monte-Carlo SPRT on Bernoulli data.

    Returns ``(decisions, stopping_times)``; decisions are +1 (reject),
    -1 (accept) and 0 (no decision within ``max_steps``).
    """
    up, down = bernoulli_llr(p0, p1)
    lo, hi = (math.log(v) for v in config.thresholds)
    decisions = np.zeros(n_paths, dtype=np.int64)
    times = np.full(n_paths, max_steps, dtype=np.int64)
    level = np.zeros(n_paths)
    active = np.arange(n_paths)
    done = 0
    while active.size and done < max_steps:
        width = min(block, max_steps - done)
        draws = rng.random((active.size, width)) < p_true
        inc = np.where(draws, up, down)
        step, final = _kernels.first_exit(inc, level[active], lo, hi)
        hit = step >= 0
        idx = active[hit]
        times[idx] = done + step[hit] + 1
        decisions[idx] = np.where(final[hit] >= hi, 1, -1)
        level[active] = final
        active = active[~hit]
        done += width
    return decisions, times


def sprt_bernoulli_exact(p_true, p0, p1, config, max_steps=100_000, tail=1e-14):
    """Exact expected stopping time and rejection probability by forward recursion.

    Tracks the probability of every success count among still-running paths.
    """
    up, down = bernoulli_llr(p0, p1)
    lo, hi = (math.log(v) for v in config.thresholds)
    mass = np.array([1.0])  # index = number of successes so far
    expected_time = 0.0
    reject = 0.0
    for n in range(1, max_steps + 1):
        new = np.zeros(n + 1)
        new[:-1] += mass * (1 - p_true)
        new[1:] += mass * p_true
        h = np.arange(n + 1)
        level = h * up + (n - h) * down
        stop_hi = level >= hi
        stop_lo = level <= lo
        reject += new[stop_hi].sum()
        stopped = new[stop_hi].sum() + new[stop_lo].sum()
        expected_time += n * stopped
        new[stop_hi | stop_lo] = 0.0
        mass = new
        remaining = mass.sum()
        if remaining < tail:
            break
    return expected_time, reject


# -- universal inference, time mixtures and continuation -----------------------


def ui_eprocess_step(state, new_point, alt_log_predictive, null_max_loglik):
    """Add one observation to a universal-inference e-process.

    ``alt_log_predictive(past, x)`` is the log density at ``x`` of a predictor
    fitted on ``past`` only; ``null_max_loglik(points)`` is the maximised null
    log-likelihood of all points so far. The wealth is recomputed rather than
    multiplied because the null fit changes at every step.
    """
    past = np.asarray(state.data, dtype=float)
    log_num = state.log_numerator + float(alt_log_predictive(past, new_point))
    data = state.data + (float(new_point),)
    lw = log_num - float(null_max_loglik(np.asarray(data, dtype=float)))
    return replace(
        state,
        log_wealth=lw,
        t=state.t + 1,
        log_max=max(state.log_max, lw),
        data=data,
        log_numerator=log_num,
    )


def gaussian_ui_log_wealth(x, prior_mean=0.0):
    """Log-wealth paths of the UI process for the null ``{N(theta, 1)}``.

    The alternative predictor is N(running mean of past points, 1), starting
    from ``prior_mean``. ``x`` may be 1-d (one path) or 2-d (paths by rows).
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    n = x.shape[1]
    steps = np.arange(1, n + 1)
    csum = np.cumsum(x, axis=1)
    pred = np.empty_like(x)
    pred[:, 0] = prior_mean
    pred[:, 1:] = csum[:, :-1] / steps[:-1]
    log_num = np.cumsum(-0.5 * (x - pred) ** 2, axis=1)
    # max over theta of sum -(x - theta)^2/2 = -(sum x^2 - n xbar^2)/2
    css = np.cumsum(x * x, axis=1) - csum**2 / steps
    log_den = -0.5 * css
    return log_num - log_den


def gaussian_lr_log_wealth(x, mu):
    x = np.atleast_2d(np.asarray(x, dtype=float))
    return np.cumsum(mu * x - mu * mu / 2, axis=1)


def gaussian_mixture_log_wealth(x, tau=1.0):
    """Mixture over ``mu ~ N(0, tau^2)`` of the Gaussian likelihood-ratio martingales."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    n = np.arange(1, x.shape[1] + 1)
    s = np.cumsum(x, axis=1)
    v = tau * tau
    return -0.5 * np.log1p(n * v) + v * s**2 / (2 * (1 + n * v))


def gaussian_plugin_log_wealth(x, clip=2.0):
    """Plug-in process: bet ``N(mu_hat, 1)`` with ``mu_hat`` the clipped mean of past points."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    n = x.shape[1]
    csum = np.cumsum(x, axis=1)
    mu = np.zeros_like(x)
    mu[:, 1:] = np.clip(csum[:, :-1] / np.arange(1, n), -clip, clip)
    return np.cumsum(mu * x - mu * mu / 2, axis=1)


def default_time_weights(n, terms=1_000_000):
    """``w(j) proportional to 1 / (j log(j+1)^2)`` for ``j = 1..n``.

    Normalised by the partial sum over ``terms`` plus an integral bound on the
    tail, so the full series sums to at most 1.
    """
    j = np.arange(1, terms + 1, dtype=float)
    head = float(np.sum(1 / (j * np.log(j + 1) ** 2)))
    tail = 1 / math.log(terms + 1)  # integral of 1/(x log(x)^2) beyond terms
    c = 1 / (head + tail)
    k = np.arange(1, n + 1, dtype=float)
    return c / (k * np.log(k + 1) ** 2)


def time_mixture(e_by_n, weights=None):
    """``M_n = sum_{j <= n} w(j) E^(j)``, a nondecreasing e-process.

    ``e_by_n[j-1]`` is the e-value computed from the first ``j`` points. A
    2-d input is treated as one path per row.
    """
    e = np.asarray(e_by_n, dtype=float)
    if e.size == 0:
        raise EmptyInputError("need at least one e-value")
    if np.any(np.isnan(e)) or np.any(e < 0):
        raise DomainError("e-values must be nonnegative")
    n = e.shape[-1]
    w = default_time_weights(n) if weights is None else np.asarray(weights, dtype=float)[:n]
    if w.shape[0] < n:
        raise DomainError("need a weight for every time")
    # zero weights are allowed so that point masses work; negative ones are not
    if np.any(w < 0) or not np.any(w > 0):
        raise DomainError("weights must be nonnegative with some positive mass")
    if w.sum() > 1 + 1e-12:
        raise DomainError("weights must sum to at most 1")
    return np.cumsum(e * w, axis=-1)


def optional_continuation(first, second_wealth):
    """Wealth of a second e-process started after the first stopped, times the first's stopped wealth."""
    second = np.asarray(second_wealth, dtype=float)
    if np.any(second < 0):
        raise DomainError("wealth must be nonnegative")
    return first.wealth * second
