"""Merging functions for e-values and p-values, and p/e cross-combiners."""

import math

import numpy as np

from . import _kernels
from .core import Calibrator, harmonic_number
from .errors import DomainError, EmptyInputError

E_RULES = ("mean", "weighted_mean", "ustat", "product", "martingale", "empirically_adaptive", "hit_and_stop")
P_RULES = (
    "bonferroni",
    "order",
    "twice_mean",
    "e_geometric",
    "harmonic_TK",
    "hommel",
    "simes_unsafe",
    "calibrated",
)


def _evalues(es):
    es = np.asarray(es, dtype=float).ravel()
    if es.size == 0:
        raise EmptyInputError("need at least one e-value")
    if np.any(np.isnan(es)) or np.any(es < 0):
        raise DomainError("e-values must be nonnegative")
    return es


def _pvalues(ps):
    ps = np.asarray(ps, dtype=float).ravel()
    if ps.size == 0:
        raise EmptyInputError("need at least one p-value")
    if np.any(np.isnan(ps)) or np.any(ps < 0):
        raise DomainError("p-values must be nonnegative")
    return ps


def _sorted(ps):
    # stable: ties keep their original order
    return ps[np.argsort(ps, kind="stable")]


# -- e-merging -----------------------------------------------------------------


def elementary_symmetric(values, n):
    """``e_n(values)``: the sum over all n-subsets of the product of their entries."""
    coeffs = np.zeros(n + 1)
    coeffs[0] = 1.0
    for v in values:
        coeffs[1:] = coeffs[1:] + v * coeffs[:-1]
    return coeffs[n]


def ustat_merge(es, n):
    """Average over all ``n``-subsets of the product of the e-values."""
    es = _evalues(es)
    K = es.size
    if not 1 <= n <= K:
        raise DomainError("n must lie in 1..K")
    if np.isinf(es).any():
        return math.inf if np.count_nonzero(es) >= n else 0.0
    return float(elementary_symmetric(es, n) / math.comb(K, n))


def martingale_factors(es, lambdas):
    es = _evalues(es)
    lambdas = np.asarray(lambdas, dtype=float)
    if lambdas.shape != es.shape:
        raise DomainError("need one betting fraction per e-value")
    if np.any(lambdas < 0) or np.any(lambdas > 1):
        raise DomainError("betting fractions must lie in [0, 1]")
    with np.errstate(invalid="ignore"):
        f = np.where(lambdas > 0, 1 - lambdas + lambdas * es, 1.0)
    return f


def martingale_merge(es, strategy):
    """``prod (1 - lam_k + lam_k e_k)`` with ``lam_k`` depending only on earlier e-values.

    ``strategy`` is either a fixed sequence of fractions or a callable that
    maps the prefix ``e_1..e_{k-1}`` to ``lam_k``.
    """
    es = _evalues(es)
    if callable(strategy):
        lambdas = np.array([float(strategy(es[:k])) for k in range(es.size)])
    else:
        lambdas = np.asarray(strategy, dtype=float)
    return float(np.prod(martingale_factors(es, lambdas)))


def empirically_adaptive_lambdas(es, gamma=1.0):
    """Betting fractions of the empirically adaptive bettor; the first is 0."""
    if not 0 < gamma <= 1:
        raise DomainError("gamma must lie in (0, 1]")
    es = _evalues(es)
    lambdas, _ = _kernels.adaptive_path(es, gamma)
    return lambdas


def hit_and_stop_lambdas(es, alpha, inner):
    """Use ``inner`` fractions until the running wealth reaches ``1/alpha``, then stop betting."""
    es = _evalues(es)
    inner = np.asarray(inner, dtype=float)
    out = inner.copy()
    wealth = 1.0
    stopped = False
    for k in range(es.size):
        if stopped:
            out[k] = 0.0
            continue
        wealth *= 1 - inner[k] + inner[k] * es[k] if inner[k] > 0 else 1.0
        if wealth >= 1 / alpha:
            stopped = True
    return out


def merge_e(es, rule="mean", *, weights=None, n=None, strategy=None, gamma=1.0, alpha=None):
    """Merge e-values with one of :data:`E_RULES`.

    ``weighted_mean`` takes ``K + 1`` weights, the first of which multiplies
    the constant e-value 1.
    """
    es = _evalues(es)
    K = es.size
    if rule == "mean":
        return float(es.mean())
    if rule == "weighted_mean":
        w = np.asarray(weights, dtype=float)
        if w.shape != (K + 1,):
            raise DomainError("weighted_mean needs K + 1 weights")
        if np.any(w < 0) or abs(w.sum() - 1) > 1e-12:
            raise DomainError("weights must be nonnegative and sum to 1")
        return float(w[0] + np.dot(w[1:], es))
    if rule == "ustat":
        return ustat_merge(es, int(n))
    if rule == "product":
        return float(np.prod(es))
    if rule == "martingale":
        if strategy is None:
            raise DomainError("martingale merging needs a strategy")
        return martingale_merge(es, strategy)
    if rule == "empirically_adaptive":
        return float(np.prod(martingale_factors(es, empirically_adaptive_lambdas(es, gamma))))
    if rule == "hit_and_stop":
        if alpha is None or not 0 < alpha < 1:
            raise DomainError("hit_and_stop needs alpha in (0, 1)")
        if strategy is None:
            inner = empirically_adaptive_lambdas(es, gamma)
        elif callable(strategy):
            inner = np.array([float(strategy(es[:k])) for k in range(K)])
        else:
            inner = np.asarray(strategy, dtype=float)
        return float(np.prod(martingale_factors(es, hit_and_stop_lambdas(es, alpha, inner))))
    raise DomainError(f"unknown e-merging rule {rule!r}")


# -- p-merging -----------------------------------------------------------------


def harmonic_constant(K):
    """``T_K = log K + log log K + 1`` for ``K >= 2``."""
    if K < 2:
        raise DomainError("T_K needs K >= 2")
    return math.log(K) + math.log(math.log(K)) + 1


def _calibrated_infimum(ps, calibrator, weights, target):
    """``inf{eps in (0, 1] : sum w_k f(p_k / eps) >= target}``; 1 when empty."""
    if target <= 0:
        return 0.0

    def score(eps):
        return float(np.dot(weights, calibrator(ps / eps)))

    if score(1.0) < target:
        return 1.0
    lo, hi = 0.0, 1.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid == 0 or score(mid) >= target:
            hi = mid
        else:
            lo = mid
        if hi - lo < 1e-12:
            break
    return hi


def merge_p(ps, rule="twice_mean", *, k=None, calibrator=None, weights=None, assume_prds=False):
    """Merge arbitrarily dependent p-values with one of :data:`P_RULES`."""
    ps = _pvalues(ps)
    K = ps.size
    if rule == "bonferroni":
        out = K * ps.min()
    elif rule == "order":
        if k is None or not 1 <= k <= K:
            raise DomainError("order rule needs k in 1..K")
        out = K / k * _sorted(ps)[k - 1]
    elif rule == "twice_mean":
        out = 2 * ps.mean()
    elif rule == "e_geometric":
        with np.errstate(divide="ignore"):
            out = math.e * math.exp(np.log(ps).mean())
    elif rule == "harmonic_TK":
        if K == 1:
            out = ps[0]
        else:
            with np.errstate(divide="ignore", over="ignore"):
                hm = 1 / np.mean(1 / ps)
            out = (harmonic_constant(K) + 1) * hm
    elif rule == "hommel":
        s = _sorted(ps)
        out = harmonic_number(K) * float(np.min(K / np.arange(1, K + 1) * s))
    elif rule == "simes_unsafe":
        if not assume_prds:
            raise DomainError("Simes is only valid under PRDS; pass assume_prds=True")
        s = _sorted(ps)
        out = float(np.min(K / np.arange(1, K + 1) * s))
    elif rule == "calibrated":
        cal = calibrator if isinstance(calibrator, Calibrator) else Calibrator(calibrator or "linear2")
        w = np.full(K, 1 / K) if weights is None else np.asarray(weights, dtype=float)
        if w.shape != (K,) or np.any(w < 0) or abs(w.sum() - 1) > 1e-12:
            raise DomainError("weights must be K nonnegative numbers summing to 1")
        out = _calibrated_infimum(ps, cal, w, 1.0)
    else:
        raise DomainError(f"unknown p-merging rule {rule!r}")
    return float(min(out, 1.0))


def merge_p_exchangeable(ps, calibrator="sqrtinv"):
    """Merge exchangeable p-values through the best prefix average of ``f(p_k / eps)``."""
    ps = _pvalues(ps)
    cal = calibrator if isinstance(calibrator, Calibrator) else Calibrator(calibrator)
    sizes = np.arange(1, ps.size + 1)

    def score(eps):
        return float(np.max(np.cumsum(cal(ps / eps)) / sizes))

    if score(1.0) < 1:
        return 1.0
    lo, hi = 0.0, 1.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid == 0 or score(mid) >= 1:
            hi = mid
        else:
            lo = mid
        if hi - lo < 1e-12:
            break
    return float(hi)


def merge_p_randomized(ps, rule, u, *, k=None, calibrator=None, weights=None):
    """Randomised counterpart of :func:`merge_p`; ``u`` is an independent uniform."""
    if not 0 <= u <= 1:
        raise DomainError("u must lie in [0, 1]")
    ps = _pvalues(ps)
    K = ps.size
    if rule == "twice_mean":
        out = 2 / (2 - u) * ps.mean()
    elif rule == "e_geometric":
        with np.errstate(divide="ignore"):
            out = math.exp(u) * math.exp(np.log(ps).mean())
    elif rule == "harmonic_TK":
        with np.errstate(divide="ignore"):
            hm = 1 / np.mean(1 / ps)
        out = (harmonic_constant(K) * u + 1) * hm if K >= 2 else ps[0]
    elif rule == "order":
        if k is None or not 1 <= k <= K:
            raise DomainError("order rule needs k in 1..K")
        idx = max(1, math.ceil(u * k))
        out = K / k * _sorted(ps)[idx - 1]
    elif rule == "calibrated":
        cal = calibrator if isinstance(calibrator, Calibrator) else Calibrator(calibrator or "linear2")
        w = np.full(K, 1 / K) if weights is None else np.asarray(weights, dtype=float)
        out = _calibrated_infimum(ps, cal, w, u)
    else:
        raise DomainError(f"rule {rule!r} has no randomised form")
    return float(min(out, 1.0))


def avg_p_randomized_test(ps, alpha, u):
    """Reject when the mean p-value is at most ``2 alpha u``."""
    if not 0 < alpha < 1:
        raise DomainError("alpha must lie in (0, 1)")
    if not 0 <= u <= 1:
        raise DomainError("u must lie in [0, 1]")
    ps = _pvalues(ps)
    return bool(ps.mean() <= 2 * alpha * u)


def combine_pe(p, e, mode="ip", *, lam=0.5, calibrator="sqrtinv"):
    """Combine one p-value with one e-value.

    ``ie`` and ``e_mix`` return e-values; ``ip`` and ``p_min`` return p-values.
    ``ie`` and ``ip`` assume the two inputs are independent.
    """
    if p < 0 or e < 0 or math.isnan(p) or math.isnan(e):
        raise DomainError("p and e must be nonnegative")
    cal = calibrator if isinstance(calibrator, Calibrator) else Calibrator(calibrator)
    if mode == "ie":
        f = cal(p)
        if f == 0 or e == 0:
            return 0.0
        return float(f * e)
    if mode == "ip":
        if e == 0:
            return 1.0
        return float(min(p / e, 1.0))
    if mode == "e_mix":
        if not 0 < lam < 1:
            raise DomainError("lam must lie in (0, 1)")
        return float(lam * cal(p) + (1 - lam) * e)
    if mode == "p_min":
        inv = math.inf if e == 0 else 1 / e
        return float(min(2 * min(p, inv), 1.0))
    raise DomainError(f"unknown combination mode {mode!r}")
