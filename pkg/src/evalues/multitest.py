"""FDR and FWER procedures built on e-values, plus BH/BHY and ep-BH.

Order statistics break ties by original index, so every procedure is
deterministic given its inputs and uniforms. Threshold comparisons allow a
relative slack of ``1e-12`` so that exact boundary cases survive rounding.
"""

from dataclasses import dataclass, field
import math
from typing import Callable

import numpy as np
from scipy import stats

from . import _kernels
from .core import harmonic_number, truncate_boost
from .errors import DomainError, EmptyInputError, InfeasibleError

_SLACK = 1e-12


@dataclass(frozen=True)
class DiscoverySet:
    rejected: tuple
    k_star: int
    threshold_used: float
    procedure_tag: str

    def __post_init__(self):
        object.__setattr__(self, "rejected", tuple(sorted(int(i) for i in self.rejected)))
        if len(self.rejected) != self.k_star:
            raise DomainError("k_star must equal the number of rejections")

    def __contains__(self, i):
        return i in self.rejected

    def as_set(self):
        return set(self.rejected)

    def to_json(self):
        thr = self.threshold_used
        return {
            "indices": list(self.rejected),
            "k_star": self.k_star,
            "threshold": thr if math.isfinite(thr) else None,
            "tag": self.procedure_tag,
        }


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


def _check_alpha(alpha):
    if not 0 < alpha < 1:
        raise DomainError("alpha must lie in (0, 1)")


def _descending(es):
    return np.argsort(-es, kind="stable")


# -- e-BH ----------------------------------------------------------------------


def ebh_k_star(es, alpha):
    es = _evalues(es)
    K = es.size
    desc = es[_descending(es)]
    k = np.arange(1, K + 1)
    ok = k * desc / K >= (1 / alpha) * (1 - _SLACK)
    return int(k[ok].max()) if ok.any() else 0


def ebh(es, alpha, tag="e-BH"):
    """Reject the ``k*`` largest e-values, ``k* = max{k : k e_[k] / K >= 1/alpha}``."""
    _check_alpha(alpha)
    es = _evalues(es)
    K = es.size
    k = ebh_k_star(es, alpha)
    order = _descending(es)
    thr = K / (k * alpha) if k else math.inf
    return DiscoverySet(order[:k], k, thr, tag)


def boost_truncation(x, K):
    """``T(x) = K / ceil(K / x)`` for ``x >= 1``, 0 below 1."""
    return truncate_boost(x, K)


def boosted_ebh(base_es, boost_factors, alpha):
    """e-BH on ``b_k e_k``; each factor must already be certified for its null."""
    es = _evalues(base_es)
    b = np.broadcast_to(np.asarray(boost_factors, dtype=float), es.shape)
    if np.any(b < 1) or np.any(np.isnan(b)):
        raise DomainError("boost factors must be at least 1")
    return ebh(es * b, alpha, tag="boosted e-BH")


def boost_expectation(null_draws, b, K, alpha):
    """Monte-Carlo ``E[T(alpha b E)]`` over draws of the null e-value."""
    return float(np.mean(truncate_boost(alpha * b * np.asarray(null_draws, dtype=float), K)))


def certify_boost(null_draws, K, alpha, b_max=None, margin=1e-3, tol=1e-6):
    """Largest ``b`` with Monte-Carlo ``E[T(alpha b E)] <= alpha``, less ``margin``.

    Raises :class:`InfeasibleError` when even ``b = 1`` fails.
    """
    draws = np.asarray(null_draws, dtype=float)
    if boost_expectation(draws, 1.0, K, alpha) > alpha:
        raise InfeasibleError("no boost factor is certified: b = 1 already fails")
    hi = b_max if b_max is not None else K / alpha
    if boost_expectation(draws, hi, K, alpha) <= alpha:
        return float(hi)
    lo = 1.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if boost_expectation(draws, mid, K, alpha) <= alpha:
            lo = mid
        else:
            hi = mid
    return max(1.0, lo - margin)


def gaussian_lr_boost_expectation(b, K, alpha, delta):
    """Exact ``E[T(alpha b E)]`` for ``E = exp(delta X - delta^2/2)``, ``X ~ N(0, 1)``."""
    if delta <= 0:
        raise DomainError("delta must be positive")
    total = 0.0
    # T = K/j on K/j <= alpha b E < K/(j-1); invert the monotone map X -> E
    def x_at(level):
        if level <= 0:
            return -math.inf
        if math.isinf(level):
            return math.inf
        return (math.log(level / (alpha * b)) + delta * delta / 2) / delta

    for j in range(1, K + 1):
        lo = x_at(K / j)
        hi = x_at(K / (j - 1)) if j > 1 else math.inf
        total += K / j * (stats.norm.sf(lo) - stats.norm.sf(hi))
    return total


def certify_gaussian_boost(K, alpha, delta, tol=1e-10):
    """Largest ``b`` with exact ``E[T(alpha b E)] <= alpha`` for a Gaussian LR e-value."""
    if gaussian_lr_boost_expectation(1.0, K, alpha, delta) > alpha:
        raise InfeasibleError("b = 1 already fails")
    lo, hi = 1.0, 2.0
    while gaussian_lr_boost_expectation(hi, K, alpha, delta) <= alpha:
        lo, hi = hi, 2 * hi
        if hi > 1e12:
            return lo
    while hi - lo > tol * hi:
        mid = 0.5 * (lo + hi)
        if gaussian_lr_boost_expectation(mid, K, alpha, delta) <= alpha:
            lo = mid
        else:
            hi = mid
    return lo


# -- p-value procedures --------------------------------------------------------


def bh(ps, alpha, tag="BH"):
    """Reject the ``k*`` smallest p-values, ``k* = max{k : K p_(k) / k <= alpha}``."""
    _check_alpha(alpha)
    ps = _pvalues(ps)
    K = ps.size
    order = np.argsort(ps, kind="stable")
    k = np.arange(1, K + 1)
    ok = K * ps[order] / k <= alpha * (1 + _SLACK)
    ks = int(k[ok].max()) if ok.any() else 0
    return DiscoverySet(order[:ks], ks, alpha * ks / K if ks else 0.0, tag)


def bhy(ps, alpha):
    """BH applied to ``l_K p`` with ``l_K = 1 + 1/2 + ... + 1/K``."""
    ps = _pvalues(ps)
    return bh(harmonic_number(ps.size) * ps, alpha, tag="BHY")


def ep_bh(ps, es, alpha):
    """BH on ``min(p / e, 1)``; a zero e-value gives 1."""
    ps, es = _pvalues(ps), _evalues(es)
    if ps.shape != es.shape:
        raise DomainError("need one e-value per p-value")
    with np.errstate(divide="ignore", invalid="ignore"):
        weighted = np.where(es > 0, np.minimum(ps / np.where(es > 0, es, 1.0), 1.0), 1.0)
    return bh(weighted, alpha, tag="ep-BH")


def compound_from_fdr(rejections, R, K, alpha):
    """Compound e-values ``(K / alpha) V_k / max(R, 1)`` from the rejections of an FDR procedure."""
    v = np.asarray(rejections, dtype=float)
    if v.shape != (K,) or np.any((v != 0) & (v != 1)):
        raise DomainError("rejections must be K indicators")
    if int(v.sum()) != R:
        raise DomainError("R must equal the number of rejections")
    _check_alpha(alpha)
    return K / alpha * v / max(R, 1)


def ebh_minimally_adaptive(es, alpha):
    """Nothing when the mean is below ``1/alpha``; otherwise e-BH at ``K alpha / (K - 1)``."""
    _check_alpha(alpha)
    es = _evalues(es)
    K = es.size
    if K < 2:
        raise DomainError("minimally adaptive e-BH needs K >= 2")
    if es.mean() < 1 / alpha:
        return DiscoverySet((), 0, math.inf, "minimally adaptive e-BH")
    level = min(K * alpha / (K - 1), 1 - 1e-15)
    out = ebh(es, level)
    return DiscoverySet(out.rejected, out.k_star, out.threshold_used, "minimally adaptive e-BH")


# -- randomised e-BH -----------------------------------------------------------


def stochastic_round(x, grid, u):
    """Mean-preserving random rounding of ``x`` onto the closed set ``grid``.

    Rounds up to the next grid point when ``u < (x - lower)/(upper - lower)``.
    Values off the grid's range, on the grid, or with no finite upper point
    are returned unchanged.
    """
    g = np.sort(np.asarray(grid, dtype=float))
    if g.size == 0 or np.any(np.isnan(g)):
        raise DomainError("grid must be a non-empty set of numbers")
    if not 0 <= u <= 1:
        raise DomainError("u must lie in [0, 1]")
    if x <= g[0] or x >= g[-1]:
        return float(x)
    i = int(np.searchsorted(g, x, side="left"))
    if g[i] == x:
        return float(x)
    lower, upper = g[i - 1], g[i]
    if math.isinf(upper):
        return float(x)
    return float(upper if u < (x - lower) / (upper - lower) else lower)


def _ebh_grid(K, alpha):
    return np.concatenate(([0.0], K / (np.arange(K, 0, -1) * alpha), [math.inf]))


def _uniforms(us, K, name):
    us = np.asarray(us, dtype=float)
    if us.shape != (K,):
        raise DomainError(f"{name} needs one uniform per e-value")
    return us


def ge_rounded(es, alpha, us):
    es = _evalues(es)
    us = _uniforms(us, es.size, "Ge-BH")
    grid = _ebh_grid(es.size, alpha)
    return np.array([stochastic_round(x, grid, u) for x, u in zip(es, us)])


def ge_bh(es, alpha, us):
    """e-BH on the e-values stochastically rounded onto ``{K/(k alpha)} ∪ {0, ∞}``."""
    _check_alpha(alpha)
    out = ebh(ge_rounded(es, alpha, us), alpha)
    return DiscoverySet(out.rejected, out.k_star, out.threshold_used, "Ge-BH")


def de_bh(es, alpha, us, final_u):
    """Ge-BH followed by a second rounding against ``{0, 1/alpha_hat, ∞}``, one shared uniform."""
    _check_alpha(alpha)
    if not 0 <= final_u <= 1:
        raise DomainError("final_u must lie in [0, 1]")
    rounded = ge_rounded(es, alpha, us)
    K = rounded.size
    k = ebh_k_star(rounded, alpha)
    alpha_hat = alpha * (k + 1) / K
    cut = 1 / alpha_hat
    second = np.where(rounded >= cut, rounded, np.where(final_u <= alpha_hat * rounded, cut, 0.0))
    out = ebh(second, alpha)
    return DiscoverySet(out.rejected, out.k_star, out.threshold_used, "De-BH")


def ue_bh(es, alpha, u):
    """e-BH on ``e / U`` for a single uniform ``U``."""
    _check_alpha(alpha)
    es = _evalues(es)
    if not 0 <= u <= 1:
        raise DomainError("u must lie in [0, 1]")
    with np.errstate(divide="ignore", invalid="ignore"):
        scaled = np.where(es > 0, es / u if u > 0 else math.inf, 0.0)
    out = ebh(scaled, alpha)
    return DiscoverySet(out.rejected, out.k_star, out.threshold_used, "Ue-BH")


# -- closed procedures ---------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ECollection:
    """E-values ``E_A`` for the intersection hypotheses ``A ⊆ {0..K-1}``."""

    K: int
    evaluator: Callable
    kind: str = "explicit"
    base: np.ndarray = field(default=None)

    @classmethod
    def mean_from_base(cls, es):
        es = _evalues(es)

        def evaluate(subset):
            idx = list(subset)
            return float(es[idx].mean()) if idx else 1.0

        return cls(es.size, evaluate, "mean_from_base", es)

    @classmethod
    def explicit(cls, K, table):
        """``table`` maps frozensets of indices to e-values; missing subsets default to 1 only for ∅."""

        def evaluate(subset):
            subset = frozenset(subset)
            if not subset:
                return 1.0
            return float(table[subset])

        return cls(K, evaluate, "explicit")

    def __call__(self, subset):
        return self.evaluator(subset)

    def all_masks(self):
        """``E_A`` for every bitmask ``A`` (bit ``i`` set when ``i ∈ A``)."""
        K = self.K
        out = np.empty(1 << K)
        for mask in range(1 << K):
            out[mask] = 1.0 if mask == 0 else self.evaluator([i for i in range(K) if mask >> i & 1])
        return out


def _popcounts(K):
    masks = np.arange(1 << K)
    counts = np.zeros(1 << K, dtype=np.int64)
    for i in range(K):
        counts += (masks >> i) & 1
    return counts


LOSSES = ("fdp", "kfwer", "pfer", "fdx")


def loss_values(name, inter, r_size, K, k=1, gamma=0.1):
    """Loss ``L_A(R)`` given ``|A ∩ R|`` (array), ``|R|`` and ``K``."""
    inter = np.asarray(inter, dtype=float)
    if name == "fdp":
        return inter / max(r_size, 1)
    if name == "kfwer":
        return (inter >= k).astype(float)
    if name == "pfer":
        return inter / K
    if name == "fdx":
        return (inter / max(r_size, 1) > gamma).astype(float)
    raise DomainError(f"unknown loss {name!r}")


def _closed_search(collection, loss, alpha, limit=20):
    K = collection.K
    if K > limit:
        raise DomainError(f"exhaustive closure search is limited to K <= {limit}")
    e_all = collection.all_masks()
    pop = _popcounts(K)
    masks = np.arange(1 << K)
    best_mask, best_size = 0, 0
    # larger sets first; among equal sizes the first feasible mask in index order wins
    for r_mask in sorted(range(1, 1 << K), key=lambda m: (-pop[m], m)):
        size = int(pop[r_mask])
        if size <= best_size:
            break
        inter = pop[masks & r_mask]
        lv = loss(inter, size)
        if np.any((lv < 0) | (lv > 1)):
            raise DomainError("loss values must lie in [0, 1]")
        if np.all(alpha * e_all >= lv * (1 - _SLACK)):
            best_mask, best_size = r_mask, size
    return [i for i in range(K) if best_mask >> i & 1]


def closed_ebh(collection, alpha):
    """Largest ``R`` with ``E_A >= FDP_A(R) / alpha`` for every ``A``.

    For a mean collection the feasible sets nest along the descending e-order,
    so only prefixes need checking. For prefix ``R`` of size ``k`` the binding
    ``A`` for each ``m = |A ∩ R|`` takes the ``m`` smallest members of ``R``
    and ``j`` of the smallest non-members; the check is
    ``S_m + T_j >= m (m + j) / (alpha k)`` for all ``m``, ``j``.
    Other collections use exhaustive search (``K <= 20``).
    """
    _check_alpha(alpha)
    if isinstance(collection, ECollection) and collection.kind == "mean_from_base":
        es = collection.base
    elif isinstance(collection, ECollection):
        rejected = _closed_search(collection, lambda inter, r: loss_values("fdp", inter, r, collection.K), alpha)
        return DiscoverySet(rejected, len(rejected), math.nan, "closed e-BH")
    else:
        es = _evalues(collection)
    order = _descending(es)
    k = _kernels.closed_mean_scan(es[order] * (1 + _SLACK), alpha)
    return DiscoverySet(order[:k], k, math.nan, "closed e-BH")


def closed_loss(collection, loss, alpha, **loss_args):
    """Largest ``R`` with ``E_A >= L_A(R) / alpha`` for every ``A``, by exhaustive search.

    ``loss`` is one of :data:`LOSSES` or a callable ``(|A ∩ R| array, |R|) -> values``.
    """
    _check_alpha(alpha)
    if not isinstance(collection, ECollection):
        collection = ECollection.mean_from_base(collection)
    K = collection.K
    fn = loss if callable(loss) else (lambda inter, r: loss_values(loss, inter, r, K, **loss_args))
    rejected = _closed_search(collection, fn, alpha)
    return DiscoverySet(rejected, len(rejected), math.nan, f"closed {loss if isinstance(loss, str) else 'loss'}")


def fwer_adjust(es):
    """Adjusted e-values ``E*_k``: the smallest mean over sets containing ``k``.

    With ``S_i`` the sum of the ``i`` smallest values (ascending, stable),
    the value ranked ``k`` gets ``min over i < k of (e + S_i) / (i + 1)``.
    """
    es = _evalues(es)
    order = np.argsort(es, kind="stable")
    asc = es[order]
    prefix = np.concatenate(([0.0], np.cumsum(asc)))
    adjusted = np.empty_like(es)
    for rank, idx in enumerate(order):
        i = np.arange(rank + 1)
        adjusted[idx] = np.min((asc[rank] + prefix[: rank + 1]) / (i + 1))
    return adjusted


def fwer_reject(es, alpha):
    _check_alpha(alpha)
    adj = fwer_adjust(es)
    idx = np.flatnonzero(adj >= (1 / alpha) * (1 - _SLACK))
    return DiscoverySet(idx, idx.size, 1 / alpha, "FWER")


def fdr_fdp_report(discoveries, nulls):
    """False discovery proportion ``|D ∩ N| / max(|D|, 1)`` and the counts behind it."""
    d = set(discoveries.rejected if isinstance(discoveries, DiscoverySet) else discoveries)
    n = set(nulls)
    false = len(d & n)
    counts = {"discoveries": len(d), "false": false, "true": len(d) - false}
    return false / max(len(d), 1), counts
