"""Concrete e-variables and closed-form numeraires.

Products of many likelihood terms are accumulated on the log scale and
exponentiated once, so overflow gives ``inf`` and underflow gives 0.
"""

from dataclasses import dataclass
import math

import numpy as np
from scipy import stats

from .errors import DegenerateSampleError, DomainError, EmptyInputError, InfeasibleError


def _sample(values, allow_empty=False):
    x = np.asarray(values, dtype=float).ravel()
    if x.size == 0 and not allow_empty:
        raise EmptyInputError("sample is empty")
    if np.any(~np.isfinite(x)):
        raise DomainError("sample values must be finite")
    return x


def _exp(log_value):
    with np.errstate(over="ignore"):
        return float(np.exp(log_value))


# -- densities ----------------------------------------------------------------


def gaussian_density(mean=0.0, sd=1.0):
    return lambda x: stats.norm.pdf(x, loc=mean, scale=sd)


def bernoulli_density(p):
    return lambda x: np.where(np.asarray(x) == 1, p, np.where(np.asarray(x) == 0, 1 - p, 0.0))


def uniform_density(lo=0.0, hi=1.0):
    return lambda x: stats.uniform.pdf(x, loc=lo, scale=hi - lo)


def piecewise_constant_density(edges, heights):
    """Density that equals ``heights[i]`` on ``[edges[i], edges[i+1])``."""
    edges = np.asarray(edges, dtype=float)
    heights = np.asarray(heights, dtype=float)
    if len(edges) != len(heights) + 1 or np.any(np.diff(edges) <= 0) or np.any(heights < 0):
        raise DomainError("need ascending edges and one nonnegative height per cell")

    def density(x):
        x = np.asarray(x, dtype=float)
        idx = np.searchsorted(edges, x, side="right") - 1
        inside = (idx >= 0) & (idx < len(heights))
        return np.where(inside, heights[np.clip(idx, 0, len(heights) - 1)], 0.0)

    return density


# -- likelihood-ratio e-values -------------------------------------------------


def gaussian_lr_e(sample, mu):
    """Likelihood ratio of N(mu, 1) against N(0, 1) for an iid sample."""
    x = _sample(sample)
    return _exp(mu * x.sum() - x.size * mu * mu / 2)


def gaussian_two_sided_e(sample, delta):
    """Equal mixture of the N(delta, 1) and N(-delta, 1) likelihood ratios on ``S_n / sqrt(n)``."""
    if not delta > 0:
        raise DomainError("delta must be positive")
    x = _sample(sample)
    z = x.sum() / math.sqrt(x.size)
    return _exp(np.logaddexp(delta * z, -delta * z) - delta * delta / 2 - math.log(2))


def bernoulli_lr_e(sample, p, q):
    """``(q/p)^S (1-q)^(n-S) / (1-p)^(n-S)`` for a 0/1 sample."""
    if not (0 < p < 1 and 0 < q < 1):
        raise DomainError("p and q must lie in (0, 1)")
    x = _sample(sample)
    if np.any((x != 0) & (x != 1)):
        raise DomainError("sample must be binary")
    s, n = x.sum(), x.size
    return _exp(s * math.log(q / p) + (n - s) * math.log((1 - q) / (1 - p)))


def soft_rank_e(scores):
    """``(B+1) R_0 / sum R_b`` where index 0 holds the observed score."""
    r = _sample(scores)
    if np.any(r < 0):
        raise DomainError("scores must be nonnegative")
    total = r.sum()
    if total == 0:
        return 1.0
    return float(r.size * r[0] / total)


def symmetry_e(z, density):
    """``2 q(z) / (q(z) + q(-z))``, taken as 0 when ``q(z) = 0``."""
    qz, qm = float(density(z)), float(density(-z))
    if qz < 0 or qm < 0:
        raise DomainError("density values must be nonnegative")
    if qz == 0:
        return 0.0
    return 2 * qz / (qz + qm)


def mean_variance_e(z, mu, sigma, lam, kind="mean_only"):
    """Convex mixture of 1 with ``z/mu`` or with ``z^2 / (mu^2 + sigma^2)``."""
    if not 0 <= lam <= 1:
        raise DomainError("lam must lie in [0, 1]")
    if kind == "mean_only":
        if mu <= 0:
            raise DomainError("mu must be positive")
        if z < 0:
            raise DomainError("z must be nonnegative for the mean-only statistic")
        return (1 - lam) + lam * z / mu
    if kind == "second_moment":
        if not sigma > 0:
            raise DomainError("sigma must be positive")
        return (1 - lam) + lam * z * z / (mu * mu + sigma * sigma)
    raise DomainError(f"unknown kind {kind!r}")


def subgaussian_e(z, lam, two_sided=False):
    """``exp(lam z - lam^2 / 2)``; negative ``lam`` only in two-sided mode."""
    if not two_sided and lam < 0:
        raise DomainError("lam must be nonnegative for a one-sided test")
    return _exp(lam * z - lam * lam / 2)


def mlr_numeraire_e(z, logratio):
    """Likelihood ratio ``exp(logratio(z))`` for a monotone-likelihood-ratio family."""
    return _exp(float(logratio(z)))


def t_test_e(sample, c=1.0):
    """Scale-invariant mixture e-value for a zero Gaussian mean with unknown variance."""
    if not c > 0:
        raise DomainError("c must be positive")
    x = _sample(sample)
    n = x.size
    s, v = x.sum(), float(np.dot(x, x))
    a = (n + c * c) * v
    denom = a - s * s
    if denom <= 0 or a <= 0:
        if n == 1 and a > 0:
            return 1.0
        raise DegenerateSampleError("degenerate sample: (n + c^2) V - S^2 <= 0")
    log_e = 0.5 * math.log(c * c / (n + c * c)) + (n / 2) * (math.log(a) - math.log(denom))
    return _exp(log_e)


def changepoint_e(sample, logratio):
    """Average over changepoints of the suffix likelihood ratios.

    ``logratio`` maps an array of observations to per-point ``log(q/p)``.
    """
    x = _sample(sample)
    lr = np.asarray(logratio(x), dtype=float)
    suffix = np.cumsum(lr[::-1])  # suffix log-products of length 1..n
    return _exp(np.logaddexp.reduce(suffix) - math.log(x.size))


def clt_asymptotic_e(sample, lam, two_sided=False, denom="root_mean_square"):
    """Asymptotic e-value ``exp(lam sqrt(n) mean / S - lam^2/2)`` for a zero mean."""
    x = _sample(sample)
    n = x.size
    if denom == "root_mean_square":
        scale = math.sqrt(float(np.dot(x, x)) / n)
    elif denom == "sample_sd":
        if n < 2:
            raise DegenerateSampleError("sample_sd needs at least two points")
        scale = float(np.std(x, ddof=1))
    else:
        raise DomainError(f"unknown denominator {denom!r}")
    if scale == 0:
        raise DegenerateSampleError("zero scale estimate")
    z = math.sqrt(n) * x.mean() / scale
    if two_sided:
        return _exp(np.logaddexp(lam * z, -lam * z) - lam * lam / 2 - math.log(2))
    return _exp(lam * z - lam * lam / 2)


def compound_separable_e(x, null_densities, alt_densities):
    """Ratio of the averaged alternative to the averaged null density at ``x``."""
    if len(null_densities) != len(alt_densities):
        raise DomainError("density lists must have equal length")
    p = np.array([float(f(x)) for f in null_densities])
    q = np.array([float(g(x)) for g in alt_densities])
    if np.any(p < 0) or np.any(q < 0):
        raise DomainError("densities must be nonnegative")
    num, den = q.sum(), p.sum()
    if den == 0:
        return 1.0 if num == 0 else math.inf
    return float(num / den)


def compound_t_e(sums_of_squares, variances_hat):
    """``K S_k^2 / sum_j sigma_hat_j^2`` for each group ``k``.

    ``sums_of_squares`` holds the mean squares ``S_k^2`` of each group.
    """
    s2 = np.asarray(sums_of_squares, dtype=float)
    v = np.asarray(variances_hat, dtype=float)
    if s2.shape != v.shape or s2.ndim != 1:
        raise DomainError("need two equal-length 1-d sequences")
    if np.any(v <= 0):
        raise DomainError("variance estimates must be positive")
    return s2.size * s2 / v.sum()


# -- numeraires ----------------------------------------------------------------


@dataclass(frozen=True)
class DiscreteDist:
    points: tuple
    masses: tuple

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        m = np.asarray(self.masses, dtype=float)
        if pts.shape != m.shape or pts.size == 0:
            raise DomainError("need matching non-empty points and masses")
        if np.any(m < 0) or abs(m.sum() - 1) > 1e-12:
            raise DomainError("masses must be nonnegative and sum to 1")
        if np.unique(pts).size != pts.size:
            raise DomainError("points must be distinct")

    def arrays(self):
        return np.asarray(self.points, dtype=float), np.asarray(self.masses, dtype=float)

    def mean(self):
        pts, m = self.arrays()
        return float(np.dot(pts, m))


def lr_bound_numeraire(ratio_law, gamma):
    """Numeraire for the null ``dP/dP0 <= gamma`` against a fixed alternative.

    ``ratio_law`` is the law under ``P0`` of the likelihood ratio ``Z``.
    Returns ``(z0, evaluator)`` with ``evaluator(z) = max(z, z0) / gamma`` and
    ``z0`` the largest constant with ``int_0^{1/gamma} max(q_t, z0) dt = 1``.
    """
    if not gamma >= 1:
        raise DomainError("gamma must be at least 1")
    pts, m = ratio_law.arrays()
    if np.any(pts < 0):
        raise DomainError("likelihood ratios are nonnegative")
    if ratio_law.mean() > 1 + 1e-12:
        raise InfeasibleError("likelihood ratio has mean above 1 under P0")
    # upper quantile q_t on (0, 1/gamma): largest values first
    order = np.argsort(-pts, kind="stable")
    pts, m = pts[order], m[order]
    horizon = 1.0 / gamma
    cum = np.concatenate(([0.0], np.cumsum(m)))
    lengths = np.clip(np.minimum(cum[1:], horizon) - cum[:-1], 0.0, None)
    keep = lengths > 0
    vals, lengths = pts[keep], lengths[keep]

    def g(z):
        return float(np.dot(np.maximum(vals, z), lengths))

    lowest = vals.min()
    if g(lowest) > 1 + 1e-12:
        raise InfeasibleError("no z0 solves the normalising equation")
    # g is linear between sorted values above ``lowest``; walk upwards
    knots = np.unique(vals)
    z0 = None
    for a, b in zip(knots, np.append(knots[1:], np.inf)):
        ga = g(a)
        slope = float(lengths[vals <= a].sum())
        if b == np.inf or g(b) >= 1 - 1e-15:
            z0 = a + (1 - ga) / slope if slope > 0 else a
            break
    z0 = max(0.0, float(z0))
    return z0, (lambda z: np.maximum(np.asarray(z, dtype=float), z0) / gamma)


def bounded_mean_numeraire_lambda(mu, tol=1e-10, max_iter=200):
    """Log-optimal betting fraction against U[0, 1] for the null ``E[Z] <= mu``.

    Solves ``(1 + lam (1 - mu)) / (1 - lam mu) = exp(lam)`` on ``(0, 1/mu)``.
    """
    if not 0 < mu < 0.5:
        raise DomainError("mu must lie in (0, 1/2)")

    def h(lam):
        return math.log1p(lam * (1 - mu)) - math.log1p(-lam * mu) - lam

    lo, hi = 1e-12, 1 / mu - 1e-15
    # h > 0 just right of 0 (slope 1/2 - mu) and h -> inf at 1/mu; the root
    # sits where h comes back through 0, so bracket from the right first
    grid = np.linspace(lo, hi, 2001)
    vals = np.array([h(v) for v in grid])
    neg = np.flatnonzero(vals < 0)
    if neg.size == 0:
        raise InfeasibleError("could not bracket the root")
    a, b = grid[neg[-1]], grid[neg[-1] + 1]
    for _ in range(max_iter):
        mid = 0.5 * (a + b)
        if h(mid) < 0:
            a = mid
        else:
            b = mid
        if b - a < tol:
            break
    root = 0.5 * (a + b)
    if abs(h(root)) > 1e-8:
        raise InfeasibleError("bisection did not converge")
    return root
