"""Rejection thresholds that improve on Markov's ``1/alpha`` under shape constraints.

``r_gamma(kind, gamma)`` is the largest possible ``P(E >= 1/gamma)`` over
e-variables ``E`` in the class; ``t_alpha`` is the smallest threshold whose
worst-case crossing probability is at most ``alpha``.
"""

import math

import numpy as np
from scipy import optimize, stats

from .errors import DomainError, EmptyInputError

SHAPE_CLASSES = ("E0", "D", "D_gt1", "U", "LS", "LU", "LD_gt0", "LD", "LUS", "LN")
# classes whose reported value is an upper bound rather than the exact worst case
BOUNDED_ONLY = ("LD", "LUS")
TABLE_ALPHAS = (0.001, 0.01, 0.02, 0.05, 0.1, 0.2)
TABLE_ROWS = (("E0", "LS"), ("D", "U"), ("D_gt1",), ("LUS", "LD"), ("LD_gt0",), ("LN",))


def _check(kind, gamma):
    if kind not in SHAPE_CLASSES:
        raise DomainError(f"unknown shape class {kind!r}")
    if not 0 < gamma <= 1:
        raise DomainError("gamma must lie in (0, 1]")


def ld_gt0_root(gamma, tol=1e-10):
    """Root ``a`` of ``e^a (1 - a - log gamma) = 1`` on ``(-log gamma, inf)``."""
    if not 0 < gamma < 1:
        raise DomainError("gamma must lie in (0, 1)")
    lg = math.log(gamma)

    def f(a):
        return math.exp(a) * (1 - a - lg) - 1

    lo = -lg
    hi = lo + 1.0
    while f(hi) > 0:
        hi = lo + 2 * (hi - lo)
    return optimize.brentq(f, lo, hi, xtol=tol, rtol=4 * np.finfo(float).eps)


def _ld_gt0(gamma):
    return 1.0 if gamma == 1 else math.exp(-ld_gt0_root(gamma))


def r_gamma_bounds(kind, gamma):
    """``(lower, upper)`` bounds on the worst-case crossing probability; equal when exact."""
    _check(kind, gamma)
    if kind in BOUNDED_ONLY:
        if gamma == 1:
            return 1.0, 1.0
        upper = min(
            gamma / (math.e * (1 - gamma * gamma)),
            gamma / (1 + math.sqrt(1 - gamma * gamma)),
            _ld_gt0(gamma),  # the log-decreasing class sits inside LD_gt0
        )
        return gamma / math.e, upper
    value = r_gamma(kind, gamma)
    return value, value


def r_gamma(kind, gamma):
    """Worst-case ``P(E >= 1/gamma)`` for the class; an upper bound for LD and LUS."""
    _check(kind, gamma)
    if kind in ("E0", "LU"):
        return float(gamma)
    if gamma == 1:
        return 1.0
    if kind == "D":
        return gamma / 2
    if kind == "D_gt1":
        return gamma / (1 + math.sqrt(1 - gamma * gamma))
    if kind == "U":
        return max(gamma / 2, 2 * gamma - 1)
    if kind == "LS":
        return min(gamma, 0.5)
    if kind == "LD_gt0":
        return _ld_gt0(gamma)
    if kind in BOUNDED_ONLY:
        return r_gamma_bounds(kind, gamma)[1]
    # LN
    return float(stats.norm.cdf(-math.sqrt(-2 * math.log(gamma))))


def t_alpha(kind, alpha, tol=1e-12):
    """``inf{t >= 1 : r_gamma(kind, 1/t) <= alpha}``."""
    if kind not in SHAPE_CLASSES:
        raise DomainError(f"unknown shape class {kind!r}")
    if not 0 < alpha < 1:
        raise DomainError("alpha must lie in (0, 1)")
    if kind in ("E0", "LU"):
        return 1 / alpha
    if kind == "LS":
        return 1 / alpha if alpha < 0.5 else 1.0
    if kind == "D":
        return 1 / (2 * alpha) if alpha < 0.5 else 1.0
    if kind == "D_gt1":
        return 1 / (2 * alpha) + alpha / 2
    if kind == "U":
        gamma = min(2 * alpha, (1 + alpha) / 2)
        return 1 / gamma if gamma < 1 else 1.0
    if kind == "LN":
        z = -stats.norm.ppf(alpha)
        return math.exp(z * z / 2) if alpha < 0.5 else 1.0
    # LD_gt0, LD, LUS: r_gamma is continuous and increasing on (0, 1)
    if r_gamma(kind, 1 - 1e-15) <= alpha:
        return 1.0
    gamma = optimize.brentq(lambda g: r_gamma(kind, g) - alpha, 1e-300, 1 - 1e-15, xtol=tol, rtol=1e-14)
    return 1 / gamma


def threshold_table(alphas=TABLE_ALPHAS):
    """Rows ``(label, [t_alpha for each alpha])`` of the improved-threshold table."""
    return [("/".join(row), [t_alpha(row[0], a) for a in alphas]) for row in TABLE_ROWS]


def conditional_e_to_p(kind, e):
    """Smallest calibrator valid for e-values from the class: ``r_gamma(kind, 1/e)``, capped at 1."""
    if math.isnan(e) or e < 0:
        raise DomainError("e-values must be nonnegative")
    if e <= 1:
        return 1.0
    if math.isinf(e):
        return 0.0
    return min(1.0, r_gamma(kind, 1 / e))


def comonotone_sup_test(es, alpha, kind="E0"):
    """Reject when the largest of comonotone e-values reaches ``t_alpha(kind, alpha)``."""
    es = np.asarray(es, dtype=float)
    if es.size == 0:
        raise EmptyInputError("need at least one e-value")
    if np.any(np.isnan(es)) or np.any(es < 0):
        raise DomainError("e-values must be nonnegative")
    return bool(es.max() >= t_alpha(kind, alpha))


def worst_case_search_d(gamma, n_grid=200):
    """Largest ``P(E >= 1/gamma)`` over mass-at-0 plus uniform laws with mean at most 1.

    ``E`` is 0 with probability ``1 - w`` and uniform on ``[0, b]`` otherwise;
    the search runs over a ``n_grid x n_grid`` grid of ``(w, b)`` with
    ``w b / 2 <= 1``. All such laws have decreasing densities.
    """
    if not 0 < gamma < 1:
        raise DomainError("gamma must lie in (0, 1)")
    w = np.linspace(1 / n_grid, 1, n_grid)[:, None]
    b_max = 2 / w
    b = b_max * np.linspace(1 / n_grid, 1, n_grid)[None, :]
    crossing = w * np.clip(1 - 1 / (gamma * b), 0, None)
    return float(crossing.max())
