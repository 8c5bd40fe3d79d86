"""Hot loops, compiled with numba when available.

Set ``EVALUES_DISABLE_NUMBA=1`` to force the pure-numpy/python versions.
Both backends consume the same inputs (all randomness is drawn outside
the kernels), so results agree to floating-point rounding.
"""

import math
import os

import numpy as np

_DISABLED = os.environ.get("EVALUES_DISABLE_NUMBA", "").strip().lower() in {"1", "true", "yes"}

try:
    if _DISABLED:
        raise ImportError
    from numba import njit

    NUMBA_ENABLED = True
except ImportError:  # pragma: no cover - exercised through the env flag
    NUMBA_ENABLED = False

    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]

        def wrap(fn):
            return fn

        return wrap


def backend():
    return "numba" if NUMBA_ENABLED else "numpy"


# ---------------------------------------------------------------------------
# first exit of a random walk from (lo, hi)


@njit(cache=True)
def _first_exit_loop(increments, start, lo, hi):
    n_paths, n_steps = increments.shape
    exit_step = np.full(n_paths, -1, dtype=np.int64)
    final = start.copy()
    for i in range(n_paths):
        s = start[i]
        for j in range(n_steps):
            s += increments[i, j]
            if s >= hi or s <= lo:
                exit_step[i] = j
                break
        final[i] = s
    return exit_step, final


def _first_exit_numpy(increments, start, lo, hi):
    path = start[:, None] + np.cumsum(increments, axis=1)
    crossed = (path >= hi) | (path <= lo)
    hit = crossed.any(axis=1)
    first = np.argmax(crossed, axis=1)
    exit_step = np.where(hit, first, -1).astype(np.int64)
    final = np.where(hit, path[np.arange(len(start)), first], path[:, -1])
    return exit_step, final


def first_exit(increments, start, lo, hi):
    """Index of the first step at which ``start + cumsum`` leaves ``(lo, hi)``.

    Returns ``(exit_step, final)`` where ``exit_step`` is -1 for paths that
    stay inside the band and ``final`` is the walk value at exit (or at the
    end of the block).
    """
    increments = np.ascontiguousarray(increments, dtype=np.float64)
    start = np.ascontiguousarray(start, dtype=np.float64)
    if NUMBA_ENABLED:
        return _first_exit_loop(increments, start, float(lo), float(hi))
    return _first_exit_numpy(increments, start, float(lo), float(hi))


# ---------------------------------------------------------------------------
# empirically adaptive betting fraction


@njit(cache=True, error_model="numpy")
def _bet_fraction(values, counts, gamma, tol):
    # derivative of sum c_i log(1 - lam + lam v_i) is decreasing in lam
    total = 0.0
    mean = 0.0
    for i in range(values.shape[0]):
        if counts[i] > 0.0 and values[i] == np.inf:
            return gamma
        total += counts[i]
        mean += counts[i] * values[i]
    if total == 0.0 or mean <= total:
        return 0.0

    def deriv(lam):
        g = 0.0
        h = 0.0
        for i in range(values.shape[0]):
            if counts[i] == 0.0:
                continue
            d = values[i] - 1.0
            den = 1.0 + lam * d
            if den <= 0.0:
                return -np.inf, -np.inf
            g += counts[i] * d / den
            h -= counts[i] * d * d / (den * den)
        return g, h

    g_hi, _ = deriv(gamma)
    if g_hi >= 0.0:
        return gamma
    lo = 0.0
    hi = gamma
    lam = 0.5 * gamma
    for _ in range(200):
        g, h = deriv(lam)
        if g > 0.0:
            lo = lam
        else:
            hi = lam
        new = 0.5 * (lo + hi)
        if h < 0.0 and np.isfinite(g):
            cand = lam - g / h
            if lo < cand < hi:
                new = cand
        if abs(new - lam) < tol or hi - lo < tol:
            lam = new
            break
        lam = new
    return lam


@njit(cache=True, error_model="numpy")
def _adaptive_path_loop(codes, uniques, gamma, tol):
    n = codes.shape[0]
    counts = np.zeros(uniques.shape[0])
    lambdas = np.zeros(n)
    log_wealth = np.zeros(n)
    lw = 0.0
    for t in range(n):
        lam = _bet_fraction(uniques, counts, gamma, tol) if t > 0 else 0.0
        lambdas[t] = lam
        factor = 1.0 - lam + lam * uniques[codes[t]] if lam > 0.0 else 1.0
        if factor <= 0.0:
            lw = -np.inf
        elif lw != -np.inf:
            lw += math.log(factor)
        log_wealth[t] = lw
        counts[codes[t]] += 1.0
    return lambdas, log_wealth


def _bet_fraction_numpy(values, counts, gamma, tol):
    values = np.asarray(values, dtype=float)
    counts = np.asarray(counts, dtype=float)
    keep = counts > 0
    values, counts = values[keep], counts[keep]
    total = counts.sum()
    if np.isinf(values).any():
        return float(gamma)
    if total == 0 or np.dot(counts, values) <= total:
        return 0.0
    d = values - 1.0

    def deriv(lam):
        den = 1.0 + lam * d
        if np.any(den <= 0):
            return -np.inf, -np.inf
        return float(np.dot(counts, d / den)), float(-np.dot(counts, d * d / den**2))

    if deriv(gamma)[0] >= 0:
        return float(gamma)
    lo, hi, lam = 0.0, float(gamma), 0.5 * gamma
    for _ in range(200):
        g, h = deriv(lam)
        if g > 0:
            lo = lam
        else:
            hi = lam
        cand = lam - g / h if (h < 0 and np.isfinite(g)) else np.nan
        new = cand if lo < cand < hi else 0.5 * (lo + hi)
        if abs(new - lam) < tol or hi - lo < tol:
            lam = new
            break
        lam = new
    return lam


def _adaptive_path_numpy(codes, uniques, gamma, tol):
    n = len(codes)
    counts = np.zeros(len(uniques))
    lambdas = np.zeros(n)
    log_wealth = np.zeros(n)
    lw = 0.0
    for t in range(n):
        lam = _bet_fraction_numpy(uniques, counts, gamma, tol) if t > 0 else 0.0
        lambdas[t] = lam
        factor = 1.0 - lam + lam * uniques[codes[t]] if lam > 0 else 1.0
        if factor <= 0:
            lw = -np.inf
        elif lw != -np.inf:
            lw += math.log(factor)
        log_wealth[t] = lw
        counts[codes[t]] += 1.0
    return lambdas, log_wealth


def bet_fraction(values, counts, gamma, tol=1e-10):
    """Maximiser over ``[0, gamma]`` of ``sum counts * log(1 - lam + lam * values)``."""
    values = np.ascontiguousarray(values, dtype=np.float64)
    counts = np.ascontiguousarray(counts, dtype=np.float64)
    if NUMBA_ENABLED:
        return float(_bet_fraction(values, counts, float(gamma), float(tol)))
    return _bet_fraction_numpy(values, counts, gamma, tol)


def adaptive_path(es, gamma, tol=1e-10):
    """Run the empirically adaptive bettor along ``es``.

    Repeated values are pooled into counts, so a stream drawn from a small
    support costs O(support) per step instead of O(t).
    """
    es = np.asarray(es, dtype=np.float64)
    uniques, codes = np.unique(es, return_inverse=True)
    codes = np.ascontiguousarray(codes.ravel(), dtype=np.int64)
    if NUMBA_ENABLED:
        return _adaptive_path_loop(codes, uniques, float(gamma), float(tol))
    return _adaptive_path_numpy(codes, uniques, gamma, tol)


# ---------------------------------------------------------------------------
# closed e-BH with the mean e-collection


@njit(cache=True)
def _closed_mean_loop(desc, alpha):
    # desc: e-values sorted in decreasing order
    K = desc.shape[0]
    asc = desc[::-1].copy()
    best = 0
    for k in range(1, K + 1):
        # rejected block desc[:k]; its m smallest are desc[k-m:k]
        # non-rejected block desc[k:]; its j smallest are asc[:j]
        ok = True
        s_m = 0.0
        for m in range(1, k + 1):
            s_m += desc[k - m]
            need = m / (alpha * k)
            t_j = 0.0
            # j = 0 .. K-k, mixing in the smallest non-rejected values
            if s_m < need * m:
                ok = False
                break
            for j in range(1, K - k + 1):
                t_j += asc[j - 1]
                if s_m + t_j < need * (m + j):
                    ok = False
                    break
            if not ok:
                break
        if ok:
            best = k
    return best


def _closed_mean_numpy(desc, alpha):
    K = len(desc)
    asc = desc[::-1]
    t_pref = np.concatenate(([0.0], np.cumsum(asc)))
    best = 0
    for k in range(1, K + 1):
        s_pref = np.cumsum(desc[:k][::-1])  # m smallest rejected, m = 1..k
        m = np.arange(1, k + 1)[:, None]
        j = np.arange(0, K - k + 1)[None, :]
        lhs = s_pref[:, None] + t_pref[: K - k + 1][None, :]
        rhs = m / (alpha * k) * (m + j)
        if np.all(lhs >= rhs):
            best = k
    return best


def closed_mean_scan(desc, alpha):
    """Largest prefix size of the descending e-order accepted by the closure test."""
    desc = np.ascontiguousarray(desc, dtype=np.float64)
    if NUMBA_ENABLED:
        return int(_closed_mean_loop(desc, float(alpha)))
    return _closed_mean_numpy(desc, float(alpha))


# ---------------------------------------------------------------------------
# EM for a two-component unit-variance location mixture with known weights


@njit(cache=True)
def _em_two_means_loop(x, w1, inits, n_iter, tol):
    n = x.shape[0]
    w2 = 1.0 - w1
    shift = math.log(w2) - math.log(w1)
    best_ll = -np.inf
    best1 = 0.0
    best2 = 0.0
    for r in range(inits.shape[0]):
        m1 = inits[r, 0]
        m2 = inits[r, 1]
        for _ in range(n_iter):
            # log odds of component 2 against 1 is linear in x
            slope = m2 - m1
            icpt = shift - 0.5 * (m2 * m2 - m1 * m1)
            s1 = 0.0
            s2 = 0.0
            c1 = 0.0
            c2 = 0.0
            for i in range(n):
                r1 = 1.0 / (1.0 + math.exp(icpt + slope * x[i]))
                c1 += r1
                c2 += 1.0 - r1
                s1 += r1 * x[i]
                s2 += (1.0 - r1) * x[i]
            n1 = s1 / c1 if c1 > 0 else m1
            n2 = s2 / c2 if c2 > 0 else m2
            delta = abs(n1 - m1) + abs(n2 - m2)
            m1 = n1
            m2 = n2
            if delta < tol:
                break
        ll = 0.0
        for i in range(n):
            a = math.log(w1) - 0.5 * (x[i] - m1) ** 2
            b = math.log(w2) - 0.5 * (x[i] - m2) ** 2
            mx = a if a > b else b
            ll += mx + math.log(math.exp(a - mx) + math.exp(b - mx))
        if ll > best_ll:
            best_ll = ll
            best1 = m1
            best2 = m2
    return best1, best2


def _em_two_means_numpy(x, w1, inits, n_iter, tol):
    lw1, lw2 = math.log(w1), math.log(1.0 - w1)
    best = (-np.inf, 0.0, 0.0)
    for m1, m2 in inits:
        for _ in range(n_iter):
            with np.errstate(over="ignore"):
                r1 = 1.0 / (1.0 + np.exp(lw2 - lw1 - 0.5 * (m2 * m2 - m1 * m1) + (m2 - m1) * x))
            c1, c2 = r1.sum(), (1 - r1).sum()
            n1 = (r1 * x).sum() / c1 if c1 > 0 else m1
            n2 = ((1 - r1) * x).sum() / c2 if c2 > 0 else m2
            delta = abs(n1 - m1) + abs(n2 - m2)
            m1, m2 = n1, n2
            if delta < tol:
                break
        a = lw1 - 0.5 * (x - m1) ** 2
        b = lw2 - 0.5 * (x - m2) ** 2
        ll = float(np.logaddexp(a, b).sum())
        if ll > best[0]:
            best = (ll, m1, m2)
    return best[1], best[2]


def em_two_means(x, w1, inits, n_iter=200, tol=1e-10):
    """Best-of-restarts EM estimate of the two component means."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    inits = np.ascontiguousarray(inits, dtype=np.float64).reshape(-1, 2)
    if NUMBA_ENABLED:
        m1, m2 = _em_two_means_loop(x, float(w1), inits, int(n_iter), float(tol))
        return float(m1), float(m2)
    return _em_two_means_numpy(x, float(w1), inits, int(n_iter), float(tol))
