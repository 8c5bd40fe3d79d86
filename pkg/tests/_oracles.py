"""Slow, independent reference implementations used only by the tests."""

import itertools
import math

import numpy as np
from scipy import integrate

from evalues.core import harmonic_number


def popcount_table(K):
    masks = np.arange(1 << K)
    return np.array([bin(m).count("1") for m in masks])


def subset_means(es):
    K = len(es)
    means = np.ones(1 << K)
    for mask in range(1, 1 << K):
        idx = [i for i in range(K) if mask >> i & 1]
        means[mask] = np.mean([es[i] for i in idx])
    return means


def closed_ebh_bruteforce(es, alpha, rtol=1e-12):
    """Every candidate R against every intersection A; returns the largest feasible size and all feasible sets of that size."""
    K = len(es)
    means = subset_means(es)
    pop = popcount_table(K)
    masks = np.arange(1 << K)
    best, winners = 0, [frozenset()]
    for size in range(K, 0, -1):
        found = []
        for combo in itertools.combinations(range(K), size):
            r_mask = sum(1 << i for i in combo)
            fdp = pop[masks & r_mask] / size
            if np.all(means * (1 + rtol) >= fdp / alpha):
                found.append(frozenset(combo))
        if found:
            return size, found
    return best, winners


def ebh_scan(es, alpha):
    """e-BH from its definition: largest k with k e_[k] / K >= 1/alpha."""
    K = len(es)
    desc = sorted(es, reverse=True)
    k_star = 0
    for k in range(1, K + 1):
        if k * desc[k - 1] / K >= (1 / alpha) * (1 - 1e-12):
            k_star = k
    order = sorted(range(K), key=lambda i: -es[i])
    return set(order[:k_star])


def bh_scan(ps, alpha):
    K = len(ps)
    asc = sorted(ps)
    k_star = 0
    for k in range(1, K + 1):
        if K * asc[k - 1] / k <= alpha * (1 + 1e-12):
            k_star = k
    order = sorted(range(K), key=lambda i: ps[i])
    return set(order[:k_star])


def fwer_bruteforce(es):
    """Smallest mean over all subsets containing each index."""
    K = len(es)
    out = []
    for k in range(K):
        others = [i for i in range(K) if i != k]
        best = es[k]
        for size in range(1, K):
            for combo in itertools.combinations(others, size):
                best = min(best, (es[k] + sum(es[i] for i in combo)) / (size + 1))
        out.append(best)
    return np.array(out)


def mixture_integral(cal, p):
    """Integral of the mixture calibrator over [0, p] after p = exp(-s) and s = 1/u."""
    start = -math.log(p)

    def in_s(s):
        q = math.exp(-s)
        # once q underflows the integrand has reached its 1/s^2 limit
        return cal(q) * q if q > 1e-300 else 1 / (s * s)

    # beyond s = max(start, 1) the integrand decays like 1/s^2; map it onto u = 1/s
    pivot = max(start, 1.0)
    head, _ = integrate.quad(in_s, start, pivot) if pivot > start else (0.0, 0.0)
    tail, _ = integrate.quad(lambda u: in_s(1 / u) / (u * u) if u > 0 else 1.0, 0, 1 / pivot, limit=500)
    return head + tail


def quad_integral(cal):
    """Independent quadrature oracle for the integral over [0, 1]."""
    if cal.kind == "mixture":
        return mixture_integral(cal, 1.0)
    if cal.kind in ("all_or_nothing", "bhy_truncation"):
        if cal.kind == "all_or_nothing":
            breaks = [cal.alpha]
        else:
            width = cal.alpha / (cal.K * harmonic_number(cal.K))
            breaks = [j * width for j in range(1, cal.K + 1)]
        val, _ = integrate.quad(cal, 0, 1, points=breaks, limit=500)
        return val
    val, _ = integrate.quad(cal, 0, 1, limit=500)
    return val
