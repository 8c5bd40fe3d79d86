"""Seeded simulation studies behind ``evalues simulate``.

Each study returns a :class:`StudyTable`. Every random consumer draws from
``derive_rng(seed, label)`` with a fixed label, so adding a study or a row
never changes the numbers of another.
"""

import math
from typing import NamedTuple

import numpy as np
from scipy import stats

from . import confset, multitest, universal
from .eprocess import SprtConfig, sprt_bernoulli_exact, sprt_bernoulli_paths
from .errors import DomainError
from .risk import backtest_path
from .seeding import derive_rng
from .sets import UncertaintySet
from .thresholds import TABLE_ALPHAS, threshold_table


class StudyTable(NamedTuple):
    columns: tuple
    rows: list
    summary: dict


def _se(values):
    v = np.asarray(values, dtype=float)
    return float(v.std(ddof=1) / math.sqrt(v.size)) if v.size > 1 else math.nan


# -- SPRT ----------------------------------------------------------------------

WALD_PS = (0.5, 0.55, 0.6, 0.65)


def wald(seed=1, reps=10_000, alpha=0.05, beta=0.05, p0=0.5, p1=0.6, ps=WALD_PS):
    config = SprtConfig(alpha, beta, "conservative")
    rows = []
    for p in ps:
        rng = derive_rng(seed, f"wald/p={p}")
        decisions, times = sprt_bernoulli_paths(p, p0, p1, config, reps, rng)
        exact_n, exact_power = sprt_bernoulli_exact(p, p0, p1, config)
        reject = (decisions == 1).astype(float)
        rows.append([p, times.mean(), _se(times), reject.mean(), _se(reject), exact_n, exact_power])
    columns = ("p", "expected_n", "se_expected_n", "power", "se_power", "exact_expected_n", "exact_power")
    return StudyTable(columns, rows, {"study": "wald", "reps": reps, "alpha": alpha, "beta": beta})


# -- thresholds ----------------------------------------------------------------


def thresholds(seed=None, reps=None):
    rows = [[label] + values for label, values in threshold_table()]
    columns = ("class",) + tuple(f"alpha={a:g}" for a in TABLE_ALPHAS)
    return StudyTable(columns, rows, {"study": "thresholds"})


# -- e-BH and its randomised variants -------------------------------------------

DEPENDENCE = ("independent", "toeplitz", "negative", "duplicated")


def gaussian_statistics(K, shifts, scenario, rng, rho=0.5):
    """One draw of ``K`` unit-variance Gaussian statistics with mean ``shifts`` and the given dependence."""
    z = rng.standard_normal(K)
    if scenario == "independent":
        x = z
    elif scenario == "toeplitz":
        idx = np.arange(K)
        cov = rho ** np.abs(idx[:, None] - idx[None, :])
        x = np.linalg.cholesky(cov) @ z
    elif scenario == "negative":
        # correlation -1/(K-1), the most negative exchangeable choice
        x = math.sqrt(K / (K - 1)) * (z - z.mean())
    elif scenario == "duplicated":
        x = np.full(K, z[0])
    else:
        raise DomainError(f"unknown dependence scenario {scenario!r}")
    return x + shifts


def gaussian_lr_evalues(x, lam):
    return np.exp(lam * x - lam * lam / 2)


def ebh_trials(seed, reps, K=100, pi0=0.7, mu=3.0, alpha=0.05, scenario="independent", label="ebh"):
    """FDP and power per trial for e-BH, Ge-BH, De-BH and Ue-BH, plus inclusion checks."""
    lam = math.sqrt(2 * math.log(1 / alpha))
    K0 = int(round(pi0 * K))
    shifts = np.concatenate((np.zeros(K0), np.full(K - K0, mu)))
    nulls = set(range(K0))
    names = ("e-BH", "Ge-BH", "De-BH", "Ue-BH")
    fdp = {name: np.empty(reps) for name in names}
    power = {name: np.empty(reps) for name in names}
    violations = 0
    for r in range(reps):
        rng = derive_rng(seed, f"{label}/{scenario}/rep={r}")
        es = gaussian_lr_evalues(gaussian_statistics(K, shifts, scenario, rng), lam)
        us = rng.random(K)
        final_u, single_u = rng.random(), rng.random()
        found = {
            "e-BH": multitest.ebh(es, alpha),
            "Ge-BH": multitest.ge_bh(es, alpha, us),
            "De-BH": multitest.de_bh(es, alpha, us, final_u),
            "Ue-BH": multitest.ue_bh(es, alpha, single_u),
        }
        sets = {k: v.as_set() for k, v in found.items()}
        if not (sets["e-BH"] <= sets["Ge-BH"] <= sets["De-BH"] and sets["e-BH"] <= sets["Ue-BH"]):
            violations += 1
        for name, d in found.items():
            fdp[name][r] = multitest.fdr_fdp_report(d, nulls)[0]
            power[name][r] = len(sets[name] - nulls) / max(K - K0, 1)
    return fdp, power, violations


def ebh_power(seed=1, reps=500, K=100, pi0=0.7, mu=3.0, alpha=0.05):
    fdp, power, violations = ebh_trials(seed, reps, K, pi0, mu, alpha)
    rows = [[name, fdp[name].mean(), _se(fdp[name]), power[name].mean(), _se(power[name])] for name in fdp]
    summary = {
        "study": "ebh_power",
        "reps": reps,
        "K": K,
        "pi0": pi0,
        "mu": mu,
        "alpha": alpha,
        "fdr_bound": pi0 * alpha,
        "inclusion_violations": violations,
    }
    return StudyTable(("procedure", "fdr", "se_fdr", "power", "se_power"), rows, summary)


# -- optimal split fraction ----------------------------------------------------

SPLIT_DS = (1, 2, 4, 8, 16, 32, 64)
SPLIT_ALPHAS = (1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6)


def split_p0(seed=None, reps=0, n=1000):
    """Optimal fraction and radius ratios (equal split against the classical set) on a grid."""
    rows = []
    for d in SPLIT_DS:
        for a in SPLIT_ALPHAS:
            p0 = universal.optimal_split_fraction(d, a)
            classical = universal.classical_squared_radius(n, d, a)
            at_opt = universal.expected_split_squared_radius(n, d, a, p0)
            at_half = universal.expected_split_squared_radius(n, d, a, 0.5)
            rows.append([d, a, p0, at_opt, at_half, classical, at_half / classical])
    columns = ("d", "alpha", "p0_star", "r2_optimal", "r2_equal", "r2_classical", "ratio_equal")
    return StudyTable(columns, rows, {"study": "split_p0", "n": n})


def mixture_power(seed=1, reps=200, n=200, B=25, mus=None, alpha=0.05, weight=0.25):
    """Power of the split (UI), subsampled (SUI) and exchangeable-Markov subsampled (EMI-SUI) tests.

    Data follow ``w N(-mu, 1) + (1 - w) N(mu, 1)``; the null says both means agree.
    The first subsample split is the UI split, so EMI-SUI rejects whenever UI does.
    """
    mus = np.linspace(0, 1, 10) if mus is None else np.asarray(mus, dtype=float)
    rows = []
    for i, mu in enumerate(mus):
        hits = {"UI": 0, "SUI": 0, "EMI-SUI": 0}
        for r in range(reps):
            rng = derive_rng(seed, f"mixture/mu={i}/rep={r}")
            first = rng.random(n) < weight
            x = rng.standard_normal(n) + np.where(first, -mu, mu)
            es = universal.split_evalues(
                x, B, seed, universal.fit_two_means_mixture, universal.fit_gaussian_mean, label=f"mixture/{i}/{r}"
            )
            hits["UI"] += es[0] >= 1 / alpha
            hits["SUI"] += es.mean() >= 1 / alpha
            hits["EMI-SUI"] += universal.subsampled_lrt_sequential_test(es, alpha)[0]
        rows.append([float(mu)] + [hits[k] / reps for k in ("UI", "SUI", "EMI-SUI")])
    summary = {"study": "mixture_power", "reps": reps, "n": n, "B": B, "alpha": alpha}
    return StudyTable(("mu", "power_ui", "power_sui", "power_emi_sui"), rows, summary)


# -- majority vote coverage ----------------------------------------------------

MV_WEIGHTS = (0.4, 0.3, 0.15, 0.1, 0.05)
MV_ALPHAS = (0.05, 0.1, 0.15, 0.2, 0.1)


def _intervals(centres, halfwidths):
    return [UncertaintySet.interval(c - h, c + h) for c, h in zip(centres, halfwidths)]


def mv_coverage(seed=1, reps=10_000, K=5, alpha=0.1, rho=0.5):
    """Coverage of the vote sets built from ``K`` equicorrelated Gaussian intervals around 0."""
    half = stats.norm.ppf(1 - alpha / 2)
    het_half = stats.norm.ppf(1 - np.asarray(MV_ALPHAS) / 2)
    w = np.asarray(MV_WEIGHTS)
    methods = ("single", "M", "U", "R", "E", "pi", "W", "median")
    covered = {m: np.zeros(reps) for m in methods}
    size = {m: np.zeros(reps) for m in methods}
    violations = 0
    for r in range(reps):
        rng = derive_rng(seed, f"mv/rep={r}")
        common = rng.standard_normal()
        x = math.sqrt(rho) * common + math.sqrt(1 - rho) * rng.standard_normal(K)
        u = rng.random()
        perm = rng.permutation(K)
        sets = _intervals(x, np.full(K, half))
        het = _intervals(x, het_half)
        out = {
            "single": sets[0],
            "M": confset.majority_vote(sets),
            "U": confset.mv_randomized(sets, u, "CU"),
            "R": confset.mv_randomized(sets, u, "CR"),
            "E": confset.mv_exchangeable(sets),
            "pi": confset.mv_permuted(sets, perm),
            "W": confset.mv_weighted(het, w, u),
            "median": confset.median_of_midpoints(sets),
        }
        for m, s in out.items():
            covered[m][r] = s.contains(0.0)
            size[m][r] = s.measure()
        lattice = (
            out["R"].issubset(out["M"])
            and out["R"].issubset(out["U"])
            and out["E"].issubset(out["M"])
            and out["pi"].issubset(out["M"])
            and out["M"].issubset(out["median"])
        )
        violations += not lattice
    bounds = {
        "single": 1 - alpha,
        "M": 1 - 2 * alpha,
        "U": 1 - alpha,
        "R": 1 - 2 * alpha,
        "E": 1 - 2 * alpha,
        "pi": 1 - 2 * alpha,
        "W": 1 - 2 * float(np.dot(w, MV_ALPHAS)),
        "median": 1 - 2 * alpha,
    }
    rows = [[m, covered[m].mean(), _se(covered[m]), bounds[m], size[m].mean()] for m in methods]
    summary = {"study": "mv_coverage", "reps": reps, "K": K, "alpha": alpha, "rho": rho, "lattice_violations": violations}
    return StudyTable(("method", "coverage", "se", "guarantee", "mean_size"), rows, summary)


# -- MoMoM ---------------------------------------------------------------------


def momom(seed=1, reps=1000, n=210, B=21, K=70, df=3, ts=(1, 2, 3)):
    """Deviation-bound frequencies and stability of the running MoMoM on Student-t data."""
    sigma = math.sqrt(df / (df - 2))
    radius = {t: math.sqrt(math.pi) * sigma * math.sqrt(t / n) for t in ts}
    within = {t: np.zeros(reps) for t in ts}
    steps = np.zeros(K - 1)
    for r in range(reps):
        rng = derive_rng(seed, f"momom/rep={r}")
        x = rng.standard_t(df, n)
        _, traj = confset.momom(x, B, K, rng)
        worst = np.max(np.abs(traj))
        for t in ts:
            within[t][r] = worst < radius[t]
        steps += np.abs(np.diff(traj))
    steps /= reps
    rows = [[t, radius[t], within[t].mean(), _se(within[t]), 1 - 4 * math.exp(-t)] for t in ts]
    summary = {
        "study": "momom",
        "reps": reps,
        "n": n,
        "B": B,
        "K": K,
        "mean_abs_step_after_40": float(steps[39:].mean()),
        "mean_abs_step_first_10": float(steps[:10].mean()),
    }
    return StudyTable(("t", "radius", "frequency", "se", "guarantee"), rows, summary)


# -- backtest ------------------------------------------------------------------


def gaussian_es_var(beta):
    z = float(stats.norm.ppf(beta))
    return float(stats.norm.pdf(z) / (1 - beta)), z


def es_var_evalues(x, r, z, beta):
    """Vectorised ES/VaR backtest statistic for ``r > z``."""
    return np.clip(x - z, 0, None) / ((1 - beta) * (r - z))


def backtest(seed=1, reps=1000, beta=0.975, alpha=0.05, null_length=500, alt_length=2000, under=0.1, gamma=0.5):
    """Crossing frequencies of the adaptive ES backtest for truthful and under-stated forecasts."""
    r_true, z_true = gaussian_es_var(beta)
    cut = math.log(1 / alpha)
    rows = []
    for name, r, length in (("truthful", r_true, null_length), ("under", (1 - under) * r_true, alt_length)):
        rejected = np.zeros(reps)
        final = np.zeros(reps)
        for i in range(reps):
            rng = derive_rng(seed, f"backtest/{name}/rep={i}")
            x = rng.standard_normal(length)
            lw = backtest_path(es_var_evalues(x, r, z_true, beta), gamma)
            rejected[i] = lw.max() >= cut
            final[i] = lw[-1]
        rows.append([name, r, z_true, length, rejected.mean(), _se(rejected), float(np.median(final))])
    columns = ("forecast", "r", "z", "length", "rejection_rate", "se", "median_log_wealth")
    return StudyTable(columns, rows, {"study": "backtest", "reps": reps, "beta": beta, "alpha": alpha})


STUDIES = {
    "wald": wald,
    "thresholds": thresholds,
    "ebh_power": ebh_power,
    "split_p0": split_p0,
    "mv_coverage": mv_coverage,
    "momom": momom,
    "backtest": backtest,
}
