"""E-confidence sets, e-BY levels and majority-vote merging of uncertainty sets."""

import math
import warnings

import numpy as np

from .core import Calibrator
from .errors import DomainError, EmptyInputError
from .sets import UncertaintySet


# -- e-CIs ---------------------------------------------------------------------


def eci_from_evaluator(evaluator, grid, alpha):
    """Grid points whose e-value stays below ``1/alpha``.

    ``evaluator(theta, alpha)`` returns the e-value testing ``theta``.
    """
    grid = list(grid)
    if not grid:
        raise EmptyInputError("parameter grid is empty")
    if not 0 < alpha < 1:
        raise DomainError("alpha must lie in (0, 1)")
    kept = [theta for theta in grid if evaluator(theta, alpha) < 1 / alpha]
    return UncertaintySet.from_labels(kept, level=1 - alpha)


def grid_hull(points, grid):
    """``(lo, hi)`` when ``points`` form a contiguous run of ``grid``, else None."""
    grid = np.sort(np.asarray(list(grid), dtype=float))
    pts = np.sort(np.asarray(list(points), dtype=float))
    if pts.size == 0:
        return None
    idx = np.searchsorted(grid, pts)
    if np.all(np.diff(idx) == 1) or pts.size == 1:
        return float(pts[0]), float(pts[-1])
    return None


def eci_calibrate(family, calibrator, alpha):
    """Confidence set ``C(f^{-1}(1/alpha))`` from a nested family ``C``.

    ``family`` is a callable ``level -> set`` or a mapping from a grid of
    levels to sets. With a mapping the largest grid level not above the
    target is used, which can only enlarge the set. If the target lies below
    the grid (or is 0) the grid's largest set is returned with a warning.
    """
    if not 0 < alpha < 1:
        raise DomainError("alpha must lie in (0, 1)")
    cal = calibrator if isinstance(calibrator, Calibrator) else Calibrator(calibrator)
    target = cal.inverse(1 / alpha)
    if callable(family):
        if target <= 0:
            warnings.warn("calibrator never reaches 1/alpha; returning the level-0 set", stacklevel=2)
        return family(target)
    levels = sorted(family)
    usable = [a for a in levels if a <= target + 1e-15]
    if not usable:
        warnings.warn("target level lies below the supplied grid; returning its largest set", stacklevel=2)
        return family[levels[0]]
    return family[usable[-1]]


def eby_levels(selected, K, delta):
    """Per-selection confidence levels ``delta |S| / K``."""
    selected = list(selected)
    if not 0 < delta < 1:
        raise DomainError("delta must lie in (0, 1)")
    if len(selected) > K:
        raise DomainError("cannot select more than K parameters")
    level = delta * len(selected) / K
    return {i: level for i in selected}


# -- majority vote -------------------------------------------------------------


def _kind_of(sets):
    if not sets:
        raise EmptyInputError("need at least one set")
    kinds = {s.kind for s in sets}
    if len(kinds) != 1:
        raise DomainError("cannot mix interval and label sets")
    return kinds.pop()


def _vote(sets, weights, threshold, level=float("nan")):
    """Points whose (weighted) vote is strictly above ``threshold``."""
    kind = _kind_of(sets)
    w = np.asarray(weights, dtype=float)
    if kind == "label_subset":
        labels = set().union(*(s.labels for s in sets))
        kept = [lab for lab in labels if sum(wk for wk, s in zip(w, sets) if lab in s.labels) > threshold]
        return UncertaintySet.from_labels(kept, level)
    lo = np.concatenate([s.intervals[:, 0] for s in sets])
    hi = np.concatenate([s.intervals[:, 1] for s in sets])
    wt = np.concatenate([np.full(s.intervals.shape[0], wk) for wk, s in zip(w, sets)])
    if lo.size == 0:
        return UncertaintySet("interval_union", level=level)
    coords = np.unique(np.concatenate([lo, hi]))
    mids = 0.5 * (coords[:-1] + coords[1:])

    def votes(x):
        inside = (lo[None, :] <= x[:, None]) & (x[:, None] <= hi[None, :])
        return inside @ wt

    at_point = votes(coords) > threshold
    in_gap = votes(mids) > threshold if mids.size else np.zeros(0, dtype=bool)
    pieces = []
    start = None
    for i, c in enumerate(coords):
        if at_point[i] and start is None:
            start = c
        gap_ok = i < in_gap.size and in_gap[i]
        if start is not None and not gap_ok:
            pieces.append((start, c))
            start = None
    return UncertaintySet("interval_union", np.array(pieces).reshape(-1, 2), level=level)


def _uniform(K):
    return np.ones(K)


def coverage_guarantee(K, alpha, tau=0.5):
    """Worst-case coverage of the vote set; odd ``K`` at ``tau = 1/2`` uses ``alpha K / ceil(K/2)``."""
    if tau == 0.5 and K % 2 == 1:
        return 1 - alpha * K / math.ceil(K / 2)
    return 1 - alpha / (1 - tau)


def majority_vote(sets, tau=0.5, alpha=None):
    """Points contained in a fraction strictly greater than ``tau`` of the sets."""
    if not 0 <= tau < 1:
        raise DomainError("tau must lie in [0, 1)")
    K = len(sets)
    level = coverage_guarantee(K, alpha, tau) if alpha is not None else float("nan")
    return _vote(sets, _uniform(K), tau * K, level)


def mv_exchangeable(sets, alpha=None):
    """Intersection of the strict-majority sets of every prefix."""
    if not sets:
        raise EmptyInputError("need at least one set")
    out = None
    for step in running_mv(sets):
        out = step
    if alpha is not None:
        out = UncertaintySet(out.kind, out.intervals, out.labels, level=1 - 2 * alpha)
    return out


def running_mv(sets):
    """Yield the running intersection of prefix majority votes, one set per arrival."""
    current = None
    seen = []
    for s in sets:
        seen.append(s)
        vote = majority_vote(seen, 0.5)
        current = vote if current is None else current.intersect(vote)
        yield current


def mv_permuted(sets, permutation, alpha=None):
    """Exchangeable majority vote after reordering the sets by ``permutation``."""
    perm = list(permutation)
    if sorted(perm) != list(range(len(sets))):
        raise DomainError("permutation must be a bijection of 0..K-1")
    return mv_exchangeable([sets[i] for i in perm], alpha)


def mv_randomized(sets, u, variant="CR", alpha=None):
    """Randomised vote: threshold ``1/2 + u/2`` (CR) or ``u`` (CU) on the vote fraction."""
    if not 0 <= u <= 1:
        raise DomainError("u must lie in [0, 1]")
    K = len(sets)
    if variant == "CR":
        frac, level = 0.5 + u / 2, (1 - 2 * alpha if alpha is not None else float("nan"))
    elif variant == "CU":
        frac, level = u, (1 - alpha if alpha is not None else float("nan"))
    else:
        raise DomainError("variant must be 'CR' or 'CU'")
    return _vote(sets, _uniform(K), frac * K, level)


def mv_weighted(sets, weights, u=0.0, alpha=None):
    """Weighted vote against ``1/2 + u/2``; weights are fixed before seeing the sets."""
    w = np.asarray(weights, dtype=float)
    if w.shape != (len(sets),):
        raise DomainError("need one weight per set")
    if np.any(w < 0) or np.any(w > 1) or abs(w.sum() - 1) > 1e-12:
        raise DomainError("weights must lie in [0, 1] and sum to 1")
    if not 0 <= u <= 1:
        raise DomainError("u must lie in [0, 1]")
    level = 1 - 2 * alpha if alpha is not None else float("nan")
    return _vote(sets, w, 0.5 + u / 2, level)


def median_of_midpoints(sets, rtol=1e-9):
    """Interval centred at the median midpoint (odd K) or the overlap of the two middle ones (even K)."""
    if not sets:
        raise EmptyInputError("need at least one interval")
    ivs = []
    for s in sets:
        if s.kind != "interval_union" or s.intervals.shape[0] != 1:
            raise DomainError("median of midpoints needs single intervals")
        ivs.append(s.intervals[0])
    ivs = np.array(ivs)
    widths = ivs[:, 1] - ivs[:, 0]
    if np.any(np.abs(widths - widths[0]) > rtol * max(abs(widths[0]), 1e-300)):
        raise DomainError("intervals must share a common width")
    half = widths[0] / 2
    mids = np.sort(ivs.mean(axis=1), kind="stable")
    K = mids.size
    if K % 2 == 1:
        c = mids[K // 2]
        return UncertaintySet.interval(c - half, c + half)
    a, b = mids[K // 2 - 1], mids[K // 2]
    lo, hi = b - half, a + half
    if lo > hi:
        return UncertaintySet("interval_union")
    return UncertaintySet.interval(lo, hi)


def mv_size_check(sets, tau=0.5):
    """Sizes of the inputs and of the vote set, with the two size bounds."""
    K = len(sets)
    vote = majority_vote(sets, tau)
    sizes = np.array([s.measure() for s in sets])
    size = vote.measure()
    bound_mean = sizes.sum() / (K * tau) if tau > 0 else math.inf
    report = {
        "size": size,
        "input_sizes": sizes.tolist(),
        "mean_bound": bound_mean,
        "mean_bound_ok": size <= bound_mean + 1e-9,
    }
    if sets[0].kind == "interval_union" and tau >= 0.5 and all(s.intervals.shape[0] == 1 for s in sets):
        report["max_bound"] = float(sizes.max())
        report["max_bound_ok"] = size <= sizes.max() + 1e-9
    return report


# -- median of median of means -------------------------------------------------


def _lower_median(values):
    v = np.sort(np.asarray(values, dtype=float))
    return float(v[math.ceil(v.size / 2) - 1])


def median_of_means(data, B, rng):
    """Median of bucket means after a random split into ``B`` near-equal buckets."""
    x = np.asarray(data, dtype=float)
    if not 1 <= B <= x.size:
        raise DomainError("need 1 <= B <= n")
    perm = rng.permutation(x.size)
    means = [chunk.mean() for chunk in np.array_split(x[perm], B)]
    return _lower_median(means)


def momom(data, B, K, rng):
    """Median over ``K`` independent median-of-means runs, plus the running medians."""
    if K < 1:
        raise DomainError("K must be positive")
    estimates = np.array([median_of_means(data, B, rng) for _ in range(K)])
    trajectory = np.array([_lower_median(estimates[: k + 1]) for k in range(K)])
    return float(trajectory[-1]), trajectory
