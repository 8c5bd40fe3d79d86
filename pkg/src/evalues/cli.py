"""Command-line interface: ``evalues <subcommand>``.

Exit codes: 0 success, 2 usage or domain error, 3 infeasible or degenerate
computation. CSV inputs need a header row; floats are written with 17
significant digits. JSON outputs carry a ``schema_version`` field.
"""

import csv
import functools
import io
import json
import math
import sys

import click
import numpy as np

from . import confset, core, eprocess, merging, multitest, risk, studies, thresholds, universal
from .errors import DegenerateSampleError, DomainError, EmptyInputError, InfeasibleError
from .seeding import derive_rng
from .sets import UncertaintySet

SCHEMA_VERSION = 1


class InputError(click.ClickException):
    exit_code = 2


def _fmt(value):
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return "%.17g" % value
    return str(value)


def _jsonable(value):
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_jsonable(v) for v in value.tolist()]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        v = float(value)
        if math.isnan(v):
            return None
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    return value


def _emit_json(payload, output=None):
    body = {"schema_version": SCHEMA_VERSION, **_jsonable(payload)}
    text = json.dumps(body, sort_keys=True, indent=2) + "\n"
    _write(text, output)


def _emit_csv(columns, rows, output=None):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    _write(buf.getvalue(), output)


def _write(text, output):
    if output:
        with open(output, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        click.echo(text, nl=False)


def read_table(path):
    """Header plus numeric columns of a CSV file; bad rows are reported with their line number."""
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}")
    with fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise InputError(f"{path}: missing header row")
        rows = []
        for line_no, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise InputError(f"{path}: line {line_no}: expected {len(header)} fields, got {len(row)}")
            try:
                rows.append([float(c) for c in row])
            except ValueError:
                raise InputError(f"{path}: line {line_no}: non-numeric value")
    data = np.array(rows, dtype=float).reshape(-1, len(header))
    return {name: data[:, i] for i, name in enumerate(header)}


def _column(table, *names):
    for name in names:
        if name in table:
            return table[name]
    if len(table) == 1:
        return next(iter(table.values()))
    raise InputError(f"input needs a column named {names[0]!r}")


def handle_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (DomainError, EmptyInputError) as exc:
            click.echo(f"Error: {exc}", err=True)
            sys.exit(2)
        except (InfeasibleError, DegenerateSampleError) as exc:
            click.echo(f"Error: {exc}", err=True)
            sys.exit(3)

    return wrapper


def common(fn):
    fn = click.option("--json", "as_json", is_flag=True, help="Emit JSON instead of CSV or plain text.")(fn)
    fn = click.option("--output", type=click.Path(dir_okay=False), default=None, help="Write to this file.")(fn)
    return handle_errors(fn)


@click.group()
def main():
    """E-value toolkit: calibration, merging, e-processes, multiple testing and backtests."""


# -- single values -------------------------------------------------------------


def _calibrator(kind, param, K=None):
    if kind == "power":
        return core.Calibrator("power", kappa=0.5 if param is None else param)
    if kind == "all_or_nothing":
        return core.Calibrator("all_or_nothing", alpha=0.05 if param is None else param)
    if kind == "bhy_truncation":
        return core.Calibrator("bhy_truncation", alpha=0.05 if param is None else param, K=K or 1)
    return core.Calibrator(kind)


@main.command()
@click.option("--p", "p", type=float, required=True)
@click.option("--kind", type=click.Choice(core.CALIBRATOR_KINDS), required=True)
@click.option("--param", type=float, default=None, help="kappa for power; alpha for all_or_nothing and bhy_truncation.")
@click.option("--K", "K", type=int, default=None, help="Number of hypotheses for bhy_truncation.")
@common
def calibrate(p, kind, param, K, output, as_json):
    """Convert a p-value into an e-value."""
    e = core.calibrate_p_to_e(p, _calibrator(kind, param, K))
    if as_json:
        _emit_json({"p": p, "kind": kind, "e": e}, output)
    else:
        _write(_fmt(float(e)) + "\n", output)


@main.command()
@click.option("--e", "e", type=float, required=True)
@common
def etop(e, output, as_json):
    """Convert an e-value into a p-value, ``min(1, 1/e)``."""
    p = core.calibrate_e_to_p(e)
    if as_json:
        _emit_json({"e": e, "p": p}, output)
    else:
        _write(_fmt(p) + "\n", output)


@main.command("merge-e")
@click.option("--input", "input_path", type=click.Path(), required=True, help="CSV with an 'e' column.")
@click.option("--rule", type=click.Choice(merging.E_RULES), default="mean")
@click.option("--n", type=int, default=None, help="Subset size for ustat.")
@click.option("--gamma", type=float, default=1.0, help="Cap on betting fractions.")
@click.option("--alpha", type=float, default=None)
@click.option("--lam", type=float, default=None, help="Constant betting fraction for the martingale rule.")
@common
def merge_e(input_path, rule, n, gamma, alpha, lam, output, as_json):
    """Merge e-values."""
    table = read_table(input_path)
    es = _column(table, "e")
    weights = table.get("w")
    if rule == "weighted_mean":
        if weights is None:
            raise InputError("weighted_mean needs a 'w' column; the first row weighs the constant 1")
        weights = np.concatenate((weights, [0.0]))[: es.size + 1] if weights.size == es.size else weights
    strategy = None if lam is None else np.full(es.size, lam)
    value = merging.merge_e(es, rule, weights=weights, n=n, strategy=strategy, gamma=gamma, alpha=alpha)
    if as_json:
        _emit_json({"rule": rule, "K": es.size, "e": value}, output)
    else:
        _write(_fmt(value) + "\n", output)


@main.command("merge-p")
@click.option("--input", "input_path", type=click.Path(), required=True, help="CSV with a 'p' column.")
@click.option("--rule", type=click.Choice(merging.P_RULES + ("exchangeable",)), default="twice_mean")
@click.option("--k", type=int, default=None)
@click.option("--calibrator", type=click.Choice(core.CALIBRATOR_KINDS), default=None)
@click.option("--assume-prds", is_flag=True)
@click.option("--randomized", is_flag=True, help="Use the randomised rule with a uniform drawn from --seed.")
@click.option("--seed", type=int, default=0)
@common
def merge_p(input_path, rule, k, calibrator, assume_prds, randomized, seed, output, as_json):
    """Merge p-values under arbitrary dependence."""
    ps = _column(read_table(input_path), "p")
    u = None
    if rule == "exchangeable":
        value = merging.merge_p_exchangeable(ps, calibrator or "sqrtinv")
    elif randomized:
        u = float(derive_rng(seed, "merge-p/u").random())
        value = merging.merge_p_randomized(ps, rule, u, k=k, calibrator=calibrator)
    else:
        value = merging.merge_p(ps, rule, k=k, calibrator=calibrator, assume_prds=assume_prds)
    if as_json:
        _emit_json({"rule": rule, "K": ps.size, "p": value, "u": u}, output)
    else:
        _write(_fmt(value) + "\n", output)


@main.command("combine-pe")
@click.option("--p", "p", type=float, required=True)
@click.option("--e", "e", type=float, required=True)
@click.option("--mode", type=click.Choice(("ie", "ip", "e_mix", "p_min")), default="ip")
@click.option("--lam", type=float, default=0.5)
@click.option("--calibrator", type=click.Choice(core.CALIBRATOR_KINDS), default="sqrtinv")
@common
def combine_pe(p, e, mode, lam, calibrator, output, as_json):
    """Combine a p-value with an e-value."""
    value = merging.combine_pe(p, e, mode, lam=lam, calibrator=calibrator)
    if as_json:
        _emit_json({"mode": mode, "value": value}, output)
    else:
        _write(_fmt(value) + "\n", output)


# -- sequential ----------------------------------------------------------------


@main.command("eprocess")
@click.option("--input", "input_path", type=click.Path(), required=True, help="CSV with an 'e' column in arrival order.")
@click.option("--gamma", type=float, default=0.5)
@click.option("--alpha", type=float, default=0.05)
@common
def eprocess_cmd(input_path, gamma, alpha, output, as_json):
    """Empirically adaptive betting e-process over a stream of e-values."""
    es = _column(read_table(input_path), "e")
    lambdas, log_wealth = eprocess.adaptive_wealth_path(es, gamma)
    hits = np.flatnonzero(log_wealth >= math.log(1 / alpha) - 1e-12)
    stop = int(hits[0]) + 1 if hits.size else None
    if as_json:
        _emit_json(
            {"n": es.size, "final_wealth": float(np.exp(log_wealth[-1])), "rejected": stop is not None, "stop": stop},
            output,
        )
    else:
        rows = [[t + 1, lambdas[t], log_wealth[t], np.exp(log_wealth[t])] for t in range(es.size)]
        _emit_csv(("t", "lambda", "log_wealth", "wealth"), rows, output)


@main.command()
@click.option("--input", "input_path", type=click.Path(), required=True, help="CSV with an 'x' column of 0/1 outcomes.")
@click.option("--p0", type=float, default=0.5)
@click.option("--p1", type=float, default=0.6)
@click.option("--alpha", type=float, default=0.05)
@click.option("--beta", type=float, default=0.05)
@click.option("--mode", type=click.Choice(("conservative", "classical")), default="conservative")
@common
def sprt(input_path, p0, p1, alpha, beta, mode, output, as_json):
    """Sequential probability ratio test on Bernoulli outcomes."""
    x = _column(read_table(input_path), "x")
    if np.any((x != 0) & (x != 1)):
        raise DomainError("outcomes must be 0 or 1")
    up, down = eprocess.bernoulli_llr(p0, p1)
    result = eprocess.sprt(np.where(x == 1, up, down), eprocess.SprtConfig(alpha, beta, mode))
    payload = {"decision": result.decision, "stopping_time": result.stopping_time}
    if as_json:
        _emit_json(payload, output)
    else:
        _emit_csv(("decision", "stopping_time"), [[result.decision, result.stopping_time]], output)


# -- universal inference ---------------------------------------------------------

_FITTERS = {
    "gaussian_mean": universal.fit_gaussian_mean,
    "gaussian_mean_var": universal.fit_gaussian_mean_var,
    "bernoulli": universal.fit_bernoulli,
    "mixture": universal.fit_two_means_mixture,
}


@main.command()
@click.option("--input", "input_path", type=click.Path(), required=True, help="CSV with an 'x' column.")
@click.option("--null", "null_model", type=click.Choice(("gaussian_mean", "bernoulli")), default="gaussian_mean")
@click.option("--alternative", type=click.Choice(tuple(_FITTERS)), default="mixture")
@click.option("--B", "B", type=int, default=1, help="Number of random splits.")
@click.option("--fraction", type=float, default=0.5)
@click.option("--seed", type=int, default=0)
@click.option("--alpha", type=float, default=0.05)
@common
def ui(input_path, null_model, alternative, B, fraction, seed, alpha, output, as_json):
    """Split and subsampled likelihood-ratio e-values."""
    x = _column(read_table(input_path), "x")
    es = universal.split_evalues(x, B, seed, _FITTERS[alternative], _FITTERS[null_model], fraction)
    rejected, stop = universal.subsampled_lrt_sequential_test(es, alpha)
    payload = {
        "split_e": es[0],
        "subsampled_e": float(es.mean()),
        "B": B,
        "markov_reject": bool(es.mean() >= 1 / alpha),
        "exchangeable_reject": rejected,
        "exchangeable_stop": stop,
    }
    if as_json:
        _emit_json(payload, output)
    else:
        _emit_csv(("split", "e"), [[b + 1, e] for b, e in enumerate(es)], output)


# -- multiple testing ------------------------------------------------------------

EBH_VARIANTS = ("plain", "boosted", "minadapt", "ge", "de", "ue", "closed", "bhy", "epbh")


@main.command()
@click.option("--input", "input_path", type=click.Path(), required=True, help="CSV with an 'e' column (or 'p').")
@click.option("--alpha", type=float, default=0.05)
@click.option("--variant", type=click.Choice(EBH_VARIANTS), default="plain")
@click.option("--boost", type=float, default=1.0, help="Certified boost factor applied to every e-value.")
@click.option("--seed", type=int, default=0, help="Root seed for the uniforms of ge, de and ue.")
@common
def ebh(input_path, alpha, variant, boost, seed, output, as_json):
    """e-BH and its variants; prints the discovery set as JSON."""
    table = read_table(input_path)
    if variant == "bhy":
        found = multitest.bhy(_column(table, "p"), alpha)
    elif variant == "epbh":
        found = multitest.ep_bh(table["p"] if "p" in table else _column(table, "p"), _column(table, "e"), alpha)
    else:
        es = _column(table, "e")
        K = es.size
        if variant == "plain":
            found = multitest.ebh(es, alpha)
        elif variant == "boosted":
            found = multitest.boosted_ebh(es, boost, alpha)
        elif variant == "minadapt":
            found = multitest.ebh_minimally_adaptive(es, alpha)
        elif variant == "closed":
            found = multitest.closed_ebh(es, alpha)
        elif variant == "ge":
            found = multitest.ge_bh(es, alpha, derive_rng(seed, "ebh/ge").random(K))
        elif variant == "de":
            rng = derive_rng(seed, "ebh/de")
            found = multitest.de_bh(es, alpha, rng.random(K), rng.random())
        else:
            found = multitest.ue_bh(es, alpha, float(derive_rng(seed, "ebh/ue").random()))
    _emit_json(found.to_json(), output)


@main.command()
@click.option("--input", "input_path", type=click.Path(), required=True, help="CSV with an 'e' column.")
@click.option("--alpha", type=float, default=0.05)
@common
def fwer(input_path, alpha, output, as_json):
    """FWER-adjusted e-values and the hypotheses they reject."""
    es = _column(read_table(input_path), "e")
    adjusted = multitest.fwer_adjust(es)
    found = multitest.fwer_reject(es, alpha)
    if as_json:
        _emit_json({"adjusted": adjusted, **found.to_json()}, output)
    else:
        rows = [[i, es[i], adjusted[i], i in found] for i in range(es.size)]
        _emit_csv(("index", "e", "adjusted", "rejected"), rows, output)


# -- confidence sets -------------------------------------------------------------


@main.command()
@click.option("--input", "input_path", type=click.Path(), required=True, help="CSV with an 'x' column, N(theta, 1) data.")
@click.option("--alpha", type=float, default=0.05)
@click.option("--tau", type=float, default=1.0, help="Prior scale of the Gaussian mixture e-value.")
@click.option("--lo", type=float, default=-5.0)
@click.option("--hi", type=float, default=5.0)
@click.option("--points", type=int, default=1001)
@common
def eci(input_path, alpha, tau, lo, hi, points, output, as_json):
    """E-confidence set for a Gaussian mean from the mixture e-value on a grid."""
    x = _column(read_table(input_path), "x")
    grid = np.linspace(lo, hi, points)

    def evaluator(theta, _alpha):
        lw = eprocess.gaussian_mixture_log_wealth(x - theta, tau)[0, -1]
        return math.exp(lw) if lw < 709 else math.inf

    cs = confset.eci_from_evaluator(evaluator, grid, alpha)
    hull = confset.grid_hull(cs.labels, grid)
    payload = {"points": sorted(cs.labels), "hull": hull, "contiguous": hull is not None, "level": cs.level}
    if as_json:
        _emit_json(payload, output)
    else:
        _emit_csv(("theta",), [[t] for t in sorted(cs.labels)], output)


@main.command()
@click.option("--input", "input_path", type=click.Path(), required=True, help="CSV with an 'e' column.")
@click.option("--delta", type=float, default=0.05)
@common
def eby(input_path, delta, output, as_json):
    """Select by e-BH at level delta and report the per-selection confidence levels."""
    es = _column(read_table(input_path), "e")
    selected = multitest.ebh(es, delta).rejected
    levels = confset.eby_levels(selected, es.size, delta)
    if as_json:
        _emit_json({"selected": list(selected), "levels": [levels[i] for i in selected]}, output)
    else:
        _emit_csv(("index", "alpha"), [[i, levels[i]] for i in selected], output)


@main.command()
@click.option("--input", "input_path", type=click.Path(), required=True, help="CSV with 'lo' and 'hi' columns.")
@click.option("--method", type=click.Choice(("M", "tau", "U", "R", "E", "W", "median")), default="M")
@click.option("--tau", type=float, default=0.5)
@click.option("--seed", type=int, default=0, help="Root seed for the uniform of U, R and W.")
@click.option("--alpha", type=float, default=None, help="Per-set miscoverage, used to report the guarantee.")
@common
def mv(input_path, method, tau, seed, alpha, output, as_json):
    """Merge intervals by majority vote and its variants."""
    table = read_table(input_path)
    if "lo" not in table or "hi" not in table:
        raise InputError("input needs 'lo' and 'hi' columns")
    sets = [UncertaintySet.interval(a, b) for a, b in zip(table["lo"], table["hi"])]
    u = float(derive_rng(seed, "mv/u").random())
    if method == "M":
        out = confset.majority_vote(sets, 0.5, alpha)
    elif method == "tau":
        out = confset.majority_vote(sets, tau, alpha)
    elif method in ("U", "R"):
        out = confset.mv_randomized(sets, u, "C" + method, alpha)
    elif method == "E":
        out = confset.mv_exchangeable(sets, alpha)
    elif method == "W":
        if "w" not in table:
            raise InputError("method W needs a 'w' column")
        out = confset.mv_weighted(sets, table["w"], u, alpha)
    else:
        out = confset.median_of_midpoints(sets)
    if as_json:
        _emit_json(out.to_json(), output)
    else:
        _emit_csv(("lo", "hi"), out.intervals.tolist(), output)


# -- thresholds and backtests ------------------------------------------------------


@main.command("thresholds")
@click.option("--kind", type=click.Choice(thresholds.SHAPE_CLASSES), default=None)
@click.option("--alpha", type=float, default=None)
@click.option("--e", "e", type=float, default=None, help="Convert this e-value with the class calibrator.")
@common
def thresholds_cmd(kind, alpha, e, output, as_json):
    """Improved rejection thresholds for shape-constrained e-values."""
    if kind is None:
        table = studies.thresholds()
        if as_json:
            _emit_json({"columns": table.columns, "rows": table.rows}, output)
        else:
            _emit_csv(table.columns, table.rows, output)
        return
    payload = {"kind": kind, "bound_only": kind in thresholds.BOUNDED_ONLY}
    if alpha is not None:
        payload["t_alpha"] = thresholds.t_alpha(kind, alpha)
    if e is not None:
        payload["p"] = thresholds.conditional_e_to_p(kind, e)
    if "t_alpha" not in payload and "p" not in payload:
        raise click.UsageError("give --alpha, --e, or neither for the full table")
    if as_json:
        _emit_json(payload, output)
    else:
        cols = [c for c in ("t_alpha", "p") if c in payload]
        _emit_csv(cols, [[payload[c] for c in cols]], output)


@main.command("backtest")
@click.option("--input", "input_path", type=click.Path(), required=True, help="CSV with columns t, x, r and optionally z.")
@click.option("--kind", type=click.Choice(("mean", "variance_mean", "quantile", "es_var")), default="es_var")
@click.option("--beta", type=float, default=0.975)
@click.option("--gamma", type=float, default=0.5)
@click.option("--alpha", type=float, default=0.05)
@common
def backtest_cmd(input_path, kind, beta, gamma, alpha, output, as_json):
    """Sequential backtest of risk forecasts with the empirically adaptive bettor."""
    table = read_table(input_path)
    for col in ("x", "r"):
        if col not in table:
            raise InputError(f"input needs an {col!r} column")
    n = table["x"].size
    ts = table.get("t", np.arange(1, n + 1))
    zs = table.get("z")
    spec = risk.EStatSpec(kind, beta=beta)
    records = [
        risk.ForecastRecord(table["x"][i], table["r"][i], None if zs is None else zs[i], int(ts[i])) for i in range(n)
    ]
    es = risk.e_stats(records, spec)
    lambdas, log_wealth = eprocess.adaptive_wealth_path(es, gamma)
    hits = np.flatnonzero(log_wealth >= math.log(1 / alpha) - 1e-12)
    if as_json:
        _emit_json(
            {
                "n": n,
                "final_wealth": float(np.exp(log_wealth[-1])),
                "rejected": bool(hits.size),
                "stop": int(ts[hits[0]]) if hits.size else None,
            },
            output,
        )
    else:
        rows = [[int(ts[i]), es[i], lambdas[i], log_wealth[i]] for i in range(n)]
        _emit_csv(("t", "e", "lambda", "log_wealth"), rows, output)


@main.command()
@click.option("--study", type=click.Choice(tuple(studies.STUDIES)), required=True)
@click.option("--seed", type=int, default=1)
@click.option("--reps", type=int, default=None, help="Replications; each study has its own default.")
@click.option("--summary", type=click.Path(dir_okay=False), default=None, help="Also write the summary JSON here.")
@common
def simulate(study, seed, reps, summary, output, as_json):
    """Run a seeded simulation study and print its table."""
    fn = studies.STUDIES[study]
    kwargs = {"seed": seed}
    if reps is not None:
        if reps < 0:
            raise DomainError("reps must be nonnegative")
        kwargs["reps"] = reps
    table = fn(**kwargs)
    if as_json:
        _emit_json({"columns": table.columns, "rows": table.rows, "summary": table.summary}, output)
    else:
        _emit_csv(table.columns, table.rows, output)
    if summary:
        with open(summary, "w", encoding="utf-8") as fh:
            json.dump({"schema_version": SCHEMA_VERSION, **_jsonable(table.summary)}, fh, sort_keys=True, indent=2)
            fh.write("\n")


if __name__ == "__main__":
    main()
