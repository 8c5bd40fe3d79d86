import json
import os
import subprocess
import sys

import pytest
from click.testing import CliRunner

from evalues.cli import main


@pytest.fixture
def runner():
    return CliRunner()


def write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def test_calibrate_and_etop(runner):
    out = runner.invoke(main, ["calibrate", "--p", "0.01", "--kind", "sqrtinv"])
    assert out.exit_code == 0 and float(out.output) == pytest.approx(9.0)
    out = runner.invoke(main, ["calibrate", "--p", "0.04", "--kind", "all_or_nothing", "--param", "0.05"])
    assert float(out.output) == pytest.approx(20.0)
    out = runner.invoke(main, ["etop", "--e", "9", "--json"])
    body = json.loads(out.output)
    assert body["schema_version"] == 1 and body["p"] == pytest.approx(1 / 9)


def test_domain_error_exit_code(runner):
    out = runner.invoke(main, ["calibrate", "--p", "-0.5", "--kind", "sqrtinv"])
    assert out.exit_code == 2
    out = runner.invoke(main, ["calibrate", "--p", "0.5", "--kind", "power", "--param", "3"])
    assert out.exit_code == 2


def test_usage_error_exit_code(runner):
    assert runner.invoke(main, ["simulate", "--study", "nope"]).exit_code == 2
    assert runner.invoke(main, ["calibrate", "--kind", "sqrtinv"]).exit_code == 2


def test_bad_csv_reports_line(runner, tmp_path):
    path = write(tmp_path, "e.csv", "e\n1.0\nabc\n")
    out = runner.invoke(main, ["merge-e", "--input", path])
    assert out.exit_code == 2
    assert "line 3" in out.output


def test_missing_file(runner, tmp_path):
    out = runner.invoke(main, ["merge-e", "--input", str(tmp_path / "none.csv")])
    assert out.exit_code == 2


def test_empty_input_exit_code(runner, tmp_path):
    path = write(tmp_path, "e.csv", "e\n")
    assert runner.invoke(main, ["merge-e", "--input", path]).exit_code == 2


def test_infeasible_exit_code(runner, tmp_path):
    path = write(tmp_path, "x.csv", "x\n1\n1\n1\n1\n1\n1\n")
    out = runner.invoke(main, ["ui", "--input", path, "--null", "gaussian_mean", "--alternative", "gaussian_mean_var"])
    assert out.exit_code == 3


def test_merge_commands(runner, tmp_path):
    path = write(tmp_path, "e.csv", "e\n2\n3\n")
    assert float(runner.invoke(main, ["merge-e", "--input", path, "--rule", "product"]).output) == pytest.approx(6)
    assert float(runner.invoke(main, ["merge-e", "--input", path, "--rule", "ustat", "--n", "1"]).output) == pytest.approx(2.5)
    ppath = write(tmp_path, "p.csv", "p\n0.02\n0.04\n")
    assert float(runner.invoke(main, ["merge-p", "--input", ppath]).output) == pytest.approx(0.06)
    assert runner.invoke(main, ["merge-p", "--input", ppath, "--rule", "simes_unsafe"]).exit_code == 2
    out = runner.invoke(main, ["merge-p", "--input", ppath, "--rule", "simes_unsafe", "--assume-prds"])
    assert float(out.output) == pytest.approx(0.04)
    out = runner.invoke(main, ["combine-pe", "--p", "0.04", "--e", "25"])
    assert float(out.output) == pytest.approx(0.0016)


def test_randomized_merge_is_seeded(runner, tmp_path):
    ppath = write(tmp_path, "p.csv", "p\n0.02\n0.04\n0.5\n")
    args = ["merge-p", "--input", ppath, "--randomized", "--seed", "5", "--json"]
    a, b = runner.invoke(main, args).output, runner.invoke(main, args).output
    assert a == b


def test_eprocess_and_sprt(runner, tmp_path):
    path = write(tmp_path, "e.csv", "e\n" + "4\n0\n" * 200)
    out = runner.invoke(main, ["eprocess", "--input", path])
    lines = out.output.strip().splitlines()
    assert lines[0] == "t,lambda,log_wealth,wealth" and len(lines) == 401
    body = json.loads(runner.invoke(main, ["eprocess", "--input", path, "--json"]).output)
    assert body["rejected"]
    xpath = write(tmp_path, "x.csv", "x\n" + "1\n" * 40)
    body = json.loads(runner.invoke(main, ["sprt", "--input", xpath, "--json"]).output)
    assert body["decision"] == "reject"
    body = json.loads(runner.invoke(main, ["sprt", "--input", write(tmp_path, "y.csv", "x\n1\n0\n"), "--json"]).output)
    assert body["decision"] == "inconclusive"
    assert runner.invoke(main, ["sprt", "--input", write(tmp_path, "z.csv", "x\n2\n")]).exit_code == 2


def test_ebh_variants(runner, tmp_path):
    path = write(tmp_path, "e.csv", "e\n60\n39\n11\n")
    counts = {}
    for variant in ("plain", "minadapt", "closed", "ge", "de", "ue", "boosted"):
        out = runner.invoke(main, ["ebh", "--input", path, "--variant", variant])
        assert out.exit_code == 0, out.output
        counts[variant] = json.loads(out.output)["k_star"]
    assert counts["plain"] == 2 and counts["minadapt"] == 2 and counts["closed"] == 3
    ppath = write(tmp_path, "p.csv", "p,e\n0.001,2\n0.2,1\n0.5,0\n")
    assert runner.invoke(main, ["ebh", "--input", ppath, "--variant", "bhy"]).exit_code == 0
    assert runner.invoke(main, ["ebh", "--input", ppath, "--variant", "epbh"]).exit_code == 0


def test_fwer_eci_eby(runner, tmp_path):
    path = write(tmp_path, "e.csv", "e\n2\n40\n")
    body = json.loads(runner.invoke(main, ["fwer", "--input", path, "--json"]).output)
    assert body["adjusted"] == pytest.approx([2, 21])
    xpath = write(tmp_path, "x.csv", "x\n0.1\n-0.3\n0.4\n0.2\n")
    body = json.loads(runner.invoke(main, ["eci", "--input", xpath, "--json"]).output)
    assert body["contiguous"] and body["hull"][0] < 0.1 < body["hull"][1]
    epath = write(tmp_path, "s.csv", "e\n100\n50\n10\n1\n0\n")
    body = json.loads(runner.invoke(main, ["eby", "--input", epath, "--delta", "0.1", "--json"]).output)
    assert body["selected"] == [0, 1] and body["levels"] == pytest.approx([0.04, 0.04])


def test_mv(runner, tmp_path):
    path = write(tmp_path, "s.csv", "lo,hi\n0,2\n1,3\n2,4\n")
    out = runner.invoke(main, ["mv", "--input", path])
    assert out.output.strip().splitlines() == ["lo,hi", "1,3"]
    for method in ("tau", "U", "R", "E", "median"):
        assert runner.invoke(main, ["mv", "--input", path, "--method", method, "--json"]).exit_code == 0
    assert runner.invoke(main, ["mv", "--input", path, "--method", "W"]).exit_code == 2


def test_thresholds_cmd(runner):
    out = runner.invoke(main, ["thresholds"])
    assert out.output.splitlines()[0].startswith("class,alpha=0.001")
    body = json.loads(runner.invoke(main, ["thresholds", "--kind", "D", "--alpha", "0.05", "--json"]).output)
    assert body["t_alpha"] == pytest.approx(10)
    assert runner.invoke(main, ["thresholds", "--kind", "D"]).exit_code == 2


def test_backtest_cmd(runner, tmp_path):
    rows = "\n".join(f"{t},{x},1.0" for t, x in enumerate([0.5, 3.0, 0.2, 4.0] * 10, start=1))
    path = write(tmp_path, "b.csv", "t,x,r\n" + rows + "\n")
    body = json.loads(runner.invoke(main, ["backtest", "--input", path, "--kind", "mean", "--json"]).output)
    assert body["n"] == 40 and body["rejected"]
    assert runner.invoke(main, ["backtest", "--input", write(tmp_path, "c.csv", "t,x\n1,2\n")]).exit_code == 2


def test_simulate_deterministic(runner, tmp_path):
    args = ["simulate", "--study", "wald", "--seed", "3", "--reps", "200"]
    a = runner.invoke(main, args)
    b = runner.invoke(main, args)
    assert a.exit_code == 0 and a.output == b.output
    c = runner.invoke(main, ["simulate", "--study", "wald", "--seed", "4", "--reps", "200"])
    assert c.output != a.output
    summary = tmp_path / "s.json"
    runner.invoke(main, ["simulate", "--study", "thresholds", "--summary", str(summary)])
    assert json.loads(summary.read_text())["schema_version"] == 1


def test_output_file(runner, tmp_path):
    target = tmp_path / "out.txt"
    runner.invoke(main, ["etop", "--e", "4", "--output", str(target)])
    assert float(target.read_text()) == 0.25


def test_console_script_entry_point():
    env = dict(os.environ)
    proc = subprocess.run([sys.executable, "-m", "evalues.cli", "calibrate", "--p", "0.01", "--kind", "sqrtinv"],
                          capture_output=True, text=True, env=env)
    assert proc.returncode == 0 and float(proc.stdout) == pytest.approx(9.0)
