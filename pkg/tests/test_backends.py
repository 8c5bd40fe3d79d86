"""The numba kernels and their numpy fallbacks must agree on identical inputs."""

import json
import os
import subprocess
import sys

import numpy as np
import pytest

from evalues import _kernels as kr


def agree(a, b):
    if isinstance(a, tuple):
        return all(agree(x, y) for x, y in zip(a, b))
    return np.allclose(a, b, rtol=1e-9, atol=1e-12, equal_nan=True)


def test_first_exit_backends():
    rng = np.random.default_rng(1)
    inc = np.where(rng.random((300, 400)) < 0.55, np.log(1.2), np.log(0.8))
    start = rng.normal(0, 0.5, 300)
    args = (inc, start, np.log(0.05), np.log(20.0))
    assert agree(kr._first_exit_loop(*args), kr._first_exit_numpy(*args))


def test_bet_fraction_backends():
    rng = np.random.default_rng(2)
    for _ in range(100):
        values = np.unique(rng.choice([0.0, 0.3, 1.0, 2.5, 4.0, 9.0], 4))
        counts = rng.integers(0, 20, values.size).astype(float)
        gamma = float(rng.choice([0.5, 1.0]))
        a = kr._bet_fraction(values, counts, gamma, 1e-12)
        b = kr._bet_fraction_numpy(values, counts, gamma, 1e-12)
        assert a == pytest.approx(b, abs=1e-8)


def test_adaptive_path_backends():
    rng = np.random.default_rng(3)
    es = rng.choice([0.0, 0.5, 4.0], 800)
    uniques, codes = np.unique(es, return_inverse=True)
    args = (codes.astype(np.int64), uniques, 0.7, 1e-10)
    fast, slow = kr._adaptive_path_loop(*args), kr._adaptive_path_numpy(*args)
    # both stop within the root-finder tolerance, summing in a different order
    assert np.allclose(fast[0], slow[0], atol=1e-8)
    assert np.allclose(fast[1], slow[1], atol=1e-6)


def test_closed_scan_backends():
    rng = np.random.default_rng(4)
    for _ in range(200):
        desc = np.sort(rng.exponential(rng.uniform(1, 40), int(rng.integers(1, 30))))[::-1].copy()
        assert kr._closed_mean_loop(desc, 0.05) == kr._closed_mean_numpy(desc, 0.05)


def test_em_backends():
    rng = np.random.default_rng(5)
    x = np.where(rng.random(150) < 0.25, -1.0, 1.0) + rng.standard_normal(150)
    inits = rng.standard_normal((10, 2))
    a = kr._em_two_means_loop(x, 0.25, inits, 200, 1e-10)
    b = kr._em_two_means_numpy(x, 0.25, inits, 200, 1e-10)
    assert agree(tuple(map(float, a)), tuple(map(float, b)))


SCRIPT = """
import json, numpy as np
from evalues import _kernels, multitest, merging
from evalues.eprocess import SprtConfig, sprt_bernoulli_paths
from evalues.seeding import derive_rng
from evalues.universal import fit_two_means_mixture
es = derive_rng(7, "backend").exponential(12.0, 25)
d, t = sprt_bernoulli_paths(0.55, 0.5, 0.6, SprtConfig(), 300, derive_rng(7, "backend/sprt"))
x = derive_rng(7, "backend/em").standard_normal(120) + 0.5
print(json.dumps({
    "backend": _kernels.backend(),
    "closed": multitest.closed_ebh(es, 0.1).k_star,
    "adaptive": merging.merge_e(np.tile([3.0, 0.5, 0.0], 100), "empirically_adaptive", gamma=0.5),
    "sprt": [int(d.sum()), float(t.mean())],
    "em": list(fit_two_means_mixture(x).metadata["means"]),
}))
"""


def run_with(flag):
    env = dict(os.environ)
    if flag:
        env["EVALUES_DISABLE_NUMBA"] = "1"
    else:
        env.pop("EVALUES_DISABLE_NUMBA", None)
    out = subprocess.run([sys.executable, "-c", SCRIPT], capture_output=True, text=True, env=env, check=True)
    return json.loads(out.stdout)


def test_env_flag_switches_backend_with_identical_results():
    fast, slow = run_with(False), run_with(True)
    assert slow["backend"] == "numpy"
    assert fast["backend"] == ("numba" if kr.NUMBA_ENABLED else "numpy")
    assert fast["closed"] == slow["closed"]
    assert fast["sprt"][0] == slow["sprt"][0]
    assert fast["sprt"][1] == pytest.approx(slow["sprt"][1], rel=1e-12)
    assert fast["adaptive"] == pytest.approx(slow["adaptive"], rel=1e-8)
    assert fast["em"] == pytest.approx(slow["em"], abs=1e-7)


def test_derive_rng_streams():
    from evalues.seeding import derive_rng

    a = derive_rng(11, "x").random(5)
    assert np.array_equal(a, derive_rng(11, "x").random(5))
    assert not np.array_equal(a, derive_rng(11, "y").random(5))
    assert not np.array_equal(a, derive_rng(12, "x").random(5))
    with pytest.raises(ValueError):
        derive_rng(-1, "x")
