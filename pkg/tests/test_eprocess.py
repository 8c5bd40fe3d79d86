import math

import numpy as np
import pytest

from evalues import eprocess as ep
from evalues.errors import DomainError
from evalues.seeding import derive_rng


def run_product(steps):
    state = ep.EProcessState()
    for e in steps:
        state = ep.step_product(state, e)
    return state


def test_step_product_fixtures():
    assert run_product([1.0]).wealth == 1.0
    assert run_product([2, 0.5]).wealth == pytest.approx(1.0)
    s = run_product([4, 4, 0])
    assert s.wealth == 0.0
    assert s.history_max == pytest.approx(16.0)
    assert s.t == 3
    # a zero factor latches the process at zero
    assert ep.step_product(s, 100.0).wealth == 0.0
    with pytest.raises(DomainError):
        ep.step_product(s, -1.0)


def test_step_bet_fixtures():
    s0 = ep.EProcessState()
    assert ep.step_bet(s0, 7.0, 0.0).wealth == 1.0
    assert ep.step_bet(s0, 3.0, 1.0).wealth == pytest.approx(ep.step_product(s0, 3.0).wealth)
    assert ep.step_bet(s0, 4.0, 1 / 3).wealth == pytest.approx(2.0)
    with pytest.raises(DomainError):
        ep.step_bet(s0, 2.0, 1.5)


def test_predictable_bet_stamp():
    s = ep.EProcessState()
    bet = ep.adaptive_lambda(s)
    s1 = ep.step_bet(s, 2.0, bet)
    with pytest.raises(DomainError):
        ep.step_bet(s1, 2.0, bet)


def test_adaptive_lambda_fixtures():
    assert ep.adaptive_lambda(run_product([])).fraction == 0.0
    assert ep.adaptive_lambda(run_product([1, 1, 1])).fraction == pytest.approx(0.0, abs=1e-9)
    assert ep.adaptive_lambda(run_product([2, 2]), gamma=1.0).fraction == pytest.approx(1.0)
    assert ep.adaptive_lambda(run_product([0.5, 0.9]), gamma=1.0).fraction == 0.0
    rng = np.random.default_rng(1)
    hist = rng.choice([0.0, 4.0], 4000)
    lam = ep.adaptive_lambda(run_product(hist), gamma=1.0).fraction
    assert lam == pytest.approx(1 / 3, abs=0.03)


def test_adaptive_path_matches_state_machine():
    rng = np.random.default_rng(2)
    es = rng.choice([0.2, 1.0, 3.0], 60)
    lams, logw = ep.adaptive_wealth_path(es, gamma=0.5)
    state = ep.EProcessState()
    for k, e in enumerate(es):
        bet = ep.adaptive_lambda(state, gamma=0.5)
        assert bet.fraction == pytest.approx(lams[k], abs=1e-8)
        state = ep.step_bet(state, e, bet)
        assert state.log_wealth == pytest.approx(logw[k], abs=1e-8)


def test_ville_test_fixtures():
    s = run_product([20.0, 0.01])
    assert ep.ville_test(s, 0.05)
    assert not ep.ville_test(ep.EProcessState(), 0.5)
    with pytest.raises(DomainError):
        ep.ville_test(s, 0.0)


def test_ville_gaussian_lr_monte_carlo():
    rng = derive_rng(3, "ville/lr")
    x = rng.standard_normal((10_000, 200))
    logw = ep.gaussian_lr_log_wealth(x, 0.3)
    freq = np.mean(logw.max(axis=1) >= math.log(20))
    assert freq <= 0.05 + 3 * math.sqrt(0.05 * 0.95 / 10_000)


def test_sprt_inconclusive():
    res = ep.sprt([0.0] * 100)
    assert res.decision == "inconclusive"
    assert res.stopping_time == 100


def test_sprt_stops_at_thresholds():
    up, down = ep.bernoulli_llr(0.5, 0.6)
    assert ep.sprt([up] * 100).decision == "reject"
    assert ep.sprt([down] * 100).decision == "accept"
    cfg = ep.SprtConfig(mode="classical")
    lo, hi = cfg.thresholds
    assert lo == pytest.approx(0.05 / 0.95) and hi == pytest.approx(19.0)
    with pytest.raises(DomainError):
        ep.SprtConfig(alpha=0.0)


def test_sprt_monte_carlo_matches_exact():
    cfg = ep.SprtConfig()
    exact_time, exact_power = ep.sprt_bernoulli_exact(0.5, 0.5, 0.6, cfg)
    decisions, times = ep.sprt_bernoulli_paths(0.5, 0.5, 0.6, cfg, 4000, derive_rng(4, "sprt"))
    se = times.std() / math.sqrt(times.size)
    assert abs(times.mean() - exact_time) <= 4 * se
    assert exact_power <= 0.05 + 1e-12


def test_sprt_error_rates():
    cfg = ep.SprtConfig()
    _, type1 = ep.sprt_bernoulli_exact(0.5, 0.5, 0.6, cfg)
    _, power = ep.sprt_bernoulli_exact(0.6, 0.5, 0.6, cfg)
    assert type1 <= 0.05
    assert 1 - power <= 0.05


def test_ui_step_reductions():
    # fixed predictor q = N(1, 1), singleton null p = N(0, 1): the first wealth is q(x)/p(x)
    alt = lambda past, x: -0.5 * (x - 1) ** 2
    null = lambda pts: float(np.sum(-0.5 * pts**2))
    s = ep.ui_eprocess_step(ep.EProcessState(), 0.8, alt, null)
    assert s.wealth == pytest.approx(math.exp(0.8 - 0.5))
    # predictor inside the null family keeps the wealth at most 1
    rng = np.random.default_rng(5)
    x = rng.normal(2.0, 1.0, (50, 100))
    assert np.all(ep.gaussian_ui_log_wealth(x) <= 1e-12)


def test_ui_state_machine_matches_vectorised():
    rng = np.random.default_rng(6)
    x = rng.standard_normal(30)

    def alt(past, point):
        centre = past.mean() if past.size else 0.0
        return -0.5 * (point - centre) ** 2

    def null(points):
        return -0.5 * float(np.sum((points - points.mean()) ** 2))

    s = ep.EProcessState()
    logs = []
    for v in x:
        s = ep.ui_eprocess_step(s, v, alt, null)
        logs.append(s.log_wealth)
    np.testing.assert_allclose(logs, ep.gaussian_ui_log_wealth(x)[0], atol=1e-10)


def test_ui_ville_monte_carlo():
    rng = derive_rng(7, "ville/ui")
    x = rng.standard_normal((1000, 100)) + 0.7
    freq = np.mean(ep.gaussian_ui_log_wealth(x).max(axis=1) >= math.log(20))
    assert freq <= 0.05 + 3 * math.sqrt(0.05 * 0.95 / 1000)


def test_time_mixture_fixtures():
    w = 2.0 ** -np.arange(1, 6)
    np.testing.assert_allclose(ep.time_mixture(np.ones(5), w), np.cumsum(w))
    point = np.array([1.0, 0.0, 0.0, 0.0])
    np.testing.assert_allclose(ep.time_mixture([3.0, 5.0, 7.0, 9.0], point), [3, 3, 3, 3])
    assert ep.time_mixture([1.0, 2.0, 3.0], w[:3])[-1] == pytest.approx(11 / 8)
    with pytest.raises(DomainError):
        ep.time_mixture([1.0, 2.0], [0.5, -0.1])
    with pytest.raises(DomainError):
        ep.time_mixture([1.0, 2.0], [0.9, 0.9])


def test_default_time_weights_sum_below_one():
    w = ep.default_time_weights(10_000)
    assert np.all(w > 0)
    assert w.sum() < 1
    assert np.all(np.diff(w) < 0)


def test_time_mixture_monotone():
    rng = np.random.default_rng(8)
    e = rng.exponential(1.0, (5, 50))
    m = ep.time_mixture(e)
    assert np.all(np.diff(m, axis=1) >= 0)


def test_optional_continuation():
    first = run_product([5.0])
    np.testing.assert_allclose(ep.optional_continuation(first, np.ones(3)), [5, 5, 5])
    assert ep.optional_continuation(first, [4.0])[0] == pytest.approx(20)


def test_optional_continuation_crossing_monte_carlo():
    rng = derive_rng(9, "continuation")
    reps, alpha = 10_000, 0.05
    x1 = rng.standard_normal((reps, 50))
    x2 = rng.standard_normal((reps, 50))
    first = ep.gaussian_lr_log_wealth(x1, 0.3)
    # stop the first stage at its first crossing of 2 or at time 50
    hit = first >= math.log(2)
    stop = np.where(hit.any(axis=1), hit.argmax(axis=1), 49)
    stopped = first[np.arange(reps), stop]
    second = ep.gaussian_mixture_log_wealth(x2)
    # only the path up to the stop counts for the first stage
    first_max = np.array([first[i, : stop[i] + 1].max() for i in range(reps)])
    composite_max = np.maximum(first_max, stopped + second.max(axis=1))
    freq = np.mean(composite_max >= math.log(1 / alpha))
    assert freq <= alpha + 3 * math.sqrt(alpha * (1 - alpha) / reps)
