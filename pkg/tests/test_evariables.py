import math

import numpy as np
import pytest
from scipy import optimize

from evalues import evariables as ev
from evalues.errors import DegenerateSampleError, DomainError, InfeasibleError


def test_gaussian_lr_fixtures():
    assert ev.gaussian_lr_e([1.0, -1.0, 0.5, -0.5], 1.0) == pytest.approx(math.exp(-2))
    assert ev.gaussian_lr_e([0.7], 0.7) == pytest.approx(math.exp(0.7**2 / 2))
    assert ev.gaussian_lr_e(np.full(10_000, 50.0), 3.0) == math.inf


def test_gaussian_lr_null_mean_monte_carlo():
    rng = np.random.default_rng(11)
    es = np.array([ev.gaussian_lr_e(z, 0.3) for z in rng.standard_normal(10**5)])
    assert abs(es.mean() - 1) <= 3 * es.std() / math.sqrt(es.size)


def test_gaussian_lr_e_power_linear():
    rng = np.random.default_rng(12)
    n, mu = 5, 0.4
    logs = np.log([ev.gaussian_lr_e(rng.normal(mu, 1, n), mu) for _ in range(20_000)])
    assert abs(logs.mean() - n * mu * mu / 2) <= 3 * logs.std() / math.sqrt(logs.size)


def test_gaussian_two_sided():
    assert ev.gaussian_two_sided_e([0.0], 1.0) == pytest.approx(math.exp(-0.5))
    assert ev.gaussian_two_sided_e([2.0], 3.0) == pytest.approx((math.exp(1.5) + math.exp(-10.5)) / 2)
    assert ev.gaussian_two_sided_e([1.3, 0.2], 1e-6) == pytest.approx(1.0, abs=1e-6)
    with pytest.raises(DomainError):
        ev.gaussian_two_sided_e([1.0], 0.0)


def test_bernoulli_lr():
    data = [1, 1, 0, 1, 1, 1, 1, 1]
    assert ev.bernoulli_lr_e(data, 0.5, 0.6) == pytest.approx(0.6**7 * 0.4 * 2**8)
    assert ev.bernoulli_lr_e(data, 0.5, 0.6) == pytest.approx(2.8665, abs=1e-4)
    assert ev.bernoulli_lr_e(data, 0.3, 0.3) == pytest.approx(1.0)
    assert ev.bernoulli_lr_e([1] * 12, 0.5, 0.6) == pytest.approx(1.2**12)
    with pytest.raises(DomainError):
        ev.bernoulli_lr_e([0, 2], 0.5, 0.6)


def test_soft_rank():
    assert ev.soft_rank_e([2, 2, 2]) == pytest.approx(1.0)
    assert ev.soft_rank_e([3, 1, 1, 1]) == pytest.approx(2.0)
    assert ev.soft_rank_e([0, 0, 0, 0]) == 1.0
    assert ev.soft_rank_e([5, 0, 0]) == pytest.approx(3.0)


def test_symmetry():
    sym = ev.gaussian_density(0, 1)
    for z in (-2, 0.3, 5):
        assert ev.symmetry_e(z, sym) == pytest.approx(1.0)
    assert ev.symmetry_e(0.5, ev.uniform_density(0, 1)) == pytest.approx(2.0)
    assert ev.symmetry_e(1.0, lambda z: 1.0 if z > 0 else 3.0) == pytest.approx(0.5)
    assert ev.symmetry_e(-0.5, ev.uniform_density(0, 1)) == 0.0


def test_mean_variance():
    assert ev.mean_variance_e(7, 2, 1, 0) == 1
    assert ev.mean_variance_e(2, 2, 1, 1) == pytest.approx(1)
    assert ev.mean_variance_e(3, 1, 1, 1, "second_moment") == pytest.approx(4.5)
    with pytest.raises(DomainError):
        ev.mean_variance_e(1, 1, 1, 1.5)


def test_subgaussian():
    assert ev.subgaussian_e(3.0, 0.0) == 1
    assert ev.subgaussian_e(0.8, 0.8) == pytest.approx(math.exp(0.32))
    with pytest.raises(DomainError):
        ev.subgaussian_e(1.0, -0.5)
    assert ev.subgaussian_e(1.0, -0.5, two_sided=True) == pytest.approx(math.exp(-0.5 - 0.125))
    rng = np.random.default_rng(13)
    es = np.exp(0.5 * rng.standard_normal(10**5) - 0.125)
    assert abs(es.mean() - 1) <= 3 * es.std() / math.sqrt(es.size)
    assert ev.subgaussian_e(0.4, 0.5) == pytest.approx(math.exp(0.2 - 0.125))


def test_mlr_numeraire():
    assert ev.mlr_numeraire_e(1.3, lambda z: 0.0) == 1
    assert ev.mlr_numeraire_e(2.0, lambda z: z - 0.5) == pytest.approx(math.exp(1.5))
    assert ev.mlr_numeraire_e(0.9, lambda z: 0.7 * z - 0.7**2 / 2) == pytest.approx(ev.gaussian_lr_e([0.9], 0.7))


def test_t_test():
    assert ev.t_test_e([3.7]) == pytest.approx(1.0, rel=1e-14)
    assert ev.t_test_e([1, -1], 1.0) == pytest.approx(math.sqrt(1 / 3))
    x = np.array([0.4, 1.1, -0.3, 2.2])
    assert ev.t_test_e(x * 7.5) == pytest.approx(ev.t_test_e(x))
    with pytest.raises(DegenerateSampleError):
        ev.t_test_e([2.0, 2.0], c=1e-300)


def test_changepoint():
    assert ev.changepoint_e([0.1, 0.2, 0.3], lambda x: np.zeros_like(x)) == pytest.approx(1)
    assert ev.changepoint_e([1.5], lambda x: 0.5 * x) == pytest.approx(math.exp(0.75))
    ratios = np.log([1.0, 2.0, 2.0])
    assert ev.changepoint_e([0, 1, 2], lambda x: ratios[x.astype(int)]) == pytest.approx(10 / 3)


def test_clt_asymptotic():
    x = np.array([1.0, -1.0, 2.0, -2.0])
    assert ev.clt_asymptotic_e(x, 0.7) == pytest.approx(math.exp(-0.245))
    assert ev.clt_asymptotic_e(x, 0.7, two_sided=True) == pytest.approx(math.exp(-0.245))
    with pytest.raises(DegenerateSampleError):
        ev.clt_asymptotic_e([0.0, 0.0], 1.0)


@pytest.mark.slow
def test_clt_asymptotic_validity():
    rng = np.random.default_rng(14)
    # the statistic only depends on the sum and sum of squares, so draw those directly
    n, reps = 10**4, 10**4
    sums = rng.standard_normal(reps) * math.sqrt(n)
    squares = rng.chisquare(n, reps)
    z = sums / np.sqrt(squares)
    es = np.exp(z - 0.5)
    assert es.mean() <= 1.02
    assert ev.clt_asymptotic_e(rng.standard_normal(n), 1.0) > 0


def test_compound_separable():
    g0, g1 = ev.gaussian_density(0, 1), ev.gaussian_density(1, 1)
    assert ev.compound_separable_e(0.4, [g0, g1], [g0, g1]) == pytest.approx(1)
    assert ev.compound_separable_e(0.4, [g0], [g1]) == pytest.approx(g1(0.4) / g0(0.4))
    one, three, two = (lambda x: 1.0), (lambda x: 3.0), (lambda x: 2.0)
    assert ev.compound_separable_e(0.0, [one, three], [two, two]) == pytest.approx(1)
    zero = lambda x: 0.0
    assert ev.compound_separable_e(0.0, [zero], [zero]) == 1.0
    assert ev.compound_separable_e(0.0, [zero], [one]) == math.inf


def test_compound_t():
    assert ev.compound_t_e([1.0], [1.0]) == pytest.approx([1.0])
    np.testing.assert_allclose(ev.compound_t_e([2, 2, 2], [1, 1, 1]), [2, 2, 2])
    np.testing.assert_allclose(ev.compound_t_e([2, 0], [1, 1]), [2, 0])


def test_lr_bound_numeraire():
    law = ev.DiscreteDist((0.5, 1.5), (0.5, 0.5))
    z0, f = ev.lr_bound_numeraire(law, 1.0)
    np.testing.assert_allclose(f([0.5, 1.5]), [0.5, 1.5])
    z0, f = ev.lr_bound_numeraire(ev.DiscreteDist((1.0,), (1.0,)), 2.0)
    assert z0 == pytest.approx(2.0)
    assert f(1.0) == pytest.approx(1.0)
    # every z0 in [0, 2] solves the normalising equation here; the largest is returned
    z0, f = ev.lr_bound_numeraire(ev.DiscreteDist((0.0, 2.0), (0.5, 0.5)), 2.0)
    assert z0 == pytest.approx(2.0)
    assert 0.5 * max(2.0, z0) == pytest.approx(1.0)
    assert f(2.0) == pytest.approx(1.0)
    with pytest.raises(InfeasibleError):
        ev.lr_bound_numeraire(ev.DiscreteDist((3.0,), (1.0,)), 2.0)
    with pytest.raises(DomainError):
        ev.lr_bound_numeraire(law, 0.5)


def test_bounded_mean_numeraire():
    def h(lam, mu):
        return (1 + lam * (1 - mu)) / (1 - lam * mu) - math.exp(lam)

    oracle = optimize.brentq(h, 0.5, 3.99, args=(0.25,), xtol=1e-14)
    lam = ev.bounded_mean_numeraire_lambda(0.25)
    assert lam == pytest.approx(oracle, abs=1e-8)
    lams = [ev.bounded_mean_numeraire_lambda(mu) for mu in (0.3, 0.4, 0.45, 0.49, 0.499)]
    assert all(a > b for a, b in zip(lams, lams[1:]))
    assert lams[-1] < 0.02
    # E_Q[1/E*] = 1 under U[0, 1] where E* = 1 + lam (Z - mu)
    mu = 0.25
    from scipy import integrate

    val, _ = integrate.quad(lambda z: 1 / (1 + lam * (z - mu)), 0, 1)
    assert val == pytest.approx(1.0, abs=1e-6)
    # and E_P[E*] = 1 + lam (mean - mu) <= 1 for any null law with mean <= mu
    assert 1 + lam * (0.2 - mu) <= 1


def test_discrete_dist_validation():
    with pytest.raises(DomainError):
        ev.DiscreteDist((0, 1), (0.5, 0.6))
    with pytest.raises(DomainError):
        ev.DiscreteDist((1, 1), (0.5, 0.5))


def test_piecewise_density():
    f = ev.piecewise_constant_density([0, 1, 3], [0.5, 0.25])
    np.testing.assert_allclose(f([-1, 0.5, 2, 3]), [0, 0.5, 0.25, 0])
