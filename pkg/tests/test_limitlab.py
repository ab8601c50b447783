import math

import numpy as np
import pytest

from scipy import stats

from tiltlab.diagnostics import ks_one_sample, ks_two_sample
from tiltlab.dist import Beta, Exponential, TruncExp, Uniform01, sample
from tiltlab.errors import AssumptionViolated, FactorizationError
from tiltlab.limitlab import (
    GaussCovSpec, PRMConfig, ZcprmTarget, borell_band_check, c1_from_ratio, default_grid, factorize_covariance,
    gauss_cov, grid_covariance, max_weight_stat, neglected_weight, ratio_from_c1, sample_normalized_maximum,
    sample_z_cprm, simulate_prm_1d, simulate_sup_gauss, solve_truncation, weibull_limit_target,
)
from tiltlab.suites import poisson_chisquare
from tiltlab.tilt import TiltSpec, m_theta_analytic, snis_weights


def test_gauss_cov_diagonal_at_zero_tilt():
    # θ = 0 ではブラウン橋 F(x)(1 - F(x))
    spec = GaussCovSpec(Uniform01(), 0.0, grid=np.linspace(0.1, 0.9, 9))
    x = np.array([ 0.2, 0.5, 0.7 ])
    assert gauss_cov(spec, x, x) == pytest.approx(x * (1.0 - x))
    assert gauss_cov(spec, 0.3, 0.7) == pytest.approx(0.3 * 0.3)


def test_gauss_cov_is_symmetric_and_vanishes_at_ends():
    spec = GaussCovSpec(Beta(2.0, 5.0), 3.0)
    assert gauss_cov(spec, 0.2, 0.6) == pytest.approx(gauss_cov(spec, 0.6, 0.2))
    assert gauss_cov(spec, 1.0, 0.4) == pytest.approx(0.0, abs=1e-12)
    assert spec.m_theta == pytest.approx(m_theta_analytic(Beta(2.0, 5.0), TiltSpec(3.0)), rel=1e-8)


def test_grid_covariance_matches_pointwise():
    spec = GaussCovSpec(Exponential(1.0), 0.2, grid=np.linspace(0.1, 4.0, 12))
    C = grid_covariance(spec)
    assert C.shape == (12, 12)
    assert np.allclose(C, C.T)
    X1, X2 = np.meshgrid(spec.grid, spec.grid, indexing='ij')
    assert C == pytest.approx(gauss_cov(spec, X1, X2), abs=1e-12)


def test_gauss_cov_requires_finite_second_moment():
    with pytest.raises(AssumptionViolated):
        GaussCovSpec(Exponential(1.0), 0.6)


def test_gauss_cov_grid_validation():
    with pytest.raises(ValueError):
        GaussCovSpec(Uniform01(), 1.0, grid=[ 0.5, 0.2 ])


def test_default_grid_spans_tilted_law():
    grid = default_grid(Uniform01(), 10.0, k=64)
    assert grid.size == 64
    assert np.all(np.diff(grid) > 0)
    assert 0.0 < grid[0] < 0.5 < grid[-1] < 1.0


def test_zero_covariance_gives_zero_draws():
    draws = simulate_sup_gauss(np.zeros((5, 5)), 100, seed=0)
    assert np.all(draws == 0.0)


def test_factorize_with_rank_deficiency():
    v = np.array([ 1.0, 2.0, 3.0 ])
    C = np.outer(v, v)
    L = factorize_covariance(C)
    assert L @ L.T == pytest.approx(C, abs=1e-8)


def test_factorize_rejects_indefinite():
    with pytest.raises(FactorizationError):
        factorize_covariance(np.array([[ 1.0, 0.0 ], [ 0.0, -1.0 ]]))


def test_sup_gauss_is_reproducible():
    spec = GaussCovSpec(Uniform01(), 2.0, grid=np.linspace(0.05, 0.95, 32))
    assert np.array_equal(simulate_sup_gauss(spec, 50, 3), simulate_sup_gauss(spec, 50, 3))


@pytest.mark.parametrize('theta', [ 0.5, 1.0, 2.0, 4.0 ])
def test_sup_gauss_scales_with_m_theta(theta):
    spec = GaussCovSpec(Uniform01(), theta, grid=default_grid(Uniform01(), theta, k=128))
    draws = simulate_sup_gauss(spec, 500, seed=1)
    assert 0.2 <= draws.mean() / math.sqrt(spec.m_theta) <= 3.0


def test_borell_band_accepts_concentrated_draws():
    report = borell_band_check(np.full(2000, 0.7), 1.5)
    assert report.ok
    assert len(report.rows()) == 12


def test_borell_band_rejects_heavy_tails():
    draws = stats.cauchy.rvs(size=5000, random_state=np.random.default_rng(0))
    assert not borell_band_check(draws, 1.0).ok


def test_borell_band_argument_checks():
    with pytest.raises(ValueError):
        borell_band_check(np.zeros(10), 1.0)
    with pytest.raises(ValueError):
        borell_band_check(np.zeros(2000), 0.5)


@pytest.mark.parametrize('model', [ Uniform01(), TruncExp(1.0, 2.0), Beta(2.0, 3.0) ])
def test_normalized_maximum_converges_to_weibull(model):
    draws = sample_normalized_maximum(model, 10 ** 5, 20000, seed=0)
    target = weibull_limit_target(model.weibull_index)
    assert ks_one_sample(draws, target.cdf) < 0.02


def test_normalized_maximum_agrees_with_direct_simulation():
    direct = []
    rng = np.random.default_rng(5)
    for _ in range(2000):
        direct.append(1.0 - sample(Uniform01(), 100, rng).max())
    direct = np.array(direct) / 0.01
    inverse = sample_normalized_maximum(Uniform01(), 100, 2000, seed=5)
    assert stats.ks_2samp(direct, inverse).pvalue > 0.001


def test_truncation_respects_tail_tol():
    T = solve_truncation(1.0, 2.0, 1e-8)
    assert neglected_weight(1.0, 2.0, T) < 1e-8
    assert T >= 40.0
    assert neglected_weight(1.0, 2.0, 2 * T) < neglected_weight(1.0, 2.0, T)


def test_prm_config_validates_truncation():
    config = PRMConfig(1.0, 10.0, truncation_T=3.0)
    assert config.mean_atoms == 3.0
    with pytest.raises(ValueError):
        PRMConfig(1.0, 1.0, truncation_T=3.0)
    with pytest.raises(ValueError):
        PRMConfig(0.0, 1.0)
    assert config.as_dict()['truncation_T'] == 3.0


def test_prm_counts_are_poisson():
    config = PRMConfig(2.0, 10.0, truncation_T=2.0)
    counts = np.array([ simulate_prm_1d(config, seed).size for seed in range(4000) ])
    assert counts.mean() == pytest.approx(4.0, rel=0.05)
    assert counts.var() == pytest.approx(4.0, rel=0.1)


def test_prm_atoms_in_range_and_sorted():
    config = PRMConfig(1.0, 10.0, truncation_T=3.0)
    atoms = simulate_prm_1d(config, 9)
    assert np.all(np.diff(atoms) >= 0)
    assert np.all((atoms >= 0) & (atoms <= 3.0))


def test_z_cprm_large_c1_selects_minimum():
    config = PRMConfig(1.0, 50.0)
    draws = sample_z_cprm(config, 2000, seed=0)
    assert np.all(draws > 0)
    # c1 min(atoms) ~ Exp(1/c1)
    assert ks_one_sample(draws, lambda t: 1.0 - np.exp(-np.asarray(t) / 50.0)) < 0.05


def test_z_cprm_reproducible_and_redraws():
    config = PRMConfig(1.0, 2.0)
    a, redraws = sample_z_cprm(config, 200, seed=4, return_redraws=True)
    assert redraws == 0
    assert np.array_equal(a, sample_z_cprm(config, 200, seed=4, workers=3))


def test_z_cprm_requires_small_tail_tol():
    with pytest.raises(ValueError):
        sample_z_cprm(PRMConfig(1.0, 2.0, tail_tol=1e-3), 10, seed=0)


def test_z_cprm_target():
    target = ZcprmTarget(PRMConfig(1.0, 2.0))
    assert target.sample(5, np.random.default_rng(0)).shape == (5,)
    with pytest.raises(NotImplementedError):
        target.cdf(1.0)


def test_c1_mapping():
    assert c1_from_ratio(1.0, 1.0) == pytest.approx(2.0)
    assert ratio_from_c1(3.0, c1_from_ratio(3.0, 0.4)) == pytest.approx(0.4)
    with pytest.raises(ValueError):
        c1_from_ratio(1.0, 0.0)


def test_max_weight_stat():
    assert max_weight_stat(snis_weights([ 0.5 ], TiltSpec(3.0))) == 1.0
    x = sample(Uniform01(), 100, 0)
    assert max_weight_stat(snis_weights(x, TiltSpec(0.0))) == pytest.approx(0.01)


def test_prm_restriction_is_a_prm():
    big = PRMConfig(2.0, 10.0, tail_tol=1e-6, truncation_T=2.0)
    small = big.with_truncation(1.5)
    restricted = []
    for seed in range(4000):
        atoms = simulate_prm_1d(big, seed)
        kept = atoms[atoms <= 1.5]
        if seed < 50:
            assert np.array_equal(kept, simulate_prm_1d(small, seed))
        restricted.append(kept.size)
    assert poisson_chisquare(restricted, 1.5 ** 2) > 0.01


def test_z_cprm_truncation_doubling():
    config = PRMConfig(1.0, 2.0)
    doubled = config.with_truncation(2.0 * config.T)
    a = sample_z_cprm(config, 2000, seed=0)
    b = sample_z_cprm(doubled, 2000, seed=0)
    assert ks_two_sample(a, b) < 2.0 * config.tail_tol
