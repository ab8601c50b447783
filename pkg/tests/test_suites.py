import json
import math

import numpy as np
import pytest

from scipy import stats

from tiltlab.diagnostics import ks_one_sample, resample_ks_bound
from tiltlab.dist import Uniform01
from tiltlab.limitlab import PRMConfig
from tiltlab.rng import make_rng
from tiltlab.suites import (
    SUITES, SuiteReport, critical_draws, poisson_chisquare, prm_counts, run_suite, suite_gamma_limit,
    suite_prm, suite_undersampled,
)
from tiltlab.tilt import TiltSpec, resample, snis_weights


def test_closed_forms_suite():
    (report,) = run_suite('m-closed-forms', 0)
    assert report.passed
    assert len(report.criteria) == 4


def test_karamata_suite():
    (report,) = run_suite('karamata', 0)
    assert report.passed


def test_unbounded_gaussian_suite():
    (report,) = run_suite('unbounded-gaussian', 0)
    assert report.passed, report.dumps()


def test_unknown_suite():
    with pytest.raises(KeyError):
        run_suite('nope', 0)


def test_report_json_is_deterministic(tmp_path):
    a = run_suite('unbounded-gaussian', 3)[0].save(tmp_path / 'a')
    b = run_suite('unbounded-gaussian', 3)[0].save(tmp_path / 'b')
    assert a.name == 'verify_unbounded_gaussian.json'
    assert a.read_bytes() == b.read_bytes()


def test_report_criteria():
    report = SuiteReport('demo', 0)
    report.less('a', 0.1, 0.2)
    report.greater('b', 0.1, 0.2)
    report.within('c', 0.5, 0.0, 1.0)
    assert [ c.passed for c in report.criteria ] == [ True, False, True ]
    assert not report.passed
    assert json.loads(report.dumps())['criteria'][2]['threshold'] == [ 0.0, 1.0 ]


def test_prm_counts_and_chisquare():
    config = PRMConfig(alpha=1.0, c1=10.0, truncation_T=3.0)
    counts = prm_counts(config, 5000, seed=0)
    assert counts.shape == (5000, 3)
    assert counts[:, -1].mean() == pytest.approx(3.0, rel=0.05)
    assert np.all(counts[:, 0] + counts[:, 1] <= counts[:, 2])
    assert poisson_chisquare(counts[:, 0], 1.0) > 0.001
    assert poisson_chisquare(counts[:, -1], 3.0) > 0.001
    assert poisson_chisquare(counts[:, -1], 4.0) < 1e-6
    assert poisson_chisquare(np.full(5000, 3), 1.0) < 1e-6


def test_critical_draws_are_positive():
    draws = critical_draws(20, 50, seed=1)
    assert draws.shape == (50,)
    assert np.all(draws >= 0)


def test_small_undersampled_suite():
    report = suite_undersampled(0, n=30, reps=100, ks_reps=500)
    names = [ c.name for c in report.criteria ]
    assert names == [ 'max_weight_fraction', 'ks_vs_exp1' ]


def test_every_suite_is_registered():
    assert set(SUITES) == {
        'm-closed-forms', 'accurate-fidelity', 'sqrt-rate', 'gauss-field', 'karamata', 'gamma-limit',
        'critical', 'undersampled', 'multivariate', 'unbounded-gaussian', 'figures', 'prm',
    }


@pytest.mark.slow
@pytest.mark.parametrize('suite', [
    'accurate-fidelity', 'sqrt-rate', 'gauss-field', 'gamma-limit', 'critical', 'undersampled',
    'multivariate', 'prm',
])
def test_acceptance_suites(suite, tmp_path):
    (report,) = run_suite(suite, 0, tmp_path)
    assert report.passed, report.dumps()


@pytest.mark.slow
def test_prm_suite_full():
    assert suite_prm(0).passed


def test_small_prm_suite_checks_total_count():
    report = suite_prm(1, sims=5000)
    names = [ c.name for c in report.criteria ]
    assert names == [ 'mean_total_rel_error', 'chisquare_pvalue_total', 'chisquare_pvalue_0_1', 'abs_corr_disjoint_cells' ]
    assert report.criteria[1].passed


def test_small_gamma_limit_suite():
    report = suite_gamma_limit(0, n=10 ** 5, m=2000)
    law_distance, ks_exact = report.criteria
    assert law_distance.value == pytest.approx(5.0 ** 5 * math.exp(-5.0) / 1080.0, rel=1e-3)
    assert law_distance.passed
    assert ks_exact.threshold > 0.03


@pytest.mark.slow
def test_sqrt_n_tilt_matches_exponential_limit():
    n, m = 10 ** 6, 10 ** 4
    theta = math.sqrt(n)
    model, tilt = Uniform01(), TiltSpec(theta)
    values = []
    for seed in range(5):
        rng = make_rng(seed)
        we = snis_weights(model.sample(n, rng), tilt)
        draws = theta * (1.0 - resample(we, m, rng))
        values.append(ks_one_sample(draws, stats.expon.cdf))
        assert values[-1] < resample_ks_bound(we.effective_sample_size, m)
    assert np.mean(values) < 0.03
