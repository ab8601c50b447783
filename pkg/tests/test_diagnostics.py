import math

import numpy as np
import pytest

from scipy import stats

from tiltlab.diagnostics import (
    RegimeReport, ks_1d, ks_one_sample, ks_rect_hd, ks_replicates, ks_slope, ks_two_sample, rect_grid,
    regime_classify, resample_ks_bound,
)
from tiltlab.dist import DiscreteUniform, Exponential, ProductVec, Uniform01, sample
from tiltlab.errors import BudgetExceeded
from tiltlab.tilt import TiltedLaw, TiltSpec, WeightedEmpirical, m_theta_analytic, snis_weights


def _uniform_cdf(x):
    return np.clip(x, 0.0, 1.0)


def test_ks_single_atom():
    we = WeightedEmpirical([ 0.0 ], [ 0.0 ], 0.0)
    assert ks_1d(we, _uniform_cdf) == pytest.approx(1.0)


def test_ks_two_atoms():
    we = WeightedEmpirical([ 0.0, 1.0 ], np.log([ 0.5, 0.5 ]), 0.0)
    assert ks_1d(we, _uniform_cdf) == pytest.approx(0.5)


def test_ks_against_dense_grid_scan():
    x = sample(Uniform01(), 200, 0)
    we = snis_weights(x, TiltSpec(2.0))
    law = TiltedLaw(Uniform01(), TiltSpec(2.0))
    value = ks_1d(we, law.cdf)

    # 原子の左右で評価したスキャンは厳密な値の下界
    order = np.argsort(x)
    cum = np.cumsum(we.weights[order])
    left = np.concatenate([[ 0.0 ], cum[:-1]])
    scan = max(np.max(np.abs(cum - law.cdf(x[order]))), np.max(np.abs(left - law.cdf(x[order]))))
    assert value == pytest.approx(scan, abs=1e-12)
    assert 0.0 <= value <= 1.0


def test_ks_with_ties():
    we = WeightedEmpirical([ 0.5, 0.5 ], np.log([ 0.5, 0.5 ]), 0.0)
    assert ks_1d(we, _uniform_cdf) == pytest.approx(0.5)


def test_ks_matches_scipy_for_equal_weights():
    x = sample(Exponential(1.0), 500, 2)
    expected = stats.kstest(x, stats.expon.cdf).statistic
    assert ks_one_sample(x, stats.expon.cdf) == pytest.approx(expected, abs=1e-12)


def test_ks_rejects_nan_and_wrong_dimension():
    we = WeightedEmpirical([ 0.0, 1.0 ], [ math.nan, 0.0 ], 0.0)
    with pytest.raises(ValueError):
        ks_1d(we, _uniform_cdf)
    we2 = WeightedEmpirical(np.zeros((2, 2)), np.log([ 0.5, 0.5 ]), 0.0)
    with pytest.raises(ValueError):
        ks_1d(we2, _uniform_cdf)


def test_two_sample_ks():
    a = np.array([ 1.0, 2.0, 3.0 ])
    assert ks_two_sample(a, a) == 0.0
    assert ks_two_sample(a, a + 10.0) == 1.0
    with pytest.raises(ValueError):
        ks_two_sample([], a)


def test_rect_grid_nests():
    coarse = rect_grid(([ 0.0, 0.0 ], [ 1.0, 2.0 ]), 4)
    fine = rect_grid(([ 0.0, 0.0 ], [ 1.0, 2.0 ]), 8)
    assert coarse[1].tolist() == [ 0.5, 1.0, 1.5, 2.0 ]
    assert set(coarse[0]) <= set(fine[0])


def test_rect_ks_refinement_is_monotone():
    model = ProductVec((Uniform01(), Uniform01()))
    tilt = TiltSpec([ 2.0, 3.0 ])
    we = snis_weights(sample(model, 2000, 0), tilt)
    law = TiltedLaw(model, tilt)
    box = ([ 0.0, 0.0 ], [ 1.0, 1.0 ])
    values = [ ks_rect_hd(we, law.cdf, box, k) for k in (4, 8, 16) ]
    assert values[0] <= values[1] <= values[2]
    assert values[-1] < 0.1


def test_rect_ks_quadrant_mass():
    points = np.array([[ 0.25, 0.25 ], [ 0.75, 0.75 ]])
    we = WeightedEmpirical(points, np.log([ 0.5, 0.5 ]), 0.0)
    value = ks_rect_hd(we, lambda q: np.zeros(len(q)), ([ 0.0, 0.0 ], [ 1.0, 1.0 ]), 2)
    assert value == pytest.approx(1.0)


def test_rect_ks_budget():
    we = WeightedEmpirical(np.zeros((3, 4)), np.log(np.full(3, 1.0 / 3.0)), 0.0)
    with pytest.raises(BudgetExceeded):
        ks_rect_hd(we, lambda q: np.zeros(len(q)), (np.zeros(4), np.ones(4)), 100)


def test_regime_accurate():
    schedule = [ (n, 1.225) for n in (10 ** 3, 10 ** 4, 10 ** 5, 10 ** 6) ]
    report = regime_classify(schedule)
    assert report.regime == 'accurate'
    assert report.slope == pytest.approx(-1.0)
    assert report.admissible_rate_exponent == 0.5


def test_regime_critical():
    report = regime_classify([ (n, 0.5 * n) for n in (10 ** 2, 10 ** 3, 10 ** 4) ])
    assert report.regime == 'critical'
    assert report.admissible_rate_exponent == 0.0


def test_regime_undersampled():
    report = regime_classify([ (n, float(n) ** 1.5) for n in (10 ** 2, 10 ** 3, 10 ** 4) ])
    assert report.regime == 'undersampled'


def test_regime_intermediate_rate():
    # M_θ = n^{1/2}: s_n^2 n^{-1/2} → 0 for a < 1/4
    report = regime_classify([ (n, math.sqrt(n)) for n in (10 ** 4, 10 ** 6, 10 ** 8, 10 ** 10) ])
    assert report.regime == 'accurate'
    assert report.admissible_rate_exponent == pytest.approx(0.25)
    assert report.as_dict()['evidence'][0] == { 'n': 10 ** 4, 'm_theta': 100.0, 'ratio': 0.01 }


@pytest.mark.parametrize('schedule', [
    [ (10, 1.0), (100, 1.0) ],
    [ (100, 1.0), (10, 1.0), (1000, 1.0) ],
    [ (10, 0.5), (100, 1.0), (1000, 1.0) ],
    [ (10, math.inf), (100, 1.0), (1000, 1.0) ],
])
def test_regime_rejects_bad_schedules(schedule):
    with pytest.raises(ValueError):
        regime_classify(schedule)


def test_regime_report_validation():
    with pytest.raises(ValueError):
        RegimeReport(1.0, 10, 0.1, 'unknown', 0.1, 0.0, [])


def test_ks_replicates_reproducible():
    a = ks_replicates(Uniform01(), TiltSpec(1.0), 100, 5, seed=3)
    b = ks_replicates(Uniform01(), TiltSpec(1.0), 100, 5, seed=3, workers=2)
    assert np.array_equal(a, b)
    assert np.all(a > 0)


def test_ks_slope_is_near_minus_half():
    slope, means = ks_slope(Uniform01(), TiltSpec(1.0), [ 2 ** 8, 2 ** 10, 2 ** 12 ], 40, seed=0)
    assert len(means) == 3
    assert -0.65 < slope < -0.35


def test_regime_undersampled_has_no_admissible_rate():
    # slope < 0 but the final ratio stays large
    report = regime_classify([ (n, 2.0 * n ** 0.7) for n in (10, 100, 1000) ])
    assert report.regime == 'undersampled'
    assert report.admissible_rate_exponent == 0.0


def _exp_schedule():
    ns = [ 10 ** 2, 10 ** 4, 10 ** 6, 10 ** 8 ]
    return [ (n, m_theta_analytic(Exponential(1.0), TiltSpec(0.5 - 1.0 / math.sqrt(n)))) for n in ns ]


def _dice_bound_schedule():
    # M_θ ≤ (1/6) Σ n^{C i} with θ = C log n, C = 1/12
    ns = [ 10 ** 4, 10 ** 6, 10 ** 8, 10 ** 10 ]
    return [ (n, sum(n ** (i / 12.0) for i in range(1, 7)) / 6.0) for n in ns ]


def test_regime_exponential_schedule():
    schedule = _exp_schedule()
    assert schedule[0][1] == pytest.approx(1.8, rel=1e-12)
    report = regime_classify(schedule)
    assert report.regime == 'accurate'
    assert report.admissible_rate_exponent == pytest.approx(0.25, abs=0.03)


def test_regime_dice_schedule():
    report = regime_classify(_dice_bound_schedule())
    assert report.regime == 'accurate'
    assert report.admissible_rate_exponent == pytest.approx(0.25, abs=0.03)


def test_regime_dice_exact_m_theta_is_bounded():
    dice = DiscreteUniform((1, 2, 3, 4, 5, 6))
    ns = [ 10 ** 4, 10 ** 8, 10 ** 16 ]
    ms = [ m_theta_analytic(dice, TiltSpec(math.log(n) / 12.0)) for n in ns ]
    assert all(1.0 <= m <= 6.0 for m in ms)
    assert ms[-1] > 5.0
    bound = dict(_dice_bound_schedule())
    assert ms[0] <= bound[10 ** 4]


def _accurate_first(report, tol=0.1):
    if report.slope < 0 and report.ratio < tol:
        return 'accurate'
    if abs(report.slope) < tol:
        return 'critical'
    return 'undersampled'


@pytest.mark.parametrize('schedule', [
    _exp_schedule(),
    _dice_bound_schedule(),
    [ (n, 0.5 * n) for n in (10 ** 2, 10 ** 3, 10 ** 4) ],
    [ (n, float(n) ** 1.5) for n in (10 ** 2, 10 ** 3, 10 ** 4) ],
])
def test_regime_order_of_checks_does_not_matter(schedule):
    report = regime_classify(schedule)
    assert _accurate_first(report) == report.regime


def test_resample_ks_bound():
    scale = stats.kstwobign.ppf(0.99)
    assert resample_ks_bound(100.0, 10 ** 4) == pytest.approx(scale * 0.11)
    assert resample_ks_bound(400.0, 10 ** 4) < resample_ks_bound(100.0, 10 ** 4)
    with pytest.raises(ValueError):
        resample_ks_bound(0.0, 10)
    with pytest.raises(ValueError):
        resample_ks_bound(10.0, 0)


def test_ks_invariant_under_increasing_relabeling():
    model, tilt = Uniform01(), TiltSpec(2.0)
    law = TiltedLaw(model, tilt)
    we = snis_weights(sample(model, 2000, 3), tilt)
    relabeled = WeightedEmpirical(np.exp(3.0 * we.points), we.log_weights, we.log_normalizer)
    value = ks_1d(relabeled, lambda y: law.cdf(np.log(y) / 3.0))
    assert value == pytest.approx(ks_1d(we, law.cdf), abs=1e-12)
