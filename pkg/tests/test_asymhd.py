import math

import numpy as np
import pytest

from tiltlab.asymhd import (
    MvrvModel, g_pushforward, m_theta_asymptote_hd, m_theta_limit_hd, maximizer, mvrv_model, mvrv_ratio,
    mvrv_ratio_mc, nu_integral, nu_rect, z_limit_target,
)
from tiltlab.dist import Beta, Exponential, ProductVec, StdNormalVec, TwoDExample, Uniform01
from tiltlab.errors import AssumptionViolated


def _uniform_square():
    return ProductVec((Uniform01(), Uniform01()))


def test_maximizer_on_box():
    assert maximizer(TwoDExample(), [ 1.0, 1.0 ]).tolist() == [ 1.0, 1.0 ]
    assert maximizer(_uniform_square(), [ -1.0, 2.0 ]).tolist() == [ 0.0, 1.0 ]


def test_maximizer_not_unique():
    with pytest.raises(AssumptionViolated):
        maximizer(TwoDExample(), [ 1.0, 0.0 ])


def test_maximizer_unbounded_or_non_product():
    with pytest.raises(AssumptionViolated):
        maximizer(ProductVec((Uniform01(), Exponential(1.0))), [ 1.0, 1.0 ])
    with pytest.raises(AssumptionViolated):
        maximizer(StdNormalVec(2), [ 1.0, 1.0 ])


def test_mvrv_model_constants():
    mvrv = mvrv_model(TwoDExample(), [ 1.0, 1.0 ])
    assert mvrv.rho.tolist() == [ 1.0, 1.0 ]
    assert mvrv.kappa.tolist() == pytest.approx([ 1.0, 0.5 ])
    assert mvrv.alpha == 2.0
    assert MvrvModel.from_dict(mvrv.as_dict()).kappa.tolist() == pytest.approx(mvrv.kappa.tolist())


def test_mvrv_model_requires_positive_theta():
    with pytest.raises(AssumptionViolated):
        mvrv_model(_uniform_square(), [ 1.0, -1.0 ])


def test_nu_rect():
    mvrv = mvrv_model(TwoDExample(), [ 1.0, 1.0 ])
    rect = ([ 0.0, 0.0 ], [ 1.0, 2.0 ])
    assert nu_rect(mvrv, rect) == pytest.approx(1.0)
    # 次数 α = 2 の同次性
    assert nu_rect(mvrv, ([ 0.0, 0.0 ], [ 3.0, 6.0 ])) == pytest.approx(9.0)
    assert nu_rect(mvrv, ([ 0.5, 0.0 ], [ 0.5, 2.0 ])) == 0.0
    with pytest.raises(ValueError):
        nu_rect(mvrv, ([ -1.0, 0.0 ], [ 1.0, 1.0 ]))


def test_mvrv_ratio_converges_to_nu():
    mvrv = mvrv_model(ProductVec((Beta(2.0, 3.0), Uniform01())), [ 1.0, 1.0 ])
    rect = ([ 0.2, 0.1 ], [ 1.0, 2.0 ])
    ratios = [ mvrv_ratio(mvrv, t, rect) for t in (1e-2, 1e-3, 1e-4) ]
    limit = nu_rect(mvrv, rect)
    errors = [ abs(r - limit) for r in ratios ]
    assert errors[0] >= errors[1] >= errors[2]
    assert ratios[-1] == pytest.approx(limit, rel=0.01)


def test_mvrv_ratio_monte_carlo():
    mvrv = mvrv_model(TwoDExample(), [ 1.0, 1.0 ])
    rect = ([ 0.0, 0.0 ], [ 1.0, 1.0 ])
    exact = mvrv_ratio(mvrv, 0.1, rect)
    estimate, se = mvrv_ratio_mc(mvrv, 0.1, rect, 10 ** 6, seed=0)
    assert abs(estimate - exact) < 4 * se


def test_mvrv_ratio_leaves_support():
    mvrv = mvrv_model(TwoDExample(), [ 1.0, 1.0 ])
    with pytest.raises(ValueError):
        mvrv_ratio(mvrv, 0.9, ([ 0.0, 0.0 ], [ 2.0, 2.0 ]))


def test_nu_integral_and_target():
    mvrv = mvrv_model(TwoDExample(), [ 1.0, 1.0 ])
    assert nu_integral(mvrv, [ 2.0, 4.0 ]) == pytest.approx(1.0 * 0.5 / (2.0 * 4.0))
    with pytest.raises(AssumptionViolated):
        nu_integral(mvrv, [ 1.0, 0.0 ])
    target = z_limit_target(mvrv, [ 2.0, 4.0 ])
    assert target.params() == { 'shapes': [ 1.0, 1.0 ], 'rates': [ 2.0, 4.0 ] }


def test_product_uniform_m_theta_limit():
    mvrv = mvrv_model(_uniform_square(), [ 1.0, 1.0 ])
    assert m_theta_limit_hd(mvrv, [ 1.0, 1.0 ]) == pytest.approx(0.25)
    assert m_theta_asymptote_hd(mvrv, [ 1.0, 1.0 ], 1e3) == pytest.approx(0.25, rel=1e-3)


def test_two_d_example_m_theta_limit():
    mvrv = mvrv_model(TwoDExample(), [ 1.0, 2.0 ])
    limit = m_theta_limit_hd(mvrv, [ 1.0, 2.0 ])
    assert m_theta_asymptote_hd(mvrv, [ 1.0, 2.0 ], 1e3) == pytest.approx(limit, rel=0.01)


def test_power_pushforward():
    mvrv = mvrv_model(TwoDExample(), [ 1.0, 1.0 ])
    pushed = g_pushforward(mvrv, [ 1.0, 0.5 ])
    # V^2 を平方根で戻すと一様分布になる
    assert pushed.kappa.tolist() == pytest.approx([ 1.0, 1.0 ])
    assert pushed.exponents.tolist() == [ 1.0, 0.5 ]
    assert g_pushforward(mvrv) is mvrv

    rect = ([ 0.1, 0.2 ], [ 0.8, 1.5 ])
    assert mvrv_ratio(pushed, 1e-4, rect) == pytest.approx(nu_rect(pushed, rect), rel=0.01)


def test_power_pushforward_limit_matches_tilted_m_theta():
    mvrv = g_pushforward(mvrv_model(TwoDExample(), [ 1.0, 1.0 ]), [ 1.0, 0.5 ])
    limit = m_theta_limit_hd(mvrv, [ 1.0, 1.0 ])
    assert limit == pytest.approx(0.25)
    assert m_theta_asymptote_hd(mvrv, [ 1.0, 1.0 ], 1e3) == pytest.approx(limit, rel=0.01)


def test_pushforward_rejects_bad_exponents():
    mvrv = mvrv_model(TwoDExample(), [ 1.0, 1.0 ])
    with pytest.raises(ValueError):
        g_pushforward(mvrv, [ 1.0, -1.0 ])


@pytest.mark.parametrize('model', [ TwoDExample(), ProductVec((Beta(2.0, 3.0), Uniform01())) ])
@pytest.mark.parametrize('c', [ 2.0, 3.0, 0.5 ])
def test_nu_rect_is_homogeneous(model, c):
    mvrv = mvrv_model(model, [ 1.0, 1.0 ])
    rng = np.random.default_rng(7)
    for _ in range(20):
        lower = rng.uniform(0.0, 1.0, 2)
        upper = lower + rng.uniform(0.1, 1.0, 2)
        scaled = nu_rect(mvrv, (c * lower, c * upper))
        assert scaled == pytest.approx(c ** mvrv.alpha * nu_rect(mvrv, (lower, upper)), rel=1e-10)


def test_z_limit_target_coordinates_are_independent():
    mvrv = mvrv_model(TwoDExample(), [ 1.0, 1.0 ])
    y = z_limit_target(mvrv, [ 2.0, 4.0 ]).sample(10 ** 6, np.random.default_rng(0))
    assert y.shape == (10 ** 6, 2)
    assert abs(np.corrcoef(y[:, 0], y[:, 1])[0, 1]) < 0.01
    assert y.mean(axis=0) == pytest.approx([ 0.5, 0.25 ], rel=0.01)
