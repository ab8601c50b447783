import math

import numpy as np
import pytest

from scipy import stats

from tiltlab.diagnostics import ks_one_sample
from tiltlab.dist import Beta, PowerExponential, StdNormalVec
from tiltlab.errors import AssumptionViolated
from tiltlab.tilt import TiltedLaw, TiltSpec, log_mgf, m_theta_analytic
from tiltlab.unbounded import (
    TailProfile, gaussian_limit_transform, laplace_geometry, laplace_normalizer, log_laplace_normalizer,
    log_m_theta_laplace, m_growth_constants, phi,
)

E1 = np.array([ 1.0, 0.0 ])


def test_phi_at_maximizer():
    profile = TailProfile.from_model(StdNormalVec(2))
    assert phi(profile, 3.0, 3.0 * E1, E1) == pytest.approx(4.5)


def test_gaussian_geometry():
    profile = TailProfile.from_model(StdNormalVec(2))
    geom = laplace_geometry(profile, 3.0, E1)
    assert geom.m_c.tolist() == pytest.approx([ 3.0, 0.0 ])
    assert geom.phi_max == pytest.approx(4.5)
    assert geom.neg_hessian == pytest.approx(np.eye(2))
    assert geom.det_neg_hessian == pytest.approx(1.0)


def test_geometry_requires_unit_theta():
    profile = TailProfile.from_model(StdNormalVec(2))
    with pytest.raises(ValueError):
        laplace_geometry(profile, 3.0, [ 1.0, 1.0 ])
    with pytest.raises(ValueError):
        laplace_geometry(profile, 0.0, E1)


def test_gaussian_normalizer_is_exact():
    profile = TailProfile.from_model(StdNormalVec(2))
    assert laplace_normalizer(profile, 4.0, E1) == pytest.approx(math.exp(8.0), rel=1e-12)
    one = TailProfile.from_model(StdNormalVec(1))
    assert log_laplace_normalizer(one, 5.0, [ 1.0 ]) == pytest.approx(12.5, rel=1e-12)


def test_power_exponential_normalizer_against_quadrature():
    model = PowerExponential(4.0, 1.0)
    profile = TailProfile.from_model(model)
    assert laplace_normalizer(profile, 50.0, [ 1.0 ]) == pytest.approx(math.exp(log_mgf(model, TiltSpec(50.0))), rel=0.02)


def test_profile_requires_unbounded_light_tail():
    with pytest.raises(AssumptionViolated):
        TailProfile.from_model(Beta(2.0, 5.0))
    with pytest.raises(AssumptionViolated):
        TailProfile(1.0, 1.0, 1.0)


def test_gaussian_growth_constants():
    gc = m_growth_constants(TailProfile.from_model(StdNormalVec(1)))
    assert gc.p == pytest.approx(1.0)
    assert gc.beta == pytest.approx(2.0)
    assert gc.poly_exponent == 0.0
    assert gc.q_corrected == pytest.approx(1.0)
    assert gc.q_stated == pytest.approx((2.0 * math.pi) ** -0.5)


def test_growth_constants_sign_of_polynomial_exponent():
    gc = m_growth_constants(TailProfile(4.0, 1.0, 1.0, d=2))
    assert gc.poly_exponent == pytest.approx(2.0 * 2.0 / 6.0)


def test_p_decreases_in_K():
    ps = [ m_growth_constants(TailProfile(3.0, K, 1.0)).p for K in (0.5, 1.0, 2.0, 4.0) ]
    assert all(a > b for a, b in zip(ps[:-1], ps[1:]))


@pytest.mark.parametrize('c', [ 20.0, 40.0, 80.0 ])
def test_growth_constants_against_exact_m_theta(c):
    model = PowerExponential(4.0, 1.0)
    profile = TailProfile.from_model(model)
    exact = math.log(m_theta_analytic(model, TiltSpec(c)))
    assert abs(log_m_theta_laplace(profile, c) - exact) < math.log(1.05)


def test_gaussian_limit_transform():
    profile = TailProfile.from_model(StdNormalVec(2))
    geom = laplace_geometry(profile, 6.0, E1)
    law = TiltedLaw(StdNormalVec(2), TiltSpec(6.0 * E1))
    z = gaussian_limit_transform(law.sample(20000, np.random.default_rng(0)), geom)
    assert z.shape == (20000, 2)
    for i in range(2):
        assert ks_one_sample(z[:, i], stats.norm.cdf) < 0.02
    with pytest.raises(ValueError):
        gaussian_limit_transform(np.zeros((3, 3)), geom)
