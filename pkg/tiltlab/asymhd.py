"""最大点 x_θ での多変量正則変動 (MVRV)。

極限測度 ν は直積測度に限る。座標 i の指数 ρ_i と定数 κ_i に対し
ν((a, b]) = Π_i κ_i (b_i^{ρ_i} - a_i^{ρ_i})、U(t) = t^α、α = Σ ρ_i。
"""
from __future__ import annotations

import logging
import math

import numpy as np

from typing import Optional, Sequence, Tuple

from .dist import DistributionModel, ProductVec, model_from_dict
from .errors import AssumptionViolated
from .rng import make_rng
from .targets import ProductGammaTarget
from .tilt import TiltSpec, m_theta_analytic
from .utils import JsonMixin

logger = logging.getLogger(__name__)

MC_MAX_DRAWS = 10 ** 7


def _as_theta(theta) -> np.ndarray:
    if isinstance(theta, TiltSpec):
        return theta.theta
    return np.atleast_1d(np.asarray(theta, dtype=float))


def _components(model: DistributionModel):
    if isinstance(model, ProductVec):
        return list(model.components)
    if model.dim == 1:
        return [model]
    raise AssumptionViolated(
        f"{model.family}: only product families carry a product limit measure "
        "(non-product supports such as balls give a non-integrable nu)."
    )


def maximizer(model: DistributionModel, theta) -> np.ndarray:
    """x_θ = argmax θ^T x を台の上で求める。直方体の台では座標ごとの端点になる。

    Raises
    ------
    AssumptionViolated
        台が非有界であるか、θ に 0 の成分があって最大点が一意でない。
    """
    theta = _as_theta(theta)
    if theta.size != model.dim:
        raise ValueError(f"dimension mismatch: model has d={model.dim}, theta has {theta.size} entries.")
    if np.all(theta == 0):
        raise ValueError("theta must be a non-zero direction.")

    comps = _components(model)
    x = np.empty(theta.size)
    for i, (c, t) in enumerate(zip(comps, theta)):
        if t == 0:
            raise AssumptionViolated(
                f"theta has a zero component at coordinate {i}; the maximizer on a box is not unique."
            )
        end = c.supremum if t > 0 else c.infimum
        if not math.isfinite(end):
            raise AssumptionViolated(f"coordinate {i} of {model.family} is unbounded in the tilt direction.")
        x[i] = end
    return x


class MvrvModel(JsonMixin):
    """X (あるいは g(X)) が x_θ で正則変動することを表すモデル。

    Parameters
    ----------
    base : DistributionModel
        ProductVec、TwoDExample、あるいは 1 次元のワイブル領域のモデル。
    rho : array_like
        座標ごとの指数。
    kappa : array_like
        座標ごとの定数。
    exponents : array_like, optional
        g(x) = (x_1^{a_1}, ..., x_d^{a_d}) で写した後のモデルであれば a_i。
    """
    def __init__(self, base: DistributionModel, rho, kappa, exponents=None):
        self.base = base
        self.rho = np.atleast_1d(np.asarray(rho, dtype=float))
        self.kappa = np.atleast_1d(np.asarray(kappa, dtype=float))
        d = base.dim
        self.exponents = np.ones(d) if exponents is None else np.atleast_1d(np.asarray(exponents, dtype=float))

        if not (self.rho.size == self.kappa.size == self.exponents.size == d):
            raise ValueError(f"rho, kappa and exponents must have {d} entries.")
        if not (np.all(self.rho > 0) and np.all(self.kappa > 0) and np.all(self.exponents > 0)):
            raise ValueError("rho, kappa and exponents must be positive.")

        self.base_x_theta = np.array([ c.supremum for c in _components(base) ], dtype=float)
        self.x_theta = np.power(self.base_x_theta, self.exponents)

    @property
    def dim(self) -> int:
        return self.rho.size

    @property
    def alpha(self) -> float:
        return float(self.rho.sum())

    def U(self, t: float) -> float:
        return float(t) ** self.alpha

    def __repr__(self):
        return (f"{self.__class__.__name__}(base={self.base}, rho={self.rho.tolist()}, "
                f"kappa={self.kappa.tolist()}, exponents={self.exponents.tolist()})")

    def tail(self, i: int, s):
        """座標 i の P(x_θ,i - Y_i <= s)、Y = g(X)。"""
        c = _components(self.base)[i]
        a = self.exponents[i]
        s = np.asarray(s, dtype=float)
        if a == 1.0:
            return np.where(s > 0, c.weibull_tail(np.maximum(s, 1e-300)), 0.0)
        y = self.x_theta[i]
        inner = np.maximum(y - s, 0.0) ** (1.0 / a)
        u = self.base_x_theta[i] - inner
        return np.where(s > 0, c.weibull_tail(np.maximum(u, 1e-300)), 0.0)

    def as_dict(self) -> dict:
        return {
            'base': self.base.as_dict(),
            'rho': self.rho.tolist(),
            'kappa': self.kappa.tolist(),
            'exponents': self.exponents.tolist(),
            'x_theta': self.x_theta.tolist(),
            'alpha': self.alpha,
        }

    def json_name(self) -> str:
        return 'mvrv'

    @classmethod
    def from_dict(cls, spec: dict) -> MvrvModel:
        return cls(model_from_dict(spec['base']), spec['rho'], spec['kappa'], spec.get('exponents'))


def mvrv_model(model: DistributionModel, theta) -> MvrvModel:
    """正の成分を持つ θ に対して、x_θ での直積の極限測度を組み立てる。

    Raises
    ------
    AssumptionViolated
        θ に正でない成分があるか、座標がワイブル領域にない。
    """
    theta = _as_theta(theta)
    maximizer(model, theta)
    if not np.all(theta > 0):
        raise AssumptionViolated("the product limit measure requires theta with positive components.")

    comps = _components(model)
    rho, kappa = [], []
    for i, c in enumerate(comps):
        if c.weibull_index is None:
            raise AssumptionViolated(f"coordinate {i} ({c.family}) does not lie in the Weibull regime.")
        rho.append(c.weibull_index)
        kappa.append(c.tail_constant())
    return MvrvModel(model, rho, kappa)


def _check_rect(mvrv: MvrvModel, rect) -> Tuple[np.ndarray, np.ndarray]:
    lower, upper = rect
    lower = np.atleast_1d(np.asarray(lower, dtype=float))
    upper = np.atleast_1d(np.asarray(upper, dtype=float))
    if lower.shape != (mvrv.dim,) or upper.shape != (mvrv.dim,):
        raise ValueError(f"rectangle corners must have {mvrv.dim} entries.")
    if np.any(lower < 0) or np.any(upper < lower):
        raise ValueError("rectangle must satisfy 0 <= lower <= upper.")
    return lower, upper


def nu_rect(mvrv: MvrvModel, rect) -> float:
    """ν((a, b]) = Π_i κ_i (b_i^{ρ_i} - a_i^{ρ_i})。rect = (a, b)。"""
    lower, upper = _check_rect(mvrv, rect)
    if np.any(upper == lower):
        return 0.0
    return float(np.prod(mvrv.kappa * (upper ** mvrv.rho - lower ** mvrv.rho)))


def mvrv_ratio(mvrv: MvrvModel, t: float, rect) -> float:
    """(1/U(t)) P((x_θ - Y)/t ∈ rect) を座標ごとの閉形式の裾確率から計算する。"""
    lower, upper = _check_rect(mvrv, rect)
    if not t > 0:
        raise ValueError(f"t must be positive, got {t}.")

    comps = _components(mvrv.base)
    widths = np.array([ mvrv.x_theta[i] - c.infimum ** mvrv.exponents[i] if math.isfinite(c.infimum) else math.inf
                        for i, c in enumerate(comps) ])
    if np.any(t * upper > widths):
        raise ValueError(f"x_theta - t * rect leaves the support at t={t}; decrease t.")

    prob = 1.0
    for i in range(mvrv.dim):
        prob *= float(mvrv.tail(i, t * upper[i]) - mvrv.tail(i, t * lower[i]))
    return prob / mvrv.U(t)


def mvrv_ratio_mc(mvrv: MvrvModel, t: float, rect, draws: int, seed) -> Tuple[float, float]:
    """mvrv_ratio のモンテカルロ推定。(推定値, 二項標準誤差) を返す。"""
    lower, upper = _check_rect(mvrv, rect)
    if draws > MC_MAX_DRAWS:
        raise ValueError(f"draws must not exceed {MC_MAX_DRAWS}, got {draws}.")

    rng = make_rng(seed)
    x = mvrv.base.sample(int(draws), rng)
    y = np.power(x.reshape(int(draws), -1), mvrv.exponents)
    z = (mvrv.x_theta - y) / t
    hit = np.all((z > lower) & (z <= upper), axis=1)
    p = hit.mean()
    se = math.sqrt(p * (1.0 - p) / draws)
    u = mvrv.U(t)
    logger.debug(f"mvrv_ratio_mc: hits={hit.sum()}/{draws}, t={t}")
    return p / u, se / u


def nu_integral(mvrv: MvrvModel, theta) -> float:
    """∫ exp(-θ^T y) ν(dy) = Π_i κ_i Γ(1 + ρ_i) θ_i^{-ρ_i}。

    Raises
    ------
    AssumptionViolated
        θ に正でない成分があり積分が発散する。
    """
    theta = _as_theta(theta)
    if theta.size != mvrv.dim:
        raise ValueError(f"theta must have {mvrv.dim} entries.")
    if not np.all(theta > 0):
        raise AssumptionViolated("exp(-theta^T y) is not nu-integrable unless every theta_i > 0.")
    gammas = np.array([ math.gamma(1.0 + r) for r in mvrv.rho ])
    return float(np.prod(mvrv.kappa * gammas * theta ** (-mvrv.rho)))


def z_limit_target(mvrv: MvrvModel, theta) -> ProductGammaTarget:
    """密度 ∝ exp(-θ^T y) ν(dy) の法則。直積の ν では座標 i が Γ(ρ_i, θ_i) に従う独立な積。"""
    theta = _as_theta(theta)
    nu_integral(mvrv, theta)
    return ProductGammaTarget(mvrv.rho, theta)


def m_theta_limit_hd(mvrv: MvrvModel, theta) -> float:
    return 2.0 ** (-mvrv.alpha) / nu_integral(mvrv, theta)


def _tilt_for(mvrv: MvrvModel, theta: np.ndarray) -> TiltSpec:
    if np.all(mvrv.exponents == 1.0):
        return TiltSpec(theta)
    return TiltSpec(theta, g='power', exponents=mvrv.exponents)


def m_theta_asymptote_hd(mvrv: MvrvModel, theta, c: float) -> float:
    """U(1/c) M_{cθ}。c → ∞ で 2^{-α} / ∫ exp(-θ^T y) ν(dy) に近づく。"""
    theta = _as_theta(theta)
    if not c > 0:
        raise ValueError(f"c must be positive, got {c}.")
    return mvrv.U(1.0 / c) * m_theta_analytic(mvrv.base, _tilt_for(mvrv, c * theta))


def g_pushforward(mvrv: MvrvModel, exponents: Optional[Sequence[float]]=None) -> MvrvModel:
    """g(x) = (x_1^{a_1}, ..., x_d^{a_d}) で写した MvrvModel。
    座標 i の定数は κ_i (a_i x_{θ,i}^{a_i - 1})^{-ρ_i} に変わる。

    Raises
    ------
    AssumptionViolated
        a_i ≠ 1 の座標で x_θ,i = 0。
    """
    if exponents is None:
        return mvrv
    if isinstance(exponents, TiltSpec):
        if exponents.g == 'identity':
            return mvrv
        if exponents.g != 'power':
            raise ValueError("only per-coordinate power maps can be pushed forward.")
        exponents = exponents.exponents
    a = np.atleast_1d(np.asarray(exponents, dtype=float))
    if a.size != mvrv.dim or not np.all(a > 0):
        raise ValueError(f"exponents must be {mvrv.dim} positive numbers, got {a}.")

    x = mvrv.x_theta
    if np.any((x == 0) & (a != 1.0)):
        raise AssumptionViolated("power pushforward needs non-zero maximizer coordinates where the exponent differs from 1.")

    # 合成 (x^{a_old})^{a}: 基底の座標に対する指数は a_old * a
    total = mvrv.exponents * a
    derivative = a * np.power(x, a - 1.0)
    kappa = mvrv.kappa * derivative ** (-mvrv.rho)
    return MvrvModel(mvrv.base, mvrv.rho, kappa, exponents=total)
