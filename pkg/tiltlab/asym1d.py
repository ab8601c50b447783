"""1 次元のワイブル領域での漸近挙動。

θ → ∞ の極限は有限個の θ の列 (既定では {1e2, 1e3, 1e4}) に沿った比の値と、
誤差が単調に減るかどうかで判定する。
"""
from __future__ import annotations

import logging
import math

import numpy as np

from dataclasses import dataclass, field
from scipy import special

from typing import Callable, List, Sequence

from .dist import DistributionModel
from .errors import AssumptionViolated
from .targets import GammaTarget
from .tilt import TiltedLaw, TiltSpec, log_expectation, log_mgf, m_theta_analytic
from .utils import JsonMixin

logger = logging.getLogger(__name__)

DEFAULT_THETA_GRID = (1e2, 1e3, 1e4)


@dataclass
class AsymptoteCheck(JsonMixin):
    """比の列とその極限値。

    converged は |ratio - limit| が列に沿って増えず、
    最後の相対誤差が tolerance 以下であるときに True。
    """
    theta_grid: List[float]
    ratio_values: List[float]
    limit_value: float
    tolerance: float = 0.05
    name: str = 'asymptote'
    converged: bool = field(init=False)

    def __post_init__(self):
        self.theta_grid = [ float(t) for t in self.theta_grid ]
        self.ratio_values = [ float(r) for r in self.ratio_values ]
        if len(self.theta_grid) != len(self.ratio_values):
            raise ValueError("theta_grid and ratio_values must have the same length.")
        if not all(math.isfinite(r) for r in self.ratio_values):
            raise ValueError(f"ratio values must be finite, got {self.ratio_values}.")
        if not self.limit_value > 0:
            raise ValueError(f"limit value must be positive, got {self.limit_value}.")

        errors = self.abs_errors
        monotone = all(e1 <= e0 for e0, e1 in zip(errors[:-1], errors[1:]))
        self.converged = bool(monotone and errors[-1] <= self.tolerance * self.limit_value)

    @property
    def abs_errors(self) -> List[float]:
        return [ abs(r - self.limit_value) for r in self.ratio_values ]

    @property
    def relative_errors(self) -> List[float]:
        return [ e / self.limit_value for e in self.abs_errors ]

    def rows(self) -> List[dict]:
        return [
            { 'theta': t, 'ratio': r, 'target': self.limit_value, 'abs_error': e }
            for t, r, e in zip(self.theta_grid, self.ratio_values, self.abs_errors)
        ]

    def as_dict(self) -> dict:
        return { 'name': self.name, 'converged': self.converged, 'rows': self.rows() }

    def json_name(self) -> str:
        return self.name


def karamata_limit(alpha: float) -> float:
    return math.gamma(1.0 + alpha)


def m_theta_limit_1d(alpha: float) -> float:
    return 2.0 ** (-alpha) / math.gamma(1.0 + alpha)


def tail_fraction_limit(alpha: float, C: float) -> float:
    """正則化下側不完全ガンマ関数 P(α, C)。"""
    return float(special.gammainc(alpha, C))


def pushforward_index(alpha: float, beta: float) -> float:
    """指数 α のワイブル領域にある X を、上端での増分が指数 β で正則変動する g で写した g(X) の指数。"""
    if not (alpha > 0 and beta > 0):
        raise ValueError(f"indices must be positive, got alpha={alpha}, beta={beta}.")
    return alpha / beta


def _check_theta(model: DistributionModel, theta: float):
    if model.weibull_index is None:
        raise AssumptionViolated(f"{model.family} does not lie in the Weibull regime.")
    if not model.is_bounded or model.dim != 1:
        raise AssumptionViolated(f"{model.family} is not a bounded 1-d model.")
    width = model.supremum - model.infimum
    if not theta > 1.0 / width:
        raise ValueError(f"theta must exceed 1/(M - inf support) = {1.0 / width}, got {theta}.")


def karamata_ratio(model: DistributionModel, theta: float) -> float:
    """E[e^{θX}] / (e^{θM} (1 - F(M - 1/θ)))。θ → ∞ で Γ(1 + α) に近づく。"""
    _check_theta(model, theta)
    log_num = log_mgf(model, TiltSpec(theta))
    log_den = theta * model.supremum + math.log(float(model.weibull_tail(1.0 / theta)))
    return math.exp(log_num - log_den)


def m_theta_asymptote_1d(model: DistributionModel, theta: float) -> float:
    """(1 - F(M - 1/θ)) M_θ。θ → ∞ で 2^{-α} / Γ(1 + α) に近づく。"""
    _check_theta(model, theta)
    return float(model.weibull_tail(1.0 / theta)) * m_theta_analytic(model, TiltSpec(theta))


def tail_fraction(model: DistributionModel, theta: float, C: float) -> float:
    """E[e^{θX} 1{X > M - C/θ}] / E[e^{θX}]。θ → ∞ で P(α, C) に近づく。"""
    if not C > 0:
        raise ValueError(f"C must be positive, got {C}.")
    _check_theta(model, theta)
    lower = model.supremum - C / theta
    if not lower > model.infimum:
        raise ValueError(f"M - C/theta = {lower} is outside the support; increase theta.")

    log_part = log_expectation(model, lambda x: theta * np.asarray(x), lower=lower)
    log_all = log_mgf(model, TiltSpec(theta))
    return min(1.0, math.exp(log_part - log_all))


def regular_variation_ratio(model: DistributionModel, t: float, u: float) -> float:
    """weibull_tail(t u) / weibull_tail(u)。u → 0 で t^α に近づく。"""
    return float(model.weibull_tail(t * u) / model.weibull_tail(u))


def gamma_limit_target(alpha: float) -> GammaTarget:
    """θ(M - X_θ) の極限 Γ(α, 1)。"""
    if not alpha > 0:
        raise ValueError(f"alpha must be positive, got {alpha}.")
    return GammaTarget(alpha, 1.0)


def scaled_tilted_cdf(model: DistributionModel, theta: float) -> Callable:
    """y ↦ P(θ(M - X_θ) <= y) = 1 - F_θ(M - y/θ)。連続モデル用。"""
    _check_theta(model, theta)
    if model.is_discrete:
        raise ValueError("scaled_tilted_cdf requires a continuous model.")
    law = TiltedLaw(model, TiltSpec(theta))

    def cdf(y):
        return 1.0 - np.asarray(law.cdf(model.supremum - np.asarray(y, dtype=float) / theta), dtype=float)

    return cdf


def gamma_limit_distance(model: DistributionModel, theta: float, points: int=4001) -> float:
    """θ(M - X_θ) の厳密な法則と Γ(α, 1) の sup 距離。Γ(α, 1) の分位点の格子で測る。"""
    target = gamma_limit_target(model.weibull_index)
    exact = scaled_tilted_cdf(model, theta)
    y = target.quantile(np.linspace(1e-6, 1.0 - 1e-6, points))
    return float(np.max(np.abs(exact(y) - target.cdf(y))))


def check_asymptote(func: Callable[[DistributionModel, float], float], model: DistributionModel,
                    theta_grid: Sequence[float]=DEFAULT_THETA_GRID, limit: float=None,
                    tolerance: float=0.05, name: str=None) -> AsymptoteCheck:
    """func(model, θ) を θ の列に沿って評価し、limit への収束を判定する。"""
    values = []
    for theta in theta_grid:
        values.append(func(model, theta))
        logger.debug(f"{getattr(func, '__name__', 'func')}({model}, {theta}) = {values[-1]}")

    return AsymptoteCheck(
        theta_grid=list(theta_grid), ratio_values=values, limit_value=limit,
        tolerance=tolerance, name=name or getattr(func, '__name__', 'asymptote'),
    )


def check_regular_variation(model: DistributionModel, t: float,
                            u_grid: Sequence[float]=(1e-2, 1e-3, 1e-4),
                            tolerance: float=0.01) -> AsymptoteCheck:
    """weibull_tail の正則変動を u の列に沿って確かめる。grid の列には 1/u を入れる。"""
    alpha = model.weibull_index
    if alpha is None:
        raise AssumptionViolated(f"{model.family} does not lie in the Weibull regime.")
    values = [ regular_variation_ratio(model, t, u) for u in u_grid ]
    return AsymptoteCheck(
        theta_grid=[ 1.0 / u for u in u_grid ], ratio_values=values,
        limit_value=t ** alpha, tolerance=tolerance, name='regular_variation',
    )
