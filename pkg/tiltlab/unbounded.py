"""非有界で軽い裾を持つ場合の漸近挙動 (ラプラス法)。

密度が f(x) ~ L exp(-K‖x‖^α) (α > 1) のとき、E[exp(cθ^T X)] は指数
Φ_c(x) = cθ^T x - K‖x‖^α の最大点 m_c の周りのガウス近似で評価できる。

正規化定数は L (2π)^{d/2} exp(Φ_c(m_c)) / sqrt(det(-∇²Φ_c)) とし、(2π)^{d/2} を含める。
標準正規分布ではこの値が厳密に exp(c²/2) になる。
"""
from __future__ import annotations

import logging
import math

import numpy as np

from dataclasses import dataclass

from .dist import DistributionModel
from .errors import AssumptionViolated
from .utils import JsonMixin

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TailProfile:
    alpha: float
    K: float
    L: float
    d: int = 1

    def __post_init__(self):
        if not self.alpha > 1:
            raise AssumptionViolated(f"tail profile requires alpha > 1, got {self.alpha}.")
        if not self.K > 0:
            raise ValueError(f"K must be positive, got {self.K}.")
        if not self.L > 0:
            raise ValueError(f"L must be positive, got {self.L}.")
        if int(self.d) != self.d or self.d < 1:
            raise ValueError(f"d must be a positive integer, got {self.d}.")

    @classmethod
    def from_model(cls, model: DistributionModel) -> TailProfile:
        tail = model.unbounded_tail
        if tail is None:
            raise AssumptionViolated(f"{model.family} carries no unbounded tail profile with alpha > 1.")
        return cls(tail.alpha, tail.K, tail.L, tail.d)

    @property
    def beta(self) -> float:
        """c の指数 α / (α - 1)。"""
        return self.alpha / (self.alpha - 1.0)

    def as_dict(self) -> dict:
        return { 'alpha': self.alpha, 'K': self.K, 'L': self.L, 'd': self.d }


@dataclass(frozen=True, eq=False)
class LaplaceGeometry(JsonMixin):
    c: float
    theta: np.ndarray
    m_c: np.ndarray
    phi_max: float
    neg_hessian: np.ndarray
    neg_hessian_sqrt: np.ndarray
    det_neg_hessian: float

    @property
    def d(self) -> int:
        return self.m_c.size

    def as_dict(self) -> dict:
        return {
            'c': self.c,
            'm_c': self.m_c.tolist(),
            'phi_max': self.phi_max,
            'det': self.det_neg_hessian,
        }

    def json_name(self) -> str:
        return 'geometry'


def _unit_theta(theta, d: int) -> np.ndarray:
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    if theta.size != d:
        raise ValueError(f"theta must have {d} entries, got {theta.size}.")
    if abs(np.linalg.norm(theta) - 1.0) > 1e-12:
        raise ValueError(f"theta must be a unit vector, got norm {np.linalg.norm(theta)}.")
    return theta


def phi(profile: TailProfile, c: float, x, theta=None):
    """Φ_c(x) = cθ^T x - K‖x‖^α。theta を省略すると第 1 基底ベクトル。x は (d,) または (n, d)。"""
    if theta is None:
        theta = np.eye(profile.d)[0]
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    x = np.asarray(x, dtype=float)
    if profile.d == 1:
        return c * theta[0] * x - profile.K * np.abs(x) ** profile.alpha
    norm = np.linalg.norm(x, axis=-1)
    return c * (x @ theta) - profile.K * norm ** profile.alpha


def laplace_geometry(profile: TailProfile, c: float, theta) -> LaplaceGeometry:
    """Φ_c の最大点 m_c、最大値、負のヘッセ行列とその対称平方根、行列式。"""
    if not c > 0:
        raise ValueError(f"c must be positive, got {c}.")
    alpha, K, d = profile.alpha, profile.K, profile.d
    theta = _unit_theta(theta, d)

    r = (c / (alpha * K)) ** (1.0 / (alpha - 1.0))
    m_c = r * theta
    phi_max = (alpha - 1.0) * alpha ** (-profile.beta) * c ** profile.beta * K ** (-1.0 / (alpha - 1.0))

    # -∇²Φ_c(m_c) = Kα‖m‖^{α-2} (I + (α-2) θθ^T)。θ 方向の固有値だけが α-1 倍
    scale = K * alpha * r ** (alpha - 2.0)
    neg_hessian = scale * (np.eye(d) + (alpha - 2.0) * np.outer(theta, theta))
    eigval, eigvec = np.linalg.eigh(neg_hessian)
    if np.any(eigval <= 0):
        raise AssumptionViolated("negative Hessian is not positive definite.")
    neg_hessian_sqrt = (eigvec * np.sqrt(eigval)) @ eigvec.T
    det = (K * alpha) ** d * r ** (d * (alpha - 2.0)) * (alpha - 1.0)

    return LaplaceGeometry(
        c=float(c), theta=theta, m_c=m_c, phi_max=float(phi_max),
        neg_hessian=neg_hessian, neg_hessian_sqrt=neg_hessian_sqrt, det_neg_hessian=float(det),
    )


def log_laplace_normalizer(profile: TailProfile, c: float, theta) -> float:
    geom = laplace_geometry(profile, c, theta)
    return (math.log(profile.L) + 0.5 * profile.d * math.log(2.0 * math.pi)
            + geom.phi_max - 0.5 * math.log(geom.det_neg_hessian))


def laplace_normalizer(profile: TailProfile, c: float, theta) -> float:
    """E[exp(cθ^T X)] の漸近近似 L (2π)^{d/2} exp(Φ_c(m_c)) / sqrt(det)。"""
    geom = laplace_geometry(profile, c, theta)
    return profile.L * (2.0 * math.pi) ** (0.5 * profile.d) * math.exp(geom.phi_max) / math.sqrt(geom.det_neg_hessian)


@dataclass(frozen=True)
class GrowthConstants(JsonMixin):
    """M_c ≈ q exp(p c^{α/(α-1)}) c^{poly_exponent}。

    q_stated は (2π)^{d/2} の正規化を欠いた定数で、標準正規分布では (2π)^{-1/2} になる。
    比較のためだけに保持する。
    """
    p: float
    q_corrected: float
    q_stated: float
    poly_exponent: float
    beta: float

    def as_dict(self) -> dict:
        return {
            'p': self.p, 'q_corrected': self.q_corrected, 'q_stated': self.q_stated,
            'poly_exponent': self.poly_exponent, 'beta': self.beta,
        }

    def json_name(self) -> str:
        return 'growth_constants'


def m_growth_constants(profile: TailProfile) -> GrowthConstants:
    alpha, K, L, d = profile.alpha, profile.K, profile.L, profile.d
    beta = profile.beta

    p = (alpha - 1.0) * alpha ** (-beta) * K ** (-1.0 / (alpha - 1.0)) * (2.0 ** beta - 2.0)
    poly_exponent = d * (alpha - 2.0) / (2.0 * alpha - 2.0)
    common = math.sqrt(alpha - 1.0) * 2.0 ** (-poly_exponent) * (alpha * K) ** (d / (2.0 * alpha - 2.0))
    q_corrected = common / (L * (2.0 * math.pi) ** (0.5 * d))
    q_stated = L * common

    return GrowthConstants(p=p, q_corrected=q_corrected, q_stated=q_stated,
                           poly_exponent=poly_exponent, beta=beta)


def log_m_theta_laplace(profile: TailProfile, c: float) -> float:
    """log M_c の漸近形 p c^{α/(α-1)} + poly_exponent log c + log q_corrected。"""
    if not c > 0:
        raise ValueError(f"c must be positive, got {c}.")
    gc = m_growth_constants(profile)
    return gc.p * c ** gc.beta + gc.poly_exponent * math.log(c) + math.log(gc.q_corrected)


def gaussian_limit_transform(samples_tilted, geometry: LaplaceGeometry) -> np.ndarray:
    """(-∇²Φ_c)^{1/2} (x - m_c) を各サンプルに適用する。"""
    x = np.asarray(samples_tilted, dtype=float)
    d = geometry.d
    if d == 1 and x.ndim == 1:
        return geometry.neg_hessian_sqrt[0, 0] * (x - geometry.m_c[0])
    if x.ndim != 2 or x.shape[1] != d:
        raise ValueError(f"dimension mismatch: samples have shape {x.shape}, geometry has d={d}.")
    return (x - geometry.m_c[None, :]) @ geometry.neg_hessian_sqrt.T
