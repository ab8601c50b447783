"""確率分布のファミリー。

各ファミリーは厳密な CDF / 分位点 / サンプラーと、裾に関するメタデータ
(有界な台の上端でのワイブル指数、あるいは非有界な軽い裾の (α, K, L)) を持つ。
モデルは不変であり、乱数はすべて呼び出し側が渡す Generator から引く。
"""
from __future__ import annotations

import logging
import math

import numpy as np

from dataclasses import dataclass, field
from functools import cached_property
from scipy import special, stats

from typing import Optional, Tuple

from .errors import AssumptionViolated
from .rng import make_rng

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class UnboundedTail:
    """f(x) / exp(-K‖x‖^α) → L となる非有界な裾。"""
    alpha: float
    K: float
    L: float
    d: int

    def as_dict(self) -> dict:
        return { 'alpha': self.alpha, 'K': self.K, 'L': self.L, 'd': self.d }


class DistributionModel:
    """分布モデルの基底クラス。

    サブクラスは family と dim を持ち、_sample / cdf / quantile などを実装する。
    d = 1 のモデルは形状 (n,) の配列を、d > 1 のモデルは (n, d) の配列を返す。
    """
    family: str = ''
    is_discrete: bool = False

    @property
    def dim(self) -> int:
        return 1

    @property
    def weibull_index(self) -> Optional[float]:
        return None

    @property
    def unbounded_tail(self) -> Optional[UnboundedTail]:
        return None

    @property
    def infimum(self):
        return -math.inf

    @property
    def supremum(self):
        return math.inf

    @property
    def is_bounded(self) -> bool:
        return bool(np.all(np.isfinite(self.supremum)))

    def params(self) -> dict:
        return {}

    def as_dict(self) -> dict:
        return { 'family': self.family, 'params': self.params() }

    def _sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        raise NotImplementedError

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        if n < 1:
            raise ValueError(f"n must be positive, got {n}.")
        return self._sample(int(n), rng)

    def cdf(self, x):
        raise NotImplementedError

    def quantile(self, p):
        raise NotImplementedError(f"{self.family} has no quantile function.")

    def pdf(self, x):
        return np.exp(self.logpdf(x))

    def logpdf(self, x):
        raise ValueError(f"{self.family} has no density.")

    def _check_weibull(self):
        if self.weibull_index is None:
            raise AssumptionViolated(f"{self.family} does not lie in the Weibull regime.")

    def _check_u(self, u):
        u = np.asarray(u, dtype=float)
        width = self.supremum - self.infimum
        if np.any(u <= 0) or np.any(u > width):
            raise ValueError(f"u must satisfy 0 < u <= {width}.")
        return u

    def weibull_tail(self, u):
        """1 - F(M - u) を返す。"""
        self._check_weibull()
        return self._weibull_tail(self._check_u(u))

    def _weibull_tail(self, u):
        return 1.0 - self.cdf(self.supremum - u)

    def tail_constant(self) -> float:
        """weibull_tail(u) / u^α の u → 0 での極限。"""
        self._check_weibull()
        return self._tail_constant()

    def _tail_constant(self) -> float:
        raise NotImplementedError

    def tail_quantile(self, q):
        """weibull_tail(u) = q となる u を返す。"""
        self._check_weibull()
        q = np.asarray(q, dtype=float)
        if np.any(q <= 0) or np.any(q > 1):
            raise ValueError("q must lie in (0, 1].")
        return self._tail_quantile(q)

    def _tail_quantile(self, q):
        return self.supremum - self.quantile(1.0 - q)

    def __str__(self):
        items = ', '.join(f"{k}={v}" for k, v in self.params().items())
        return f"{self.family}({items})"


def _check_p(p):
    p = np.asarray(p, dtype=float)
    if np.any(~(p > 0)) or np.any(~(p < 1)):
        raise ValueError("p must lie in the open interval (0, 1).")
    return p


class _ScipyModel(DistributionModel):
    """scipy.stats の凍結分布に委譲する 1 次元連続モデル。"""

    @cached_property
    def rv(self):
        return self._make_rv()

    def _make_rv(self):
        raise NotImplementedError

    def _sample(self, n, rng):
        return self.rv.rvs(size=n, random_state=rng)

    def cdf(self, x):
        return self.rv.cdf(x)

    def quantile(self, p):
        return self.rv.ppf(_check_p(p))

    def logpdf(self, x):
        return self.rv.logpdf(x)


@dataclass(frozen=True, eq=True)
class Uniform01(_ScipyModel):
    family = 'Uniform01'

    def _make_rv(self):
        return stats.uniform()

    @property
    def weibull_index(self):
        return 1.0

    @property
    def infimum(self):
        return 0.0

    @property
    def supremum(self):
        return 1.0

    def _sample(self, n, rng):
        return rng.random(n)

    def _weibull_tail(self, u):
        return u

    def _tail_constant(self):
        return 1.0

    def _tail_quantile(self, q):
        return q


@dataclass(frozen=True, eq=True)
class SquaredUniform(_ScipyModel):
    """V ~ Uniform01 に対する V^2 の分布。"""
    family = 'SquaredUniform'

    def _make_rv(self):
        return stats.beta(0.5, 1.0)

    @property
    def weibull_index(self):
        return 1.0

    @property
    def infimum(self):
        return 0.0

    @property
    def supremum(self):
        return 1.0

    def _sample(self, n, rng):
        return rng.random(n) ** 2

    def cdf(self, x):
        return np.sqrt(np.clip(x, 0.0, 1.0))

    def quantile(self, p):
        return _check_p(p) ** 2

    def _weibull_tail(self, u):
        # 1 - sqrt(1 - u) を桁落ちなしに
        return u / (1.0 + np.sqrt(1.0 - u))

    def _tail_constant(self):
        return 0.5

    def _tail_quantile(self, q):
        return q * (2.0 - q)


@dataclass(frozen=True, eq=True)
class Beta(_ScipyModel):
    a: float
    b: float
    family = 'Beta'

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0):
            raise ValueError(f"Beta parameters must be positive, got a={self.a}, b={self.b}.")

    def _make_rv(self):
        return stats.beta(self.a, self.b)

    @cached_property
    def reflected(self):
        # 1 - X ~ Beta(b, a)
        return stats.beta(self.b, self.a)

    def params(self):
        return { 'a': self.a, 'b': self.b }

    @property
    def weibull_index(self):
        return float(self.b)

    @property
    def infimum(self):
        return 0.0

    @property
    def supremum(self):
        return 1.0

    def _sample(self, n, rng):
        return rng.beta(self.a, self.b, size=n)

    def _weibull_tail(self, u):
        return self.reflected.cdf(u)

    def _tail_constant(self):
        return float(1.0 / (self.b * special.beta(self.a, self.b)))

    def _tail_quantile(self, q):
        return self.reflected.ppf(q)


@dataclass(frozen=True, eq=True)
class TruncExp(_ScipyModel):
    """Exp(λ) を X <= M で切断した分布。"""
    lam: float
    M: float
    family = 'TruncExp'

    def __post_init__(self):
        if not (self.lam > 0 and self.M > 0):
            raise ValueError(f"TruncExp requires lambda > 0 and M > 0, got {self.lam}, {self.M}.")

    def _make_rv(self):
        return stats.truncexpon(b=self.lam * self.M, scale=1.0 / self.lam)

    def params(self):
        return { 'lambda': self.lam, 'M': self.M }

    @property
    def weibull_index(self):
        return 1.0

    @property
    def infimum(self):
        return 0.0

    @property
    def supremum(self):
        return float(self.M)

    def _weibull_tail(self, u):
        return np.expm1(self.lam * u) / np.expm1(self.lam * self.M)

    def _tail_constant(self):
        return float(self.lam / np.expm1(self.lam * self.M))

    def _tail_quantile(self, q):
        return np.log1p(q * np.expm1(self.lam * self.M)) / self.lam


@dataclass(frozen=True, eq=True)
class TruncNormal(_ScipyModel):
    """N(mu, sigma^2) を X <= M で切断した分布。"""
    mu: float
    sigma: float
    M: float
    family = 'TruncNormal'

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}.")

    @property
    def _b(self):
        return (self.M - self.mu) / self.sigma

    def _make_rv(self):
        return stats.truncnorm(a=-np.inf, b=self._b, loc=self.mu, scale=self.sigma)

    def params(self):
        return { 'mu': self.mu, 'sigma': self.sigma, 'M': self.M }

    @property
    def weibull_index(self):
        return 1.0

    @property
    def supremum(self):
        return float(self.M)

    def _weibull_tail(self, u):
        b = self._b
        return (special.ndtr(b) - special.ndtr(b - u / self.sigma)) / special.ndtr(b)

    def _tail_constant(self):
        b = self._b
        return float(np.exp(-0.5 * b * b) / (math.sqrt(2 * math.pi) * self.sigma * special.ndtr(b)))

    def _tail_quantile(self, q):
        b = self._b
        return self.sigma * (b - special.ndtri_exp(special.log_ndtr(b) + np.log1p(-q)))


@dataclass(frozen=True, eq=True)
class Exponential(_ScipyModel):
    lam: float
    family = 'Exponential'

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError(f"lambda must be positive, got {self.lam}.")

    def _make_rv(self):
        return stats.expon(scale=1.0 / self.lam)

    def params(self):
        return { 'lambda': self.lam }

    @property
    def infimum(self):
        return 0.0

    def _sample(self, n, rng):
        return rng.exponential(1.0 / self.lam, size=n)


@dataclass(frozen=True, eq=True)
class PowerExponential(_ScipyModel):
    """密度 L exp(-K|x|^α) を持つ ℝ 上の分布。L = α K^{1/α} / (2 Γ(1/α))。"""
    alpha: float
    K: float
    family = 'PowerExponential'

    def __post_init__(self):
        if not self.alpha > 1:
            raise AssumptionViolated(f"PowerExponential requires alpha > 1, got {self.alpha}.")
        if not self.K > 0:
            raise ValueError(f"K must be positive, got {self.K}.")

    def _make_rv(self):
        return stats.gennorm(beta=self.alpha, scale=self.K ** (-1.0 / self.alpha))

    def params(self):
        return { 'alpha': self.alpha, 'K': self.K }

    @property
    def L(self) -> float:
        return self.alpha * self.K ** (1.0 / self.alpha) / (2.0 * math.gamma(1.0 / self.alpha))

    @property
    def unbounded_tail(self):
        return UnboundedTail(alpha=float(self.alpha), K=float(self.K), L=self.L, d=1)


@dataclass(frozen=True, eq=True)
class DiscreteUniform(DistributionModel):
    """有限個の値の上の一様分布。重複した値はその分だけ質量を持つ。"""
    values: Tuple[float, ...]
    family = 'DiscreteUniform'
    is_discrete = True

    def __post_init__(self):
        values = tuple(sorted(float(v) for v in self.values))
        if len(values) == 0:
            raise ValueError("DiscreteUniform requires at least one value.")
        if not all(math.isfinite(v) for v in values):
            raise ValueError("DiscreteUniform values must be finite.")
        object.__setattr__(self, 'values', values)

    @cached_property
    def support(self) -> np.ndarray:
        return np.asarray(self.values)

    @cached_property
    def _cum(self) -> np.ndarray:
        k = len(self.values)
        return np.arange(1, k + 1) / k

    def params(self):
        return { 'values': list(self.values) }

    @property
    def infimum(self):
        return self.values[0]

    @property
    def supremum(self):
        return self.values[-1]

    def _sample(self, n, rng):
        return self.support[rng.integers(0, len(self.values), size=n)]

    def cdf(self, x):
        return np.searchsorted(self.support, x, side='right') / len(self.values)

    def quantile(self, p):
        # 右連続な一般化逆関数 inf{x : F(x) >= p}
        idx = np.searchsorted(self._cum, _check_p(p), side='left')
        return self.support[idx]


@dataclass(frozen=True, eq=True)
class StdNormalVec(DistributionModel):
    d: int = 1
    family = 'StdNormalVec'

    def __post_init__(self):
        if int(self.d) != self.d or self.d < 1:
            raise ValueError(f"d must be a positive integer, got {self.d}.")

    @property
    def dim(self):
        return int(self.d)

    def params(self):
        return { 'd': self.dim }

    @property
    def supremum(self):
        return np.full(self.dim, np.inf) if self.dim > 1 else math.inf

    @property
    def infimum(self):
        return np.full(self.dim, -np.inf) if self.dim > 1 else -math.inf

    @property
    def unbounded_tail(self):
        return UnboundedTail(alpha=2.0, K=0.5, L=(2 * math.pi) ** (-self.dim / 2), d=self.dim)

    def _sample(self, n, rng):
        if self.dim == 1:
            return rng.standard_normal(n)
        return rng.standard_normal((n, self.dim))

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        if self.dim == 1:
            return special.ndtr(x)
        return np.prod(special.ndtr(x), axis=-1)

    def quantile(self, p):
        if self.dim != 1:
            raise ValueError("quantile is defined only for d = 1.")
        return special.ndtri(_check_p(p))

    def logpdf(self, x):
        x = np.asarray(x, dtype=float)
        if self.dim == 1:
            return -0.5 * x * x - 0.5 * math.log(2 * math.pi)
        return -0.5 * np.sum(x * x, axis=-1) - 0.5 * self.dim * math.log(2 * math.pi)


@dataclass(frozen=True, eq=True)
class ProductVec(DistributionModel):
    """独立な 1 次元モデルの直積。"""
    components: Tuple[DistributionModel, ...] = field(default_factory=tuple)
    family = 'ProductVec'

    def __post_init__(self):
        components = tuple(self.components)
        if len(components) == 0:
            raise ValueError("ProductVec requires at least one component.")
        for c in components:
            if not isinstance(c, DistributionModel) or c.dim != 1:
                raise ValueError(f"ProductVec components must be 1-d models, got {c}.")
        object.__setattr__(self, 'components', components)

    @property
    def dim(self):
        return len(self.components)

    def params(self):
        return { 'components': [ c.as_dict() for c in self.components ] }

    @property
    def infimum(self):
        return np.array([ c.infimum for c in self.components ], dtype=float)

    @property
    def supremum(self):
        return np.array([ c.supremum for c in self.components ], dtype=float)

    @property
    def weibull_indices(self) -> Optional[np.ndarray]:
        indices = [ c.weibull_index for c in self.components ]
        if any(a is None for a in indices):
            return None
        return np.array(indices, dtype=float)

    def _sample(self, n, rng):
        return np.column_stack([ c.sample(n, rng) for c in self.components ])

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        cols = [ np.asarray(c.cdf(x[..., i]), dtype=float) for i, c in enumerate(self.components) ]
        return np.prod(np.stack(cols, axis=-1), axis=-1)

    def logpdf(self, x):
        x = np.asarray(x, dtype=float)
        return sum(np.asarray(c.logpdf(x[..., i]), dtype=float) for i, c in enumerate(self.components))

    def __str__(self):
        return f"{self.family}({', '.join(str(c) for c in self.components)})"


class TwoDExample(ProductVec):
    """第 1 成分が Uniform01、第 2 成分が独立な Uniform01 の二乗であるベクトル。"""
    family = 'TwoDExample'

    def __init__(self):
        super().__init__(components=(Uniform01(), SquaredUniform()))

    def params(self):
        return {}

    def __repr__(self):
        return 'TwoDExample()'

    def __str__(self):
        return 'TwoDExample()'


def model_from_dict(spec: dict) -> DistributionModel:
    """JSON の {family, params} からモデルを作る。

    Raises
    ------
    ValueError
        family が未知であるか、params が不正。
    """
    if not isinstance(spec, dict) or 'family' not in spec:
        raise ValueError(f"model spec must be an object with 'family', got {spec!r}.")

    family = spec['family']
    params = dict(spec.get('params', {}) or {})

    try:
        if family == 'Uniform01':
            return Uniform01()
        if family == 'SquaredUniform':
            return SquaredUniform()
        if family == 'Beta':
            return Beta(float(params['a']), float(params['b']))
        if family == 'TruncExp':
            return TruncExp(float(params['lambda']), float(params['M']))
        if family == 'TruncNormal':
            return TruncNormal(float(params['mu']), float(params['sigma']), float(params['M']))
        if family == 'Exponential':
            return Exponential(float(params['lambda']))
        if family == 'PowerExponential':
            return PowerExponential(float(params['alpha']), float(params['K']))
        if family == 'DiscreteUniform':
            return DiscreteUniform(tuple(params['values']))
        if family == 'StdNormalVec':
            return StdNormalVec(int(params.get('d', 1)))
        if family == 'ProductVec':
            return ProductVec(tuple(model_from_dict(c) for c in params['components']))
        if family == 'TwoDExample':
            return TwoDExample()
    except KeyError as e:
        raise ValueError(f"missing parameter {e} for family '{family}'.") from e

    raise ValueError(f"unknown family: '{family}'.")


def sample(model: DistributionModel, n: int, seed) -> np.ndarray:
    """モデルから n 個の独立なサンプルを引く。(model, n, seed) が同じなら結果も同じ。"""
    rng = make_rng(seed)
    logger.debug(f"sample {model} n={n}")
    return model.sample(n, rng)


def cdf(model: DistributionModel, x):
    return model.cdf(x)


def quantile(model: DistributionModel, p):
    return model.quantile(p)


def pdf(model: DistributionModel, x):
    return model.pdf(x)


def logpdf(model: DistributionModel, x):
    return model.logpdf(x)


def weibull_tail(model: DistributionModel, u):
    if not model.is_bounded:
        raise AssumptionViolated(f"{model.family} is unbounded and has no Weibull tail.")
    return model.weibull_tail(u)


def tail_constant(model: DistributionModel) -> float:
    return model.tail_constant()


def tail_quantile(model: DistributionModel, q):
    return model.tail_quantile(q)
