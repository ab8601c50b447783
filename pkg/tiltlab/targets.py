"""スケーリング極限の参照分布 (LimitTarget)。"""
from __future__ import annotations

import numpy as np

from functools import cached_property
from scipy import stats

from typing import Sequence

from .utils import JsonMixin


class LimitTarget(JsonMixin):
    """CDF とサンプラーを持つ参照極限分布の基底クラス。"""
    kind: str = ''

    @property
    def dim(self) -> int:
        return 1

    def cdf(self, x):
        raise NotImplementedError

    def pdf(self, x):
        raise NotImplementedError(f"{self.kind} target has no density.")

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        raise NotImplementedError

    def params(self) -> dict:
        return {}

    def as_dict(self) -> dict:
        return { 'kind': self.kind, 'params': self.params() }

    def json_name(self) -> str:
        return f"target_{self.kind}"

    def __repr__(self):
        items = ', '.join(f"{k}={v}" for k, v in self.params().items())
        return f"{self.__class__.__name__}({items})"


class _ScipyTarget(LimitTarget):

    @cached_property
    def rv(self):
        return self._make_rv()

    def _make_rv(self):
        raise NotImplementedError

    def cdf(self, x):
        return self.rv.cdf(x)

    def sf(self, x):
        return self.rv.sf(x)

    def pdf(self, x):
        return self.rv.pdf(x)

    def quantile(self, p):
        return self.rv.ppf(p)

    def sample(self, n, rng):
        return self.rv.rvs(size=n, random_state=rng)


class GammaTarget(_ScipyTarget):
    """Γ(α, rate)。CDF は正則化下側不完全ガンマ関数。"""
    kind = 'gamma'

    def __init__(self, alpha: float, rate: float=1.0):
        if not alpha > 0:
            raise ValueError(f"alpha must be positive, got {alpha}.")
        if not rate > 0:
            raise ValueError(f"rate must be positive, got {rate}.")
        self.alpha = float(alpha)
        self.rate = float(rate)

    def _make_rv(self):
        return stats.gamma(a=self.alpha, scale=1.0 / self.rate)

    def sample(self, n, rng):
        return rng.gamma(self.alpha, 1.0 / self.rate, size=n)

    def params(self):
        return { 'alpha': self.alpha, 'rate': self.rate }


class WeibullMinTarget(_ScipyTarget):
    """生存関数 exp(-t^α) を持つ正の半直線上の分布。
    (M - max) / (M - F^{-1}(1 - 1/n)) の極限であり、-W_α を正の側に移したもの。"""
    kind = 'weibull'

    def __init__(self, alpha: float):
        if not alpha > 0:
            raise ValueError(f"alpha must be positive, got {alpha}.")
        self.alpha = float(alpha)

    def _make_rv(self):
        return stats.weibull_min(c=self.alpha)

    def sf(self, x):
        x = np.asarray(x, dtype=float)
        return np.exp(-np.power(np.maximum(x, 0.0), self.alpha))

    def params(self):
        return { 'alpha': self.alpha }


class GaussianTarget(LimitTarget):
    """d 次元の標準正規分布。CDF は左下の象限の確率。"""
    kind = 'gaussian'

    def __init__(self, d: int=1):
        if d < 1:
            raise ValueError(f"d must be positive, got {d}.")
        self.d = int(d)

    @property
    def dim(self):
        return self.d

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        if self.d == 1:
            return stats.norm.cdf(x)
        return np.prod(stats.norm.cdf(x), axis=-1)

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        if self.d == 1:
            return stats.norm.pdf(x)
        return np.prod(stats.norm.pdf(x), axis=-1)

    def sample(self, n, rng):
        if self.d == 1:
            return rng.standard_normal(n)
        return rng.standard_normal((n, self.d))

    def params(self):
        return { 'd': self.d }


class ProductGammaTarget(LimitTarget):
    """独立な座標 Γ(ρ_i, θ_i) の積。密度 ∝ exp(-θ^T y) ν(dy) の積測度版。"""
    kind = 'product_gamma'

    def __init__(self, shapes: Sequence[float], rates: Sequence[float]):
        shapes = np.asarray(shapes, dtype=float)
        rates = np.asarray(rates, dtype=float)
        if shapes.shape != rates.shape or shapes.ndim != 1:
            raise ValueError("shapes and rates must be 1-d arrays of the same length.")
        if not (np.all(shapes > 0) and np.all(rates > 0)):
            raise ValueError("shapes and rates must be positive.")
        self.shapes = shapes
        self.rates = rates

    @property
    def dim(self):
        return self.shapes.size

    @cached_property
    def marginals(self):
        return [ GammaTarget(a, r) for a, r in zip(self.shapes, self.rates) ]

    def marginal(self, i: int) -> GammaTarget:
        return self.marginals[i]

    def cdf(self, x):
        """[0, x_1] x ... x [0, x_d] の確率。"""
        x = np.asarray(x, dtype=float)
        cols = [ np.asarray(m.cdf(x[..., i]), dtype=float) for i, m in enumerate(self.marginals) ]
        return np.prod(np.stack(cols, axis=-1), axis=-1)

    def rect_mass(self, lower, upper) -> float:
        """直方体 (lower, upper] の確率。上端に math.inf を使ってもよい。"""
        lower = np.asarray(lower, dtype=float)
        upper = np.asarray(upper, dtype=float)
        if np.any(upper < lower):
            raise ValueError("rectangle upper corner must dominate the lower corner.")
        mass = 1.0
        for i, m in enumerate(self.marginals):
            mass *= float(m.cdf(upper[i]) - m.cdf(lower[i]))
        return mass

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        cols = [ np.asarray(m.pdf(x[..., i]), dtype=float) for i, m in enumerate(self.marginals) ]
        return np.prod(np.stack(cols, axis=-1), axis=-1)

    def sample(self, n, rng):
        return np.column_stack([ m.sample(n, rng) for m in self.marginals ])

    def params(self):
        return { 'shapes': self.shapes.tolist(), 'rates': self.rates.tolist() }


def target_from_dict(spec: dict) -> LimitTarget:
    kind = spec.get('kind')
    params = spec.get('params', {})
    if kind == 'gamma':
        return GammaTarget(params['alpha'], params.get('rate', 1.0))
    if kind == 'weibull':
        return WeibullMinTarget(params['alpha'])
    if kind == 'gaussian':
        return GaussianTarget(params.get('d', 1))
    if kind == 'product_gamma':
        return ProductGammaTarget(params['shapes'], params['rates'])
    raise ValueError(f"unknown target kind: '{kind}'.")
