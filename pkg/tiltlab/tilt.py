"""自己正規化重点サンプリング (SNIS) の中核。

重みの計算はすべて対数空間で行う。線形スケールの重みは極端なチルトで 0 に
アンダーフローすることがあるが、log_weights は常に有限であり、こちらが正とする。
"""
from __future__ import annotations

import logging
import math

import numpy as np

from functools import cached_property
from scipy import integrate, optimize, special
from scipy.interpolate import PchipInterpolator

from typing import Callable, List, Optional, Sequence

from .dist import (
    DistributionModel, DiscreteUniform, Exponential, ProductVec, SquaredUniform,
    StdNormalVec, Uniform01,
)
from .errors import UndefinedTiltError
from .rng import make_rng, run_replicates

logger = logging.getLogger(__name__)

QUAD_EPSREL = 1e-10
# ピーク値からこれだけ対数密度が下がった先は無視できる
LOG_DROP = 80.0


class TiltSpec:
    """チルトの方向と大きさ θ、およびチルトをかける写像 g。

    Parameters
    ----------
    theta : float or array_like
        d 次元のチルト。d = 1 ならスカラーでもよい。
    g : str, optional
        "identity", "power", "custom" のいずれか。(by default "identity")
    exponents : array_like, optional
        g = "power" のときの各座標の指数。すべて正。
    func : Callable, optional
        g = "custom" のときの狭義単調増加な連続写像。d = 1 のみ。
    name : str, optional
        custom 写像の名前。JSON には名前だけが保存される。
    """
    kinds = { 'identity', 'power', 'custom' }

    def __init__(self, theta, g: str='identity', exponents=None,
                 func: Callable=None, name: str=None):
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        if theta.ndim != 1 or theta.size == 0:
            raise ValueError(f"theta must be a scalar or a 1-d vector, got shape {theta.shape}.")
        if not np.all(np.isfinite(theta)):
            raise ValueError(f"theta must be finite, got {theta}.")
        if g not in self.kinds:
            raise ValueError(f"g must be one of {self.kinds}, got '{g}'.")

        if g == 'power':
            if exponents is None:
                raise ValueError("power tilt requires exponents.")
            exponents = np.atleast_1d(np.asarray(exponents, dtype=float))
            if exponents.shape != theta.shape:
                raise ValueError(f"exponents must have {theta.size} entries, got {exponents.size}.")
            if not np.all(exponents > 0):
                raise ValueError(f"power exponents must be strictly positive, got {exponents}.")
        else:
            exponents = None

        if g == 'custom':
            if theta.size != 1:
                raise ValueError("custom monotone tilt is defined only for d = 1.")
            if not callable(func):
                raise ValueError("custom tilt requires a callable func.")
        else:
            func = None

        theta.setflags(write=False)
        self._theta = theta
        self._g = g
        self._exponents = exponents
        self._func = func
        self._name = name if name is not None else (getattr(func, '__name__', 'custom') if func else g)

    @classmethod
    def identity(cls, theta) -> TiltSpec:
        return cls(theta)

    @classmethod
    def power(cls, theta, exponents) -> TiltSpec:
        return cls(theta, g='power', exponents=exponents)

    @classmethod
    def custom(cls, theta, func: Callable, name: str=None) -> TiltSpec:
        return cls(theta, g='custom', func=func, name=name)

    @property
    def theta(self) -> np.ndarray:
        return self._theta

    @property
    def g(self) -> str:
        return self._g

    @property
    def exponents(self) -> Optional[np.ndarray]:
        return self._exponents

    @property
    def func(self) -> Optional[Callable]:
        return self._func

    @property
    def dim(self) -> int:
        return self._theta.size

    @property
    def scalar(self) -> float:
        if self.dim != 1:
            raise ValueError(f"tilt is {self.dim}-dimensional, not scalar.")
        return float(self._theta[0])

    @property
    def is_identity(self) -> bool:
        return self._g == 'identity' or (self._g == 'power' and bool(np.all(self._exponents == 1.0)))

    def __repr__(self):
        theta = self.scalar if self.dim == 1 else self._theta.tolist()
        if self._g == 'power':
            return f"{self.__class__.__name__}(theta={theta}, g='power', exponents={self._exponents.tolist()})"
        if self._g == 'custom':
            return f"{self.__class__.__name__}(theta={theta}, g='custom', name='{self._name}')"
        return f"{self.__class__.__name__}(theta={theta})"

    def with_theta(self, theta) -> TiltSpec:
        return TiltSpec(theta, g=self._g, exponents=self._exponents, func=self._func, name=self._name)

    def scaled(self, c: float) -> TiltSpec:
        return self.with_theta(self._theta * c)

    def coordinate(self, i: int) -> TiltSpec:
        """第 i 座標だけを取り出した 1 次元のチルト。"""
        if self._g == 'power':
            return TiltSpec(self._theta[i], g='power', exponents=[self._exponents[i]])
        if self._g == 'custom':
            return self
        return TiltSpec(self._theta[i])

    def apply(self, points) -> np.ndarray:
        """g(x) を返す。形状は points と同じ。"""
        x = np.asarray(points, dtype=float)
        if self._g == 'identity':
            return x
        if self._g == 'custom':
            return np.asarray(self._func(x), dtype=float)
        if np.any(x < 0):
            raise ValueError("power tilt requires non-negative coordinates.")
        exps = self._exponents[0] if self.dim == 1 else self._exponents
        return np.power(x, exps)

    def scores(self, points) -> np.ndarray:
        """各点の θ^T g(x) を返す。d = 1 では形状 (n,) の points、d > 1 では (n, d) を受け取る。"""
        x = np.asarray(points, dtype=float)
        if self.dim == 1:
            if x.ndim == 2 and x.shape[1] == 1:
                x = x[:, 0]
            if x.ndim > 1:
                raise ValueError(f"dimension mismatch: points have shape {x.shape}, theta is scalar.")
            return self.scalar * self.apply(x)

        if x.ndim != 2 or x.shape[1] != self.dim:
            raise ValueError(f"dimension mismatch: points have shape {x.shape}, theta has {self.dim} entries.")
        return self.apply(x) @ self._theta

    def as_dict(self) -> dict:
        ret = { 'theta': self._theta.tolist(), 'g': self._g }
        if self._exponents is not None:
            ret['exponents'] = self._exponents.tolist()
        if self._g == 'custom':
            ret['name'] = self._name
        return ret


def parse_g(theta, g: str) -> TiltSpec:
    """CLI の --g 文字列 ("identity" または "power:2,1") からチルトを作る。"""
    if g is None or g == 'identity':
        return TiltSpec(theta)
    if g.startswith('power:'):
        exponents = [ float(s) for s in g.split(':', 1)[1].split(',') ]
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        if len(exponents) == 1 and theta.size > 1:
            exponents = exponents * theta.size
        return TiltSpec(theta, g='power', exponents=exponents)
    raise ValueError(f"unknown g: '{g}'. use 'identity' or 'power:a1,...,ad'.")


class WeightedEmpirical:
    """SNIS の重み付き経験分布 R_{n,θ}。構築後は不変。

    Attributes
    ----------
    points : numpy.ndarray
        形状 (n,) または (n, d) の台の点。重複した点も別々に保持する。
    log_weights : numpy.ndarray
        正規化済みの対数重み。
    log_normalizer : float
        正規化前の重みの平均の対数 log((1/n) Σ exp(θ^T g(X_i)))。
    """
    def __init__(self, points: np.ndarray, log_weights: np.ndarray, log_normalizer: float):
        points = np.array(points, dtype=float)
        log_weights = np.array(log_weights, dtype=float)
        if points.shape[0] != log_weights.shape[0]:
            raise ValueError("points and weights must have the same length.")
        points.setflags(write=False)
        log_weights.setflags(write=False)
        self._points = points
        self._log_weights = log_weights
        self._log_normalizer = float(log_normalizer)

    @property
    def points(self) -> np.ndarray:
        return self._points

    @property
    def log_weights(self) -> np.ndarray:
        return self._log_weights

    @cached_property
    def weights(self) -> np.ndarray:
        w = np.exp(self._log_weights)
        w.setflags(write=False)
        return w

    @property
    def log_normalizer(self) -> float:
        return self._log_normalizer

    @property
    def n(self) -> int:
        return self._points.shape[0]

    @property
    def dim(self) -> int:
        return 1 if self._points.ndim == 1 else self._points.shape[1]

    @cached_property
    def m_theta(self) -> float:
        """n Σ w_i^2。重みの経験的な二次モーメント比。"""
        if self.n == 1 or np.all(self._log_weights == self._log_weights[0]):
            return 1.0
        value = math.exp(math.log(self.n) + special.logsumexp(2.0 * self._log_weights))
        return max(1.0, value)

    @property
    def effective_sample_size(self) -> float:
        return self.n / self.m_theta

    @property
    def max_weight(self) -> float:
        return float(np.exp(self._log_weights.max()))

    @cached_property
    def _sorted(self):
        # d = 1 用: 昇順の点と累積重み
        order = np.argsort(self._points, kind='stable')
        return self._points[order], np.cumsum(self.weights[order])

    def __repr__(self):
        return f"{self.__class__.__name__}(n={self.n}, dim={self.dim}, log_normalizer={self._log_normalizer})"

    def as_dict(self) -> dict:
        return {
            'n': self.n,
            'dim': self.dim,
            'log_normalizer': self._log_normalizer,
            'm_theta': self.m_theta,
            'effective_sample_size': self.effective_sample_size,
            'max_weight': self.max_weight,
        }


def snis_weights(samples, tilt: TiltSpec) -> WeightedEmpirical:
    """サンプルに exp(θ^T g(X_i)) / Σ_j exp(θ^T g(X_j)) の重みを付ける。

    Raises
    ------
    ValueError
        サンプルが空であるか、θ^T g(X_i) が有限でない。
    """
    points = np.asarray(samples, dtype=float)
    if points.shape[0] == 0:
        raise ValueError("samples must not be empty.")

    s = tilt.scores(points)
    if not np.all(np.isfinite(s)):
        raise ValueError("tilt values theta^T g(X_i) must be finite.")

    # max シフトによる log-sum-exp
    shifted = s - s.max()
    log_sum = math.log(np.sum(np.exp(shifted)))
    log_weights = shifted - log_sum
    log_normalizer = float(s.max()) + log_sum - math.log(s.shape[0])

    return WeightedEmpirical(points, log_weights, log_normalizer)


def weighted_cdf(we: WeightedEmpirical, x):
    """F_{n,θ}(x)。d = 1 では閾値以下の重み、d > 1 では左下の象限の重みを返す。"""
    if we.dim == 1:
        points, cum = we._sorted
        idx = np.searchsorted(points, x, side='right')
        cum0 = np.concatenate([[0.0], cum])
        return np.minimum(cum0[idx], 1.0)

    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    queries = np.atleast_2d(x)
    if queries.shape[1] != we.dim:
        raise ValueError(f"query dimension {queries.shape[1]} does not match {we.dim}.")
    w = we.weights
    masses = np.array([ w[np.all(we.points <= q, axis=1)].sum() for q in queries ])
    masses = np.minimum(masses, 1.0)
    return float(masses[0]) if single else masses


def resample(we: WeightedEmpirical, m: int, seed) -> np.ndarray:
    """R_{n,θ} から逆 CDF 法で m 個引く。"""
    if m < 1:
        raise ValueError(f"m must be positive, got {m}.")
    rng = make_rng(seed)
    cum = np.cumsum(we.weights)
    cum /= cum[-1]
    idx = np.searchsorted(cum, rng.random(int(m)), side='right')
    idx = np.minimum(idx, we.n - 1)
    return we.points[idx]


def m_theta_empirical(samples, tilt: TiltSpec) -> float:
    """(重みの二乗平均) / (重みの平均)^2 を対数空間で計算する。"""
    points = np.asarray(samples, dtype=float)
    if points.shape[0] < 2:
        raise ValueError("m_theta_empirical requires at least 2 samples.")
    return snis_weights(points, tilt).m_theta


def effective_sample_size(we: WeightedEmpirical) -> float:
    return we.effective_sample_size


# ----------------------------------------------------------------------------
# 求積

def _phi_func(model: DistributionModel, log_weight: Callable):
    def phi(x):
        with np.errstate(all='ignore'):
            v = np.asarray(model.logpdf(x), dtype=float) + np.asarray(log_weight(x), dtype=float)
        return np.where(np.isnan(v), -np.inf, v)
    return phi


def _locate_peak(phi: Callable, lo: float, hi: float, model: DistributionModel):
    """exp(phi) の最大点を探す。無限の端はピークが窓の内側に入るまで窓を広げる。"""
    a = lo if math.isfinite(lo) else float(model.quantile(1e-9))
    b = hi if math.isfinite(hi) else float(model.quantile(1.0 - 1e-9))
    if not a < b:
        a, b = (a - 1.0, b + 1.0)

    for _ in range(60):
        width = b - a
        near = width * np.logspace(-15, -1, 15)
        grid = np.unique(np.concatenate([np.linspace(a, b, 2049), a + near, b - near]))
        raw = phi(grid)
        values = np.where(raw == np.inf, -np.inf, raw)
        i = int(np.argmax(values))
        if values[i] == -np.inf:
            raise ValueError("integrand vanishes on the whole support.")

        # 無限側の窓の端が最大 (あるいは発散) なら窓を広げる
        if not math.isfinite(hi) and (i == len(grid) - 1 or raw[-1] == np.inf):
            b = b + width
            continue
        if not math.isfinite(lo) and (i == 0 or raw[0] == np.inf):
            a = a - width
            continue
        break
    else:
        raise UndefinedTiltError("tilted expectation diverges (the tilt exceeds the MGF radius).")

    x_star, phi_star = grid[i], values[i]
    if 0 < i < len(grid) - 1:
        res = optimize.minimize_scalar(
            lambda x: -float(phi(x)), bounds=(grid[i - 1], grid[i + 1]), method='bounded',
            options={ 'xatol': 1e-14 * max(1.0, abs(x_star)) },
        )
        if res.success and -res.fun > phi_star:
            x_star, phi_star = float(res.x), float(-res.fun)

    return float(x_star), float(phi_star)


def _breakpoints(phi: Callable, x_star: float, phi_star: float, lo: float, hi: float) -> List[float]:
    """ピークの周りに幾何的な間隔で区切り点を置く。"""
    span = (hi - lo) if math.isfinite(hi - lo) else max(1.0, abs(x_star))
    h0 = max(span * 1e-13, 1e-300)

    points = [x_star]
    for sign, end in ((-1.0, lo), (1.0, hi)):
        h = h0
        while True:
            x = x_star + sign * h
            if (sign < 0 and x <= end) or (sign > 0 and x >= end):
                break
            points.append(x)
            if phi(x) < phi_star - LOG_DROP:
                break
            h *= 2.0
        points.append(end)

    points = sorted(set(points))
    return [ p for p in points if lo <= p <= hi ]


def _interval(model: DistributionModel, lower, upper):
    lo = float(model.infimum) if lower is None else max(float(model.infimum), float(lower))
    hi = float(model.supremum) if upper is None else min(float(model.supremum), float(upper))
    return lo, hi


def log_expectation(model: DistributionModel, log_weight: Callable,
                    lower: float=None, upper: float=None) -> float:
    """log E[exp(log_weight(X)) 1{lower < X <= upper}] を返す (1 次元モデル)。

    連続モデルではピークの位置で対数シフトしたうえで、ピークの周りに区切った
    各区間を適応的 Gauss-Kronrod 求積 (scipy.integrate.quad) で積分する。
    上端にピークがある場合は上端から幾何的に区切るので u = M - x と変数変換したのと同じ効果がある。
    """
    if model.dim != 1:
        raise ValueError("log_expectation is defined for 1-d models.")

    if model.is_discrete:
        v = model.support
        mask = np.ones(len(v), dtype=bool)
        if lower is not None:
            mask &= v > lower
        if upper is not None:
            mask &= v <= upper
        if not np.any(mask):
            return -math.inf
        return float(special.logsumexp(log_weight(v[mask])) - math.log(len(v)))

    lo, hi = _interval(model, lower, upper)
    if not lo < hi:
        return -math.inf

    phi = _phi_func(model, log_weight)
    x_star, phi_star = _locate_peak(phi, lo, hi, model)
    knots = _breakpoints(phi, x_star, phi_star, lo, hi)

    def integrand(x):
        return math.exp(float(phi(x)) - phi_star)

    # 区間の長さ x 端点の値で全体の大きさを見積もり、絶対許容誤差に使う
    est = 0.0
    for a, b in zip(knots[:-1], knots[1:]):
        if math.isfinite(b - a):
            est += (b - a) * max(integrand(a), integrand(b))
    epsabs = 1e-14 * est if est > 0 else 0.0

    total = 0.0
    for a, b in zip(knots[:-1], knots[1:]):
        value, _ = integrate.quad(integrand, a, b, epsabs=epsabs, epsrel=QUAD_EPSREL, limit=200)
        total += value

    if not total > 0:
        return -math.inf
    return phi_star + math.log(total)


def _log_mgf_uniform(t: float) -> float:
    # log((e^t - 1) / t)
    if t == 0:
        return 0.0
    if t > 0:
        return t + math.log(-math.expm1(-t) / t)
    return math.log(math.expm1(t) / t)


def _log_mgf_squared_uniform(t: float) -> float:
    # log ∫_0^1 e^{t v^2} dv
    if t == 0:
        return 0.0
    if t > 0:
        r = math.sqrt(t)
        return t + math.log(special.dawsn(r)) - math.log(r)
    r = math.sqrt(-t)
    return math.log(math.sqrt(math.pi) * special.erf(r) / (2.0 * r))


def log_mgf(model: DistributionModel, tilt: TiltSpec, scale: float=1.0) -> float:
    """log E[exp(scale θ^T g(X))]。閉形式があれば使い、なければ求積する。

    Raises
    ------
    UndefinedTiltError
        期待値が発散する (θ が MGF の収束半径の外にある)。
    """
    if tilt.dim != model.dim:
        raise ValueError(f"dimension mismatch: model has d={model.dim}, theta has {tilt.dim} entries.")

    if isinstance(model, ProductVec):
        return sum(log_mgf(c, tilt.coordinate(i), scale) for i, c in enumerate(model.components))

    if isinstance(model, StdNormalVec):
        if tilt.g == 'identity':
            t = scale * tilt.theta
            return 0.5 * float(t @ t)
        if model.dim > 1:
            return sum(log_mgf(StdNormalVec(1), tilt.coordinate(i), scale) for i in range(model.dim))

    if isinstance(model, DiscreteUniform):
        return log_expectation(model, lambda x: scale * tilt.scores(x))

    t = scale * tilt.scalar
    if tilt.g == 'identity':
        if isinstance(model, Uniform01):
            return _log_mgf_uniform(t)
        if isinstance(model, SquaredUniform):
            return _log_mgf_squared_uniform(t)
        if isinstance(model, Exponential):
            if t >= model.lam:
                raise UndefinedTiltError(f"E[exp({t} X)] diverges for Exponential({model.lam}).")
            return math.log(model.lam / (model.lam - t))
        if isinstance(model, StdNormalVec):
            return 0.5 * t * t

    return log_expectation(model, lambda x: scale * tilt.scores(x))


def m_theta_analytic(model: DistributionModel, tilt: TiltSpec) -> float:
    """M_θ = E[e^{2θ^T g(X)}] / E[e^{θ^T g(X)}]^2 の厳密値。

    閉形式 (Exponential, Uniform01, DiscreteUniform, StdNormalVec) がなければ求積による。
    チルト分布が存在するが二次モーメントが発散する場合は math.inf を返す。

    Raises
    ------
    UndefinedTiltError
        チルト分布そのものが存在しない。
    """
    if tilt.dim != model.dim:
        raise ValueError(f"dimension mismatch: model has d={model.dim}, theta has {tilt.dim} entries.")

    if isinstance(model, ProductVec):
        return float(np.prod([ m_theta_analytic(c, tilt.coordinate(i)) for i, c in enumerate(model.components) ]))

    if isinstance(model, StdNormalVec) and tilt.g == 'identity':
        return math.exp(float(tilt.theta @ tilt.theta))

    if isinstance(model, DiscreteUniform):
        s = tilt.scores(model.support)
        k = len(model.values)
        return max(1.0, math.exp(math.log(k) + special.logsumexp(2.0 * s) - 2.0 * special.logsumexp(s)))

    if tilt.dim == 1 and tilt.g == 'identity':
        t = tilt.scalar
        if isinstance(model, Uniform01):
            if t == 0:
                return 1.0
            return max(1.0, (t / 2.0) / math.tanh(t / 2.0))
        if isinstance(model, Exponential):
            lam = model.lam
            if t >= lam:
                raise UndefinedTiltError(f"tilted law does not exist for Exponential({lam}) at theta={t}.")
            if t >= lam / 2.0:
                logger.warning(f"M_theta is infinite for Exponential({lam}) at theta={t} (theta >= lambda/2).")
                return math.inf
            return (lam - t) ** 2 / (lam * (lam - 2.0 * t))

    log_first = log_mgf(model, tilt, 1.0)
    try:
        log_second = log_mgf(model, tilt, 2.0)
    except UndefinedTiltError:
        logger.warning(f"M_theta is infinite for {model} at {tilt}.")
        return math.inf
    return max(1.0, math.exp(log_second - 2.0 * log_first))


# ----------------------------------------------------------------------------
# チルト分布 X_θ

class TiltedLaw:
    """チルト分布 X_θ の厳密な法則。

    閉形式のサンプラーがある場合 (Uniform01, Exponential, StdNormalVec, DiscreteUniform)
    はそれを使う。その他の連続ファミリーでは CDF を区間ごとの求積で表にし、
    単調な PCHIP 補間で評価する。ProductVec は座標ごとの独立な積になる。
    """
    GL_NODES = 20
    SUBDIVISIONS = 8

    def __init__(self, model: DistributionModel, tilt: TiltSpec):
        if tilt.dim != model.dim:
            raise ValueError(f"dimension mismatch: model has d={model.dim}, theta has {tilt.dim} entries.")
        self.model = model
        self.tilt = tilt
        self.log_normalizer = log_mgf(model, tilt)

        self._components = None
        if isinstance(model, ProductVec):
            self._components = [ TiltedLaw(c, tilt.coordinate(i)) for i, c in enumerate(model.components) ]
        elif model.dim > 1 and not (isinstance(model, StdNormalVec) and tilt.g == 'identity'):
            self._components = [ TiltedLaw(StdNormalVec(1), tilt.coordinate(i)) for i in range(model.dim) ]

    def __repr__(self):
        return f"{self.__class__.__name__}(model={self.model}, tilt={self.tilt})"

    @property
    def _kind(self) -> str:
        m, g = self.model, self.tilt.g
        if self._components is not None:
            return 'product'
        if isinstance(m, DiscreteUniform):
            return 'discrete'
        if g == 'identity':
            if isinstance(m, Uniform01):
                return 'uniform'
            if isinstance(m, Exponential):
                return 'exponential'
            if isinstance(m, StdNormalVec):
                return 'normal'
        return 'table'

    @cached_property
    def _discrete(self):
        v = self.model.support
        s = self.tilt.scores(v)
        logp = s - special.logsumexp(s)
        return v, np.exp(logp)

    @cached_property
    def _table(self):
        """(x のグリッド, CDF の値) の表。"""
        model = self.model
        lo, hi = _interval(model, None, None)
        phi = _phi_func(model, lambda x: self.tilt.scores(x))
        x_star, phi_star = _locate_peak(phi, lo, hi, model)
        knots = _breakpoints(phi, x_star, phi_star, lo, hi)

        # 無限の端は密度が無視できる点で打ち切る
        if not math.isfinite(knots[0]):
            knots[0] = self._cutoff(phi, phi_star, knots[1], -1.0)
        if not math.isfinite(knots[-1]):
            knots[-1] = self._cutoff(phi, phi_star, knots[-2], 1.0)

        fine = [ np.linspace(a, b, self.SUBDIVISIONS + 1)[:-1] for a, b in zip(knots[:-1], knots[1:]) ]
        grid = np.unique(np.concatenate(fine + [[knots[-1]]]))

        nodes, weights = np.polynomial.legendre.leggauss(self.GL_NODES)
        a, b = grid[:-1, None], grid[1:, None]
        xs = 0.5 * (b - a) * nodes[None, :] + 0.5 * (a + b)
        # scores は d = 1 で 1 次元配列しか受け付けない
        vals = np.asarray(phi(xs.ravel()), dtype=float).reshape(xs.shape)
        cells = np.sum(0.5 * (b - a) * weights[None, :] * np.exp(vals - phi_star), axis=1)

        cum = np.concatenate([[0.0], np.cumsum(cells)])
        cum /= cum[-1]
        return grid, cum

    @staticmethod
    def _cutoff(phi, phi_star, start, sign):
        h = 1.0
        for _ in range(200):
            x = start + sign * h
            if phi(x) < phi_star - LOG_DROP:
                return x
            h *= 2.0
        raise UndefinedTiltError("tilted density does not decay.")

    @cached_property
    def _cdf_interp(self):
        grid, cum = self._table
        return PchipInterpolator(grid, cum, extrapolate=False)

    @cached_property
    def _quantile_interp(self):
        grid, cum = self._table
        keep = np.concatenate([[True], np.diff(cum) > 0])
        return PchipInterpolator(cum[keep], grid[keep], extrapolate=False)

    def cdf(self, x):
        kind = self._kind
        if kind == 'product':
            x = np.asarray(x, dtype=float)
            cols = [ np.asarray(c.cdf(x[..., i]), dtype=float) for i, c in enumerate(self._components) ]
            return np.prod(np.stack(cols, axis=-1), axis=-1)

        x = np.asarray(x, dtype=float)
        if kind == 'discrete':
            v, p = self._discrete
            cum0 = np.concatenate([[0.0], np.cumsum(p)])
            return np.minimum(cum0[np.searchsorted(v, x, side='right')], 1.0)

        t = self.tilt.scalar if self.tilt.dim == 1 else None
        if kind == 'uniform':
            xc = np.clip(x, 0.0, 1.0)
            if t == 0:
                return xc
            if t > 0:
                return np.exp(t * (xc - 1.0)) * (-np.expm1(-t * xc)) / (-math.expm1(-t))
            return np.expm1(t * xc) / math.expm1(t)
        if kind == 'exponential':
            rate = self.model.lam - t
            return np.where(x > 0, -np.expm1(-rate * np.maximum(x, 0.0)), 0.0)
        if kind == 'normal':
            if self.model.dim == 1:
                return special.ndtr(x - t)
            return np.prod(special.ndtr(x - self.tilt.theta), axis=-1)

        grid, _ = self._table
        out = np.asarray(self._cdf_interp(np.clip(x, grid[0], grid[-1])), dtype=float)
        return np.clip(out, 0.0, 1.0)

    def pdf(self, x):
        """d = 1 の連続モデルの密度 f(x) e^{θ g(x)} / E[e^{θ g(X)}]。"""
        if self.model.is_discrete:
            raise ValueError("discrete tilted law has no density.")
        if self.model.dim != 1:
            raise ValueError("pdf is available for d = 1.")
        phi = _phi_func(self.model, lambda x: self.tilt.scores(x))
        return np.exp(phi(np.asarray(x, dtype=float)) - self.log_normalizer)

    def quantile(self, p):
        p = np.asarray(p, dtype=float)
        kind = self._kind
        t = self.tilt.scalar if self.tilt.dim == 1 else None
        if kind == 'product' or (kind == 'normal' and self.model.dim > 1):
            raise ValueError("quantile is available for d = 1.")
        if kind == 'discrete':
            v, w = self._discrete
            cum = np.cumsum(w)
            cum /= cum[-1]
            return v[np.minimum(np.searchsorted(cum, p, side='left'), len(v) - 1)]
        if kind == 'uniform':
            if t == 0:
                return p
            if t > 0:
                # 1 + log(p + (1 - p) e^{-θ}) / θ
                return 1.0 + np.log(p + (1.0 - p) * math.exp(-t)) / t
            return np.log1p(p * math.expm1(t)) / t
        if kind == 'exponential':
            return -np.log1p(-p) / (self.model.lam - t)
        if kind == 'normal':
            return t + special.ndtri(p)
        grid, _ = self._table
        return np.clip(np.asarray(self._quantile_interp(p), dtype=float), grid[0], grid[-1])

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        kind = self._kind
        if kind == 'product':
            return np.column_stack([ c.sample(n, rng) for c in self._components ])
        if kind == 'normal':
            if self.model.dim == 1:
                return self.tilt.scalar + rng.standard_normal(n)
            return self.tilt.theta[None, :] + rng.standard_normal((n, self.model.dim))
        if kind == 'exponential':
            return rng.exponential(1.0 / (self.model.lam - self.tilt.scalar), size=n)
        if kind == 'discrete':
            v, w = self._discrete
            cum = np.cumsum(w)
            cum /= cum[-1]
            return v[np.minimum(np.searchsorted(cum, rng.random(n), side='right'), len(v) - 1)]
        return self.quantile(rng.random(n))

    def as_dict(self) -> dict:
        return { 'model': self.model.as_dict(), 'tilt': self.tilt.as_dict(), 'log_normalizer': self.log_normalizer }


def tilted_cdf(model: DistributionModel, tilt: TiltSpec, x):
    return TiltedLaw(model, tilt).cdf(x)


def snis_replicates(model: DistributionModel, tilt: TiltSpec, n: int, reps: int, seed: int,
                    m: int=None, workers: int=1, verbose: bool=False, stream: Sequence[int]=()):
    """独立な SNIS 推定量を reps 個作る。

    m を与えると各レプリケートから m 個リサンプルした配列のリストを、
    与えなければ WeightedEmpirical のリストを返す。
    """
    def one(rng):
        we = snis_weights(model.sample(n, rng), tilt)
        if m is None:
            return we
        return resample(we, m, rng)

    return run_replicates(one, reps, seed, workers=workers, verbose=verbose, stream=stream)
