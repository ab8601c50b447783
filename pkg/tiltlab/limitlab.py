"""参照極限分布のシミュレータ。

固定した θ でのガウス場 (共分散・グリッド上の sup・Borell バンド)、ワイブル極値分布、
ポアソン確率測度 (PRM) と臨界領域の汎関数 Z_{C₁,PRM}、過少サンプル領域の最大重み。
"""
from __future__ import annotations

import logging
import math

import numpy as np

from dataclasses import dataclass, field
from functools import cached_property
from scipy import linalg, special

from typing import List, Optional, Sequence, Tuple, Union

from .dist import DistributionModel
from .errors import AssumptionViolated, FactorizationError, UndefinedTiltError
from .rng import make_rng, run_replicates
from .targets import LimitTarget, WeibullMinTarget
from .tilt import TiltedLaw, TiltSpec, WeightedEmpirical, log_mgf
from .utils import JsonMixin

logger = logging.getLogger(__name__)

DEFAULT_GRID_SIZE = 512
GRID_PAD = 1e-4
JITTER = 1e-10
PSD_TOL = 1e-8


# ----------------------------------------------------------------------------
# ガウス場

def _as_tilt(theta) -> TiltSpec:
    return theta if isinstance(theta, TiltSpec) else TiltSpec(theta)


class GaussCovSpec:
    """√n (F_{n,θ} - F_θ) の極限ガウス場 G_θ の共分散を評価するための仕様。

    Cov(G(x1), G(x2)) = M_θ [F_{2θ}(x1 ∧ x2) - F_θ(x1) F_{2θ}(x2) - F_θ(x2) F_{2θ}(x1) + F_θ(x1) F_θ(x2)]
    ただし F_θ, F_{2θ} はチルト分布の CDF。

    Parameters
    ----------
    model : DistributionModel
        1 次元の連続モデル。
    theta : float or TiltSpec
        チルト。E[exp(2θ g(X))] が有限でなければならない。
    grid : array_like, optional
        狭義単調増加な評価点。省略すると default_grid による。
    """
    def __init__(self, model: DistributionModel, theta, grid=None):
        if model.dim != 1 or model.is_discrete:
            raise ValueError("GaussCovSpec requires a 1-d continuous model.")
        self.model = model
        self.tilt = _as_tilt(theta)
        try:
            log_mgf(model, self.tilt, 2.0)
        except UndefinedTiltError as e:
            raise AssumptionViolated(f"E[exp(2 theta g(X))] is infinite for {model} at {self.tilt}.") from e

        if grid is None:
            grid = default_grid(model, self.tilt)
        grid = np.asarray(grid, dtype=float)
        if grid.ndim != 1 or grid.size == 0 or np.any(np.diff(grid) <= 0):
            raise ValueError("grid must be a strictly increasing 1-d array.")
        self.grid = grid

    @property
    def theta(self) -> float:
        return self.tilt.scalar

    @cached_property
    def law(self) -> TiltedLaw:
        return TiltedLaw(self.model, self.tilt)

    @cached_property
    def law2(self) -> TiltedLaw:
        return TiltedLaw(self.model, self.tilt.scaled(2.0))

    @cached_property
    def m_theta(self) -> float:
        return math.exp(self.law2.log_normalizer - 2.0 * self.law.log_normalizer)

    def __repr__(self):
        return f"{self.__class__.__name__}(model={self.model}, tilt={self.tilt}, k={self.grid.size})"

    def as_dict(self) -> dict:
        return { 'model': self.model.as_dict(), 'tilt': self.tilt.as_dict(), 'k': int(self.grid.size),
                 'lo': float(self.grid[0]), 'hi': float(self.grid[-1]), 'm_theta': self.m_theta }


def default_grid(model: DistributionModel, theta, k: int=DEFAULT_GRID_SIZE) -> np.ndarray:
    """チルト分布の分位点 1e-4, ..., 1 - 1e-4 に置いた k 点のグリッド。"""
    if k < 2:
        raise ValueError(f"k must be at least 2, got {k}.")
    law = TiltedLaw(model, _as_tilt(theta))
    grid = np.asarray(law.quantile(np.linspace(GRID_PAD, 1.0 - GRID_PAD, k)), dtype=float)
    grid = np.unique(grid)
    if grid.size < k:
        logger.warning(f"default_grid: {k - grid.size} duplicate grid points removed.")
    return grid


def gauss_cov(spec: GaussCovSpec, x1, x2):
    """G_θ の共分散 Cov(G(x1), G(x2))。"""
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    a1, a2 = spec.law.cdf(x1), spec.law.cdf(x2)
    b1, b2 = spec.law2.cdf(x1), spec.law2.cdf(x2)
    b12 = spec.law2.cdf(np.minimum(x1, x2))
    return spec.m_theta * (b12 - a1 * b2 - a2 * b1 + a1 * a2)


def grid_covariance(spec: GaussCovSpec) -> np.ndarray:
    """グリッド上の k x k 共分散行列。"""
    a = np.asarray(spec.law.cdf(spec.grid), dtype=float)
    b = np.asarray(spec.law2.cdf(spec.grid), dtype=float)
    # グリッドは昇順なので F_{2θ}(x_i ∧ x_j) = b[min(i, j)]
    idx = np.arange(spec.grid.size)
    B = b[np.minimum.outer(idx, idx)]
    C = spec.m_theta * (B - np.outer(a, b) - np.outer(b, a) + np.outer(a, a))
    return 0.5 * (C + C.T)


def factorize_covariance(C: np.ndarray) -> np.ndarray:
    """C = L L^T となる L を返す。Cholesky が失敗したらジッター、それでも駄目なら固有値分解。

    Raises
    ------
    FactorizationError
        最小固有値が -1e-8 (最大固有値との相対) を下回る。
    """
    C = np.asarray(C, dtype=float)
    k = C.shape[0]
    if not np.any(C):
        return np.zeros_like(C)

    scale = max(1.0, float(np.max(np.diag(C))))
    for jitter in (0.0, JITTER * scale):
        try:
            L = linalg.cholesky(C + jitter * np.eye(k), lower=True)
            if jitter > 0:
                logger.info(f"covariance factorized with jitter {jitter:.3g}")
            return L
        except linalg.LinAlgError:
            continue

    eigval, eigvec = linalg.eigh(C)
    if eigval.min() < -PSD_TOL * max(1.0, eigval.max()):
        raise FactorizationError(f"covariance matrix is not positive semidefinite (min eigenvalue {eigval.min():.3g}).")
    logger.warning(f"covariance factorized by eigendecomposition (min eigenvalue {eigval.min():.3g} clipped).")
    return eigvec * np.sqrt(np.clip(eigval, 0.0, None))


def simulate_sup_gauss(spec: Union[GaussCovSpec, np.ndarray], reps: int, seed) -> np.ndarray:
    """グリッド上の sup |G_θ| を reps 個引く。spec の代わりに共分散行列を渡してもよい。"""
    if reps < 1:
        raise ValueError(f"reps must be positive, got {reps}.")
    C = grid_covariance(spec) if isinstance(spec, GaussCovSpec) else np.asarray(spec, dtype=float)
    L = factorize_covariance(C)
    rng = make_rng(seed)
    Z = rng.standard_normal((int(reps), C.shape[0])) @ L.T
    return np.max(np.abs(Z), axis=1)


@dataclass
class BandReport(JsonMixin):
    """Borell バンドの検定結果。"""
    u: List[float]
    bound: List[float]
    empirical: List[float]
    passed: List[bool]
    m_theta: float
    draws: int

    @property
    def ok(self) -> bool:
        return all(self.passed)

    def rows(self) -> List[dict]:
        return [ { 'u': u, 'bound': b, 'empirical': e, 'pass': p }
                 for u, b, e, p in zip(self.u, self.bound, self.empirical, self.passed) ]

    def as_dict(self) -> dict:
        return { 'pass': self.ok, 'm_theta': self.m_theta, 'draws': self.draws, 'rows': self.rows() }

    def json_name(self) -> str:
        return 'borell_band'


def borell_band_check(sup_draws, m_theta: float, u_grid: Sequence[float]=None) -> BandReport:
    """P(|Z - E[Z]| > u) <= exp(-u^2 / M_θ) を各 u で 3 つの二項標準誤差の余裕をもって確かめる。"""
    z = np.asarray(sup_draws, dtype=float)
    if z.size < 1000:
        raise ValueError(f"borell_band_check requires at least 1000 draws, got {z.size}.")
    if not m_theta >= 1:
        raise ValueError(f"m_theta must be at least 1, got {m_theta}.")

    if u_grid is None:
        u_grid = math.sqrt(m_theta) * np.linspace(0.25, 3.0, 12)
    dev = np.abs(z - z.mean())

    us, bounds, emps, passes = [], [], [], []
    for u in u_grid:
        bound = math.exp(-u * u / m_theta)
        emp = float(np.mean(dev > u))
        se = math.sqrt(bound * (1.0 - bound) / z.size)
        us.append(float(u))
        bounds.append(bound)
        emps.append(emp)
        passes.append(emp <= bound + 3.0 * se)

    return BandReport(u=us, bound=bounds, empirical=emps, passed=passes, m_theta=float(m_theta), draws=int(z.size))


# ----------------------------------------------------------------------------
# 極値

def weibull_limit_target(alpha: float) -> WeibullMinTarget:
    """(M - max) / (M - F^{-1}(1 - 1/n)) の極限。生存関数は exp(-t^α)。"""
    return WeibullMinTarget(alpha)


def sample_normalized_maximum(model: DistributionModel, n: int, reps: int, seed) -> np.ndarray:
    """(M - max_{i<=n} X_i) / (M - F^{-1}(1 - 1/n)) を最大値の法則の逆関数で reps 個引く。"""
    if n < 1 or reps < 1:
        raise ValueError("n and reps must be positive.")
    rng = make_rng(seed)
    v = rng.random(int(reps))
    # P(M - max <= u) = 1 - (1 - tail(u))^n
    q = -np.expm1(np.log(v) / n)
    q = np.clip(q, np.finfo(float).tiny, 1.0)
    u = model.tail_quantile(q)
    return np.asarray(u, dtype=float) / float(model.tail_quantile(1.0 / n))


# ----------------------------------------------------------------------------
# ポアソン確率測度

MIN_MEAN_ATOMS = 40.0
PRM_BLOCK = 64


def neglected_weight(alpha: float, c1: float, T: float) -> float:
    """∫_T^∞ exp(-c1 y) α y^{α-1} dy = Γ(α + 1) c1^{-α} Q(α, c1 T)。"""
    return math.gamma(alpha + 1.0) * c1 ** (-alpha) * float(special.gammaincc(alpha, c1 * T))


def solve_truncation(alpha: float, c1: float, tail_tol: float) -> float:
    """neglected_weight < tail_tol となる T。原子が 1 つもない確率 exp(-T^α) も十分小さくする。"""
    target = tail_tol * c1 ** alpha / math.gamma(alpha + 1.0)
    target = min(target, 0.5)
    T = float(special.gammainccinv(alpha, target)) / c1
    return max(T * (1.0 + 1e-9), MIN_MEAN_ATOMS ** (1.0 / alpha))


@dataclass
class PRMConfig(JsonMixin):
    """強度 ν([0, y]) = y^α の [0, T] 上の PRM と、臨界領域の定数 C₁。

    truncation_T を省略すると tail_tol から解く。
    """
    alpha: float
    c1: float
    tail_tol: float = 1e-8
    truncation_T: Optional[float] = None

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}.")
        if not self.c1 > 0:
            raise ValueError(f"c1 must be positive, got {self.c1}.")
        if not self.tail_tol > 0:
            raise ValueError(f"tail_tol must be positive, got {self.tail_tol}.")
        if self.truncation_T is None:
            self.truncation_T = solve_truncation(self.alpha, self.c1, self.tail_tol)
        if not self.truncation_T > 0:
            raise ValueError(f"truncation_T must be positive, got {self.truncation_T}.")
        w = neglected_weight(self.alpha, self.c1, self.truncation_T)
        if not w < self.tail_tol:
            raise ValueError(f"truncation T={self.truncation_T} neglects weight {w:.3g} >= tail_tol {self.tail_tol}.")

    @property
    def T(self) -> float:
        return float(self.truncation_T)

    @property
    def mean_atoms(self) -> float:
        return self.T ** self.alpha

    def with_truncation(self, T: float) -> PRMConfig:
        return PRMConfig(self.alpha, self.c1, self.tail_tol, T)

    def as_dict(self) -> dict:
        return { 'alpha': self.alpha, 'c1': self.c1, 'tail_tol': self.tail_tol, 'truncation_T': self.T }

    def json_name(self) -> str:
        return 'prm_config'


def _prm_arrivals(config: PRMConfig, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
    """原子 (昇順) と原子ごとの Gumbel ノイズ。

    単位強度の Poisson 過程の到着 Γ_1 < Γ_2 < ... を y = Γ^{1/α} で写す。到着の間隔とノイズは
    PRM_BLOCK 個ずつ交互に引くので、同じ乱数列なら T を大きくしても [0, T] の原子とノイズは変わらない。
    """
    limit = config.mean_atoms
    arrivals, noise = [], []
    last = 0.0
    while last <= limit:
        cum = last + np.cumsum(rng.exponential(size=PRM_BLOCK))
        arrivals.append(cum)
        noise.append(rng.gumbel(size=PRM_BLOCK))
        last = float(cum[-1])
    cum = np.concatenate(arrivals)
    keep = cum <= limit
    return cum[keep] ** (1.0 / config.alpha), np.concatenate(noise)[keep]


def _prm_atoms(config: PRMConfig, rng: np.random.Generator) -> np.ndarray:
    return _prm_arrivals(config, rng)[0]


def simulate_prm_1d(config: PRMConfig, seed) -> np.ndarray:
    """[0, T] 上の PRM の原子 (昇順)。個数は Poisson(T^α)、位置は密度 α y^{α-1} / T^α。"""
    return _prm_atoms(config, make_rng(seed))


def _z_cprm_one(config: PRMConfig, rng: np.random.Generator) -> Tuple[float, int]:
    redraws = 0
    while True:
        atoms, noise = _prm_arrivals(config, rng)
        if atoms.size > 0:
            break
        redraws += 1
    # Gumbel-max: 確率 ∝ exp(-C₁ y_i) で原子を選ぶ
    i = int(np.argmax(-config.c1 * atoms + noise))
    return config.c1 * float(atoms[i]), redraws


def sample_z_cprm(config: PRMConfig, reps: int, seed, return_redraws: bool=False,
                  workers: int=1, verbose: bool=False):
    """Z_{C₁,PRM} を reps 個引く。

    各レプリケートで PRM の原子 {y_i} を引き、確率 ∝ exp(-C₁ y_i) で原子を 1 つ選んで C₁ y_i を返す。
    原子が 1 つもないレプリケートは引き直し、その回数を return_redraws=True のとき併せて返す。
    """
    if config.tail_tol > 1e-6:
        raise ValueError(f"sample_z_cprm requires tail_tol <= 1e-6, got {config.tail_tol}.")
    results = run_replicates(lambda rng: _z_cprm_one(config, rng), reps, seed,
                             workers=workers, verbose=verbose)
    draws = np.array([ r[0] for r in results ])
    redraws = int(sum(r[1] for r in results))
    if redraws > 0:
        logger.warning(f"sample_z_cprm: {redraws} empty PRM realizations re-drawn (T={config.T}).")
    if return_redraws:
        return draws, redraws
    return draws


class ZcprmTarget(LimitTarget):
    """臨界領域の極限 Z_{C₁,PRM}。解析的な CDF はないのでサンプラーだけを持つ。"""
    kind = 'z_cprm'

    def __init__(self, config: PRMConfig):
        self.config = config

    def sample(self, n, rng):
        return np.array([ _z_cprm_one(self.config, rng)[0] for _ in range(int(n)) ])

    def cdf(self, x):
        raise NotImplementedError("Z_cprm has no closed-form CDF; compare samples instead.")

    def params(self):
        return self.config.as_dict()


def c1_from_ratio(alpha: float, c: float) -> float:
    """lim M_θ/n = c から C₁ = lim θ (M - F^{-1}(1 - 1/n)) = 2 (c Γ(1 + α))^{1/α}。純粋なべき乗の裾を仮定する。"""
    if not (alpha > 0 and c > 0):
        raise ValueError(f"alpha and c must be positive, got {alpha}, {c}.")
    return 2.0 * (c * math.gamma(1.0 + alpha)) ** (1.0 / alpha)


def ratio_from_c1(alpha: float, c1: float) -> float:
    if not (alpha > 0 and c1 > 0):
        raise ValueError(f"alpha and c1 must be positive, got {alpha}, {c1}.")
    return (c1 / 2.0) ** alpha / math.gamma(1.0 + alpha)


def max_weight_stat(we: WeightedEmpirical) -> float:
    """最大の正規化重み。過少サンプル領域では 1 に近づく。"""
    return we.max_weight
