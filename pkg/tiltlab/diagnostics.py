"""距離と判定: 重み付き KS 統計量、d > 1 での直方体上の sup 距離、領域の分類。"""
from __future__ import annotations

import logging
import math

import numpy as np

from dataclasses import dataclass
from scipy import stats

from typing import Callable, List, Sequence, Tuple

from .config import DEFAULT_TOLERANCES
from .dist import DistributionModel
from .errors import BudgetExceeded
from .rng import run_replicates
from .tilt import TiltedLaw, TiltSpec, WeightedEmpirical, snis_weights
from .utils import JsonMixin

logger = logging.getLogger(__name__)

MAX_GRID_EVALUATIONS = 10 ** 7

REGIMES = ('accurate', 'critical', 'undersampled')


def _ecdf_steps(we: WeightedEmpirical):
    """相異なる原子と、その直前・直後の累積重み。"""
    points, cum = we._sorted
    x = np.unique(points)
    # 同じ値の原子はまとめる: 各値の最後の位置の累積重みが W(x)
    idx_hi = np.searchsorted(points, x, side='right') - 1
    hi = cum[idx_hi]
    lo = np.concatenate([[0.0], hi[:-1]])
    return x, lo, np.minimum(hi, 1.0)


def ks_1d(we: WeightedEmpirical, cdf: Callable) -> float:
    """sup_x |F_{n,θ}(x) - F(x)| を原子上で厳密に計算する。F は連続な CDF。

    Raises
    ------
    ValueError
        d != 1、または重みか CDF の値に NaN がある。
    """
    if we.dim != 1:
        raise ValueError(f"ks_1d requires d = 1, got d = {we.dim}.")
    if np.any(np.isnan(we.log_weights)):
        raise ValueError("weights contain NaN.")

    x, w_lo, w_hi = _ecdf_steps(we)
    F = np.asarray(cdf(x), dtype=float)
    if np.any(np.isnan(F)):
        raise ValueError("reference CDF returned NaN.")

    d = max(np.max(np.abs(w_hi - F)), np.max(np.abs(w_lo - F)))
    return float(min(1.0, d))


def ks_two_sample(draws_a, draws_b) -> float:
    """古典的な 2 標本 KS 統計量。"""
    a = np.asarray(draws_a, dtype=float).ravel()
    b = np.asarray(draws_b, dtype=float).ravel()
    if a.size == 0 or b.size == 0:
        raise ValueError("both samples must be nonempty.")
    return float(stats.ks_2samp(a, b).statistic)


def ks_one_sample(draws, cdf: Callable) -> float:
    """等重みの標本と連続 CDF の KS 統計量。"""
    x = np.asarray(draws, dtype=float).ravel()
    if x.size == 0:
        raise ValueError("sample must be nonempty.")
    we = WeightedEmpirical(x, np.full(x.size, -math.log(x.size)), 0.0)
    return ks_1d(we, cdf)


def resample_ks_bound(effective_size: float, m: int, level: float=0.99) -> float:
    """m 個のリサンプルと真の分布の KS の上限の目安。

    重み付き経験分布のゆらぎ (有効標本サイズ ESS) とリサンプルのゆらぎを足し合わせ、
    Kolmogorov 分布の level 分位点を掛ける。
    """
    if not effective_size > 0:
        raise ValueError(f"effective sample size must be positive, got {effective_size}.")
    if m < 1:
        raise ValueError(f"m must be positive, got {m}.")
    scale = float(stats.kstwobign.ppf(level))
    return scale * (1.0 / math.sqrt(effective_size) + 1.0 / math.sqrt(m))


def rect_grid(box, grid_k: int) -> List[np.ndarray]:
    """各軸の格子点 lo + (hi - lo) j / k (j = 1, ..., k)。k を倍にすると元の格子を含む。"""
    lower = np.asarray(box[0], dtype=float)
    upper = np.asarray(box[1], dtype=float)
    if lower.shape != upper.shape or np.any(upper <= lower):
        raise ValueError("box must be (lower, upper) with upper > lower on every axis.")
    j = np.arange(1, grid_k + 1) / grid_k
    return [ lo + (hi - lo) * j for lo, hi in zip(lower, upper) ]


def ks_rect_hd(we: WeightedEmpirical, cdf_hd: Callable, compact_box, grid_k: int) -> float:
    """コンパクトな直方体内の grid_k^d 個の角 q で |F_{n,θ}(q) - F(q)| の最大値を取る。

    F_{n,θ}(q) は左下の象限 {x <= q} の重み。

    Parameters
    ----------
    we : WeightedEmpirical
        d >= 2 の重み付き経験分布。
    cdf_hd : Callable
        形状 (m, d) の角の配列を受け取り、象限の確率を返す関数。
    compact_box : (array_like, array_like)
        直方体の下端と上端。
    grid_k : int
        軸あたりの格子点数。

    Raises
    ------
    BudgetExceeded
        grid_k^d が 10^7 を超える。
    """
    d = we.dim
    if d < 2:
        raise ValueError(f"ks_rect_hd requires d >= 2, got d = {d}.")
    if grid_k < 1:
        raise ValueError(f"grid_k must be positive, got {grid_k}.")
    if d * math.log(grid_k) > math.log(MAX_GRID_EVALUATIONS):
        raise BudgetExceeded(f"grid_k^d = {grid_k}^{d} exceeds {MAX_GRID_EVALUATIONS} evaluations.")

    axes = rect_grid(compact_box, grid_k)
    if len(axes) != d:
        raise ValueError(f"box has {len(axes)} axes, weighted empirical has d = {d}.")

    # 原子は「その点以上の角」すべてに寄与する。軸 i の添字は x_i 以上の最初の格子点
    idx = np.column_stack([ np.searchsorted(a, we.points[:, i], side='left') for i, a in enumerate(axes) ])
    mass = np.zeros((grid_k + 1,) * d)
    np.add.at(mass, tuple(idx.T), we.weights)
    for axis in range(d):
        mass = np.cumsum(mass, axis=axis)
    mass = mass[(slice(0, grid_k),) * d]

    corners = np.stack(np.meshgrid(*axes, indexing='ij'), axis=-1).reshape(-1, d)
    ref = np.asarray(cdf_hd(corners), dtype=float).reshape((grid_k,) * d)
    value = float(np.max(np.abs(mass - ref)))
    logger.debug(f"ks_rect_hd: d={d}, grid_k={grid_k}, box={compact_box}, value={value}")
    return value


@dataclass
class RegimeReport(JsonMixin):
    """M_θ/n のスケジュールから判定した領域。

    admissible_rate_exponent は s_n = n^a が s_n^2 M_θ/n → 0 を満たす最大の a (0 と 1/2 の間)。
    """
    m_theta: float
    n: int
    ratio: float
    regime: str
    admissible_rate_exponent: float
    slope: float
    evidence: List[Tuple[int, float, float]]

    def __post_init__(self):
        if self.regime not in REGIMES:
            raise ValueError(f"unknown regime: '{self.regime}'.")
        if not 0.0 <= self.admissible_rate_exponent <= 0.5:
            raise ValueError(f"admissible rate exponent must lie in [0, 1/2], got {self.admissible_rate_exponent}.")

    def rows(self) -> List[dict]:
        return [ { 'n': n, 'm_theta': m, 'ratio': r } for n, m, r in self.evidence ]

    def as_dict(self) -> dict:
        return {
            'm_theta': self.m_theta,
            'n': self.n,
            'ratio': self.ratio,
            'regime': self.regime,
            'admissible_rate_exponent': self.admissible_rate_exponent,
            'slope': self.slope,
            'evidence': self.rows(),
        }

    def json_name(self) -> str:
        return 'regime'


def regime_classify(m_schedule: Sequence[Tuple[int, float]], tolerances: dict=None) -> RegimeReport:
    """(n, M_θ) のスケジュールから accurate / critical / undersampled を判定する。

    log(M_θ/n) を log n に直線回帰した傾き s を使う。|s| < regime_slope なら critical、
    s < 0 かつ最後の比が regime_ratio 未満なら accurate、それ以外は undersampled。
    """
    tol = dict(DEFAULT_TOLERANCES)
    tol.update(tolerances or {})

    rows = [ (int(n), float(m)) for n, m in m_schedule ]
    if len(rows) < 3:
        raise ValueError(f"regime_classify requires at least 3 schedule rows, got {len(rows)}.")
    ns = np.array([ n for n, _ in rows ], dtype=float)
    ms = np.array([ m for _, m in rows ], dtype=float)
    if np.any(np.diff(ns) <= 0):
        raise ValueError("schedule sizes n must be strictly increasing.")
    if np.any(~np.isfinite(ms)) or np.any(ms < 1):
        raise ValueError("M_theta values must be finite and at least 1.")

    ratios = ms / ns
    slope = float(np.polyfit(np.log(ns), np.log(ratios), 1)[0])

    if abs(slope) < tol['regime_slope']:
        regime = 'critical'
    elif slope < 0 and ratios[-1] < tol['regime_ratio']:
        regime = 'accurate'
    else:
        regime = 'undersampled'

    # critical と undersampled では正の率は許されない
    exponent = float(np.clip(-slope / 2.0, 0.0, 0.5)) if regime == 'accurate' else 0.0
    logger.debug(f"regime_classify: slope={slope}, final ratio={ratios[-1]}, regime={regime}")

    return RegimeReport(
        m_theta=float(ms[-1]), n=int(ns[-1]), ratio=float(ratios[-1]), regime=regime,
        admissible_rate_exponent=exponent, slope=slope,
        evidence=[ (n, m, m / n) for n, m in rows ],
    )


def ks_replicates(model: DistributionModel, tilt: TiltSpec, n: int, reps: int, seed: int,
                  workers: int=1, verbose: bool=False, stream: Sequence[int]=()) -> np.ndarray:
    """√n KS(F_{n,θ}, F_θ) のレプリケート。"""
    law = TiltedLaw(model, tilt)

    def one(rng):
        we = snis_weights(model.sample(n, rng), tilt)
        return math.sqrt(n) * ks_1d(we, law.cdf)

    return np.array(run_replicates(one, reps, seed, workers=workers, verbose=verbose, stream=stream))


def ks_slope(model: DistributionModel, tilt: TiltSpec, n_grid: Sequence[int], reps: int, seed: int,
             workers: int=1, verbose: bool=False) -> Tuple[float, List[float]]:
    """log(平均 KS) を log n に回帰した傾きと、各 n の平均 KS。"""
    if len(n_grid) < 2:
        raise ValueError("n_grid needs at least 2 sizes.")
    means = []
    for k, n in enumerate(n_grid):
        draws = ks_replicates(model, tilt, n, reps, seed, workers=workers, verbose=verbose, stream=(k,))
        means.append(float(np.mean(draws)) / math.sqrt(n))
    slope = float(np.polyfit(np.log(np.asarray(n_grid, dtype=float)), np.log(means), 1)[0])
    return slope, means
