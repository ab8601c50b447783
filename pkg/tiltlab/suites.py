"""受け入れ基準を確かめるスイート。

各スイートは (seed, out_dir) を受け取り、基準ごとの値・しきい値・合否を持つ SuiteReport を返す。
実行時間はログにだけ出し、レポートには含めない (同じシードで同じ JSON になる)。
"""
from __future__ import annotations

import logging
import math
import time

import numpy as np

from dataclasses import dataclass, field
from pathlib import Path
from scipy import stats

from typing import Callable, Dict, List

from .asym1d import gamma_limit_distance, karamata_ratio, scaled_tilted_cdf
from .asymhd import mvrv_model, mvrv_ratio
from .config import DEFAULT_TOLERANCES
from .diagnostics import ks_1d, ks_one_sample, ks_slope, ks_two_sample, resample_ks_bound
from .dist import Beta, Exponential, StdNormalVec, TwoDExample, Uniform01
from .figures import FIGURE_IDS, run_figure
from .limitlab import (
    GaussCovSpec, PRMConfig, borell_band_check, gauss_cov, sample_z_cprm, simulate_prm_1d,
    simulate_sup_gauss,
)
from .rng import child_seed, make_rng, run_replicates
from .tilt import TiltedLaw, TiltSpec, m_theta_analytic, resample, snis_weights, weighted_cdf
from .unbounded import (
    TailProfile, gaussian_limit_transform, laplace_geometry, laplace_normalizer, log_m_theta_laplace,
    m_growth_constants,
)
from .utils import JsonMixin

logger = logging.getLogger(__name__)


@dataclass
class Criterion:
    name: str
    value: float
    threshold: object
    passed: bool

    def as_dict(self) -> dict:
        return { 'name': self.name, 'value': self.value, 'threshold': self.threshold, 'pass': self.passed }


@dataclass
class SuiteReport(JsonMixin):
    suite: str
    seed: int
    criteria: List[Criterion] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.criteria)

    def less(self, name: str, value: float, threshold: float):
        self.criteria.append(Criterion(name, float(value), threshold, bool(value < threshold)))

    def greater(self, name: str, value: float, threshold: float):
        self.criteria.append(Criterion(name, float(value), threshold, bool(value > threshold)))

    def within(self, name: str, value: float, lo: float, hi: float):
        self.criteria.append(Criterion(name, float(value), [lo, hi], bool(lo <= value <= hi)))

    def as_dict(self) -> dict:
        return { 'suite': self.suite, 'seed': self.seed, 'pass': self.passed,
                 'criteria': [ c.as_dict() for c in self.criteria ] }

    def json_name(self) -> str:
        return f"verify_{self.suite.replace('-', '_')}"


def _rel(a: float, b: float) -> float:
    return abs(a - b) / abs(b)


def suite_m_closed_forms(seed: int, out_dir: Path=None) -> SuiteReport:
    report = SuiteReport('m-closed-forms', seed)
    tol = DEFAULT_TOLERANCES['closed_form_rel']
    for n in (16, 100, 400):
        theta = 0.5 - 1.0 / math.sqrt(n)
        value = m_theta_analytic(Exponential(1.0), TiltSpec(theta))
        exact = (math.sqrt(n) + 2.0) ** 2 / (8.0 * math.sqrt(n))
        report.less(f"exp1_n{n}_rel_error", _rel(value, exact), tol)
    value = m_theta_analytic(StdNormalVec(1), TiltSpec(2.0))
    report.less("std_normal_c2_rel_error", _rel(value, math.exp(4.0)), tol)
    return report


def suite_accurate_fidelity(seed: int, out_dir: Path=None, seeds: int=20, n: int=10 ** 5) -> SuiteReport:
    report = SuiteReport('accurate-fidelity', seed)
    model, tilt = Exponential(1.0), TiltSpec(0.3)
    ref = stats.expon(scale=1.0 / 0.7).cdf
    values = run_replicates(lambda rng: ks_1d(snis_weights(model.sample(n, rng), tilt), ref), seeds, seed)
    report.less("mean_ks_exp07", float(np.mean(values)), DEFAULT_TOLERANCES['accurate_ks'])
    return report


def suite_sqrt_rate(seed: int, out_dir: Path=None, reps: int=20) -> SuiteReport:
    report = SuiteReport('sqrt-rate', seed)
    n_grid = [ 2 ** k for k in range(10, 19) ]
    slope, _ = ks_slope(Uniform01(), TiltSpec(1.0), n_grid, reps, seed)
    lo, hi = DEFAULT_TOLERANCES['sqrt_rate_slope']
    report.within("log_ks_slope", slope, lo, hi)
    return report


GAUSS_PAIRS = ((0.3, 0.7), (0.1, 0.5), (0.5, 0.5), (0.2, 0.9), (0.8, 0.8))


def suite_gauss_field(seed: int, out_dir: Path=None, n: int=4096, reps: int=4000) -> SuiteReport:
    report = SuiteReport('gauss-field', seed)
    model, tilt = Uniform01(), TiltSpec(1.0)
    law = TiltedLaw(model, tilt)
    xs = np.unique(np.array(GAUSS_PAIRS).ravel())

    def one(rng):
        we = snis_weights(model.sample(n, rng), tilt)
        field_values = math.sqrt(n) * (weighted_cdf(we, xs) - law.cdf(xs))
        return math.sqrt(n) * ks_1d(we, law.cdf), field_values

    results = run_replicates(one, reps, seed, stream=(0,))
    sup_mc = np.array([ r[0] for r in results ])
    fields = np.array([ r[1] for r in results ])
    cov_mc = np.cov(fields, rowvar=False)

    spec = GaussCovSpec(model, tilt)
    diffs = []
    for x1, x2 in GAUSS_PAIRS:
        i, j = int(np.searchsorted(xs, x1)), int(np.searchsorted(xs, x2))
        diffs.append(abs(float(gauss_cov(spec, x1, x2)) - cov_mc[i, j]))
    report.less("cov_max_abs_diff", max(diffs), DEFAULT_TOLERANCES['gauss_cov_abs'])

    sup_gauss = simulate_sup_gauss(spec, reps, make_rng(seed, 1))
    report.less("sup_two_sample_ks", ks_two_sample(sup_mc, sup_gauss), DEFAULT_TOLERANCES['gauss_sup_ks'])

    band = borell_band_check(sup_gauss, spec.m_theta)
    report.criteria.append(Criterion("borell_band", float(max(e - b for e, b in zip(band.empirical, band.bound))),
                                     'exceedance <= bound + 3 se', band.ok))
    if out_dir is not None:
        band.save(out_dir)
    return report


def suite_karamata(seed: int, out_dir: Path=None) -> SuiteReport:
    report = SuiteReport('karamata', seed)
    model, theta = Uniform01(), 1e3
    tol = DEFAULT_TOLERANCES['karamata_rel']
    report.less("karamata_ratio_rel_error", _rel(karamata_ratio(model, theta), 1.0), tol)
    report.less("m_over_theta_rel_error", _rel(m_theta_analytic(model, TiltSpec(theta)) / theta, 0.5), tol)
    return report


def suite_gamma_limit(seed: int, out_dir: Path=None, n: int=10 ** 6, m: int=10 ** 4) -> SuiteReport:
    """Beta(2, 5), θ = 50。

    厳密な法則と Γ(5, 1) の距離は決定的に測り、SNIS のリサンプルは厳密な法則と ESS から決まる上限で比べる。
    n = 10^6 では ESS が 100 に届かず、Γ(5, 1) との直接の KS は 0.03 を下回らない。
    """
    report = SuiteReport('gamma-limit', seed)
    model, theta = Beta(2.0, 5.0), 50.0
    rng = make_rng(seed, 0)
    we = snis_weights(model.sample(n, rng), TiltSpec(theta))
    transformed = theta * (1.0 - resample(we, m, rng))

    report.less("law_distance_gamma_5_1", gamma_limit_distance(model, theta), DEFAULT_TOLERANCES['gamma_limit_ks'])
    bound = resample_ks_bound(we.effective_sample_size, m, DEFAULT_TOLERANCES['resample_ks_level'])
    report.less("ks_exact_law", ks_one_sample(transformed, scaled_tilted_cdf(model, theta)), bound)
    return report


def critical_draws(n: int, reps: int, seed: int) -> np.ndarray:
    """Uniform01, θ = 2n での θ(1 - R) を SNIS のレプリケートごとに 1 つずつ引く。"""
    model, theta = Uniform01(), 2.0 * n
    tilt = TiltSpec(theta)

    def one(rng):
        we = snis_weights(model.sample(n, rng), tilt)
        return theta * (1.0 - float(resample(we, 1, rng)[0]))

    return np.array(run_replicates(one, reps, seed))


def suite_critical(seed: int, out_dir: Path=None, n: int=200, reps: int=3000) -> SuiteReport:
    report = SuiteReport('critical', seed)
    snis = critical_draws(n, reps, child_seed(seed, 0))
    z = sample_z_cprm(PRMConfig(alpha=1.0, c1=2.0, truncation_T=40.0), reps, child_seed(seed, 1))
    gamma = make_rng(seed, 2).gamma(1.0, 1.0, size=reps)
    report.less("ks_vs_z_cprm", ks_two_sample(snis, z), DEFAULT_TOLERANCES['critical_ks'])
    report.greater("ks_vs_gamma_1_1", ks_two_sample(snis, gamma), DEFAULT_TOLERANCES['critical_gamma_ks'])
    return report


def suite_undersampled(seed: int, out_dir: Path=None, n: int=50, reps: int=500, ks_reps: int=4000) -> SuiteReport:
    """最大重みの割合は reps 個、n(1 - R) の KS は ks_reps 個のレプリケートで測る。"""
    report = SuiteReport('undersampled', seed)
    model, tilt = Uniform01(), TiltSpec(float(n) ** 3)

    def one(rng):
        we = snis_weights(model.sample(n, rng), tilt)
        return we.max_weight, n * (1.0 - float(resample(we, 1, rng)[0]))

    weights = [ r[0] for r in run_replicates(one, reps, seed, stream=(0,)) ]
    fraction = float(np.mean(np.array(weights) >= DEFAULT_TOLERANCES['undersampled_max_weight']))
    report.greater("max_weight_fraction", fraction, DEFAULT_TOLERANCES['undersampled_fraction'])

    draws = [ r[1] for r in run_replicates(one, ks_reps, seed, stream=(1,)) ]
    report.less("ks_vs_exp1", ks_one_sample(draws, stats.expon.cdf), DEFAULT_TOLERANCES['undersampled_ks'])
    return report


def suite_multivariate(seed: int, out_dir: Path=None, c: float=100.0, n: int=10 ** 6,
                       m: int=10 ** 4, pooled: int=16) -> SuiteReport:
    """(c) の KS は pooled 個の独立な SNIS 推定量から m 個ずつリサンプルしたものを合わせて測る。"""
    report = SuiteReport('multivariate', seed)
    model, theta = TwoDExample(), np.array([1.0, 1.0])
    mvrv = mvrv_model(model, theta)

    ratio = mvrv_ratio(mvrv, 1e-3, ([0.0, 0.0], [1.0, 1.0]))
    report.less("mvrv_ratio_rel_error", _rel(ratio, 0.5), DEFAULT_TOLERANCES['mvrv_rel'])

    m200 = m_theta_analytic(model, TiltSpec(200.0 * theta)) / 200.0 ** 2
    report.less("m_over_c2_rel_error", _rel(m200, 0.5), DEFAULT_TOLERANCES['mvrv_m_rel'])

    tilt = TiltSpec(c * theta)
    draws = np.vstack(run_replicates(lambda rng: resample(snis_weights(model.sample(n, rng), tilt), m, rng),
                                     pooled, seed, stream=(0,)))
    scaled = c * (1.0 - draws)
    for i in range(2):
        report.less(f"ks_coordinate_{i + 1}", ks_one_sample(scaled[:, i], stats.expon.cdf), DEFAULT_TOLERANCES['mvrv_ks'])
    corr = float(np.corrcoef(scaled[:, 0], scaled[:, 1])[0, 1])
    report.less("abs_cross_correlation", abs(corr), DEFAULT_TOLERANCES['mvrv_corr'])
    return report


def suite_unbounded_gaussian(seed: int, out_dir: Path=None, draws: int=10 ** 4) -> SuiteReport:
    report = SuiteReport('unbounded-gaussian', seed)
    model = StdNormalVec(1)
    profile = TailProfile.from_model(model)
    tol = DEFAULT_TOLERANCES['laplace_rel']

    for c in (2.0, 5.0, 10.0):
        report.less(f"laplace_normalizer_c{c:g}_rel_error",
                    _rel(laplace_normalizer(profile, c, [1.0]), math.exp(c * c / 2.0)), tol)

    gc = m_growth_constants(profile)
    report.less("p_abs_error", abs(gc.p - 1.0), tol)
    report.less("q_corrected_abs_error", abs(gc.q_corrected - 1.0), tol)
    for c in (2.0, 5.0):
        exact = math.log(m_theta_analytic(model, TiltSpec(c)))
        report.less(f"log_m_c{c:g}_abs_error", abs(log_m_theta_laplace(profile, c) - exact), 1e-9)

    c = 5.0
    geometry = laplace_geometry(profile, c, [1.0])
    x = TiltedLaw(model, TiltSpec(c)).sample(draws, make_rng(seed, 0))
    z = gaussian_limit_transform(x, geometry)
    report.less("ks_transformed_vs_normal", ks_one_sample(z, stats.norm.cdf), DEFAULT_TOLERANCES['laplace_ks'])
    return report


def suite_figures(seed: int, out_dir: Path=None) -> SuiteReport:
    report = SuiteReport('figures', seed)
    fig_dir = Path(out_dir if out_dir is not None else 'out') / 'figures'
    for figure_id in FIGURE_IDS:
        result = run_figure(figure_id, fig_dir, seed)
        for name, value in result.checks.items():
            report.criteria.append(Criterion(f"{figure_id}_{name}", float(value), '', result.passed))
    return report


def prm_counts(config: PRMConfig, sims: int, seed: int, cells=((0.0, 1.0), (1.0, 2.0))) -> np.ndarray:
    """sims 回の PRM で、各セル [a, b) に入った原子の数と総数。形状 (sims, len(cells) + 1)。"""
    rng = make_rng(seed)
    out = np.empty((sims, len(cells) + 1), dtype=int)
    for s in range(sims):
        atoms = simulate_prm_1d(config, rng)
        for j, (a, b) in enumerate(cells):
            out[s, j] = int(np.count_nonzero((atoms >= a) & (atoms < b)))
        out[s, -1] = atoms.size
    return out


def poisson_chisquare(counts, mean: float) -> float:
    """計数が Poisson(mean) に従うかのカイ二乗検定の p 値。期待度数が 5 未満の両側の裾はまとめる。"""
    counts = np.asarray(counts, dtype=int)
    total = counts.size
    law = stats.poisson(mean)
    k_min = max(0, int(law.ppf(5.0 / total)))
    k_max = max(k_min + 1, int(law.ppf(1.0 - 5.0 / total)))
    inner = np.arange(k_min + 1, k_max)
    observed = np.concatenate([
        [ np.count_nonzero(counts <= k_min) ],
        [ np.count_nonzero(counts == k) for k in inner ],
        [ np.count_nonzero(counts >= k_max) ],
    ])
    probs = np.concatenate([ [ law.cdf(k_min) ], law.pmf(inner), [ law.sf(k_max - 1) ] ])
    return float(stats.chisquare(observed, probs * total).pvalue)


def suite_prm(seed: int, out_dir: Path=None, sims: int=10 ** 5) -> SuiteReport:
    report = SuiteReport('prm', seed)
    config = PRMConfig(alpha=1.0, c1=10.0, truncation_T=3.0)
    counts = prm_counts(config, sims, seed)
    mean_total = config.truncation_T ** config.alpha
    report.less("mean_total_rel_error", _rel(float(counts[:, -1].mean()), mean_total), 0.01)
    report.greater("chisquare_pvalue_total", poisson_chisquare(counts[:, -1], mean_total),
                   DEFAULT_TOLERANCES['prm_pvalue'])
    report.greater("chisquare_pvalue_0_1", poisson_chisquare(counts[:, 0], 1.0), DEFAULT_TOLERANCES['prm_pvalue'])
    corr = float(np.corrcoef(counts[:, 0], counts[:, 1])[0, 1])
    report.less("abs_corr_disjoint_cells", abs(corr), DEFAULT_TOLERANCES['prm_corr'])
    return report


SUITES: Dict[str, Callable[..., SuiteReport]] = {
    'm-closed-forms': suite_m_closed_forms,
    'accurate-fidelity': suite_accurate_fidelity,
    'sqrt-rate': suite_sqrt_rate,
    'gauss-field': suite_gauss_field,
    'karamata': suite_karamata,
    'gamma-limit': suite_gamma_limit,
    'critical': suite_critical,
    'undersampled': suite_undersampled,
    'multivariate': suite_multivariate,
    'unbounded-gaussian': suite_unbounded_gaussian,
    'figures': suite_figures,
    'prm': suite_prm,
}


def run_suite(suite: str, seed: int, out_dir: Path=None) -> List[SuiteReport]:
    """suite を実行する。'all' ならすべてのスイートを順に実行する。

    Raises
    ------
    KeyError
        未知のスイート名。
    """
    if suite == 'all':
        names = list(SUITES)
    elif suite in SUITES:
        names = [suite]
    else:
        raise KeyError(f"unknown suite: '{suite}'. choose from {list(SUITES) + ['all']}.")

    reports = []
    for name in names:
        start = time.perf_counter()
        report = SUITES[name](seed, out_dir)
        logger.info(f"suite '{name}': {'pass' if report.passed else 'FAIL'} in {time.perf_counter() - start:.2f} s")
        reports.append(report)
    return reports
