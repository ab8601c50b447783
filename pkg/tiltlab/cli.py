"""コマンドラインインターフェース。

    tiltlab tilt --model Exponential:lambda=5 --n 100000 --theta 2 --seed 0 --out out
    tiltlab tilt --input points.csv --theta 1,1 --g power:1,2 --m 5000 --seed 0 --out out
    tiltlab diagnose --input schedule.csv --model Exponential:lambda=1 --out out
    tiltlab figures --figure exp6 --seed 0 --out out
    tiltlab verify --suite m-closed-forms --seed 0 --out out
    tiltlab prm --alpha 1 --c1 2 --reps 3000 --seed 0 --out out
    tiltlab gauss-sup --model Uniform01 --theta 1 --reps 4000 --seed 0 --out out

すべてのコマンドは出力ファイルを out/.tiltlab/ledger.db に記録し、同じ (実験, シード) の
過去の出力とハッシュが違えば警告して要約の deterministic を false にする。
"""
from __future__ import annotations

import argparse
import json
import logging
import sys

import numpy as np
import pandas as pd

from dataclasses import dataclass, field
from pathlib import Path

from typing import List, Optional, Sequence

from .config import ExperimentConfig
from .database import RunLedger
from .diagnostics import ks_1d, regime_classify
from .dist import DistributionModel, model_from_dict
from .errors import FactorizationError
from .figures import FIGURE_IDS, run_figure
from .io import read_points, read_schedule, write_draws, write_table, write_weights
from .limitlab import GaussCovSpec, PRMConfig, borell_band_check, default_grid, sample_z_cprm, simulate_sup_gauss
from .rng import make_rng
from .suites import SUITES, run_suite
from .tilt import TiltedLaw, m_theta_analytic, parse_g, resample, snis_weights
from .utils import JsonMixin

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1


@dataclass
class CommandSummary(JsonMixin):
    command: str
    experiment: str
    seed: int
    results: dict = field(default_factory=dict)
    outputs: List[str] = field(default_factory=list)
    passed: bool = True
    deterministic: bool = True

    def as_dict(self) -> dict:
        return {
            'command': self.command,
            'experiment': self.experiment,
            'seed': self.seed,
            'results': self.results,
            'outputs': self.outputs,
            'pass': self.passed,
            'deterministic': self.deterministic,
        }

    def json_name(self) -> str:
        return f"{self.command.replace('-', '_')}_summary"


def parse_model(value: str) -> DistributionModel:
    """--model の値をモデルにする。JSON ファイルのパス、JSON 文字列、'Family:key=value,...' のいずれか。"""
    if value is None:
        raise ValueError("a model is required.")
    path = Path(value)
    if value.endswith('.json') and path.exists():
        with open(path, 'r', encoding='utf-8') as f:
            return model_from_dict(json.load(f))
    if value.lstrip().startswith('{'):
        return model_from_dict(json.loads(value))

    family, _, rest = value.partition(':')
    params = {}
    for item in filter(None, rest.split(',')):
        key, sep, v = item.partition('=')
        if not sep:
            raise ValueError(f"model parameter must be key=value, got '{item}'.")
        params[key.strip()] = float(v)
    return model_from_dict({ 'family': family.strip(), 'params': params })


def parse_theta(value: str):
    parts = [ float(v) for v in str(value).split(',') if v.strip() != '' ]
    if not parts:
        raise ValueError(f"theta must be a number or a comma-separated vector, got '{value}'.")
    return parts[0] if len(parts) == 1 else parts


def _finish(summary: CommandSummary, out_dir: Path, paths: Sequence[Path]) -> CommandSummary:
    """データファイルを台帳に記録したあとで要約を書き、要約も記録する。"""
    ledger = RunLedger(out_dir, summary.command)
    summary.deterministic = ledger.record(paths, summary.experiment, summary.seed)
    summary.outputs = sorted(Path(p).name for p in paths)
    summary_path = summary.save(out_dir)
    ledger.record([summary_path], summary.experiment, summary.seed)
    return summary


def cmd_tilt(args) -> CommandSummary:
    out_dir = Path(args.out)
    theta = parse_theta(args.theta)
    tilt = parse_g(theta, args.g)

    model = parse_model(args.model) if args.model else None
    if args.input:
        points = read_points(args.input)
        experiment = Path(args.input).stem
    elif model is not None:
        if args.n is None:
            raise ValueError("--n is required when sampling from --model.")
        points = model.sample(args.n, make_rng(args.seed, 0))
        experiment = model.family
    else:
        raise ValueError("either --input or --model is required.")

    dim = 1 if points.ndim == 1 else points.shape[1]
    if dim != tilt.dim:
        raise ValueError(f"dimension mismatch: data has d={dim}, theta has {tilt.dim} entries.")

    we = snis_weights(points, tilt)
    m = args.m if args.m is not None else we.n
    draws = resample(we, m, make_rng(args.seed, 1))

    paths = [ write_weights(out_dir / 'weights.csv', we) ]
    if dim == 1:
        paths.append(write_draws(out_dir / 'resampled.csv', draws, name='x'))
    else:
        paths.append(write_table(out_dir / 'resampled.csv',
                                 pd.DataFrame(draws, columns=[ f"x{i + 1}" for i in range(dim) ])))

    results = dict(we.as_dict())
    results['theta'] = theta
    results['g'] = tilt.as_dict()
    results['m'] = int(m)

    if model is not None:
        if model.dim != dim:
            raise ValueError(f"dimension mismatch: model has d={model.dim}, data has d={dim}.")
        results['model'] = model.as_dict()
        results['m_theta_analytic'] = m_theta_analytic(model, tilt)
        if dim == 1 and not model.is_discrete:
            law = TiltedLaw(model, tilt)
            results['ks_exact'] = ks_1d(we, law.cdf)
            lo, hi = law.quantile(np.array([1e-4, 1.0 - 1e-4]))
            density, edges = np.histogram(draws, bins=50, range=(float(lo), float(hi)), density=True)
            centers = 0.5 * (edges[:-1] + edges[1:])
            paths.append(write_table(out_dir / 'tilted_density.csv', pd.DataFrame({
                'bin_center': centers, 'resampled_density': density, 'true_density': law.pdf(centers),
            })))

    summary = CommandSummary('tilt', experiment, args.seed, results=results)
    return _finish(summary, out_dir, paths)


def cmd_diagnose(args) -> CommandSummary:
    out_dir = Path(args.out)
    if not args.input:
        raise ValueError("--input schedule CSV is required.")
    kind, rows = read_schedule(args.input)
    if kind == 'theta':
        if not args.model:
            raise ValueError("a (n, theta) schedule needs --model to compute M_theta.")
        model = parse_model(args.model)
        g = args.g
        m_schedule = [ (n, m_theta_analytic(model, parse_g(theta, g))) for n, theta in rows ]
    else:
        m_schedule = rows

    report = regime_classify(m_schedule)
    path = report.save(out_dir)
    summary = CommandSummary('diagnose', Path(args.input).stem, args.seed, results=report.as_dict())
    return _finish(summary, out_dir, [path])


def cmd_figures(args) -> CommandSummary:
    out_dir = Path(args.out)
    ids = list(FIGURE_IDS) if args.figure == 'all' else [args.figure]
    paths, results, passed = [], {}, True
    for figure_id in ids:
        result = run_figure(figure_id, out_dir, args.seed, m=args.m or 10 ** 4, verbose=args.verbose)
        paths.extend(result.paths)
        results[figure_id] = { 'checks': result.checks, 'pass': result.passed }
        passed = passed and result.passed
        for name, value in result.checks.items():
            print(f"{figure_id} {name} = {value:.6g}")
    summary = CommandSummary('figures', args.figure, args.seed, results=results, passed=passed)
    return _finish(summary, out_dir, paths)


def cmd_verify(args) -> CommandSummary:
    out_dir = Path(args.out)
    reports = run_suite(args.suite, args.seed, out_dir)
    paths = [ r.save(out_dir) for r in reports ]
    results = { r.suite: r.passed for r in reports }
    for r in reports:
        print(f"{r.suite}: {'pass' if r.passed else 'FAIL'}")
    summary = CommandSummary('verify', args.suite, args.seed, results=results,
                             passed=all(r.passed for r in reports))
    return _finish(summary, out_dir, paths)


def cmd_prm(args) -> CommandSummary:
    out_dir = Path(args.out)
    config = PRMConfig(alpha=args.alpha, c1=args.c1, tail_tol=args.tail_tol, truncation_T=args.T)
    draws, redraws = sample_z_cprm(config, args.reps, args.seed, return_redraws=True,
                                   workers=args.workers, verbose=args.verbose)
    paths = [ write_draws(out_dir / 'z_cprm.csv', draws), config.save(out_dir) ]
    results = { 'config': config.as_dict(), 'reps': int(args.reps), 'redraws': redraws,
                'mean': float(np.mean(draws)) }
    summary = CommandSummary('prm', f"alpha{args.alpha:g}_c{args.c1:g}", args.seed, results=results)
    return _finish(summary, out_dir, paths)


def cmd_gauss_sup(args) -> CommandSummary:
    out_dir = Path(args.out)
    model = parse_model(args.model)
    theta = parse_theta(args.theta)
    if isinstance(theta, list):
        raise ValueError("gauss-sup requires a scalar theta.")
    spec = GaussCovSpec(model, theta, default_grid(model, theta, args.k))
    draws = simulate_sup_gauss(spec, args.reps, args.seed)
    paths = [ write_draws(out_dir / 'sup_gauss.csv', draws) ]
    results = { 'spec': spec.as_dict(), 'mean': float(np.mean(draws)) }
    passed = True
    if args.reps >= 1000:
        band = borell_band_check(draws, spec.m_theta)
        paths.append(band.save(out_dir))
        results['borell_band'] = band.ok
        passed = band.ok
    summary = CommandSummary('gauss-sup', model.family, args.seed, results=results, passed=passed)
    return _finish(summary, out_dir, paths)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='tiltlab', description="Exponential tilting with self-normalized importance sampling.")
    parser.add_argument('--log-level', default='WARNING', choices=['DEBUG', 'INFO', 'WARNING', 'ERROR'])
    sub = parser.add_subparsers(dest='command', required=True)

    def common(p, out=True):
        p.add_argument('--seed', type=int, default=None, help="base seed (non-negative integer)")
        p.add_argument('--config', default=None, help="experiment config JSON; flags win")
        p.add_argument('--verbose', action='store_true')
        p.add_argument('--workers', type=int, default=1)
        if out:
            p.add_argument('--out', default=None)

    p = sub.add_parser('tilt', help="weight and resample a sample")
    common(p)
    p.add_argument('--input', default=None)
    p.add_argument('--model', default=None)
    p.add_argument('--theta', required=True)
    p.add_argument('--g', default='identity')
    p.add_argument('--n', type=int, default=None)
    p.add_argument('--m', type=int, default=None)
    p.set_defaults(func=cmd_tilt)

    p = sub.add_parser('diagnose', help="classify the regime of a schedule")
    common(p)
    p.add_argument('--input', default=None)
    p.add_argument('--model', default=None)
    p.add_argument('--g', default='identity')
    p.set_defaults(func=cmd_diagnose)

    p = sub.add_parser('figures', help="write figure data files")
    common(p)
    p.add_argument('--figure', required=True, choices=list(FIGURE_IDS) + ['all'])
    p.add_argument('--m', type=int, default=None)
    p.set_defaults(func=cmd_figures)

    p = sub.add_parser('verify', help="run an acceptance suite")
    common(p)
    p.add_argument('--suite', required=True, choices=list(SUITES) + ['all'])
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser('prm', help="draw the critical-regime limit")
    common(p)
    p.add_argument('--alpha', type=float, required=True)
    p.add_argument('--c1', type=float, required=True)
    p.add_argument('--T', type=float, default=None)
    p.add_argument('--tail-tol', dest='tail_tol', type=float, default=1e-8)
    p.add_argument('--reps', type=int, default=3000)
    p.set_defaults(func=cmd_prm)

    p = sub.add_parser('gauss-sup', help="draw the sup of the limiting Gaussian field")
    common(p)
    p.add_argument('--model', required=True)
    p.add_argument('--theta', required=True)
    p.add_argument('--reps', type=int, default=4000)
    p.add_argument('--k', type=int, default=512)
    p.set_defaults(func=cmd_gauss_sup)

    return parser


def _apply_config(args):
    """--config の値を、フラグで与えられなかった項目にだけ使う。"""
    if args.config:
        config = ExperimentConfig.load(args.config)
        config = config.override(seed=args.seed, output_dir=args.out)
        args.seed, args.out = config.seed, config.output_dir
        if getattr(args, 'model', 'absent') is None:
            args.model = json.dumps(config.model)
    if args.seed is None:
        args.seed = 0
    if args.out is None:
        args.out = 'out'
    return args


def main(argv: Optional[Sequence[str]]=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=getattr(logging, args.log_level),
                        format='%(asctime)s %(levelname)s %(name)s: %(message)s')
    try:
        args = _apply_config(args)
        summary = args.func(args)
    except (ValueError, KeyError, FileNotFoundError, FactorizationError) as e:
        # IngestionError, AssumptionViolated, UndefinedTiltError, BudgetExceeded は ValueError の派生
        logger.error(f"{args.command}: {e}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_FAILURE

    print(summary.dumps())
    if not summary.passed:
        return EXIT_FAILURE
    return EXIT_OK


if __name__ == '__main__':
    sys.exit(main())
