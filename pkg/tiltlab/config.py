"""実験設定 (ExperimentConfig) と判定しきい値の表。

設定は実験ごとに 1 つの JSON ファイルで、コマンドラインのフラグで上書きできる (フラグが優先)。
シードは常に明示的な整数で、時刻由来のエントロピーは使わない。
"""
from __future__ import annotations

import json
import logging

from dataclasses import dataclass, field, replace
from pathlib import Path

from typing import Dict, List, Optional, Tuple

from .dist import DistributionModel, model_from_dict
from .utils import JsonMixin

logger = logging.getLogger(__name__)

DEFAULT_TOLERANCES = {
    # 領域の分類
    'regime_ratio': 0.1,
    'regime_slope': 0.1,
    # 受け入れ基準
    'closed_form_rel': 1e-12,
    'accurate_ks': 0.02,
    'sqrt_rate_slope': (-0.65, -0.35),
    'gauss_cov_abs': 0.02,
    'gauss_sup_ks': 0.08,
    'karamata_rel': 0.01,
    'gamma_limit_ks': 0.03,
    'resample_ks_level': 0.99,
    'critical_ks': 0.05,
    'critical_gamma_ks': 0.1,
    'undersampled_max_weight': 0.99,
    'undersampled_fraction': 0.95,
    'undersampled_ks': 0.05,
    'mvrv_rel': 0.01,
    'mvrv_m_rel': 0.02,
    'mvrv_ks': 0.05,
    'mvrv_corr': 0.05,
    'laplace_rel': 1e-12,
    'laplace_ks': 0.02,
    'figure_ks': 0.05,
    'figure_max_weight': 0.9,
    'prm_pvalue': 0.01,
    'prm_corr': 0.01,
}


@dataclass(frozen=True)
class ExperimentConfig(JsonMixin):
    """1 つの実験の設定。

    Attributes
    ----------
    id : str
        実験の識別名。
    model : dict
        {family, params} 形式のモデル指定。
    schedule : List[Tuple[int, float]]
        (n, θ) の列。
    seed : int
        基底シード。
    output_dir : str
        出力先ディレクトリ。
    replicates : Dict[str, int]
        レプリケート数などの名前付きの整数。
    tolerances : Dict[str, float]
        DEFAULT_TOLERANCES に対する上書き。
    """
    id: str
    model: dict
    schedule: List[Tuple[int, float]] = field(default_factory=list)
    seed: int = 0
    output_dir: str = 'out'
    replicates: Dict[str, int] = field(default_factory=dict)
    tolerances: Dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if not self.id:
            raise ValueError("experiment id must not be empty.")
        if isinstance(self.seed, bool) or not isinstance(self.seed, int) or self.seed < 0:
            raise ValueError(f"seed must be an explicit non-negative integer, got {self.seed!r}.")
        schedule = [ (int(n), float(theta)) for n, theta in self.schedule ]
        if any(n < 1 for n, _ in schedule):
            raise ValueError("schedule sizes n must be positive.")
        object.__setattr__(self, 'schedule', schedule)
        unknown = set(self.tolerances) - set(DEFAULT_TOLERANCES)
        if unknown:
            raise KeyError(f"unknown tolerance keys: {sorted(unknown)}.")

    def build_model(self) -> DistributionModel:
        return model_from_dict(self.model)

    def tolerance(self, key: str):
        if key in self.tolerances:
            return self.tolerances[key]
        return DEFAULT_TOLERANCES[key]

    def override(self, **flags) -> ExperimentConfig:
        """None でないフラグで上書きした新しい設定を返す。"""
        updates = { k: v for k, v in flags.items() if v is not None }
        unknown = set(updates) - set(self.__dataclass_fields__)
        if unknown:
            raise KeyError(f"unknown config fields: {sorted(unknown)}.")
        if updates:
            logger.debug(f"config '{self.id}' overridden by flags: {sorted(updates)}")
        return replace(self, **updates)

    def as_dict(self) -> dict:
        return {
            'id': self.id,
            'model': self.model,
            'schedule': [ [n, theta] for n, theta in self.schedule ],
            'seed': self.seed,
            'output_dir': self.output_dir,
            'replicates': dict(self.replicates),
            'tolerances': dict(self.tolerances),
        }

    def json_name(self) -> str:
        return f"{self.id}_config"

    @classmethod
    def from_dict(cls, spec: dict) -> ExperimentConfig:
        if 'id' not in spec or 'model' not in spec:
            raise KeyError("experiment config requires 'id' and 'model'.")
        return cls(
            id=spec['id'], model=spec['model'], schedule=spec.get('schedule', []),
            seed=spec.get('seed', 0), output_dir=spec.get('output_dir', 'out'),
            replicates=spec.get('replicates', {}), tolerances=spec.get('tolerances', {}),
        )

    @classmethod
    def load(cls, path: Path) -> ExperimentConfig:
        path = Path(path)
        if not path.exists():
            raise FileNotFoundError(f"config file '{path}' does not exist.")
        with open(path, 'r', encoding='utf-8') as f:
            return cls.from_dict(json.load(f))


def check_unique_ids(configs: List[ExperimentConfig]):
    """設定の id が重複していないことを確かめる。"""
    seen = set()
    for c in configs:
        if c.id in seen:
            raise ValueError(f"duplicate experiment id: '{c.id}'.")
        seen.add(c.id)


def tolerance(key: str, overrides: Optional[dict]=None):
    if overrides and key in overrides:
        return overrides[key]
    return DEFAULT_TOLERANCES[key]
