"""CSV の読み書き。

書式はカンマ区切り、小数点 '.'、改行 LF、UTF-8 で固定する。浮動小数点は 17 桁で書くので、
書いたファイルを読み戻すと値はビット単位で一致する。
"""
from __future__ import annotations

import logging
import math

import numpy as np
import pandas as pd

from pathlib import Path

from typing import List, Sequence, Tuple

from .errors import IngestionError
from .tilt import WeightedEmpirical

logger = logging.getLogger(__name__)

FLOAT_FORMAT = '%.17g'


def write_table(path: Path, df: pd.DataFrame) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    df.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator='\n', encoding='utf-8')
    logger.debug(f"wrote {len(df)} rows to '{path}'")
    return path


def _is_number(s: str) -> bool:
    try:
        float(s)
    except ValueError:
        return False
    return True


def read_table(path: Path, columns: Sequence[str]=None) -> pd.DataFrame:
    """数値だけからなる CSV を読む。ヘッダー行はあってもなくてもよい。

    ヘッダーがない場合の列名は columns、なければ x1, x2, ...。

    Raises
    ------
    FileNotFoundError
        ファイルが存在しない。
    IngestionError
        空のファイル、列数の合わない行、数値でないセルがある。row は 1 始まりのデータ行番号。
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"input file '{path}' does not exist.")
    try:
        raw = pd.read_csv(path, header=None, dtype=str, keep_default_na=False, skip_blank_lines=True)
    except pd.errors.EmptyDataError as e:
        raise IngestionError(f"'{path}' is empty.") from e
    except pd.errors.ParserError as e:
        raise IngestionError(f"'{path}' is not a valid CSV: {e}") from e

    if raw.shape[0] == 0:
        raise IngestionError(f"'{path}' is empty.")

    first = [ str(v).strip() for v in raw.iloc[0] ]
    if not all(_is_number(v) for v in first if v != ''):
        header = first
        raw = raw.iloc[1:].reset_index(drop=True)
    elif columns is not None:
        header = list(columns)
    else:
        header = [ 'x' ] if raw.shape[1] == 1 else [ f"x{i + 1}" for i in range(raw.shape[1]) ]

    if len(header) != raw.shape[1]:
        raise IngestionError(f"'{path}': header has {len(header)} columns, data has {raw.shape[1]}.")
    if raw.shape[0] == 0:
        raise IngestionError(f"'{path}' has no data rows.")

    values = np.empty(raw.shape, dtype=float)
    for i, row in enumerate(raw.itertuples(index=False), start=1):
        for j, cell in enumerate(row):
            if not isinstance(cell, str):
                raise IngestionError(f"'{path}': row {i} is missing column '{header[j]}'.", row=i)
            cell = cell.strip()
            try:
                v = float(cell)
            except ValueError:
                raise IngestionError(f"'{path}': row {i} column '{header[j]}' is not a number: '{cell}'.", row=i) from None
            if math.isnan(v):
                raise IngestionError(f"'{path}': row {i} column '{header[j]}' is NaN.", row=i)
            values[i - 1, j] = v

    return pd.DataFrame(values, columns=header)


def write_points(path: Path, points) -> Path:
    """サンプル (n,) または (n, d) を CSV に書く。列名は x または x1, ..., xd。"""
    x = np.asarray(points, dtype=float)
    if x.ndim == 1:
        df = pd.DataFrame({ 'x': x })
    else:
        df = pd.DataFrame(x, columns=[ f"x{i + 1}" for i in range(x.shape[1]) ])
    return write_table(path, df)


def read_points(path: Path) -> np.ndarray:
    """write_points の逆。1 列なら (n,)、d 列なら (n, d) を返す。"""
    df = read_table(path)
    if df.shape[1] == 1:
        return df.iloc[:, 0].to_numpy()
    return df.to_numpy()


def write_weights(path: Path, we: WeightedEmpirical) -> Path:
    """原子、重み、対数重みを書く。1 行目の前に正規化定数は書かない (対数重みから復元できる)。"""
    x = we.points
    if x.ndim == 1:
        df = pd.DataFrame({ 'x': x })
    else:
        df = pd.DataFrame(x, columns=[ f"x{i + 1}" for i in range(x.shape[1]) ])
    df['weight'] = we.weights
    df['log_weight'] = we.log_weights
    return write_table(path, df)


def read_weights(path: Path) -> WeightedEmpirical:
    df = read_table(path)
    if 'log_weight' not in df.columns:
        raise IngestionError(f"'{path}' has no 'log_weight' column.")
    point_cols = [ c for c in df.columns if c not in ('weight', 'log_weight') ]
    if not point_cols:
        raise IngestionError(f"'{path}' has no point columns.")
    points = df[point_cols[0]].to_numpy() if len(point_cols) == 1 else df[point_cols].to_numpy()
    log_w = df['log_weight'].to_numpy()
    if not np.all(np.isfinite(log_w)):
        raise IngestionError(f"'{path}': log weights must be finite.")
    # 正規化定数は元のサンプルがないと決まらない
    return WeightedEmpirical(points, log_w, math.nan)


def write_draws(path: Path, draws, name: str='draw') -> Path:
    """1 列の CSV。"""
    return write_table(path, pd.DataFrame({ name: np.asarray(draws, dtype=float).ravel() }))


def read_draws(path: Path) -> np.ndarray:
    df = read_table(path)
    if df.shape[1] != 1:
        raise IngestionError(f"'{path}' must have exactly one column, got {df.shape[1]}.")
    return df.iloc[:, 0].to_numpy()


def read_schedule(path: Path) -> Tuple[str, List[Tuple[int, float]]]:
    """(n, theta) または (n, m_theta) のスケジュールを読む。

    Returns
    -------
    Tuple[str, List[Tuple[int, float]]]
        2 列目の種類 ('theta' か 'm_theta') と行のリスト。
    """
    df = read_table(path, columns=('n', 'theta'))
    if df.shape[1] != 2 or df.columns[0] != 'n' or df.columns[1] not in ('theta', 'm_theta'):
        raise IngestionError(f"'{path}' must have columns (n, theta) or (n, m_theta), got {list(df.columns)}.")
    ns = df['n'].to_numpy()
    for i, n in enumerate(ns, start=1):
        if n != math.floor(n) or n < 1:
            raise IngestionError(f"'{path}': row {i} has invalid n = {n}.", row=i)
    kind = df.columns[1]
    return kind, [ (int(n), float(v)) for n, v in zip(ns, df[kind].to_numpy()) ]


def write_schedule(path: Path, schedule: Sequence[Tuple[int, float]], kind: str='theta') -> Path:
    if kind not in ('theta', 'm_theta'):
        raise ValueError(f"kind must be 'theta' or 'm_theta', got '{kind}'.")
    df = pd.DataFrame({ 'n': [ int(n) for n, _ in schedule ], kind: [ float(v) for _, v in schedule ] })
    return write_table(path, df)
