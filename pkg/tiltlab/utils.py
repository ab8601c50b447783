import hashlib
import json
import math
import uuid

from datetime import datetime
from pathlib import Path

from typing import Callable

import numpy as np


HASH_CHUNK = 1 << 20


def hash_md5(path: Path) -> str:
    """出力ファイルの md5。台帳で再実行の結果がバイト単位で一致するかを比べるのに使う。

    HASH_CHUNK バイトずつ読む。

    Raises
    ------
    FileNotFoundError
        path が通常のファイルでない。
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"output file not found: '{path}'.")

    digest = hashlib.md5()
    with path.open('rb') as f:
        for chunk in iter(lambda: f.read(HASH_CHUNK), b''):
            digest.update(chunk)
    return digest.hexdigest()


def get_unique_name(dateformat=None) -> str:
    """実行ごとに一意なタグを作る。台帳にだけ保存され、出力データには含めない。"""
    now = datetime.now()

    if dateformat is None:
        date = now.strftime('%Y%m%d-%H%M%S%f')
    elif isinstance(dateformat, str):
        date = now.strftime(dateformat)
    elif isinstance(dateformat, Callable):
        date = dateformat(now)
    else:
        raise TypeError("dateformat must be instance of str or Callable[[datetime.datetime], str].")

    return '_'.join([ date, str(uuid.uuid4()).split('-')[0] ])


def timestamp_from_unique_name(tag: str) -> float:
    return datetime.strptime(tag.split('_')[0], '%Y%m%d-%H%M%S%f').timestamp()


def to_builtin(obj):
    """numpy の型を含む入れ子構造を JSON に渡せる組み込み型へ変換する。
    非有限の実数は文字列 "inf", "-inf", "nan" にする。"""
    if isinstance(obj, dict):
        return { str(k): to_builtin(v) for k, v in obj.items() }
    if isinstance(obj, (list, tuple)):
        return [ to_builtin(v) for v in obj ]
    if isinstance(obj, np.ndarray):
        return to_builtin(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    return obj


class JsonMixin:
    """as_dict() を実装したクラスに dump / dumps / save を与える。
    save の保存名は json_name() で決まり、引数で変えることはできない。"""

    def as_dict(self) -> dict:
        raise NotImplementedError

    def json_name(self) -> str:
        return self.__class__.__name__.lower()

    def dump(self, fp, indent: int=None):
        """JSON 形式でダンプする。

        Parameters
        ----------
        fp : file-like object
            .write() がサポートされているファイルライクオブジェクト。
        indent : int, optional
            JSON のインデント。(by default None)
        """
        json.dump(to_builtin(self.as_dict()), fp, indent=indent, sort_keys=True)

    def dumps(self, indent: int=2) -> str:
        return json.dumps(to_builtin(self.as_dict()), indent=indent, sort_keys=True)

    def save(self, dest_dir: Path) -> Path:
        """[json_name].json として dest_dir に保存し、保存先のパスを返す。"""
        dest_dir = Path(dest_dir)
        dest_dir.mkdir(parents=True, exist_ok=True)

        path = dest_dir / f"{self.json_name()}.json"
        with open(str(path), 'w', encoding='utf-8', newline='\n') as f:
            self.dump(f, indent=2)
            f.write('\n')
        return path
