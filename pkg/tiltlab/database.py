"""実行台帳。出力ファイルのハッシュを SQLite に記録し、同じ (path, experiment, seed) の
再実行で内容が変わっていないかを確かめる。"""
import logging
import re
import sqlite3
import time

import pandas as pd

from pathlib import Path

from typing import Iterable, List

from .utils import hash_md5, get_unique_name

logger = logging.getLogger(__name__)

LEDGER_DIR = '.tiltlab'
LEDGER_NAME = 'ledger.db'

_table_name_pattern = re.compile(r'^[A-Za-z_][A-Za-z0-9_]*$')


def _check_table_name(table_name: str):
    if not _table_name_pattern.match(table_name):
        raise ValueError(f"invalid table name: '{table_name}'.")


def is_table_exists(db_path: Path, table_name: str) -> bool:
    try:
        conn = sqlite3.connect(str(db_path))
        cur = conn.cursor()

        query = "SELECT COUNT(*) FROM sqlite_master WHERE TYPE='table' AND name=?"
        cur.execute(query, (table_name,))

        res = cur.fetchone()
        # 戻り値にはヒットしたテーブルの個数が入っている
        exists = res[0] != 0
    finally:
        conn.close()

    return exists


def create_table(db_path: Path, table_name: str):
    _check_table_name(table_name)
    try:
        conn = sqlite3.connect(str(db_path))
        cur = conn.cursor()

        query = f"""CREATE TABLE IF NOT EXISTS `{table_name}` (
            `path` TEXT,
            `experiment` TEXT,
            `seed` INTEGER,
            `hash` TEXT,
            `tag` TEXT,
            `time` REAL,
            UNIQUE(path, experiment, seed, hash)
        )
        """

        cur.execute(query)
        conn.commit()
    finally:
        conn.close()


def insert_or_replace_into_table(db_path: Path, table_name: str, data):
    _check_table_name(table_name)
    try:
        conn = sqlite3.connect(str(db_path))
        cur = conn.cursor()

        query = f"INSERT OR REPLACE INTO `{table_name}` VALUES(?, ?, ?, ?, ?, ?)"

        cur.executemany(query, data)
        conn.commit()
    finally:
        conn.close()


def read_table(db_path: Path, table_name: str) -> pd.DataFrame:
    _check_table_name(table_name)
    try:
        conn = sqlite3.connect(str(db_path))

        query = f"SELECT * FROM `{table_name}`"

        df = pd.read_sql_query(query, conn)
    finally:
        conn.close()

    return df


def search_history(db_path: Path, table_name: str, path: str, experiment: str, seed: int) -> pd.DataFrame:
    """同じ (path, experiment, seed) の過去の記録を新しい順に返す。"""
    _check_table_name(table_name)
    try:
        conn = sqlite3.connect(str(db_path))

        query = f"""
            SELECT * FROM `{table_name}`
            WHERE `path` = ? AND `experiment` = ? AND `seed` = ?
            ORDER BY `time` DESC
        """

        df = pd.read_sql_query(query, conn, params=(path, experiment, int(seed)))
    finally:
        conn.close()

    return df


class RunLedger:
    """出力ディレクトリごとの実行台帳。テーブルはコマンドごとに分ける。

    Parameters
    ----------
    out_dir : Path
        コマンドの出力ディレクトリ。台帳は out_dir/.tiltlab/ledger.db に置かれる。
    command : str
        テーブル名になるコマンド名 ("figures", "verify" など)。
    """
    def __init__(self, out_dir: Path, command: str):
        self.out_dir = Path(out_dir)
        self.table_name = command.replace('-', '_')
        _check_table_name(self.table_name)

        self.db_path = self.out_dir / LEDGER_DIR / LEDGER_NAME
        self.db_path.parent.mkdir(parents=True, exist_ok=True)
        create_table(self.db_path, self.table_name)

        self.tag = get_unique_name()

    def __repr__(self):
        return f"{self.__class__.__name__}(db_path='{self.db_path}', table_name='{self.table_name}')"

    def _relative(self, path: Path) -> str:
        path = Path(path)
        try:
            return path.resolve().relative_to(self.out_dir.resolve()).as_posix()
        except ValueError:
            return path.as_posix()

    def record(self, paths: Iterable[Path], experiment: str, seed: int) -> bool:
        """ファイルを記録する。過去の同条件の記録とハッシュが一致しないものがあれば False を返す。

        Returns
        -------
        bool
            すべてのファイルが過去の記録と一致した (あるいは初回) なら True。
        """
        deterministic = True
        rows: List[tuple] = []
        now = time.time()

        for path in paths:
            rel = self._relative(path)
            digest = hash_md5(path)

            history = search_history(self.db_path, self.table_name, rel, experiment, seed)
            if len(history) > 0 and history.iloc[0]['hash'] != digest:
                logger.warning(
                    f"non-deterministic re-run: '{rel}' (experiment={experiment}, seed={seed}) "
                    f"hash {history.iloc[0]['hash']} -> {digest}."
                )
                deterministic = False

            rows.append((rel, experiment, int(seed), digest, self.tag, now))

        insert_or_replace_into_table(self.db_path, self.table_name, rows)
        logger.debug(f"recorded {len(rows)} files in {self.db_path} [{self.table_name}] tag={self.tag}")

        return deterministic

    def history(self) -> pd.DataFrame:
        return read_table(self.db_path, self.table_name)
