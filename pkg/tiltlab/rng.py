"""乱数生成。すべての Generator は明示的な整数シードと spawn_key から作る。

レプリケート i の乱数列は SeedSequence(seed, spawn_key=(i,)) だけで決まるので、
並列実行のワーカー数やスケジューリングに結果が依存しない。
"""
import logging

import numpy as np

from concurrent.futures import ThreadPoolExecutor
from tqdm.auto import tqdm

from typing import Callable, List, Sequence, TypeVar

logger = logging.getLogger(__name__)

T = TypeVar('T')


def _check_seed(seed) -> int:
    if isinstance(seed, (bool, np.bool_)) or not isinstance(seed, (int, np.integer)):
        raise TypeError(f"seed must be an explicit integer, got {type(seed).__name__}.")
    if seed < 0:
        raise ValueError(f"seed must be non-negative, got {seed}.")
    return int(seed)


def seed_sequence(seed: int, *stream: int) -> np.random.SeedSequence:
    """(seed, stream...) で決まる SeedSequence を返す。"""
    seed = _check_seed(seed)
    return np.random.SeedSequence(seed, spawn_key=tuple(int(s) for s in stream))


def make_rng(seed, *stream: int) -> np.random.Generator:
    """明示的なシードから Generator を作る。Generator を渡された場合はそのまま返す。

    Parameters
    ----------
    seed : int or numpy.random.Generator
        基底シード。
    *stream : int
        counted splitting の添字。レプリケート番号やサブタスク番号を渡す。

    Returns
    -------
    numpy.random.Generator
    """
    if isinstance(seed, np.random.Generator):
        if len(stream) > 0:
            raise ValueError("stream indices cannot be applied to an existing Generator.")
        return seed
    return np.random.Generator(np.random.PCG64(seed_sequence(seed, *stream)))


def child_seed(seed: int, *stream: int) -> int:
    """サブタスクに渡す派生シード (整数) を返す。"""
    return int(seed_sequence(seed, *stream).generate_state(1, dtype=np.uint32)[0])


def run_replicates(func: Callable[[np.random.Generator], T], reps: int, seed: int,
                   workers: int=1, verbose: bool=False, stream: Sequence[int]=()) -> List[T]:
    """func(rng) を reps 回実行し、レプリケート番号順の結果リストを返す。

    Parameters
    ----------
    func : Callable[[numpy.random.Generator], T]
        1 レプリケート分の計算。引数の Generator 以外の乱数源を使ってはならない。
    reps : int
        レプリケート数。
    seed : int
        基底シード。
    workers : int, optional
        スレッド数。(by default 1)
    verbose : bool, optional
        tqdm で進捗を表示するかどうか。(by default False)
    stream : Sequence[int], optional
        レプリケート番号の前に付ける添字。同じ seed で別の用途の乱数列を作るときに使う。

    Returns
    -------
    List[T]
        レプリケート番号順に並んだ結果。
    """
    seed = _check_seed(seed)
    if reps < 1:
        raise ValueError(f"reps must be positive, got {reps}.")
    if workers < 1:
        raise ValueError(f"workers must be positive, got {workers}.")

    wrap = tqdm if verbose else (lambda x, **kwargs: x)
    stream = tuple(stream)

    def task(i: int):
        return func(make_rng(seed, *stream, i))

    logger.debug(f"run_replicates: reps={reps}, seed={seed}, stream={stream}, workers={workers}")

    if workers == 1:
        return [ task(i) for i in wrap(range(reps)) ]

    results: List[T] = [None] * reps
    with ThreadPoolExecutor(max_workers=workers) as executor:
        futures = { executor.submit(task, i): i for i in range(reps) }
        for future in wrap(futures, total=reps):
            results[futures[future]] = future.result()

    return results
