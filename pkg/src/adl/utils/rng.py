"""シード付き乱数生成。

全ての乱数は 1 つの設定シードから導出する:
    Generator(Philox(SeedSequence(seed, spawn_key=(stream, index))))
stream は用途ごとの固定整数 ID、index は試行番号・ブロック番号。
Philox はカウンタベースなので、スレッド数や実行順序に依らず同じ列が得られる。
"""
from __future__ import annotations

import numpy as np

# 用途ごとのストリーム ID（値を変えると回帰値が変わる）
STREAM_TRIANGLE = 1
STREAM_ENVELOPE = 2
STREAM_SEQUENCE = 3
STREAM_QUADRATURE = 4
STREAM_MAXIMAL = 5
STREAM_SAMPLE_POINTS = 6
STREAM_TRIAL = 7
STREAM_HALL_SUBSETS = 8
STREAM_FAMILY = 9


def derive_generator(seed: int, stream: int, index: int = 0) -> np.random.Generator:
    """(seed, stream, index) から独立な Generator を作る。"""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(stream), int(index)))
    return np.random.Generator(np.random.Philox(ss))


def derive_seed(seed: int, stream: int, index: int) -> int:
    """子タスクに渡す 63bit の整数シード。"""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(stream), int(index)))
    hi, lo = (int(v) for v in ss.generate_state(2, dtype=np.uint32))
    return ((hi << 32) | lo) >> 1
