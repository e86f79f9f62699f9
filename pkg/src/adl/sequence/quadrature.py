# src/adl/sequence/quadrature.py
"""
区分的定数な係数場の求積。

積分タイルは最細スケール j_min の立方体で、台を成す各立方体の外接箱を覆うものを全て取る。
各タイルの中に単位立方体座標で点を置き、A^{j_min} で写す。
    grid   : n^d 個の中点格子（n, 2n, 4n, ... で精緻化）
    mc     : タイルごとの層別一様サンプル（m, 2m, ...）
    dyadic : A = m·I（整数 m >= 2）のみ。係数場がタイル上で定数なので中心 1 点で厳密
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np

from adl.dilation.expansive import Dilation
from adl.dilation.tiling import DilatedCube, cube_containing_many, cubes_in_box
from adl.errors import PreconditionViolation, WindowTooLargeError
from adl.sequence.sequences import CoefficientField, EstimateMethod, NormEstimate, SparseSequence, TLParams
from adl.utils.logging_utils import get_logger
from adl.utils.parallel import ordered_map
from adl.utils.rng import STREAM_QUADRATURE, derive_generator

logger = get_logger(__name__)

METHODS = ("auto", "grid", "mc", "dyadic")
MAX_POINTS = 1 << 26
CHUNK_POINTS = 1 << 17


@dataclass(frozen=True)
class QuadratureSpec:
    method: str = "auto"
    n: int = 16                # 1 タイル 1 辺あたりの格子数（初期レベル）
    max_level: int = 3         # 倍化の回数
    rel_tol: float = 0.02
    mc_samples: int = 64       # 1 タイルあたりのサンプル数（初期レベル）
    seed: int = 0
    pad: int = 2               # p = ∞ の候補スケール上端 j_max + pad
    workers: Optional[int] = None

    def __post_init__(self) -> None:
        msg = None
        if self.method not in METHODS:
            msg = f"QuadratureSpec: method must be one of {METHODS}, got {self.method!r}"
        elif self.n < 1 or self.mc_samples < 1 or self.max_level < 1:
            msg = "QuadratureSpec: n, mc_samples and max_level must be >= 1"
        elif self.pad < 0:
            msg = "QuadratureSpec: pad must be >= 0"
        if msg is not None:
            logger.error(msg)
            raise ValueError(msg)


# ==========================================================
# タイルと点
# ==========================================================
def integration_tiles(a: Dilation, c: SparseSequence) -> np.ndarray:
    """スケール j_min のタイル k の配列 (T, d)（辞書順）。"""
    j0 = c.j_min
    tiles = set()
    for (j, k), _ in c:
        if j == j0:
            tiles.add(k)
        else:
            tiles.update(cubes_in_box(a, j0, DilatedCube(a, j, k).bounding_box(), exact=False))
    return np.array(sorted(tiles), dtype=np.int64)


def _unit_offsets(method: str, size: int, d: int, rng: Optional[np.random.Generator], n_tiles: int) -> np.ndarray:
    """単位立方体内のオフセット。grid/dyadic は (P, d)、mc は (T, P, d)。"""
    if method == "mc":
        return rng.random((n_tiles, size, d))
    if method == "dyadic":
        return np.full((1, d), 0.5)
    axis = (np.arange(size) + 0.5) / size
    return np.array(list(itertools.product(axis, repeat=d)))


def _points(a: Dilation, j0: int, tiles: np.ndarray, offsets: np.ndarray) -> np.ndarray:
    m = a.power(j0)
    if offsets.ndim == 3:
        u = tiles[:, None, :].astype(float) + offsets
    else:
        u = tiles[:, None, :].astype(float) + offsets[None, :, :]
    return (u.reshape(-1, tiles.shape[1])) @ m.T


# ==========================================================
# 1 レベル分の評価
# ==========================================================
def _chunks(n_tiles: int, per_tile: int) -> List[Tuple[int, int]]:
    step = max(1, CHUNK_POINTS // max(per_tile, 1))
    return [(s, min(s + step, n_tiles)) for s in range(0, n_tiles, step)]


def _level_value_finite_p(
    a: Dilation,
    field: CoefficientField,
    p: float,
    tiles: np.ndarray,
    offsets: np.ndarray,
    workers: Optional[int],
) -> float:
    j0 = field.sequence.j_min
    per_tile = offsets.shape[-2]
    w = a.detmag ** j0 / per_tile

    def part(rng_: Tuple[int, int]) -> float:
        s, e = rng_
        off = offsets[s:e] if offsets.ndim == 3 else offsets
        xs = _points(a, j0, tiles[s:e], off)
        return float(np.sum(field(xs) ** p))

    parts = ordered_map(part, _chunks(tiles.shape[0], per_tile), workers)
    return (w * math.fsum(parts)) ** (1.0 / p)


def _level_value_inf_p(
    a: Dilation,
    field: CoefficientField,
    q: float,
    pad: int,
    tiles: np.ndarray,
    offsets: np.ndarray,
    workers: Optional[int],
) -> Tuple[float, Dict[str, object]]:
    """
    sup_P ((1/|P|) ∫_P Σ_{j <= scale(P)} (w_j|c_{j,k}| 1_Q)^q)^{1/q}
    候補 P はスケール [j_min, j_max + pad] で点を含む立方体全て。
    """
    c = field.sequence
    j0 = c.j_min
    scales = field.scales
    s_range = list(range(j0, c.j_max + pad + 1))
    per_tile = offsets.shape[-2]
    w = a.detmag ** j0 / per_tile

    def part(rng_: Tuple[int, int]) -> List[Tuple[np.ndarray, np.ndarray]]:
        st, en = rng_
        off = offsets[st:en] if offsets.ndim == 3 else offsets
        xs = _points(a, j0, tiles[st:en], off)
        powered = field.terms(xs) ** q
        cum = np.cumsum(powered, axis=1)
        out = []
        for s in s_range:
            n_active = int(np.searchsorted(scales, s, side="right"))
            g = cum[:, n_active - 1] if n_active > 0 else np.zeros(xs.shape[0])
            keys = cube_containing_many(a, s, xs)
            uk, inv = np.unique(keys, axis=0, return_inverse=True)
            sums = np.bincount(inv.ravel(), weights=g, minlength=uk.shape[0])
            out.append((uk, sums))
        return out

    parts = ordered_map(part, _chunks(tiles.shape[0], per_tile), workers)

    best = 0.0
    arg: Dict[str, object] = {}
    for si, s in enumerate(s_range):
        keys = np.concatenate([p[si][0] for p in parts], axis=0)
        sums = np.concatenate([p[si][1] for p in parts])
        uk, inv = np.unique(keys, axis=0, return_inverse=True)
        total = np.bincount(inv.ravel(), weights=sums, minlength=uk.shape[0])
        avg = w * total / a.detmag ** s
        i = int(np.argmax(avg))
        val = float(avg[i]) ** (1.0 / q)
        if val > best:
            best = val
            arg = {"j": s, "k": [int(v) for v in uk[i]]}
    return best, arg


# ==========================================================
# 公開 API
# ==========================================================
def resolve_method(a: Dilation, method: str) -> str:
    if method == "auto":
        return "grid"
    if method == "dyadic" and a.is_integer_scalar() is None:
        msg = "quadrature: method 'dyadic' needs A = m·I with integer m >= 2 (nested cubes)"
        logger.error(msg)
        raise PreconditionViolation(msg)
    return method


_METHOD_TAG = {
    "grid": EstimateMethod.GRID_QUADRATURE,
    "mc": EstimateMethod.MONTE_CARLO,
    "dyadic": EstimateMethod.DYADIC_EXACT,
}


def quadrature_norm(a: Dilation, params: TLParams, c: SparseSequence, quad: QuadratureSpec) -> NormEstimate:
    """
    ‖c‖_{ḟ^α_{p,q}(A)} を求積で評価する（p = q でも呼べる）。

    2 つの精緻化レベルの差を abs_error とし、abs_error/value <= rel_tol になるまで
    max_level 回まで倍化する。届かなければ unresolved を立てて返す。
    """
    method = resolve_method(a, quad.method)
    if params.p_is_inf and params.q_is_inf:
        msg = "quadrature_norm: p = q = ∞ has an exact sup formula, use seqnorm"
        logger.error(msg)
        raise PreconditionViolation(msg)
    if c.is_empty:
        return NormEstimate(value=0.0, abs_error=0.0, method=_METHOD_TAG[method])

    field = CoefficientField(a, params, c)
    tiles = integration_tiles(a, c)
    d = a.dim
    n_tiles = tiles.shape[0]

    def evaluate(level: int) -> Tuple[int, float, Dict[str, object]]:
        if method == "dyadic":
            size = 1
        elif method == "mc":
            size = quad.mc_samples * (1 << level)
        else:
            size = quad.n * (1 << level)
        per_tile = size if method == "mc" else size ** d
        if n_tiles * per_tile > MAX_POINTS:
            msg = f"quadrature_norm: {n_tiles} tiles x {per_tile} points exceed {MAX_POINTS}"
            logger.error(msg)
            raise WindowTooLargeError(msg)
        rng = derive_generator(quad.seed, STREAM_QUADRATURE, level) if method == "mc" else None
        offsets = _unit_offsets(method, size, d, rng, n_tiles)
        if params.p_is_inf:
            v, arg = _level_value_inf_p(a, field, params.q, quad.pad, tiles, offsets, quad.workers)
        else:
            v, arg = _level_value_finite_p(a, field, params.p, tiles, offsets, quad.workers), {}
        return size, v, arg

    levels: List[Tuple[int, float]] = []
    size, value, arg = evaluate(0)
    levels.append((size, value))
    abs_error = 0.0
    unresolved = False

    if method != "dyadic":
        converged = False
        for level in range(1, quad.max_level + 1):
            try:
                size, new_value, new_arg = evaluate(level)
            except WindowTooLargeError:
                logger.warning("quadrature_norm: refinement stopped at level %d (point budget)", level)
                break
            levels.append((size, new_value))
            abs_error = abs(new_value - value)
            value, arg = new_value, new_arg
            if value == 0.0 or abs_error / value <= quad.rel_tol:
                converged = True
                break
        unresolved = not converged
        if unresolved:
            logger.warning(
                "quadrature_norm: unresolved (abs_error=%.3e, value=%.3e, rel_tol=%g)", abs_error, value, quad.rel_tol
            )

    pad_saturated = False
    if params.p_is_inf and arg:
        pad_saturated = arg["j"] == c.j_max + quad.pad and quad.pad > 0
        if pad_saturated:
            logger.warning("quadrature_norm: sup attained at the top candidate scale %d", arg["j"])

    logger.debug("quadrature_norm: %s over %d tiles, levels=%s", method, n_tiles, levels)
    return NormEstimate(
        value=value,
        abs_error=abs_error,
        method=_METHOD_TAG[method],
        levels=levels,
        seed=quad.seed if method == "mc" else None,
        unresolved=unresolved,
        argmax_cube=arg or None,
        pad_saturated=pad_saturated,
    )
