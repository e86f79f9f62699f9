# src/adl/operators/scale_maps.py
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Tuple

import numpy as np

from adl.dilation.expansive import Dilation, Verdict, classify_equivalence, epsilon, floor_scale
from adl.dilation.quasinorm import StepQuasiNorm
from adl.dilation.tiling import Box, Cell, cubes_in_box
from adl.errors import PreconditionViolation, SupportEscapesWindowError
from adl.matching.hall import MatchingResult, lattice_injection_pi
from adl.operators.majorant import MajorantParams, majorant_many
from adl.sequence.sequences import SparseSequence
from adl.utils.logging_utils import get_logger

logger = get_logger(__name__)

DET_RTOL = 1e-9
STABILITY = 0.25


class Mode(str, Enum):
    PERMUTATION = "permute"
    RETRACT = "retract"


@dataclass
class ScaleMap:
    """スケール j の π_j（窓内の A 側セル -> B 側スケール i のセル）。"""

    j: int
    i: int
    forward: Dict[Cell, Cell]
    inverse: Dict[Cell, Cell]
    result: MatchingResult

    @property
    def cells(self) -> List[Cell]:
        return sorted(self.forward)

    def certificate(self) -> dict:
        return {
            "j": self.j,
            "i": self.i,
            "n_cells": len(self.forward),
            "max_displacement": self.result.max_displacement,
            "bound": self.result.bound,
        }


@dataclass
class ScaleMaps:
    a: Dilation
    b: Dilation
    mode: Mode
    epsilon: float
    maps: Dict[int, ScaleMap] = field(default_factory=dict)

    def scale_of(self, j: int) -> int:
        return self.maps[j].i

    @property
    def scales(self) -> List[int]:
        return sorted(self.maps)

    def by_target_scale(self) -> Dict[int, ScaleMap]:
        return {m.i: m for m in self.maps.values()}

    def certificates(self) -> List[dict]:
        return [self.maps[j].certificate() for j in self.scales]


# ==========================================================
# 構築
# ==========================================================
def target_scale(mode: Mode, eps: float, j: int) -> int:
    return j if mode is Mode.PERMUTATION else floor_scale(eps, j)


def build_scale_maps(
    a: Dilation,
    b: Dilation,
    mode: Mode | str,
    scales: Tuple[int, int],
    window: Box,
    *,
    J: int = 32,
    workers: Optional[int] = None,
) -> ScaleMaps:
    """
    各 j ∈ scales について、窓と交わる A 側の立方体の添字集合上に π_j を作る。

    Permutation: |det A| = |det B|、i(j) = j。
    Retract:     |det A| > |det B|、i(j) = ⌊εj⌋（ε > 1 なので j について単射）。
    どちらも classify_equivalence の Equivalent 判定を前提とする。
    """
    mode = Mode(mode)
    if mode is Mode.PERMUTATION:
        if abs(a.detmag - b.detmag) > DET_RTOL * max(a.detmag, b.detmag):
            msg = f"build_scale_maps: permute needs |det A| = |det B|, got {a.detmag:.12g} vs {b.detmag:.12g}"
            logger.error(msg)
            raise PreconditionViolation(msg)
    elif not a.detmag > b.detmag * (1.0 + DET_RTOL):
        msg = f"build_scale_maps: retract needs |det A| > |det B|, got {a.detmag:.12g} vs {b.detmag:.12g}"
        logger.error(msg)
        raise PreconditionViolation(msg)

    report = classify_equivalence(a, b, J=J, workers=workers)
    if report.verdict is not Verdict.EQUIVALENT:
        msg = f"build_scale_maps: A and B are not classified Equivalent (verdict {report.verdict.value})"
        logger.error(msg)
        raise PreconditionViolation(msg)

    eps = epsilon(a, b)
    j_lo, j_hi = int(scales[0]), int(scales[1])
    targets = [target_scale(mode, eps, j) for j in range(j_lo, j_hi + 1)]
    if len(set(targets)) != len(targets):
        msg = f"build_scale_maps: j -> i(j) is not injective on [{j_lo}, {j_hi}] (ε={eps:.6g})"
        logger.error(msg)
        raise PreconditionViolation(msg)

    out = ScaleMaps(a=a, b=b, mode=mode, epsilon=eps)
    for j, i in zip(range(j_lo, j_hi + 1), targets):
        cells = cubes_in_box(a, j, window)
        res = lattice_injection_pi(a, b, j, i, cells, workers=workers)
        out.maps[j] = ScaleMap(j=j, i=i, forward=dict(res.assignment), inverse=res.inverse(), result=res)
        logger.debug("build_scale_maps: j=%d -> i=%d, %d cells, displacement %.4g", j, i, len(cells), res.max_displacement)
    return out


# ==========================================================
# 系列への作用
# ==========================================================
def _require_mode(maps: ScaleMaps, mode: Mode, op: str) -> None:
    if maps.mode is not mode:
        msg = f"{op}: needs {mode.value} maps, got {maps.mode.value}"
        logger.error(msg)
        raise PreconditionViolation(msg)


def _push(c: SparseSequence, maps: ScaleMaps, op: str) -> SparseSequence:
    items = []
    for (j, k), v in c:
        sm = maps.maps.get(j)
        if sm is None or k not in sm.forward:
            msg = f"{op}: entry (j={j}, k={list(k)}) lies outside the map windows"
            logger.error(msg)
            raise SupportEscapesWindowError(msg, entry={"j": j, "k": list(k)})
        items.append(((sm.i, sm.forward[k]), v))
    return SparseSequence.from_items(items)


def permute(c: SparseSequence, maps: ScaleMaps) -> SparseSequence:
    """P c: s_{j, π_j(k)} = c_{j,k}。"""
    _require_mode(maps, Mode.PERMUTATION, "permute")
    return _push(c, maps, "permute")


def unpermute(s: SparseSequence, maps: ScaleMaps) -> SparseSequence:
    """P の像からの逆写像。"""
    _require_mode(maps, Mode.PERMUTATION, "unpermute")
    items = []
    for (j, n), v in s:
        sm = maps.maps.get(j)
        if sm is None or n not in sm.inverse:
            msg = f"unpermute: entry (j={j}, k={list(n)}) is outside the image of π_j"
            logger.error(msg)
            raise SupportEscapesWindowError(msg, entry={"j": j, "k": list(n)})
        items.append(((j, sm.inverse[n]), v))
    return SparseSequence.from_items(items)


def lift_S(c: SparseSequence, maps: ScaleMaps) -> SparseSequence:
    """S c: s_{⌊εj⌋, π_j(k)} = c_{j,k}、それ以外は 0。"""
    _require_mode(maps, Mode.RETRACT, "lift_S")
    return _push(c, maps, "lift_S")


def project_T(s: SparseSequence, maps: ScaleMaps, *, strict: bool = False) -> SparseSequence:
    """
    T s: c_{j,k} = s_{⌊εj⌋, π_j(k)}。

    対応する j のないスケールや π_j の像の外の成分は読まれない（捨てる）。
    strict=True では、対応スケール上で像の外にある成分を SupportEscapesWindowError にする。
    """
    _require_mode(maps, Mode.RETRACT, "project_T")
    by_i = maps.by_target_scale()
    items = []
    dropped = 0
    for (i, n), v in s:
        sm = by_i.get(i)
        if sm is None:
            dropped += 1
            continue
        k = sm.inverse.get(n)
        if k is None:
            if strict:
                msg = f"project_T: entry (i={i}, k={list(n)}) is outside the image of π_{sm.j}"
                logger.error(msg)
                raise SupportEscapesWindowError(msg, entry={"j": i, "k": list(n)})
            dropped += 1
            continue
        items.append(((sm.j, k), v))
    if dropped:
        logger.debug("project_T: dropped %d entries outside the image of S", dropped)
    return SparseSequence.from_items(items)


# ==========================================================
# 各点での c^A_j ≍ s^B_i
# ==========================================================
@dataclass
class BracketReport:
    j: int
    i: int
    K: float                      # 比が [1/K, K] に入る最小の K
    K_half: float                 # 前半の点だけでの K
    stable: bool
    min_ratio: float
    max_ratio: float
    n_points: int
    n_zero: int                   # 両辺 0 の点


def _bracket(ratios: np.ndarray) -> float:
    if ratios.size == 0:
        return 1.0
    return float(max(ratios.max(), 1.0 / ratios.min()))


def pointwise_bracket(
    qa: StepQuasiNorm,
    qb: StepQuasiNorm,
    c: SparseSequence,
    maps: ScaleMaps,
    j: int,
    mp: MajorantParams,
    points: np.ndarray,
) -> BracketReport:
    """
    c^A_j(x) / s^B_{i(j)}(x)（s は permute または lift_S の像）の比の幅 K を測る。
    安定性は前半の点での K と全点での K の比較（点数倍化）。
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    s = permute(c, maps) if maps.mode is Mode.PERMUTATION else lift_S(c, maps)
    i = maps.scale_of(j)
    lhs = majorant_many(qa, c, j, mp, points)
    rhs = majorant_many(qb, s, i, mp, points)
    both = (lhs > 0) & (rhs > 0)
    ratios = lhs[both] / rhs[both]
    half = both.copy()
    half[points.shape[0] // 2:] = False
    k_all = _bracket(ratios)
    k_half = _bracket(lhs[half] / rhs[half])
    stable = abs(k_all - k_half) <= STABILITY * k_all
    if not stable:
        logger.warning("pointwise_bracket: K=%.4g on all points vs %.4g on half (j=%d)", k_all, k_half, j)
    return BracketReport(
        j=j,
        i=i,
        K=k_all,
        K_half=k_half,
        stable=bool(stable),
        min_ratio=float(ratios.min()) if ratios.size else 1.0,
        max_ratio=float(ratios.max()) if ratios.size else 1.0,
        n_points=int(points.shape[0]),
        n_zero=int(np.count_nonzero(~both)),
    )
