# src/adl/dilation/tiling.py
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np
from scipy.optimize import linprog

from adl.dilation.expansive import Dilation, floor_scale, snap_floor
from adl.errors import WindowTooLargeError
from adl.utils.logging_utils import get_logger

logger = get_logger(__name__)

# --- 型エイリアス ---
Cell = Tuple[int, ...]

MAX_CANDIDATES = 10**8
# 格子点ちょうどの点を自分のセルに戻すための許容
CELL_SNAP = 1e-9

__all__ = [
    "Box",
    "Cell",
    "DilatedCube",
    "cube_containing",
    "cube_containing_many",
    "cubes_in_box",
    "cube_corner",
    "cube_volume",
    "scale_of_ball",
    "scale_of_cube",
    "floor_scale",
]


@dataclass(frozen=True)
class Box:
    """半開の軸平行箱 [lo, hi)。"""

    lo: Tuple[float, ...]
    hi: Tuple[float, ...]

    @classmethod
    def from_bounds(cls, lo: Sequence[float], hi: Sequence[float]) -> "Box":
        return cls(tuple(float(v) for v in lo), tuple(float(v) for v in hi))

    @classmethod
    def parse(cls, text: str) -> "Box":
        """"x0,x1;y0,y1" 形式（軸ごとに lo,hi）。"""
        axes = [part.split(",") for part in text.split(";") if part.strip()]
        lo = [float(a[0]) for a in axes]
        hi = [float(a[1]) for a in axes]
        return cls.from_bounds(lo, hi)

    @property
    def dim(self) -> int:
        return len(self.lo)

    @property
    def is_empty(self) -> bool:
        return any(h <= l for l, h in zip(self.lo, self.hi))

    @property
    def volume(self) -> float:
        if self.is_empty:
            return 0.0
        return float(np.prod(np.subtract(self.hi, self.lo)))

    def corners(self) -> np.ndarray:
        return np.array(list(itertools.product(*zip(self.lo, self.hi))), dtype=float)

    def to_text(self) -> str:
        return ";".join(f"{l!r},{h!r}" for l, h in zip(self.lo, self.hi))


@dataclass(frozen=True)
class DilatedCube:
    """Q_{j,k} = A^j([0,1)^d + k)。"""

    dilation: Dilation
    j: int
    k: Cell

    @property
    def corner(self) -> np.ndarray:
        return cube_corner(self.dilation, self.j, self.k)

    @property
    def volume(self) -> float:
        return cube_volume(self.dilation, self.j)

    def vertices(self) -> np.ndarray:
        d = self.dilation.dim
        unit = np.array(list(itertools.product((0.0, 1.0), repeat=d)))
        return (unit + np.asarray(self.k, dtype=float)) @ self.dilation.power(self.j).T

    def bounding_box(self) -> Box:
        v = self.vertices()
        return Box.from_bounds(v.min(axis=0), v.max(axis=0))


# ==========================================================
# 基本量
# ==========================================================
def cube_corner(a: Dilation, j: int, k: Sequence[int]) -> np.ndarray:
    """左下隅 x_Q = A^j k。"""
    return a.power(j) @ np.asarray(k, dtype=float)


def cube_volume(a: Dilation, j: int) -> float:
    return a.detmag ** j


def scale_of_cube(a: Dilation, volume: float) -> int:
    """scale(Q) = log_{|det A|} |Q|（整数に丸める）。"""
    return int(round(math.log(volume) / a.log_det))


def scale_of_ball(a: Dilation, r: float) -> int:
    """scale(B(x, r)) = ⌊log_{|det A|} r⌋（行列式のべき乗ちょうどでは整数に寄せる）。"""
    if r <= 0:
        msg = f"scale_of_ball: radius r={r} must be > 0"
        logger.error(msg)
        raise ValueError(msg)
    return snap_floor(math.log(r) / a.log_det)


# ==========================================================
# 所属セル
# ==========================================================
def _snap_floor_array(y: np.ndarray) -> np.ndarray:
    nearest = np.rint(y)
    close = np.abs(y - nearest) <= CELL_SNAP * np.maximum(1.0, np.abs(y))
    return np.where(close, nearest, np.floor(y)).astype(np.int64)


def cube_containing(a: Dilation, j: int, x: Sequence[float]) -> Cell:
    """x ∈ A^j([0,1)^d + k) となる k = ⌊A^{-j}x⌋。"""
    y = a.power(-j) @ np.asarray(x, dtype=float)
    return tuple(int(v) for v in _snap_floor_array(y))


def cube_containing_many(a: Dilation, j: int, xs: np.ndarray) -> np.ndarray:
    """点群 (N, d) に対する cube_containing。戻り値は (N, d) の整数配列。"""
    xs = np.asarray(xs, dtype=float)
    y = xs @ a.power(-j).T
    return _snap_floor_array(y)


# ==========================================================
# 箱と交わる立方体の列挙
# ==========================================================
def _interior_overlap(m: np.ndarray, k: np.ndarray, box: Box) -> bool:
    """平行体 m([0,1)^d + k) と箱の共通部分が内点をもつか（LP で余裕 t を最大化）。"""
    d = m.shape[0]
    lo = np.asarray(box.lo)
    hi = np.asarray(box.hi)
    # 変数 (u_1..u_d, t)。 maximize t
    # lo + t <= m(k+u) <= hi - t,  t <= u <= 1 - t
    base = m @ k
    rows = []
    rhs = []
    for i in range(d):
        rows.append(np.concatenate([-m[i], [1.0]]))
        rhs.append(base[i] - lo[i])
        rows.append(np.concatenate([m[i], [1.0]]))
        rhs.append(hi[i] - base[i])
    for i in range(d):
        e = np.zeros(d + 1)
        e[i] = -1.0
        e[d] = 1.0
        rows.append(e)
        rhs.append(0.0)
        e = np.zeros(d + 1)
        e[i] = 1.0
        e[d] = 1.0
        rows.append(e)
        rhs.append(1.0)
    c = np.zeros(d + 1)
    c[d] = -1.0
    res = linprog(c, A_ub=np.array(rows), b_ub=np.array(rhs), bounds=[(None, None)] * (d + 1), method="highs")
    return bool(res.status == 0 and -res.fun > 1e-12)


def cubes_in_box(a: Dilation, j: int, box: Box, *, exact: bool = True) -> List[Cell]:
    """
    A^j([0,1)^d + k) が箱と交わる k を全て返す（辞書順）。

    前像 A^{-j}(box) の外接箱を整数に広げて候補とし、
    頂点判定で決まらないものだけ LP で内点の有無を確かめる。
    exact=False では LP を省き、外接箱どうしが重なる候補を全て返す（被覆用、過剰を許す）。
    """
    if box.is_empty:
        return []
    corners = box.corners() @ a.power(-j).T
    k_lo = np.floor(corners.min(axis=0)).astype(np.int64)
    k_hi = np.floor(corners.max(axis=0)).astype(np.int64)
    n_cand = int(np.prod(k_hi - k_lo + 1))
    if n_cand > MAX_CANDIDATES:
        msg = f"cubes_in_box: {n_cand} candidate cubes at scale {j} exceed {MAX_CANDIDATES}"
        logger.error(msg)
        raise WindowTooLargeError(msg)

    m = a.power(j)
    d = a.dim
    lo = np.asarray(box.lo)
    hi = np.asarray(box.hi)
    grid = np.stack(np.meshgrid(*[np.arange(l, h + 1) for l, h in zip(k_lo, k_hi)], indexing="ij"), axis=-1).reshape(-1, d)
    if grid.size == 0:
        return []

    unit = np.array(list(itertools.product((0.0, 1.0), repeat=d)))
    # verts: (N, 2^d, d)
    verts = (grid[:, None, :] + unit[None, :, :]) @ m.T
    vmin = verts.min(axis=1)
    vmax = verts.max(axis=1)

    # 外接箱が重ならなければ確実に交わらない
    separated = np.any((vmax <= lo) | (vmin >= hi), axis=1)
    # 軸平行な平行体（対角の A^j）なら外接箱の判定で厳密
    axis_aligned = np.count_nonzero(m - np.diag(np.diag(m))) == 0
    # 頂点の平均（中心）が箱の内部なら確実に交わる
    centre = verts.mean(axis=1)
    inside = np.all((centre > lo) & (centre < hi), axis=1)

    out: List[Cell] = []
    for idx in range(grid.shape[0]):
        if separated[idx]:
            continue
        if not exact or axis_aligned or inside[idx] or _interior_overlap(m, grid[idx].astype(float), box):
            out.append(tuple(int(v) for v in grid[idx]))
    return out
