# src/adl/matching/lattice.py
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterable, List, Sequence, Tuple

import numpy as np
from scipy.optimize import linprog

from adl.dilation.expansive import operator_norm
from adl.errors import NotInvertibleError, ParseError
from adl.utils.logging_utils import get_logger

logger = get_logger(__name__)

Cell = Tuple[int, ...]

OVERLAP_TOL = 1e-9


def _cube_vertices(d: int) -> np.ndarray:
    return np.array(list(itertools.product((0.0, 1.0), repeat=d)))


@dataclass(frozen=True, eq=False)
class LatticePair:
    """Λ_S = S Z^d と Λ_T = T Z^d、基本領域 F_S = S[0,1)^d, F_T = T[0,1)^d。"""

    S: np.ndarray
    T: np.ndarray
    S_inv: np.ndarray
    T_inv: np.ndarray
    det_s: float
    det_t: float
    r_s: float
    r_t: float

    @classmethod
    def build(cls, S: Sequence[Sequence[float]] | np.ndarray, T: Sequence[Sequence[float]] | np.ndarray) -> "LatticePair":
        S = np.array(S, dtype=float)
        T = np.array(T, dtype=float)
        if S.shape != T.shape or S.ndim != 2 or S.shape[0] != S.shape[1]:
            msg = f"LatticePair: S {S.shape} and T {T.shape} must be square of the same size"
            logger.error(msg)
            raise ValueError(msg)
        det_s = abs(float(np.linalg.det(S)))
        det_t = abs(float(np.linalg.det(T)))
        if det_s < 1e-12 or det_t < 1e-12:
            msg = f"LatticePair: singular generator (|det S|={det_s:.3e}, |det T|={det_t:.3e})"
            logger.error(msg)
            raise NotInvertibleError(msg)
        for m in (S, T):
            m.setflags(write=False)
        return cls(
            S=S,
            T=T,
            S_inv=np.linalg.inv(S),
            T_inv=np.linalg.inv(T),
            det_s=det_s,
            det_t=det_t,
            r_s=domain_diameter(S),
            r_t=domain_diameter(T),
        )

    @property
    def dim(self) -> int:
        return self.S.shape[0]

    def reversed(self) -> "LatticePair":
        return LatticePair.build(self.T, self.S)

    def source_point(self, m: Sequence[int]) -> np.ndarray:
        return self.S @ np.asarray(m, dtype=float)

    def target_point(self, n: Sequence[int]) -> np.ndarray:
        return self.T @ np.asarray(n, dtype=float)


def domain_diameter(m: np.ndarray) -> float:
    """diam(M[0,1]^d) = max ‖M w‖, w ∈ {-1,0,1}^d（頂点差の最大）。"""
    d = m.shape[0]
    ws = np.array(list(itertools.product((-1.0, 0.0, 1.0), repeat=d)))
    return float(np.max(np.linalg.norm(ws @ m.T, axis=1)))


# ==========================================================
# 窓
# ==========================================================
def parse_window(text: str) -> List[Tuple[int, int]]:
    """"x0,x1;y0,y1" を軸ごとの閉区間 [lo, hi] に。"""
    try:
        out = []
        for part in text.split(";"):
            if not part.strip():
                continue
            lo, hi = (int(float(v)) for v in part.split(","))
            out.append((lo, hi))
    except ValueError as e:
        msg = f"window {text!r}: expected 'lo,hi;lo,hi' ({e})"
        logger.error(msg)
        raise ParseError(msg) from e
    return out


def window_cells(bounds: Sequence[Tuple[int, int]]) -> List[Cell]:
    """整数座標の直積窓（両端含む）を辞書順に列挙する。"""
    return [tuple(c) for c in itertools.product(*[range(lo, hi + 1) for lo, hi in bounds])]


# ==========================================================
# 基本領域の交差判定
# ==========================================================
def _separated(
    normals: np.ndarray,
    verts_a: np.ndarray,
    verts_b: np.ndarray,
    tol: np.ndarray,
) -> np.ndarray:
    """
    分離軸判定。verts_a: (2^d, d)、verts_b: (C, 2^d, d)。
    どれかの法線で射影区間が tol を超えて離れていれば True。
    """
    pa = verts_a @ normals.T                      # (2^d, K)
    pb = verts_b @ normals.T                      # (C, 2^d, K)
    a_lo, a_hi = pa.min(axis=0), pa.max(axis=0)
    b_lo, b_hi = pb.min(axis=1), pb.max(axis=1)
    return np.any((b_hi < a_lo - tol) | (b_lo > a_hi + tol), axis=1)


def _lp_overlap(pair: LatticePair, x: np.ndarray, y: np.ndarray) -> bool:
    """x + S u = y + T v, u, v ∈ [-tol, 1+tol]^d の実行可能性。"""
    d = pair.dim
    a_eq = np.hstack([pair.S, -pair.T])
    b_eq = y - x
    bounds = [(-OVERLAP_TOL, 1.0 + OVERLAP_TOL)] * (2 * d)
    res = linprog(np.zeros(2 * d), A_eq=a_eq, b_eq=b_eq, bounds=bounds, method="highs")
    return bool(res.status == 0)


def overlap_mask(pair: LatticePair, x: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """
    (x + F_S) ∩ (y + F_T) ≠ ∅ を候補 ys (C, d) についてまとめて判定する（閉領域、許容 1e-9）。

    d = 2 は面法線による分離軸判定で厳密。d >= 3 は分離軸で落とせなかった候補を LP で確かめる。
    """
    d = pair.dim
    ys = np.atleast_2d(np.asarray(ys, dtype=float))
    if ys.shape[0] == 0:
        return np.zeros(0, dtype=bool)
    unit = _cube_vertices(d)
    verts_a = x[None, :] + unit @ pair.S.T
    verts_b = ys[:, None, :] + (unit @ pair.T.T)[None, :, :]
    normals = np.vstack([pair.S_inv, pair.T_inv])
    scale = max(1.0, float(np.max(np.abs(x))), float(np.max(np.abs(ys))))
    tol = OVERLAP_TOL * scale * np.linalg.norm(normals, axis=1)
    hit = ~_separated(normals, verts_a, verts_b, tol)
    if d >= 3:
        for idx in np.flatnonzero(hit):
            hit[idx] = _lp_overlap(pair, x, ys[idx])
    return hit


def domains_overlap(pair: LatticePair, x: Sequence[float], y: Sequence[float]) -> bool:
    """点 x, y について (x + F_S) ∩ (y + F_T) ≠ ∅ か。"""
    x = np.asarray(x, dtype=float)
    return bool(overlap_mask(pair, x, np.asarray(y, dtype=float)[None, :])[0])


# ==========================================================
# 候補集合 U_x
# ==========================================================
def candidate_targets(pair: LatticePair, m: Cell) -> List[Cell]:
    """
    ソース m（点 x = S m）の U_x を整数座標で返す（辞書順）。

    交わるなら ‖x − y‖ <= r_S + r_T なので、その球の T^{-1} 像の外接箱から候補を取る。
    """
    x = pair.source_point(m)
    radius = pair.r_s + pair.r_t
    centre = pair.T_inv @ x
    half = radius * np.linalg.norm(pair.T_inv, axis=1)
    lo = np.floor(centre - half - 1e-9).astype(np.int64)
    hi = np.ceil(centre + half + 1e-9).astype(np.int64)
    grid = np.stack(np.meshgrid(*[np.arange(l, h + 1) for l, h in zip(lo, hi)], indexing="ij"), axis=-1)
    grid = grid.reshape(-1, pair.dim)
    ys = grid.astype(float) @ pair.T.T
    near = np.linalg.norm(ys - x[None, :], axis=1) <= radius * (1.0 + 1e-12) + OVERLAP_TOL
    grid, ys = grid[near], ys[near]
    hit = overlap_mask(pair, x, ys)
    return sorted(tuple(int(v) for v in n) for n in grid[hit])


def max_displacement(pair: LatticePair, assignment: Iterable[Tuple[Cell, Cell]]) -> float:
    best = 0.0
    for m, n in assignment:
        best = max(best, float(np.linalg.norm(pair.source_point(m) - pair.target_point(n))))
    return best


def hall_bound(pair: LatticePair) -> float:
    """sup ‖x − φ(x)‖ <= r_T + r_S。"""
    return pair.r_s + pair.r_t


def normalized_bound(t: np.ndarray) -> float:
    """√d (1 + ‖T‖)。"""
    return math.sqrt(t.shape[0]) * (1.0 + operator_norm(t))
