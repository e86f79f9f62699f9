# src/adl/operators/majorant.py
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from adl.dilation.quasinorm import StepQuasiNorm, rho_many
from adl.dilation.tiling import Box, cube_containing_many
from adl.errors import DominationViolationError
from adl.sequence.sequences import SparseSequence, TLParams
from adl.utils.logging_utils import get_logger

logger = get_logger(__name__)

GRID_SIDE = 64
CHUNK = 1 << 16


@dataclass(frozen=True)
class MajorantParams:
    """c^A_j の指数。0 < a <= r, λ > r/a。"""

    r: float
    lam: float
    a: float

    def __post_init__(self) -> None:
        if not (self.r > 0 and 0 < self.a <= self.r):
            msg = f"MajorantParams: need 0 < a <= r, got a={self.a}, r={self.r}"
            logger.error(msg)
            raise ValueError(msg)

    @classmethod
    def for_params(cls, params: TLParams, lam: float = 2.0) -> "MajorantParams":
        """a = r = min(1, p, q)/2, λ = 2（p/a > 1, q/a > 1, λ > r/a = 1）。"""
        r = min(1.0, params.p, params.q) / 2.0
        return cls(r=r, lam=lam, a=r)

    @property
    def maximal_ready(self) -> bool:
        return self.lam > self.r / self.a


def _scale_slice(c: SparseSequence, j: int):
    cells = c.at_scale(j)
    if not cells:
        return np.zeros((0, 0)), np.zeros(0)
    ks = np.array(list(cells.keys()), dtype=float)
    vs = np.array(list(cells.values()), dtype=float)
    return ks, vs


def majorant_many(qn: StepQuasiNorm, c: SparseSequence, j: int, mp: MajorantParams, xs: np.ndarray) -> np.ndarray:
    """c^A_j(x) = (Σ_k |c_{j,k}|^r / (1 + ρ_A(A^{-j}x − k))^λ)^{1/r} を点群で。"""
    xs = np.atleast_2d(np.asarray(xs, dtype=float))
    ks, vs = _scale_slice(c, j)
    if vs.size == 0:
        return np.zeros(xs.shape[0])
    a = qn.dilation
    y = xs @ a.power(-j).T
    d = a.dim
    acc = np.zeros(xs.shape[0])
    vr = vs ** mp.r
    # (N, K) を塊に分けて評価する
    step = max(1, CHUNK // max(len(vs), 1))
    for s in range(0, xs.shape[0], step):
        diff = (y[s:s + step, None, :] - ks[None, :, :]).reshape(-1, d)
        rh = rho_many(qn, diff).reshape(-1, len(vs))
        acc[s:s + step] = np.sum(vr[None, :] / (1.0 + rh) ** mp.lam, axis=1)
    return acc ** (1.0 / mp.r)


def majorant(qn: StepQuasiNorm, c: SparseSequence, j: int, mp: MajorantParams, x: Sequence[float]) -> float:
    return float(majorant_many(qn, c, j, mp, np.asarray(x, dtype=float)[None, :])[0])


def indicator_sum(qn: StepQuasiNorm, c: SparseSequence, j: int, xs: np.ndarray) -> np.ndarray:
    """Σ_k |c_{j,k}| 1_{Q_{j,k}}(x)（同一スケールの立方体は互いに素なので高々 1 項）。"""
    xs = np.atleast_2d(np.asarray(xs, dtype=float))
    cells = c.at_scale(j)
    if not cells:
        return np.zeros(xs.shape[0])
    ks = cube_containing_many(qn.dilation, j, xs)
    return np.array([cells.get(tuple(int(v) for v in k), 0.0) for k in ks])


# ==========================================================
# 支配不等式
# ==========================================================
@dataclass
class DominationReport:
    C: float                      # sup_{y∈[0,1]^d} ρ_A(y)（頂点の最大で厳密）
    C_grid: float                 # 64^d 格子 + 頂点での最大（下界）
    constant: float               # (1 + C)^{λ/r}
    constant_displayed: float     # (1 + C^λ)^{1/r}
    max_ratio: float              # max LHS / c^A_j
    displayed_holds: bool
    n_points: int
    violations: int = 0


def unit_cube_sup(qn: StepQuasiNorm, grid_side: int = GRID_SIDE) -> Tuple[float, float]:
    """
    (C, C_grid)。{ρ <= |det A|^m} は凸な楕円体なので [0,1]^d 上の sup は頂点で取られる。
    C_grid は格子と頂点での最大値。
    """
    d = qn.dilation.dim
    verts = np.array(list(itertools.product((0.0, 1.0), repeat=d)))
    c_vert = float(np.max(rho_many(qn, verts)))
    axis = np.linspace(0.0, 1.0, grid_side)
    grid = np.array(list(itertools.product(axis, repeat=d)))
    c_grid = max(c_vert, float(np.max(rho_many(qn, grid))))
    return c_vert, c_grid


def majorant_dominates(
    qn: StepQuasiNorm,
    c: SparseSequence,
    j: int,
    mp: MajorantParams,
    points: np.ndarray,
) -> DominationReport:
    """
    Σ_k |c_{j,k}| 1_{Q_{j,k}}(x) <= (1 + C)^{λ/r} c^A_j(x) を全サンプル点で確かめる。

    x ∈ Q_{j,k} なら A^{-j}x − k ∈ [0,1)^d で ρ <= C、よって c^A_j(x) >= |c_{j,k}|(1+C)^{-λ/r}。
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    C, C_grid = unit_cube_sup(qn)
    const = (1.0 + C) ** (mp.lam / mp.r)
    const_disp = (1.0 + C ** mp.lam) ** (1.0 / mp.r)

    lhs = indicator_sum(qn, c, j, points)
    rhs = majorant_many(qn, c, j, mp, points)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(lhs > 0, lhs / rhs, 0.0)
    bad = lhs > const * rhs * (1.0 + 1e-12)
    if np.any(bad):
        idx = int(np.flatnonzero(bad)[0])
        w = points[idx].tolist()
        msg = f"majorant_dominates: indicator sum exceeds (1+C)^(λ/r)·c^A_j at x={w} (scale {j})"
        logger.error(msg)
        raise DominationViolationError(msg, witness=w)

    max_ratio = float(np.max(ratio)) if ratio.size else 0.0
    displayed_holds = bool(max_ratio <= const_disp * (1.0 + 1e-12))
    if not displayed_holds:
        logger.info("majorant_dominates: (1+C^λ)^(1/r)=%.6g is below the observed ratio %.6g", const_disp, max_ratio)
    return DominationReport(
        C=C,
        C_grid=C_grid,
        constant=const,
        constant_displayed=const_disp,
        max_ratio=max_ratio,
        displayed_holds=displayed_holds,
        n_points=int(points.shape[0]),
    )


def sample_points(box: Box, n: int, rng: np.random.Generator) -> np.ndarray:
    """箱の中の一様サンプル (n, d)。"""
    lo = np.asarray(box.lo, dtype=float)
    hi = np.asarray(box.hi, dtype=float)
    return lo + (hi - lo) * rng.random((n, lo.size))
