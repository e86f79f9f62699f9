# src/adl/operators/maximal.py
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from adl.dilation.quasinorm import StepQuasiNorm, rho_many
from adl.dilation.tiling import Box, cube_containing_many
from adl.operators.majorant import MajorantParams, majorant_many, sample_points
from adl.sequence.quadrature import QuadratureSpec
from adl.sequence.sequences import ScaleTable, SparseSequence, random_sequence
from adl.utils.logging_utils import get_logger
from adl.utils.rng import STREAM_FAMILY, STREAM_MAXIMAL, STREAM_SAMPLE_POINTS, derive_generator, derive_seed

logger = get_logger(__name__)

RADIUS_SPAN = 4          # 半径 |det A|^{m/2}, m ∈ [2(j−4), 2(j+4)]
BALL_SAMPLES = 1024
STABILITY = 0.25
# 負の半径指数も spawn_key に載せるためのずらし
RADIUS_KEY_SHIFT = 1 << 16
POINT_CHUNK = 1 << 18


class BallSampler:
    """
    中心 0、半径 r の ρ 球 {y : ρ(y) < r} の一様サンプル。

    球は A^{e}Δ（楕円体）なので、その外接箱に層別ジッタ格子を置き ρ で棄却する。
    オフセットは中心に依らないので半径ごとに 1 回だけ作る。
    """

    def __init__(self, qn: StepQuasiNorm, samples: int = BALL_SAMPLES, seed: int = 0):
        self.qn = qn
        self.samples = samples
        self.seed = seed
        self._cache: Dict[int, np.ndarray] = {}

    def offsets(self, m: int) -> np.ndarray:
        """半径 |det A|^{m/2} の球のオフセット (P, d)。"""
        cached = self._cache.get(m)
        if cached is not None:
            return cached
        qn = self.qn
        a = qn.dilation
        d = a.dim
        r = math.exp(0.5 * m * a.log_det)
        # ρ(y) < |det A|^{m/2} ⟹ y ∈ A^{e}Δ,  e = ⌈m/2⌉
        e = math.ceil(0.5 * m - 1e-12)
        g = a.power(e)
        cov = g @ np.linalg.inv(qn.form.P) @ g.T
        half = np.sqrt(np.diag(cov)) * (1.0 + 1e-9)

        side = max(1, math.ceil(self.samples ** (1.0 / d)))
        rng = derive_generator(self.seed, STREAM_MAXIMAL, m + RADIUS_KEY_SHIFT)
        idx = np.stack(np.meshgrid(*[np.arange(side)] * d, indexing="ij"), axis=-1).reshape(-1, d)
        pts = -half + 2.0 * half * (idx + rng.random(idx.shape)) / side
        out = pts[rho_many(qn, pts) < r]
        if out.shape[0] == 0:
            out = np.zeros((1, d))
        self._cache[m] = out
        return out


def radius_exponents(j: int) -> List[int]:
    return list(range(2 * (j - RADIUS_SPAN), 2 * (j + RADIUS_SPAN) + 1))


def maximal_many(
    qn: StepQuasiNorm,
    c: SparseSequence,
    j: int,
    xs: np.ndarray,
    sampler: BallSampler,
    power: float = 1.0,
) -> np.ndarray:
    """
    中心化した M(f^power)(x)、f = Σ_k |c_{j,k}| 1_{Q_{j,k}}。
    半径 |det A|^{m/2}（m ∈ [2(j−4), 2(j+4)]）の球平均の最大。
    """
    xs = np.atleast_2d(np.asarray(xs, dtype=float))
    cells = c.at_scale(j)
    if not cells:
        return np.zeros(xs.shape[0])
    if power != 1.0:
        cells = {k: v ** power for k, v in cells.items()}
    table = ScaleTable(cells)
    a = qn.dilation
    d = a.dim
    best = np.zeros(xs.shape[0])
    for m in radius_exponents(j):
        off = sampler.offsets(m)
        step = max(1, POINT_CHUNK // off.shape[0])
        for s in range(0, xs.shape[0], step):
            blk = xs[s:s + step]
            pts = (blk[:, None, :] + off[None, :, :]).reshape(-1, d)
            vals = table.lookup(cube_containing_many(a, j, pts)).reshape(blk.shape[0], off.shape[0])
            best[s:s + step] = np.maximum(best[s:s + step], vals.mean(axis=1))
    return best


def maximal(
    qn: StepQuasiNorm,
    c: SparseSequence,
    j: int,
    x: Sequence[float],
    quad: Optional[QuadratureSpec] = None,
    *,
    samples: int = BALL_SAMPLES,
) -> float:
    quad = quad or QuadratureSpec()
    sampler = BallSampler(qn, samples=samples, seed=quad.seed)
    return float(maximal_many(qn, c, j, np.asarray(x, dtype=float)[None, :], sampler)[0])


# ==========================================================
# 最大関数による majorant の上界
# ==========================================================
@dataclass
class MaximalBoundReport:
    C_hat: float                  # max c^A_j(x) / (M(f^a)(x))^{1/a}
    C_hat_double: float           # 球サンプル数 2 倍での値
    stable: bool                  # 2 倍で 25% 以内
    n_points: int
    n_unreached: int              # 球が台に届かず分母 0 の点
    ratios: List[float] = field(default_factory=list)


def _within(x: float, y: float, tol: float = STABILITY) -> bool:
    top = max(abs(x), abs(y))
    return top == 0.0 or abs(x - y) <= tol * top


def maximal_bound_check(
    qn: StepQuasiNorm,
    c: SparseSequence,
    j: int,
    mp: MajorantParams,
    points: np.ndarray,
    quad: Optional[QuadratureSpec] = None,
    *,
    samples: int = BALL_SAMPLES,
) -> MaximalBoundReport:
    """c^A_j(x) <= C (M(Σ_k |c_{j,k}| 1_Q)^a)^{1/a}(x) の比の最大 Ĉ を報告する（失敗扱いはしない）。"""
    quad = quad or QuadratureSpec()
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if not mp.maximal_ready:
        logger.warning("maximal_bound_check: λ=%g is not > r/a=%g", mp.lam, mp.r / mp.a)
    num = majorant_many(qn, c, j, mp, points)

    def c_hat(n_samples: int) -> Tuple[float, np.ndarray, int]:
        sampler = BallSampler(qn, samples=n_samples, seed=quad.seed)
        den = maximal_many(qn, c, j, points, sampler, power=mp.a) ** (1.0 / mp.a)
        reached = den > 0
        ratios = np.zeros(points.shape[0])
        ratios[reached] = num[reached] / den[reached]
        unreached = int(np.count_nonzero(~reached & (num > 0)))
        return (float(ratios.max()) if ratios.size else 0.0), ratios, unreached

    base, ratios, unreached = c_hat(samples)
    dbl, _, _ = c_hat(2 * samples)
    stable = _within(base, dbl)
    if not stable:
        logger.warning("maximal_bound_check: Ĉ=%.4g moved to %.4g when ball samples doubled", base, dbl)
    return MaximalBoundReport(
        C_hat=base,
        C_hat_double=dbl,
        stable=bool(stable),
        n_points=int(points.shape[0]),
        n_unreached=unreached,
        ratios=ratios.tolist(),
    )


# ==========================================================
# ベクトル値最大関数（Fefferman–Stein）の経験比
# ==========================================================
@dataclass
class FeffermanSteinReport:
    p: float
    q: float
    ratios: List[float]           # 族ごとの ‖(Σ(Mf_i)^q)^{1/q}‖_p / ‖(Σ|f_i|^q)^{1/q}‖_p
    max_ratio: float
    max_ratio_half: float         # 前半の族だけでの最大
    stable: bool
    n_points: int
    n_funcs: int


def _lq(values: np.ndarray, q: float) -> np.ndarray:
    """(N, F) を関数方向に ℓ^q で畳む。"""
    if math.isinf(q):
        return values.max(axis=1)
    return np.sum(values ** q, axis=1) ** (1.0 / q)


def _lp_mean(values: np.ndarray, p: float) -> float:
    """同じ点集合上の L^p ノルム（体積因子は比で消えるので省く）。"""
    if math.isinf(p):
        return float(values.max()) if values.size else 0.0
    return float(np.mean(values ** p) ** (1.0 / p))


def fefferman_stein_check(
    qn: StepQuasiNorm,
    p: float,
    q: float,
    families: int,
    seed: int,
    *,
    j: int = 0,
    window: Box,
    n_funcs: int = 4,
    density: float = 0.5,
    n_points: int = 1024,
    samples: int = 256,
) -> FeffermanSteinReport:
    """
    f_i = Σ_k |c^{(i)}_{j,k}| 1_{Q_{j,k}} の族ごとの比を報告する（失敗扱いはしない）。

    積分は窓を各辺 1/2 ずつ広げた箱の一様サンプルで取る。Mf_i は箱の外にも裾を持つので
    分子はやや過小評価になる。
    """
    a = qn.dilation
    lo = np.asarray(window.lo)
    hi = np.asarray(window.hi)
    pad = 0.5 * (hi - lo)
    domain = Box.from_bounds(lo - pad, hi + pad)
    pts = sample_points(domain, n_points, derive_generator(seed, STREAM_SAMPLE_POINTS, 0))
    sampler = BallSampler(qn, samples=samples, seed=seed)

    ratios: List[float] = []
    for f in range(families):
        funcs = [
            random_sequence(a, window, (j, j), density, derive_seed(seed, STREAM_FAMILY, f * n_funcs + i))
            for i in range(n_funcs)
        ]
        raw = np.zeros((pts.shape[0], n_funcs))
        mx = np.zeros((pts.shape[0], n_funcs))
        for i, c in enumerate(funcs):
            cells = c.at_scale(j)
            if not cells:
                continue
            raw[:, i] = ScaleTable(cells).lookup(cube_containing_many(a, j, pts))
            mx[:, i] = maximal_many(qn, c, j, pts, sampler)
        den = _lp_mean(_lq(raw, q), p)
        num = _lp_mean(_lq(mx, q), p)
        ratios.append(num / den if den > 0 else 0.0)

    max_all = max(ratios) if ratios else 0.0
    half = ratios[: max(1, len(ratios) // 2)]
    max_half = max(half) if half else 0.0
    stable = _within(max_half, max_all)
    if not stable:
        logger.warning("fefferman_stein_check: max ratio %.4g (half) vs %.4g (all)", max_half, max_all)
    logger.info("fefferman_stein_check: p=%g q=%g families=%d max ratio %.4g", p, q, families, max_all)
    return FeffermanSteinReport(
        p=p,
        q=q,
        ratios=ratios,
        max_ratio=max_all,
        max_ratio_half=max_half,
        stable=bool(stable),
        n_points=int(pts.shape[0]),
        n_funcs=n_funcs,
    )
