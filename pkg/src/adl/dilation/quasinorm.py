# src/adl/dilation/quasinorm.py
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from adl.dilation.expansive import Dilation, snap_floor
from adl.errors import EnvelopeViolationError, PreconditionViolation, SlowConvergenceError
from adl.utils.logging_utils import get_logger
from adl.utils.parallel import ordered_map
from adl.utils.rng import STREAM_ENVELOPE, STREAM_TRIANGLE, derive_generator

logger = get_logger(__name__)

LYAP_INC_TOL = 1e-12
LYAP_MAX_DOUBLINGS = 200
INDEX_CAP = 4000
SHELL_RANGE = 8           # サンプルのスケール |det A|^{-8..8}
BLOCK = 4096              # 乱数ブロック（スレッド数に依存しない分割単位）
ENVELOPE_C_MAX = 1e6
TINY_RHO = 5e-324         # 下方飽和時の番兵（正値を保つ）


# ==========================================================
# Lyapunov 形式
# ==========================================================
@dataclass(frozen=True, eq=False)
class LyapunovForm:
    """P − A^{-T} P A^{-1} = I の解。q(y) = yᵀPy。"""

    P: np.ndarray
    residual: float
    doublings: int

    @property
    def unit_ball_volume(self) -> float:
        """|Δ| = |{q < 1}| = vol(単位球)/√det P。"""
        d = self.P.shape[0]
        vol_unit = math.pi ** (d / 2) / math.gamma(d / 2 + 1)
        return vol_unit / math.sqrt(float(np.linalg.det(self.P)))


def solve_lyapunov(a: Dilation) -> LyapunovForm:
    """
    P = Σ_{m>=0} (A^{-m})ᵀ A^{-m} を倍化漸化式で求める。

        P_1 = I, G = A^{-1}
        P_{2n} = P_n + Gᵀ P_n G,  G <- G²

    増分ノルムが 1e-12 を下回った時点で打ち切る。
    """
    d = a.dim
    s = np.eye(d)
    g = np.array(a.inv, dtype=float)
    for n in range(1, LYAP_MAX_DOUBLINGS + 1):
        inc = g.T @ s @ g
        s = s + inc
        inc_norm = float(np.linalg.norm(inc))
        if not math.isfinite(inc_norm):
            break
        if inc_norm < LYAP_INC_TOL:
            p = 0.5 * (s + s.T)
            resid = float(np.linalg.norm(p - a.inv.T @ p @ a.inv - np.eye(d)))
            if resid > 1e-8:
                logger.warning("solve_lyapunov: residual %.3e exceeds 1e-8", resid)
            p.setflags(write=False)
            logger.debug("solve_lyapunov: converged after %d doublings (residual %.3e)", n, resid)
            return LyapunovForm(P=p, residual=resid, doublings=n)
        g = g @ g
    msg = f"solve_lyapunov: increment not below {LYAP_INC_TOL:g} after {LYAP_MAX_DOUBLINGS} doublings (eigenvalue near the unit circle?)"
    logger.error(msg)
    raise SlowConvergenceError(msg)


# ==========================================================
# ステップ準ノルム
# ==========================================================
@dataclass(frozen=True, eq=False)
class StepQuasiNorm:
    """
    ρ_A(x) = |det A|^{j(x)}。j(x) は q(A^{-j}x) >= 1 > q(A^{-j-1}x) を満たす唯一の整数。
    q(A^{-(m+1)}x) = q(A^{-m}x) − ‖A^{-m}x‖² なので交差は狭義単調。
    """

    dilation: Dilation
    form: LyapunovForm

    @classmethod
    def build(cls, a: Dilation) -> "StepQuasiNorm":
        return cls(dilation=a, form=solve_lyapunov(a))

    def q(self, ys: np.ndarray) -> np.ndarray:
        """行ごとの yᵀPy。"""
        ys = np.atleast_2d(ys)
        return np.einsum("ni,ij,nj->n", ys, self.form.P, ys)

    def index_many(self, xs: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """
        点群 (N, d) の j(x) を返す。

        戻り値 (j, zero, saturated)。zero は x = 0 の行、saturated は
        INDEX_CAP ステップで交差が見つからなかった行。
        """
        xs = np.atleast_2d(np.asarray(xs, dtype=float))
        n = xs.shape[0]
        inv_t = self.dilation.inv.T
        fwd_t = self.dilation.entries.T
        j = np.zeros(n, dtype=np.int64)
        zero = ~np.any(xs != 0.0, axis=1)
        saturated = np.zeros(n, dtype=bool)

        y = xs.copy()
        qv = self.q(y)
        up = (qv >= 1.0) & ~zero
        down = (qv < 1.0) & ~zero

        # q(x) >= 1: q(A^{-1}y) >= 1 の間 A^{-1} をかけて上る
        active = up.copy()
        steps = 0
        while np.any(active):
            if steps >= INDEX_CAP:
                saturated |= active
                break
            z = y[active] @ inv_t
            ok = self.q(z) >= 1.0
            idx = np.flatnonzero(active)
            adv = idx[ok]
            y[adv] = z[ok]
            j[adv] += 1
            active[idx[~ok]] = False
            steps += 1

        # q(x) < 1: q(y) >= 1 になるまで A をかけて下る
        active = down.copy()
        steps = 0
        while np.any(active):
            if steps >= INDEX_CAP:
                saturated |= active
                break
            idx = np.flatnonzero(active)
            y[idx] = y[idx] @ fwd_t
            j[idx] -= 1
            done = self.q(y[idx]) >= 1.0
            active[idx[done]] = False
            steps += 1

        if np.any(saturated):
            logger.warning("StepQuasiNorm: %d point(s) saturated the index search at %d steps", int(saturated.sum()), INDEX_CAP)
        return j, zero, saturated

    def values_from_index(self, j: np.ndarray, zero: np.ndarray) -> np.ndarray:
        with np.errstate(over="ignore", under="ignore"):
            vals = np.exp(j.astype(float) * self.dilation.log_det)
        vals = np.where((vals == 0.0) & ~zero, TINY_RHO, vals)
        return np.where(zero, 0.0, vals)


def rho_index(qn: StepQuasiNorm, x: Sequence[float]) -> Tuple[Optional[int], bool]:
    """(j(x), saturated)。x = 0 では j は None。"""
    j, zero, sat = qn.index_many(np.asarray(x, dtype=float)[None, :])
    if zero[0]:
        return None, False
    return int(j[0]), bool(sat[0])


def rho_many(qn: StepQuasiNorm, xs: np.ndarray) -> np.ndarray:
    j, zero, _ = qn.index_many(xs)
    return qn.values_from_index(j, zero)


def rho(qn: StepQuasiNorm, x: Sequence[float]) -> float:
    """ρ_A(x)。x = 0 なら 0。"""
    return float(rho_many(qn, np.asarray(x, dtype=float)[None, :])[0])


def ball_membership(qn: StepQuasiNorm, center: Sequence[float], r: float, x: Sequence[float]) -> bool:
    """x ∈ B_ρ(center, r) ⟺ ρ_A(center − x) < r。"""
    if r <= 0:
        msg = f"ball_membership: radius r={r} must be > 0"
        logger.error(msg)
        raise ValueError(msg)
    diff = np.asarray(center, dtype=float) - np.asarray(x, dtype=float)
    return rho(qn, diff) < r


def ball_membership_many(qn: StepQuasiNorm, center: Sequence[float], r: float, xs: np.ndarray) -> np.ndarray:
    diff = np.asarray(center, dtype=float)[None, :] - np.atleast_2d(xs)
    return rho_many(qn, diff) < r


def ball_volume(qn: StepQuasiNorm, r: float) -> float:
    """
    |B_ρ(x, r)|。ρ < r ⟺ j(y) <= m（m = ⌈log_{|det A|} r⌉ − 1）⟺ y ∈ A^{m+1}Δ。
    """
    if r <= 0:
        msg = f"ball_volume: radius r={r} must be > 0"
        logger.error(msg)
        raise ValueError(msg)
    a = qn.dilation
    m = -snap_floor(-math.log(r) / a.log_det) - 1
    return a.detmag ** (m + 1) * qn.form.unit_ball_volume


# ==========================================================
# 経験的定数
# ==========================================================
def _shell_points(qn: StepQuasiNorm, rng: np.random.Generator, n: int) -> np.ndarray:
    """スケール A^s (s ∈ [-8, 8] 一様) ごとのガウス混合。"""
    d = qn.dilation.dim
    shells = rng.integers(-SHELL_RANGE, SHELL_RANGE + 1, size=n)
    z = rng.standard_normal((n, d))
    out = np.empty_like(z)
    for s in np.unique(shells):
        sel = shells == s
        out[sel] = z[sel] @ qn.dilation.power(int(s)).T
    return out


def _block_sizes(samples: int) -> List[Tuple[int, int]]:
    return [(b, min(BLOCK, samples - b * BLOCK)) for b in range(math.ceil(samples / BLOCK))]


def quasi_triangle_estimate(qn: StepQuasiNorm, samples: int, seed: int, *, workers: Optional[int] = None) -> float:
    """
    ĉ = max ρ(x+y)/(ρ(x)+ρ(y)) を seed 付きサンプルで見積もる。
    (x, 0) の組は比がちょうど 1 なので ĉ >= 1。
    """
    if samples < 1000:
        msg = f"quasi_triangle_estimate: samples={samples} must be >= 1000"
        logger.error(msg)
        raise PreconditionViolation(msg)

    def block(spec: Tuple[int, int]) -> float:
        b, n = spec
        rng = derive_generator(seed, STREAM_TRIANGLE, b)
        x = _shell_points(qn, rng, n)
        y = _shell_points(qn, rng, n)
        num = rho_many(qn, x + y)
        den = rho_many(qn, x) + rho_many(qn, y)
        ok = den > 0
        return float(np.max(num[ok] / den[ok])) if np.any(ok) else 1.0

    best = max(ordered_map(block, _block_sizes(samples), workers))
    return max(1.0, best)


@dataclass
class EnvelopeReport:
    c: float
    exponent_minus: float     # ln λ₋ / ln|det A|
    exponent_plus: float      # ln λ₊ / ln|det A|
    c_outer: float            # ρ >= 1 側で必要な c
    c_inner: float            # ρ <= 1 側で必要な c
    n_outer: int
    n_inner: int
    samples: int
    seed: int


def envelope_check(qn: StepQuasiNorm, samples: int, seed: int, *, workers: Optional[int] = None) -> EnvelopeReport:
    """
    ρ >= 1:  c^{-1} ρ^{e₋} <= ‖x‖ <= c ρ^{e₊}
    ρ <= 1:  c^{-1} ρ^{e₊} <= ‖x‖ <= c ρ^{e₋}
    を満たす最小の c を求める（e± = ln λ± / ln|det A|）。
    """
    a = qn.dilation
    e_minus = math.log(a.lambda_minus) / a.log_det
    e_plus = math.log(a.lambda_plus) / a.log_det

    def block(spec: Tuple[int, int]) -> Tuple[float, float, int, int]:
        b, n = spec
        rng = derive_generator(seed, STREAM_ENVELOPE, b)
        x = _shell_points(qn, rng, n)
        j, zero, sat = qn.index_many(x)
        keep = ~zero & ~sat
        x, j = x[keep], j[keep]
        norm_log = np.log(np.linalg.norm(x, axis=1))
        rho_log = j.astype(float) * a.log_det
        outer = j >= 0
        inner = j <= 0
        # c >= L/‖x‖ と c >= ‖x‖/U を対数で
        need = np.full(x.shape[0], 0.0)
        lo_exp = np.where(outer, e_minus, e_plus)
        hi_exp = np.where(outer, e_plus, e_minus)
        need = np.maximum(need, lo_exp * rho_log - norm_log)
        need = np.maximum(need, norm_log - hi_exp * rho_log)
        c_out = float(np.max(need[outer])) if np.any(outer) else 0.0
        c_in = float(np.max(need[inner])) if np.any(inner) else 0.0
        return c_out, c_in, int(outer.sum()), int(inner.sum())

    parts = ordered_map(block, _block_sizes(samples), workers)
    log_out = max(p[0] for p in parts)
    log_in = max(p[1] for p in parts)
    c_outer = math.exp(log_out)
    c_inner = math.exp(log_in)
    c = max(c_outer, c_inner)
    if not math.isfinite(c) or c > ENVELOPE_C_MAX:
        msg = f"envelope_check: minimal envelope constant {c:.3e} exceeds {ENVELOPE_C_MAX:g}"
        logger.error(msg)
        raise EnvelopeViolationError(msg)
    return EnvelopeReport(
        c=c,
        exponent_minus=e_minus,
        exponent_plus=e_plus,
        c_outer=c_outer,
        c_inner=c_inner,
        n_outer=sum(p[2] for p in parts),
        n_inner=sum(p[3] for p in parts),
        samples=samples,
        seed=seed,
    )
