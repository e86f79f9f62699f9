# src/adl/dilation/expansive.py
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from adl.errors import NotExpansiveError, NotInvertibleError, PreconditionViolation
from adl.utils.logging_utils import get_logger
from adl.utils.parallel import ordered_map

logger = get_logger(__name__)

DET_TOL = 1e-12          # これ未満の |det| は非可逆扱い
EXPANSIVE_TOL = 1e-9     # |λ| <= 1 + EXPANSIVE_TOL は非拡大
SNAP_TOL = 1e-12         # 整数境界へのスナップ（相対）
OVERFLOW_NORM = 1e150
LOG_OVERFLOW = math.log(OVERFLOW_NORM)
NORM_RTOL = 1e-8
NORM_MAX_ITER = 10_000


class Verdict(str, Enum):
    EQUIVALENT = "Equivalent"
    NOT_EQUIVALENT = "NotEquivalent"
    INCONCLUSIVE = "Inconclusive"
    NOT_APPLICABLE = "NotApplicable"


class ProbeVerdict(str, Enum):
    FINITE = "Finite"
    INFINITE = "Infinite"
    INCONCLUSIVE = "Inconclusive"


# ==========================================================
# 数値ヘルパ
# ==========================================================
def snap_floor(value: float, rel_tol: float = SNAP_TOL) -> int:
    """⌊value⌋。整数に相対 rel_tol 以内で近い値はその整数に寄せる。"""
    nearest = round(value)
    if abs(value - nearest) <= rel_tol * max(1.0, abs(value)):
        return int(nearest)
    return int(math.floor(value))


def floor_scale(eps: float, j: int) -> int:
    """i = ⌊εj⌋（スナップ付き）。"""
    return snap_floor(eps * j)


def _char_poly(m: np.ndarray) -> np.ndarray:
    """d <= 3 の特性多項式係数（最高次から）。"""
    d = m.shape[0]
    tr = float(np.trace(m))
    det = float(np.linalg.det(m))
    if d == 1:
        return np.array([1.0, -tr])
    if d == 2:
        return np.array([1.0, -tr, det])
    tr2 = float(np.trace(m @ m))
    return np.array([1.0, -tr, 0.5 * (tr * tr - tr2), -det])


def eigenvalues(m: np.ndarray) -> np.ndarray:
    """d <= 3 は特性多項式の根、d >= 4 は QR 反復（LAPACK）で固有値を求める。"""
    m = np.asarray(m, dtype=float)
    if m.shape[0] <= 3:
        return np.roots(_char_poly(m)).astype(complex)
    return np.linalg.eigvals(m).astype(complex)


def operator_norm(m: np.ndarray, rtol: float = NORM_RTOL, max_iter: int = NORM_MAX_ITER) -> float:
    """
    ‖m‖_2 を MᵀM のべき乗法で求める。

    開始ベクトルは全 1 を正規化したもの。それが最大特異ベクトルと直交する
    場合に備え、もう 1 本の決定的な開始ベクトルでも回して大きい方を採る。
    """
    m = np.asarray(m, dtype=float)
    d = m.shape[1]
    if not np.any(m):
        return 0.0
    g = m.T @ m
    starts = [np.ones(d), np.array([(-1.0) ** i * (i + 1) for i in range(d)])]
    best = 0.0
    for v in starts:
        v = v / np.linalg.norm(v)
        lam = float(v @ g @ v)
        for _ in range(max_iter):
            w = g @ v
            nw = float(np.linalg.norm(w))
            if nw == 0.0:
                lam = 0.0
                break
            v = w / nw
            lam_new = float(v @ g @ v)
            if abs(lam_new - lam) <= rtol * abs(lam_new):
                lam = lam_new
                break
            lam = lam_new
        best = max(best, lam)
    return math.sqrt(max(best, 0.0))


def scaled_power(m: np.ndarray, n: int) -> Tuple[np.ndarray, float]:
    """
    m^n (n >= 0) を二進べき乗で計算し (仮数行列, 対数スケール) で返す。
    m^n = mantissa * exp(log_scale)。各乗算の後に仮数を正規化してオーバーフローを遅らせる。
    """
    if n < 0:
        raise ValueError("scaled_power expects n >= 0")
    d = m.shape[0]
    result = np.eye(d)
    log_r = 0.0
    base = np.array(m, dtype=float)
    log_b = 0.0
    while n > 0:
        if n & 1:
            result = result @ base
            log_r += log_b
            s = float(np.max(np.abs(result)))
            if s > 0:
                result = result / s
                log_r += math.log(s)
        n >>= 1
        if n:
            base = base @ base
            log_b *= 2.0
            s = float(np.max(np.abs(base)))
            if s > 0:
                base = base / s
                log_b += math.log(s)
    return result, log_r


# ==========================================================
# Dilation
# ==========================================================
@dataclass(frozen=True, eq=False)
class Dilation:
    """検証済みの拡大行列 A と、その行列式・逆行列・スペクトル情報。"""

    dim: int
    entries: np.ndarray
    detmag: float
    inv: np.ndarray
    eigmods: Tuple[float, ...]
    lambda_minus: float
    lambda_plus: float
    _powers: Dict[int, np.ndarray] = field(default_factory=dict, repr=False, compare=False)

    @property
    def log_det(self) -> float:
        return math.log(self.detmag)

    def power(self, m: int) -> np.ndarray:
        """A^m（負の m は A^{-1} のべき）。結果はキャッシュする。"""
        cached = self._powers.get(m)
        if cached is not None:
            return cached
        if m >= 0:
            p = np.linalg.matrix_power(self.entries, m)
        else:
            p = np.linalg.matrix_power(self.inv, -m)
        p.setflags(write=False)
        self._powers[m] = p
        return p

    def scaled_power(self, m: int) -> Tuple[np.ndarray, float]:
        if m >= 0:
            return scaled_power(self.entries, m)
        return scaled_power(self.inv, -m)

    def is_integer_scalar(self) -> Optional[int]:
        """A = m·I（m は 2 以上の整数）なら m、そうでなければ None。入れ子立方体が使える条件。"""
        m0 = self.entries[0, 0]
        if abs(m0 - round(m0)) > 1e-12 or round(m0) < 2:
            return None
        if np.array_equal(self.entries, round(m0) * np.eye(self.dim)):
            return int(round(m0))
        return None

    def to_json(self) -> dict:
        return {"d": self.dim, "rows": self.entries.tolist()}


def validate_dilation(m: Sequence[Sequence[float]] | np.ndarray, *, spectral_margin: float = 0.01) -> Dilation:
    """
    行列 M を検証して Dilation を返す。

    λ₋ = min|λ|^{1-margin}, λ₊ = max|λ|^{1+margin} と取る
    （1 < λ₋ < min|λ| <= max|λ| < λ₊ を満たす）。
    """
    m = np.array(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        msg = f"validate_dilation: matrix must be square, got shape {m.shape}"
        logger.error(msg)
        raise ValueError(msg)
    if not np.all(np.isfinite(m)):
        msg = "validate_dilation: matrix has non-finite entries"
        logger.error(msg)
        raise ValueError(msg)

    d = m.shape[0]
    det = float(np.linalg.det(m))
    if abs(det) < DET_TOL:
        msg = f"validate_dilation: |det|={abs(det):.3e} < {DET_TOL:g}, matrix is not invertible"
        logger.error(msg)
        raise NotInvertibleError(msg)

    mods = np.abs(eigenvalues(m))
    worst = float(np.min(mods))
    if worst <= 1.0 + EXPANSIVE_TOL:
        msg = f"validate_dilation: eigenvalue modulus {worst:.12g} <= 1, matrix is not expansive"
        logger.error(msg)
        raise NotExpansiveError(msg, modulus=worst)

    inv = np.linalg.inv(m)
    detmag = abs(det)

    # 不変条件のチェック（悪条件な行列では崩れうるので警告に留める）
    prod = float(np.prod(mods))
    if abs(prod - detmag) > 1e-9 * detmag:
        logger.warning("validate_dilation: |det|=%r differs from product of |eigenvalues|=%r", detmag, prod)
    resid = float(np.max(np.abs(m @ inv - np.eye(d))))
    if resid > 1e-9:
        logger.warning("validate_dilation: A·A^{-1} deviates from identity by %.3e", resid)

    lo = float(np.min(mods))
    hi = float(np.max(mods))
    m.setflags(write=False)
    inv.setflags(write=False)
    return Dilation(
        dim=d,
        entries=m,
        detmag=detmag,
        inv=inv,
        eigmods=tuple(sorted(float(v) for v in mods)),
        lambda_minus=lo ** (1.0 - spectral_margin),
        lambda_plus=hi ** (1.0 + spectral_margin),
    )


def is_expansive(m: Sequence[Sequence[float]] | np.ndarray) -> bool:
    try:
        validate_dilation(m)
    except (NotExpansiveError, NotInvertibleError):
        return False
    return True


# ==========================================================
# 同値性判定
# ==========================================================
def epsilon(a: Dilation, b: Dilation) -> float:
    """ε = ln|det A| / ln|det B|。"""
    return a.log_det / b.log_det


def power_product(a: Dilation, j: int, b: Dilation, i: int) -> Tuple[np.ndarray, float]:
    """A^j B^i を (仮数行列, 対数スケール) で返す。"""
    ma, la = a.scaled_power(j)
    mb, lb = b.scaled_power(i)
    prod = ma @ mb
    s = float(np.max(np.abs(prod)))
    if s == 0.0:
        return prod, la + lb
    return prod / s, la + lb + math.log(s)


def log_norm_entry(a: Dilation, b: Dilation, j: int, eps: float) -> float:
    """ln ‖A^{-j} B^{⌊εj⌋}‖。"""
    mant, log_s = power_product(a, -j, b, floor_scale(eps, j))
    n = operator_norm(mant)
    if n == 0.0:
        return -math.inf
    return log_s + math.log(n)


@dataclass
class EquivalenceReport:
    epsilon: float
    window: int
    norms: List[Tuple[int, float]]
    growth_slope: float
    verdict: Verdict
    slope_tol: float
    kappa: float
    overflow_at: Optional[int] = None

    def norm(self, j: int) -> float:
        return dict(self.norms)[j]


def _growth_slope(js: Sequence[int], log_ns: Sequence[float]) -> float:
    x = np.abs(np.asarray(js, dtype=float))
    y = np.asarray(log_ns, dtype=float)
    if len(x) < 2 or np.ptp(x) == 0:
        return 0.0
    return float(np.polyfit(x, y, 1)[0])


def classify_equivalence(
    a: Dilation,
    b: Dilation,
    J: int = 32,
    slope_tol: float = 0.02,
    *,
    kappa: float = 1.5,
    workers: Optional[int] = None,
) -> EquivalenceReport:
    """
    sup_j ‖A^{-j} B^{⌊εj⌋}‖ の有界性を窓 |j| <= J で判定する（ヒューリスティック）。

    - Equivalent:    傾き < slope_tol かつ max_{|j|<=J} n_j <= κ·max_{|j|<=J/2} n_j
    - NotEquivalent: 傾き > 2·slope_tol かつ上の窓倍化条件が破れる（またはオーバーフロー）
    - それ以外は Inconclusive。生の n_j は常にレポートに載せる。
    """
    if J < 8:
        msg = f"classify_equivalence: window J={J} must be >= 8"
        logger.error(msg)
        raise PreconditionViolation(msg)

    eps = epsilon(a, b)
    js = list(range(-J, J + 1))
    log_ns = ordered_map(lambda j: log_norm_entry(a, b, j, eps), js, workers)

    # オーバーフローした最小の |j| で窓を切り詰める
    overflow_at: Optional[int] = None
    for j, ln in zip(js, log_ns):
        if ln > LOG_OVERFLOW and (overflow_at is None or abs(j) < overflow_at):
            overflow_at = abs(j)
    window = J if overflow_at is None else overflow_at - 1
    kept = [(j, ln) for j, ln in zip(js, log_ns) if abs(j) <= window]
    norms = [(j, math.exp(ln)) for j, ln in kept]

    slope = _growth_slope([j for j, _ in kept], [ln for _, ln in kept])
    full_max = max(n for _, n in norms)
    half_max = max(n for j, n in norms if abs(j) <= window // 2)
    bounded = full_max <= kappa * half_max

    if overflow_at is not None:
        verdict = Verdict.NOT_EQUIVALENT
        logger.warning("classify_equivalence: n_j exceeded %.0e at |j|=%d, window truncated to %d", OVERFLOW_NORM, overflow_at, window)
    elif slope < slope_tol and bounded:
        verdict = Verdict.EQUIVALENT
    elif slope > 2.0 * slope_tol and not bounded:
        verdict = Verdict.NOT_EQUIVALENT
    else:
        verdict = Verdict.INCONCLUSIVE
        logger.warning("classify_equivalence: inconclusive (slope=%.4g, bounded=%s)", slope, bounded)

    return EquivalenceReport(
        epsilon=eps,
        window=window,
        norms=norms,
        growth_slope=slope,
        verdict=verdict,
        slope_tol=slope_tol,
        kappa=kappa,
        overflow_at=overflow_at,
    )


# ==========================================================
# コサイクル集合の有限性
# ==========================================================
@dataclass
class CocycleProbe:
    counts: List[Tuple[int, int]]            # {A^j B^{-j} : |j| <= J'} の個数
    counts_reverse: List[Tuple[int, int]]    # {A^{-j} B^{j} : |j| <= J'} の個数
    verdict: ProbeVerdict
    tau: float
    overflow_at: Optional[int] = None

    def count(self, J: int) -> int:
        return dict(self.counts)[J]


def _cocycle_matrix(a: Dilation, b: Dilation, j: int) -> Optional[np.ndarray]:
    mant, log_s = power_product(a, j, b, -j)
    if log_s > LOG_OVERFLOW:
        return None
    return mant * math.exp(log_s)


def _distinct_counts(a: Dilation, b: Dilation, J: int, tau: float, sign: int) -> Tuple[List[Tuple[int, int]], Optional[int]]:
    reps: List[np.ndarray] = []
    counts: List[Tuple[int, int]] = []

    def add(m: np.ndarray) -> None:
        if reps:
            diffs = np.max(np.abs(np.stack(reps) - m[None, :, :]), axis=(1, 2))
            if float(np.min(diffs)) <= tau:
                return
        reps.append(m)

    for jj in range(0, J + 1):
        for j in ((0,) if jj == 0 else (jj, -jj)):
            m = _cocycle_matrix(a, b, sign * j)
            if m is None:
                logger.warning("cocycle_probe: overflow at |j|=%d, window truncated", jj)
                return counts, jj
            add(m)
        counts.append((jj, len(reps)))
    return counts, None


def _probe_verdict(counts: List[Tuple[int, int]], J: int) -> ProbeVerdict:
    table = dict(counts)
    if J not in table:
        return ProbeVerdict.INFINITE
    half = math.ceil(J / 2)
    if table[J] == table[half]:
        return ProbeVerdict.FINITE
    # 後半でも 1 ステップあたり 1 個以上増え続けていれば無限と判定
    if table[J] - table[half] >= J - half:
        return ProbeVerdict.INFINITE
    return ProbeVerdict.INCONCLUSIVE


def cocycle_probe(a: Dilation, b: Dilation, J: int = 32, tau: float = 1e-6) -> CocycleProbe:
    """
    {A^j B^{-j} : |j| <= J} の相異なる元の個数を成分ごとの許容 τ で数える。

    Finite ⟺ count(J) = count(⌈J/2⌉)。A^{-j}B^{j} の順でも数え、両方 Finite のときのみ Finite。
    """
    if J < 8:
        msg = f"cocycle_probe: window J={J} must be >= 8"
        logger.error(msg)
        raise PreconditionViolation(msg)
    if tau <= 0:
        msg = f"cocycle_probe: tau={tau} must be > 0"
        logger.error(msg)
        raise PreconditionViolation(msg)

    fwd, of_f = _distinct_counts(a, b, J, tau, +1)
    rev, of_r = _distinct_counts(a, b, J, tau, -1)
    overflow_at = min((v for v in (of_f, of_r) if v is not None), default=None)

    v_f = _probe_verdict(fwd, J)
    v_r = _probe_verdict(rev, J)
    if v_f == v_r:
        verdict = v_f
    elif ProbeVerdict.INFINITE in (v_f, v_r):
        verdict = ProbeVerdict.INFINITE
    else:
        verdict = ProbeVerdict.INCONCLUSIVE
    return CocycleProbe(counts=fwd, counts_reverse=rev, verdict=verdict, tau=tau, overflow_at=overflow_at)


def rigidity_oracle(a: Dilation, b: Dilation, tol: float = 1e-9) -> Verdict:
    """
    正の実固有値のみを持ち det(A) = det(B) の組では、同値 ⟺ A = B。
    それ以外の組には適用できない（NotApplicable）。
    """
    def positive_real(d: Dilation) -> bool:
        ev = eigenvalues(d.entries)
        return bool(np.all(np.abs(ev.imag) <= tol) and np.all(ev.real > 0))

    if not (positive_real(a) and positive_real(b)):
        return Verdict.NOT_APPLICABLE
    det_a = float(np.linalg.det(a.entries))
    det_b = float(np.linalg.det(b.entries))
    if abs(det_a - det_b) > tol * max(abs(det_a), abs(det_b)):
        return Verdict.NOT_APPLICABLE
    if a.dim == b.dim and np.allclose(a.entries, b.entries, rtol=0.0, atol=tol):
        return Verdict.EQUIVALENT
    return Verdict.NOT_EQUIVALENT


# ==========================================================
# ‖A^{-j}‖ の減衰
# ==========================================================
@dataclass
class DecayProfile:
    norms: List[Tuple[int, float]]
    onset: Optional[int]   # これ以降窓内で狭義単調減少する最小の j


def inverse_power_decay(a: Dilation, J: int = 32) -> DecayProfile:
    norms: List[Tuple[int, float]] = []
    for j in range(0, J + 1):
        mant, log_s = a.scaled_power(-j)
        norms.append((j, math.exp(log_s) * operator_norm(mant)))
    onset: Optional[int] = None
    for j0 in range(0, J):
        vals = [n for j, n in norms if j >= j0]
        if all(x > y for x, y in zip(vals, vals[1:])):
            onset = j0
            break
    return DecayProfile(norms=norms, onset=onset)
