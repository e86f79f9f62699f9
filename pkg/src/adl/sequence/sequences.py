# src/adl/sequence/sequences.py
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from adl.dilation.expansive import Dilation
from adl.dilation.tiling import Box, Cell, cube_containing_many, cubes_in_box
from adl.errors import ParseError
from adl.utils.io_utils import read_json
from adl.utils.logging_utils import get_logger
from adl.utils.rng import STREAM_SEQUENCE, derive_generator

logger = get_logger(__name__)

Key = Tuple[int, Cell]


# ==========================================================
# パラメータ
# ==========================================================
def parse_exponent(value: Any) -> float:
    """"inf" / "∞" を math.inf に、それ以外は正の float に。"""
    if isinstance(value, str):
        text = value.strip().lower()
        if text in ("inf", "infinity", "∞"):
            return math.inf
        value = float(text)
    v = float(value)
    if not v > 0:
        msg = f"exponent must be > 0 or 'inf', got {value!r}"
        logger.error(msg)
        raise ValueError(msg)
    return v


def format_exponent(v: float) -> Any:
    return "inf" if math.isinf(v) else v


@dataclass(frozen=True)
class TLParams:
    """ḟ^α_{p,q}(A) のパラメータ。p, q は (0, ∞]。"""

    alpha: float
    p: float
    q: float

    def __post_init__(self) -> None:
        for name in ("p", "q"):
            v = getattr(self, name)
            if not (v > 0):
                msg = f"TLParams: {name}={v} must be > 0"
                logger.error(msg)
                raise ValueError(msg)

    @classmethod
    def parse(cls, alpha: Any, p: Any, q: Any) -> "TLParams":
        return cls(alpha=float(alpha), p=parse_exponent(p), q=parse_exponent(q))

    @property
    def p_is_inf(self) -> bool:
        return math.isinf(self.p)

    @property
    def q_is_inf(self) -> bool:
        return math.isinf(self.q)

    def weight_log(self, a: Dilation, j: int) -> float:
        """ln w_j,  w_j = |det A|^{-j(α+1/2)}。"""
        return -j * (self.alpha + 0.5) * a.log_det

    def to_json(self) -> Dict[str, Any]:
        return {"alpha": self.alpha, "p": format_exponent(self.p), "q": format_exponent(self.q)}


# ==========================================================
# 有限台の系列
# ==========================================================
@dataclass(frozen=True)
class SparseSequence:
    """
    (j, k) -> |c_{j,k}| の有限写像。値は正のみ保持（0 は捨てる）。
    複素数・負の入力は絶対値に落とし、moduli_taken に記録する。
    """

    entries: Mapping[Key, float] = field(default_factory=dict)
    moduli_taken: bool = False

    @classmethod
    def from_items(cls, items: Iterable[Tuple[Tuple[int, Sequence[int]], Any]]) -> "SparseSequence":
        out: Dict[Key, float] = {}
        took = False
        for (j, k), v in items:
            key = (int(j), tuple(int(x) for x in k))
            if key in out:
                msg = f"SparseSequence: duplicate entry {key}"
                logger.error(msg)
                raise ValueError(msg)
            if isinstance(v, complex) or (isinstance(v, (int, float, np.floating)) and v < 0):
                took = True
            mod = float(abs(v))
            if not math.isfinite(mod):
                msg = f"SparseSequence: non-finite value at {key}"
                logger.error(msg)
                raise ValueError(msg)
            if mod > 0.0:
                out[key] = mod
        return cls(entries=dict(sorted(out.items())), moduli_taken=took)

    @classmethod
    def single(cls, j: int, k: Sequence[int], v: float) -> "SparseSequence":
        return cls.from_items([((j, k), v)])

    # --- 参照 ---
    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries.items())

    @property
    def is_empty(self) -> bool:
        return not self.entries

    @property
    def dim(self) -> Optional[int]:
        for (_, k) in self.entries:
            return len(k)
        return None

    def get(self, j: int, k: Sequence[int]) -> float:
        return self.entries.get((int(j), tuple(int(x) for x in k)), 0.0)

    def scales(self) -> List[int]:
        return sorted({j for (j, _) in self.entries})

    @property
    def j_min(self) -> int:
        return min(j for (j, _) in self.entries)

    @property
    def j_max(self) -> int:
        return max(j for (j, _) in self.entries)

    def at_scale(self, j: int) -> Dict[Cell, float]:
        return {k: v for (jj, k), v in self.entries.items() if jj == j}

    def values_by_scale(self) -> Dict[int, List[float]]:
        out: Dict[int, List[float]] = {}
        for (j, _), v in self.entries.items():
            out.setdefault(j, []).append(v)
        return {j: sorted(vs) for j, vs in out.items()}

    # --- 演算 ---
    def scaled(self, lam: float) -> "SparseSequence":
        return SparseSequence.from_items(((key, abs(lam) * v) for key, v in self.entries.items()))

    def bounding_box(self, a: Dilation) -> Box:
        """台を成す立方体 A^j([0,1)^d + k) 全体の外接箱。"""
        if self.is_empty:
            msg = "bounding_box: empty sequence has no support"
            logger.error(msg)
            raise ValueError(msg)
        d = a.dim
        unit = np.array(list(itertools.product((0.0, 1.0), repeat=d)))
        lo = np.full(d, np.inf)
        hi = np.full(d, -np.inf)
        for j in self.scales():
            ks = np.array(list(self.at_scale(j).keys()), dtype=float)
            verts = (ks[:, None, :] + unit[None, :, :]) @ a.power(j).T
            lo = np.minimum(lo, verts.reshape(-1, d).min(axis=0))
            hi = np.maximum(hi, verts.reshape(-1, d).max(axis=0))
        return Box.from_bounds(lo, hi)

    def to_json(self) -> Dict[str, Any]:
        return {"coeffs": [{"j": j, "k": list(k), "v": v} for (j, k), v in self.entries.items()]}


# ==========================================================
# 推定値
# ==========================================================
class EstimateMethod(str, Enum):
    CLOSED_FORM = "ClosedForm"
    DYADIC_EXACT = "DyadicExact"
    GRID_QUADRATURE = "GridQuadrature"
    MONTE_CARLO = "MonteCarlo"


@dataclass
class NormEstimate:
    value: float
    abs_error: float
    method: EstimateMethod
    levels: List[Tuple[int, float]] = field(default_factory=list)   # (n, value) の精緻化履歴
    seed: Optional[int] = None
    unresolved: bool = False          # rel_tol を満たさないまま精緻化上限に達した
    argmax_cube: Optional[Dict[str, Any]] = None   # p = ∞ で sup を与えた P
    pad_saturated: bool = False       # argmax が候補スケールの上端

    @property
    def flagged(self) -> bool:
        return self.unresolved or self.pad_saturated

    @property
    def rel_error(self) -> float:
        return self.abs_error / self.value if self.value > 0 else 0.0


# ==========================================================
# 被積分関数
# ==========================================================
class ScaleTable:
    """1 スケール分の k -> 値の表。整数ベクトルを線形添字に潰して二分探索で引く。"""

    def __init__(self, cells: Mapping[Cell, float]):
        ks = np.array(list(cells.keys()), dtype=np.int64)
        self.kmin = ks.min(axis=0)
        self.dims = ks.max(axis=0) - self.kmin + 1
        lin = np.ravel_multi_index(tuple((ks - self.kmin).T), tuple(int(v) for v in self.dims))
        order = np.argsort(lin)
        self.keys = lin[order]
        self.vals = np.array(list(cells.values()), dtype=float)[order]

    def lookup(self, ks: np.ndarray) -> np.ndarray:
        rel = ks - self.kmin
        inside = np.all((rel >= 0) & (rel < self.dims), axis=1)
        out = np.zeros(ks.shape[0])
        if not np.any(inside):
            return out
        lin = np.ravel_multi_index(tuple(rel[inside].T), tuple(int(v) for v in self.dims))
        pos = np.searchsorted(self.keys, lin)
        pos = np.minimum(pos, len(self.keys) - 1)
        hit = self.keys[pos] == lin
        vals = np.where(hit, self.vals[pos], 0.0)
        out[inside] = vals
        return out


class CoefficientField:
    """
    x -> (w_j |c_{j,k(j,x)}|)_j。各スケールで x を含む立方体は高々 1 つ。
    """

    def __init__(self, a: Dilation, params: TLParams, c: SparseSequence):
        self.dilation = a
        self.params = params
        self.sequence = c
        self.scales = c.scales()
        self._tables = [ScaleTable(c.at_scale(j)) for j in self.scales]
        self._weights = np.array([math.exp(params.weight_log(a, j)) for j in self.scales])

    def terms(self, xs: np.ndarray) -> np.ndarray:
        """(N, S) の配列。列 s はスケール self.scales[s] の w_j |c_{j,k}| 1_Q(x)。"""
        xs = np.atleast_2d(np.asarray(xs, dtype=float))
        out = np.zeros((xs.shape[0], len(self.scales)))
        for s, (j, table) in enumerate(zip(self.scales, self._tables)):
            ks = cube_containing_many(self.dilation, j, xs)
            out[:, s] = self._weights[s] * table.lookup(ks)
        return out

    def combine(self, terms: np.ndarray, q: Optional[float] = None) -> np.ndarray:
        q = self.params.q if q is None else q
        if terms.shape[1] == 0:
            return np.zeros(terms.shape[0])
        if math.isinf(q):
            return terms.max(axis=1)
        return np.sum(terms ** q, axis=1) ** (1.0 / q)

    def __call__(self, xs: np.ndarray) -> np.ndarray:
        return self.combine(self.terms(xs))


def integrand(a: Dilation, params: TLParams, c: SparseSequence, x: Sequence[float]) -> float:
    """(Σ_j (w_j |c_{j,k(j,x)}|)^q)^{1/q}（q = ∞ は max）。"""
    if c.is_empty:
        return 0.0
    return float(CoefficientField(a, params, c)(np.asarray(x, dtype=float)[None, :])[0])


# ==========================================================
# 乱数系列
# ==========================================================
def random_sequence(
    a: Dilation,
    window: Box,
    scales: Tuple[int, int],
    density: float,
    seed: int,
) -> SparseSequence:
    """
    各スケール j ∈ [j_lo, j_hi] で窓と交わる立方体を列挙し、
    確率 density で選んだセルに |N(0,1)| を置く。スケールごとに独立な乱数列。
    """
    if not (0.0 < density <= 1.0):
        msg = f"random_sequence: density={density} must be in (0, 1]"
        logger.error(msg)
        raise ValueError(msg)
    j_lo, j_hi = int(scales[0]), int(scales[1])
    items: List[Tuple[Key, float]] = []
    for j in range(j_lo, j_hi + 1):
        cells = cubes_in_box(a, j, window)
        if not cells:
            continue
        rng = derive_generator(seed, STREAM_SEQUENCE, j - j_lo)
        keep = rng.random(len(cells)) < density
        vals = np.abs(rng.standard_normal(len(cells)))
        items.extend(((j, k), float(v)) for k, v, kp in zip(cells, vals, keep) if kp)
    return SparseSequence.from_items(items)


# ==========================================================
# 入出力
# ==========================================================
def _coeff_value(raw: Any, where: str) -> Any:
    if isinstance(raw, (int, float)):
        return raw
    if isinstance(raw, Mapping) and "re" in raw:
        return complex(float(raw["re"]), float(raw.get("im", 0.0)))
    if isinstance(raw, list) and len(raw) == 2:
        return complex(float(raw[0]), float(raw[1]))
    msg = f"{where}: coefficient value must be a number, [re, im] or {{re, im}}"
    logger.error(msg)
    raise ParseError(msg, path=where)


def parse_sequence(obj: Any, source: str = "<sequence>") -> SparseSequence:
    if not isinstance(obj, Mapping) or not isinstance(obj.get("coeffs"), list):
        msg = f"{source}: sequence object needs a 'coeffs' list"
        logger.error(msg)
        raise ParseError(msg, path=source)
    items = []
    for i, entry in enumerate(obj["coeffs"]):
        try:
            items.append(((int(entry["j"]), [int(x) for x in entry["k"]]), _coeff_value(entry["v"], source)))
        except (KeyError, TypeError, ValueError) as e:
            msg = f"{source}: coeffs[{i}] malformed ({e})"
            logger.error(msg)
            raise ParseError(msg, path=source) from e
    try:
        seq = SparseSequence.from_items(items)
    except ValueError as e:
        raise ParseError(f"{source}: {e}", path=source) from e
    if seq.moduli_taken:
        logger.info("%s: complex/negative coefficients reduced to moduli", source)
    return seq


def load_sequence(path: str | Path) -> SparseSequence:
    return parse_sequence(read_json(path), source=str(path))


def dump_sequence(path: str | Path, c: SparseSequence) -> None:
    Path(path).write_text(json.dumps(c.to_json(), indent=2) + "\n", encoding="utf-8")
