"""adl 全体で送出する例外クラス。

入力の不備は ValueError 系、数値計算・アルゴリズム上の失敗は RuntimeError 系に寄せる。
"""
from __future__ import annotations

from typing import Any, Optional, Sequence, Tuple


class NotInvertibleError(ValueError):
    """|det| が 1e-12 未満の行列。"""


class NotExpansiveError(ValueError):
    """固有値の絶対値が 1 + 1e-9 以下の行列。"""

    def __init__(self, msg: str, modulus: float):
        super().__init__(msg)
        self.modulus = modulus


class SlowConvergenceError(RuntimeError):
    """Lyapunov 級数の倍化反復が収束しない（単位円に近い固有値）。"""


class EnvelopeViolationError(RuntimeError):
    """λ± のべき乗エンベロープに有限の定数が当てはまらない。"""


class WindowTooLargeError(ValueError):
    """列挙候補数が上限を超えた。"""


class UnsaturatedError(RuntimeError):
    """最大マッチングが始点側を飽和しなかった。Hall 条件の違反集合を保持する。"""

    def __init__(
        self,
        msg: str,
        hall_set: Sequence[Tuple[int, ...]] = (),
        neighbours: Sequence[Tuple[int, ...]] = (),
    ):
        super().__init__(msg)
        self.hall_set = list(hall_set)
        self.neighbours = list(neighbours)


class DisplacementBoundError(RuntimeError):
    """マッチングの変位が保証された上界を超えた。最悪のセル対を保持する。"""

    def __init__(
        self,
        msg: str,
        source: Optional[Tuple[int, ...]] = None,
        target: Optional[Tuple[int, ...]] = None,
        displacement: float = 0.0,
        bound: float = 0.0,
    ):
        super().__init__(msg)
        self.source = source
        self.target = target
        self.displacement = float(displacement)
        self.bound = float(bound)


class DominationViolationError(RuntimeError):
    """指示関数和が majorant で押さえられない点が見つかった。"""

    def __init__(self, msg: str, witness: Optional[Sequence[float]] = None):
        super().__init__(msg)
        self.witness = None if witness is None else [float(v) for v in witness]


class PreconditionViolation(ValueError):
    """行列式・同値性などの前提条件が満たされない。"""


class SupportEscapesWindowError(ValueError):
    """系列の台が写像の窓の外に出ている。"""

    def __init__(self, msg: str, entry: Any = None):
        super().__init__(msg)
        self.entry = entry


class ParseError(ValueError):
    """入力ファイルの読み込み・解釈エラー（パスと行番号つき）。"""

    def __init__(self, msg: str, path: Optional[str] = None, line: Optional[int] = None):
        super().__init__(msg)
        self.path = path
        self.line = line
