from __future__ import annotations

from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Any, Dict, Mapping, Optional

import yaml

from adl.errors import ParseError
from adl.utils.logging_utils import get_logger

logger = get_logger(__name__)

COMMANDS = ("classify", "cocycle", "rho", "rho-report", "seqnorm", "match", "operators", "coincide")

# 設定ファイルで入れ子にしてよいセクション（中身は上位キーに平坦化する）
SECTIONS = ("inputs", "classify", "quasinorm", "sequence_space", "quadrature", "experiment", "output")


@dataclass
class RunConfig:
    command: str

    # --- 入力ファイル ---
    matrix: Optional[str] = None
    matrix_a: Optional[str] = None
    matrix_b: Optional[str] = None
    matrix_s: Optional[str] = None
    matrix_t: Optional[str] = None
    seq: Optional[str] = None

    # --- classify / cocycle ---
    jmax: int = 32
    slope_tol: float = 0.02
    kappa: float = 1.5
    tau: float = 1e-6

    # --- rho / rho-report ---
    point: Optional[str] = None
    samples: int = 10_000

    # --- ḟ^α_{p,q} ---
    alpha: float = 0.0
    p: Any = 2.0          # 数値または "inf"
    q: Any = 2.0

    # --- 求積 ---
    method: str = "auto"
    n: int = 16
    refine: int = 3
    rel_tol: float = 0.02
    mc_samples: int = 64
    pad: int = 2

    # --- match / operators ---
    window: Optional[str] = None
    scales: Any = "-3,3"   # "j_lo,j_hi" または [j_lo, j_hi]
    mode: str = "permute"
    trials: int = 100
    density: float = 0.3
    bracket: float = 50.0

    # --- 共通 ---
    seed: int = 0
    workers: Optional[int] = None
    out: Optional[str] = None
    emit_csv: Optional[str] = None
    log_file: bool = False

    def __post_init__(self) -> None:
        if self.command not in COMMANDS:
            msg = f"RunConfig: unknown command {self.command!r} (expected one of {', '.join(COMMANDS)})"
            logger.error(msg)
            raise ParseError(msg)

    def to_json(self) -> Dict[str, Any]:
        """レポートに埋め込む解決済みの設定（log_file と workers は除く）。"""
        out = asdict(self)
        out.pop("log_file", None)
        out.pop("workers", None)
        return out

    def scale_range(self) -> tuple[int, int]:
        raw = self.scales if isinstance(self.scales, (list, tuple)) else str(self.scales).split(",")
        try:
            lo, hi = (int(v) for v in raw)
        except (TypeError, ValueError) as e:
            msg = f"scales {self.scales!r}: expected 'j_lo,j_hi'"
            logger.error(msg)
            raise ParseError(msg) from e
        if lo > hi:
            msg = f"scales {self.scales!r}: j_lo must be <= j_hi"
            logger.error(msg)
            raise ParseError(msg)
        return lo, hi


FIELD_NAMES = {f.name for f in fields(RunConfig)}


def _flatten(raw: Mapping[str, Any], path: Path) -> Dict[str, Any]:
    flat: Dict[str, Any] = {}
    for key, value in raw.items():
        key = str(key).replace("-", "_")
        if key in SECTIONS and isinstance(value, Mapping):
            for k, v in value.items():
                flat[str(k).replace("-", "_")] = v
        else:
            flat[key] = value
    unknown = sorted(set(flat) - FIELD_NAMES)
    if unknown:
        msg = f"{path}: unknown config key(s) {', '.join(unknown)}"
        logger.error(msg)
        raise ParseError(msg, path=str(path))
    return flat


def read_config_file(path: str | Path) -> Dict[str, Any]:
    """YAML または JSON（YAML として読む）の設定ファイルを平坦な dict にする。"""
    path = Path(path)
    try:
        with path.open("r", encoding="utf-8") as f:
            raw = yaml.safe_load(f)
    except FileNotFoundError as e:
        msg = f"config file not found: {path}"
        logger.error(msg)
        raise ParseError(msg, path=str(path)) from e
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None)
        line = mark.line + 1 if mark is not None else None
        msg = f"{path}:{line}: invalid YAML/JSON ({e})"
        logger.error(msg)
        raise ParseError(msg, path=str(path), line=line) from e
    if raw is None:
        return {}
    if not isinstance(raw, Mapping):
        msg = f"{path}: top level must be a mapping"
        logger.error(msg)
        raise ParseError(msg, path=str(path))
    return _flatten(raw, path)


def load_run_config(
    path: Optional[str | Path] = None,
    overrides: Optional[Mapping[str, Any]] = None,
    command: Optional[str] = None,
) -> RunConfig:
    """
    設定ファイル → コマンドラインの順に上書きして RunConfig を作る。
    overrides の値が None のキーは「指定なし」として無視する。
    """
    values: Dict[str, Any] = read_config_file(path) if path is not None else {}
    for k, v in (overrides or {}).items():
        if v is not None and k in FIELD_NAMES:
            values[k] = v
    if command is not None:
        values["command"] = command
    if "command" not in values:
        msg = "RunConfig: no command given"
        logger.error(msg)
        raise ParseError(msg, path=None if path is None else str(path))
    try:
        return RunConfig(**values)
    except TypeError as e:
        msg = f"RunConfig: {e}"
        logger.error(msg)
        raise ParseError(msg, path=None if path is None else str(path)) from e
