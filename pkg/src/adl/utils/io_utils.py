"""JSON 入出力（行列ファイル・レポート）とスキーマ検証。"""
from __future__ import annotations

import dataclasses
import enum
import json
import math
from functools import lru_cache
from pathlib import Path
from typing import Any, Dict, Mapping

import jsonschema
import numpy as np

from adl.errors import ParseError
from adl.utils.logging_utils import get_logger

logger = get_logger(__name__)

SCHEMA_VERSION = "1.0"

# インストール済みパッケージ内 → リポジトリの docs/schemas の順に探す
_SCHEMA_DIRS = (
    Path(__file__).resolve().parents[1] / "schemas",
    Path(__file__).resolve().parents[3] / "docs" / "schemas",
)


# ==========================================================
# 読み込み
# ==========================================================
def read_json(path: str | Path) -> Any:
    path = Path(path)
    if not path.is_file():
        msg = f"{path}: file not found"
        logger.error(msg)
        raise ParseError(msg, path=str(path))
    text = path.read_text(encoding="utf-8")
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        msg = f"{path}:{e.lineno}: invalid JSON ({e.msg})"
        logger.error(msg)
        raise ParseError(msg, path=str(path), line=e.lineno) from e


def load_matrix(path: str | Path) -> np.ndarray:
    """{"d": int, "rows": [[...], ...]} 形式の行列ファイルを読む。"""
    obj = read_json(path)
    return parse_matrix(obj, source=str(path))


def parse_matrix(obj: Any, source: str = "<matrix>") -> np.ndarray:
    if not isinstance(obj, Mapping) or "rows" not in obj:
        msg = f"{source}: matrix object needs a 'rows' field"
        logger.error(msg)
        raise ParseError(msg, path=source)
    rows = obj["rows"]
    d = int(obj.get("d", len(rows)))
    try:
        m = np.array(rows, dtype=float)
    except (TypeError, ValueError) as e:
        msg = f"{source}: rows are not numeric ({e})"
        logger.error(msg)
        raise ParseError(msg, path=source) from e
    if m.shape != (d, d):
        msg = f"{source}: expected a {d}x{d} matrix, got shape {m.shape}"
        logger.error(msg)
        raise ParseError(msg, path=source)
    if not np.all(np.isfinite(m)):
        msg = f"{source}: matrix has non-finite entries"
        logger.error(msg)
        raise ParseError(msg, path=source)
    return m


def dump_matrix(path: str | Path, m: np.ndarray) -> None:
    m = np.asarray(m, dtype=float)
    payload = {"d": int(m.shape[0]), "rows": m.tolist()}
    Path(path).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


# ==========================================================
# 書き出し
# ==========================================================
def to_jsonable(obj: Any) -> Any:
    """dataclass / numpy / Enum / 非有限 float を JSON で表せる形に変換する。"""
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: to_jsonable(getattr(obj, f.name)) for f in dataclasses.fields(obj) if not f.name.startswith("_")}
    if isinstance(obj, enum.Enum):
        return obj.value
    if isinstance(obj, Mapping):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, Path):
        return str(obj)
    return obj


def dumps_report(report: Mapping[str, Any]) -> str:
    return json.dumps(to_jsonable(report), indent=2, sort_keys=True, allow_nan=False) + "\n"


def write_report(path: str | Path, report: Mapping[str, Any]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps_report(report), encoding="utf-8")
    logger.info("Report written to %s", path)
    return path


# ==========================================================
# スキーマ
# ==========================================================
@lru_cache(maxsize=None)
def load_schema(name: str) -> Dict[str, Any]:
    for base in _SCHEMA_DIRS:
        p = base / f"{name}.schema.json"
        if p.is_file():
            return json.loads(p.read_text(encoding="utf-8"))
    msg = f"schema '{name}' not found in {[str(d) for d in _SCHEMA_DIRS]}"
    logger.error(msg)
    raise FileNotFoundError(msg)


def validate(obj: Any, name: str) -> None:
    """jsonschema で検証する。失敗時は jsonschema.ValidationError。"""
    jsonschema.validate(instance=to_jsonable(obj), schema=load_schema(name))
