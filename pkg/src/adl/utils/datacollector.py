from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional


@dataclass
class CsvCollector:
    """
    行単位で CSV に追記する軽量コレクタ。
    - classify: 1行/j（n_j のプロファイル）
    - operators: 1行/trial（ノルム比）
    作図は scripts/analysis 側で行う。
    """
    path: Path
    fieldnames: List[str]
    flush_every: int = 0  # 0 なら close 時のみ flush

    # 内部状態
    _fh: Optional[Any] = None
    _writer: Optional[csv.DictWriter] = None
    _rows: int = 0

    def open(self) -> None:
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._fh = self.path.open("w", newline="", encoding="utf-8")
        self._writer = csv.DictWriter(self._fh, fieldnames=self.fieldnames, extrasaction="ignore")
        self._writer.writeheader()

    def close(self) -> None:
        if self._fh is not None:
            self._fh.flush()
            self._fh.close()
        self._fh = None
        self._writer = None

    def __enter__(self) -> "CsvCollector":
        self.open()
        return self

    def __exit__(self, *exc: Any) -> None:
        self.close()

    def collect(self, row: Dict[str, Any]) -> None:
        if self._writer is None:
            raise RuntimeError("CsvCollector is not opened. Call open() first.")
        self._writer.writerow({k: _cell(v) for k, v in row.items()})
        self._rows += 1
        if self.flush_every > 0 and self._rows % self.flush_every == 0 and self._fh:
            self._fh.flush()

    def collect_many(self, rows: Iterable[Dict[str, Any]]) -> None:
        for row in rows:
            self.collect(row)


def _cell(v: Any) -> Any:
    # float は repr で書き出して round-trip を保つ
    if isinstance(v, float):
        return repr(v)
    return v
