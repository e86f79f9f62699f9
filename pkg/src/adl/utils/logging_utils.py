# src/adl/utils/logging_utils.py
from __future__ import annotations

from pathlib import Path
import logging
import sys
from typing import Optional

# ライブラリ側のロガーはすべてこの名前空間の下にぶら下がる
PACKAGE_LOGGER = "adl"

LOG_FORMAT = "%(asctime)s [%(levelname)s] %(name)s - %(message)s"


def run_log_name(command: str, seed: int) -> str:
    """ログファイル名のベース。例: ("rho-report", 3) -> "rho_report_seed0003"。"""
    return f"{command.replace('-', '_')}_seed{int(seed):04d}"


def setup_logging(
    output_dir: Path,
    run_name: str,
    *,
    enable_file: bool = True,
    log_level: int = logging.INFO,
    console_level: Optional[int] = None,
    file_level: Optional[int] = None,
) -> Optional[Path]:
    """
    CLI 実行 1 回分のログ設定。

    - ルートロガーのハンドラを張り替える（同一プロセスで main() を繰り返し呼んでも重複しない）
    - コンソールは stderr（rho の標準出力を汚さない）
    - enable_file のとき <output_dir>/logs/<run_name>.log にも書く
    - 外部ライブラリ（matplotlib 等）は WARNING 以上に抑える

    Returns
    -------
    Path | None
        ログファイルのパス（ファイル出力なしなら None）
    """
    root = logging.getLogger()
    root.setLevel(log_level)
    for h in list(root.handlers):
        root.removeHandler(h)
        h.close()

    formatter = logging.Formatter(LOG_FORMAT)

    ch = logging.StreamHandler(sys.stderr)
    ch.setFormatter(formatter)
    ch.setLevel(console_level if console_level is not None else log_level)
    root.addHandler(ch)

    for noisy in ("matplotlib", "PIL"):
        logging.getLogger(noisy).setLevel(logging.WARNING)

    if not enable_file:
        return None

    log_file = Path(output_dir) / "logs" / f"{run_name}.log"
    log_file.parent.mkdir(parents=True, exist_ok=True)
    fh = logging.FileHandler(log_file, encoding="utf-8")
    fh.setFormatter(formatter)
    fh.setLevel(file_level if file_level is not None else log_level)
    root.addHandler(fh)

    get_logger(PACKAGE_LOGGER).info("Logging to file: %s", log_file)
    return log_file


def get_logger(name: str | None = None) -> logging.Logger:
    """
    モジュール側から呼ぶ用のヘルパー。
    __name__ を渡して使う想定（adl.* 以外の名前も受け付ける）。
    """
    return logging.getLogger(name)
