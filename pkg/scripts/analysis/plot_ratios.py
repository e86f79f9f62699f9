#!/usr/bin/env python3
from __future__ import annotations

import argparse
from pathlib import Path

import matplotlib.pyplot as plt
import numpy as np
import pandas as pd


def load_ratios(csv_files: list[Path]) -> pd.DataFrame:
    """
    operators --emit-csv の出力を複数 seed 分読み込み、ratio_* 列を縦に積む（seed 列つき）
    """
    dfs: list[pd.DataFrame] = []
    for f in csv_files:
        seed = f.stem.split("_seed")[-1].split("_")[0] if "_seed" in f.stem else f.stem
        df = pd.read_csv(f)
        cols = [c for c in df.columns if c.startswith("ratio_")]
        if not cols:
            raise ValueError(f"{f} has no ratio_* columns (is it an operators CSV?)")
        long = df[["trial", *cols]].melt(id_vars="trial", var_name="family", value_name="ratio")
        long["family"] = long["family"].str.removeprefix("ratio_")
        long["seed"] = seed
        dfs.append(long.dropna(subset=["ratio"]))
    return pd.concat(dfs, ignore_index=True)


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--dir", type=Path, default=Path("results/operators"), help="CSV があるディレクトリ")
    parser.add_argument("--pattern", type=str, default="*.csv", help="読み込む glob パターン")
    parser.add_argument("--bracket", type=float, default=50.0, help="受け入れ幅 [1/B, B]")
    parser.add_argument("--figdir", type=Path, default=Path("figures"), help="図の保存先")
    parser.add_argument("--out", type=str, default="operator_ratios.png", help="出力画像名（figdir配下）")
    args = parser.parse_args()

    csv_files = sorted(args.dir.glob(args.pattern))
    if not csv_files:
        raise FileNotFoundError(f"{args.dir}/{args.pattern} に一致する CSV が見つかりません")
    print(f"Loaded {len(csv_files)} files")

    df = load_ratios(csv_files)
    families = sorted(df["family"].unique())

    fig, axes = plt.subplots(1, len(families), figsize=(6 * len(families), 4), squeeze=False)
    for ax, fam in zip(axes[0], families):
        vals = df.loc[df["family"] == fam, "ratio"].to_numpy()
        bins = np.logspace(np.log10(vals.min()) - 0.1, np.log10(vals.max()) + 0.1, 40)
        ax.hist(vals, bins=bins)
        ax.set_xscale("log")
        for b in (1.0 / args.bracket, args.bracket):
            ax.axvline(b, color="red", linestyle="--", linewidth=1)
        ax.set_title(f"{fam}: min={vals.min():.3g}, median={np.median(vals):.3g}, max={vals.max():.3g}")
        ax.set_xlabel("norm ratio")
        ax.set_ylabel("trials")
        ax.grid(True)

    fig.tight_layout()
    args.figdir.mkdir(parents=True, exist_ok=True)
    out_path = args.figdir / args.out
    fig.savefig(out_path, dpi=150)
    print(f"Saved: {out_path}")


if __name__ == "__main__":
    main()
