#!/usr/bin/env python3
from __future__ import annotations

import argparse
from pathlib import Path

import matplotlib.pyplot as plt
import pandas as pd


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("csv", type=Path, nargs="+", help="classify --emit-csv の出力（j, n_j）")
    parser.add_argument("--figdir", type=Path, default=Path("figures"), help="図の保存先")
    parser.add_argument("--out", type=str, default="norm_profile.png", help="出力画像名（figdir配下）")
    args = parser.parse_args()

    fig, ax = plt.subplots(figsize=(7, 4))
    for f in args.csv:
        df = pd.read_csv(f)
        if not {"j", "n_j"} <= set(df.columns):
            raise ValueError(f"{f} is missing columns j, n_j")
        df = df.sort_values("j")
        ax.plot(df["j"], df["n_j"], marker=".", label=f.stem)

    ax.set_yscale("log")
    ax.set_xlabel("j")
    ax.set_ylabel(r"$\|A^{-j}B^{\lfloor \varepsilon j \rfloor}\|$")
    ax.grid(True)
    ax.legend()
    fig.tight_layout()

    args.figdir.mkdir(parents=True, exist_ok=True)
    out_path = args.figdir / args.out
    fig.savefig(out_path, dpi=150)
    print(f"Saved: {out_path}")


if __name__ == "__main__":
    main()
