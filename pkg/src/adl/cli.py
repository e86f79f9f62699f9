# src/adl/cli.py
"""
adl のコマンドライン入口。

    adl classify  --matrix-a A.json --matrix-b B.json --jmax 40 --out out.json
    adl operators --config configs/operators_permute_2I_2R1.yml

各コマンドは RunConfig に解決してから run() に渡す。レポートは
{schema, schema_version, config, result, timing} の JSON で、timing 以外は
同じ設定・シードなら同じバイト列になる。

終了コード: 0 = 成功, 2 = 完了したが要注意フラグあり, 1 = エラー
"""
from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import jsonschema
import numpy as np

from adl.config_loader import RunConfig, load_run_config
from adl.dilation.expansive import (
    Dilation,
    ProbeVerdict,
    Verdict,
    classify_equivalence,
    cocycle_probe,
    inverse_power_decay,
    rigidity_oracle,
    validate_dilation,
)
from adl.dilation.quasinorm import StepQuasiNorm, envelope_check, quasi_triangle_estimate, rho_index, rho_many
from adl.dilation.tiling import Box
from adl.errors import ParseError
from adl.matching.hall import hall_injection
from adl.matching.lattice import LatticePair, parse_window, window_cells
from adl.operators.experiment import equivalence_experiment
from adl.sequence.coincidence import Coincidence, sequence_space_coincidence
from adl.sequence.quadrature import QuadratureSpec
from adl.sequence.sequences import TLParams, load_sequence
from adl.sequence.tl_norm import seqnorm
from adl.utils.datacollector import CsvCollector
from adl.utils.io_utils import SCHEMA_VERSION, dumps_report, load_matrix, to_jsonable, validate, write_report
from adl.utils.logging_utils import get_logger, run_log_name, setup_logging

logger = get_logger(__name__)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_FLAGGED = 2

# (result, flagged)
Outcome = Tuple[Dict[str, Any], bool]


# ==========================================================
# 入力の解決
# ==========================================================
def _require(cfg: RunConfig, *names: str) -> None:
    missing = [n for n in names if getattr(cfg, n) in (None, "")]
    if missing:
        flags = ", ".join("--" + n.replace("_", "-") for n in missing)
        msg = f"{cfg.command}: missing required option(s) {flags}"
        logger.error(msg)
        raise ParseError(msg)


def _dilation(path: str) -> Dilation:
    return validate_dilation(load_matrix(path))


def _params(cfg: RunConfig) -> TLParams:
    return TLParams.parse(cfg.alpha, cfg.p, cfg.q)


def _quad(cfg: RunConfig) -> QuadratureSpec:
    return QuadratureSpec(
        method=cfg.method,
        n=cfg.n,
        max_level=cfg.refine,
        rel_tol=cfg.rel_tol,
        mc_samples=cfg.mc_samples,
        seed=cfg.seed,
        pad=cfg.pad,
        workers=cfg.workers,
    )


def _point(text: str) -> np.ndarray:
    try:
        return np.array([float(v) for v in text.split(",")], dtype=float)
    except ValueError as e:
        msg = f"point {text!r}: expected comma-separated numbers"
        logger.error(msg)
        raise ParseError(msg) from e


def _emit_csv(path: Optional[str], fieldnames: List[str], rows: List[Dict[str, Any]]) -> None:
    if not path:
        return
    with CsvCollector(Path(path), fieldnames) as col:
        col.collect_many(rows)
    logger.info("CSV written to %s (%d rows)", path, len(rows))


# ==========================================================
# コマンド
# ==========================================================
def cmd_classify(cfg: RunConfig) -> Outcome:
    _require(cfg, "matrix_a", "matrix_b")
    a, b = _dilation(cfg.matrix_a), _dilation(cfg.matrix_b)
    rep = classify_equivalence(a, b, J=cfg.jmax, slope_tol=cfg.slope_tol, kappa=cfg.kappa, workers=cfg.workers)
    _emit_csv(cfg.emit_csv, ["j", "n_j"], [{"j": j, "n_j": n} for j, n in rep.norms])
    result = {
        "matrix_a": a.to_json(),
        "matrix_b": b.to_json(),
        "equivalence": to_jsonable(rep),
        "rigidity": rigidity_oracle(a, b).value,
        "decay_a": to_jsonable(inverse_power_decay(a, J=min(cfg.jmax, 32))),
        "decay_b": to_jsonable(inverse_power_decay(b, J=min(cfg.jmax, 32))),
    }
    return result, rep.verdict is Verdict.INCONCLUSIVE


def cmd_cocycle(cfg: RunConfig) -> Outcome:
    _require(cfg, "matrix_a", "matrix_b")
    a, b = _dilation(cfg.matrix_a), _dilation(cfg.matrix_b)
    probe = cocycle_probe(a, b, J=cfg.jmax, tau=cfg.tau)
    return {"probe": to_jsonable(probe)}, probe.verdict is ProbeVerdict.INCONCLUSIVE


def cmd_rho(cfg: RunConfig) -> Outcome:
    _require(cfg, "matrix", "point")
    qn = StepQuasiNorm.build(_dilation(cfg.matrix))
    x = _point(cfg.point)
    if x.size != qn.dilation.dim:
        msg = f"rho: point has {x.size} coordinates, matrix is {qn.dilation.dim}x{qn.dilation.dim}"
        logger.error(msg)
        raise ParseError(msg)
    j, saturated = rho_index(qn, x)
    value = float(rho_many(qn, x[None, :])[0])
    print(f"{value!r} {j if j is not None else '-'}")
    return {"point": x.tolist(), "rho": value, "index": j, "saturated": saturated}, saturated


def cmd_rho_report(cfg: RunConfig) -> Outcome:
    _require(cfg, "matrix")
    qn = StepQuasiNorm.build(_dilation(cfg.matrix))
    c_hat = quasi_triangle_estimate(qn, cfg.samples, cfg.seed, workers=cfg.workers)
    env = envelope_check(qn, cfg.samples, cfg.seed, workers=cfg.workers)
    result = {
        "matrix": qn.dilation.to_json(),
        "lyapunov": {
            "P": qn.form.P.tolist(),
            "residual": qn.form.residual,
            "doublings": qn.form.doublings,
        },
        "triangle": {"c_hat": c_hat, "samples": cfg.samples, "seed": cfg.seed},
        "envelope": to_jsonable(env),
    }
    return result, False


def cmd_seqnorm(cfg: RunConfig) -> Outcome:
    _require(cfg, "matrix", "seq")
    a = _dilation(cfg.matrix)
    c = load_sequence(cfg.seq)
    est = seqnorm(a, _params(cfg), c, _quad(cfg))
    if est.flagged:
        logger.warning("seqnorm: estimate flagged (unresolved=%s, pad_saturated=%s)", est.unresolved, est.pad_saturated)
    result = {"estimate": to_jsonable(est), "n_entries": len(c), "moduli_taken": c.moduli_taken}
    return result, est.flagged


def cmd_match(cfg: RunConfig) -> Outcome:
    _require(cfg, "matrix_s", "matrix_t", "window")
    pair = LatticePair.build(load_matrix(cfg.matrix_s), load_matrix(cfg.matrix_t))
    bounds = parse_window(cfg.window)
    if len(bounds) != pair.dim:
        msg = f"match: window has {len(bounds)} axes, lattices are {pair.dim}-dimensional"
        logger.error(msg)
        raise ParseError(msg)
    res = hall_injection(pair, window_cells(bounds), workers=cfg.workers)
    return {"matching": res.to_json(), "det_s": pair.det_s, "det_t": pair.det_t}, False


def cmd_operators(cfg: RunConfig) -> Outcome:
    _require(cfg, "matrix_a", "matrix_b", "window")
    a, b = _dilation(cfg.matrix_a), _dilation(cfg.matrix_b)
    rep = equivalence_experiment(
        a,
        b,
        _params(cfg),
        cfg.mode,
        cfg.trials,
        cfg.seed,
        _quad(cfg),
        scales=cfg.scale_range(),
        window=Box.parse(cfg.window),
        density=cfg.density,
        bracket=cfg.bracket,
        workers=cfg.workers,
    )
    rows = rep.rows()
    fieldnames: List[str] = []
    for row in rows:
        fieldnames.extend(k for k in row if k not in fieldnames)
    _emit_csv(cfg.emit_csv, fieldnames, rows)
    return {"experiment": rep.to_json()}, (rep.unresolved > 0 or not rep.passed)


def cmd_coincide(cfg: RunConfig) -> Outcome:
    _require(cfg, "matrix_a", "matrix_b")
    a, b = _dilation(cfg.matrix_a), _dilation(cfg.matrix_b)
    rep = sequence_space_coincidence(a, b, _params(cfg), J=cfg.jmax, tau=cfg.tau)
    return {"coincidence": to_jsonable(rep)}, rep.verdict is Coincidence.INCONCLUSIVE


COMMANDS: Dict[str, Tuple[Callable[[RunConfig], Outcome], str]] = {
    "classify": (cmd_classify, "classify_report"),
    "cocycle": (cmd_cocycle, "cocycle_report"),
    "rho": (cmd_rho, "rho_report"),
    "rho-report": (cmd_rho_report, "quasinorm_report"),
    "seqnorm": (cmd_seqnorm, "seqnorm_report"),
    "match": (cmd_match, "match_report"),
    "operators": (cmd_operators, "operators_report"),
    "coincide": (cmd_coincide, "coincide_report"),
}


# ==========================================================
# 実行
# ==========================================================
def build_report(cfg: RunConfig, result: Dict[str, Any], flagged: bool, elapsed: float) -> Dict[str, Any]:
    _, schema = COMMANDS[cfg.command]
    return {
        "schema": schema,
        "schema_version": SCHEMA_VERSION,
        "config": cfg.to_json(),
        "flagged": flagged,
        "result": result,
        "timing": {"wall_seconds": round(elapsed, 6)},
    }


def run(cfg: RunConfig) -> int:
    """cfg.command を実行してレポートを書き、終了コードを返す。"""
    handler, schema = COMMANDS[cfg.command]
    t0 = time.perf_counter()
    try:
        result, flagged = handler(cfg)
    except (ValueError, RuntimeError) as e:
        # 送出元で ERROR ログ済み
        logger.debug("%s failed: %s", cfg.command, e)
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ERROR
    elapsed = time.perf_counter() - t0

    report = build_report(cfg, result, flagged, elapsed)
    try:
        validate(report, schema)
    except jsonschema.ValidationError as e:
        logger.error("%s: report does not match schema %s (%s)", cfg.command, schema, e.message)
        return EXIT_ERROR

    if cfg.out:
        write_report(cfg.out, report)
    elif cfg.command != "rho":
        sys.stdout.write(dumps_report(report))
    logger.info("%s finished in %.3fs%s", cfg.command, elapsed, " (flagged)" if flagged else "")
    return EXIT_FLAGGED if flagged else EXIT_OK


# ==========================================================
# 引数
# ==========================================================
def _exponent(text: str) -> Any:
    return text if text.strip().lower() in ("inf", "infinity", "∞") else float(text)


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=str, default=None, help="YAML/JSON file mirroring the flags (flags override).")
    p.add_argument("--seed", type=int, default=None, help="Random seed (default 0).")
    p.add_argument("--out", type=str, default=None, help="Report JSON path (stdout when omitted).")
    p.add_argument("--workers", type=int, default=None, help="Worker threads (default: ADL_THREADS or CPU count).")
    p.add_argument(
        "--log-file",
        action="store_true",
        default=None,
        help="Also write logs to <out dir>/logs/<command>_seed<seed>.log.",
    )
    p.add_argument("-v", "--verbose", action="store_true", help="DEBUG level logging.")


def _add_pair(p: argparse.ArgumentParser) -> None:
    p.add_argument("--matrix-a", dest="matrix_a", type=str, default=None, help="Matrix JSON for A.")
    p.add_argument("--matrix-b", dest="matrix_b", type=str, default=None, help="Matrix JSON for B.")


def _add_space(p: argparse.ArgumentParser) -> None:
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--p", type=_exponent, default=None, help="p in (0, inf] ('inf' accepted).")
    p.add_argument("--q", type=_exponent, default=None, help="q in (0, inf] ('inf' accepted).")


def _add_quad(p: argparse.ArgumentParser) -> None:
    p.add_argument("--method", choices=("auto", "grid", "mc", "dyadic"), default=None)
    p.add_argument("--refine", type=int, default=None, help="Maximum number of refinement doublings.")
    p.add_argument("--n", type=int, default=None, help="Initial grid points per tile side.")
    p.add_argument("--rel-tol", dest="rel_tol", type=float, default=None)
    p.add_argument("--mc-samples", dest="mc_samples", type=int, default=None)
    p.add_argument("--pad", type=int, default=None)


def parse_args(argv: Optional[Sequence[str]] = None) -> argparse.Namespace:
    parser = argparse.ArgumentParser(prog="adl", description="Anisotropic dilations: equivalence, quasi-norms, sequence spaces.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("classify", help="Decide equivalence of two expansive matrices.")
    _add_pair(p)
    p.add_argument("--jmax", type=int, default=None)
    p.add_argument("--slope-tol", dest="slope_tol", type=float, default=None)
    p.add_argument("--kappa", type=float, default=None)
    p.add_argument("--emit-csv", dest="emit_csv", type=str, default=None, help="Per-j profile CSV.")
    _add_common(p)

    p = sub.add_parser("cocycle", help="Probe finiteness of {A^j B^-j}.")
    _add_pair(p)
    p.add_argument("--jmax", type=int, default=None)
    p.add_argument("--tau", type=float, default=None)
    _add_common(p)

    p = sub.add_parser("rho", help="Evaluate the step quasi-norm at a point.")
    p.add_argument("--matrix", type=str, default=None)
    p.add_argument("--point", type=str, default=None, help='"x1,x2,..."')
    _add_common(p)

    p = sub.add_parser("rho-report", help="Quasi-triangle and power-envelope constants.")
    p.add_argument("--matrix", type=str, default=None)
    p.add_argument("--samples", type=int, default=None)
    _add_common(p)

    p = sub.add_parser("seqnorm", help="Triebel-Lizorkin sequence norm of a finite sequence.")
    p.add_argument("--matrix", type=str, default=None)
    p.add_argument("--seq", type=str, default=None)
    _add_space(p)
    _add_quad(p)
    _add_common(p)

    p = sub.add_parser("match", help="Bounded-displacement lattice injection.")
    p.add_argument("--matrix-s", dest="matrix_s", type=str, default=None)
    p.add_argument("--matrix-t", dest="matrix_t", type=str, default=None)
    p.add_argument("--window", type=str, default=None, help='Integer coordinate window "x0,x1;y0,y1".')
    _add_common(p)

    p = sub.add_parser("operators", help="Norm-equivalence experiment for P or S/T.")
    _add_pair(p)
    p.add_argument("--mode", choices=("permute", "retract"), default=None)
    _add_space(p)
    _add_quad(p)
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--scales", type=str, default=None, help='"j_lo,j_hi"')
    p.add_argument("--window", type=str, default=None, help='Spatial box "x0,x1;y0,y1".')
    p.add_argument("--density", type=float, default=None)
    p.add_argument("--bracket", type=float, default=None)
    p.add_argument("--emit-csv", dest="emit_csv", type=str, default=None, help="Per-trial ratio CSV.")
    _add_common(p)

    p = sub.add_parser("coincide", help="Decide whether two sequence spaces coincide.")
    _add_pair(p)
    _add_space(p)
    p.add_argument("--jmax", type=int, default=None)
    p.add_argument("--tau", type=float, default=None)
    _add_common(p)

    return parser.parse_args(argv)


def _setup_logging(cfg: RunConfig, verbose: bool) -> None:
    out_dir = Path(cfg.out).parent if cfg.out else Path("results")
    setup_logging(
        out_dir,
        run_log_name(cfg.command, cfg.seed),
        enable_file=bool(cfg.log_file),
        log_level=logging.DEBUG if verbose else logging.INFO,
    )


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = parse_args(argv)
    overrides = {k: v for k, v in vars(args).items() if k not in ("config", "verbose", "command")}
    try:
        cfg = load_run_config(args.config, overrides, command=args.command)
    except ParseError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ERROR
    _setup_logging(cfg, args.verbose)
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
