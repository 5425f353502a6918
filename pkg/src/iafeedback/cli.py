"""Command-line entry point: ``iafeedback {overhead,throughput,dof,bounds,alloc}``."""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path
from typing import List, Optional

import numpy as np

from .bitalloc import waterfill
from .channel import load_scenario
from .errors import IAFeedbackError
from .harness import (
    ExperimentSpec,
    overhead_csv,
    run_bound_verification,
    run_dof_experiment,
    run_overhead_report,
    run_throughput_experiment,
)


def _floats(text: str) -> List[float]:
    """Comma list (``10,20,30``) or range ``start:stop:step`` with inclusive stop."""
    text = text.strip()
    if ":" in text:
        parts = [float(x) for x in text.split(":")]
        if len(parts) != 3 or parts[2] <= 0:
            raise argparse.ArgumentTypeError(f"bad range {text!r}, expected start:stop:step")
        start, stop, step = parts
        return [float(x) for x in np.arange(start, stop + step / 2, step)]
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _names(text: str) -> List[str]:
    return [x.strip() for x in text.split(",") if x.strip()]


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", type=Path, help="scenario file (YAML or JSON)")
    p.add_argument("--seed", type=int, help="base seed")
    p.add_argument("--trials", type=int, help="Monte Carlo trials per point")
    p.add_argument("--out", type=Path, help="write results to this .csv or .json path")
    p.add_argument("--snr-grid", type=_floats, help="SNR points in dB: 10,20,30 or 10:40:3")
    p.add_argument("--topology", type=_names, help="comma list of star, centralized, exchange")
    p.add_argument("--scheme", type=_names, help="comma list of equal, dynamic_waterfill, dof_centralized, "
                                                 "dof_distributed, perfect_csi")
    p.add_argument("--bt", type=int, help="total feedback bits B_T")
    p.add_argument("--c-const", type=float, help="residual-interference constant C for DoF budgets")
    p.add_argument("--workers", type=int, default=1, help="worker processes")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="iafeedback", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("overhead", parents=[common], help="feedback overhead per topology")
    p.add_argument("--k-min", type=int, default=4)
    p.add_argument("--k-max", type=int, default=10)
    p.add_argument("-d", "--streams", type=int, default=1, help="streams per user")

    sub.add_parser("throughput", parents=[common], help="mean sum throughput per topology and scheme")

    p = sub.add_parser("dof", parents=[common], help="throughput scaling with DoF-preserving bit budgets")
    p.add_argument("--fit-window", type=float, help="fit slope over the top N dB (default: upper half)")

    p = sub.add_parser("bounds", parents=[common], help="check residual-interference and eigenvector bounds")
    p.add_argument("--bits", type=lambda s: [int(x) for x in _floats(s)], help="per-user bit levels")
    p.add_argument("--matrix-bits", type=lambda s: [int(x) for x in _floats(s)], help="B_M levels")
    p.add_argument("--lemma-snr-grid", type=_floats, help="SNR points for the scaled-B_M trend")
    p.add_argument("--no-lemma", action="store_true", help="skip the matrix-quantization checks")

    p = sub.add_parser("alloc", parents=[common], help="one-shot water-filling on given weights")
    p.add_argument("--weights", type=_floats, required=True, help="comma list of a_k")
    p.add_argument("-M", "--antennas", type=int, default=3)
    return parser


def _spec(args, **defaults) -> ExperimentSpec:
    fields = dict(defaults)
    if args.config is not None:
        sc = load_scenario(args.config)
        fields.update(K=sc.K, M=sc.M, alpha=sc.alpha, distance_mode=sc.distance_mode,
                      ratio_low=sc.ratio_low, ratio_high=sc.ratio_high, seed=sc.seed)
        fields.setdefault("snr_db", (sc.P_dB,))
        if sc.d != 1:
            raise IAFeedbackError("limited-feedback experiments use one stream per user (d = 1)")
    overrides = {
        "seed": args.seed,
        "trials": args.trials,
        "snr_db": tuple(args.snr_grid) if args.snr_grid else None,
        "topologies": tuple(args.topology) if args.topology else None,
        "schemes": tuple(args.scheme) if args.scheme else None,
        "total_bits": args.bt,
        "c_const": args.c_const,
        "workers": args.workers,
    }
    fields.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentSpec(**fields)


def _emit(args, csv_text: str, json_text: str) -> None:
    if args.out is None:
        sys.stdout.write(csv_text)
        return
    args.out.parent.mkdir(parents=True, exist_ok=True)
    args.out.write_text(json_text + "\n" if args.out.suffix.lower() == ".json" else csv_text)
    print(f"wrote {args.out}", file=sys.stderr)


def _cmd_overhead(args) -> int:
    rows = run_overhead_report(range(args.k_min, args.k_max + 1), args.streams)
    _emit(args, overhead_csv(rows), json.dumps(rows, indent=2))
    return 0 if all(r["ledger_matches"] for r in rows) else 1


def _cmd_throughput(args) -> int:
    table = run_throughput_experiment(_spec(args))
    _emit(args, table.to_csv(), table.to_json())
    return 0


def _cmd_dof(args) -> int:
    spec = _spec(args, snr_db=tuple(_floats("10:40:3")), distance_mode="fixed_ratio", ratio_low=2.0,
                 ratio_high=2.0, topologies=("exchange",), schemes=("dof_centralized", "dof_distributed"),
                 trials=500)
    result = run_dof_experiment(spec, fit_window_db=args.fit_window)
    doc = result.table.to_dict()
    doc["slopes"] = [{"topology": t, "scheme": s, "slope": v} for (t, s), v in result.slopes.items()]
    _emit(args, result.table.to_csv(), json.dumps(doc, indent=2))
    for (t, s), v in result.slopes.items():
        print(f"slope {t}/{s}: {v:.3f} bits/s/Hz per doubling of P", file=sys.stderr)
    return 0


def _cmd_bounds(args) -> int:
    spec = _spec(args, trials=2000)
    extra = {}
    if args.bits:
        extra["bound_bits"] = tuple(args.bits)
    if args.matrix_bits:
        extra["matrix_bits"] = tuple(args.matrix_bits)
    if args.lemma_snr_grid:
        extra["lemma_snr_db"] = tuple(args.lemma_snr_grid)
    spec = replace(spec, **extra)
    report = run_bound_verification(spec, lemma=not args.no_lemma)
    _emit(args, report.to_csv(), report.to_json())
    for c in report.failures():
        print(f"FAIL {c.name} {c.topology} bits={c.bits} rx={c.receiver}: {c.empirical:.4g} vs {c.bound:.4g}",
              file=sys.stderr)
    return 0 if report.passed else 1


def _cmd_alloc(args) -> int:
    bt = 16 if args.bt is None else args.bt
    sol = waterfill(args.weights, bt, args.antennas)
    text = sol.to_json()
    if args.out is not None and args.out.suffix.lower() == ".csv":
        lines = ["user,weight,continuous_bits,integer_bits"]
        lines += [f"{k + 1},{w!r},{c!r},{b}" for k, (w, c, b) in
                  enumerate(zip(sol.weights.tolist(), sol.continuous.tolist(), sol.integer.bits))]
        _emit(args, "\n".join(lines) + "\n", text)
    else:
        _emit(args, text + "\n", text)
    return 0


COMMANDS = {
    "overhead": _cmd_overhead,
    "throughput": _cmd_throughput,
    "dof": _cmd_dof,
    "bounds": _cmd_bounds,
    "alloc": _cmd_alloc,
}


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (IAFeedbackError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
