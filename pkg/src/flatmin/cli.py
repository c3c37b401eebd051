"""Command-line driver for relaxation bounds and steering sweeps.

Subcommands:
  solve  -- run the steering loop over one or more lambda values
  relax  -- solve the plain relaxation once and attempt a certificate
  repro  -- rerun a published experiment table and print both result sets
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import List, Optional

from .flatsteer import AlgorithmResult, SteerConfig, run_algorithm, run_relaxation
from .polyparse import parse_polynomial

VERSION = "0.1.0"

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_NUMERICAL = 3
EXIT_BUDGET = 4

PRESETS = {
    "motzkin": "x1^4*x2^2 + x1^2*x2^4 - 3*x1^2*x2^2 + 1",
    "laserre-ex3": "x1^4*x2^2 + x1^2*x2^4 - x1^2*x2^2",
    "robinson": (
        "x1^6 + x2^6 + 1 - x1^4*x2^2 - x2^4 - x1^4 - x1^2*x2^4"
        " - x2^2 - x1^2 + 3*x1^2*x2^2"
    ),
}

# Published sweep results, kept verbatim for side-by-side reruns.  "dist" is
# the reported terminal distance to the structured projection; "minimizers"
# the points read off the terminal matrix, when any.
PUBLISHED_TABLES = {
    1: {
        "preset": "motzkin",
        "mode": "moment",
        "degree": 6,
        "rows": [
            {"lambda": "1/1000", "U": -209.9332, "flat": "no", "dist": 1.8995e7, "minimizers": None, "iterations": 73},
            {"lambda": "1/100", "U": -48.50, "flat": "no", "dist": 1.584e5, "minimizers": None, "iterations": 73},
            {"lambda": "1/60", "U": 0.00156, "flat": "yes", "dist": 9.16135, "minimizers": "(+-1.0109, +-1.0109)", "iterations": 66},
            {"lambda": "1/4", "U": 0.0650, "flat": "no", "dist": 2.0449e-4, "minimizers": None, "iterations": 66},
            {"lambda": "1/2", "U": 0.2537, "flat": "no", "dist": 9.0867e-4, "minimizers": None, "iterations": 66},
            {"lambda": "3/4", "U": 0.3543, "flat": "approx", "dist": 0.0015, "minimizers": "(+-0.9960, +-0.9960)", "iterations": 74},
            {"lambda": "1", "U": 0.2870, "flat": "no", "dist": 0.0013, "minimizers": None, "iterations": 115},
        ],
    },
    2: {
        "preset": "laserre-ex3",
        "mode": "moment",
        "degree": 6,
        "rows": [
            {"lambda": "1/1000", "U": -4.4169, "flat": "no", "dist": 7.8542e4, "minimizers": None, "iterations": 76},
            {"lambda": "1/100", "U": -0.0305, "flat": "approx", "dist": 7.928e-4, "minimizers": "(+-0.6354, +-0.6354)", "iterations": 85},
            {"lambda": "1/60", "U": -0.0255, "flat": "yes", "dist": 9.9708e-5, "minimizers": "(+-0.6566, +-0.6566)", "iterations": 76},
            {"lambda": "1/4", "U": 0.0802, "flat": "no", "dist": 0.0627, "minimizers": None, "iterations": 50},
            {"lambda": "1/2", "U": 0.1634, "flat": "yes", "dist": 9.5965e-5, "minimizers": "(+-0.8233, +-0.8233)", "iterations": 123},
            {"lambda": "3/4", "U": 0.2399, "flat": "no", "dist": 0.0430, "minimizers": None, "iterations": 50},
            {"lambda": "1", "U": 0.1331, "flat": "no", "dist": 0.0103, "minimizers": None, "iterations": 84},
        ],
    },
    3: {
        "preset": "robinson",
        "mode": "nds",
        "degree": 6,
        "rows": [
            {"lambda": "1/100", "U": -0.9278, "flat": "no", "dist": 7.329e3, "minimizers": None, "iterations": 10},
            {"lambda": "1/60", "U": -0.9288, "flat": "no", "dist": 7.1978e3, "minimizers": None, "iterations": 10},
            {"lambda": "1/30", "U": -0.5709, "flat": "no", "dist": 6.8149e3, "minimizers": None, "iterations": 10},
            {"lambda": "1/10", "U": -0.0159, "flat": "no", "dist": 6.1421e3, "minimizers": None, "iterations": 10},
            {"lambda": "1/5", "U": 0.0549, "flat": "no", "dist": 5.9942e3, "minimizers": None, "iterations": 10},
            {"lambda": "1/4", "U": 0.0670, "flat": "no", "dist": 6.0629e3, "minimizers": None, "iterations": 500},
            {"lambda": "3/4", "U": 0.1018, "flat": "no", "dist": 5.8919e3, "minimizers": None, "iterations": 10},
            {"lambda": "1", "U": 1.060, "flat": "no", "dist": 5.7389e3, "minimizers": None, "iterations": 10},
        ],
    },
    4: {
        "preset": "motzkin",
        "mode": "nds",
        "degree": 6,
        "rows": [
            {"lambda": "1/1000", "U": -30.6672, "flat": "no", "dist": 1.1486e6, "minimizers": None, "iterations": 50},
            {"lambda": "1/100", "U": 0.1688, "flat": "no", "dist": 1.1486e6, "minimizers": None, "iterations": 10},
            {"lambda": "1/60", "U": 0.2458, "flat": "no", "dist": 1.4886e6, "minimizers": None, "iterations": 10},
            {"lambda": "1/4", "U": -0.8789, "flat": "no", "dist": 1.4887e6, "minimizers": None, "iterations": 50},
            {"lambda": "1/2", "U": 0.4232, "flat": "no", "dist": 1.1485e6, "minimizers": None, "iterations": 10},
            {"lambda": "3/4", "U": 1.0, "flat": "yes", "dist": 1.1629e6, "minimizers": "(0, +-44.9350), (+-44.9350, 0)", "iterations": 50},
            {"lambda": "1", "U": 1.0, "flat": "yes", "dist": 1.1629e6, "minimizers": "(0, +-44.9352), (+-44.9352, 0)", "iterations": 20},
        ],
    },
}

_FLAT_LABEL = {"exact": "yes", "approximate": "approx", "no": "no"}


@dataclass
class RunConfig:
    """Everything one invocation needs; echoed verbatim into reports."""

    polynomial: str
    mode: str = "moment"
    lambdas: List[float] = field(default_factory=lambda: [0.5])
    degree: Optional[int] = None
    seed: int = 0
    tol_flat: float = 1e-2
    tol_rank: float = 1e-4
    rho: float = 2.0
    max_iters: int = 100
    budget_s: float = 300.0
    format: str = "table"
    out: Optional[str] = None

    def steer_config(self, seed: int) -> SteerConfig:
        return SteerConfig(
            tol_flat=self.tol_flat,
            tol_rank=self.tol_rank,
            rho=self.rho,
            max_outer_iters=self.max_iters,
            wall_clock_s=self.budget_s,
            seed=seed,
        )


def parse_lambda_list(tokens: List[str]) -> List[float]:
    """Accept repeated flags and comma lists; values may be fractions."""
    values = []
    for token in tokens:
        for piece in token.split(","):
            piece = piece.strip()
            if not piece:
                continue
            try:
                val = float(Fraction(piece)) if "/" in piece else float(piece)
            except (ValueError, ZeroDivisionError) as exc:
                raise ValueError(f"bad lambda value {piece!r}") from exc
            if not 0.0 <= val <= 1.0:
                raise ValueError(f"lambda {piece!r} outside [0, 1]")
            values.append(val)
    if not values:
        raise ValueError("empty lambda list")
    return values


def run_record(lam: float, res: AlgorithmResult) -> dict:
    """Flatten one algorithm result into the serializable report row."""
    lower = res.lower
    if lower.status == "optimal":
        lower_field = {"finite": True, "value": lower.value}
    elif lower.status == "unbounded_below":
        lower_field = {"finite": False, "trend": lower.trend}
    else:
        lower_field = None
    atoms = weights = f_values = grad_norms = None
    if res.measure is not None:
        atoms = [[float(c) for c in a] for a in res.measure.atoms]
        weights = [float(w) for w in res.measure.weights]
        if res.validation is not None:
            f_values = [float(v) for v in res.validation.f_values]
            grad_norms = [float(g) for g in res.validation.grad_norms]
    interval = None
    if res.verdict == "certified_interval" and res.upper is not None:
        # The two ends come from different float paths (solver objective vs
        # reconstructed <f, y>) and can cross by a few ulps; widening the top
        # end keeps the interval well-ordered without strengthening any claim.
        if lower.finite():
            interval = [lower.value, max(res.upper, lower.value)]
        else:
            interval = [None, res.upper]
    return {
        "lambda": lam,
        "status": res.status,
        "lower_bound": lower_field,
        "upper_bound": res.upper,
        "flat": _FLAT_LABEL[res.flat],
        "flat_residual": (
            None if res.final_state is None else float(res.final_state.flat_residual)
        ),
        "atoms": atoms,
        "weights": weights,
        "f_values": f_values,
        "grad_norms": grad_norms,
        "certified_interval": interval,
        "outer_iterations": res.iterations,
        "wall_time_s": res.wall_time_s,
        "seed": res.seed,
    }


def _fmt_num(x, digits=6) -> str:
    if x is None:
        return "-"
    return f"{x:.{digits}g}"


def _fmt_lower(rec: dict) -> str:
    lb = rec["lower_bound"]
    if lb is None:
        return "-"
    if lb["finite"]:
        return _fmt_num(lb["value"])
    return f"-inf (trend {_fmt_num(lb['trend'], 3)})"


def _fmt_atoms(rec: dict) -> str:
    if not rec["atoms"]:
        return "-"
    return " ".join(
        "(" + ", ".join(f"{c:+.4f}" for c in atom) + ")" for atom in rec["atoms"]
    )


def format_table(records: List[dict]) -> str:
    headers = [
        "lambda", "status", "lower_bound", "upper_bound", "flat",
        "flat_residual", "atoms", "iters", "time_s", "seed",
    ]
    rows = [
        [
            _fmt_num(rec["lambda"], 4),
            rec["status"],
            _fmt_lower(rec),
            _fmt_num(rec["upper_bound"]),
            rec["flat"],
            _fmt_num(rec["flat_residual"], 3),
            _fmt_atoms(rec),
            str(rec["outer_iterations"]),
            _fmt_num(rec["wall_time_s"], 3),
            str(rec["seed"]),
        ]
        for rec in records
    ]
    widths = [max(len(h), *(len(r[i]) for r in rows)) if rows else len(h)
              for i, h in enumerate(headers)]
    lines = [
        "  ".join(h.ljust(widths[i]) for i, h in enumerate(headers)),
        "  ".join("-" * w for w in widths),
    ]
    lines += ["  ".join(r[i].ljust(widths[i]) for i in range(len(headers)))
              for r in rows]
    return "\n".join(lines)


def write_report(report: dict, config: RunConfig) -> None:
    """Emit the report to stdout or atomically to the requested path."""
    if config.format == "json":
        text = json.dumps(report, indent=2)
    else:
        text = format_table(report["runs"])
        if "published" in report:
            text = format_side_by_side(report)
    if config.out:
        directory = os.path.dirname(os.path.abspath(config.out))
        fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
        try:
            with os.fdopen(fd, "w") as handle:
                handle.write(text + "\n")
            os.replace(tmp, config.out)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
    else:
        print(text)


def _exit_code(records: List[dict]) -> int:
    statuses = [rec["status"] for rec in records]
    if any(s == "ok" for s in statuses):
        return EXIT_OK
    if any(s == "numerical_failure" for s in statuses):
        return EXIT_NUMERICAL
    return EXIT_BUDGET


def _resolve_polynomial(args) -> str:
    sources = [s for s in (args.poly, args.poly_file, args.preset) if s]
    if len(sources) != 1:
        raise ValueError(
            "exactly one of --poly, --poly-file, --preset is required"
        )
    if args.preset:
        return PRESETS[args.preset]
    if args.poly_file:
        with open(args.poly_file) as handle:
            return handle.read().strip()
    return args.poly


def _config_from_args(args) -> RunConfig:
    lambdas = parse_lambda_list(args.lam) if getattr(args, "lam", None) else [0.5]
    fmt = args.format or ("json" if args.out else "table")
    return RunConfig(
        polynomial=_resolve_polynomial(args),
        mode=args.mode,
        lambdas=lambdas,
        degree=args.degree,
        seed=args.seed,
        tol_flat=args.tol_flat,
        tol_rank=args.tol_rank,
        rho=args.rho,
        max_iters=args.max_iters,
        budget_s=args.budget_s,
        format=fmt,
        out=args.out,
    )


def cmd_solve(config: RunConfig) -> int:
    f = parse_polynomial(config.polynomial)
    records = []
    for index, lam in enumerate(config.lambdas):
        steer = config.steer_config(config.seed + index)
        if lam == 0.0:
            # Pure objective weight: the steered program degenerates to the
            # plain relaxation, so solve that directly.
            res = run_relaxation(f, config.mode, config.degree, steer)
        else:
            res = run_algorithm(f, lam, config.mode, config.degree, steer)
        records.append(run_record(lam, res))
    report = {"version": VERSION, "config": asdict(config), "runs": records}
    write_report(report, config)
    return _exit_code(records)


def cmd_relax(config: RunConfig) -> int:
    f = parse_polynomial(config.polynomial)
    res = run_relaxation(f, config.mode, config.degree, config.steer_config(config.seed))
    records = [run_record(0.0, res)]
    report = {"version": VERSION, "config": asdict(config), "runs": records}
    write_report(report, config)
    return EXIT_OK if res.status == "ok" else EXIT_NUMERICAL


def format_side_by_side(report: dict) -> str:
    headers = [
        "lambda", "pub_U", "got_U", "pub_flat", "got_flat",
        "pub_dist", "got_resid", "pub_minimizers", "got_atoms",
    ]
    rows = []
    for pub, rec in zip(report["published"], report["runs"]):
        rows.append([
            pub["lambda"],
            _fmt_num(pub["U"]),
            _fmt_num(rec["upper_bound"]),
            pub["flat"],
            rec["flat"],
            _fmt_num(pub["dist"], 3),
            _fmt_num(rec["flat_residual"], 3),
            pub["minimizers"] or "-",
            _fmt_atoms(rec),
        ])
    widths = [max(len(h), *(len(r[i]) for r in rows)) if rows else len(h)
              for i, h in enumerate(headers)]
    lines = [
        "  ".join(h.ljust(widths[i]) for i, h in enumerate(headers)),
        "  ".join("-" * w for w in widths),
    ]
    lines += ["  ".join(r[i].ljust(widths[i]) for i in range(len(headers)))
              for r in rows]
    return "\n".join(lines)


def cmd_repro(table_id: int, config: RunConfig) -> int:
    """Rerun a published sweep and report both result sets, no assertions."""
    spec = PUBLISHED_TABLES[table_id]
    config.polynomial = PRESETS[spec["preset"]]
    config.mode = spec["mode"]
    if config.degree is None:
        config.degree = spec["degree"]
    config.lambdas = parse_lambda_list([row["lambda"] for row in spec["rows"]])
    f = parse_polynomial(config.polynomial)
    records = []
    for index, lam in enumerate(config.lambdas):
        steer = config.steer_config(config.seed + index)
        res = run_algorithm(f, lam, config.mode, config.degree, steer)
        records.append(run_record(lam, res))
    report = {
        "version": VERSION,
        "table": table_id,
        "config": asdict(config),
        "published": spec["rows"],
        "runs": records,
    }
    write_report(report, config)
    return _exit_code(records)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="flatmin",
        description="Certified lower bounds and steered upper bounds for "
        "global polynomial minimization",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, want_lambda: bool) -> None:
        p.add_argument("--poly", help="polynomial expression in x1..xn")
        p.add_argument("--poly-file", help="file containing the polynomial")
        p.add_argument("--preset", choices=sorted(PRESETS))
        p.add_argument("--mode", choices=["moment", "nds"], default="moment")
        p.add_argument("--degree", type=int, default=None,
                       help="relaxation order k (default: deg f)")
        if want_lambda:
            p.add_argument("--lambda", dest="lam", action="append",
                           metavar="VALUE[,VALUE...]",
                           help="steering weight(s) in [0,1]; fractions like 1/60 allowed")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--tol-flat", type=float, default=1e-2)
        p.add_argument("--tol-rank", type=float, default=1e-4)
        p.add_argument("--rho", type=float, default=2.0,
                       help="radius of the random feasible start")
        p.add_argument("--max-iters", type=int, default=100)
        p.add_argument("--budget-s", type=float, default=300.0)
        p.add_argument("--out", help="write the report to this path (atomic)")
        p.add_argument("--format", choices=["json", "table"], default=None)

    add_common(sub.add_parser("solve", help="run the steering loop"), True)
    add_common(sub.add_parser("relax", help="plain relaxation bound"), False)
    repro = sub.add_parser("repro", help="rerun a published table")
    repro.add_argument("--table", type=int, choices=[1, 2, 3, 4], required=True)
    add_common(repro, False)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "repro":
            table = args.table
            args.preset = PUBLISHED_TABLES[table]["preset"]
            args.poly = args.poly_file = None
            config = _config_from_args(args)
            return cmd_repro(table, config)
        config = _config_from_args(args)
        if args.command == "solve":
            return cmd_solve(config)
        return cmd_relax(config)
    except ValueError as exc:  # parse errors and invalid configurations
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE


if __name__ == "__main__":
    return_code = main()
    raise SystemExit(return_code)
