"""Command-line entry point.

Settings are resolved as built-in defaults, then ``--config`` file values,
then explicit flags.  Exit status: 0 on success, 1 when any bound margin is
below ``-1e-8`` (or a self-test fails), 2 on configuration errors.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from .experiments import (
    ConfigError,
    SweepConfig,
    closure_table,
    run_bound_audit,
    run_convergence_sweep,
)

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="JSON config file (flat key-value object)")
    p.add_argument("--dim", type=int, help="single-particle dimension d")
    p.add_argument("--nmin", type=int, help="smallest particle number")
    p.add_argument("--nmax", type=int, help="largest particle number")
    p.add_argument("--tfinal", type=float, help="final time")
    p.add_argument("--dt", type=float, help="TDHF step")
    p.add_argument("--seed", type=int, help="master seed for L and V")
    p.add_argument("--vnorm", type=float, help="operator norm of V")
    p.add_argument("--out", help="output directory")
    p.add_argument("--dense-oracle", action="store_true", default=None, help="cross-check on the dense tensor space")
    p.add_argument("--workers", type=int, help="parallel sweep points")


def resolve_config(args: argparse.Namespace) -> SweepConfig:
    data = {}
    if args.config is not None:
        try:
            data = json.loads(args.config.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a JSON object")
    flags = {
        "d": args.dim,
        "t_final": args.tfinal,
        "dt": args.dt,
        "seed": args.seed,
        "vnorm": args.vnorm,
        "out": args.out,
        "dense_oracle": args.dense_oracle,
        "workers": args.workers,
    }
    data.update({k: v for k, v in flags.items() if v is not None})
    if args.nmin is not None or args.nmax is not None:
        current = data.get("N_list", SweepConfig().N_list)
        lo = args.nmin if args.nmin is not None else min(current)
        hi = args.nmax if args.nmax is not None else max(current)
        data["N_list"] = list(range(lo, hi + 1))
    try:
        return SweepConfig.from_dict(data)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def cmd_sweep(cfg: SweepConfig) -> int:
    result = run_convergence_sweep(cfg)
    if not cfg.out:
        sys.stdout.write(result.to_csv())
    failed = [r for r in result.rows if not isinstance(r["margin"], str) and r["margin"] < -1e-8]
    return EXIT_FAIL if failed else EXIT_OK


def cmd_audit(cfg: SweepConfig) -> int:
    reports = run_bound_audit(cfg)
    bad = [r for r in reports if not r.passed]
    inapplicable = sum(not r.applicable for r in reports)
    print(f"{len(reports)} reports, {len(bad)} failed, {inapplicable} inapplicable (T >= 1)")
    for r in bad:
        print(f"FAIL {r.quantity} N={r.N} n={r.n} t={r.t}: measured {r.measured:.6g} > bound {r.bound:.6g}")
    return EXIT_FAIL if bad else EXIT_OK


def cmd_closure(cfg: SweepConfig) -> int:
    rows = closure_table(cfg.d, [N for N in cfg.N_list if N >= 2], cfg.seed)
    cols = list(rows[0]) if rows else ["N"]
    if cfg.out:
        Path(cfg.out).mkdir(parents=True, exist_ok=True)
        fh = open(Path(cfg.out) / "closure.csv", "w", newline="")
    else:
        fh = sys.stdout
    w = csv.DictWriter(fh, fieldnames=cols, lineterminator="\n")
    w.writeheader()
    for row in rows:
        w.writerow({k: repr(float(v)) if isinstance(v, float) else v for k, v in row.items()})
    if fh is not sys.stdout:
        fh.close()
    return EXIT_OK


def cmd_selftest(cfg: SweepConfig) -> int:
    from .selftest import run_all

    results = run_all()
    for name, ok, detail in results:
        print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
    return EXIT_OK if all(ok for _, ok, _ in results) else EXIT_FAIL


COMMANDS = {
    "sweep": (cmd_sweep, "exact N-body flow against TDHF over a range of N"),
    "audit": (cmd_audit, "bound reports along the sweep trajectories"),
    "closure": (cmd_closure, "closure-defect table for Slater and mixed states"),
    "selftest": (cmd_selftest, "run the built-in property suites"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hflab", description="Exact N-fermion dynamics against time-dependent Hartree-Fock."
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        _add_common(sub.add_parser(name, help=help_text))
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
        return COMMANDS[args.command][0](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
