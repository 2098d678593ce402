"""Command-line front end.

Subcommands ``run``, ``sweep``, ``audit``, ``oracle-check`` and ``refine``
write ``report.json`` plus CSV tables into ``--out`` and, unless
``--no-figures`` is given, a PNG view of each table next to it.

Exit codes: 0 when every check of the subcommand passes, 1 when a check
fails (including a flow that aborts or times out, and unexpected internal
errors), 2 for usage and configuration errors.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import sys
from dataclasses import asdict, replace
from pathlib import Path

from . import __version__
from .errors import ParseError, RejectionExhausted, ValidationError
from .experiments import (
    AUDIT_COLUMNS,
    REFINE_COLUMNS,
    Scenario,
    audit,
    load_scenario,
    oracle_check,
    refine_study,
)
from .flow_engine import FlowConfig, eps_sweep, run
from .records import write_checkpoint, write_csv, write_json, write_timeseries

EXIT_PASS, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

#: Criteria a finished flow run must meet for exit code 0.
RUN_TOL_DRIFT = 1e-6
RUN_TOL_MONOTONE = 1e-9
RUN_TOL_THIRD = 1e-6

SWEEP_COLUMNS = (
    "eps", "verdict", "t_final", "residual", "Eeps", "E", "C0", "lemma6_bound", "bound_ok",
    "max_I1_drift", "max_Eeps_decrease",
)


class UsageError(Exception):
    pass


def _eps_list(text: str):
    try:
        vals = tuple(float(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}") from None
    if not all(0.0 < e < 1.0 for e in vals):
        raise argparse.ArgumentTypeError("eps values must lie in (0, 1)")
    return vals


def _u64(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", type=Path, default=Path("out"), help="output directory (created)")
    common.add_argument("--quiet", action="store_true", help="suppress progress output")
    common.add_argument("--no-figures", action="store_true", help="write tables only")

    p = argparse.ArgumentParser(prog="sigma2flow", description=__doc__.split("\n\n")[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    flow_opts = argparse.ArgumentParser(add_help=False)
    flow_opts.add_argument("--scenario", type=Path, help="scenario file (key=value lines)")
    flow_opts.add_argument("--eps", type=_eps_list, help="comma-separated eps values")
    flow_opts.add_argument("--n", type=_positive_int, help="grid cells (overrides the scenario)")
    flow_opts.add_argument("--allow-inadmissible", action="store_true",
                           help="integrate even when the start lies outside the admissible set")
    flow_opts.add_argument("--record-every", type=_positive_int, default=10)

    s = sub.add_parser("run", parents=[common, flow_opts], help="integrate the flow once")
    s.set_defaults(func=cmd_run)
    s = sub.add_parser("sweep", parents=[common, flow_opts], help="integrate once per eps")
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("audit", parents=[common], help="inequality audit on random metrics")
    s.add_argument("--n", type=_positive_int, default=100, help="number of random samples")
    s.add_argument("--seed", type=_u64, default=0)
    s.add_argument("--amplitude", type=float, default=0.3)
    s.add_argument("--degree", type=int, default=4)
    s.add_argument("--grid-n", type=_positive_int, default=256)
    s.add_argument("--eps", type=_eps_list, default=(1e-4,),
                   help="eps for the coefficient-ratio check (first value used)")
    s.set_defaults(func=cmd_audit)

    s = sub.add_parser("oracle-check", parents=[common], help="algebra and curvature oracles")
    s.add_argument("--seed", type=_u64, default=0)
    s.add_argument("--n", type=_positive_int, default=100, help="random matrices")
    s.set_defaults(func=cmd_oracle)

    s = sub.add_parser("refine", parents=[common], help="grid-doubling study of the curvature oracle")
    s.add_argument("--scenario", type=Path, help="scenario whose coefficients are used")
    s.add_argument("--n", type=_positive_int, default=128, help="coarsest grid")
    s.set_defaults(func=cmd_refine)
    return p


# --------------------------------------------------------------------------- helpers


def _log(args, msg):
    if not args.quiet:
        print(msg, file=sys.stderr)


def _scenario(args) -> Scenario:
    sc = load_scenario(args.scenario) if getattr(args, "scenario", None) else Scenario(name="round")
    if getattr(args, "eps", None):
        sc = replace(sc, eps=args.eps)
    if getattr(args, "n", None):
        sc = replace(sc, grid_n=args.n)
    return sc


def _config(args, sc: Scenario, eps: float) -> FlowConfig:
    try:
        return FlowConfig(eps=eps, require_admissible=not args.allow_inadmissible,
                          record_every=args.record_every, **sc.overrides)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _scenario_dict(sc: Scenario) -> dict:
    return {"name": sc.name, "coeffs": list(sc.coeffs), "grid_n": sc.grid_n,
            "eps": list(sc.eps), "overrides": dict(sc.overrides)}


def _finish(args, payload: dict, passed: bool) -> int:
    payload["passed"] = bool(passed)
    payload["timestamp"] = _dt.datetime.now(_dt.timezone.utc).isoformat()
    write_json(args.out / "report.json", payload)
    _log(args, f"{args.command}: {'PASS' if passed else 'FAIL'} -> {args.out}")
    return EXIT_PASS if passed else EXIT_FAIL


def _run_checks(res) -> dict:
    return {
        "converged": res.converged,
        "I1_conserved": res.max_I1_drift <= RUN_TOL_DRIFT,
        "Eeps_monotone": res.max_Eeps_decrease <= RUN_TOL_MONOTONE,
        "cone_kept": res.min_sigma1W > 0.0,
        "E_below_third": res.final.report.E <= 1.0 / 3.0 + RUN_TOL_THIRD,
    }


def _progress(args, every: int = 200):
    if args.quiet:
        return None
    calls = [0]

    def report(s):
        calls[0] += 1
        if calls[0] % every == 0:
            print(f"  t={s.t:.6g} Eeps={s.report.Eeps:.12g} residual={s.residual:.3e}",
                  file=sys.stderr)

    return report


# --------------------------------------------------------------------------- commands


def cmd_run(args) -> int:
    sc = _scenario(args)
    eps = sc.eps[0]
    cfg = _config(args, sc, eps)
    cf0 = sc.initial()
    write_checkpoint(args.out / "checkpoint-initial.txt", cf0, 0.0, cfg)
    res = run(cf0, cfg, _progress(args))
    write_timeseries(args.out / "timeseries.csv", res.series)
    write_checkpoint(args.out / "checkpoint-final.txt", res.final.cf, res.final.t, cfg)
    if not args.no_figures:
        from .plotting import plot_timeseries

        plot_timeseries(res.series.columns, res.series.rows, args.out / "timeseries.png",
                        title=f"{sc.name}, eps={eps:g}")
    checks = _run_checks(res)
    if res.reason:
        _log(args, f"run: {res.verdict.value}: {res.reason}")
    payload = {
        "command": "run",
        "scenario": _scenario_dict(sc),
        "config": asdict(cfg),
        "summary": res.summary(),
        "initial": dict(zip(res.series.columns, res.series.rows[0])),
        "final_report": res.final.report.as_dict(),
        "checks": checks,
    }
    return _finish(args, payload, all(checks.values()))


def cmd_sweep(args) -> int:
    sc = _scenario(args)
    cfg = _config(args, sc, sc.eps[0])
    cf0 = sc.initial()
    rep, results = eps_sweep(cf0, sc.eps, cfg, progress=_progress(args))
    write_csv(args.out / "sweep.csv", SWEEP_COLUMNS, [[r[c] for c in SWEEP_COLUMNS] for r in rep.rows])
    for eps, res in results.items():
        write_timeseries(args.out / f"timeseries-eps{eps:g}.csv", res.series)
        write_checkpoint(args.out / f"checkpoint-eps{eps:g}.txt", res.final.cf, res.final.t,
                         replace(cfg, eps=eps))
    if not args.no_figures:
        from .plotting import plot_sweep

        plot_sweep(rep.rows, args.out / "sweep.png")
    payload = {
        "command": "sweep",
        "scenario": _scenario_dict(sc),
        "config": asdict(cfg),
        "sweep": rep.as_dict(),
        "runs": {f"{eps:g}": res.summary() for eps, res in results.items()},
    }
    return _finish(args, payload, rep.all_converged and rep.all_E_below_third)


def cmd_audit(args) -> int:
    if not 0 <= args.degree <= 12:
        raise UsageError("--degree must lie in [0, 12]")
    try:
        rep = audit(args.n, seed=args.seed, amplitude=args.amplitude, degree=args.degree,
                    grid_n=args.grid_n, lemma3_eps=args.eps[0])
    except RejectionExhausted as exc:
        _log(args, f"audit: {exc}")
        return _finish(args, {"command": "audit", "error": str(exc)}, False)
    write_csv(args.out / "audit.csv", AUDIT_COLUMNS, rep.rows())
    if not args.no_figures:
        from .plotting import plot_audit

        plot_audit(rep.samples, args.out / "audit.png")
    payload = {"command": "audit", **rep.as_dict()}
    return _finish(args, payload, rep.passed)


def cmd_oracle(args) -> int:
    rep = oracle_check(seed=args.seed, n=args.n)
    rows = rep["refine"]["rows"]
    write_csv(args.out / "refine.csv", REFINE_COLUMNS, [[r[c] for c in REFINE_COLUMNS] for r in rows])
    if not args.no_figures:
        from .plotting import plot_refine

        plot_refine(rows, args.out / "refine.png")
    return _finish(args, {"command": "oracle-check", **rep}, rep["passed"])


def cmd_refine(args) -> int:
    coeffs = load_scenario(args.scenario).coeffs if args.scenario else (0.0, 0.3)
    if args.n < 16 or args.n & (args.n - 1):
        raise UsageError("--n must be a power of two >= 16")
    grids = tuple(args.n * 2**k for k in range(4))
    rep = refine_study(coeffs, grids)
    write_csv(args.out / "refine.csv", REFINE_COLUMNS, [[r[c] for c in REFINE_COLUMNS] for r in rep.rows])
    if not args.no_figures:
        from .plotting import plot_refine

        plot_refine(rep.rows, args.out / "refine.png")
    payload = {"command": "refine", "coeffs": list(coeffs), **rep.as_dict()}
    return _finish(args, payload, rep.passed)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_PASS if exc.code == 0 else EXIT_USAGE
    try:
        args.out.mkdir(parents=True, exist_ok=True)
        return args.func(args)
    except (ParseError, ValidationError, UsageError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # noqa: BLE001 - every path must map to an exit code
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
