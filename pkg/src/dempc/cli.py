"""Command-line interface.

    dempc generate-case --out DIR
    dempc solve --mode both --t 12
    dempc run-day --mode both --out results/
    dempc check-derivatives --points 20
    dempc compare --out results/

Without ``--case``/``--profiles`` the built-in synthetic feeder and day are used.
Exit codes: 0 ok, 1 usage, 2 input or validation error, 3 solver failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
import time
import warnings
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import io
from .aladin import aladin_solve
from .cases import Case, lebanon_case, lebanon_day
from .empc import assemble_empc
from .errors import InputError, SolverError, StructuralError
from .nlp import check_derivatives, solve_nlp
from .sim import MODES, SimConfig, compute_metrics, cost_deviation_pct, run_mpc

EXIT_OK, EXIT_USAGE, EXIT_INPUT, EXIT_SOLVER = 0, 1, 2, 3

log = logging.getLogger("dempc")


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def __init__(self, *a, **kw):
        kw.setdefault("allow_abbrev", False)
        super().__init__(*a, **kw)

    def error(self, message):
        raise _UsageError(f"{self.prog}: error: {message}")


def _global_flags(p, suppress):
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    p.add_argument("--case", type=Path, default=d(None), help="case file (YAML)")
    p.add_argument("--profiles", type=Path, default=d(None), help="profile table (CSV)")
    p.add_argument("--out", type=Path, default=d(None), help="output directory")
    p.add_argument("--tol", type=float, default=d(None), help="ALADIN termination tolerance")
    p.add_argument("--seed", type=int, default=d(0), help="forecast-noise seed")
    p.add_argument("--noise", type=float, default=d(0.0), help="relative forecast noise (0 = perfect)")
    p.add_argument("--threads", type=int, default=d(None), help="parallel area solves")
    p.add_argument("-v", "--verbose", action="store_true", default=d(False))


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="dempc", description="Economic MPC of distribution feeders with ALADIN.")
    _global_flags(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, help):
        p = sub.add_parser(name, help=help)
        _global_flags(p, suppress=True)
        return p

    add("generate-case", "write the synthetic case and profile files")
    p = add("solve", "one EMPC solve")
    p.add_argument("--mode", choices=MODES, default="both")
    p.add_argument("--t", type=int, default=0, help="interval index")
    p = add("run-day", "receding-horizon run over the profile")
    p.add_argument("--mode", choices=MODES, default="both")
    p.add_argument("--intervals", type=int, default=None, help="stop after this many intervals")
    p = add("check-derivatives", "finite-difference check of the EMPC derivatives")
    p.add_argument("--points", type=int, default=20)
    p.add_argument("--t", type=int, default=0)
    p.add_argument("--threshold", type=float, default=1e-5)
    p = add("compare", "centralized vs distributed deviation and consensus tables")
    p.add_argument("--intervals", type=int, default=None)
    return parser


def _load(args) -> tuple[Case, object]:
    case = io.load_case(args.case) if args.case else lebanon_case()
    if args.tol is not None:
        case = replace(case, aladin=replace(case.aladin, tol=args.tol))
    if args.threads is not None:
        if args.threads < 1:
            raise InputError("--threads must be at least 1")
        case = replace(case, aladin=replace(case.aladin, threads=args.threads))
    if args.profiles:
        day, _ = io.load_profiles(args.profiles, case, noise=args.noise, seed=args.seed)
    else:
        if args.case:
            raise InputError("--profiles is required with --case")
        day = lebanon_day()[0].with_noise(args.noise, args.seed)
    return case, day


def _settings(args, **extra) -> dict:
    keys = ("command", "case", "profiles", "tol", "seed", "noise", "threads", "mode", "t", "intervals",
            "points", "threshold")
    out = {k: getattr(args, k) for k in keys if hasattr(args, k)}
    out["case_file"] = out.pop("case")
    out["profile_file"] = out.pop("profiles")
    out.update(extra)
    return out


def _out_dir(args) -> Path | None:
    if args.out is None:
        return None
    args.out.mkdir(parents=True, exist_ok=True)
    return args.out


def cmd_generate_case(args) -> int:
    out = args.out or Path(".")
    case_path, prof_path = io.generate_lebanon_synthetic(out)
    print(f"wrote {case_path}")
    print(f"wrote {prof_path}")
    return EXIT_OK


def cmd_solve(args) -> int:
    case, day = _load(args)
    if not 0 <= args.t < day.n_intervals:
        raise InputError(f"--t must be in [0, {day.n_intervals - 1}]")
    P = assemble_empc(case.network, case.fleet, day.window(args.t, case.horizon.steps), case.horizon,
                      x0=case.x0, q_vg_mode=case.q_vg_mode)
    j_cent = j_dist = np.nan
    ok = True
    if args.mode in ("centralized", "both"):
        kkt = solve_nlp(P.to_nlp(), P.flat_start())
        ok &= kkt.converged
        j_cent = kkt.objective
        print(f"centralized  objective {j_cent:.10g}  status {kkt.status}  iterations {kkt.iterations}")
    if args.mode in ("distributed", "both"):
        res = aladin_solve(P, case.partition, case.aladin)
        ok &= res.converged
        j_dist = res.objective
        print(f"distributed  objective {j_dist:.10g}  converged {res.converged}  "
              f"iterations {res.iterations}  consensus {res.consensus_residual:.3e}")
        out = _out_dir(args)
        if out is not None:
            (out / "aladin_log.csv").write_text(res.log_table())
    if args.mode == "both":
        print(f"deviation    {cost_deviation_pct(j_cent, j_dist)[0]:.6f} %")
    out = _out_dir(args)
    if out is not None:
        io.write_table(out / "solve.csv", ["t", "mode", "objective_cent", "objective_dist"],
                       [[args.t, args.mode, j_cent, j_dist]])
        io.write_manifest(io.run_manifest(case, **_settings(args)), out / "manifest.json")
    return EXIT_OK if ok else EXIT_SOLVER


def _day_tables(result, out: Path, case: Case):
    base_kw = case.network.base_mva * 1000.0
    steps = result.steps
    (out / "intervals.csv").write_text(result.table())
    gen_head = ["t"] + [f"{n}_kw" for n in result.gc_names] + ["vg_kw", "loss_kw"]
    with_dist = result.mode == "both"
    if with_dist:
        gen_head += [f"{n}_dist_kw" for n in result.gc_names]
    rows = []
    for s in steps:
        row = [s.t] + list(s.p_gc * base_kw) + [s.p_vg.sum() * base_kw, s.loss * base_kw]
        if with_dist:
            dist = s.p_gc_dist if s.p_gc_dist is not None else np.full(len(result.gc_names), np.nan)
            row += list(dist * base_kw)
        rows.append(row)
    io.write_table(out / "generation.csv", gen_head, rows)
    metrics = compute_metrics(result)
    io.write_table(out / "deviation.csv", ["t", "objective_cent", "objective_dist", "deviation_pct"],
                   [[s.t, s.objective_cent, s.objective_dist, d]
                    for s, d in zip(steps, metrics["cost_deviation_pct"])])
    keys = sorted({k for s in steps for k in s.boundary})
    io.write_table(out / "consensus.csv", ["t", "consensus_residual", "aladin_iterations"] + keys,
                   [[s.t, s.consensus_residual, s.aladin_iterations] + [s.boundary.get(k, np.nan) for k in keys]
                    for s in steps])
    return metrics


def _summary(result, metrics) -> list[str]:
    e = result.energy
    lines = [f"intervals            {result.n_intervals}",
             f"mode                 {result.mode}",
             f"max deviation        {metrics['max_deviation_pct']:.6f} %",
             f"loss fraction        {100 * metrics['loss_fraction']:.3f} % of served energy",
             f"virtual generation   {metrics['vg_energy']:.6f} pu*h",
             f"energy residual      {metrics['energy_residual']:.3e} pu*h",
             f"clamped energy       {e['clamped']:.3e} pu*h",
             f"failed intervals     {len(metrics['failures'])}"]
    if "generation_gap_frac_of_peak" in metrics:
        lines.append(f"max generation gap   {100 * np.max(metrics['generation_gap_frac_of_peak']):.4f} % of peak")
    return lines


def _run(args, mode, n) -> int:
    case, day = _load(args)
    config = SimConfig(horizon=case.horizon, aladin=case.aladin, q_vg_mode=case.q_vg_mode)
    t0 = time.perf_counter()
    result = run_mpc(case.network, case.fleet, case.partition, day, mode, x0=case.x0,
                     config=config, n_intervals=n)
    elapsed = time.perf_counter() - t0
    out = _out_dir(args)
    if out is not None:
        metrics = _day_tables(result, out, case)
        io.write_manifest(io.run_manifest(case, **_settings(args, mode=mode, sim=config)),
                          out / "manifest.json")
        (out / "summary.txt").write_text("\n".join(_summary(result, metrics)) + "\n")
    else:
        metrics = compute_metrics(result)
    print("\n".join(_summary(result, metrics)))
    print(f"runtime              {elapsed:.1f} s")
    return EXIT_SOLVER if metrics["failures"] else EXIT_OK


def cmd_run_day(args) -> int:
    return _run(args, args.mode, args.intervals)


def cmd_compare(args) -> int:
    return _run(args, "both", args.intervals)


def cmd_check_derivatives(args) -> int:
    case, day = _load(args)
    P = assemble_empc(case.network, case.fleet, day.window(args.t, case.horizon.steps), case.horizon,
                      x0=case.x0, q_vg_mode=case.q_vg_mode)
    inst = P.to_nlp()
    rng = np.random.default_rng(args.seed)
    z0 = P.flat_start()
    lo = np.where(np.isfinite(P.lower), P.lower, z0 - 1.0)
    hi = np.where(np.isfinite(P.upper), P.upper, z0 + 1.0)
    worst = 0.0
    flagged = 0
    for k in range(args.points):
        z = lo + rng.random(z0.size) * (hi - lo)
        mult = rng.standard_normal(inst.n_eq)
        rep = check_derivatives(inst, z, multipliers=mult, threshold=args.threshold)
        worst = max(worst, rep.max_error)
        flagged += len(rep.flagged)
        for kind, where in rep.flagged[:5]:
            print(f"point {k}: {kind} entry {where} exceeds {args.threshold:g}")
    print(f"points {args.points}  variables {inst.n_vars}  max relative error {worst:.3e}  flagged {flagged}")
    return EXIT_OK if flagged == 0 else EXIT_SOLVER


COMMANDS = {
    "generate-case": cmd_generate_case,
    "solve": cmd_solve,
    "run-day": cmd_run_day,
    "check-derivatives": cmd_check_derivatives,
    "compare": cmd_compare,
}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except _UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if not args.verbose:
        warnings.simplefilter("ignore")
    try:
        return COMMANDS[args.command](args)
    except (InputError, StructuralError) as exc:
        print(f"dempc: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except SolverError as exc:
        print(f"dempc: solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
