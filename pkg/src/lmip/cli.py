"""Command-line runner: ``lmip run``, ``lmip report``, ``lmip batch`` and
``lmip instance``.

Exit codes of ``run``: 0 converged, 2 iteration limit, 3 line-search
failure, 4 invalid configuration, 5 stationary point that is not a solution,
1 any other failure (non-finite values, projection budget exhausted).
The default output directory is taken from ``LMIP_OUTPUT_DIR``.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import json
import os
import shlex
import sys
import warnings
from dataclasses import replace
from pathlib import Path

import numpy as np

from lmip.errors import InvalidConfig, LmipError, MalformedTrace
from lmip.globalized import PRESETS, g_lmm_ip_solve, preset
from lmip.local import LocalConfig, ThetaSchedule, lmm_ip_solve
from lmip.problems import SpectraInstance, gen_spectra_instance, get_desk_problem, spectra_start
from lmip.sets import SpectrahedronSet, svec
from lmip.trace import FE_CONVENTION, read_trace, report_table, write_trace

EXIT_INVALID = 4
OUTPUT_ENV = "LMIP_OUTPUT_DIR"

_OVERRIDES = {
    "M": int,
    "eta1": float,
    "eta2": float,
    "eta3": float,
    "gamma": float,
    "beta": float,
    "tol_F": float,
    "tol_stationarity": float,
    "max_iters": int,
    "max_backtracks": int,
    "condg_budget": int,
    "rank_p0": int,
}


def _parse_problem(spec):
    """``desk:<name>``, ``spectra:<n>,<m>,<q>,<seed>`` or ``file:<path>``."""
    kind, _, arg = spec.partition(":")
    try:
        if kind == "desk":
            problem = get_desk_problem(arg)
            return problem, problem.start
        if kind == "spectra":
            n, m, q, seed = (int(t) for t in arg.split(","))
            return gen_spectra_instance(n, m, q, seed).as_problem(), None
        if kind == "file":
            return SpectraInstance.load(arg).as_problem(), None
    except (KeyError, ValueError, OSError) as exc:
        raise InvalidConfig(f"bad problem {spec!r}: {exc}") from exc
    raise InvalidConfig(f"bad problem selector {spec!r}")


def _start(problem, default, args):
    if args.x0 is not None:
        try:
            return np.array([float(t) for t in args.x0.split(",")])
        except ValueError as exc:
            raise InvalidConfig(f"bad --x0 {args.x0!r}") from exc
    if isinstance(problem.feasible_set, SpectrahedronSet):
        return svec(spectra_start(problem.feasible_set.n, args.start_a))
    return default


def build_config(args, problem):
    """Validated solver configuration from parsed ``run`` arguments."""
    overrides = {k: getattr(args, k) for k in _OVERRIDES if getattr(args, k) is not None}
    if args.theta is not None:
        overrides["theta"] = ThetaSchedule.parse(args.theta)
    if args.projection is not None:
        overrides["projection"] = args.projection
    name = args.preset or (
        "spectra42" if isinstance(problem.feasible_set, SpectrahedronSet) else "box41"
    )
    config = preset(name, **overrides)
    if config.projection == "fwp" and not isinstance(problem.feasible_set, SpectrahedronSet):
        raise InvalidConfig("fwp projection requires a spectrahedron problem")
    if config.projection == "condg" and not config.theta.theta0:
        warnings.warn("theta = 0 asks for exact projections; condg mode will not be used")
    if args.method == "local":
        config = LocalConfig(
            theta=config.theta,
            tol_F=config.tol_F,
            max_iters=args.max_iters if args.max_iters is not None else 100,
            projection=config.projection,
            condg_budget=config.condg_budget,
            rank_p0=config.rank_p0,
        )
    return config


def _config_meta(config):
    return {k: str(v) for k, v in vars(config).items()}


def run_once(args):
    """Execute one ``run``; returns ``(exit_code, summary_line)``."""
    try:
        problem, default_start = _parse_problem(args.problem)
        config = build_config(args, problem)
        x0 = _start(problem, default_start, args)
    except (InvalidConfig, ValueError) as exc:
        return EXIT_INVALID, f"invalid configuration: {exc}"

    solve = g_lmm_ip_solve if args.method == "global" else lmm_ip_solve
    try:
        result = solve(problem, x0, config)
    except (LmipError, ValueError) as exc:
        return EXIT_INVALID, f"invalid configuration: {exc}"

    label = args.label or _default_label(args)
    out_dir = Path(args.out or os.environ.get(OUTPUT_ENV) or ".")
    out_dir.mkdir(parents=True, exist_ok=True)
    meta = {
        "label": label,
        "problem": args.problem,
        "method": args.method,
        "start_a": args.start_a,
        "status": result.status.value,
        "It": result.n_iter,
        "Fe": result.n_fev,
        "fe_convention": FE_CONVENTION,
    }
    meta.update(_config_meta(config))
    path = write_trace(out_dir / f"{label}.{args.format}", result.trace, meta, fmt=args.format)
    line = f"{label}: {result.summary()} trace={path}"
    if result.message:
        line += f" ({result.message})"
    return result.status.exit_code, line


def _default_label(args):
    parts = [args.problem.replace(":", "-").replace(",", "-").replace("/", "_"), args.method]
    if args.projection:
        parts.append(args.projection)
    if args.theta is not None:
        parts.append(f"theta{args.theta}".replace(":", "").replace(",", "-"))
    return "_".join(parts)


def cmd_run(args):
    code, line = run_once(args)
    print(line, file=sys.stdout if code != EXIT_INVALID else sys.stderr)
    return code


def cmd_report(args):
    try:
        traces = [read_trace(p) for p in args.traces]
        text, summaries = report_table(traces, args.labels)
    except MalformedTrace as exc:
        print(f"malformed trace: {exc}", file=sys.stderr)
        return EXIT_INVALID
    print(text, end="")
    if args.json:
        Path(args.json).write_text(json.dumps(summaries, indent=1) + "\n")
    return 0


def _run_line(line):
    args = build_parser().parse_args(["run", *shlex.split(line)])
    return run_once(args)


def cmd_batch(args):
    lines = []
    for raw in Path(args.file).read_text().splitlines():
        raw = raw.strip()
        if raw and not raw.startswith("#"):
            lines.append(raw + (f" --out {shlex.quote(args.out)}" if args.out else ""))
    if not lines:
        print("batch file has no runs", file=sys.stderr)
        return EXIT_INVALID
    with concurrent.futures.ProcessPoolExecutor(max_workers=args.jobs) as pool:
        results = list(pool.map(_run_line, lines))
    for _, line in results:
        print(line)
    codes = [code for code, _ in results]
    return next((c for c in codes if c != 0), 0)


def cmd_instance(args):
    try:
        n, m, q, seed = (int(t) for t in args.spec.split(","))
        inst = gen_spectra_instance(n, m, q, seed)
    except ValueError as exc:
        print(f"invalid instance: {exc}", file=sys.stderr)
        return EXIT_INVALID
    inst.save(args.output)
    print(f"wrote {args.output}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="lmip", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="solve one problem and write its trace")
    run.add_argument("--problem", required=True,
                     help="desk:<name> | spectra:<n>,<m>,<q>,<seed> | file:<path>")
    run.add_argument("--method", choices=("global", "local"), default="global")
    run.add_argument("--preset", choices=sorted(PRESETS))
    run.add_argument("--projection", choices=("exact", "condg", "fwp"))
    run.add_argument("--theta", help="constant (0.9) or geometric (geom:0.9,0.5)")
    for name, typ in _OVERRIDES.items():
        run.add_argument(f"--{name.replace('_', '-')}", dest=name, type=typ)
    run.add_argument("--start-a", type=float, default=0.0,
                     help="spectrahedron start (1-a) I/n + a e1 e1^T")
    run.add_argument("--x0", help="comma-separated starting point")
    run.add_argument("--out", help=f"output directory (default ${OUTPUT_ENV} or .)")
    run.add_argument("--format", choices=("csv", "json"), default="csv")
    run.add_argument("--label", help="trace file stem")
    run.set_defaults(func=cmd_run)

    rep = sub.add_parser("report", help="tabulate one or more traces")
    rep.add_argument("traces", nargs="+")
    rep.add_argument("--labels", nargs="*")
    rep.add_argument("--json", help="write machine-readable summaries here")
    rep.set_defaults(func=cmd_report)

    bat = sub.add_parser("batch", help="run every line of a file as 'run' arguments")
    bat.add_argument("file")
    bat.add_argument("--jobs", type=int, default=None)
    bat.add_argument("--out")
    bat.set_defaults(func=cmd_batch)

    ins = sub.add_parser("instance", help="export a spectrahedron instance")
    ins.add_argument("spec", help="<n>,<m>,<q>,<seed>")
    ins.add_argument("output")
    ins.set_defaults(func=cmd_instance)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INVALID if exc.code else 0
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
