"""Command line front end: ``qpp-stab {validate,analyze,lyapunov,simulate,examples}``.

Every command prints one JSON document on stdout (or writes it to
``--output``). Exit status:

0  success (for ``examples``: every check passed)
1  invalid system, failed check, or divergent integration
2  unreadable or malformed input, bad arguments
3  refusal (point not fixed, Casimir correction not in ker K, no decomposition)
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys as _sys
from dataclasses import dataclass

import numpy as np

from . import config, corpus, reproduce
from .core import check_poisson_conditions, hamiltonian_from_decomposition
from .errors import DivergenceError, QPPError, RefusalError, SystemFileError
from .io import dump_system, jsonable, load_system
from .pipeline import analyze, lyapunov_report, point_from_kappa, resolve_decomposition
from .simulate import (
    functional_drift,
    integrate,
    measure_period_and_phase,
    oscillation_analysis,
    write_trajectory_csv,
)
from .stability import casimirs, lyapunov_original_coordinates

logger = logging.getLogger("qppstab")

EXIT_OK, EXIT_FAIL, EXIT_INPUT, EXIT_REFUSED = 0, 1, 2, 3
COMMANDS = ("validate", "analyze", "lyapunov", "simulate", "examples")


@dataclass
class RunConfig:
    command: str
    input: str | None = None
    output: str | None = None
    tol: float = config.POISSON_TOL
    step: float = config.STEP
    t_end: float = config.T_END
    point: tuple | None = None
    kappa: tuple | None = None
    fixed_point: tuple | None = None
    format: str = "json"

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ValueError(f"unknown command {self.command!r}")
        for name in ("tol", "step", "t_end"):
            v = getattr(self, name)
            if not (v > 0 and math.isfinite(v)):
                raise ValueError(f"--{name.replace('_', '-')} must be positive")


def _floats(text):
    try:
        vals = tuple(float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None
    if not all(math.isfinite(v) for v in vals):
        raise argparse.ArgumentTypeError("values must be finite")
    return vals


def build_parser():
    p = argparse.ArgumentParser(prog="qpp-stab", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, need_input=True):
        sp.add_argument("--input", required=need_input, metavar="PATH", help="system JSON file")
        sp.add_argument("--output", metavar="PATH", help="write the result here instead of stdout")
        sp.add_argument("--tol", type=float, default=config.POISSON_TOL,
                        help="residual tolerance for decomposition and fixed-point checks")
        sp.add_argument("--format", choices=("json", "csv"), default="json")
        sp.add_argument("-v", "--verbose", action="store_true")

    common(sub.add_parser("validate", help="check the decomposition conditions"))
    common(sub.add_parser("analyze", help="stability verdict, fixed points, Casimirs"))

    sp = sub.add_parser("lyapunov", help="energy-Casimir Lyapunov functional at a fixed point")
    common(sp)
    g = sp.add_mutually_exclusive_group(required=True)
    g.add_argument("--point", type=_floats, metavar="x1,x2,...")
    g.add_argument("--kappa", type=_floats, metavar="K", help="fixed-point family parameter(s)")

    sp = sub.add_parser("simulate", help="RK4 trajectory with drift monitoring")
    common(sp)
    sp.add_argument("--point", type=_floats, required=True, metavar="x1,x2,...", help="initial state")
    sp.add_argument("--step", type=float, default=config.STEP)
    sp.add_argument("--t-end", type=float, default=config.T_END)
    sp.add_argument("--fixed-point", type=_floats, metavar="x1,x2,...",
                    help="also monitor the Lyapunov functional built at this fixed point")

    sp = sub.add_parser("examples", help="write the bundled corpus and run the reproduction checks")
    common(sp, need_input=False)
    return p


def _emit(doc, output=None, stream=None):
    text = json.dumps(jsonable(doc), indent=2, allow_nan=False) + "\n"
    if output:
        with open(output, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        (stream or _sys.stdout).write(text)


def _load(cfg):
    return load_system(cfg.input)


def cmd_validate(cfg):
    sys, pd = _load(cfg)
    doc = {"input": cfg.input, "n": sys.n, "m": sys.m, "theorem1_eligible": sys.theorem1_eligible,
           "tolerances": config.as_dict() | {"poisson_tol": cfg.tol}}
    if pd is not None:
        check = check_poisson_conditions(sys, pd, cfg.tol)
        doc["residuals"] = check.as_dict()
        valid = check.ok and sys.theorem1_eligible
    else:
        found, info = resolve_decomposition(sys, None, cfg.tol)
        doc["recovery"] = info.get("recovery")
        if found is not None:
            doc["recovered"] = {"K": found.K, "L": found.L, "D": found.D}
            doc["residuals"] = check_poisson_conditions(sys, found, cfg.tol).as_dict()
        valid = found is not None
    doc["valid"] = bool(valid)
    _emit(doc, cfg.output)
    return EXIT_OK if valid else EXIT_FAIL


def cmd_analyze(cfg):
    sys, pd = _load(cfg)
    doc = analyze(sys, pd, cfg.tol)
    doc["input"] = cfg.input
    _emit(doc, cfg.output)
    return EXIT_OK


def _require_decomposition(sys, pd, tol):
    pd, info = resolve_decomposition(sys, pd, tol)
    if pd is None:
        raise RefusalError("no valid Poisson decomposition for this system")
    return pd


def cmd_lyapunov(cfg):
    sys, pd = _load(cfg)
    pd = _require_decomposition(sys, pd, cfg.tol)
    if cfg.kappa is not None:
        x0 = point_from_kappa(sys, pd, cfg.kappa)
    else:
        x0 = np.array(cfg.point)
    doc = lyapunov_report(sys, pd, x0, cfg.tol)
    doc["input"] = cfg.input
    _emit(doc, cfg.output)
    return EXIT_OK


def _oscillation_summary(traj):
    if traj.n < 2:
        return None
    try:
        period, lag = measure_period_and_phase(traj)
    except RefusalError as exc:
        return {"oscillatory": False, "reason": str(exc)}
    return {"oscillatory": True, "period": period, "phase_lag": lag}


def cmd_simulate(cfg):
    sys, pd = _load(cfg)
    functionals = {}
    if pd is not None and check_poisson_conditions(sys, pd, cfg.tol).ok:
        functionals["H"] = hamiltonian_from_decomposition(sys, pd, cfg.tol)
        for k, C in enumerate(casimirs(pd)):
            functionals[f"C{k + 1}"] = C
    elif cfg.fixed_point is not None:
        pd = _require_decomposition(sys, pd, cfg.tol)
    if cfg.fixed_point is not None:
        functionals["H_C"] = lyapunov_original_coordinates(sys, pd, np.array(cfg.fixed_point), cfg.tol)

    status = EXIT_OK
    summary = {"input": cfg.input, "x0": list(cfg.point), "step": cfg.step, "t_end": cfg.t_end}
    try:
        traj = integrate(sys, np.array(cfg.point), cfg.t_end, cfg.step)
        summary["diverged"] = False
    except DivergenceError as exc:
        traj = exc.trajectory
        summary.update(diverged=True, error=str(exc), last_state=exc.last_state)
        status = EXIT_FAIL
    summary["samples"] = len(traj)
    summary["final_time"] = float(traj.times[-1])
    summary["final_state"] = traj.states[-1]
    summary["drift"] = {k: {"absolute": d.absolute, "relative": d.relative}
                        for k, d in ((k, functional_drift(traj, f)) for k, f in functionals.items())}
    if not summary["diverged"]:
        summary["oscillation"] = _oscillation_summary(traj)
        if cfg.fixed_point is not None and sys.n == sys.m == 2:
            try:
                summary["small_oscillation_theory"] = oscillation_analysis(
                    sys, pd, np.array(cfg.fixed_point), cfg.tol).as_dict()
            except QPPError as exc:
                summary["small_oscillation_theory"] = {"error": str(exc)}

    if cfg.output:
        with open(cfg.output, "w", encoding="utf-8", newline="") as fh:
            write_trajectory_csv(fh, traj, functionals)
        summary["csv"] = cfg.output
        _emit(summary)
    elif cfg.format == "csv":
        write_trajectory_csv(_sys.stdout, traj, functionals)
        _emit(summary, stream=_sys.stderr)
    else:
        _emit(summary)
    return status


def cmd_examples(cfg):
    outdir = cfg.output or "qpp-examples"
    os.makedirs(outdir, exist_ok=True)
    written = []
    for name, (sys, pd) in corpus.bundled().items():
        path = os.path.join(outdir, name + ".json")
        dump_system(path, sys, pd)
        written.append(path)
    results = reproduce.run_all(outdir)
    for r in results:
        print(r.line(), file=_sys.stderr)
    doc = {
        "files": written,
        "all_passed": all(r.passed for r in results),
        "checks": [{"name": r.name, "passed": r.passed, "seconds": r.seconds, "details": r.details}
                   for r in results],
        "tolerances": config.as_dict(),
        "seed": int(os.environ.get(config.SEED_ENV, "0")),
    }
    _emit(doc, os.path.join(outdir, "report.json"))
    _emit({"files": written, "report": os.path.join(outdir, "report.json"),
           "all_passed": doc["all_passed"],
           "checks": {r.name: r.passed for r in results}})
    return EXIT_OK if doc["all_passed"] else EXIT_FAIL


HANDLERS = {
    "validate": cmd_validate,
    "analyze": cmd_analyze,
    "lyapunov": cmd_lyapunov,
    "simulate": cmd_simulate,
    "examples": cmd_examples,
}


def _error(kind, exc, code):
    doc = {"error": kind, "message": str(exc)}
    if isinstance(exc, SystemFileError):
        doc.update(field=exc.field, line=exc.line)
    print(f"qpp-stab: {exc}", file=_sys.stderr)
    _emit(doc)
    return code


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = RunConfig(
            command=args.command,
            input=args.input,
            output=args.output,
            tol=args.tol,
            step=getattr(args, "step", config.STEP),
            t_end=getattr(args, "t_end", config.T_END),
            point=getattr(args, "point", None),
            kappa=getattr(args, "kappa", None),
            fixed_point=getattr(args, "fixed_point", None),
            format=args.format,
        )
    except ValueError as exc:
        parser.error(str(exc))
    try:
        return HANDLERS[cfg.command](cfg)
    except SystemFileError as exc:
        return _error("input", exc, EXIT_INPUT)
    except OSError as exc:
        return _error("io", exc, EXIT_INPUT)
    except RefusalError as exc:
        return _error("refusal", exc, EXIT_REFUSED)
    except QPPError as exc:
        return _error(type(exc).__name__, exc, EXIT_INPUT if isinstance(exc, ValueError) else EXIT_FAIL)


if __name__ == "__main__":
    raise SystemExit(main())
