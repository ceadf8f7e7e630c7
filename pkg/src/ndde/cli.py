"""Command line front end.

Four subcommands over one config-file format:

* ``check <cfg>``     evaluate the contraction criterion and print the
                      report; exit 0 when satisfied, 2 when violated,
                      3 when inconclusive.
* ``simulate <cfg>``  direct integration from the configured history;
                      optionally writes the trajectory as CSV.
* ``picard <cfg>``    fixed-point iteration on the reshaped unknown,
                      residual check, and a cross-method comparison
                      against direct integration; optionally writes the
                      reconstructed solution as CSV.
* ``example <name>``  materialize a shipped preset config in the current
                      directory.

All failures (unreadable config, parse errors, numerical blowups) exit 1
with a one-line message on stderr; usage errors also exit 1.  Summaries are
flat ``key = value`` lines so they diff cleanly; CSV bodies contain no
timestamps and are byte-identical across runs.  The NDDE_THREADS environment
variable sets the worker count for the embarrassingly parallel experiments
(default 1).
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .config import RunConfig, load_config
from .criteria import evaluate_criteria
from .errors import NddeError
from .integrator import integrate
from .model import horizon, transformed_history
from .operator import picard_solve, reconstruct_x, residual
from .presets import available, write_preset

__all__ = ["build_parser", "main", "run_check", "run_example", "run_picard", "run_simulate"]


class _Parser(argparse.ArgumentParser):
    # usage errors exit 1, matching every other failure path of the tool
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="ndde",
        description="Stability checks and solvers for neutral delay equations.",
        epilog="Set NDDE_THREADS to parallelize multi-trajectory experiments.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", help="evaluate the contraction criterion")
    p.add_argument("config", help="run configuration file")
    p.add_argument("--tmax", type=float, default=None, help="override the sweep horizon")
    p.add_argument("--json", default=None, metavar="PATH", help="also write the report as JSON")
    p.set_defaults(func=lambda ns: run_check(ns.config, tmax=ns.tmax, json_path=ns.json))

    p = sub.add_parser("simulate", help="integrate the equation directly")
    p.add_argument("config", help="run configuration file")
    p.add_argument("--T", type=float, default=None, help="override the horizon")
    p.add_argument("--step", type=float, default=None, help="override the step size")
    p.add_argument("--csv", default=None, metavar="PATH", help="write the trajectory as CSV")
    p.set_defaults(func=lambda ns: run_simulate(ns.config, T=ns.T, step=ns.step, csv_path=ns.csv))

    p = sub.add_parser("picard", help="solve by fixed-point iteration and cross-check")
    p.add_argument("config", help="run configuration file")
    p.add_argument("--T", type=float, default=None, help="override the horizon")
    p.add_argument("--tol", type=float, default=None, help="override the iteration tolerance")
    p.add_argument("--csv", default=None, metavar="PATH", help="write the reconstructed solution as CSV")
    p.set_defaults(func=lambda ns: run_picard(ns.config, T=ns.T, tol=ns.tol, csv_path=ns.csv))

    p = sub.add_parser("example", help="write a shipped preset config to the current directory")
    p.add_argument("name", choices=available())
    p.set_defaults(func=lambda ns: run_example(ns.name))

    return parser


def _load(config_path) -> RunConfig:
    cfg = load_config(config_path)
    for note in cfg.warnings:
        print(f"warning: {note}", file=sys.stderr)
    return cfg


_VERDICT_EXIT = {"satisfied": 0, "violated": 2, "inconclusive": 3}


def run_check(config_path, tmax=None, json_path=None, out=None) -> int:
    """Criterion check; exit 0 satisfied, 2 violated, 3 inconclusive."""
    out = out or sys.stdout
    cfg = _load(config_path)
    report = evaluate_criteria(
        cfg.problem,
        cfg.aux,
        tmax=cfg.tmax if tmax is None else tmax,
        grid=cfg.grid,
        eps=cfg.eps,
    )
    print(report.to_text(), file=out)
    if json_path is not None:
        Path(json_path).write_text(report.to_json() + "\n")
    return _VERDICT_EXIT.get(report.verdict_bounded, 3)


def run_simulate(config_path, T=None, step=None, csv_path=None, out=None) -> int:
    out = out or sys.stdout
    cfg = _load(config_path)
    T = cfg.T if T is None else T
    step = cfg.step if step is None else step
    trajectory = integrate(cfg.problem, cfg.history, T=T, h=step)
    lines = [
        "command = simulate",
        f"config = {config_path}",
        f"T = {float(T)!r}",
        f"step = {trajectory.h!r}",
        f"nodes = {len(trajectory.nodes)}",
        f"trajectory.max_abs = {trajectory.max_abs()!r}",
        f"trajectory.end_abs = {trajectory.end_abs()!r}",
    ]
    if csv_path is not None:
        trajectory.to_csv(csv_path)
        lines.append(f"csv = {csv_path}")
    print("\n".join(lines), file=out)
    return 0


def run_picard(config_path, T=None, tol=None, csv_path=None, out=None) -> int:
    """Fixed-point run; divergence is reported in the summary, not raised."""
    out = out or sys.stdout
    cfg = _load(config_path)
    T = cfg.T if T is None else T
    tol = cfg.tol if tol is None else tol
    result = picard_solve(cfg.problem, cfg.aux, cfg.history, T=T, tol=tol)
    defect = residual(result.z, cfg.problem, cfg.aux, cfg.history)
    solution = reconstruct_x(result.z, cfg.aux)
    lines = [
        "command = picard",
        f"config = {config_path}",
        f"T = {float(T)!r}",
        f"tol = {float(tol)!r}",
        f"picard.iterations = {result.iterations}",
        f"picard.converged = {'true' if result.converged else 'false'}",
        f"picard.ratio.max = {float(max(result.ratios))!r}" if result.ratios else "picard.ratio.max = none",
        f"picard.final_step = {float(result.final_step)!r}",
        f"picard.residual.sup = {float(defect)!r}",
    ]
    if result.converged:
        # cross-method check: map the fixed point back through the weight and
        # compare with a direct integration started from the matching history
        m = horizon(cfg.problem, T).m
        history_x = transformed_history(cfg.problem, cfg.aux, cfg.history, m)
        trajectory = integrate(cfg.problem, history_x, T=T, h=min(cfg.step, 1e-3))
        probes = np.linspace(cfg.problem.t0, T, 801)
        sup = max(
            abs(solution.eval(float(t)) - trajectory.eval(float(t))) for t in probes
        )
        lines.append(f"crosscheck.sup_diff = {float(sup)!r}")
    else:
        lines.append("crosscheck.sup_diff = skipped (iteration did not converge)")
    if csv_path is not None:
        solution.to_csv(csv_path)
        lines.append(f"csv = {csv_path}")
    print("\n".join(lines), file=out)
    return 0


def run_example(name, directory=".", out=None) -> int:
    out = out or sys.stdout
    path = write_preset(name, directory)
    print(f"wrote {path}", file=out)
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        namespace = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else int(exc.code)
    try:
        return namespace.func(namespace)
    except NddeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
