"""Command-line entry point: ``nlococ <command> SCENARIO [options]``.

Exit codes: 0 on success, 1 for invalid scenarios or usage errors, 2 when a
solver fails at run time.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from .adjoint import ReducedCost
from .io import (
    FORMATS,
    ScenarioError,
    ScenarioValidationError,
    Scenario,
    export_field,
    export_raw64,
    export_table,
    export_trajectory,
    load_scenario,
    shipped_scenario,
)
from .kernels import check_coercivity
from .optimize import fd_gradient_oracle, optimize, variational_inequality_samples
from .potentials import SeparationError
from .state import ConvergenceError
from .tangent import ControlPerturbation, taylor_test

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2
COMMANDS = ("simulate", "energy-report", "gradient-check", "taylor-test", "optimize", "validate")


class _Parser(argparse.ArgumentParser):
    """Usage errors exit with status 1 instead of argparse's 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="nlococ", description="Tumour-growth simulation, derivative checks and optimal control.")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", required=True)
    helps = {
        "simulate": "run the forward model and export the trajectory and monitors",
        "energy-report": "per-step energy, energy residual, mass ledger and separation margin",
        "gradient-check": "adjoint gradient against central differences",
        "taylor-test": "second-order remainder test of the linearised state",
        "optimize": "projected-gradient optimal control",
        "validate": "load the scenario and audit its assumptions",
    }
    for name in COMMANDS:
        p = sub.add_parser(name, help=helps[name], description=helps[name])
        p.add_argument("scenario", help="scenario file, or the name of a shipped scenario (default, fixedpoint)")
        p.add_argument("--seed", type=int, default=None, help="override the scenario seed")
        p.add_argument("--out", type=Path, default=None, help="output directory (default: ./nlococ-out/COMMAND)")
        p.add_argument("--format", choices=FORMATS, default="raw64", help="field export format (default raw64)")
        p.add_argument("-v", "--verbose", action="store_true", help="log solver progress")
    return parser


def resolve_scenario(arg: str) -> Path:
    path = Path(arg)
    if path.exists():
        return path
    try:
        return shipped_scenario(path.stem if path.suffix == ".scn" else arg)
    except FileNotFoundError:
        raise ScenarioError(f"scenario {arg!r} is neither a file nor a shipped scenario") from None


def _out_dir(args) -> Path:
    out = args.out if args.out is not None else Path("nlococ-out") / args.command
    out.mkdir(parents=True, exist_ok=True)
    return out


def _monitor_columns(traj) -> dict:
    cols = {"t": traj.time.nodes}
    cols.update({k: v for k, v in traj.monitors.items()})
    return cols


def _reduced_cost(scn: Scenario) -> ReducedCost:
    if scn.weights is None:
        raise ScenarioValidationError([("C1", "this command needs a [weights] section")])
    return ReducedCost(scn.model(), scn.phi0, scn.sigma0, scn.time, scn.weights, scn.targets)


def cmd_validate(scn: Scenario, args) -> int:
    table = scn.kernel_table()
    print(f"scenario: {scn.source}")
    print(f"grid {scn.grid.cells} on {scn.grid.extent}; {scn.time.steps} steps to T = {scn.time.horizon:g}")
    print(f"kernel {scn.kernel.family}: a* = {table.a_star:.6g}, b = {table.b_const:.6g}")
    print(f"coercivity: {check_coercivity(table, scn.potential, scn.params)}")
    print(f"potential {scn.potential.kind}: max|phi0| = {np.max(np.abs(scn.phi0)):.6g}, half-width {scn.potential.half_width:g}")
    print(f"controls admissible: {scn.bounds.feasible(scn.controls, scn.grid, scn.time)}")
    print(f"cost weights: {scn.weights if scn.weights is not None else 'none (forward runs only)'}")
    print("all assumptions satisfied")
    return EXIT_OK


def cmd_simulate(scn: Scenario, args) -> int:
    model = scn.model()
    traj = model.simulate(scn.phi0, scn.sigma0, scn.controls, scn.time)
    out = _out_dir(args)
    files = export_trajectory(traj, scn.grid, out, args.format)
    export_table(_monitor_columns(traj), out / "monitors.csv")
    mon = traj.monitors
    print(f"{scn.time.steps} steps, {len(files)} field files in {out}")
    print(f"max |mass ledger| = {np.max(np.abs(mon['mass_ledger'])):.3e}")
    print(f"energy: {mon['energy'][0]:.10g} -> {mon['energy'][-1]:.10g}")
    print(model.separation_report(traj))
    return EXIT_OK


def cmd_energy_report(scn: Scenario, args) -> int:
    model = scn.model()
    traj = model.simulate(scn.phi0, scn.sigma0, scn.controls, scn.time)
    res = np.concatenate([[0.0], model.energy_residuals(traj, scn.controls)])
    sep = model.separation_report(traj)
    mon = traj.monitors
    margin = scn.potential.half_width - np.max(np.abs(traj.phi.reshape(len(traj), -1)), axis=1)
    cols = {"t": scn.time.nodes, "energy": mon["energy"], "energy_residual": res,
            "mass": mon["mass"], "mass_ledger": mon["mass_ledger"], "separation_margin": margin}
    export_table(cols, _out_dir(args) / "energy_report.csv")
    print(f"{'n':>4} {'t':>10} {'energy':>20} {'residual':>11} {'mass ledger':>11} {'margin':>9}")
    for n in range(len(traj)):
        print(f"{n:>4d} {scn.time.nodes[n]:>10.4g} {mon['energy'][n]:>20.12e} {res[n]:>11.3e} {mon['mass_ledger'][n]:>11.3e} {margin[n]:>9.4g}")
    print(sep)
    return EXIT_OK


def cmd_gradient_check(scn: Scenario, args) -> int:
    rc = _reduced_cost(scn)
    rng = scn.rng(args.seed)
    eps = scn.checks.get("fd_eps", [1e-2, 1e-3, 1e-4, 1e-5])
    _, g, _, _ = rc.gradient(scn.controls)
    rows = []
    for i in range(int(scn.checks.get("directions", 3))):
        d = ControlPerturbation.random(scn.grid, scn.time, rng).as_controls()
        rep = fd_gradient_oracle(rc, scn.controls, d, eps, gradient=g)
        print(f"direction {i}:\n{rep}")
        rows += [(i, e, f, rep.adjoint, r) for e, f, r in zip(rep.eps, rep.fd, rep.rel_error)]
    arr = np.array(rows)
    export_table({"direction": arr[:, 0], "eps": arr[:, 1], "fd": arr[:, 2], "adjoint": arr[:, 3], "rel_error": arr[:, 4]},
                 _out_dir(args) / "gradient_check.csv")
    return EXIT_OK


def cmd_taylor_test(scn: Scenario, args) -> int:
    model = scn.model()
    rng = scn.rng(args.seed)
    eps = scn.checks.get("taylor_eps", [1e-1, 1e-2, 1e-3, 1e-4])
    d = ControlPerturbation.random(scn.grid, scn.time, rng)
    rep = taylor_test(model, scn.phi0, scn.sigma0, scn.controls, d, scn.time, eps)
    print(rep)
    slopes = np.concatenate([[np.nan], rep.slopes])
    export_table({"eps": rep.eps, "remainder": rep.remainders, "local_slope": slopes, "used": rep.used},
                 _out_dir(args) / "taylor.csv")
    return EXIT_OK


def cmd_optimize(scn: Scenario, args) -> int:
    rc = _reduced_cost(scn)
    res = optimize(rc, scn.controls, scn.bounds, scn.optimizer)
    out = _out_dir(args)
    hist = res.history
    export_table({k: [h[k] for h in hist] for k in ("iteration", "J", "stationarity", "step")}, out / "history.csv")
    for name, data in (("u", res.controls.u), ("v", res.controls.v)):
        if args.format == "raw64":
            export_raw64(data, out / f"{name}.raw64")
        else:
            for n in range(data.shape[0]):
                export_field(data[n], scn.grid, out / f"{name}_{n:04d}.csv", "csv")
    vi = variational_inequality_samples(rc, res.controls, res.gradient, scn.bounds, 20, scn.rng(args.seed))
    status = "converged" if res.converged else "stopped at the iteration limit"
    print(f"{status} after {len(hist) - 1} iterations: J = {res.cost:.12e}, stationarity = {res.kkt_residual:.3e}")
    print(f"min sampled variational inequality over 20 admissible controls: {vi.min():.3e}")
    return EXIT_OK


HANDLERS = {
    "simulate": cmd_simulate,
    "energy-report": cmd_energy_report,
    "gradient-check": cmd_gradient_check,
    "taylor-test": cmd_taylor_test,
    "optimize": cmd_optimize,
    "validate": cmd_validate,
}


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        scn = load_scenario(resolve_scenario(args.scenario), seed=args.seed)
    except ScenarioValidationError as exc:
        print("scenario rejected:", file=sys.stderr)
        for label, msg in exc.violations:
            print(f"  [{label}] {msg}", file=sys.stderr)
        return EXIT_INVALID
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    try:
        return HANDLERS[args.command](scn, args)
    except ScenarioValidationError as exc:
        print(f"scenario rejected: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (ConvergenceError, SeparationError, ArithmeticError, RuntimeError, OSError) as exc:
        print(f"runtime failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
