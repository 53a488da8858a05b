"""Command-line front end: plan, verify, eval, and sweep subcommands.

Exit codes: 0 success, 1 verification failure, 2 schema or domain error,
3 solver did not reach feasibility, 4 I/O error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
import time
from dataclasses import replace

import numpy as np

from .bernstein import BernsteinSurface, DomainError
from .rod import PoseSurfaces, euler_to_rotation
from .scenario import ScenarioError, ScenarioSpec, build_problem, load_scenario, with_orders
from .solver import solve
from .transcription import initial_guess, pack, unpack
from .validation import SamplingGrid, verify_solution

EXIT_OK = 0
EXIT_VERIFY_FAIL = 1
EXIT_SCHEMA = 2
EXIT_INFEASIBLE = 3
EXIT_IO = 4

SOLUTION_VERSION = 1


def _atomic_write(path: str, text: str):
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _parse_grid(text: str) -> SamplingGrid:
    try:
        ns, nt = text.lower().split("x")
        return SamplingGrid(int(ns), int(nt))
    except (ValueError, TypeError) as err:
        raise ScenarioError("--grid", f"expected NSxNT, got {text!r}") from err


def solution_to_json(pose: PoseSurfaces, T: float, scenario_name: str,
                     solver_report: dict, verification: dict) -> dict:
    return {
        "spec_version": SOLUTION_VERSION,
        "scenario_name": scenario_name,
        "T": T,
        "surfaces": {
            "p": pose.p.to_json_dict(),
            "phi": pose.phi.to_json_dict(),
            "theta": pose.theta.to_json_dict(),
            "psi": pose.psi.to_json_dict(),
        },
        "solver_report": solver_report,
        "verification": verification,
    }


def solution_from_json(obj: dict) -> tuple[PoseSurfaces, float]:
    surfaces = obj["surfaces"]
    pose = PoseSurfaces(
        BernsteinSurface.from_json_dict(surfaces["p"]),
        BernsteinSurface.from_json_dict(surfaces["phi"]),
        BernsteinSurface.from_json_dict(surfaces["theta"]),
        BernsteinSurface.from_json_dict(surfaces["psi"]),
    )
    return pose, float(obj["T"])


def _write_trajectory_csv(path: str, pose: PoseSurfaces, grid: SamplingGrid):
    ss = np.linspace(0.0, pose.length, grid.n_s)
    ts = np.linspace(0.0, pose.duration, grid.n_t)
    p = pose.p.evaluate_grid(ss, ts)
    angles = [a.evaluate_grid(ss, ts) for a in pose.angles()]
    rows = []
    for i, s in enumerate(ss):
        for j, t in enumerate(ts):
            rows.append(
                [s, t, *p[i, j], angles[0][i, j], angles[1][i, j], angles[2][i, j]]
            )
    _write_csv(path, ["s", "t", "x", "y", "z", "phi", "theta", "psi"], rows)


def _write_constraints_csv(path: str, pose: PoseSurfaces, scenario: ScenarioSpec,
                           grid: SamplingGrid):
    from .rod import constraint_surfaces

    cs = constraint_surfaces(pose, scenario.m_e, scenario.n_e)
    ss = np.linspace(0.0, pose.length, grid.n_s)
    ts = np.linspace(0.0, pose.duration, grid.n_t)
    samples = [surf.evaluate_grid(ss, ts) for surf in cs.base()]
    b = scenario.bounds
    limits = [b.v_min**2, b.v_max**2, b.q_max**2, b.u_max**2,
              b.omega_max**2, b.v_s_max**2, b.q_t_max**2]
    rows = []
    for i, s in enumerate(ss):
        for j, t in enumerate(ts):
            rows.append([s, t] + [g[i, j] for g in samples] + limits)
    _write_csv(
        path,
        ["s", "t", "v_sq", "q_sq", "u_sq", "w_sq", "a_sq", "at_sq",
         "vmin_sq", "vmax_sq", "qmax_sq", "umax_sq", "wmax_sq", "vsmax_sq", "qtmax_sq"],
        rows,
    )


def _write_csv(path: str, header: list, rows: list):
    out = []
    out.append(",".join(header))
    for row in rows:
        out.append(",".join(repr(v) if isinstance(v, float) else str(v) for v in row))
    _atomic_write(path, "\n".join(out) + "\n")


def run_plan(scenario: ScenarioSpec, grid: SamplingGrid):
    """Solve one scenario; returns (exit_code, artifact dict, pose, T)."""
    problem = build_problem(scenario)
    x0 = initial_guess(scenario)
    x, report = solve(problem, x0, scenario.solver)
    pose, T = unpack(x, problem.layout)
    verification = verify_solution(
        pose,
        scenario.bounds,
        problem.boundary,
        obstacles=scenario.obstacles,
        d_safe=scenario.d_safe,
        p_des=scenario.p_des,
        angles_des=(scenario.phi_des, scenario.theta_des, scenario.psi_des),
        grid=grid,
        tip_tol=scenario.tip_tol,
    )
    artifact = solution_to_json(
        pose, T, scenario.name, report.to_json_dict(), verification.to_json_dict()
    )
    if report.status not in ("optimal", "feasible-stalled"):
        return EXIT_INFEASIBLE, artifact, pose, T
    if not verification.verdict:
        return EXIT_VERIFY_FAIL, artifact, pose, T
    return EXIT_OK, artifact, pose, T


def cmd_plan(args) -> int:
    try:
        scenario = load_scenario(args.scenario)
        if args.orders:
            m, n = (int(v) for v in args.orders.split(","))
            scenario = with_orders(scenario, m, n)
        if args.seed is not None:
            scenario = replace(scenario, solver=replace(scenario.solver, seed=args.seed))
        grid = _parse_grid(args.grid)
    except ScenarioError as err:
        print(f"scenario error: {err}", file=sys.stderr)
        return EXIT_SCHEMA
    except OSError as err:
        print(f"cannot read scenario: {err}", file=sys.stderr)
        return EXIT_IO

    code, artifact, pose, _t = run_plan(scenario, grid)
    try:
        os.makedirs(args.out, exist_ok=True)
        _atomic_write(
            os.path.join(args.out, "solution.json"), json.dumps(artifact, indent=2)
        )
        _atomic_write(
            os.path.join(args.out, "report.json"),
            json.dumps(
                {
                    "solver_report": artifact["solver_report"],
                    "verification": artifact["verification"],
                },
                indent=2,
            ),
        )
        _write_trajectory_csv(os.path.join(args.out, "trajectory.csv"), pose, grid)
        _write_constraints_csv(
            os.path.join(args.out, "constraints.csv"), pose, scenario, grid
        )
    except OSError as err:
        print(f"cannot write outputs: {err}", file=sys.stderr)
        return EXIT_IO
    if not args.quiet:
        rep = artifact["solver_report"]
        ver = artifact["verification"]
        print(
            f"{scenario.name}: status={rep['status']} cost={rep['cost']:.4f} "
            f"T={artifact['T']:.3f} verification={ver['verdict']}"
        )
        if ver["failures"]:
            print("  failures: " + ", ".join(ver["failures"]))
    return code


def cmd_verify(args) -> int:
    try:
        with open(args.solution, "r", encoding="utf-8") as handle:
            artifact = json.load(handle)
        scenario = load_scenario(args.scenario)
        grid = _parse_grid(args.grid)
    except FileNotFoundError as err:
        print(f"missing file: {err}", file=sys.stderr)
        return EXIT_IO
    except (ScenarioError, json.JSONDecodeError) as err:
        print(f"schema error: {err}", file=sys.stderr)
        return EXIT_SCHEMA
    try:
        pose, _T = solution_from_json(artifact)
    except (KeyError, ValueError) as err:
        print(f"malformed solution: {err}", file=sys.stderr)
        return EXIT_SCHEMA
    if (pose.m, pose.n) != (scenario.m, scenario.n):
        print(
            f"order mismatch: solution ({pose.m},{pose.n}) vs scenario "
            f"({scenario.m},{scenario.n})",
            file=sys.stderr,
        )
        return EXIT_SCHEMA
    problem = build_problem(scenario)
    report = verify_solution(
        pose,
        scenario.bounds,
        problem.boundary,
        obstacles=scenario.obstacles,
        d_safe=scenario.d_safe,
        p_des=scenario.p_des,
        angles_des=(scenario.phi_des, scenario.theta_des, scenario.psi_des),
        grid=grid,
        tip_tol=scenario.tip_tol,
    )
    if not args.quiet:
        print(json.dumps(report.to_json_dict(), indent=2))
    return EXIT_OK if report.verdict else EXIT_VERIFY_FAIL


def cmd_eval(args) -> int:
    try:
        with open(args.solution, "r", encoding="utf-8") as handle:
            artifact = json.load(handle)
        pose, _T = solution_from_json(artifact)
    except FileNotFoundError as err:
        print(f"missing file: {err}", file=sys.stderr)
        return EXIT_IO
    except (KeyError, ValueError, json.JSONDecodeError) as err:
        print(f"malformed solution: {err}", file=sys.stderr)
        return EXIT_SCHEMA
    try:
        position = pose.p.evaluate(args.s, args.t)
        angles = [float(a.evaluate(args.s, args.t)) for a in pose.angles()]
    except DomainError as err:
        print(f"out of domain: {err}", file=sys.stderr)
        return EXIT_SCHEMA
    rotation = euler_to_rotation(*angles)
    print(f"position: {position.tolist()}")
    print(f"angles:   phi={angles[0]} theta={angles[1]} psi={angles[2]}")
    print("rotation:")
    for row in rotation:
        print("  " + " ".join(f"{v: .9f}" for v in row))
    return EXIT_OK


def cmd_sweep(args) -> int:
    try:
        scenario = load_scenario(args.scenario)
        orders = [int(v) for v in args.orders.split(",") if v.strip()]
        if not orders:
            raise ScenarioError("--orders", "need at least one order")
        grid = _parse_grid(args.grid)
    except ScenarioError as err:
        print(f"scenario error: {err}", file=sys.stderr)
        return EXIT_SCHEMA
    except (OSError, ValueError) as err:
        print(f"cannot read inputs: {err}", file=sys.stderr)
        return EXIT_IO

    rows = []
    warm = None  # (pose, T) of the previous feasible order
    for k in orders:
        t0 = time.perf_counter()
        try:
            scen_k = with_orders(scenario, k, k)
            problem = build_problem(scen_k)
            if warm is not None and not args.cold:
                prev_pose, prev_T = warm
                lifted = PoseSurfaces(
                    prev_pose.p.elevate(k, k),
                    prev_pose.phi.elevate(k, k),
                    prev_pose.theta.elevate(k, k),
                    prev_pose.psi.elevate(k, k),
                )
                x0 = pack(lifted, prev_T)
            else:
                x0 = initial_guess(scen_k)
            x, report = solve(problem, x0, scen_k.solver)
            pose, T = unpack(x, problem.layout)
            verification = verify_solution(
                pose,
                scen_k.bounds,
                problem.boundary,
                obstacles=scen_k.obstacles,
                d_safe=scen_k.d_safe,
                p_des=scen_k.p_des,
                angles_des=(scen_k.phi_des, scen_k.theta_des, scen_k.psi_des),
                grid=grid,
                tip_tol=scen_k.tip_tol,
            )
            worst = max(
                max(verification.feasibility_violations.values()),
                max(verification.boundary_max.values()),
            )
            feasible = report.status in ("optimal", "feasible-stalled")
            rows.append(
                [k, k, report.cost, time.perf_counter() - t0, worst,
                 report.status, verification.tip_position_error]
            )
            if feasible:
                warm = (pose, T)
            if not args.quiet:
                print(
                    f"m=n={k}: status={report.status} cost={report.cost:.4f} "
                    f"tip_err={verification.tip_position_error:.4f}"
                )
        except (ScenarioError, ValueError) as err:
            rows.append([k, k, float("nan"), time.perf_counter() - t0,
                         float("nan"), f"error: {err}", float("nan")])
            if not args.quiet:
                print(f"m=n={k}: error: {err}")
    try:
        os.makedirs(args.out, exist_ok=True)
        _write_csv(
            os.path.join(args.out, "sweep.csv"),
            ["m", "n", "cost", "wall_time", "worst_violation", "status", "tip_error"],
            rows,
        )
    except OSError as err:
        print(f"cannot write sweep outputs: {err}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rodplan",
        description="Plan collision-free, dynamically feasible continuum rod motions.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    plan = sub.add_parser("plan", help="solve a scenario and write solution artifacts")
    plan.add_argument("scenario", help="scenario JSON file")
    plan.add_argument("--out", default="out", help="output directory")
    plan.add_argument("--grid", default="101x101", help="verification lattice NSxNT")
    plan.add_argument("--seed", type=int, default=None, help="override solver seed")
    plan.add_argument("--orders", default=None, help="override surface orders as M,N")
    plan.add_argument("--quiet", action="store_true")
    plan.set_defaults(func=cmd_plan)

    verify = sub.add_parser("verify", help="re-verify a solution file independently")
    verify.add_argument("solution", help="solution JSON file")
    verify.add_argument("scenario", help="scenario JSON file")
    verify.add_argument("--grid", default="201x201")
    verify.add_argument("--quiet", action="store_true")
    verify.set_defaults(func=cmd_verify)

    evaluate = sub.add_parser("eval", help="evaluate a solution at one (s, t)")
    evaluate.add_argument("solution")
    evaluate.add_argument("s", type=float)
    evaluate.add_argument("t", type=float)
    evaluate.set_defaults(func=cmd_eval)

    sweep = sub.add_parser("sweep", help="plan over a ladder of surface orders")
    sweep.add_argument("scenario")
    sweep.add_argument("--orders", default="3,4,5", help="comma-separated orders")
    sweep.add_argument("--out", default="out")
    sweep.add_argument("--grid", default="101x101")
    sweep.add_argument("--cold", action="store_true",
                       help="disable warm starts between orders")
    sweep.add_argument("--quiet", action="store_true")
    sweep.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
