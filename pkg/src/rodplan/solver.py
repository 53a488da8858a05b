"""Reference augmented-Lagrangian solver with quasi-Newton inner iterations.

Equality residuals enter through classical multiplier/penalty terms;
inequality residuals (wanted nonnegative) through the clipped quadratic
penalty, so inactive constraints contribute nothing.  Inner minimization is
scipy's bounded L-BFGS-B on a fused value-and-gradient callable.  Multipliers
update every outer iteration; the penalty grows only when the joint
violation/complementarity measure stops halving.  The cost is normalized by
the largest weight before iterating, which makes the iterate path invariant
under uniform weight rescaling; reported figures are recomputed unnormalized
from the returned point.

Everything is deterministic given (x0, options); the seed field is recorded
for provenance but no randomness is used.  BLAS pools are pinned to one
thread during the solve: the tensor contractions here are far too small to
gain from threading and oversubscription slows them badly.
"""

from __future__ import annotations

import time
from contextlib import nullcontext
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .transcription import CostSpec

try:
    from threadpoolctl import threadpool_limits
except ImportError:  # pragma: no cover
    threadpool_limits = None

__all__ = ["SolverOptions", "SolverReport", "solve"]


@dataclass
class SolverOptions:
    tol_eq: float = 1e-6
    tol_ineq: float = 1e-6
    max_iter: int = 500  # outer iterations
    inner_max_iter: int = 400
    T_min: float = 0.1
    T_max: float = 60.0
    seed: int = 0
    rho0: float = 10.0
    rho_growth: float = 5.0
    rho_max: float = 1e10
    multiplier_max: float = 1e10
    clearance_grad: str = "witness"  # or 'fd' per the documented Jacobian contract
    verbose: bool = False

    def to_json_dict(self) -> dict:
        return {
            "tol_eq": self.tol_eq,
            "tol_ineq": self.tol_ineq,
            "max_iter": self.max_iter,
            "T_min": self.T_min,
            "T_max": self.T_max,
            "seed": self.seed,
        }


@dataclass
class SolverReport:
    status: str  # optimal | feasible-stalled | infeasible | iteration-limit
    cost: float
    max_eq_violation: float
    min_ineq_residual: float
    iterations: int
    wall_time: float
    inner_evaluations: int = 0
    seed: int = 0
    message: str = ""

    def to_json_dict(self) -> dict:
        return {
            "status": self.status,
            "cost": self.cost,
            "max_eq_violation": self.max_eq_violation,
            "min_ineq_residual": self.min_ineq_residual,
            "iterations": self.iterations,
            "wall_time": self.wall_time,
            "inner_evaluations": self.inner_evaluations,
            "seed": self.seed,
            "message": self.message,
        }


def _violations(eq: np.ndarray, ineq: np.ndarray) -> tuple[float, float]:
    v_eq = float(np.abs(eq).max()) if eq.size else 0.0
    v_in = float(np.maximum(-ineq, 0.0).max()) if ineq.size else 0.0
    return v_eq, v_in


def solve(problem, x0: np.ndarray, opts: SolverOptions | None = None):
    """Minimize the problem cost subject to its residual contracts.

    Returns (x, SolverReport).  The report's violation figures are recomputed
    from the returned point through the problem's reference evaluators, never
    taken from solver state.
    """
    opts = opts or SolverOptions()
    t_start = time.perf_counter()

    def report(status, x, iterations, inner_evals, message=""):
        eq = problem.eq_residuals(x)
        ineq = problem.ineq_residuals(x)  # uncapped reference clearances
        v_eq, _ = _violations(eq, ineq)
        return SolverReport(
            status=status,
            cost=float(problem.cost(x)),
            max_eq_violation=v_eq,
            min_ineq_residual=float(ineq.min()) if ineq.size else 0.0,
            iterations=iterations,
            wall_time=time.perf_counter() - t_start,
            inner_evaluations=inner_evals,
            seed=opts.seed,
            message=message,
        )

    x0 = np.asarray(x0, dtype=float).copy()
    idx_T = problem.layout.index_T
    if not (0 < opts.T_min < opts.T_max):
        x0[idx_T] = max(x0[idx_T], 1e-6)
        return x0, report("infeasible", x0, 0, 0, message="inconsistent T bounds")
    x0[idx_T] = min(max(x0[idx_T], opts.T_min), opts.T_max)
    try:
        problem.bounds.validate()
    except ValueError as err:
        return x0, report("infeasible", x0, 0, 0, message=str(err))
    if not np.isfinite(problem.cost(x0)):
        raise ValueError("cost is not finite at the initial point")

    # normalize the tracking weights up front so uniformly rescaled weights
    # produce bitwise-identical iterate paths (a generic running cost cannot
    # be pre-normalized, so it divides at evaluation instead)
    spec0 = problem.cost_spec
    if spec0.running_cost is None:
        s = spec0.weight_scale
        problem.cost_spec = CostSpec(
            spec0.w1 / s,
            spec0.w2 / s,
            spec0.w3 / s,
            spec0.w4 / s,
            spec0.p_des,
            spec0.phi_des,
            spec0.theta_des,
            spec0.psi_des,
            w_T=spec0.w_T / s,
        )
        scale = 1.0
    else:
        scale = spec0.weight_scale
    bounds = [(None, None)] * (problem.dimension - 1) + [(opts.T_min, opts.T_max)]

    lam = np.zeros(problem.n_eq)
    mu = np.zeros(problem.n_ineq)
    rho = opts.rho0
    eq_jac = problem.eq_jacobian()

    def al_fun(x):
        ev = problem.evaluate(x, clearance_mode=opts.clearance_grad)
        ceq, g = ev.eq, ev.ineq
        y = np.maximum(0.0, mu - rho * g)
        value = (
            ev.cost / scale
            - lam @ ceq
            + 0.5 * rho * float(ceq @ ceq)
            + (float(y @ y) - float(mu @ mu)) / (2.0 * rho)
        )
        grad = ev.cost_grad / scale + eq_jac.T @ (rho * ceq - lam)
        if y.any():
            grad -= problem.ineq_vjp(ev, y)
        return value, grad

    x = x0
    best_x = None
    best_cost = np.inf
    sigma_prev = np.inf
    prev_cost = None
    feas_streak = 0
    inner_evals = 0
    status = "iteration-limit"
    message = ""
    outer = 0
    pool_guard = (
        threadpool_limits(limits=1) if threadpool_limits is not None else nullcontext()
    )

    # a feasible start is an incumbent the solve may never lose, and its
    # least-squares multiplier estimate keeps the first inner solve from
    # trading feasibility for cost (critical for warm starts)
    eq0 = problem.eq_residuals(x0)
    g0 = problem.ineq_residuals(x0, capped=True)
    v_eq0, v_in0 = _violations(eq0, g0)
    if v_eq0 <= opts.tol_eq and v_in0 <= opts.tol_ineq:
        best_x = x0.copy()
        best_cost = float(problem.cost(x0))
        grad0 = problem.cost_gradient(x0) / scale
        active = g0 <= 1e-5
        columns = [eq_jac.T]
        if active.any():
            ineq_jac = problem.ineq_jacobian(x0, clearance_mode=opts.clearance_grad)
            columns.append(ineq_jac[active].T)
        stacked = np.hstack(columns)
        estimate, *_ = np.linalg.lstsq(stacked, grad0, rcond=None)
        lam = estimate[: problem.n_eq]
        if active.any():
            mu[active] = np.maximum(estimate[problem.n_eq :], 0.0)

    eps_final = getattr(problem, "epsilon", None)
    try:
        with pool_guard:
            for outer in range(1, opts.max_iter + 1):
                gtol = max(1e-8, 1e-4 * 0.25 ** (outer - 1))
                if eps_final is not None:
                    # coarse separation searches early, scenario accuracy late
                    problem.solve_epsilon = max(eps_final, 1e-3 * 0.3 ** (outer - 1))
                res = minimize(
                    al_fun,
                    x,
                    jac=True,
                    method="L-BFGS-B",
                    bounds=bounds,
                    options={
                        "maxiter": min(opts.inner_max_iter, 60 * outer + 60),
                        "maxcor": 25,
                        "ftol": 1e-16,
                        "gtol": gtol,
                    },
                )
                x = res.x
                inner_evals += res.nfev
                eq = problem.eq_residuals(x)
                g = problem.ineq_residuals(x, capped=True)
                v_eq, v_in = _violations(eq, g)
                feasible = v_eq <= opts.tol_eq and v_in <= opts.tol_ineq
                cost = float(problem.cost(x))
                if opts.verbose:
                    print(
                        f"[outer {outer:3d}] cost={cost:.6e} v_eq={v_eq:.2e} "
                        f"v_in={v_in:.2e} rho={rho:.1e} nfev={res.nfev}"
                    )
                if not np.isfinite(cost):
                    raise ValueError("cost became non-finite during the solve")
                if feasible:
                    if cost < best_cost - 1e-15:
                        best_cost = cost
                        best_x = x.copy()
                    if prev_cost is not None and abs(prev_cost - cost) <= 1e-6 * (
                        1.0 + abs(cost)
                    ):
                        feas_streak += 1
                    else:
                        feas_streak = 0
                    prev_cost = cost
                    if feas_streak >= 2:
                        status = "optimal"
                        break
                else:
                    prev_cost = None
                    feas_streak = 0
                # first-order multiplier updates every outer iteration
                lam = np.clip(
                    lam - rho * eq, -opts.multiplier_max, opts.multiplier_max
                )
                mu = np.clip(np.maximum(0.0, mu - rho * g), 0.0, opts.multiplier_max)
                comp = float(np.abs(np.minimum(g, mu / rho)).max()) if g.size else 0.0
                sigma = max(v_eq, comp)
                if outer > 1 and sigma > 0.5 * sigma_prev:
                    if (
                        rho >= opts.rho_max
                        and not feasible
                        and sigma > 0.99 * sigma_prev
                    ):
                        status = "infeasible" if best_x is None else "feasible-stalled"
                        message = "penalty at cap without feasibility progress"
                        break
                    rho = min(rho * opts.rho_growth, opts.rho_max)
                sigma_prev = max(sigma, 1e-300)
            else:
                status = "feasible-stalled" if best_x is not None else "iteration-limit"
    finally:
        problem.cost_spec = spec0
        if eps_final is not None:
            problem.solve_epsilon = eps_final

    if status in ("optimal", "feasible-stalled") and best_x is not None:
        x = best_x
    return x, report(status, x, outer, inner_evals, message=message)
