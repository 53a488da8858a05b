import numpy as np
import pytest

from rodplan.rod import BoundarySpec, FeasibilityBounds, straight_edge, straight_pose
from rodplan.solver import SolverOptions, solve
from rodplan.transcription import CostSpec, DecisionLayout, NlpProblem, pack, unpack

LOOSE_BOUNDS = FeasibilityBounds(0.5, 1.5, 0.5, 4 * np.pi, np.pi, 8.0, 0.5)


def tiny_problem(p_des=(0.05, 0.1, 0.55), bounds=LOOSE_BOUNDS, w=(1e4, 10.0, 10.0, 10.0)):
    m = n = 2
    L = 0.6
    layout = DecisionLayout(m, n, L)
    boundary = BoundarySpec(
        straight_edge(L, m), np.zeros(m + 1), np.zeros(m + 1), np.zeros(m + 1)
    )
    spec = CostSpec(*w, np.asarray(p_des), -0.2, 0.3, 0.1)
    return NlpProblem(
        layout, spec, bounds, boundary, m_e=2 * m, n_e=2 * n, T_bounds=(1.0, 30.0)
    )


def feasible_start(prob, T=2.0):
    return pack(straight_pose(prob.layout.length, T, prob.layout.m, prob.layout.n), T)


class TestSolveBasics:
    def test_already_optimal_point_returned_unchanged(self):
        # target equals the static tip, all weights pull to the start: the
        # starting point is feasible with zero cost gradient
        prob = tiny_problem(p_des=(0.0, 0.0, 0.6), w=(1e4, 10.0, 10.0, 10.0))
        prob.cost_spec.phi_des = 0.0
        prob.cost_spec.theta_des = 0.0
        prob.cost_spec.psi_des = 0.0
        x0 = feasible_start(prob)
        x, report = solve(prob, x0, SolverOptions(T_min=1.0, T_max=30.0))
        assert report.status == "optimal"
        assert report.iterations <= 4
        np.testing.assert_allclose(x, x0, atol=1e-12)

    def test_inconsistent_bounds_infeasible_before_iterating(self):
        prob = tiny_problem(bounds=FeasibilityBounds(2.0, 1.0, 0.5, 1, 1, 1, 1))
        x0 = feasible_start(prob)
        x, report = solve(prob, x0, SolverOptions(T_min=1.0, T_max=30.0))
        assert report.status == "infeasible"
        assert report.iterations == 0

    def test_bad_T_box_infeasible(self):
        prob = tiny_problem()
        x0 = feasible_start(prob)
        _, report = solve(prob, x0, SolverOptions(T_min=5.0, T_max=1.0))
        assert report.status == "infeasible"

    def test_small_solve_reaches_target(self):
        prob = tiny_problem()
        x0 = feasible_start(prob)
        opts = SolverOptions(T_min=1.0, T_max=30.0)
        x, report = solve(prob, x0, opts)
        assert report.status in ("optimal", "feasible-stalled")
        assert report.max_eq_violation <= opts.tol_eq
        assert report.min_ineq_residual >= -opts.tol_ineq
        pose, T = unpack(x, prob.layout)
        tip = pose.p.evaluate(prob.layout.length, T)
        assert np.linalg.norm(tip - prob.cost_spec.p_des) < 0.05

    def test_report_figures_recomputed_from_solution(self):
        prob = tiny_problem()
        x0 = feasible_start(prob)
        x, report = solve(prob, x0, SolverOptions(T_min=1.0, T_max=30.0))
        eq = prob.eq_residuals(x)
        ineq = prob.ineq_residuals(x)
        assert report.max_eq_violation == pytest.approx(
            np.abs(eq).max(), abs=1e-12
        )
        assert report.min_ineq_residual == pytest.approx(ineq.min(), abs=1e-12)
        assert report.cost == pytest.approx(prob.cost(x), abs=1e-12)


class TestSolveInvariances:
    def test_weight_scale_invariance(self):
        opts = SolverOptions(T_min=1.0, T_max=30.0)
        prob_a = tiny_problem(w=(1e4, 10.0, 10.0, 10.0))
        x_a, rep_a = solve(prob_a, feasible_start(prob_a), opts)
        prob_b = tiny_problem(w=(1e5, 100.0, 100.0, 100.0))
        x_b, rep_b = solve(prob_b, feasible_start(prob_b), opts)
        np.testing.assert_allclose(x_a, x_b, atol=1e-10)
        assert rep_b.cost == pytest.approx(10 * rep_a.cost, rel=1e-9)

    def test_determinism(self):
        opts = SolverOptions(T_min=1.0, T_max=30.0, seed=7)
        runs = []
        for _ in range(2):
            prob = tiny_problem()
            runs.append(solve(prob, feasible_start(prob), opts))
        (x1, rep1), (x2, rep2) = runs
        assert rep1.iterations == rep2.iterations
        assert rep1.inner_evaluations == rep2.inner_evaluations
        np.testing.assert_allclose(x1, x2, atol=1e-10)
        assert rep1.seed == 7
