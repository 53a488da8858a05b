import numpy as np
import pytest

from rodplan.bernstein import BernsteinSurface
from rodplan.geometry import Sphere
from rodplan.rod import (
    BoundarySpec,
    FeasibilityBounds,
    PoseSurfaces,
    boundary_residuals,
    constraint_surfaces,
    feasibility_residuals,
    straight_edge,
    straight_pose,
)
from rodplan.solver import SolverOptions
from rodplan.transcription import (
    CostSpec,
    DecisionLayout,
    NlpProblem,
    bernstein_basis,
    initial_guess,
    pack,
    unpack,
)

CASE1_BOUNDS = FeasibilityBounds(0.85, 1.15, 0.25, 2 * np.pi, np.pi / 4, 2.0, 0.075)


def make_problem(m=3, n=3, L=0.6, obstacles=(), **kw):
    layout = DecisionLayout(m, n, L)
    boundary = BoundarySpec(
        straight_edge(L, m), np.zeros(m + 1), np.zeros(m + 1), np.zeros(m + 1)
    )
    spec = CostSpec(
        1e5, 1e3, 1e3, 1e2, [0.1, 0.425, 0.55], -np.pi / 4, np.pi / 4, 3 * np.pi / 4
    )
    return NlpProblem(
        layout, spec, CASE1_BOUNDS, boundary, obstacles=obstacles, **kw
    )


def perturbed_x(prob, seed=0, scale=0.01, dT=0.0):
    rng = np.random.default_rng(seed)
    x = pack(straight_pose(prob.layout.length, 2.0, prob.layout.m, prob.layout.n), 2.0)
    x[:-1] += rng.normal(0, scale, prob.dimension - 1)
    x[-1] += dT
    return x


class FakeScenario:
    def __init__(self, m=3, n=3, L=0.6, p_des=(0.1, 0.425, 0.55), obstacles=()):
        self.m, self.n, self.L = m, n, L
        self.bounds = CASE1_BOUNDS
        self.p_des = np.asarray(p_des, dtype=float)
        self.phi_des, self.theta_des, self.psi_des = -np.pi / 4, np.pi / 4, 3 * np.pi / 4
        self.solver = SolverOptions(T_min=0.5, T_max=60.0)
        self.obstacles = obstacles
        self.d_safe = 0.02

    def initial_edges(self):
        z = np.zeros(self.m + 1)
        return straight_edge(self.L, self.m), z, z.copy(), z.copy()


class TestPackUnpack:
    def test_round_trip_bitwise(self):
        rng = np.random.default_rng(40)
        m, n, L, T = 4, 3, 0.6, 2.5
        pose = straight_pose(L, T, m, n)
        cps = pose.p.control_points + rng.normal(0, 0.1, pose.p.control_points.shape)
        pose = PoseSurfaces(
            BernsteinSurface(cps, (0, L), (0, T)), pose.phi, pose.theta, pose.psi
        )
        x = pack(pose, T)
        again, T2 = unpack(x, DecisionLayout(m, n, L))
        assert T2 == T
        assert (again.p.control_points == cps).all()
        assert (again.phi.control_points == pose.phi.control_points).all()

    def test_layout_contract(self):
        layout = DecisionLayout(5, 5, 0.6)
        assert layout.p_index(0, 0, 0) == 0
        assert layout.size == 6 * 36 + 1 == 217
        assert layout.index_T == 216

    def test_size_mismatch(self):
        with pytest.raises(ValueError):
            unpack(np.zeros(10), DecisionLayout(3, 3, 0.6))


class TestCost:
    def test_zero_at_target_edge(self):
        prob = make_problem()
        layout = prob.layout
        x = np.zeros(layout.size)
        grid = x[: 3 * layout.grid].reshape(layout.m + 1, layout.n + 1, 3)
        grid[-1, :, :] = prob.cost_spec.p_des
        for k, val in enumerate(
            (prob.cost_spec.phi_des, prob.cost_spec.theta_des, prob.cost_spec.psi_des)
        ):
            off = layout.angle_offset(k)
            x[off : off + layout.grid].reshape(layout.m + 1, layout.n + 1)[-1, :] = val
        x[layout.index_T] = 3.0
        assert prob.cost(x) == pytest.approx(0.0, abs=1e-18)

    def test_constant_running_cost_integrates_to_LTc(self):
        c = 2.5
        layout = DecisionLayout(3, 4, 0.6)
        spec = CostSpec(
            1.0, 1.0, 1.0, 1.0, [0, 0, 0], 0, 0, 0,
            running_cost=lambda p, phi, theta, psi: c,
        )
        prob = NlpProblem(
            layout,
            spec,
            CASE1_BOUNDS,
            BoundarySpec(straight_edge(0.6, 3), *(np.zeros(4),) * 3),
        )
        x = np.zeros(layout.size)
        x[layout.index_T] = 2.0
        assert prob.cost(x) == pytest.approx(0.6 * 2.0 * c, rel=1e-12)

    def test_doubling_T_doubles_cost(self):
        prob = make_problem()
        x = perturbed_x(prob, seed=41)
        x2 = x.copy()
        x2[-1] = 2 * x[-1]
        assert prob.cost(x2) == pytest.approx(2 * prob.cost(x), rel=1e-12)

    def test_gradient_vs_central_differences(self):
        prob = make_problem()
        x = perturbed_x(prob, seed=42)
        g = prob.cost_gradient(x)
        fd = np.zeros_like(g)
        for k in range(prob.dimension):
            h = 1e-6 * (1 + abs(x[k]))
            xp, xm = x.copy(), x.copy()
            xp[k] += h
            xm[k] -= h
            fd[k] = (prob.cost(xp) - prob.cost(xm)) / (2 * h)
        err = np.abs(g - fd).max() / max(1.0, np.abs(g).max())
        assert err < 1e-5

    def test_gradient_zero_off_edge(self):
        prob = make_problem()
        x = perturbed_x(prob, seed=43)
        g = prob.cost_gradient(x)
        layout = prob.layout
        gp = g[: 3 * layout.grid].reshape(layout.m + 1, layout.n + 1, 3)
        np.testing.assert_allclose(gp[:-1], 0.0)
        for k in range(3):
            off = layout.angle_offset(k)
            ga = g[off : off + layout.grid].reshape(layout.m + 1, layout.n + 1)
            np.testing.assert_allclose(ga[:-1], 0.0)

    def test_gradient_zero_at_zero_cost_pose(self):
        prob = make_problem()
        layout = prob.layout
        x = np.zeros(layout.size)
        grid = x[: 3 * layout.grid].reshape(layout.m + 1, layout.n + 1, 3)
        grid[-1, :, :] = prob.cost_spec.p_des
        for k, val in enumerate(
            (prob.cost_spec.phi_des, prob.cost_spec.theta_des, prob.cost_spec.psi_des)
        ):
            off = layout.angle_offset(k)
            x[off : off + layout.grid].reshape(layout.m + 1, layout.n + 1)[-1, :] = val
        x[layout.index_T] = 3.0
        g = prob.cost_gradient(x)
        np.testing.assert_allclose(g[:-1], 0.0, atol=1e-15)


class TestResidualEvaluators:
    def test_feasibility_matches_rod_reference(self):
        prob = make_problem()
        x = perturbed_x(prob, seed=44, dT=0.7)
        pose, _t = unpack(x, prob.layout)
        cs = constraint_surfaces(pose, prob.m_e, prob.n_e)
        ref = feasibility_residuals(cs, prob.bounds)
        np.testing.assert_allclose(prob.ineq_residuals(x), ref, atol=1e-9)

    def test_equality_matches_rod_reference(self):
        prob = make_problem()
        x = perturbed_x(prob, seed=45)
        pose, _t = unpack(x, prob.layout)
        np.testing.assert_allclose(
            prob.eq_residuals(x), boundary_residuals(pose, prob.boundary), atol=1e-14
        )

    def test_ineq_jacobian_vs_central_differences(self):
        prob = make_problem()
        x = perturbed_x(prob, seed=46, dT=0.4)
        jac = prob.ineq_jacobian(x)
        for k in range(0, prob.dimension, 17):
            h = 1e-6 * (1 + abs(x[k]))
            xp, xm = x.copy(), x.copy()
            xp[k] += h
            xm[k] -= h
            fd = (prob.ineq_residuals(xp) - prob.ineq_residuals(xm)) / (2 * h)
            np.testing.assert_allclose(jac[:, k], fd, atol=1e-4 * max(1, np.abs(fd).max()))

    def test_vjp_matches_jacobian(self):
        prob = make_problem()
        x = perturbed_x(prob, seed=47, dT=0.2)
        jac = prob.ineq_jacobian(x)
        w = np.random.default_rng(5).uniform(size=prob.n_ineq)
        ev = prob.evaluate(x)
        np.testing.assert_allclose(prob.ineq_vjp(ev, w), jac.T @ w, atol=1e-10)

    def test_clearance_fd_vs_witness_rows(self):
        ball = Sphere([0.3, 0.3, 0.4], 0.15)
        prob = make_problem(obstacles=(ball,), clearance_cap_margin=None)
        x = perturbed_x(prob, seed=48, scale=0.005)
        jac_fd = prob.ineq_jacobian(x, clearance_mode="fd")
        jac_w = prob.ineq_jacobian(x, clearance_mode="witness")
        row_fd = jac_fd[-1]
        row_w = jac_w[-1]
        # directions agree; envelope vs differenced magnitudes within tolerance
        denom = max(np.abs(row_fd).max(), 1e-9)
        assert np.abs(row_fd - row_w).max() / denom < 0.05

    def test_clearance_depends_only_on_position_block(self):
        ball = Sphere([0.3, 0.3, 0.4], 0.15)
        prob = make_problem(obstacles=(ball,), clearance_cap_margin=None)
        x = perturbed_x(prob, seed=49, scale=0.005)
        jac = prob.ineq_jacobian(x, clearance_mode="fd")
        row = jac[-1]
        np.testing.assert_allclose(row[3 * prob.layout.grid :], 0.0, atol=1e-12)


class TestBernsteinBasisHelper:
    def test_partition_of_unity(self):
        for u in (0.0, 0.3, 1.0):
            b = bernstein_basis(5, u)
            assert b.sum() == pytest.approx(1.0, abs=1e-14)

    def test_endpoints(self):
        b = bernstein_basis(4, 0.0)
        np.testing.assert_allclose(b, [1, 0, 0, 0, 0], atol=1e-15)
        b = bernstein_basis(4, 1.0)
        np.testing.assert_allclose(b, [0, 0, 0, 0, 1], atol=1e-15)


class TestInitialGuess:
    def test_static_when_target_is_initial_tip(self):
        scen = FakeScenario(p_des=(0.0, 0.0, 0.6))
        scen.phi_des = scen.theta_des = scen.psi_des = 0.0
        x0 = initial_guess(scen)
        layout = DecisionLayout(scen.m, scen.n, scen.L)
        pose, T = unpack(x0, layout)
        static = straight_pose(scen.L, T, scen.m, scen.n)
        np.testing.assert_allclose(
            pose.p.control_points, static.p.control_points, atol=1e-12
        )
        assert T == scen.solver.T_min

    def test_boundary_blocks_a_and_c_exact(self):
        scen = FakeScenario()
        x0 = initial_guess(scen)
        layout = DecisionLayout(scen.m, scen.n, scen.L)
        pose, _t = unpack(x0, layout)
        boundary = BoundarySpec(
            *scen.initial_edges(), rest_start=False
        )
        np.testing.assert_allclose(boundary_residuals(pose, boundary), 0.0, atol=1e-15)

    def test_case1_time_seed(self):
        scen = FakeScenario(m=5, n=5)
        x0 = initial_guess(scen)
        gap = np.linalg.norm(scen.p_des - np.array([0.0, 0.0, 0.6]))
        assert x0[-1] == pytest.approx(gap / scen.bounds.q_max, rel=1e-12)

    def test_obstacle_push_keeps_guess_clear(self):
        ball = Sphere([0.05, 0.25, 0.25], 0.20)
        scen = FakeScenario(m=5, n=5, p_des=(0.05, 0.375, 0.475), obstacles=(ball,))
        x0 = initial_guess(scen)
        layout = DecisionLayout(scen.m, scen.n, scen.L)
        pose, _t = unpack(x0, layout)
        cps = pose.p.control_points.reshape(-1, 3)
        assert ball.signed_distance(cps).min() >= scen.d_safe - 1e-12
