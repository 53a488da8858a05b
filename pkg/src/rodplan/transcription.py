"""Finite transcription of the rod planning problem over surface control points.

The decision vector stacks the position control grid, the three Euler-angle
grids, and the free final time T.  Equality residuals (boundary data) are
linear in the control points; feasibility residuals are quadratic forms whose
constant kernels are precomputed per (orders, length) so both values and
exact Jacobians come from small tensor contractions; obstacle clearances are
black-box branch-and-bound distances differentiated either through their
closest-approach witness or by forward differences.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from math import comb

import numpy as np

from .bernstein import BernsteinSurface, elevation_matrix
from .geometry import SeparationQuery, min_dist, min_dist_witness
from .rod import (
    BoundarySpec,
    FeasibilityBounds,
    PoseSurfaces,
    boundary_residuals,
)

__all__ = [
    "CostSpec",
    "DecisionLayout",
    "NlpProblem",
    "initial_guess",
    "pack",
    "unpack",
]


@dataclass(frozen=True)
class DecisionLayout:
    """Index map for the flat decision vector.

    Blocks in order: position control points (i, j, component) row-major,
    then phi, theta, psi grids row-major, then T.  p[0,0].x sits at index 0.
    """

    m: int
    n: int
    length: float

    @property
    def grid(self) -> int:
        return (self.m + 1) * (self.n + 1)

    @property
    def size(self) -> int:
        return 6 * self.grid + 1

    @property
    def index_T(self) -> int:
        return 6 * self.grid

    def p_index(self, i: int, j: int, d: int) -> int:
        return (i * (self.n + 1) + j) * 3 + d

    def angle_offset(self, which: int) -> int:
        return 3 * self.grid + which * self.grid

    def p_block(self, x: np.ndarray) -> np.ndarray:
        """Position block as (grid, 3)."""
        return x[: 3 * self.grid].reshape(self.grid, 3)

    def angle_block(self, x: np.ndarray, which: int) -> np.ndarray:
        off = self.angle_offset(which)
        return x[off : off + self.grid]


def pack(pose: PoseSurfaces, T: float) -> np.ndarray:
    """Flatten a pose bundle and final time into a decision vector."""
    parts = [pose.p.control_points.ravel()]
    parts.extend(s.control_points.ravel() for s in pose.angles())
    parts.append([float(T)])
    return np.concatenate(parts)


def unpack(x: np.ndarray, layout: DecisionLayout) -> tuple[PoseSurfaces, float]:
    """Rebuild the pose bundle; the time domain comes from the packed T."""
    x = np.asarray(x, dtype=float)
    if x.size != layout.size:
        raise ValueError(f"decision vector has size {x.size}, expected {layout.size}")
    m, n = layout.m, layout.n
    T = float(x[layout.index_T])
    s_dom, t_dom = (0.0, layout.length), (0.0, T)
    p = BernsteinSurface(x[: 3 * layout.grid].reshape(m + 1, n + 1, 3), s_dom, t_dom)
    angles = [
        BernsteinSurface(
            layout.angle_block(x, k).reshape(m + 1, n + 1), s_dom, t_dom
        )
        for k in range(3)
    ]
    return PoseSurfaces(p, *angles), T


@dataclass
class CostSpec:
    """Tip-tracking running cost plus optional knobs.

    The default instance integrates the squared tip pose error over time via
    the control-point quadrature of the s = L edge.  ``running_cost``, when
    given, replaces it with a generic per-control-point term under the full
    double quadrature.  ``w_T`` adds an explicit duration penalty.
    """

    w1: float
    w2: float
    w3: float
    w4: float
    p_des: np.ndarray
    phi_des: float
    theta_des: float
    psi_des: float
    w_T: float = 0.0
    running_cost: object | None = None  # callable(p, phi, theta, psi) -> float

    def __post_init__(self):
        self.p_des = np.asarray(self.p_des, dtype=float).reshape(3)
        if max(self.w1, self.w2, self.w3, self.w4, self.w_T) <= 0:
            raise ValueError("at least one cost weight must be positive")

    @property
    def weight_scale(self) -> float:
        return max(self.w1, self.w2, self.w3, self.w4, self.w_T, 1e-300)


def bernstein_basis(order: int, u: float) -> np.ndarray:
    """Basis values (B_0(u), ..., B_order(u)) on the unit interval."""
    b = np.zeros(order + 1)
    b[0] = 1.0
    for k in range(1, order + 1):
        b[1 : k + 1] = u * b[:k] + (1.0 - u) * b[1 : k + 1]
        b[0] *= 1.0 - u
    return b


# ----------------------------------------------------------------------------
# Quadratic-form kernels for the feasibility families
# ----------------------------------------------------------------------------


def _binoms(order: int) -> np.ndarray:
    return np.array([comb(order, i) for i in range(order + 1)], dtype=float)


@lru_cache(maxsize=16)
def _feasibility_kernels(m: int, n: int, m_e: int, n_e: int, length: float) -> dict:
    """Constant tensors G with coeffs_k = sum_c x_c^T G_k x_c per family.

    Built at unit duration; time-derivative families rescale by powers of T
    at evaluation.  Keys 's', 't', 'ss', 'tt' match first/second derivatives
    in each parameter.
    """
    grid = (m + 1) * (n + 1)
    basis = np.zeros((grid, m + 1, n + 1))
    basis.reshape(grid, grid)[np.arange(grid), np.arange(grid)] = 1.0

    def derive(grids: np.ndarray, axis: int, order: int, dom_len: float) -> np.ndarray:
        scale = order / dom_len
        return scale * np.diff(grids, axis=axis)

    factors = {
        "s": derive(basis, 1, m, length),
        "t": derive(basis, 2, n, 1.0),
        "ss": derive(derive(basis, 1, m, length), 1, m - 1, length),
        "tt": derive(derive(basis, 2, n, 1.0), 2, n - 1, 1.0),
    }

    kernels = {}
    for key, s_grids in factors.items():
        r0, r1 = s_grids.shape[1], s_grids.shape[2]
        weighted = s_grids * np.outer(_binoms(r0 - 1), _binoms(r1 - 1))
        out0, out1 = 2 * r0 - 1, 2 * r1 - 1
        conv = np.zeros((grid, grid, out0, out1))
        for q in range(r0):
            for r in range(r1):
                conv[:, :, q : q + r0, r : r + r1] += (
                    weighted[:, q, r][:, None, None, None] * weighted[None, :, :, :]
                )
        conv /= np.outer(_binoms(out0 - 1), _binoms(out1 - 1))
        e0 = elevation_matrix(out0 - 1, 2 * m_e)
        e1 = elevation_matrix(out1 - 1, 2 * n_e)
        lifted = np.einsum("pk,abpq,ql->abkl", e0, conv, e1, optimize=True)
        g = np.ascontiguousarray(
            lifted.reshape(grid, grid, -1).transpose(2, 0, 1)
        )
        g.setflags(write=False)
        kernels[key] = g
    return kernels


# family table: (name, kernel key, block kind, power of T in the coefficients,
# +1 when the residual is coeff - bound, -1 when it is bound - coeff)
_FAMILIES = (
    ("v_lo", "s", "p", 0, +1),
    ("v_hi", "s", "p", 0, -1),
    ("q", "t", "p", -2, -1),
    ("u", "s", "ang", 0, -1),
    ("w", "t", "ang", -2, -1),
    ("a", "ss", "p", 0, -1),
    ("at", "tt", "p", -4, -1),
)


@dataclass
class _Evaluation:
    """All per-point quantities the solver needs, computed once per x."""

    x: np.ndarray
    cost: float
    cost_grad: np.ndarray
    eq: np.ndarray
    ineq: np.ndarray
    half_jacs: dict  # family name -> list of (component block index range, y = G @ x_c)
    coeff_scaled: dict  # family name -> scaled coefficient vector
    clearance_rows: np.ndarray  # (n_obs, dim) gradient rows (witness mode)


class NlpProblem:
    """The finite program: cost, equality and inequality evaluators, bounds.

    Inequality residuals concatenate the seven feasibility families with one
    clearance residual per obstacle.  ``clearance_cap`` bounds the incoming
    branch-and-bound alpha so far-away obstacles return a plateau value; pass
    ``None`` to always resolve the true distance (used for reporting).
    """

    def __init__(
        self,
        layout: DecisionLayout,
        cost_spec: CostSpec,
        bounds: FeasibilityBounds,
        boundary: BoundarySpec,
        obstacles=(),
        d_safe: float = 1e-2,
        epsilon: float = 1e-4,
        m_e: int | None = None,
        n_e: int | None = None,
        T_bounds: tuple[float, float] = (0.1, 60.0),
        clearance_cap_margin: float | None = 0.05,
        max_depth: int = 40,
    ):
        self.layout = layout
        self.cost_spec = cost_spec
        self.bounds = bounds
        self.boundary = boundary
        self.obstacles = tuple(obstacles)
        self.d_safe = float(d_safe)
        self.epsilon = float(epsilon)
        self.m_e = layout.m * 2 if m_e is None else int(m_e)
        self.n_e = layout.n * 2 if n_e is None else int(n_e)
        self.T_bounds = (float(T_bounds[0]), float(T_bounds[1]))
        self.clearance_cap_margin = clearance_cap_margin
        self.max_depth = max_depth
        if self.m_e < layout.m or self.n_e < layout.n:
            raise ValueError("elevated orders below pose orders")
        self._kernels = _feasibility_kernels(
            layout.m, layout.n, self.m_e, self.n_e, layout.length
        )
        self._grid_out = (2 * self.m_e + 1) * (2 * self.n_e + 1)
        # flattened kernels as (n_out * N, N) for single-BLAS-call half products
        self._kernels_flat = {
            key: np.ascontiguousarray(g.reshape(-1, g.shape[2]))
            for key, g in self._kernels.items()
        }
        self._eq_matrix, self._eq_offset = self._build_eq_matrix()
        # warm-start state for the clearance searches (internal; sequences of
        # identical evaluations reproduce identical results)
        self._clearance_state = [
            {"p": None, "value": None, "plateau": False} for _ in self.obstacles
        ]
        # search tolerance used inside iterative solves; solvers may relax it
        # early and must restore it before convergence checks
        self.solve_epsilon = self.epsilon
        self._search_orders = (min(2 * layout.m, 12), min(2 * layout.n, 12))

    # -- dimensions ----------------------------------------------------------

    @property
    def dimension(self) -> int:
        return self.layout.size

    @property
    def n_eq(self) -> int:
        return self._eq_matrix.shape[0]

    @property
    def n_ineq(self) -> int:
        return 7 * self._grid_out + len(self.obstacles)

    def variable_bounds(self):
        bounds = [(None, None)] * (self.layout.size - 1)
        bounds.append(self.T_bounds)
        return bounds

    # -- cost ------------------------------------------------------------------

    def cost(self, x: np.ndarray) -> float:
        layout, spec = self.layout, self.cost_spec
        T = float(x[layout.index_T])
        if spec.running_cost is not None:
            return self._generic_cost(x, T)
        n = layout.n
        p = layout.p_block(x).reshape(layout.m + 1, layout.n + 1, 3)
        tip_p = p[-1]  # (n+1, 3)
        err = ((tip_p - spec.p_des) ** 2).sum(axis=1) * spec.w1
        for k, (w, target) in enumerate(
            ((spec.w2, spec.phi_des), (spec.w3, spec.theta_des), (spec.w4, spec.psi_des))
        ):
            ang = layout.angle_block(x, k).reshape(layout.m + 1, layout.n + 1)
            err = err + w * (ang[-1] - target) ** 2
        return float(T / (n + 1) * err.sum() + spec.w_T * T)

    def _generic_cost(self, x: np.ndarray, T: float) -> float:
        layout, spec = self.layout, self.cost_spec
        m, n = layout.m, layout.n
        p = layout.p_block(x).reshape(m + 1, n + 1, 3)
        angles = [layout.angle_block(x, k).reshape(m + 1, n + 1) for k in range(3)]
        weight = (layout.length / (m + 1)) * (T / (n + 1))
        total = 0.0
        for i in range(m + 1):
            for j in range(n + 1):
                total += spec.running_cost(
                    p[i, j], angles[0][i, j], angles[1][i, j], angles[2][i, j]
                )
        return float(weight * total + spec.w_T * T)

    def cost_gradient(self, x: np.ndarray) -> np.ndarray:
        layout, spec = self.layout, self.cost_spec
        if spec.running_cost is not None:
            return self._fd_cost_gradient(x)
        T = float(x[layout.index_T])
        m, n = layout.m, layout.n
        g = np.zeros(layout.size)
        p = layout.p_block(x).reshape(m + 1, n + 1, 3)
        tip_err = 0.0
        w_t = T / (n + 1)
        diff_p = p[-1] - spec.p_des
        tip_err += spec.w1 * (diff_p**2).sum()
        gp = g[: 3 * layout.grid].reshape(m + 1, n + 1, 3)
        gp[-1] = 2.0 * w_t * spec.w1 * diff_p
        for k, (w, target) in enumerate(
            ((spec.w2, spec.phi_des), (spec.w3, spec.theta_des), (spec.w4, spec.psi_des))
        ):
            ang = layout.angle_block(x, k).reshape(m + 1, n + 1)
            diff = ang[-1] - target
            tip_err += w * (diff**2).sum()
            off = layout.angle_offset(k)
            g[off : off + layout.grid].reshape(m + 1, n + 1)[-1] = 2.0 * w_t * w * diff
        g[layout.index_T] = tip_err / (n + 1) + spec.w_T
        return g

    def _fd_cost_gradient(self, x: np.ndarray) -> np.ndarray:
        g = np.zeros(self.layout.size)
        f0 = self.cost(x)
        for k in range(self.layout.size):
            h = 1e-6 * (1.0 + abs(x[k]))
            xp = x.copy()
            xp[k] += h
            g[k] = (self.cost(xp) - f0) / h
        return g

    # -- equality constraints ---------------------------------------------------

    def _build_eq_matrix(self):
        # boundary residuals are linear: probe the canonical basis exactly
        zero = np.zeros(self.layout.size)
        zero[self.layout.index_T] = 1.0  # any valid T; residuals ignore it
        base = self._boundary_of(zero)
        cols = []
        for k in range(self.layout.size):
            e = zero.copy()
            e[k] += 1.0
            cols.append(self._boundary_of(e) - base)
        return np.column_stack(cols), base

    def _boundary_of(self, x: np.ndarray) -> np.ndarray:
        pose, _ = unpack(x, self.layout)
        return boundary_residuals(pose, self.boundary)

    def eq_residuals(self, x: np.ndarray) -> np.ndarray:
        return self._eq_matrix @ x + self._eq_offset

    def eq_jacobian(self) -> np.ndarray:
        return self._eq_matrix

    # -- inequality constraints ---------------------------------------------------

    def _blocks(self, x: np.ndarray, kind: str) -> np.ndarray:
        """Component columns as one (N, 3) array."""
        if kind == "p":
            return self.layout.p_block(x)
        return np.stack(
            [self.layout.angle_block(x, k) for k in range(3)], axis=1
        )

    def _feasibility(self, x: np.ndarray):
        """Coefficient vectors, scaled coefficients, and half-Jacobians.

        The half-Jacobian of one family is y[k, a, c] = (G_k x_c)_a, so the
        coefficients are sum_c y[:, :, c] . x_c and the Jacobian is 2 y.
        """
        T = float(x[self.layout.index_T])
        grid = self.layout.grid
        half_jacs = {}
        coeffs = {}
        for name, key, kind, power, _sign in _FAMILIES:
            if name == "v_hi":
                continue  # shares the v_lo coefficients
            blocks = self._blocks(x, kind)  # (N, 3)
            y = (self._kernels_flat[key] @ blocks).reshape(-1, grid, 3)
            total = np.einsum("kac,ac->k", y, blocks)
            half_jacs[name] = y
            coeffs[name] = total * T**power
        coeffs["v_hi"] = coeffs["v_lo"]
        half_jacs["v_hi"] = half_jacs["v_lo"]
        return coeffs, half_jacs

    def _feasibility_residuals_from(self, coeffs: dict) -> np.ndarray:
        b = self.bounds
        limits = {
            "v_lo": b.v_min**2,
            "v_hi": b.v_max**2,
            "q": b.q_max**2,
            "u": b.u_max**2,
            "w": b.omega_max**2,
            "a": b.v_s_max**2,
            "at": b.q_t_max**2,
        }
        parts = []
        for name, _key, _kind, _power, sign in _FAMILIES:
            c = coeffs[name]
            parts.append(c - limits[name] if sign > 0 else limits[name] - c)
        return np.concatenate(parts)

    def clearance(self, x: np.ndarray, capped: bool = False) -> np.ndarray:
        """Per-obstacle residuals min_dist - d_safe at the packed pose."""
        if not self.obstacles:
            return np.zeros(0)
        pose, _ = unpack(x, self.layout)
        alpha = None
        if capped and self.clearance_cap_margin is not None:
            alpha = self.d_safe + self.clearance_cap_margin
        vals = [
            min_dist(
                SeparationQuery(
                    pose.p,
                    obs,
                    alpha=alpha,
                    epsilon=self.epsilon,
                    d_safe=self.d_safe,
                    max_depth=self.max_depth,
                )
            )
            - self.d_safe
            for obs in self.obstacles
        ]
        return np.asarray(vals)

    def ineq_residuals(self, x: np.ndarray, capped: bool = False) -> np.ndarray:
        coeffs, _ = self._feasibility(x)
        feas = self._feasibility_residuals_from(coeffs)
        if not self.obstacles:
            return feas
        return np.concatenate([feas, self.clearance(x, capped=capped)])

    # -- Jacobians -------------------------------------------------------------

    def _feasibility_jacobian(self, x: np.ndarray) -> np.ndarray:
        T = float(x[self.layout.index_T])
        coeffs, half_jacs = self._feasibility(x)
        layout = self.layout
        rows = []
        for name, _key, kind, power, sign in _FAMILIES:
            scale = T**power
            y = half_jacs[name]
            jac = np.zeros((self._grid_out, layout.size))
            for c in range(3):
                dcols = 2.0 * scale * y[:, :, c]
                if kind == "p":
                    idx = np.arange(layout.grid) * 3 + c
                else:
                    off = layout.angle_offset(c)
                    idx = off + np.arange(layout.grid)
                jac[:, idx] = dcols
            if power != 0:
                jac[:, layout.index_T] = power * coeffs[name] / T
            rows.append(sign * jac)
        return np.vstack(rows)

    def _clearance_witness_rows(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Clearance values and envelope-gradient rows at the witness points.

        Successive calls reuse the previous search per obstacle: control-point
        displacement bounds how much the surface (hence the separation) can
        have moved, so far-away obstacles skip the search and nearby ones
        start from a tightened incoming bound.
        """
        layout = self.layout
        eps = self.solve_epsilon
        pose, _ = unpack(x, layout)
        cps = pose.p.control_points.reshape(-1, 3)
        search_surface = pose.p.elevate(*self._search_orders)
        margin = self.clearance_cap_margin
        cap = None if margin is None else self.d_safe + margin
        values = np.zeros(len(self.obstacles))
        rows = np.zeros((len(self.obstacles), layout.size))
        for o, obs in enumerate(self.obstacles):
            state = self._clearance_state[o]
            drift = np.inf
            if state["p"] is not None:
                drift = float(np.linalg.norm(cps - state["p"], axis=1).max())
            if cap is not None and state["plateau"] and drift + eps < 0.5 * margin:
                values[o] = cap - self.d_safe  # still safely on the plateau
                continue
            alpha = cap
            if state["value"] is not None and np.isfinite(drift):
                warm = state["value"] + drift + 3.0 * eps
                alpha = warm if cap is None else min(cap, warm)
            dist, wit = min_dist_witness(
                SeparationQuery(
                    search_surface,
                    obs,
                    alpha=alpha,
                    epsilon=eps,
                    d_safe=self.d_safe,
                    max_depth=self.max_depth,
                )
            )
            near_field = max(4.0 * eps, 1e-3)
            if dist < near_field and hasattr(obs, "signed_distance"):
                # contact zone: the branch-and-bound value saturates at zero
                # inside the solid, so switch to the signed distance of the
                # deepest surface point, refined well below the tolerance
                sd_min, s_star, t_star, p_star = _deepest_surface_point(
                    pose.p, obs
                )
                state["p"] = cps.copy()
                state["value"] = max(float(sd_min), 0.0)
                state["plateau"] = False
                values[o] = float(sd_min) - self.d_safe
                direction = obs.signed_distance_gradient(p_star)
                self._set_clearance_row(rows[o], x, s_star, t_star, direction)
                continue
            state["p"] = cps.copy()
            state["value"] = dist
            state["plateau"] = cap is not None and dist >= cap - 1e-15
            values[o] = dist - self.d_safe
            if alpha is not None and dist >= alpha - 1e-15:
                continue  # plateau or unimproved bound: locally constant
            gap = wit.surface_point - wit.obstacle_point
            norm = np.linalg.norm(gap)
            if norm < 1e-12:
                continue
            self._set_clearance_row(rows[o], x, wit.s, wit.t, gap / norm)
        return values, rows

    def _set_clearance_row(self, row, x, s, t, direction):
        layout = self.layout
        bu = bernstein_basis(layout.m, s / layout.length)
        bw = bernstein_basis(layout.n, t / float(x[layout.index_T]))
        weights = np.outer(bu, bw).ravel()
        block = row[: 3 * layout.grid].reshape(layout.grid, 3)
        block[:, :] = weights[:, None] * direction[None, :]

    def _clearance_fd_rows(self, x: np.ndarray) -> np.ndarray:
        """Forward-difference clearance rows over the position block.

        Clearance depends only on the position control points, so angle and T
        columns are exactly zero.
        """
        base = self.clearance(x)
        rows = np.zeros((len(self.obstacles), self.layout.size))
        for k in range(3 * self.layout.grid):
            h = 1e-6 * (1.0 + abs(x[k]))
            xp = x.copy()
            xp[k] += h
            rows[:, k] = (self.clearance(xp) - base) / h
        return rows

    def ineq_jacobian(self, x: np.ndarray, clearance_mode: str = "fd") -> np.ndarray:
        """Jacobian of all inequality residuals.

        ``clearance_mode`` is 'fd' (forward differences, reference behavior)
        or 'witness' (envelope gradient at the closest approach).
        """
        feas = self._feasibility_jacobian(x)
        if not self.obstacles:
            return feas
        if clearance_mode == "fd":
            rows = self._clearance_fd_rows(x)
        elif clearance_mode == "witness":
            _, rows = self._clearance_witness_rows(x)
        else:
            raise ValueError(f"unknown clearance mode {clearance_mode!r}")
        return np.vstack([feas, rows])

    # -- fused evaluation for the solver ----------------------------------------

    def evaluate(self, x: np.ndarray, clearance_mode: str = "witness") -> _Evaluation:
        coeffs, half_jacs = self._feasibility(x)
        feas = self._feasibility_residuals_from(coeffs)
        if self.obstacles:
            if clearance_mode == "witness":
                cvals, crows = self._clearance_witness_rows(x)
            else:
                cvals = self.clearance(x, capped=True)
                crows = self._clearance_fd_rows(x)
            ineq = np.concatenate([feas, cvals])
        else:
            ineq = feas
            crows = np.zeros((0, self.layout.size))
        return _Evaluation(
            x=x.copy(),
            cost=self.cost(x),
            cost_grad=self.cost_gradient(x),
            eq=self.eq_residuals(x),
            ineq=ineq,
            half_jacs=half_jacs,
            coeff_scaled=coeffs,
            clearance_rows=crows,
        )

    def ineq_vjp(self, ev: _Evaluation, weights: np.ndarray) -> np.ndarray:
        """Jacobian-transpose product of the inequality residuals.

        Exact for the feasibility families; clearance rows use the gradient
        rows captured in the evaluation.
        """
        layout = self.layout
        T = float(ev.x[layout.index_T])
        out = np.zeros(layout.size)
        k0 = 0
        for name, _key, kind, power, sign in _FAMILIES:
            w = weights[k0 : k0 + self._grid_out]
            k0 += self._grid_out
            if not w.any():
                continue
            scale = sign * 2.0 * T**power
            y = ev.half_jacs[name]
            contrib = scale * np.einsum("kac,k->ac", y, w)
            if kind == "p":
                out[: 3 * layout.grid].reshape(layout.grid, 3)[:, :] += contrib
            else:
                for c in range(3):
                    off = layout.angle_offset(c)
                    out[off : off + layout.grid] += contrib[:, c]
            if power != 0:
                out[layout.index_T] += sign * power * (w @ ev.coeff_scaled[name]) / T
        if self.obstacles:
            w = weights[k0:]
            out += w @ ev.clearance_rows
        return out

def _deepest_surface_point(position, obstacle, coarse: int = 49):
    """Minimum of the obstacle's signed distance over a position surface.

    Coarse lattice scan followed by a shrinking 3x3 pattern search; returns
    (signed distance, s, t, surface point) at the refined minimizer.
    """
    s_lo, s_hi = position.s_domain
    t_lo, t_hi = position.t_domain
    ss = np.linspace(s_lo, s_hi, coarse)
    ts = np.linspace(t_lo, t_hi, coarse)
    pts = position.evaluate_grid(ss, ts)
    sd = obstacle.signed_distance(pts.reshape(-1, 3)).reshape(coarse, coarse)
    si, tj = np.unravel_index(int(np.argmin(sd)), sd.shape)
    s, t = float(ss[si]), float(ts[tj])
    best = float(sd[si, tj])
    hs = (s_hi - s_lo) / (coarse - 1)
    ht = (t_hi - t_lo) / (coarse - 1)
    for _ in range(40):
        moved = False
        for ds in (-hs, 0.0, hs):
            for dt in (-ht, 0.0, ht):
                s_new = min(max(s + ds, s_lo), s_hi)
                t_new = min(max(t + dt, t_lo), t_hi)
                val = float(
                    obstacle.signed_distance(position.evaluate(s_new, t_new))[0]
                )
                if val < best - 1e-15:
                    best, s, t = val, s_new, t_new
                    moved = True
        if not moved:
            hs *= 0.5
            ht *= 0.5
            if hs < 1e-9 * (s_hi - s_lo) and ht < 1e-9 * (t_hi - t_lo):
                break
    return best, s, t, np.asarray(position.evaluate(s, t))


def initial_guess(scenario) -> np.ndarray:
    """Deterministic seed for the solver from a scenario description.

    The t = 0 column carries the scenario's initial configuration; later
    columns blend linearly toward a straight rod aimed at the target tip with
    stretch clipped into the feasible band.  Interpolated control points that
    land inside an obstacle's safety margin are pushed out along its signed
    distance field (the initial edge and the clamped base row stay exact).
    T seeds at the tip travel distance over the velocity bound, clamped to
    its box.  When the target already coincides with the initial tip pose the
    guess is the static initial configuration.
    """
    m, n, L = scenario.m, scenario.n, scenario.L
    p0, phi0, theta0, psi0 = scenario.initial_edges()
    dist = float(np.linalg.norm(scenario.p_des))
    if dist > 1e-12:
        aim = scenario.p_des / dist
        stretch = min(max(dist / L, scenario.bounds.v_min), scenario.bounds.v_max)
    else:
        aim = np.array([0.0, 0.0, 1.0])
        stretch = 1.0
    arc = np.linspace(0.0, L, m + 1)
    target_p = stretch * arc[:, None] * aim[None, :]
    ramp = np.linspace(0.0, 1.0, m + 1)
    target_ang = [
        ramp * scenario.phi_des,
        ramp * scenario.theta_des,
        ramp * scenario.psi_des,
    ]
    tip_gap = float(np.linalg.norm(scenario.p_des - p0[-1]))
    angle_gap = max(
        abs(scenario.phi_des - phi0[-1]),
        abs(scenario.theta_des - theta0[-1]),
        abs(scenario.psi_des - psi0[-1]),
    )
    if tip_gap < 1e-12 and angle_gap < 1e-12:
        target_p = p0
        target_ang = [phi0, theta0, psi0]

    layout = DecisionLayout(m, n, L)
    x = np.zeros(layout.size)
    taus = np.linspace(0.0, 1.0, n + 1)
    p_grid = (1.0 - taus)[None, :, None] * p0[:, None, :] + taus[None, :, None] * target_p[
        :, None, :
    ]
    margin = getattr(scenario, "d_safe", 0.0) + 0.03
    for obstacle in getattr(scenario, "obstacles", ()):
        if not hasattr(obstacle, "signed_distance"):
            continue
        for i in range(1, m + 1):
            for j in range(1, n + 1):
                sd = float(obstacle.signed_distance(p_grid[i, j])[0])
                if sd < margin:
                    grad = obstacle.signed_distance_gradient(p_grid[i, j])
                    p_grid[i, j] = p_grid[i, j] + (margin - sd) * grad
    x[: 3 * layout.grid] = p_grid.ravel()
    for k, (init, target) in enumerate(
        zip((phi0, theta0, psi0), target_ang)
    ):
        grid = (1.0 - taus)[None, :] * init[:, None] + taus[None, :] * target[:, None]
        off = layout.angle_offset(k)
        x[off : off + layout.grid] = grid.ravel()
    T_min, T_max = scenario.solver.T_min, scenario.solver.T_max
    x[layout.index_T] = min(max(tip_gap / scenario.bounds.q_max, T_min), T_max)
    return x
