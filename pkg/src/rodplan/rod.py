"""Rod pose representation, feasibility constraint surfaces, and boundary residuals.

The rod's reference pose is a position surface p(s, t) in R^3 plus three
Euler-angle surfaces (phi, theta, psi) sharing its orders and domains.
Feasibility of the pose is certified through six squared-derivative-norm
surfaces whose degree-elevated control points bound the true derivative
norms from outside (convex hull containment), so nonnegative control-point
residuals imply the bounds hold everywhere on the surface.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bernstein import BernsteinSurface, squared_norm_surface

__all__ = [
    "BoundarySpec",
    "ConstraintSurfaces",
    "FeasibilityBounds",
    "PoseSurfaces",
    "boundary_residuals",
    "constraint_surfaces",
    "euler_to_rotation",
    "feasibility_residuals",
    "straight_edge",
    "straight_pose",
    "tip_pose",
]

FAMILY_NAMES = ("v_lo", "v_hi", "q", "u", "w", "a", "at")


@dataclass(frozen=True)
class PoseSurfaces:
    """Bundle of position and Euler-angle surfaces with shared orders/domains."""

    p: BernsteinSurface
    phi: BernsteinSurface
    theta: BernsteinSurface
    psi: BernsteinSurface

    def __post_init__(self):
        if self.p.is_scalar or self.p.dim != 3:
            raise ValueError("position surface must be 3-vector valued")
        for name in ("phi", "theta", "psi"):
            surf = getattr(self, name)
            if not surf.is_scalar:
                raise ValueError(f"{name} must be a scalar surface")
            if (surf.m, surf.n) != (self.p.m, self.p.n):
                raise ValueError("all pose surfaces must share orders")
            if surf.s_domain != self.p.s_domain or surf.t_domain != self.p.t_domain:
                raise ValueError("all pose surfaces must share domains")

    @property
    def m(self) -> int:
        return self.p.m

    @property
    def n(self) -> int:
        return self.p.n

    @property
    def length(self) -> float:
        return self.p.s_domain[1]

    @property
    def duration(self) -> float:
        return self.p.t_domain[1]

    def angles(self):
        return (self.phi, self.theta, self.psi)


@dataclass
class FeasibilityBounds:
    """Bounds on spatial/temporal derivative norms of the pose.

    v_min/v_max bound the stretch |p_s|, q_max the material velocity |p_t|,
    u_max and omega_max the Euler-angle rate norms in s and t, and
    v_s_max / q_t_max the second derivatives |p_ss| and |p_tt|.
    """

    v_min: float
    v_max: float
    q_max: float
    u_max: float
    omega_max: float
    v_s_max: float
    q_t_max: float

    def validate(self):
        if not (0.0 <= self.v_min < self.v_max):
            raise ValueError(f"need 0 <= v_min < v_max, got [{self.v_min}, {self.v_max}]")
        for name in ("q_max", "u_max", "omega_max", "v_s_max", "q_t_max"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        return self


@dataclass(frozen=True)
class ConstraintSurfaces:
    """Squared-derivative-norm surfaces at orders (2m, 2n) plus elevated copies."""

    v_sq: BernsteinSurface  # |p_s|^2
    q_sq: BernsteinSurface  # |p_t|^2
    u_sq: BernsteinSurface  # |[phi_s, theta_s, psi_s]|^2
    w_sq: BernsteinSurface  # |[phi_t, theta_t, psi_t]|^2
    a_sq: BernsteinSurface  # |p_ss|^2
    at_sq: BernsteinSurface  # |p_tt|^2
    elevated: tuple  # same six, elevated to (2 m_e, 2 n_e)
    m_e: int
    n_e: int

    def base(self):
        return (self.v_sq, self.q_sq, self.u_sq, self.w_sq, self.a_sq, self.at_sq)


def constraint_surfaces(pose: PoseSurfaces, m_e: int, n_e: int) -> ConstraintSurfaces:
    """Build the six squared-norm surfaces of a pose and their elevated copies."""
    m, n = pose.m, pose.n
    if m < 2 or n < 2:
        raise ValueError("orders must be at least 2 for second derivatives")
    if m_e < m or n_e < n:
        raise ValueError("elevated orders must not be below the pose orders")

    p_s = pose.p.partial_s()
    p_t = pose.p.partial_t()
    p_ss = p_s.partial_s()
    p_tt = p_t.partial_t()

    def angle_rate_sq(partial):
        total = None
        for surf in pose.angles():
            sq = squared_norm_surface(partial(surf))
            total = sq if total is None else total + sq
        return total

    base = tuple(
        surf.elevate(2 * m, 2 * n)
        for surf in (
            squared_norm_surface(p_s),
            squared_norm_surface(p_t),
            angle_rate_sq(lambda s: s.partial_s()),
            angle_rate_sq(lambda s: s.partial_t()),
            squared_norm_surface(p_ss),
            squared_norm_surface(p_tt),
        )
    )
    elevated = tuple(surf.elevate(2 * m_e, 2 * n_e) for surf in base)
    return ConstraintSurfaces(*base, elevated=elevated, m_e=m_e, n_e=n_e)


def feasibility_residuals(cs: ConstraintSurfaces, bounds: FeasibilityBounds) -> np.ndarray:
    """Control-point inequality residuals; all nonnegative certifies feasibility.

    Ordered by family (v lower, v upper, q, u, w, a, at), each block row-major
    over the elevated control grid; 7 * (2 m_e + 1) * (2 n_e + 1) entries.
    """
    v, q, u, w, a, at = (surf.control_points.ravel() for surf in cs.elevated)
    return np.concatenate(
        [
            v - bounds.v_min**2,
            bounds.v_max**2 - v,
            bounds.q_max**2 - q,
            bounds.u_max**2 - u,
            bounds.omega_max**2 - w,
            bounds.v_s_max**2 - a,
            bounds.q_t_max**2 - at,
        ]
    )


@dataclass
class BoundarySpec:
    """Boundary data: initial edge, rest start, base clamp, optional hard tip.

    The base clamp (p = 0, identity orientation at s = 0 for all t) is always
    imposed; zero base velocity follows from it.  ``rest_start`` additionally
    pins the first two time columns equal so the whole rod starts at rest.
    ``final_tip``, when given, imposes the tip pose at (L, T) as a hard
    equality instead of leaving it to the cost.
    """

    initial_p: np.ndarray  # (m+1, 3)
    initial_phi: np.ndarray  # (m+1,)
    initial_theta: np.ndarray
    initial_psi: np.ndarray
    rest_start: bool = True
    final_tip: tuple | None = None  # (p_des (3,), phi_des, theta_des, psi_des)

    def __post_init__(self):
        self.initial_p = np.asarray(self.initial_p, dtype=float)
        for name in ("initial_phi", "initial_theta", "initial_psi"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=float).ravel())
        if self.initial_p.ndim != 2 or self.initial_p.shape[1] != 3:
            raise ValueError("initial_p must be (m+1, 3)")
        if not (
            len(self.initial_phi)
            == len(self.initial_theta)
            == len(self.initial_psi)
            == self.initial_p.shape[0]
        ):
            raise ValueError("initial edges must share length m+1")

    @property
    def order(self) -> int:
        return self.initial_p.shape[0] - 1


def boundary_residuals(pose: PoseSurfaces, spec: BoundarySpec) -> np.ndarray:
    """Equality residuals, zero iff the pose meets the boundary data.

    Blocks in order: initial edge (p, phi, theta, psi), rest start columns
    (if enabled), base clamp over all time columns, hard tip (if given).
    """
    if spec.order != pose.m:
        raise ValueError(f"boundary data order {spec.order} != pose order {pose.m}")
    p = pose.p.control_points
    ang = [s.control_points for s in pose.angles()]
    parts = [
        (p[:, 0] - spec.initial_p).ravel(),
        ang[0][:, 0] - spec.initial_phi,
        ang[1][:, 0] - spec.initial_theta,
        ang[2][:, 0] - spec.initial_psi,
    ]
    if spec.rest_start:
        parts.append((p[:, 1] - p[:, 0]).ravel())
        parts.extend(a[:, 1] - a[:, 0] for a in ang)
    parts.append(p[0, :].ravel())
    parts.extend(a[0, :] for a in ang)
    if spec.final_tip is not None:
        p_des, phi_des, theta_des, psi_des = spec.final_tip
        parts.append(p[-1, -1] - np.asarray(p_des, dtype=float))
        parts.append(
            np.array(
                [
                    ang[0][-1, -1] - phi_des,
                    ang[1][-1, -1] - theta_des,
                    ang[2][-1, -1] - psi_des,
                ]
            )
        )
    return np.concatenate(parts)


def euler_to_rotation(phi: float, theta: float, psi: float) -> np.ndarray:
    """Rotation matrix from extrinsic-axis-order X, Y, Z Euler angles."""
    cx, sx = np.cos(phi), np.sin(phi)
    cy, sy = np.cos(theta), np.sin(theta)
    cz, sz = np.cos(psi), np.sin(psi)
    rx = np.array([[1, 0, 0], [0, cx, -sx], [0, sx, cx]])
    ry = np.array([[cy, 0, sy], [0, 1, 0], [-sy, 0, cy]])
    rz = np.array([[cz, -sz, 0], [sz, cz, 0], [0, 0, 1]])
    return rx @ ry @ rz


def tip_pose(pose: PoseSurfaces, t: float):
    """Tip position and Euler angles at time t (the s = L edge)."""
    position = pose.p.edge("s1")(t)
    angles = tuple(float(surf.edge("s1")(t)) for surf in pose.angles())
    return np.asarray(position), angles


def straight_edge(length: float, m: int) -> np.ndarray:
    """Control points of the straight unit-stretch rod edge along z."""
    cps = np.zeros((m + 1, 3))
    cps[:, 2] = np.linspace(0.0, length, m + 1)
    return cps


def straight_pose(length: float, duration: float, m: int, n: int) -> PoseSurfaces:
    """Static straight rod along z with identity orientation."""
    edge = straight_edge(length, m)
    p = np.repeat(edge[:, None, :], n + 1, axis=1)
    zeros = np.zeros((m + 1, n + 1))
    s_dom, t_dom = (0.0, length), (0.0, duration)
    return PoseSurfaces(
        BernsteinSurface(p, s_dom, t_dom),
        BernsteinSurface(zeros, s_dom, t_dom),
        BernsteinSurface(zeros, s_dom, t_dom),
        BernsteinSurface(zeros, s_dom, t_dom),
    )
