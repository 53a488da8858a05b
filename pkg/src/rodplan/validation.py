"""Independent brute-force verification of planned rod motions.

Everything here checks solutions by dense sampling and direct evaluation:
surfaces are differentiated and evaluated pointwise, never through the
constraint-surface algebra, the control-point residuals, or the
branch-and-bound separation search, so a bug in those paths cannot hide
from these checks.  Only ``evaluate``/``partial`` from the surface algebra
and the point-to-shape distance are shared.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import Point, gjk_distance
from .rod import BoundarySpec, FeasibilityBounds, PoseSurfaces, euler_to_rotation

__all__ = [
    "SamplingGrid",
    "VerificationReport",
    "sample_check_feasibility",
    "sample_min_dist",
    "verify_solution",
]


@dataclass(frozen=True)
class SamplingGrid:
    """Sample counts per axis for the verification lattice."""

    n_s: int = 201
    n_t: int = 201

    def __post_init__(self):
        if self.n_s < 2 or self.n_t < 2:
            raise ValueError("need at least two samples per axis")

    def axes(self, pose: PoseSurfaces):
        return (
            np.linspace(0.0, pose.length, self.n_s),
            np.linspace(0.0, pose.duration, self.n_t),
        )


@dataclass
class VerificationReport:
    """Worst-case sampled figures and the verdict against their tolerances."""

    feasibility_violations: dict = field(default_factory=dict)  # family -> worst
    clearances: list = field(default_factory=list)  # sampled min distance per obstacle
    boundary_max: dict = field(default_factory=dict)  # section -> worst mismatch
    tip_position_error: float = 0.0
    tip_angle_error: float = 0.0
    failures: list = field(default_factory=list)
    feasibility_tol: float = 1e-6
    boundary_tol: float = 1e-6
    clearance_floor: float = 0.0  # d_safe - slack

    @property
    def verdict(self) -> bool:
        return not self.failures

    def to_json_dict(self) -> dict:
        return {
            "verdict": "pass" if self.verdict else "fail",
            "feasibility_violations": self.feasibility_violations,
            "clearances": list(self.clearances),
            "boundary_max": self.boundary_max,
            "tip_position_error": self.tip_position_error,
            "tip_angle_error": self.tip_angle_error,
            "failures": list(self.failures),
            "tolerances": {
                "feasibility": self.feasibility_tol,
                "boundary": self.boundary_tol,
                "clearance_floor": self.clearance_floor,
            },
        }


def _norm_sq_grid(surface, ss, ts):
    vals = surface.evaluate_grid(ss, ts)
    if vals.ndim == 2:
        return vals**2
    return (vals**2).sum(axis=-1)


def sample_check_feasibility(
    pose: PoseSurfaces, bounds: FeasibilityBounds, grid: SamplingGrid = SamplingGrid()
) -> dict:
    """Worst sampled violation per bound family, in squared units.

    Positive entries are violations; nonpositive entries certify the sampled
    lattice satisfies that bound.
    """
    ss, ts = grid.axes(pose)
    p_s = pose.p.partial_s()
    p_t = pose.p.partial_t()
    ang_s = [a.partial_s() for a in pose.angles()]
    ang_t = [a.partial_t() for a in pose.angles()]

    v_sq = _norm_sq_grid(p_s, ss, ts)
    q_sq = _norm_sq_grid(p_t, ss, ts)
    u_sq = sum(_norm_sq_grid(a, ss, ts) for a in ang_s)
    w_sq = sum(_norm_sq_grid(a, ss, ts) for a in ang_t)
    a_sq = _norm_sq_grid(p_s.partial_s(), ss, ts)
    at_sq = _norm_sq_grid(p_t.partial_t(), ss, ts)

    return {
        "v_lo": float((bounds.v_min**2 - v_sq).max()),
        "v_hi": float((v_sq - bounds.v_max**2).max()),
        "q": float((q_sq - bounds.q_max**2).max()),
        "u": float((u_sq - bounds.u_max**2).max()),
        "w": float((w_sq - bounds.omega_max**2).max()),
        "a": float((a_sq - bounds.v_s_max**2).max()),
        "at": float((at_sq - bounds.q_t_max**2).max()),
    }


def sample_min_dist(position, obstacle, grid: SamplingGrid = SamplingGrid()) -> float:
    """Lattice minimum of exact point-to-shape distances; upper bound on truth."""
    ss = np.linspace(*position.s_domain, grid.n_s)
    ts = np.linspace(*position.t_domain, grid.n_t)
    pts = position.evaluate_grid(ss, ts).reshape(-1, 3)
    best = np.inf
    for p in pts:
        d = gjk_distance(Point(p), obstacle)
        if d < best:
            best = d
            if best == 0.0:
                break
    return float(best)


def _sample_min_dist_fast(position, obstacle, grid: SamplingGrid) -> float:
    """Vectorized fast path for spheres; generic loop otherwise."""
    from .geometry import Sphere

    if isinstance(obstacle, Sphere):
        ss = np.linspace(*position.s_domain, grid.n_s)
        ts = np.linspace(*position.t_domain, grid.n_t)
        pts = position.evaluate_grid(ss, ts).reshape(-1, 3)
        d = np.linalg.norm(pts - obstacle.center, axis=1) - obstacle.radius
        return float(np.maximum(d, 0.0).min())
    return sample_min_dist(position, obstacle, grid)


def verify_solution(
    pose: PoseSurfaces,
    bounds: FeasibilityBounds,
    boundary: BoundarySpec,
    obstacles=(),
    d_safe: float = 0.0,
    p_des=None,
    angles_des=None,
    grid: SamplingGrid = SamplingGrid(),
    feasibility_tol: float = 1e-6,
    boundary_tol: float = 1e-6,
    clearance_slack: float = 1e-3,
    tip_tol: float | None = None,
) -> VerificationReport:
    """Full certificate of one solution against its scenario data.

    Checks the seven sampled derivative bounds, the per-obstacle sampled
    clearance against d_safe (minus slack), edge mismatches at t = 0 and the
    base, and, when a target is given, the terminal tip errors.
    """
    report = VerificationReport(
        feasibility_tol=feasibility_tol,
        boundary_tol=boundary_tol,
        clearance_floor=d_safe - clearance_slack,
    )
    report.feasibility_violations = sample_check_feasibility(pose, bounds, grid)
    for family, worst in report.feasibility_violations.items():
        if worst > feasibility_tol:
            report.failures.append(f"feasibility:{family}")

    ss, ts = grid.axes(pose)
    edge_p = pose.p.evaluate_grid(ss, [0.0])[:, 0, :]
    init_p = np.array([_poly_eval(boundary.initial_p, s / pose.length) for s in ss])
    sections = {"initial_p": np.abs(edge_p - init_p).max()}
    for name, cps in (
        ("initial_phi", boundary.initial_phi),
        ("initial_theta", boundary.initial_theta),
        ("initial_psi", boundary.initial_psi),
    ):
        surf = getattr(pose, name.split("_")[1])
        edge = surf.evaluate_grid(ss, [0.0])[:, 0]
        want = np.array([_poly_eval(cps, s / pose.length) for s in ss])
        sections[name] = float(np.abs(edge - want).max())
    base_p = pose.p.evaluate_grid([0.0], ts)[0]
    sections["base_position"] = float(np.abs(base_p).max())
    sections["base_angles"] = float(
        max(np.abs(a.evaluate_grid([0.0], ts)[0]).max() for a in pose.angles())
    )
    if boundary.rest_start:
        rate = pose.p.partial_t()
        sections["rest_start"] = float(
            np.abs(rate.evaluate_grid(ss, [0.0])[:, 0, :]).max()
        )
        sections["rest_start_angles"] = float(
            max(
                np.abs(a.partial_t().evaluate_grid(ss, [0.0])[:, 0]).max()
                for a in pose.angles()
            )
        )
    report.boundary_max = {k: float(v) for k, v in sections.items()}
    for name, worst in report.boundary_max.items():
        if worst > boundary_tol:
            report.failures.append(f"boundary:{name}")

    for idx, obstacle in enumerate(obstacles):
        dist = _sample_min_dist_fast(pose.p, obstacle, grid)
        report.clearances.append(float(dist))
        if dist < report.clearance_floor:
            report.failures.append(f"clearance:obstacle_{idx}")

    if p_des is not None:
        tip = pose.p.evaluate(pose.length, pose.duration)
        report.tip_position_error = float(np.linalg.norm(tip - np.asarray(p_des)))
        if angles_des is not None:
            diffs = [
                abs(float(surf.evaluate(pose.length, pose.duration)) - want)
                for surf, want in zip(pose.angles(), angles_des)
            ]
            report.tip_angle_error = float(max(diffs))
        if tip_tol is not None and report.tip_position_error > tip_tol:
            report.failures.append("tip_position")
    return report


def _poly_eval(cps: np.ndarray, u: float):
    """De Casteljau on a raw control array over the unit interval."""
    b = np.asarray(cps, dtype=float)
    for _ in range(b.shape[0] - 1):
        b = (1.0 - u) * b[:-1] + u * b[1:]
    return b[0]
