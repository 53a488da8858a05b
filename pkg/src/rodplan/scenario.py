"""Scenario schema: JSON parsing, validation, and fixture access.

A scenario file fully determines one planning run: rod length, surface
orders, derivative bounds, target tip pose, cost weights, obstacles, the
initial configuration, and solver options.  ``spec_version`` is 1.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .geometry import Box, Polytope, Sphere
from .rod import FeasibilityBounds, straight_edge
from .solver import SolverOptions

__all__ = [
    "ScenarioError",
    "ScenarioSpec",
    "fixture_path",
    "load_scenario",
    "obstacle_from_json",
    "obstacle_to_json",
]

SPEC_VERSION = 1

BOUND_FIELDS = (
    ("vmin", "v_min"),
    ("vmax", "v_max"),
    ("qmax", "q_max"),
    ("umax", "u_max"),
    ("wmax", "omega_max"),
    ("vsmax", "v_s_max"),
    ("qtmax", "q_t_max"),
)


class ScenarioError(ValueError):
    """Schema violation; carries the offending field name."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


def obstacle_from_json(obj: dict, field_name: str = "obstacles"):
    kind = obj.get("type")
    if kind == "sphere":
        try:
            return Sphere(np.asarray(obj["center"], dtype=float), float(obj["radius"]))
        except (KeyError, ValueError, TypeError) as err:
            raise ScenarioError(field_name, f"bad sphere: {err}") from err
    if kind == "box":
        try:
            return Box(obj["center"], float(obj["edge"]))
        except (KeyError, ValueError, TypeError) as err:
            raise ScenarioError(field_name, f"bad box: {err}") from err
    raise ScenarioError(field_name, f"unknown obstacle type {kind!r}")


def obstacle_to_json(shape) -> dict:
    if isinstance(shape, Sphere):
        return {"type": "sphere", "center": shape.center.tolist(), "radius": shape.radius}
    if isinstance(shape, Box):
        return {"type": "box", "center": shape.center.tolist(), "edge": shape.edge}
    if isinstance(shape, Polytope):
        v = shape.vertices
        center = 0.5 * (v.min(axis=0) + v.max(axis=0))
        edge = float((v.max(axis=0) - v.min(axis=0)).max())
        return {"type": "box", "center": center.tolist(), "edge": edge}
    raise TypeError(f"cannot serialize obstacle {type(shape).__name__}")


@dataclass
class ScenarioSpec:
    """One planning scenario; see the fixtures for complete examples."""

    name: str
    L: float
    m: int
    n: int
    m_e: int
    n_e: int
    bounds: FeasibilityBounds
    d_safe: float
    epsilon: float
    p_des: np.ndarray
    phi_des: float
    theta_des: float
    psi_des: float
    w1: float
    w2: float
    w3: float
    w4: float
    obstacles: tuple = ()
    initial: dict = field(default_factory=lambda: {"type": "straight"})
    solver: SolverOptions = field(default_factory=SolverOptions)
    w_T: float = 0.0
    tip_tol: float = 0.02

    def initial_edges(self):
        """Initial-configuration edge control points (p, phi, theta, psi)."""
        m = self.m
        if self.initial.get("type") == "straight":
            zeros = np.zeros(m + 1)
            return straight_edge(self.L, m), zeros, zeros.copy(), zeros.copy()
        p = np.asarray(self.initial["p"], dtype=float)
        phi = np.asarray(self.initial["phi"], dtype=float)
        theta = np.asarray(self.initial["theta"], dtype=float)
        psi = np.asarray(self.initial["psi"], dtype=float)
        return p, phi, theta, psi

    def validate(self) -> "ScenarioSpec":
        if self.L <= 0:
            raise ScenarioError("L", "rod length must be positive")
        if self.m < 2 or self.n < 2:
            raise ScenarioError("m", "orders must be at least 2")
        if self.m_e < self.m or self.n_e < self.n:
            raise ScenarioError("m_e", "elevated orders cannot be below (m, n)")
        try:
            self.bounds.validate()
        except ValueError as err:
            raise ScenarioError("bounds", str(err)) from err
        if self.d_safe <= 0:
            raise ScenarioError("d_safe", "safety margin must be positive")
        if self.epsilon <= 0:
            raise ScenarioError("epsilon", "separation tolerance must be positive")
        if max(self.w1, self.w2, self.w3, self.w4, self.w_T) <= 0:
            raise ScenarioError("w1", "at least one weight must be positive")
        if not (0 < self.solver.T_min < self.solver.T_max):
            raise ScenarioError("T_min", "need 0 < T_min < T_max")
        kind = self.initial.get("type")
        if kind not in ("straight", "control_points"):
            raise ScenarioError("initial_configuration", f"unknown type {kind!r}")
        if kind == "control_points":
            p, phi, theta, psi = self.initial_edges()
            if p.shape != (self.m + 1, 3):
                raise ScenarioError(
                    "initial_configuration.p", f"expected shape {(self.m + 1, 3)}"
                )
            for nm, arr in (("phi", phi), ("theta", theta), ("psi", psi)):
                if arr.shape != (self.m + 1,):
                    raise ScenarioError(
                        f"initial_configuration.{nm}", f"expected {self.m + 1} values"
                    )
            if np.abs(p[0]).max() > 1e-9 or max(abs(phi[0]), abs(theta[0]), abs(psi[0])) > 1e-9:
                raise ScenarioError(
                    "initial_configuration", "base must sit at the origin with identity orientation"
                )
        return self

    # -- JSON ------------------------------------------------------------------

    @classmethod
    def from_json_dict(cls, obj: dict) -> "ScenarioSpec":
        version = obj.get("spec_version")
        if version != SPEC_VERSION:
            raise ScenarioError("spec_version", f"expected {SPEC_VERSION}, got {version!r}")
        required = [
            "name", "L", "m", "n", "m_e", "n_e", "bounds", "d_safe", "epsilon",
            "p_des", "phi_des", "theta_des", "psi_des", "weights",
            "obstacles", "initial_configuration",
        ]
        for key in required:
            if key not in obj:
                raise ScenarioError(key, "missing required field")
        raw_bounds = obj["bounds"]
        kwargs = {}
        for json_name, attr in BOUND_FIELDS:
            if json_name not in raw_bounds:
                raise ScenarioError(f"bounds.{json_name}", "missing bound")
            kwargs[attr] = float(raw_bounds[json_name])
        weights = obj["weights"]
        for key in ("w1", "w2", "w3", "w4"):
            if key not in weights:
                raise ScenarioError(f"weights.{key}", "missing weight")
        solver_raw = dict(obj.get("solver", {}))
        w_T = float(solver_raw.pop("wT", 0.0))
        known = {"tol_eq", "tol_ineq", "max_iter", "T_min", "T_max", "seed"}
        unknown = set(solver_raw) - known
        if unknown:
            raise ScenarioError("solver", f"unknown options {sorted(unknown)}")
        solver = SolverOptions(**solver_raw)
        spec = cls(
            name=str(obj["name"]),
            L=float(obj["L"]),
            m=int(obj["m"]),
            n=int(obj["n"]),
            m_e=int(obj["m_e"]),
            n_e=int(obj["n_e"]),
            bounds=FeasibilityBounds(**kwargs),
            d_safe=float(obj["d_safe"]),
            epsilon=float(obj["epsilon"]),
            p_des=np.asarray(obj["p_des"], dtype=float).reshape(3),
            phi_des=float(obj["phi_des"]),
            theta_des=float(obj["theta_des"]),
            psi_des=float(obj["psi_des"]),
            w1=float(weights["w1"]),
            w2=float(weights["w2"]),
            w3=float(weights["w3"]),
            w4=float(weights["w4"]),
            obstacles=tuple(
                obstacle_from_json(o, f"obstacles[{i}]")
                for i, o in enumerate(obj["obstacles"])
            ),
            initial=dict(obj["initial_configuration"]),
            solver=solver,
            w_T=w_T,
            tip_tol=float(obj.get("tip_tol", 0.02)),
        )
        return spec.validate()

    def to_json_dict(self) -> dict:
        bounds = {json_name: getattr(self.bounds, attr) for json_name, attr in BOUND_FIELDS}
        solver = self.solver.to_json_dict()
        solver["wT"] = self.w_T
        return {
            "spec_version": SPEC_VERSION,
            "name": self.name,
            "L": self.L,
            "m": self.m,
            "n": self.n,
            "m_e": self.m_e,
            "n_e": self.n_e,
            "bounds": bounds,
            "d_safe": self.d_safe,
            "epsilon": self.epsilon,
            "p_des": np.asarray(self.p_des).tolist(),
            "phi_des": self.phi_des,
            "theta_des": self.theta_des,
            "psi_des": self.psi_des,
            "weights": {"w1": self.w1, "w2": self.w2, "w3": self.w3, "w4": self.w4},
            "obstacles": [obstacle_to_json(o) for o in self.obstacles],
            "initial_configuration": self.initial,
            "solver": solver,
            "tip_tol": self.tip_tol,
        }


def load_scenario(path) -> ScenarioSpec:
    with open(path, "r", encoding="utf-8") as handle:
        try:
            obj = json.load(handle)
        except json.JSONDecodeError as err:
            raise ScenarioError("file", f"invalid JSON: {err}") from err
    return ScenarioSpec.from_json_dict(obj)


def fixture_path(name: str):
    """Path to a shipped scenario fixture, e.g. 'case1'."""
    return resources.files("rodplan.fixtures").joinpath(f"{name}.json")


def build_problem(scenario: ScenarioSpec):
    """Assemble the finite program for a validated scenario."""
    from .rod import BoundarySpec
    from .transcription import CostSpec, DecisionLayout, NlpProblem

    p0, phi0, theta0, psi0 = scenario.initial_edges()
    boundary = BoundarySpec(p0, phi0, theta0, psi0)
    cost = CostSpec(
        scenario.w1,
        scenario.w2,
        scenario.w3,
        scenario.w4,
        scenario.p_des,
        scenario.phi_des,
        scenario.theta_des,
        scenario.psi_des,
        w_T=scenario.w_T,
    )
    return NlpProblem(
        DecisionLayout(scenario.m, scenario.n, scenario.L),
        cost,
        scenario.bounds,
        boundary,
        obstacles=scenario.obstacles,
        d_safe=scenario.d_safe,
        epsilon=scenario.epsilon,
        m_e=scenario.m_e,
        n_e=scenario.n_e,
        T_bounds=(scenario.solver.T_min, scenario.solver.T_max),
    )


def with_orders(scenario: ScenarioSpec, m: int, n: int) -> ScenarioSpec:
    """Copy of the scenario at different surface orders (elevated orders 2m, 2n).

    A control-point initial configuration is re-expressed at the new order by
    exact degree elevation.
    """
    from dataclasses import replace

    from .bernstein import elevation_matrix

    initial = dict(scenario.initial)
    if initial.get("type") == "control_points" and m != scenario.m:
        if m < scenario.m:
            raise ScenarioError(
                "m", "cannot lower the order of a control-point initial configuration"
            )
        e = elevation_matrix(scenario.m, m)
        initial = {
            "type": "control_points",
            "p": (e.T @ np.asarray(initial["p"], dtype=float)).tolist(),
            "phi": (e.T @ np.asarray(initial["phi"], dtype=float)).tolist(),
            "theta": (e.T @ np.asarray(initial["theta"], dtype=float)).tolist(),
            "psi": (e.T @ np.asarray(initial["psi"], dtype=float)).tolist(),
        }
    return replace(
        scenario, m=m, n=n, m_e=2 * m, n_e=2 * n, initial=initial
    ).validate()
