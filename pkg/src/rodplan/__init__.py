"""Motion planning for continuum rods over tensor-product Bernstein surfaces."""

from .bernstein import BernsteinPolynomial, BernsteinSurface
from .geometry import (
    Box,
    Point,
    Polytope,
    SeparationQuery,
    Sphere,
    clearance_constraint,
    gjk_distance,
    min_dist,
)
from .rod import (
    BoundarySpec,
    FeasibilityBounds,
    PoseSurfaces,
    boundary_residuals,
    constraint_surfaces,
    feasibility_residuals,
)
from .scenario import ScenarioSpec, build_problem, fixture_path, load_scenario
from .solver import SolverOptions, SolverReport, solve
from .transcription import CostSpec, DecisionLayout, NlpProblem, initial_guess, pack, unpack
from .validation import SamplingGrid, VerificationReport, verify_solution

__all__ = [
    "BernsteinPolynomial",
    "BernsteinSurface",
    "BoundarySpec",
    "Box",
    "CostSpec",
    "DecisionLayout",
    "FeasibilityBounds",
    "NlpProblem",
    "Point",
    "Polytope",
    "PoseSurfaces",
    "SamplingGrid",
    "ScenarioSpec",
    "SeparationQuery",
    "SolverOptions",
    "SolverReport",
    "Sphere",
    "VerificationReport",
    "boundary_residuals",
    "build_problem",
    "clearance_constraint",
    "constraint_surfaces",
    "feasibility_residuals",
    "fixture_path",
    "gjk_distance",
    "initial_guess",
    "load_scenario",
    "min_dist",
    "pack",
    "solve",
    "unpack",
    "verify_solution",
]
__version__ = "0.1.0"
