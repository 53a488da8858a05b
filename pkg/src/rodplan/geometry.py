"""Convex shapes, GJK minimum distance, and branch-and-bound rod-obstacle separation.

The separation routine certifies the minimum distance between a position
surface and a convex solid to a requested tolerance by recursively
subdividing the surface: the convex hull of a patch's control points gives a
sound lower bound (via GJK), the patch corners (which lie on the surface)
give an upper bound, and subdivision shrinks the gap between the two.

All shapes are immutable and every function is pure, so concurrent callers
are safe; results do not depend on evaluation order.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .bernstein import BernsteinSurface

__all__ = [
    "Box",
    "ControlCloud",
    "MinDistNode",
    "Point",
    "Polytope",
    "SeparationQuery",
    "Sphere",
    "SubdivisionLimitError",
    "box_vertices",
    "clearance_constraint",
    "gjk_distance",
    "lower_bound",
    "min_dist",
    "min_dist_witness",
    "upper_bound",
]


def _vec3(x, name: str) -> np.ndarray:
    v = np.asarray(x, dtype=float).reshape(3)
    if not np.isfinite(v).all():
        raise ValueError(f"{name} must be finite")
    v.setflags(write=False)
    return v


@dataclass(frozen=True)
class Point:
    """Degenerate convex shape: a single point."""

    position: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "position", _vec3(self.position, "position"))

    def support(self, direction: np.ndarray) -> np.ndarray:
        return self.position

    def reference_point(self) -> np.ndarray:
        return self.position


@dataclass(frozen=True)
class Sphere:
    """Solid ball given by center and radius."""

    center: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", _vec3(self.center, "center"))
        if not (np.isfinite(self.radius) and self.radius > 0):
            raise ValueError("radius must be positive")

    def support(self, direction: np.ndarray) -> np.ndarray:
        d = np.asarray(direction, dtype=float)
        norm = np.linalg.norm(d)
        if norm == 0.0:
            return self.center
        return self.center + (self.radius / norm) * d

    def reference_point(self) -> np.ndarray:
        return self.center

    def signed_distance(self, points: np.ndarray) -> np.ndarray:
        """Signed boundary distance, negative inside; vectorized over rows."""
        p = np.atleast_2d(np.asarray(points, dtype=float))
        return np.linalg.norm(p - self.center, axis=1) - self.radius

    def signed_distance_gradient(self, point: np.ndarray) -> np.ndarray:
        offset = np.asarray(point, dtype=float) - self.center
        norm = np.linalg.norm(offset)
        if norm < 1e-12:
            return np.array([0.0, 0.0, 1.0])
        return offset / norm


@dataclass(frozen=True)
class Polytope:
    """Convex hull of a finite vertex set."""

    vertices: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float).reshape(-1, 3)
        if v.shape[0] < 1:
            raise ValueError("polytope needs at least one vertex")
        if not np.isfinite(v).all():
            raise ValueError("polytope vertices must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "vertices", v)

    def support(self, direction: np.ndarray) -> np.ndarray:
        return self.vertices[int(np.argmax(self.vertices @ np.asarray(direction, float)))]

    def reference_point(self) -> np.ndarray:
        return self.vertices.mean(axis=0)


class ControlCloud(Polytope):
    """Convex hull of a surface patch's control points (contains the patch)."""

    def __init__(self, surface: BernsteinSurface):
        cps = surface.control_points
        if cps.ndim != 3 or cps.shape[2] != 3:
            raise ValueError("position surface with 3-vector control points expected")
        super().__init__(cps.reshape(-1, 3))


def box_vertices(center, edge: float) -> np.ndarray:
    """Eight vertices of an axis-aligned cube with the given edge length."""
    c = np.asarray(center, dtype=float).reshape(3)
    h = 0.5 * float(edge)
    offsets = np.array(
        [[sx, sy, sz] for sx in (-h, h) for sy in (-h, h) for sz in (-h, h)]
    )
    return c + offsets


class Box(Polytope):
    """Axis-aligned cube; a polytope that also knows its signed distance."""

    def __init__(self, center, edge: float):
        super().__init__(box_vertices(center, edge))
        object.__setattr__(self, "center", np.asarray(center, dtype=float).reshape(3))
        object.__setattr__(self, "edge", float(edge))

    def signed_distance(self, points: np.ndarray) -> np.ndarray:
        """Signed boundary distance, negative inside; vectorized over rows."""
        p = np.atleast_2d(np.asarray(points, dtype=float))
        q = np.abs(p - self.center) - 0.5 * self.edge
        outside = np.linalg.norm(np.maximum(q, 0.0), axis=1)
        inside = np.minimum(q.max(axis=1), 0.0)
        return outside + inside

    def signed_distance_gradient(self, point: np.ndarray) -> np.ndarray:
        offset = np.asarray(point, dtype=float) - self.center
        q = np.abs(offset) - 0.5 * self.edge
        if (q > 0.0).any():
            outward = np.maximum(q, 0.0) * np.sign(offset)
            norm = np.linalg.norm(outward)
            return outward / norm if norm > 1e-12 else np.array([0.0, 0.0, 1.0])
        axis = int(np.argmax(q))
        grad = np.zeros(3)
        grad[axis] = np.sign(offset[axis]) or 1.0
        return grad


# ----------------------------------------------------------------------------
# GJK distance
# ----------------------------------------------------------------------------

_SUBSETS = [list(s) for k in (1, 2, 3, 4) for s in combinations(range(4), k)]


def _closest_on_hull_reference(points: list[np.ndarray]) -> tuple[np.ndarray, list[int]]:
    """Minimum-norm point of the convex hull of up to four points.

    Enumerates every face of the simplex, solving the equality-constrained
    least-squares problem on each affine hull and keeping the best candidate
    with nonnegative barycentric weights.  Returns the point and the indices
    of the supporting vertices.  Slow but transparently correct; the fast
    closed-form routine below is tested against it.
    """
    k = len(points)
    p = np.asarray(points)
    best_sq = np.inf
    best_x = p[0]
    best_idx = [0]
    for subset in _SUBSETS:
        if subset[-1] >= k:
            continue
        q = p[subset]
        r = len(subset)
        if r == 1:
            lam = np.array([1.0])
        else:
            # KKT system for min ||q^T lam||^2 s.t. sum lam = 1
            a = np.empty((r + 1, r + 1))
            a[:r, :r] = 2.0 * (q @ q.T)
            a[:r, r] = 1.0
            a[r, :r] = 1.0
            a[r, r] = 0.0
            rhs = np.zeros(r + 1)
            rhs[r] = 1.0
            try:
                sol = np.linalg.solve(a, rhs)
            except np.linalg.LinAlgError:
                continue
            lam = sol[:r]
            if not np.isfinite(lam).all() or (lam < -1e-12).any():
                continue
        x = lam @ q
        sq = float(x @ x)
        if sq < best_sq - 1e-18:
            best_sq = sq
            best_x = x
            best_idx = [subset[i] for i in range(r) if lam[i] > 1e-13]
            if not best_idx:
                best_idx = list(subset)
    return best_x, best_idx


def _closest_on_segment(a, b, ia, ib):
    ab = b - a
    denom = float(ab @ ab)
    if denom < 1e-300:
        return a, [ia]
    t = -float(a @ ab) / denom
    if t <= 0.0:
        return a, [ia]
    if t >= 1.0:
        return b, [ib]
    return a + t * ab, [ia, ib]


def _closest_on_triangle(a, b, c, ia, ib, ic):
    """Closest point to the origin on triangle abc with supporting indices."""
    ab = b - a
    ac = c - a
    d1 = -float(ab @ a)
    d2 = -float(ac @ a)
    if d1 <= 0.0 and d2 <= 0.0:
        return a, [ia]
    d3 = -float(ab @ b)
    d4 = -float(ac @ b)
    if d3 >= 0.0 and d4 <= d3:
        return b, [ib]
    vc = d1 * d4 - d3 * d2
    if vc <= 0.0 and d1 >= 0.0 and d3 <= 0.0:
        v = d1 / (d1 - d3)
        return a + v * ab, [ia, ib]
    d5 = -float(ab @ c)
    d6 = -float(ac @ c)
    if d6 >= 0.0 and d5 <= d6:
        return c, [ic]
    vb = d5 * d2 - d1 * d6
    if vb <= 0.0 and d2 >= 0.0 and d6 <= 0.0:
        w = d2 / (d2 - d6)
        return a + w * ac, [ia, ic]
    va = d3 * d6 - d5 * d4
    if va <= 0.0 and d4 - d3 >= 0.0 and d5 - d6 >= 0.0:
        w = (d4 - d3) / ((d4 - d3) + (d5 - d6))
        return b + w * (c - b), [ib, ic]
    denom = va + vb + vc
    if abs(denom) < 1e-300:
        # degenerate triangle: best of its edges
        candidates = [
            _closest_on_segment(a, b, ia, ib),
            _closest_on_segment(a, c, ia, ic),
            _closest_on_segment(b, c, ib, ic),
        ]
        return min(candidates, key=lambda xc: float(xc[0] @ xc[0]))
    v = vb / denom
    w = vc / denom
    return a + ab * v + ac * w, [ia, ib, ic]


def _closest_on_hull(points: list[np.ndarray]) -> tuple[np.ndarray, list[int]]:
    """Closed-form minimum-norm point of the hull of up to four points."""
    k = len(points)
    if k == 1:
        return points[0], [0]
    if k == 2:
        return _closest_on_segment(points[0], points[1], 0, 1)
    if k == 3:
        return _closest_on_triangle(points[0], points[1], points[2], 0, 1, 2)
    a, b, c, d = points
    # barycentric interior test; singular matrix means a flat tetrahedron
    mat = np.column_stack([b - a, c - a, d - a])
    try:
        lam = np.linalg.solve(mat, -a)
    except np.linalg.LinAlgError:
        lam = None
    if (
        lam is not None
        and np.isfinite(lam).all()
        and (lam > -1e-12).all()
        and lam.sum() < 1.0 + 1e-12
    ):
        return np.zeros(3), [0, 1, 2, 3]
    faces = (
        _closest_on_triangle(a, b, c, 0, 1, 2),
        _closest_on_triangle(a, b, d, 0, 1, 3),
        _closest_on_triangle(a, c, d, 0, 2, 3),
        _closest_on_triangle(b, c, d, 1, 2, 3),
    )
    return min(faces, key=lambda xc: float(xc[0] @ xc[0]))


def _gjk_vector(a, b, max_iter: int = 200) -> np.ndarray:
    """Closest point to the origin of the Minkowski difference a - b."""

    def support(d):
        return a.support(d) - b.support(-d)

    v0 = a.reference_point() - b.reference_point()
    if np.linalg.norm(v0) < 1e-30:
        v0 = np.array([1.0, 0.0, 0.0])
    simplex = [support(-v0)]
    v = simplex[0]
    for _ in range(max_iter):
        v, keep = _closest_on_hull(simplex)
        simplex = [simplex[i] for i in keep]
        vv = float(v @ v)
        if vv < 1e-26:
            return np.zeros(3)
        w = support(-v)
        # no further progress possible in direction -v
        if vv - float(v @ w) <= 1e-12 * vv:
            return v
        if any(np.array_equal(w, u) for u in simplex):
            return v
        simplex.append(w)
        if len(simplex) > 4:
            simplex = simplex[-4:]
    return v


def gjk_distance(a, b) -> float:
    """Minimum Euclidean distance between two convex shapes (0 if intersecting)."""
    # balls reduce exactly to their centers with a radius offset
    if isinstance(a, Sphere):
        return max(0.0, gjk_distance(Point(a.center), b) - a.radius)
    if isinstance(b, Sphere):
        return max(0.0, gjk_distance(a, Point(b.center)) - b.radius)
    return float(np.linalg.norm(_gjk_vector(a, b)))


def point_distance(p: np.ndarray, shape) -> tuple[float, np.ndarray]:
    """Distance from a point to a convex shape plus the closest shape point."""
    p = np.asarray(p, dtype=float)
    if isinstance(shape, Sphere):
        offset = p - shape.center
        norm = float(np.linalg.norm(offset))
        if norm <= shape.radius:
            return 0.0, p.copy()
        return norm - shape.radius, shape.center + (shape.radius / norm) * offset
    if isinstance(shape, Point):
        return float(np.linalg.norm(p - shape.position)), shape.position
    v = _gjk_vector(Point(p), shape)
    return float(np.linalg.norm(v)), p - v


# ----------------------------------------------------------------------------
# Branch-and-bound minimum separation
# ----------------------------------------------------------------------------


class SubdivisionLimitError(RuntimeError):
    """Subdivision depth exhausted before the bound gap closed."""

    def __init__(self, depth: int, lower: float, upper: float):
        super().__init__(
            f"subdivision depth {depth} exhausted; tightest bracket [{lower}, {upper}]"
        )
        self.lower = lower
        self.upper = upper


@dataclass(frozen=True)
class SeparationQuery:
    """Inputs for the recursive minimum-separation search."""

    surface: BernsteinSurface
    obstacle: object
    alpha: float | None = None  # incoming upper bound; None -> root corner bound
    epsilon: float = 1e-4
    d_safe: float = 1e-2
    max_depth: int = 40

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.d_safe <= 0:
            raise ValueError("d_safe must be positive")
        if self.max_depth < 1:
            raise ValueError("max_depth must be at least 1")


@dataclass
class MinDistNode:
    """Diagnostic record of one visited subdivision node."""

    depth: int
    lower: float
    upper: float
    exit: str  # 'pruned', 'converged', or 'split'


@dataclass
class _Witness:
    distance: float = np.inf
    s: float = 0.0
    t: float = 0.0
    surface_point: np.ndarray = field(default_factory=lambda: np.zeros(3))
    obstacle_point: np.ndarray = field(default_factory=lambda: np.zeros(3))


def lower_bound(surface: BernsteinSurface, obstacle) -> float:
    """Hull-based lower bound: never exceeds the true minimum separation."""
    return gjk_distance(ControlCloud(surface), obstacle)


def _corner_params(surface: BernsteinSurface):
    s0, s1 = surface.s_domain
    t0, t1 = surface.t_domain
    return ((0, 0, s0, t0), (0, -1, s0, t1), (-1, 0, s1, t0), (-1, -1, s1, t1))


def upper_bound(surface: BernsteinSurface, obstacle) -> float:
    """Corner-based upper bound: corner control points lie on the surface."""
    cps = surface.control_points
    return min(
        point_distance(cps[i, j], obstacle)[0] for i, j, _, _ in _corner_params(surface)
    )


def _upper_bound_witness(surface: BernsteinSurface, obstacle, wit: _Witness) -> float:
    cps = surface.control_points
    best = np.inf
    for i, j, s, t in _corner_params(surface):
        d, q = point_distance(cps[i, j], obstacle)
        if d < best:
            best = d
            if d < wit.distance:
                wit.distance = d
                wit.s, wit.t = s, t
                wit.surface_point = cps[i, j].copy()
                wit.obstacle_point = q
    return best


def _min_dist_rec(surface, obstacle, alpha, eps, depth, max_depth, wit, trace):
    upper = _upper_bound_witness(surface, obstacle, wit)
    lower = gjk_distance(ControlCloud(surface), obstacle)
    if upper < alpha:
        alpha = upper
    if alpha < lower:
        if trace is not None:
            trace.append(MinDistNode(depth, lower, upper, "pruned"))
        return alpha
    if upper - lower < eps:
        if trace is not None:
            trace.append(MinDistNode(depth, lower, upper, "converged"))
        return alpha
    if depth >= max_depth:
        raise SubdivisionLimitError(depth, lower, min(upper, alpha))
    if trace is not None:
        trace.append(MinDistNode(depth, lower, upper, "split"))
    # alternate split axes; a static convex obstacle subdivides to itself, so
    # the four recursive pairings collapse to two
    if depth % 2 == 0:
        s0, s1 = surface.s_domain
        a_half, b_half, _ = surface.split_s(0.5 * (s0 + s1))
    else:
        t0, t1 = surface.t_domain
        a_half, b_half, _ = surface.split_t(0.5 * (t0 + t1))
    alpha = min(
        alpha, _min_dist_rec(a_half, obstacle, alpha, eps, depth + 1, max_depth, wit, trace)
    )
    alpha = min(
        alpha, _min_dist_rec(b_half, obstacle, alpha, eps, depth + 1, max_depth, wit, trace)
    )
    return alpha


def min_dist(query: SeparationQuery, trace: list | None = None) -> float:
    """Minimum separation between a position surface and a convex solid.

    The result is within ``query.epsilon`` of the true minimum unless a
    tighter incoming ``alpha`` prunes the search first, in which case the
    returned value is that upper bound.
    """
    wit = _Witness()
    alpha = query.alpha
    if alpha is None:
        alpha = _upper_bound_witness(query.surface, query.obstacle, wit)
    return _min_dist_rec(
        query.surface,
        query.obstacle,
        float(alpha),
        query.epsilon,
        0,
        query.max_depth,
        wit,
        trace,
    )


def min_dist_witness(query: SeparationQuery) -> tuple[float, _Witness]:
    """Like :func:`min_dist`, also returning the closest-approach record.

    The witness holds the surface parameters, surface point and obstacle
    point that realized the best corner bound encountered by the search.
    """
    wit = _Witness()
    alpha = query.alpha
    if alpha is None:
        alpha = _upper_bound_witness(query.surface, query.obstacle, wit)
    value = _min_dist_rec(
        query.surface,
        query.obstacle,
        float(alpha),
        query.epsilon,
        0,
        query.max_depth,
        wit,
        trace=None,
    )
    return value, wit


def clearance_constraint(
    surface: BernsteinSurface,
    obstacles,
    d_safe: float,
    epsilon: float,
    max_depth: int = 40,
) -> np.ndarray:
    """Per-obstacle residuals min_dist - d_safe; nonnegative means safe."""
    if d_safe <= 0:
        raise ValueError("d_safe must be positive")
    residuals = [
        min_dist(
            SeparationQuery(
                surface, obs, epsilon=epsilon, d_safe=d_safe, max_depth=max_depth
            )
        )
        - d_safe
        for obs in obstacles
    ]
    return np.asarray(residuals, dtype=float)
