"""Algebra on Bernstein polynomials and tensor-product Bernstein surfaces.

A surface of orders (m, n) is a control-point grid of shape (m+1, n+1) for
scalar values, or (m+1, n+1, d) for vector values, over a rectangular
parameter domain.  Control points are stored order-only; the domain lengths
enter exclusively through the differentiation matrices and through domain
normalization at evaluation time, so changing a domain length never touches
the coefficients.

Everything here is a pure function over immutable values; the matrix caches
are guarded by ``functools.lru_cache`` and safe for concurrent readers.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from math import comb

import numpy as np

__all__ = [
    "BernsteinPolynomial",
    "BernsteinSurface",
    "DomainError",
    "diff_matrix",
    "elevation_matrix",
]


class DomainError(ValueError):
    """Parameter outside a surface or polynomial domain."""


def _check_interval(name: str, interval) -> tuple[float, float]:
    lo, hi = float(interval[0]), float(interval[1])
    if not np.isfinite([lo, hi]).all() or hi <= lo:
        raise ValueError(f"{name} must be a finite interval of positive length, got {(lo, hi)}")
    return lo, hi


def _normalize(x: float, interval: tuple[float, float], name: str) -> float:
    lo, hi = interval
    u = (float(x) - lo) / (hi - lo)
    # tolerate roundoff just outside the interval
    if u < -1e-12 or u > 1.0 + 1e-12:
        raise DomainError(f"{name}={x} outside domain [{lo}, {hi}]")
    return min(max(u, 0.0), 1.0)


def _de_casteljau_collapse(cps: np.ndarray, u) -> np.ndarray:
    """Collapse axis 0 of ``cps`` at normalized parameter(s) ``u``.

    ``u`` may be a scalar or a 1-D array; an array prepends one axis of
    samples to the result.
    """
    u = np.asarray(u, dtype=float)
    if u.ndim == 0:
        b = cps
        for _ in range(cps.shape[0] - 1):
            b = (1.0 - u) * b[:-1] + u * b[1:]
        return b[0]
    w = u.reshape((-1,) + (1,) * cps.ndim)
    b = np.broadcast_to(cps, (u.size,) + cps.shape)
    for _ in range(cps.shape[0] - 1):
        b = (1.0 - w) * b[:, :-1] + w * b[:, 1:]
    return b[:, 0]


def _de_casteljau_split(cps: np.ndarray, u: float):
    """Split along axis 0 at normalized parameter u in (0, 1).

    Returns (left, right, seam) where seam is the evaluated cross-section
    (the last row of the left piece and the first row of the right piece).
    """
    left = [cps[0]]
    right = [cps[-1]]
    b = cps
    for _ in range(cps.shape[0] - 1):
        b = (1.0 - u) * b[:-1] + u * b[1:]
        left.append(b[0])
        right.append(b[-1])
    return np.stack(left), np.stack(right[::-1]), b[0]


@lru_cache(maxsize=None)
def _diff_matrix_unit(order: int) -> np.ndarray:
    """Unit-domain differentiation matrix of shape (order+1, order)."""
    d = np.zeros((order + 1, order))
    idx = np.arange(order)
    d[idx, idx] = -order
    d[idx + 1, idx] = order
    d.setflags(write=False)
    return d


def diff_matrix(order: int, length: float) -> np.ndarray:
    """Differentiation matrix: bidiagonal (order+1, order), scaled order/length.

    Transposed left action drops the row order by one; right action drops the
    column order by one.
    """
    if order < 1:
        raise ValueError("cannot differentiate order 0 in that direction")
    return _diff_matrix_unit(order) / float(length)


@lru_cache(maxsize=None)
def elevation_matrix(order: int, target: int) -> np.ndarray:
    """Degree-elevation matrix E of shape (order+1, target+1).

    Right action (cps @ E) raises a row of control points from ``order`` to
    ``target`` without changing the polynomial.  Entries are nonnegative and
    every column sums to one.
    """
    if target < order:
        raise ValueError(f"elevation target {target} below current order {order}")
    r = target - order
    e = np.zeros((order + 1, target + 1))
    for i in range(order + 1):
        for j in range(r + 1):
            e[i, i + j] = comb(r, j) * comb(order, i) / comb(target, i + j)
    e.setflags(write=False)
    return e


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class BernsteinPolynomial:
    """Univariate Bernstein polynomial over an interval."""

    control_points: np.ndarray
    domain: tuple[float, float] = (0.0, 1.0)

    def __post_init__(self):
        cps = _readonly(self.control_points)
        if cps.ndim not in (1, 2) or cps.shape[0] < 1:
            raise ValueError("control points must be (n+1,) or (n+1, d)")
        if not np.isfinite(cps).all():
            raise ValueError("control points must be finite")
        object.__setattr__(self, "control_points", cps)
        object.__setattr__(self, "domain", _check_interval("domain", self.domain))

    @property
    def order(self) -> int:
        return self.control_points.shape[0] - 1

    def __call__(self, x):
        u = _normalize(x, self.domain, "x")
        return _de_casteljau_collapse(self.control_points, u)


@dataclass(frozen=True)
class BernsteinSurface:
    """Tensor-product Bernstein surface defined by a control-point grid.

    Index i (axis 0) runs along the first parameter s, index j (axis 1) along
    the second parameter t.  An optional trailing axis holds vector
    components.
    """

    control_points: np.ndarray
    s_domain: tuple[float, float] = (0.0, 1.0)
    t_domain: tuple[float, float] = (0.0, 1.0)

    def __post_init__(self):
        cps = _readonly(self.control_points)
        if cps.ndim not in (2, 3):
            raise ValueError("control points must be (m+1, n+1) or (m+1, n+1, d)")
        if not np.isfinite(cps).all():
            raise ValueError("control points must be finite")
        object.__setattr__(self, "control_points", cps)
        object.__setattr__(self, "s_domain", _check_interval("s_domain", self.s_domain))
        object.__setattr__(self, "t_domain", _check_interval("t_domain", self.t_domain))

    # -- basic shape queries ------------------------------------------------

    @property
    def m(self) -> int:
        return self.control_points.shape[0] - 1

    @property
    def n(self) -> int:
        return self.control_points.shape[1] - 1

    @property
    def is_scalar(self) -> bool:
        return self.control_points.ndim == 2

    @property
    def dim(self) -> int:
        return 1 if self.is_scalar else self.control_points.shape[2]

    @property
    def s_length(self) -> float:
        return self.s_domain[1] - self.s_domain[0]

    @property
    def t_length(self) -> float:
        return self.t_domain[1] - self.t_domain[0]

    def component(self, k: int) -> "BernsteinSurface":
        """Scalar surface of one vector component."""
        if self.is_scalar:
            raise ValueError("surface is already scalar")
        return BernsteinSurface(self.control_points[:, :, k], self.s_domain, self.t_domain)

    def with_domains(self, s_domain, t_domain) -> "BernsteinSurface":
        """Same coefficients over different parameter intervals."""
        return BernsteinSurface(self.control_points, s_domain, t_domain)

    # -- evaluation ----------------------------------------------------------

    def evaluate(self, s: float, t: float):
        """Evaluate at a single (s, t) via the de Casteljau recurrence."""
        u = _normalize(s, self.s_domain, "s")
        w = _normalize(t, self.t_domain, "t")
        row = _de_casteljau_collapse(self.control_points, u)
        return _de_casteljau_collapse(row, w)

    def evaluate_grid(self, s_vals, t_vals) -> np.ndarray:
        """Evaluate on the outer product of two sample vectors.

        Returns shape (len(s_vals), len(t_vals)) for scalar surfaces and
        (len(s_vals), len(t_vals), d) for vector ones.
        """
        us = np.array([_normalize(s, self.s_domain, "s") for s in np.atleast_1d(s_vals)])
        ws = np.array([_normalize(t, self.t_domain, "t") for t in np.atleast_1d(t_vals)])
        rows = _de_casteljau_collapse(self.control_points, us)  # (S, n+1[, d])
        b = np.broadcast_to(rows[:, None], (rows.shape[0], ws.size) + rows.shape[1:])
        wv = ws.reshape((1, -1) + (1,) * (rows.ndim - 1))
        for _ in range(self.n):
            b = (1.0 - wv) * b[:, :, :-1] + wv * b[:, :, 1:]
        return b[:, :, 0]

    # -- arithmetic ----------------------------------------------------------

    def _require_same_domains(self, other: "BernsteinSurface"):
        if not (
            np.allclose(self.s_domain, other.s_domain, rtol=0.0, atol=1e-12)
            and np.allclose(self.t_domain, other.t_domain, rtol=0.0, atol=1e-12)
        ):
            raise ValueError("surfaces live on different domains")

    def __add__(self, other: "BernsteinSurface") -> "BernsteinSurface":
        self._require_same_domains(other)
        if self.control_points.shape != other.control_points.shape:
            raise ValueError("order mismatch; degree-elevate before adding")
        return BernsteinSurface(
            self.control_points + other.control_points, self.s_domain, self.t_domain
        )

    def __sub__(self, other: "BernsteinSurface") -> "BernsteinSurface":
        self._require_same_domains(other)
        if self.control_points.shape != other.control_points.shape:
            raise ValueError("order mismatch; degree-elevate before subtracting")
        return BernsteinSurface(
            self.control_points - other.control_points, self.s_domain, self.t_domain
        )

    def __mul__(self, other: "BernsteinSurface") -> "BernsteinSurface":
        return multiply(self, other)

    # -- calculus ------------------------------------------------------------

    def partial_s(self) -> "BernsteinSurface":
        """Partial derivative in s; the s-order drops by one."""
        d = diff_matrix(self.m, self.s_length)
        cps = np.tensordot(d.T, self.control_points, axes=(1, 0))
        return BernsteinSurface(cps, self.s_domain, self.t_domain)

    def partial_t(self) -> "BernsteinSurface":
        """Partial derivative in t; the t-order drops by one."""
        d = diff_matrix(self.n, self.t_length)
        cps = np.tensordot(self.control_points, d, axes=(1, 0))
        if not self.is_scalar:
            cps = np.moveaxis(cps, -1, 1)
        return BernsteinSurface(cps, self.s_domain, self.t_domain)

    def elevate(self, m_target: int, n_target: int) -> "BernsteinSurface":
        """Degree-elevate to orders (m_target, n_target); pointwise identical."""
        if m_target < self.m or n_target < self.n:
            raise ValueError(
                f"cannot elevate ({self.m},{self.n}) down to ({m_target},{n_target})"
            )
        cps = self.control_points
        if m_target > self.m:
            e = elevation_matrix(self.m, m_target)
            cps = np.tensordot(e.T, cps, axes=(1, 0))
        if n_target > self.n:
            e = elevation_matrix(self.n, n_target)
            out = np.tensordot(cps, e, axes=(1, 0))
            cps = out if cps.ndim == 2 else np.moveaxis(out, -1, 1)
        return BernsteinSurface(cps, self.s_domain, self.t_domain)

    # -- subdivision and edges -------------------------------------------------

    def split_s(self, s_div: float):
        """Subdivide at s_div in the open interval; returns (left, right, seam).

        The seam is the cross-section polynomial p(s_div, t) shared by both
        pieces.
        """
        lo, hi = self.s_domain
        if not (lo < s_div < hi):
            raise DomainError(f"s_div={s_div} not interior to [{lo}, {hi}]")
        u = (s_div - lo) / (hi - lo)
        left, right, seam = _de_casteljau_split(self.control_points, u)
        return (
            BernsteinSurface(left, (lo, s_div), self.t_domain),
            BernsteinSurface(right, (s_div, hi), self.t_domain),
            BernsteinPolynomial(seam, self.t_domain),
        )

    def split_t(self, t_div: float):
        """Subdivide at t_div in the open interval; returns (lower, upper, seam)."""
        lo, hi = self.t_domain
        if not (lo < t_div < hi):
            raise DomainError(f"t_div={t_div} not interior to [{lo}, {hi}]")
        u = (t_div - lo) / (hi - lo)
        swapped = np.swapaxes(self.control_points, 0, 1)
        first, second, seam = _de_casteljau_split(swapped, u)
        return (
            BernsteinSurface(np.swapaxes(first, 0, 1), self.s_domain, (lo, t_div)),
            BernsteinSurface(np.swapaxes(second, 0, 1), self.s_domain, (t_div, hi)),
            BernsteinPolynomial(seam, self.s_domain),
        )

    def edge(self, which: str) -> BernsteinPolynomial:
        """Boundary polynomial; ``which`` is one of 's0', 's1', 't0', 't1'.

        's0'/'s1' fix s at its lower/upper end (polynomial in t); 't0'/'t1'
        fix t (polynomial in s).
        """
        cps = self.control_points
        if which == "s0":
            return BernsteinPolynomial(cps[0], self.t_domain)
        if which == "s1":
            return BernsteinPolynomial(cps[-1], self.t_domain)
        if which == "t0":
            return BernsteinPolynomial(cps[:, 0], self.s_domain)
        if which == "t1":
            return BernsteinPolynomial(cps[:, -1], self.s_domain)
        raise ValueError(f"unknown edge {which!r}; expected 's0', 's1', 't0' or 't1'")

    # -- serialization ---------------------------------------------------------

    def to_json_dict(self) -> dict:
        """JSON object {"m","n","L","T","d","cps"}; requires zero-based domains."""
        if abs(self.s_domain[0]) > 1e-15 or abs(self.t_domain[0]) > 1e-15:
            raise ValueError("only zero-based domains serialize")
        cps = self.control_points
        if self.is_scalar:
            cps = cps[:, :, None]
        return {
            "m": self.m,
            "n": self.n,
            "L": self.s_domain[1],
            "T": self.t_domain[1],
            "d": self.dim,
            "cps": cps.tolist(),
        }

    @classmethod
    def from_json_dict(cls, obj: dict) -> "BernsteinSurface":
        cps = np.asarray(obj["cps"], dtype=float)
        if cps.ndim != 3:
            raise ValueError("cps must be a (m+1) x (n+1) x d nested list")
        if cps.shape != (obj["m"] + 1, obj["n"] + 1, obj["d"]):
            raise ValueError(
                f"cps shape {cps.shape} inconsistent with header "
                f"({obj['m']}, {obj['n']}, {obj['d']})"
            )
        if obj["d"] == 1:
            cps = cps[:, :, 0]
        return cls(cps, (0.0, float(obj["L"])), (0.0, float(obj["T"])))


def constant_surface(value, m: int, n: int, s_domain, t_domain) -> BernsteinSurface:
    """Surface of given orders that evaluates to ``value`` everywhere."""
    value = np.asarray(value, dtype=float)
    grid = np.broadcast_to(value, (m + 1, n + 1) + value.shape).copy()
    return BernsteinSurface(grid, s_domain, t_domain)


def _conv2(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Dense 2-D convolution of small coefficient grids."""
    out = np.zeros((a.shape[0] + b.shape[0] - 1, a.shape[1] + b.shape[1] - 1))
    for k in range(b.shape[0]):
        for l in range(b.shape[1]):
            out[k : k + a.shape[0], l : l + a.shape[1]] += b[k, l] * a
    return out


@lru_cache(maxsize=None)
def _binomial_vector(order: int) -> np.ndarray:
    v = np.array([comb(order, i) for i in range(order + 1)], dtype=float)
    v.setflags(write=False)
    return v


def multiply(g: BernsteinSurface, h: BernsteinSurface) -> BernsteinSurface:
    """Product surface; orders add.

    Coefficients follow the binomially weighted convolution of the two
    control-point grids; the result equals g*h pointwise.
    """
    if not (g.is_scalar and h.is_scalar):
        raise ValueError("multiply is defined for scalar surfaces")
    g._require_same_domains(h)
    wg = np.outer(_binomial_vector(g.m), _binomial_vector(g.n))
    wh = np.outer(_binomial_vector(h.m), _binomial_vector(h.n))
    raw = _conv2(g.control_points * wg, h.control_points * wh)
    wout = np.outer(_binomial_vector(g.m + h.m), _binomial_vector(g.n + h.n))
    return BernsteinSurface(raw / wout, g.s_domain, g.t_domain)


def squared_norm_surface(vec: BernsteinSurface) -> BernsteinSurface:
    """Sum over components of the squared surface; scalar result of doubled order."""
    if vec.is_scalar:
        return multiply(vec, vec)
    total = None
    for k in range(vec.dim):
        c = vec.component(k)
        sq = multiply(c, c)
        total = sq if total is None else total + sq
    return total
