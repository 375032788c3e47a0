"""Continuum oracle on the interval [0, 1].

Functions carry closed-form value, first and second derivative evaluators;
inner products are composite Simpson sums on a uniform grid. The normal
at the boundary points outward: ``d_nu`` is ``-d/dx`` at 0 and ``+d/dx``
at 1. With this orientation ``d_nu L^{-1}`` is the negative adjoint of the
harmonic continuation ``Pi``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.integrate import simpson

DEFAULT_M = 401
# d_nu L^{-1} applied to the harmonic basis {1, x}
DNU_INV_BASIS = -np.array([[1 / 2, 1 / 6], [1 / 2, 1 / 3]])
DTN_MATRIX = np.array([[1.0, -1.0], [-1.0, 1.0]])
LINEAR_GRAM = np.array([[1.0, 1 / 2], [1 / 2, 1 / 3]])


def _as_fn(c):
    return c if callable(c) else (lambda x, c=float(c): np.full_like(np.asarray(x, dtype=float), c))


@dataclass(frozen=True)
class SmoothFunction1D:
    value: Callable
    first: Callable
    second: Callable
    M: int = DEFAULT_M
    name: str = ""

    def __post_init__(self):
        if self.M < 3 or self.M % 2 == 0:
            raise ValueError("Simpson quadrature needs an odd number of points >= 3")

    @property
    def grid(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.M)

    def __call__(self, x):
        return self.value(np.asarray(x, dtype=float))

    def with_grid(self, M: int) -> "SmoothFunction1D":
        return SmoothFunction1D(self.value, self.first, self.second, M, self.name)

    def derivative_errors(self) -> tuple[float, float]:
        """Centered-difference mismatch of the first and second derivatives."""
        x = self.grid
        h = x[1] - x[0]
        f, d1 = self.value(x), self.first(x)
        e1 = np.max(np.abs((f[2:] - f[:-2]) / (2 * h) - self.first(x[1:-1])))
        e2 = np.max(np.abs((d1[2:] - d1[:-2]) / (2 * h) - self.second(x[1:-1])))
        return float(e1), float(e2)


@dataclass(frozen=True)
class BoundaryPair:
    """Values at the endpoints 0 and 1."""

    at0: float
    at1: float

    def __post_init__(self):
        if not (np.isfinite(self.at0) and np.isfinite(self.at1)):
            raise ValueError("boundary values must be finite")

    def as_array(self) -> np.ndarray:
        return np.array([self.at0, self.at1])

    @classmethod
    def of(cls, arr) -> "BoundaryPair":
        return cls(float(arr[0]), float(arr[1]))

    def dot(self, other: "BoundaryPair") -> float:
        return self.at0 * other.at0 + self.at1 * other.at1


def function(value, first, second, M: int = DEFAULT_M, name: str = "") -> SmoothFunction1D:
    return SmoothFunction1D(_as_fn(value), _as_fn(first), _as_fn(second), M, name)


def linear(a: float, b: float, M: int = DEFAULT_M, name: str = "") -> SmoothFunction1D:
    """``a + b x``."""
    return function(lambda x: a + b * np.asarray(x, dtype=float), b, 0.0, M, name or f"{a:g}+{b:g}x")


def inner(u: SmoothFunction1D, v: SmoothFunction1D, which=("value", "value")) -> float:
    """``(D u, D' v)`` in L2(0, 1) by Simpson on the finer of the two grids."""
    x = np.linspace(0.0, 1.0, max(u.M, v.M))
    fu = getattr(u, which[0])(x)
    fv = getattr(v, which[1])(x)
    return float(simpson(fu * fv, x=x))


def _integrate(f, a, b, M):
    # Simpson on [a, b] for each pair of endpoints, M nodes per interval
    s = np.linspace(0.0, 1.0, M)
    nodes = a[:, None] + (b - a)[:, None] * s[None, :]
    return simpson(f(nodes), x=s, axis=1) * (b - a)


def trace(y: SmoothFunction1D) -> BoundaryPair:
    v = y.value(np.array([0.0, 1.0]))
    return BoundaryPair(float(v[0]), float(v[1]))


def normal_derivative(y: SmoothFunction1D) -> BoundaryPair:
    d = y.first(np.array([0.0, 1.0]))
    return BoundaryPair(float(-d[0]), float(d[1]))


def green_kernel(x, s) -> np.ndarray:
    """Dirichlet Green function ``min(x, s) (1 - max(x, s))``."""
    x, s = np.asarray(x, dtype=float), np.asarray(s, dtype=float)
    return np.minimum(x, s) * (1 - np.maximum(x, s))


def green_apply(y: SmoothFunction1D) -> SmoothFunction1D:
    """``u = L^{-1} y``: ``-u'' = y`` with ``u(0) = u(1) = 0``.

    ``u(x) = (1 - x) int_0^x s y ds + x int_x^1 (1 - s) y ds``, each integral
    by Simpson with ``M`` nodes.
    """
    M = y.M

    def parts(x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        flat = x.ravel()
        zero, one = np.zeros_like(flat), np.ones_like(flat)
        left = _integrate(lambda s: s * y.value(s), zero, flat, M)
        right = _integrate(lambda s: (1 - s) * y.value(s), flat, one, M)
        return flat, left, right, x.shape

    def value(x):
        flat, left, right, shape = parts(x)
        return ((1 - flat) * left + flat * right).reshape(shape)

    def first(x):
        _, left, right, shape = parts(x)
        return (right - left).reshape(shape)

    def second(x):
        return -y.value(np.asarray(x, dtype=float))

    return SmoothFunction1D(value, first, second, M, f"Linv({y.name})")


def harmonic_continuation(f: BoundaryPair, M: int = DEFAULT_M) -> SmoothFunction1D:
    """``Pi f = f0 (1 - x) + f1 x``."""
    return linear(f.at0, f.at1 - f.at0, M, f"Pi({f.at0:g},{f.at1:g})")


def dtn(f: BoundaryPair) -> BoundaryPair:
    """Dirichlet-to-Neumann map ``Lambda f = d_nu Pi f``."""
    return BoundaryPair.of(DTN_MATRIX @ f.as_array())


def normal_derivative_of_inverse(y: SmoothFunction1D) -> BoundaryPair:
    """``d_nu L^{-1} y = (-int (1 - s) y ds, -int s y ds)``."""
    x = y.grid
    fy = y.value(x)
    return BoundaryPair(-float(simpson((1 - x) * fy, x=x)), -float(simpson(x * fy, x=x)))


def gamma1(y: SmoothFunction1D) -> BoundaryPair:
    """Canonical first boundary operator: the trace."""
    return trace(y)


def gamma2(y: SmoothFunction1D) -> BoundaryPair:
    """Canonical second boundary operator ``d_nu y - Lambda (y|boundary)``."""
    return BoundaryPair.of(normal_derivative(y).as_array() - dtn(trace(y)).as_array())


def minus_second(y: SmoothFunction1D) -> SmoothFunction1D:
    """``L0* y = -y''`` as a function (its own derivatives are not carried)."""
    nan = lambda x: np.full_like(np.asarray(x, dtype=float), np.nan)
    return SmoothFunction1D(lambda x: -y.second(x), nan, nan, y.M, f"-({y.name})''")


def linear_projection(y: SmoothFunction1D) -> np.ndarray:
    """Coefficients ``(a, b)`` of the L2 projection of ``y`` onto ``{a + b x}``."""
    x = y.grid
    fy = y.value(x)
    rhs = np.array([simpson(fy, x=x), simpson(x * fy, x=x)])
    return np.linalg.solve(LINEAR_GRAM, rhs)


@dataclass(frozen=True)
class VishikComponents:
    y0: SmoothFunction1D
    g: SmoothFunction1D
    h: SmoothFunction1D
    g_coeffs: np.ndarray = field(repr=False)
    h_trace: BoundaryPair = field(repr=False)


def vishik_components(y: SmoothFunction1D) -> VishikComponents:
    """``y = y0 + L^{-1} g + h`` with ``g, h`` linear.

    ``h = Pi(y|boundary)`` and ``g`` solves ``d_nu L^{-1} g = d_nu y - Lambda(y|boundary)``
    in the basis ``{1, x}``.
    """
    tr = trace(y)
    h = harmonic_continuation(tr, y.M)
    data = normal_derivative(y).as_array() - dtn(tr).as_array()
    a, b = np.linalg.solve(DNU_INV_BASIS, data)
    g = linear(a, b, y.M, "g")
    lg = green_apply(g)

    def value(x):
        return y.value(x) - lg.value(x) - h.value(x)

    def first(x):
        return y.first(x) - lg.first(x) - h.first(x)

    def second(x):
        return y.second(x) - lg.second(x)

    y0 = SmoothFunction1D(value, first, second, y.M, "y0")
    return VishikComponents(y0, g, h, np.array([a, b]), tr)


def green_formula_sides(u: SmoothFunction1D, v: SmoothFunction1D) -> dict:
    """Both sides of ``(L0* u, v) - (u, L0* v) = (g1 u, g2 v) - (g2 u, g1 v)``."""
    x = np.linspace(0.0, 1.0, max(u.M, v.M))
    lhs = float(simpson(-u.second(x) * v.value(x), x=x) - simpson(u.value(x) * -v.second(x), x=x))
    rhs = gamma1(u).dot(gamma2(v)) - gamma2(u).dot(gamma1(v))
    return {"lhs": lhs, "rhs": float(rhs), "defect": abs(lhs - rhs)}


def green_formula_check(u: SmoothFunction1D, v: SmoothFunction1D) -> float:
    return green_formula_sides(u, v)["defect"]


# --- function library ----------------------------------------------------------


def library(M: int = DEFAULT_M) -> dict[str, SmoothFunction1D]:
    """Named smooth test functions with exact derivatives."""
    e = np.exp
    return {
        "x^2": function(lambda x: x**2, lambda x: 2 * x, 2.0, M, "x^2"),
        "x^3": function(lambda x: x**3, lambda x: 3 * x**2, lambda x: 6 * x, M, "x^3"),
        "3-x": linear(3.0, -1.0, M, "3-x"),
        "exp(x)": function(e, e, e, M, "exp(x)"),
        "sin(3x)": function(lambda x: np.sin(3 * x), lambda x: 3 * np.cos(3 * x),
                            lambda x: -9 * np.sin(3 * x), M, "sin(3x)"),
        "cos(2x)": function(lambda x: np.cos(2 * x), lambda x: -2 * np.sin(2 * x),
                            lambda x: -4 * np.cos(2 * x), M, "cos(2x)"),
        "x*exp(x)": function(lambda x: x * e(x), lambda x: (1 + x) * e(x),
                             lambda x: (2 + x) * e(x), M, "x*exp(x)"),
    }


LIBRARY_PAIRS = (
    ("x^2", "x^3"),
    ("exp(x)", "sin(3x)"),
    ("cos(2x)", "x*exp(x)"),
    ("x^2", "x^2"),
    ("3-x", "x^3"),
)


def convergence_slope(u: SmoothFunction1D, v: SmoothFunction1D, grids=(11, 21, 41, 81)) -> dict:
    """Log-log slope of the Green-formula defect under grid halving."""
    defects = np.array([green_formula_check(u.with_grid(M), v.with_grid(M)) for M in grids])
    h = 1.0 / (np.asarray(grids) - 1)
    slopes = np.diff(np.log(defects)) / np.diff(np.log(h))
    return {"grids": list(grids), "defects": defects.tolist(), "slopes": slopes.tolist(),
            "min_slope": float(np.min(slopes))}
