"""Wave dynamics with boundary control, reachability and inflation.

States are ``u^h(t)`` for controls ``h`` taking values in ``K``. Two
representations of the solution are provided: the weak (Duhamel) form,
driven by ``h''``, and the classical form for the smoother class, driven by
``h'''`` and carrying the Vishik triple of every state.

Time enters reachability and inflation through a wave-front degree:
``OperatorModel.krylov_degree(t)`` counts how many steps along the sparsity
graph of ``L`` a front covers in time ``t`` (one node per mesh width for the
three-point Laplacian, i.e. unit speed).

* Reachable sets (``"krylov"``, default) span ``L^j K`` up to that degree.
* Inflation (``"local"``, default) returns all vectors supported within
  that many graph steps of the support of ``A``. Sources in the continuum
  range over every profile on their support, which this reproduces; it is
  exactly monotone and keeps lattices of coordinate subspaces finite.
* ``"krylov"`` inflation spans ``L^j A`` up to the degree.
* ``"kernel"`` spans Duhamel kernel columns on a tau-grid with a loose rank
  cut; it follows the continuous-time formulas but leaks through spectral
  tails, so it is kept for comparison only.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .lattice import (
    LatticeFn,
    Subspace,
    complement,
    orthonormalize,
    span,
    zero_subspace,
)
from .operator import OperatorModel, VishikElement, adjoint_action, apply_function, embed, gamma1

KRYLOV_TOL = 1e-10
SUPPORT_TOL = 1e-20  # projector diagonal below this is outside the support
KERNEL_RANK_TOL = 1e-6
DEFAULT_TAU_STEP = 1.0 / 400
CLASS_TAGS = ("C2_admissible", "M_class")


# --- controls ----------------------------------------------------------------


@dataclass(frozen=True)
class ScalarProfile:
    """Scalar coefficient ``c(t)`` with closed-form derivatives up to order 3."""

    value: Callable[[np.ndarray], np.ndarray]
    d1: Callable[[np.ndarray], np.ndarray]
    d2: Callable[[np.ndarray], np.ndarray]
    d3: Callable[[np.ndarray], np.ndarray]

    def derivative(self, order: int):
        return (self.value, self.d1, self.d2, self.d3)[order]


def polynomial_profile(coeffs: dict[int, float]) -> ScalarProfile:
    """``c(t) = sum_p a_p t^p`` from a ``{power: coefficient}`` map."""
    poly = np.polynomial.Polynomial([coeffs.get(p, 0.0) for p in range(max(coeffs, default=0) + 1)])
    polys = [poly.deriv(k) if k else poly for k in range(4)]

    def make(p):
        return lambda t: p(np.asarray(t, dtype=float))

    return ScalarProfile(*(make(p) for p in polys))


def power_profile(p: int, scale: float = 1.0) -> ScalarProfile:
    return polynomial_profile({p: scale})


def sine_profile(omega: float, scale: float = 1.0) -> ScalarProfile:
    """``scale * (sin(w t) - w t + (w t)^3 / 6)``, flat to third order at 0."""
    w = omega

    def v(t):
        t = np.asarray(t, dtype=float)
        return scale * (np.sin(w * t) - w * t + (w * t) ** 3 / 6)

    def d1(t):
        t = np.asarray(t, dtype=float)
        return scale * w * (np.cos(w * t) - 1 + (w * t) ** 2 / 2)

    def d2(t):
        t = np.asarray(t, dtype=float)
        return scale * w**2 * (-np.sin(w * t) + w * t)

    def d3(t):
        t = np.asarray(t, dtype=float)
        return scale * w**3 * (1 - np.cos(w * t))

    return ScalarProfile(v, d1, d2, d3)


def uniform_grid(T: float, steps: int) -> np.ndarray:
    if T <= 0 or steps < 1:
        raise ValueError("need T > 0 and at least one step")
    return np.linspace(0.0, T, steps + 1)


@dataclass(frozen=True, eq=False)
class Control:
    """``h(t) = sum_j c_j(t) k_j`` with ``k_j`` an orthonormal basis of ``K``."""

    k_basis: np.ndarray
    coeffs: tuple
    t_grid: np.ndarray
    class_tag: str = "M_class"

    def __post_init__(self):
        kb = np.asarray(self.k_basis, dtype=float)
        coeffs = tuple(self.coeffs)
        grid = np.asarray(self.t_grid, dtype=float)
        if kb.ndim != 2 or kb.shape[1] != len(coeffs):
            raise ValueError("one coefficient profile per K-basis column is required")
        if self.class_tag not in CLASS_TAGS:
            raise ValueError(f"class_tag must be one of {CLASS_TAGS}")
        if grid.ndim != 1 or len(grid) < 2 or grid[0] != 0.0:
            raise ValueError("t_grid must start at 0 and have at least two points")
        steps = np.diff(grid)
        if np.any(steps <= 0) or np.ptp(steps) > 1e-9 * steps[0]:
            raise ValueError("t_grid must be uniform")
        object.__setattr__(self, "k_basis", kb)
        object.__setattr__(self, "coeffs", coeffs)
        object.__setattr__(self, "t_grid", grid)
        orders = (0, 1, 2) if self.class_tag == "M_class" else (0, 1)
        for k in orders:
            v = np.linalg.norm(self.evaluate(0.0, k))
            if v > 1e-12:
                raise ValueError(f"{self.class_tag} control needs h^({k})(0) = 0, got norm {v:.3e}")

    @property
    def dt(self) -> float:
        return float(self.t_grid[1] - self.t_grid[0])

    @property
    def T(self) -> float:
        return float(self.t_grid[-1])

    def coefficient_values(self, t, order: int = 0) -> np.ndarray:
        """Coefficients ``c_j^(order)(t)``, shape ``(len(t), k)``."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        cols = [np.broadcast_to(c.derivative(order)(t), t.shape) for c in self.coeffs]
        return np.column_stack(cols) if cols else np.zeros((len(t), 0))

    def evaluate(self, t, order: int = 0) -> np.ndarray:
        """``h^(order)(t)``; a vector for scalar ``t``, rows for an array."""
        vals = self.coefficient_values(t, order) @ self.k_basis.T
        return vals[0] if np.ndim(t) == 0 else vals

    def derivative_errors(self) -> np.ndarray:
        """Centered-difference mismatch of orders 1..3 on the interior grid."""
        t, dt = self.t_grid, self.dt
        errs = []
        for k in (1, 2, 3):
            lo = self.coefficient_values(t[:-2], k - 1)
            hi = self.coefficient_values(t[2:], k - 1)
            fd = (hi - lo) / (2 * dt)
            errs.append(float(np.max(np.abs(fd - self.coefficient_values(t[1:-1], k)), initial=0.0)))
        return np.array(errs)

    def __add__(self, other: "Control") -> "Control":
        if not np.array_equal(self.t_grid, other.t_grid):
            raise ValueError("controls live on different grids")
        tag = "M_class" if self.class_tag == other.class_tag == "M_class" else "C2_admissible"
        return Control(np.hstack([self.k_basis, other.k_basis]), self.coeffs + other.coeffs, self.t_grid, tag)


def control_along(model: OperatorModel, k_weights: Sequence[float], profile: ScalarProfile,
                  t_grid, class_tag: str = "M_class") -> Control:
    """Single-profile control ``h(t) = c(t) k`` with ``k = K.basis @ k_weights``."""
    k = model.K.basis @ np.asarray(k_weights, dtype=float)
    return Control(k[:, None], (profile,), t_grid, class_tag)


@dataclass(frozen=True, eq=False)
class Trajectory:
    t_grid: np.ndarray
    states: np.ndarray
    triples: tuple | None = field(default=None)

    def __post_init__(self):
        if np.linalg.norm(self.states[0]) > 1e-12:
            raise ValueError("trajectory must start from the zero state")


# --- solution operators ------------------------------------------------------


def _output_indices(h: Control, t_grid) -> np.ndarray:
    if t_grid is None:
        return np.arange(len(h.t_grid))
    t_grid = np.asarray(t_grid, dtype=float)
    idx = np.rint(t_grid / h.dt).astype(int)
    if (np.any(idx < 0) or np.any(idx >= len(h.t_grid))
            or np.max(np.abs(h.t_grid[np.clip(idx, 0, len(h.t_grid) - 1)] - t_grid)) > 1e-9 * h.dt):
        raise ValueError("requested output grid is not a subset of the control grid")
    return idx


def _duhamel(model: OperatorModel, h: Control, order: int, kernel: Callable, idx) -> np.ndarray:
    # integral_0^t kernel(t - s) h^(order)(s) ds in the eigenbasis, composite
    # Simpson with 2i subintervals on [0, t_i] (nodes every dt/2)
    lam = model.eigenvalues
    kt = model.eigenvectors.T @ h.k_basis
    half = h.dt / 2
    out = np.zeros((len(idx), model.dim))
    max_i = int(np.max(idx, initial=0))
    s_nodes = np.arange(2 * max_i + 1) * half
    src = h.coefficient_values(s_nodes, order) @ kt.T
    for row, i in enumerate(idx):
        if i == 0:
            continue
        m = 2 * i
        w = np.ones(m + 1)
        w[1:-1:2] = 4
        w[2:-1:2] = 2
        w *= half / 3
        tau = (m - np.arange(m + 1)) * half
        coef = kernel(tau[:, None], lam[None, :]) * src[: m + 1]
        out[row] = model.eigenvectors @ (w @ coef)
    return out


def _sine_kernel(tau, lam):
    r = np.sqrt(lam)
    return np.sin(tau * r) / r


def _one_minus_cos_kernel(tau, lam):
    return 1.0 - np.cos(tau * np.sqrt(lam))


def weak_solution(model: OperatorModel, h: Control, t_grid=None) -> Trajectory:
    """``u(t) = -h(t) + int_0^t L^{-1/2} sin((t-s) L^{1/2}) h''(s) ds``."""
    idx = _output_indices(h, t_grid)
    integral = _duhamel(model, h, 2, _sine_kernel, idx)
    states = integral - h.evaluate(h.t_grid[idx], 0)
    states[idx == 0] = 0.0
    return Trajectory(h.t_grid[idx], states)


def classical_integral(model: OperatorModel, h: Control, t_grid=None) -> np.ndarray:
    """``w(t) = int_0^t (I - cos((t-s) L^{1/2})) h'''(s) ds`` on the grid."""
    if h.class_tag != "M_class":
        raise ValueError("the classical representation needs an M_class control (h''(0) = 0)")
    idx = _output_indices(h, t_grid)
    return _duhamel(model, h, 3, _one_minus_cos_kernel, idx)


def classical_solution(model: OperatorModel, h: Control, t_grid=None) -> Trajectory:
    """``u(t) = -h(t) + L^{-1} w(t)`` together with the Vishik triple of each state.

    The triple is ``y0 = L^{-1} P_perp w``, ``g = P w``, ``h_part = -h(t)``.
    """
    idx = _output_indices(h, t_grid)
    w = classical_integral(model, h, h.t_grid[idx])
    hv = h.evaluate(h.t_grid[idx], 0)
    hv[idx == 0] = 0.0
    triples = []
    for wi, hi in zip(w, hv):
        y0 = apply_function(model, "inverse", model.P_perp @ wi)
        triples.append(VishikElement(y0, model.P @ wi, -hi))
    states = apply_function(model, "inverse", w.T).T - hv
    return Trajectory(h.t_grid[idx], states, tuple(triples))


def embed_states(model: OperatorModel, traj: Trajectory) -> np.ndarray:
    """Ambient states rebuilt from the trajectory's Vishik triples."""
    if traj.triples is None:
        raise ValueError("trajectory carries no triples")
    return np.array([embed(model, y) for y in traj.triples])


def quadrature_error_estimate(model: OperatorModel, h: Control) -> float:
    """Simpson error of the solution operators at the control's step.

    Both representations are recomputed with half the step. For a
    fourth-order rule the coarse error is ``16/15`` of the coarse-fine
    difference; the larger of the weak and classical estimates is returned
    (the weak one alone for C2-admissible controls).
    """
    fine = Control(h.k_basis, h.coeffs, np.linspace(0.0, h.T, 2 * (len(h.t_grid) - 1) + 1), h.class_tag)
    shared = fine.t_grid[::2]
    solvers = [weak_solution] + ([classical_solution] if h.class_tag == "M_class" else [])
    worst = 0.0
    for solve in solvers:
        diff = solve(model, h).states - solve(model, fine, shared).states
        worst = max(worst, float(np.max(np.linalg.norm(diff, axis=1))) * 16 / 15)
    return worst


def residual_check(model: OperatorModel, h: Control) -> dict:
    """Wave, boundary and initial residuals of the classical solution."""
    if h.class_tag != "M_class":
        raise ValueError("residual check needs an M_class control")
    if len(h.t_grid) < 5:
        raise ValueError("grid too coarse: at least 5 points are required")
    traj = classical_solution(model, h)
    u, dt = traj.states, h.dt
    d2 = (u[2:] - 2 * u[1:-1] + u[:-2]) / dt**2
    action = np.array([adjoint_action(model, y, check=False) for y in traj.triples])
    wave = float(np.max(np.linalg.norm(d2 + action[1:-1], axis=1)))
    hv = h.evaluate(traj.t_grid, 0)
    bnd = max(float(np.linalg.norm(gamma1(model, y, check=False) - hv[i])) for i, y in enumerate(traj.triples))
    init = float(np.linalg.norm(u[0]) + np.linalg.norm((u[1] - u[0]) / dt))
    return {"wave_residual": wave, "boundary_residual": bnd, "initial_residual": init}


def w_solution(model: OperatorModel, y, t: float) -> np.ndarray:
    """``w^y(t) = L^{-1/2} sin(t L^{1/2}) y``."""
    return apply_function(model, "sine_prop", y, t)


# --- Krylov spaces -----------------------------------------------------------


def krylov_blocks(L: np.ndarray, start: np.ndarray, max_degree: int, tol: float = KRYLOV_TOL) -> list[np.ndarray]:
    """Orthonormal blocks ``Q_0, Q_1, ...`` with ``span(Q_0..Q_j) = span{L^i S : i <= j}``.

    Each new block is ``L Q_j`` with all earlier directions removed (two
    passes of block Gram-Schmidt). Directions whose residual falls below
    ``tol * ||L||`` are treated as already present; the sweep stops once a
    block comes out empty.
    """
    q0 = orthonormalize(start)
    blocks = [q0] if q0.shape[1] else []
    if not blocks:
        return blocks
    n = L.shape[0]
    scale = np.linalg.norm(L, 2)
    basis = q0
    for _ in range(max_degree):
        if basis.shape[1] >= n:
            break
        w = L @ blocks[-1]
        for _ in range(2):
            w = w - basis @ (basis.T @ w)
        u, s, _ = np.linalg.svd(w, full_matrices=False)
        r = int(np.count_nonzero(s > tol * scale))
        if r == 0:
            break
        q = u[:, :r]
        q = q - basis @ (basis.T @ q)
        q, _ = np.linalg.qr(q)
        blocks.append(q)
        basis = np.hstack([basis, q])
    return blocks


def krylov_span(model: OperatorModel, start: Subspace, degree: int | None = None) -> Subspace:
    """``span{L^i A : 0 <= i <= degree}`` (full depth by default)."""
    if start.is_zero:
        return start
    degree = model.dim - 1 if degree is None else degree
    blocks = krylov_blocks(model.L, start.basis, degree)
    return Subspace(orthonormalize(np.hstack(blocks), start.rank_tol), start.rank_tol)


def krylov_sequence(model: OperatorModel, start: Subspace, max_degree: int) -> list[Subspace]:
    """Spans of degree ``0..max_degree`` from a single block sweep.

    Entries beyond the saturation degree repeat the same object, so
    identity comparisons can short-circuit order tests.
    """
    if start.is_zero:
        return [start] * (max_degree + 1)
    blocks = krylov_blocks(model.L, start.basis, max_degree)
    seq, acc = [], None
    for j in range(max_degree + 1):
        if j < len(blocks):
            if acc is None:
                acc = blocks[0]
                seq.append(start)
            else:
                acc = np.hstack([acc, blocks[j]])
                seq.append(Subspace(_canon(acc), start.rank_tol))
        else:
            seq.append(seq[-1])
    return seq


def _canon(q: np.ndarray) -> np.ndarray:
    # orthonormal and reproducible; re-orthonormalize to clear drift
    q, _ = np.linalg.qr(q)
    return orthonormalize(q)


def boundary_source(model: OperatorModel) -> Subspace:
    """``L K``: the directions a control excites first."""
    return span(model.L @ model.K.basis, model.K.rank_tol)


# --- reachability ------------------------------------------------------------


def _tau_grid(t: float, tau_step: float) -> np.ndarray:
    n = max(1, int(np.ceil(t / tau_step - 1e-9)))
    return np.linspace(t / n, t, n)


def reachable(model: OperatorModel, t: float, method: str = "krylov",
              tau_step: float = DEFAULT_TAU_STEP, rank_tol: float = KERNEL_RANK_TOL) -> Subspace:
    """Closure of the states reachable at time ``t``.

    ``krylov``: ``span{L^j K : 1 <= j <= krylov_degree(t) + 1}``; the kernel
    ``-tau + sin(tau sqrt L)/sqrt L`` applied to ``K`` expands in exactly
    these powers. ``kernel``: the span of those kernel columns on a
    tau-grid of ``(0, t]`` with relative rank cut ``rank_tol``.
    """
    if t < 0:
        raise ValueError("time must be nonnegative")
    if t == 0:
        return zero_subspace(model.dim)
    if method == "krylov":
        return krylov_span(model, boundary_source(model), model.krylov_degree(t))
    if method == "kernel":
        cols = []
        for tau in _tau_grid(t, tau_step):
            cols.append(apply_function(model, "sine_prop", model.K.basis, tau) - tau * model.K.basis)
        return span(np.hstack(cols), rank_tol)
    raise ValueError(f"unknown method {method!r}")


def reachable_fn(model: OperatorModel, t_grid) -> LatticeFn:
    """``t -> reachable(t)`` on a grid (the Krylov method)."""
    t_grid = np.asarray(t_grid, dtype=float)
    degrees = [model.krylov_degree(t) for t in t_grid]
    seq = krylov_sequence(model, boundary_source(model), max(degrees))
    zero = zero_subspace(model.dim)
    return LatticeFn(t_grid, tuple(zero if t == 0 else seq[d] for t, d in zip(t_grid, degrees)))


def total_reachable(model: OperatorModel) -> Subspace:
    """``span{L^n k : k in K, 0 <= n < dim}``."""
    return krylov_span(model, model.K)


def defect_subspace(model: OperatorModel) -> Subspace:
    return complement(total_reachable(model))


def is_controllable(model: OperatorModel) -> dict:
    d = defect_subspace(model)
    return {"verdict": d.dim == 0, "defect_dim": d.dim}


def cnsa_oracle(model: OperatorModel, tol: float = KRYLOV_TOL, stop_tol: float = 1e-8) -> dict:
    """Largest ``L``-invariant subspace orthogonal to ``K``.

    Iterates ``N_0 = K^perp``, ``N_{j+1} = N_j cap L^{-1} N_j``. The
    intersection is the set of ``x in N_j`` with ``L x in N_j``, taken as
    the null space of ``(I - P_N) L B_N`` with singular values below
    ``tol * ||L||`` counted as zero.
    """
    scale = np.linalg.norm(model.L, 2)
    basis = complement(model.K).basis
    dims = [basis.shape[1]]
    for _ in range(model.dim + 1):
        if basis.shape[1] == 0:
            break
        m = model.L @ basis
        m = m - basis @ (basis.T @ m)
        _, s, vt = np.linalg.svd(m, full_matrices=True)
        if s[0] <= stop_tol * scale:
            break
        s = np.concatenate([s, np.zeros(basis.shape[1] - len(s))])
        null = vt[s <= tol * scale].T
        if null.shape[1] == basis.shape[1]:
            break
        basis = orthonormalize(basis @ null) if null.shape[1] else np.zeros((model.dim, 0))
        dims.append(basis.shape[1])
    else:
        raise RuntimeError(f"invariance iteration did not settle: dims {dims}")
    part = Subspace(basis) if basis.shape[1] else zero_subspace(model.dim)
    return {"is_cnsa": part.dim == 0, "max_selfadjoint_part": part, "iterations": len(dims) - 1}


def prop1_check(model: OperatorModel, y, t_grid, tol: float = 1e-8) -> dict:
    """Membership test ``-t y + w^y(t) in K^perp`` for all grid times."""
    y = np.asarray(y, dtype=float)
    t_grid = np.asarray(t_grid, dtype=float)
    lam, v = model.eigenvalues, model.eigenvectors
    r = np.sqrt(lam)
    yt = v.T @ y
    traj = (np.sin(np.outer(t_grid, r)) / r) * yt
    vals = traj @ v.T - np.outer(t_grid, y)
    viol = np.linalg.norm(vals @ model.K.basis, axis=1)
    worst = float(np.max(viol, initial=0.0)) / max(1.0, float(np.linalg.norm(y)))
    return {"is_member": worst < tol, "max_violation": worst}


# --- inflation ---------------------------------------------------------------


def support(A: Subspace, tol: float = SUPPORT_TOL) -> np.ndarray:
    """Indices where the projector diagonal of ``A`` exceeds ``tol``."""
    return np.flatnonzero(A.diagonal > tol)


def coordinate_subspace(n: int, idx) -> Subspace:
    idx = np.asarray(sorted(idx), dtype=int)
    basis = np.zeros((n, len(idx)))
    basis[idx, np.arange(len(idx))] = 1.0
    return Subspace(basis)


def neighbourhood(model: OperatorModel, idx, degree: int) -> np.ndarray:
    """Indices within ``degree`` graph steps of ``idx``."""
    idx = np.asarray(idx, dtype=int)
    if len(idx) == 0:
        return idx
    return np.flatnonzero(np.min(model.hop_distance[idx], axis=0) <= degree)


def inflate(model: OperatorModel, A: Subspace, t: float, method: str = "local",
            tau_step: float = DEFAULT_TAU_STEP, rank_tol: float = KERNEL_RANK_TOL) -> Subspace:
    """``I^t A``: identity at ``t = 0``; for ``t > 0`` what sources in ``A``
    generate by time ``t``.

    ``local`` takes every vector supported within ``krylov_degree(t)``
    graph steps of ``supp A`` (``A`` itself while the degree is 0);
    ``krylov`` spans ``L^j A`` for ``j <= krylov_degree(t)``; ``kernel``
    spans ``sin(tau sqrt L)/sqrt L A`` on a tau-grid of ``(0, t]``.
    """
    if t < 0:
        raise ValueError("time must be nonnegative")
    if t == 0 or A.is_zero:
        return A
    if method == "local":
        d = model.krylov_degree(t)
        return A if d == 0 else coordinate_subspace(model.dim, neighbourhood(model, support(A), d))
    if method == "krylov":
        return krylov_span(model, A, model.krylov_degree(t))
    if method == "kernel":
        cols = [apply_function(model, "sine_prop", A.basis, tau) for tau in _tau_grid(t, tau_step)]
        return span(np.hstack(cols), rank_tol)
    raise ValueError(f"unknown method {method!r}")


def inflation_sequence(model: OperatorModel, A: Subspace, degrees, method: str = "local") -> dict:
    """``{degree: I A}`` for the requested front degrees, sharing equal values."""
    degrees = sorted(set(int(d) for d in degrees))
    if A.is_zero or not degrees:
        return {d: A for d in degrees}
    if method == "krylov":
        seq = krylov_sequence(model, A, min(degrees[-1], model.dim))
        return {d: seq[min(d, len(seq) - 1)] for d in degrees}
    if method != "local":
        raise ValueError(f"unknown method {method!r}")
    supp = support(A)
    hop = np.min(model.hop_distance[supp], axis=0)
    out, last = {}, None
    for d in degrees:
        if d == 0:
            out[d] = A
            continue
        idx = np.flatnonzero(hop <= d)
        if last is None or len(idx) != last.dim:
            last = coordinate_subspace(model.dim, idx)
        out[d] = last
    return out


def inflate_fn(model: OperatorModel, A: Subspace, t_grid, method: str = "local") -> LatticeFn:
    """``t -> I^t A`` on a grid starting at 0.

    Grid points with the same front degree share one value object.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid[0] != 0.0:
        raise ValueError("time grid must start at 0")
    degrees = [model.krylov_degree(t) for t in t_grid]
    seq = inflation_sequence(model, A, degrees[1:], method)
    return LatticeFn(t_grid, (A,) + tuple(seq[d] for d in degrees[1:]))
