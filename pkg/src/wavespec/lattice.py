"""Finite-dimensional subspace lattice.

Subspaces are stored by orthonormal bases. The lattice operations (meet,
join, orthocomplement), the inclusion order, and the projector distance
all act on those bases. Lattice-valued functions of time live on a shared
finite grid and are compared pointwise.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

DEFAULT_RANK_TOL = 1e-8
ORTHONORMAL_TOL = 1e-12


def _canonical_signs(basis: np.ndarray) -> np.ndarray:
    # flip each column so that its largest-magnitude entry is positive
    if basis.shape[1] == 0:
        return basis
    idx = np.argmax(np.abs(basis), axis=0)
    signs = np.sign(basis[idx, np.arange(basis.shape[1])])
    signs[signs == 0] = 1.0
    return basis * signs


@dataclass(frozen=True, eq=False)
class Subspace:
    """Closed subspace of R^n held as a column-orthonormal basis."""

    basis: np.ndarray
    rank_tol: float = DEFAULT_RANK_TOL

    def __post_init__(self):
        b = np.asarray(self.basis, dtype=float)
        if b.ndim != 2:
            raise ValueError("basis must be a 2-D array (ambient_dim x k)")
        n, k = b.shape
        if n < 1:
            raise ValueError("ambient dimension must be positive")
        if k > n:
            raise ValueError(f"basis has {k} columns in ambient dimension {n}")
        if self.rank_tol <= 0:
            raise ValueError("rank_tol must be positive")
        if k:
            err = np.max(np.abs(b.T @ b - np.eye(k)))
            if err > ORTHONORMAL_TOL:
                raise ValueError(f"basis columns are not orthonormal (error {err:.2e})")
        b = b.copy()
        b.setflags(write=False)
        object.__setattr__(self, "basis", b)

    @property
    def ambient_dim(self) -> int:
        return self.basis.shape[0]

    @property
    def dim(self) -> int:
        return self.basis.shape[1]

    @property
    def is_zero(self) -> bool:
        return self.dim == 0

    @cached_property
    def projector(self) -> np.ndarray:
        return self.basis @ self.basis.T

    @cached_property
    def diagonal(self) -> np.ndarray:
        """Diagonal of the orthogonal projector."""
        return np.einsum("ij,ij->i", self.basis, self.basis)

    def contains(self, x, tol: float = 1e-8) -> bool:
        x = np.asarray(x, dtype=float)
        nx = np.linalg.norm(x)
        if nx == 0:
            return True
        r = x - self.basis @ (self.basis.T @ x)
        return np.linalg.norm(r) <= tol * nx

    def __repr__(self):
        return f"Subspace(ambient_dim={self.ambient_dim}, dim={self.dim})"


def zero_subspace(n: int, rank_tol: float = DEFAULT_RANK_TOL) -> Subspace:
    return Subspace(np.zeros((n, 0)), rank_tol)


def full_subspace(n: int, rank_tol: float = DEFAULT_RANK_TOL) -> Subspace:
    return Subspace(np.eye(n), rank_tol)


def orthonormalize(mat: np.ndarray, rank_tol: float = DEFAULT_RANK_TOL) -> np.ndarray:
    """Orthonormal basis of the column range, cut at ``rank_tol`` * largest singular value."""
    mat = np.asarray(mat, dtype=float)
    if mat.shape[1] == 0 or not np.any(mat):
        return np.zeros((mat.shape[0], 0))
    u, s, _ = np.linalg.svd(mat, full_matrices=False)
    r = int(np.count_nonzero(s > rank_tol * s[0]))
    return _canonical_signs(u[:, :r])


def span(vectors, rank_tol: float = DEFAULT_RANK_TOL, ambient_dim: int | None = None) -> Subspace:
    """Numerical span of a collection of vectors.

    ``vectors`` is either a sequence of 1-D arrays or a 2-D array whose
    columns are the vectors. Singular values below ``rank_tol`` times the
    largest one are discarded. Columns are put in a canonical order before
    factorization so the result does not depend on input order.
    """
    if rank_tol <= 0:
        raise ValueError("rank_tol must be positive")
    if isinstance(vectors, np.ndarray) and vectors.ndim == 2:
        mat = np.asarray(vectors, dtype=float)
    else:
        vecs = [np.asarray(v, dtype=float) for v in vectors]
        if not vecs:
            if ambient_dim is None:
                raise ValueError("ambient_dim is required to span an empty set")
            return zero_subspace(ambient_dim, rank_tol)
        lengths = {v.shape for v in vecs}
        if len(lengths) != 1 or vecs[0].ndim != 1:
            raise ValueError(f"vectors have mismatched dimensions: {sorted(lengths)}")
        mat = np.column_stack(vecs)
    if ambient_dim is not None and mat.shape[0] != ambient_dim:
        raise ValueError(f"vectors have dimension {mat.shape[0]}, expected {ambient_dim}")
    if mat.shape[1] > 1:
        keys = np.round(mat, 12)
        order = np.lexsort(keys[::-1])
        mat = mat[:, order]
    return Subspace(orthonormalize(mat, rank_tol), rank_tol)


def _check_same_space(a: Subspace, b: Subspace):
    if a.ambient_dim != b.ambient_dim:
        raise ValueError(f"ambient dimension mismatch: {a.ambient_dim} != {b.ambient_dim}")


def meet(a: Subspace, b: Subspace) -> Subspace:
    """Intersection of two subspaces.

    Uses the singular values of ``A^T B`` (cosines of the principal angles);
    directions with cosine within ``10 * rank_tol`` of 1 form the intersection.
    """
    _check_same_space(a, b)
    tol = max(a.rank_tol, b.rank_tol)
    if a.dim == 0 or b.dim == 0:
        return zero_subspace(a.ambient_dim, tol)
    u, s, vt = np.linalg.svd(a.basis.T @ b.basis)
    sel = np.abs(s - 1.0) < 10 * tol
    if not np.any(sel):
        return zero_subspace(a.ambient_dim, tol)
    vecs = 0.5 * (a.basis @ u[:, : len(s)][:, sel] + b.basis @ vt[: len(s)][sel].T)
    return Subspace(orthonormalize(vecs, tol), tol)


def join(a: Subspace, b: Subspace) -> Subspace:
    """Closed linear sum of two subspaces."""
    _check_same_space(a, b)
    tol = max(a.rank_tol, b.rank_tol)
    if a.dim == 0:
        return Subspace(a.basis if b.dim == 0 else b.basis, tol)
    if b.dim == 0:
        return Subspace(a.basis, tol)
    return Subspace(orthonormalize(np.hstack([a.basis, b.basis]), tol), tol)


def complement(a: Subspace) -> Subspace:
    n, k = a.basis.shape
    if k == 0:
        return full_subspace(n, a.rank_tol)
    if k == n:
        return zero_subspace(n, a.rank_tol)
    u, _, _ = np.linalg.svd(a.basis, full_matrices=True)
    return Subspace(_canonical_signs(u[:, k:]), a.rank_tol)


def inclusion_residual(a: Subspace, b: Subspace) -> float:
    """Operator norm of ``(I - P_B) P_A``."""
    _check_same_space(a, b)
    if a.dim == 0:
        return 0.0
    if b.dim == 0:
        return 1.0
    r = a.basis - b.basis @ (b.basis.T @ a.basis)
    return float(np.linalg.norm(r, 2))


def leq(a: Subspace, b: Subspace, tol: float = 1e-8) -> bool:
    """Inclusion ``a <= b`` up to ``tol`` in operator norm."""
    _check_same_space(a, b)
    if tol < 1 and a.dim > b.dim:
        return False
    if a.dim == 0:
        return True
    if b.dim == 0:
        return tol >= 1
    r = a.basis - b.basis @ (b.basis.T @ a.basis)
    # Frobenius bounds decide most cases without an SVD
    fro = float(np.sqrt(np.sum(r * r)))
    if fro <= tol:
        return True
    if fro > tol * np.sqrt(a.dim):
        return False
    return float(np.linalg.norm(r, 2)) <= tol


def subspace_distance(a: Subspace, b: Subspace) -> float:
    """Operator-norm distance ``||P_A - P_B||`` between orthogonal projectors."""
    _check_same_space(a, b)
    if a.dim != b.dim:
        return 1.0
    if a.dim == 0 or a is b or np.array_equal(a.basis, b.basis):
        return 0.0
    return max(inclusion_residual(a, b), inclusion_residual(b, a))


def equal(a: Subspace, b: Subspace, tol: float = 1e-8) -> bool:
    """``subspace_distance(a, b) < tol``, skipping the SVD when a bound decides."""
    _check_same_space(a, b)
    if a.dim != b.dim:
        return tol > 1.0
    if a.dim == 0:
        return True
    r = a.basis - b.basis @ (b.basis.T @ a.basis)
    fro = float(np.sqrt(np.sum(r * r)))
    if fro < tol:
        return True
    if fro >= tol * np.sqrt(a.dim):
        return False
    return subspace_distance(a, b) < tol


@dataclass(frozen=True, eq=False)
class LatticeFn:
    """Monotone subspace-valued function sampled on a finite time grid."""

    time_grid: np.ndarray
    values: tuple

    def __post_init__(self):
        grid = np.asarray(self.time_grid, dtype=float)
        if grid.ndim != 1 or len(grid) == 0:
            raise ValueError("time_grid must be a non-empty 1-D sequence")
        if grid[0] != 0.0:
            raise ValueError("time_grid must start at 0")
        if np.any(np.diff(grid) <= 0):
            raise ValueError("time_grid must be strictly increasing")
        values = tuple(self.values)
        if len(values) != len(grid):
            raise ValueError("one value per grid point is required")
        if len({v.ambient_dim for v in values}) != 1:
            raise ValueError("all values must share one ambient dimension")
        object.__setattr__(self, "values", values)
        if not self.is_monotone():
            raise ValueError("values must be monotone in time")
        grid.setflags(write=False)
        object.__setattr__(self, "time_grid", grid)
        object.__setattr__(self, "values", values)

    @property
    def ambient_dim(self) -> int:
        return self.values[0].ambient_dim

    @property
    def is_zero(self) -> bool:
        return all(v.dim == 0 for v in self.values)

    def __call__(self, i: int) -> Subspace:
        return self.values[i]

    def first_nonzero(self, positive_only: bool = False) -> int | None:
        """Index of the earliest nonzero value (optionally among t > 0)."""
        start = 1 if positive_only else 0
        for i in range(start, len(self.values)):
            if self.values[i].dim > 0:
                return i
        return None

    def activation_time(self) -> float:
        """``inf {t : f(t) != {0}}`` on the grid; ``inf`` for the zero function."""
        i = self.first_nonzero()
        return float("inf") if i is None else float(self.time_grid[i])

    def is_monotone(self, tol: float = 1e-8) -> bool:
        return all(
            self.values[i] is self.values[i + 1] or leq(self.values[i], self.values[i + 1], tol)
            for i in range(len(self.values) - 1)
        )

    def __repr__(self):
        dims = [v.dim for v in self.values]
        return f"LatticeFn(points={len(dims)}, dims={dims[0]}..{dims[-1]})"


def constant_fn(time_grid, value: Subspace) -> LatticeFn:
    return LatticeFn(np.asarray(time_grid, dtype=float), tuple(value for _ in time_grid))


def _check_same_grid(f: LatticeFn, g: LatticeFn):
    if f.time_grid.shape != g.time_grid.shape or not np.array_equal(f.time_grid, g.time_grid):
        raise ValueError("lattice functions live on different time grids")


def fn_leq(f: LatticeFn, g: LatticeFn, tol: float = 1e-8, indices: Iterable[int] | None = None) -> bool:
    """Pointwise order ``f(t) <= g(t)`` at every grid point (or at ``indices``)."""
    _check_same_grid(f, g)
    seen = {}
    idx = range(len(f.values)) if indices is None else indices
    for i in idx:
        a, b = f.values[i], g.values[i]
        key = (id(a), id(b))
        if key not in seen:
            seen[key] = a is b or leq(a, b, tol)
        if not seen[key]:
            return False
    return True


def fn_distance(f: LatticeFn, g: LatticeFn) -> float:
    _check_same_grid(f, g)
    worst = 0.0
    for a, b in zip(f.values, g.values):
        if a is not b:
            worst = max(worst, subspace_distance(a, b))
            if worst >= 1.0:
                break
    return worst


def fn_equal(f: LatticeFn, g: LatticeFn, tol: float = 1e-8) -> bool:
    _check_same_grid(f, g)
    for a, b in zip(f.values, g.values):
        if a is b:
            continue
        if a.dim != b.dim or not equal(a, b, tol):
            return False
    return True


def dedup_functions(family: Sequence[LatticeFn], tol: float = 1e-8) -> list[LatticeFn]:
    """Drop functions equal (pointwise distance < tol) to an earlier one."""
    kept: list[LatticeFn] = []
    by_dims: dict[tuple, list[LatticeFn]] = {}
    for f in family:
        sig = tuple(v.dim for v in f.values)
        bucket = by_dims.setdefault(sig, [])
        if any(fn_equal(f, g, tol) for g in bucket):
            continue
        bucket.append(f)
        kept.append(f)
    return kept


def family_atoms(family: Sequence[LatticeFn], tol: float = 1e-8) -> list[LatticeFn]:
    """Minimal nonzero elements of a finite family of lattice functions.

    Equal functions are merged first; a member is an atom when no other
    nonzero member lies below it.
    """
    if not family:
        return []
    grid = family[0].time_grid
    for f in family[1:]:
        if not np.array_equal(f.time_grid, grid):
            raise ValueError("lattice functions live on different time grids")
    members = [f for f in dedup_functions(family, tol) if not f.is_zero]
    if not members:
        return []
    dims = np.array([[v.dim for v in f.values] for f in members])
    atoms = []
    for i, f in enumerate(members):
        # g <= f needs dim g(t) <= dim f(t) everywhere; cheap prefilter
        below = np.flatnonzero(np.all(dims <= dims[i], axis=1))
        if not any(j != i and fn_leq(members[j], f, tol) for j in below):
            atoms.append(f)
    return atoms


def subspace_to_rows(s: Subspace) -> list[list[float]]:
    """Basis in column-major order: one output row per basis column."""
    return [list(map(float, s.basis[:, j])) for j in range(s.dim)]
