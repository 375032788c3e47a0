"""Wave spectrum: invariant sublattice, inflated functions, atoms and balls.

The minimal sublattice containing the reachable subspaces is approximated
by finite closure rounds under meet, join, complement and inflation. Its
image under the inflation map is a finite family of monotone lattice
functions; the atoms of that family form the spectrum. Atoms are compared
through balls ``B_r[a]`` and a distance read off as the smallest radius at
which one atom enters the ball of another.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dynamics import inflate_fn, inflation_sequence, reachable_fn
from .lattice import (
    LatticeFn,
    Subspace,
    complement,
    dedup_functions,
    equal,
    family_atoms,
    fn_leq,
    full_subspace,
    join,
    leq,
    meet,
    zero_subspace,
)
from .operator import OperatorModel


@dataclass(frozen=True)
class LatticeBudget:
    max_elements: int
    max_rounds: int
    time_grid: np.ndarray
    dedup_tol: float = 1e-6

    def __post_init__(self):
        grid = np.asarray(self.time_grid, dtype=float)
        if self.max_elements < 1 or self.max_rounds < 1 or self.dedup_tol <= 0:
            raise ValueError("budget limits and dedup_tol must be positive")
        if grid.ndim != 1 or len(grid) < 2 or grid[0] != 0.0 or np.any(np.diff(grid) <= 0):
            raise ValueError("time_grid must start at 0 and increase strictly")
        object.__setattr__(self, "time_grid", grid)


@dataclass
class GeneratedLattice:
    elements: list
    complete: bool
    rounds: int

    def __len__(self):
        return len(self.elements)

    def __iter__(self):
        return iter(self.elements)


@dataclass
class SpectrumResult:
    lattice: list
    functions: list
    atoms: list
    boundary_flags: list
    u_fn: LatticeFn
    complete: bool
    rounds: int = 0
    radius_index: np.ndarray | None = None
    distances: np.ndarray | None = None
    centers: list = field(default_factory=list)
    base_check: dict = field(default_factory=dict)
    asymmetry: float = 0.0

    @property
    def time_grid(self) -> np.ndarray:
        return self.u_fn.time_grid


# --- lattice closure -----------------------------------------------------------


def fingerprint(s: Subspace) -> tuple:
    """Dimension plus the projector diagonal rounded to 6 digits."""
    return (s.dim, (np.round(s.diagonal, 6) + 0.0).tobytes())


class _Registry:
    def __init__(self, tol: float):
        self.tol = tol
        self.buckets: dict[tuple, list[Subspace]] = {}
        self.items: list[Subspace] = []

    def find(self, s: Subspace, key=None) -> Subspace | None:
        for other in self.buckets.get(key or fingerprint(s), ()):
            if equal(s, other, self.tol):
                return other
        return None

    def add(self, s: Subspace, key=None) -> bool:
        key = key or fingerprint(s)
        if self.find(s, key) is not None:
            return False
        self.buckets.setdefault(key, []).append(s)
        self.items.append(s)
        return True


def _sort_key(s: Subspace):
    return (s.dim, tuple(-np.round(s.diagonal, 6)))


def _positive_degrees(model: OperatorModel, grid) -> list[int]:
    return sorted({min(model.krylov_degree(t), model.dim) for t in grid if t > 0})


def generate_lattice(model: OperatorModel, budget: LatticeBudget) -> GeneratedLattice:
    """Finite closure of the reachable subspaces under the lattice operations
    and inflation.

    Rounds are semi-naive: only pairs involving an element added in the
    previous round are combined. Each round's candidates are deduplicated,
    sorted by (dimension, projector diagonal) and admitted up to the budget,
    so the output does not depend on the order of the generators.
    """
    n = model.dim
    grid = budget.time_grid
    degrees = _positive_degrees(model, grid)
    gens = [zero_subspace(n), full_subspace(n)] + list(reachable_fn(model, grid).values)
    reg = _Registry(budget.dedup_tol)
    new = _admit(reg, gens, budget.max_elements)
    complete = len(reg.items) < budget.max_elements or not _has_unadmitted(reg, gens)
    rounds = 0
    while complete and new:
        if rounds >= budget.max_rounds:
            complete = False
            break
        rounds += 1
        fresh = set(map(id, new))
        old = [s for s in reg.items if id(s) not in fresh]
        cand = []
        for a in new:
            cand.append(complement(a))
            cand.extend(dict.fromkeys(inflation_sequence(model, a, degrees).values()))
        for i, a in enumerate(new):
            for b in old + new[i + 1 :]:
                if leq(a, b, budget.dedup_tol) or leq(b, a, budget.dedup_tol):
                    continue
                cand.append(meet(a, b))
                cand.append(join(a, b))
        room = budget.max_elements - len(reg.items)
        before = len(reg.items)
        new = _admit(reg, cand, room)
        if len(new) == room and _has_unadmitted(reg, cand):
            complete = False
        if len(reg.items) == before:
            break
    elements = sorted(reg.items, key=_sort_key)
    return GeneratedLattice(elements, complete, rounds)


def _admit(reg: _Registry, cand: list, room: int) -> list:
    # distinct candidates not yet registered, in canonical order
    pool = _Registry(reg.tol)
    for s in cand:
        key = fingerprint(s)
        if reg.find(s, key) is None:
            pool.add(s, key)
    added = []
    for s in sorted(pool.items, key=_sort_key)[: max(room, 0)]:
        reg.add(s)
        added.append(s)
    return added


def _has_unadmitted(reg: _Registry, cand: list) -> bool:
    return any(reg.find(s) is None for s in cand)


def is_closed(elements: list, tol: float) -> dict:
    """Exhaustive closure check: meet, join and complement stay in the list."""
    reg = _Registry(tol)
    for s in elements:
        reg.add(s)
    misses = 0
    for i, a in enumerate(elements):
        if reg.find(complement(a)) is None:
            misses += 1
        for b in elements[i + 1 :]:
            if reg.find(meet(a, b)) is None:
                misses += 1
            if reg.find(join(a, b)) is None:
                misses += 1
    return {"closed": misses == 0, "misses": misses}


# --- function family and atoms -------------------------------------------------


def build_function_family(model: OperatorModel, lattice, time_grid, tol: float = 1e-6) -> list[LatticeFn]:
    """``{t -> I^t A : A in lattice}`` with equal functions merged."""
    elements = list(lattice)
    if not elements:
        raise ValueError("lattice is empty")
    return dedup_functions([inflate_fn(model, a, time_grid) for a in elements], tol)


def spectrum_atoms(family: list[LatticeFn], tol: float = 1e-6) -> list[LatticeFn]:
    return family_atoms(family, tol)


def support_center(f: LatticeFn) -> int:
    """Index of the largest projector diagonal entry of the earliest nonzero value."""
    i = f.first_nonzero()
    if i is None:
        raise ValueError("the zero function has no support")
    return int(np.argmax(np.round(f.values[i].diagonal, 12)))


# --- balls, boundary and distance ----------------------------------------------


def _grid_index(grid: np.ndarray, r: float) -> int:
    if r <= 0 or r > grid[-1] * (1 + 1e-12):
        raise ValueError(f"radius {r} outside the grid range (0, {grid[-1]}]")
    return int(np.searchsorted(grid, r * (1 + 1e-12), side="right") - 1)


def _entry_radius(a: LatticeFn, b: LatticeFn, tol: float) -> int | None:
    """Smallest grid index ``k >= 1`` with ``b(t) <= a(t_k)`` for some ``t > 0``.

    ``b`` is monotone, so its earliest nonzero value at ``t > 0`` is the
    best witness; ``a`` is monotone, so the admissible ``k`` form a tail
    and bisection finds its start.
    """
    j = b.first_nonzero(positive_only=True)
    if j is None:
        return None
    w = b.values[j]
    lo, hi = 1, len(a.values) - 1
    if not leq(w, a.values[hi], tol):
        return None
    while lo < hi:
        mid = (lo + hi) // 2
        if leq(w, a.values[mid], tol):
            hi = mid
        else:
            lo = mid + 1
    return lo


def entry_radius_matrix(atoms: list[LatticeFn], tol: float = 1e-6) -> np.ndarray:
    """``R[i, j]``: grid index of the smallest radius with atom j in ball(atom i); -1 if none."""
    n = len(atoms)
    R = np.full((n, n), -1, dtype=int)
    for i, a in enumerate(atoms):
        for j, b in enumerate(atoms):
            k = _entry_radius(a, b, tol)
            if k is not None:
                R[i, j] = k
    return R


def ball(a: LatticeFn, r: float, atoms: list[LatticeFn], tol: float = 1e-6) -> list[LatticeFn]:
    """``B_r[a]``: atoms ``b`` with ``{0} != b(t) <= a(r)`` for some grid ``t > 0``."""
    k = _grid_index(a.time_grid, r)
    ar = a.values[k]
    out = []
    for b in atoms:
        j = b.first_nonzero(positive_only=True)
        if j is not None and leq(b.values[j], ar, tol):
            out.append(b)
    return out


def boundary(atoms: list[LatticeFn], u_fn: LatticeFn, tol: float = 1e-6) -> list[bool]:
    """Flag atoms with ``a(t) <= u(t)`` at every grid time ``t > 0``."""
    idx = range(1, len(u_fn.time_grid))
    return [fn_leq(a, u_fn, tol, indices=idx) for a in atoms]


def reconstruct_metric(atoms: list[LatticeFn], time_grid, tol: float = 1e-6,
                       R: np.ndarray | None = None) -> dict:
    """``d(a, b) = inf {r : b in B_r[a]}`` on the grid, ``inf`` when never reached."""
    if not atoms:
        raise ValueError("no atoms to measure")
    grid = np.asarray(time_grid, dtype=float)
    R = entry_radius_matrix(atoms, tol) if R is None else R
    D = np.where(R >= 0, grid[np.clip(R, 0, None)], np.inf)
    with np.errstate(invalid="ignore"):
        gap = np.abs(D - D.T)
    gap[np.isinf(D) & np.isinf(D.T)] = 0.0
    return {"distances": D, "radius_index": R, "asymmetry": float(np.max(gap))}


def ball_base_check(atoms: list[LatticeFn], R: np.ndarray) -> dict:
    """Exhaustive test that the balls form a base.

    Bullet 1: every atom lies in its own ball for every radius past its
    activation time. Bullet 2: whenever ``a`` lies in two balls there is a
    ball around ``a`` inside both; since balls around ``a`` grow with the
    radius it suffices that the smallest ball containing ``a`` sits inside
    every ball that contains ``a``.
    """
    n = len(atoms)
    grid = atoms[0].time_grid if atoms else np.zeros(1)
    v1 = 0
    for i, a in enumerate(atoms):
        t0 = a.activation_time()
        later = np.flatnonzero(grid > t0)
        first = int(later[0]) if len(later) else None
        if first is not None and not (0 <= R[i, i] <= max(first, 1)):
            v1 += 1
    # every distinct ball as a bitmask over atoms
    balls = set()
    for i in range(n):
        for k in sorted({int(x) for x in R[i] if x >= 0}):
            balls.add(sum(1 << j for j in range(n) if 0 <= R[i, j] <= k))
    v2 = 0
    for a in range(n):
        if R[a, a] < 0:
            continue
        smallest = sum(1 << j for j in range(n) if 0 <= R[a, j] <= R[a, a])
        for b in balls:
            if b >> a & 1 and smallest & ~b:
                v2 += 1
    return {"bullet1_violations": v1, "bullet2_violations": v2, "balls": len(balls),
            "passed": v1 == 0 and v2 == 0}


# --- pipeline ------------------------------------------------------------------


def compute_spectrum(model: OperatorModel, budget: LatticeBudget, leq_tol: float = 1e-6) -> SpectrumResult:
    lat = generate_lattice(model, budget)
    grid = budget.time_grid
    family = build_function_family(model, lat.elements, grid, budget.dedup_tol)
    atoms = spectrum_atoms(family, budget.dedup_tol)
    u_fn = reachable_fn(model, grid)
    flags = boundary(atoms, u_fn, leq_tol)
    res = SpectrumResult(lat.elements, family, atoms, flags, u_fn, lat.complete, lat.rounds)
    if atoms:
        metric = reconstruct_metric(atoms, grid, leq_tol)
        res.radius_index = metric["radius_index"]
        res.distances = metric["distances"]
        res.asymmetry = metric["asymmetry"]
        res.centers = [support_center(a) for a in atoms]
        res.base_check = ball_base_check(atoms, res.radius_index)
    else:
        res.base_check = {"bullet1_violations": 0, "bullet2_violations": 0, "balls": 0, "passed": True}
    return res


def interval_reconstruction_score(result: SpectrumResult, N: int, steps_tol: float = 2.0) -> dict:
    """Compare atom distances with ``|x_i - x_j|`` of their support centers.

    Centers sit at ``x = (c + 1) / (N + 1)``; a pair matches when the two
    agree within ``steps_tol`` spatial grid steps. Only off-diagonal pairs
    with finite distance are scored.
    """
    x = (np.asarray(result.centers, dtype=float) + 1) / (N + 1)
    truth = np.abs(x[:, None] - x[None, :])
    D = result.distances
    off = ~np.eye(len(x), dtype=bool) & np.isfinite(D)
    err = np.abs(D - truth)
    ok = (err <= steps_tol / (N + 1) + 1e-12) & off
    total = int(off.sum())
    return {
        "pairs": total,
        "matched": int(ok.sum()),
        "fraction": float(ok.sum() / total) if total else 0.0,
        "max_error": float(err[off].max()) if total else 0.0,
        "diagonal_max": float(np.max(np.diag(D))),
        "truth": truth,
    }
