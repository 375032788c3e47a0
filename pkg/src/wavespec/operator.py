"""Finite surrogates of a positive symmetric operator with nonzero defect.

A model carries a symmetric positive-definite matrix ``L`` (the stand-in for
the Friedrichs extension) and a subspace ``K`` (the stand-in for the kernel
of the maximal operator). Elements of the maximal domain are represented by
Vishik triples ``(y0, g, h)`` with ``L y0`` orthogonal to ``K`` and
``g, h`` in ``K``; the canonical boundary operators act on those triples.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np
from scipy.linalg import block_diag
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import shortest_path

from .lattice import Subspace, orthonormalize, span

SPECTRAL_TAGS = ("inverse", "inv_sqrt", "sine_prop", "cosine_prop", "one_minus_cos")
TIME_TAGS = ("sine_prop", "cosine_prop", "one_minus_cos")


@dataclass(frozen=True, eq=False)
class OperatorModel:
    """SPD matrix ``L`` with a designated defect subspace ``K``.

    The eigendecomposition is computed once at construction. ``kappa`` is the
    smallest eigenvalue. ``wave_rate`` converts time into Krylov degree for
    the propagation-limited spans (see :func:`krylov_degree`); it defaults to
    ``sqrt(max_i sum_j |L_ij|) / 2``, which equals ``1/h`` for the scaled
    three-point Laplacian with mesh ``h``.
    """

    L: np.ndarray
    K: Subspace
    label: str = ""
    wave_rate: float | None = None
    eigenvalues: np.ndarray = field(init=False, repr=False)
    eigenvectors: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        L = np.array(self.L, dtype=float)
        if L.ndim != 2 or L.shape[0] != L.shape[1]:
            raise ValueError("L must be a square matrix")
        n = L.shape[0]
        scale = max(1.0, float(np.max(np.abs(L))))
        if np.max(np.abs(L - L.T)) > 1e-12 * scale:
            raise ValueError("L is not symmetric")
        if self.K.ambient_dim != n:
            raise ValueError(f"K lives in dimension {self.K.ambient_dim}, L in {n}")
        if self.K.dim < 1:
            raise ValueError("K must be nonzero (nonzero defect indices)")
        lam, vec = np.linalg.eigh(L)
        if lam[0] <= 0:
            raise ValueError(f"L is not positive definite (smallest eigenvalue {lam[0]:.3e})")
        recon = (vec * lam) @ vec.T
        if np.linalg.norm(recon - L) > 1e-10 * np.linalg.norm(L):
            raise ValueError("eigendecomposition does not reconstruct L")
        L.setflags(write=False)
        lam.setflags(write=False)
        vec.setflags(write=False)
        object.__setattr__(self, "L", L)
        object.__setattr__(self, "eigenvalues", lam)
        object.__setattr__(self, "eigenvectors", vec)
        if self.wave_rate is None:
            object.__setattr__(self, "wave_rate", float(np.sqrt(np.max(np.sum(np.abs(L), axis=1))) / 2))
        elif self.wave_rate <= 0:
            raise ValueError("wave_rate must be positive")

    @property
    def dim(self) -> int:
        return self.L.shape[0]

    @property
    def kappa(self) -> float:
        return float(self.eigenvalues[0])

    @cached_property
    def P(self) -> np.ndarray:
        """Orthogonal projector onto ``K``."""
        return self.K.projector

    @cached_property
    def P_perp(self) -> np.ndarray:
        return np.eye(self.dim) - self.P

    @cached_property
    def L_inv(self) -> np.ndarray:
        v, lam = self.eigenvectors, self.eigenvalues
        return (v / lam) @ v.T

    @cached_property
    def hop_distance(self) -> np.ndarray:
        """Graph distance between indices along the nonzero pattern of ``L``."""
        adj = np.abs(self.L) > 1e-14 * np.max(np.abs(self.L))
        np.fill_diagonal(adj, False)
        d = shortest_path(csr_matrix(adj.astype(float)), unweighted=True)
        d.setflags(write=False)
        return d

    def krylov_degree(self, t: float) -> int:
        """Number of operator applications a wave front covers in time ``t``."""
        if t < 0:
            raise ValueError("time must be nonnegative")
        return int(np.floor(self.wave_rate * t + 1e-9))


def spectral_weights(model: OperatorModel, tag: str, t: float | None = None) -> np.ndarray:
    if tag not in SPECTRAL_TAGS:
        raise ValueError(f"unknown spectral function {tag!r}; expected one of {SPECTRAL_TAGS}")
    lam = model.eigenvalues
    if tag == "inverse":
        return 1.0 / lam
    if tag == "inv_sqrt":
        return 1.0 / np.sqrt(lam)
    if t is None:
        raise ValueError(f"{tag} needs a time argument")
    if t < 0:
        raise ValueError("time must be nonnegative")
    root = np.sqrt(lam)
    if tag == "sine_prop":
        return np.sin(t * root) / root
    if tag == "cosine_prop":
        return np.cos(t * root)
    return 1.0 - np.cos(t * root)


def apply_function(model: OperatorModel, tag: str, x, t: float | None = None) -> np.ndarray:
    """Apply ``f(L)`` through the cached eigendecomposition.

    ``sine_prop(t)`` is ``sin(t sqrt L) / sqrt L``, ``cosine_prop(t)`` is
    ``cos(t sqrt L)`` and ``one_minus_cos(t)`` is ``I - cos(t sqrt L)``.
    ``x`` may be a vector or a matrix of column vectors.
    """
    w = spectral_weights(model, tag, t)
    v = model.eigenvectors
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        return v @ (w * (v.T @ x))
    return v @ (w[:, None] * (v.T @ x))


def function_matrix(model: OperatorModel, tag: str, t: float | None = None) -> np.ndarray:
    w = spectral_weights(model, tag, t)
    v = model.eigenvectors
    return (v * w) @ v.T


# --- builders ---------------------------------------------------------------


def interval_matrix(N: int) -> np.ndarray:
    return (N + 1) ** 2 * (2 * np.eye(N) - np.eye(N, k=1) - np.eye(N, k=-1))


def make_interval_model(N: int) -> OperatorModel:
    """Dirichlet Laplacian on ``N`` interior nodes of ``[0, 1]``.

    ``K`` is the null space of the deep-interior rows ``2..N-1``: grid
    functions annihilated by ``L`` away from a one-node boundary layer.
    These are the linear profiles, so ``dim K = 2``.
    """
    if N < 5:
        raise ValueError("the interval model needs N >= 5")
    L = interval_matrix(N)
    _, s, vt = np.linalg.svd(L[1 : N - 1])
    rank = int(np.count_nonzero(s > 1e-10 * s[0]))
    null = vt[rank:].T
    K = Subspace(orthonormalize(null))
    return OperatorModel(L, K, label=f"interval(N={N})")


def make_block_model(m1: OperatorModel, m2: OperatorModel) -> OperatorModel:
    """Block-diagonal ``L1 + L2`` with ``K`` taken from the first block only.

    The second block is a reducing subspace orthogonal to ``K``, so the
    result is not completely non-self-adjoint.
    """
    L = block_diag(m1.L, m2.L)
    kb = np.vstack([m1.K.basis, np.zeros((m2.dim, m1.K.dim))])
    return OperatorModel(L, Subspace(kb), label=f"block({m1.label}, {m2.label})",
                         wave_rate=max(m1.wave_rate, m2.wave_rate))


def make_custom_model(L, k_vectors, label: str = "custom") -> OperatorModel:
    L = np.asarray(L, dtype=float)
    K = span(np.atleast_2d(np.asarray(k_vectors, dtype=float)).reshape(L.shape[0], -1))
    return OperatorModel(0.5 * (L + L.T), K, label=label)


def make_random_model(n: int, k_dim: int, rng: np.random.Generator, planted: int = 0,
                      spectrum: tuple[float, float] = (1.0, 50.0)) -> OperatorModel:
    """Random SPD matrix with a random ``K`` of dimension ``k_dim``.

    Eigenvalues are spread over ``spectrum`` with gaps of at least half
    the mean spacing.

    With ``planted > 0``, ``planted`` eigenvectors of ``L`` are kept
    orthogonal to ``K``; they span an ``L``-invariant subspace inside
    ``K^perp`` (a self-adjoint part).
    """
    if not 1 <= k_dim <= n - planted:
        raise ValueError("need 1 <= k_dim <= n - planted")
    q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    # jittered even spacing keeps eigenvalues apart, so the invariant
    # subspaces (and the controllability verdict) are well conditioned
    lo, hi = spectrum
    gap = (hi - lo) / max(n - 1, 1)
    lam = np.linspace(lo, hi, n) + rng.uniform(-0.25, 0.25, size=n) * gap
    lam = np.sort(np.clip(lam, lo, hi))
    L = (q * lam) @ q.T
    L = 0.5 * (L + L.T)
    if planted:
        chosen = rng.choice(n, size=planted, replace=False)
        rest = np.setdiff1d(np.arange(n), chosen)
        K = Subspace(orthonormalize(q[:, rest] @ rng.standard_normal((len(rest), k_dim))))
    else:
        K = Subspace(orthonormalize(rng.standard_normal((n, k_dim))))
    return OperatorModel(L, K, label=f"random(n={n}, k={k_dim}, planted={planted})")


def corrupt_k(model: OperatorModel, eps: float, rng: np.random.Generator) -> OperatorModel:
    """Copy of ``model`` whose ``K`` is tilted by about ``eps`` (fault injection)."""
    kb = model.K.basis + eps * rng.standard_normal(model.K.basis.shape)
    return replace(model, L=model.L, K=Subspace(orthonormalize(kb)), label=model.label + "+corruptK")


# --- Vishik triples and the Green system -------------------------------------


@dataclass(frozen=True, eq=False)
class VishikElement:
    """Maximal-domain element ``y0 + L^{-1} g + h``."""

    y0: np.ndarray
    g: np.ndarray
    h: np.ndarray

    def check(self, model: OperatorModel, tol: float = 1e-8):
        n = model.dim
        for name in ("y0", "g", "h"):
            if np.shape(getattr(self, name)) != (n,):
                raise ValueError(f"{name} must be a vector of length {n}")
        for name in ("g", "h"):
            v = getattr(self, name)
            if np.linalg.norm(model.P_perp @ v) > 1e-10 * max(1.0, np.linalg.norm(v)):
                raise ValueError(f"{name} does not lie in K")
        ly0 = model.L @ self.y0
        if np.linalg.norm(model.P @ ly0) > tol * max(np.linalg.norm(ly0), 1e-300):
            raise ValueError("L y0 is not orthogonal to K (y0 outside the minimal domain)")

    def __add__(self, other):
        return VishikElement(self.y0 + other.y0, self.g + other.g, self.h + other.h)

    def scale(self, a: float) -> "VishikElement":
        return VishikElement(a * self.y0, a * self.g, a * self.h)


def random_vishik(model: OperatorModel, rng: np.random.Generator) -> VishikElement:
    n = model.dim
    y0 = model.L_inv @ (model.P_perp @ rng.standard_normal(n))
    g = model.P @ rng.standard_normal(n)
    h = model.P @ rng.standard_normal(n)
    return VishikElement(y0, g, h)


def adjoint_action(model: OperatorModel, y: VishikElement, check: bool = True) -> np.ndarray:
    """Maximal operator on a triple: ``L y0 + g`` (``h`` is annihilated)."""
    if check:
        y.check(model)
    return model.L @ y.y0 + y.g


def embed(model: OperatorModel, y: VishikElement) -> np.ndarray:
    """Ambient representative ``y0 + L^{-1} g + h``."""
    return y.y0 + apply_function(model, "inverse", y.g) + y.h


def gamma1(model: OperatorModel, y: VishikElement, check: bool = True) -> np.ndarray:
    """``(L^{-1} L0* - I) y``; equals ``-h`` on a valid triple."""
    return apply_function(model, "inverse", adjoint_action(model, y, check)) - embed(model, y)


def gamma2(model: OperatorModel, y: VishikElement, check: bool = True) -> np.ndarray:
    """``P L0* y``; equals ``g`` on a valid triple."""
    return model.P @ adjoint_action(model, y, check)


def green_terms(model: OperatorModel, u: VishikElement, v: VishikElement, check: bool = True):
    au, av = adjoint_action(model, u, check), adjoint_action(model, v, check)
    eu, ev = embed(model, u), embed(model, v)
    g1u, g1v = gamma1(model, u, check), gamma1(model, v, check)
    g2u, g2v = gamma2(model, u, check), gamma2(model, v, check)
    return (float(au @ ev), float(eu @ av), float(g1u @ g2v), float(g2u @ g1v))


def green_defect(model: OperatorModel, u: VishikElement, v: VishikElement,
                 relative: bool = False, check: bool = True) -> float:
    """Defect of the Green formula on two triples.

    ``|(L0* u, v) - (u, L0* v) - [(G1 u, G2 v) - (G2 u, G1 v)]|``; with
    ``relative=True`` it is divided by the largest of the four terms.
    """
    t1, t2, t3, t4 = green_terms(model, u, v, check)
    defect = abs((t1 - t2) - (t3 - t4))
    if relative:
        return defect / max(abs(t1), abs(t2), abs(t3), abs(t4), 1e-300)
    return defect
