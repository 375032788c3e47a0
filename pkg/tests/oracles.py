"""Independent reference computations used only by the tests.

Each oracle takes a route that shares no code with the package: scipy
null spaces instead of principal angles, eigenspace decompositions instead
of Krylov iterations, and closed forms where they exist.
"""

import numpy as np
from scipy.linalg import orth

from wavespec.lattice import Subspace, orthonormalize, zero_subspace


def null_space(m, tol=1e-9):
    """Null space with an absolute singular-value cut (inputs are O(1))."""
    _, s, vt = np.linalg.svd(m, full_matrices=True)
    s = np.concatenate([s, np.zeros(m.shape[1] - len(s))])
    return vt[s <= tol].T


def as_subspace(basis, n):
    basis = np.asarray(basis, dtype=float).reshape(n, -1)
    return Subspace(orthonormalize(basis)) if basis.shape[1] else zero_subspace(n)


def meet_oracle(a, b):
    """Vectors fixed by both projectors: null space of the stacked ``I - P``."""
    n = a.ambient_dim
    stacked = np.vstack([np.eye(n) - a.projector, np.eye(n) - b.projector])
    return as_subspace(null_space(stacked), n)


def join_oracle(a, b):
    n = a.ambient_dim
    cols = np.hstack([a.basis, b.basis])
    return as_subspace(orth(cols, rcond=1e-9) if cols.shape[1] else cols, n)


def eigen_selfadjoint_part(L, K, rel_tol=1e-8):
    """Largest invariant subspace of symmetric ``L`` inside ``K^perp``.

    Such a subspace reduces ``L``, so it is the sum over eigenvalue
    clusters of (eigenspace cap K^perp).
    """
    lam, vec = np.linalg.eigh(L)
    n = len(lam)
    cols, i = [], 0
    while i < n:
        j = i + 1
        while j < n and lam[j] - lam[j - 1] <= rel_tol * abs(lam[-1]):
            j += 1
        E = vec[:, i:j]
        c = null_space(K.basis.T @ E)
        if c.size:
            cols.append(E @ c)
        i = j
    return as_subspace(np.hstack(cols) if cols else np.zeros((n, 0)), n)


def interval_eigenvalues(N):
    k = np.arange(1, N + 1)
    return 4 * (N + 1) ** 2 * np.sin(k * np.pi / (2 * (N + 1))) ** 2


def scalar_weak_closed_form(t):
    """Weak solution for ``L = 1``, ``K = R``, ``h = t^3``."""
    t = np.asarray(t, dtype=float)
    return 6 * t - 6 * np.sin(t) - t**3


# frozen values, computed symbolically (sympy, exact integrals)
KAPPA_N5 = 9.6461709275204174                 # 144 sin^2(pi/12)
SCALAR_U_AT_1 = -0.048825908847379040         # 5 - 6 sin 1
GREEN_EXP_SIN3 = -11.456839795000513          # -10 int_0^1 e^x sin 3x dx
GREEN_COS2_XEXP = 1.6810445764960106          # (L u, v) - (u, L v), u = cos 2x, v = x e^x
