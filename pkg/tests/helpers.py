"""Random model and subspace generators shared by the tests."""

import numpy as np

from wavespec.lattice import span
from wavespec.operator import make_block_model, make_interval_model, make_random_model


ACCEPTANCE_LINES: dict[int, str] = {}


def mixed_model(rng, max_dim=40, kind=None):
    """Interval (0), block (1), random SPD (2) or random SPD with a planted
    self-adjoint part (3); ``kind`` is drawn when not given."""
    kind = int(rng.integers(0, 4)) if kind is None else kind
    if kind == 0:
        return make_interval_model(int(rng.integers(5, max_dim + 1)))
    if kind == 1:
        half = max_dim // 2
        return make_block_model(make_interval_model(int(rng.integers(5, half + 1))),
                                make_interval_model(int(rng.integers(5, half + 1))))
    n = int(rng.integers(4, max_dim + 1))
    planted = int(rng.integers(1, n // 3 + 1)) if kind == 3 else 0
    # keep the Krylov depth n / dim K moderate so the verdict is well posed
    lo = max(1, (n - planted) // 6)
    k = int(rng.integers(lo, max(lo, (n - planted) // 3) + 1))
    return make_random_model(n, k, rng, planted=planted)


def localized_pair(rng, n):
    """``A <= B`` with ``A`` supported on a random window of indices."""
    lo = int(rng.integers(0, n - 1))
    hi = int(rng.integers(lo + 1, n + 1))
    inner = rng.standard_normal((n, int(rng.integers(1, hi - lo + 1))))
    inner[:lo] = 0
    inner[hi:] = 0
    extra = rng.standard_normal((n, int(rng.integers(0, 3))))
    return span(inner), span(np.hstack([inner, extra]))
