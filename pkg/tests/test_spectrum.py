import numpy as np
import pytest
from hypothesis import given, strategies as st

from wavespec.dynamics import coordinate_subspace
from wavespec.lattice import LatticeFn, family_atoms, fn_leq, span
from wavespec.operator import make_block_model, make_interval_model
from wavespec.spectrum import (
    LatticeBudget, ball, boundary, compute_spectrum, fingerprint, generate_lattice,
    interval_reconstruction_score, is_closed, ball_base_check, reconstruct_metric,
)

N = 10


@pytest.fixture(scope="module")
def interval_spec():
    model = make_interval_model(N)
    budget = LatticeBudget(200, 20, np.linspace(0, 1, 61))
    return model, compute_spectrum(model, budget)


@pytest.fixture(scope="module")
def block_spec():
    model = make_block_model(make_interval_model(6), make_interval_model(5))
    budget = LatticeBudget(300, 20, np.linspace(0, 1, 41))
    return model, compute_spectrum(model, budget)


def test_budget_validation():
    with pytest.raises(ValueError):
        LatticeBudget(0, 5, np.linspace(0, 1, 5))
    with pytest.raises(ValueError):
        LatticeBudget(10, 5, np.linspace(0.1, 1, 5))


def test_interval_lattice_complete_and_closed(interval_spec):
    _, res = interval_spec
    assert res.complete
    assert len(res.lattice) == 2 ** (N // 2)  # Boolean algebra on the reflected node pairs
    assert is_closed(res.lattice, 1e-6)["closed"]


def test_interval_atoms_are_node_pairs(interval_spec):
    _, res = interval_spec
    assert len(res.atoms) == N // 2
    assert sorted(res.centers) == list(range(N // 2))
    for a in res.atoms:
        v = a(0)
        assert v.dim == 2
        idx = np.flatnonzero(v.diagonal > 0.5)
        assert idx[0] + idx[1] == N - 1


def test_atoms_pairwise_incomparable(interval_spec):
    _, res = interval_spec
    for i, a in enumerate(res.atoms):
        for j, b in enumerate(res.atoms):
            if i != j:
                assert not fn_leq(a, b, 1e-6)


def test_every_function_dominates_an_atom(interval_spec):
    _, res = interval_spec
    for f in res.functions:
        if not f.is_zero:
            assert any(fn_leq(a, f, 1e-6) for a in res.atoms)


def test_boundary_flags_end_pair(interval_spec):
    _, res = interval_spec
    flagged = [c for c, f in zip(res.centers, res.boundary_flags) if f]
    assert flagged == [0]


def test_boundary_flags_invariant_under_reordering(interval_spec):
    _, res = interval_spec
    rng = np.random.default_rng(0)
    perm = rng.permutation(len(res.atoms))
    flags = boundary([res.atoms[i] for i in perm], res.u_fn, 1e-6)
    assert flags == [res.boundary_flags[i] for i in perm]


def test_atoms_invariant_under_shuffled_family(interval_spec):
    _, res = interval_spec
    rng = np.random.default_rng(1)
    shuffled = [res.functions[i] for i in rng.permutation(len(res.functions))]
    atoms = family_atoms(shuffled, 1e-6)
    key = lambda f: tuple(np.round(f(0).diagonal, 6))
    assert sorted(map(key, atoms)) == sorted(map(key, res.atoms))


def test_generation_is_reproducible():
    model = make_interval_model(8)
    budget = LatticeBudget(100, 10, np.linspace(0, 1, 21))
    a, b = generate_lattice(model, budget), generate_lattice(model, budget)
    assert len(a) == len(b)
    assert all(np.array_equal(x.basis, y.basis) for x, y in zip(a, b))


def test_budget_exhaustion_reports_incomplete():
    model = make_interval_model(12)
    lat = generate_lattice(model, LatticeBudget(20, 20, np.linspace(0, 1, 21)))
    assert not lat.complete and len(lat) <= 20


def test_ball_base_holds(interval_spec, block_spec):
    for _, res in (interval_spec, block_spec):
        assert res.base_check["passed"]


def test_ball_base_detects_broken_base(interval_spec):
    _, res = interval_spec
    R = res.radius_index.copy()
    R[0, 0] = -1  # atom 0 never in its own ball
    assert ball_base_check(res.atoms, R)["bullet1_violations"] >= 1
    # atom 1 enters ball(0) before atom 0 does and ball(0) at that radius misses atom 2
    R = np.array([[5, 1, -1], [1, 1, 1], [-1, 1, 1]])
    assert ball_base_check(res.atoms[:3], R)["bullet2_violations"] >= 1


@given(st.floats(0.02, 1.0), st.floats(0.02, 1.0), st.integers(0, N // 2 - 1))
def test_ball_monotone_in_radius(interval_spec, r1, r2, i):
    _, res = interval_spec
    r1, r2 = min(r1, r2), max(r1, r2)
    a = res.atoms[i]
    small = {id(b) for b in ball(a, r1, res.atoms)}
    big = {id(b) for b in ball(a, r2, res.atoms)}
    assert small <= big


def test_ball_radius_out_of_range(interval_spec):
    _, res = interval_spec
    with pytest.raises(ValueError):
        ball(res.atoms[0], 0.0, res.atoms)


def test_distances_match_geometry(interval_spec):
    _, res = interval_spec
    score = interval_reconstruction_score(res, N)
    assert score["fraction"] == 1.0
    assert np.all(np.isfinite(res.distances))
    assert np.max(np.abs(res.distances - res.distances.T)) <= 1.0 / (N + 1)


def test_distance_of_atom_to_itself_is_first_step(interval_spec):
    _, res = interval_spec
    grid = res.time_grid
    assert np.all(np.diag(res.distances) == grid[1])


def test_block_cross_distances_infinite(block_spec):
    _, res = block_spec
    first = [int(np.max(a(0).diagonal[:6]) > 0.5) for a in res.atoms]
    D = res.distances
    for i, bi in enumerate(first):
        for j, bj in enumerate(first):
            assert np.isinf(D[i, j]) == (bi != bj)
    # the uncontrolled block has no generators of its own: it is a single atom
    assert sum(first) == 3 and len(first) - sum(first) == 1


def test_reconstruct_metric_requires_atoms():
    with pytest.raises(ValueError):
        reconstruct_metric([], np.linspace(0, 1, 3))


def test_fingerprint_separates_coordinate_subspaces():
    a = coordinate_subspace(4, [0, 1])
    b = coordinate_subspace(4, [2, 3])
    c = span(np.eye(4)[:, [1, 0]])
    assert fingerprint(a) != fingerprint(b)
    assert fingerprint(a) == fingerprint(c)


def test_hand_built_metric():
    grid = np.linspace(0, 1, 5)
    e = np.eye(3)
    s = lambda *i: span([e[k] for k in i])
    # three points on a line at unit spacing, fronts move one point per step
    a = LatticeFn(grid, (s(0), s(0, 1), s(0, 1, 2), s(0, 1, 2), s(0, 1, 2)))
    b = LatticeFn(grid, (s(1), s(0, 1, 2), s(0, 1, 2), s(0, 1, 2), s(0, 1, 2)))
    c = LatticeFn(grid, (s(2), s(1, 2), s(0, 1, 2), s(0, 1, 2), s(0, 1, 2)))
    D = reconstruct_metric([a, b, c], grid)["distances"]
    # b is already the whole space at the first positive time, so it needs a(r) full
    assert np.allclose(D, [[0.25, 0.5, 0.5], [0.25, 0.25, 0.25], [0.5, 0.5, 0.25]])
