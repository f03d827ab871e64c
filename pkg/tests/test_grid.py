"""Grid geometry, the no-flux Laplacian, and the factored implicit solve."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from xdiff.grid import (
    GridError,
    GridSpec,
    build_neumann_laplacian,
    factor_semi_implicit,
    weighted_mass,
)


def test_grid_geometry():
    g = GridSpec(4)
    assert g.dx == 0.25
    assert g.n_nodes == 5
    x = g.nodes()
    assert x[0] == 0.0 and x[-1] == 1.0
    assert np.allclose(np.diff(x), 0.25)
    w = g.weights()
    assert w[0] == w[-1] == 0.125
    assert np.sum(w) == pytest.approx(1.0, rel=1e-12)


def test_grid_rejects_degenerate_inputs():
    with pytest.raises(GridError):
        GridSpec(1)
    with pytest.raises(GridError):
        GridSpec(10, length=0.0)
    with pytest.raises(GridError):
        GridSpec(10, length=-1.0)


def test_laplacian_hand_value():
    # J=2, dx=1/2: interior stencil (-1, 2, -1)/dx^2, reflected boundary rows
    lap = build_neumann_laplacian(GridSpec(2))
    out = lap.matvec(np.array([0.0, 1.0, 0.0]))
    assert np.array_equal(out, [-8.0, 8.0, -8.0])


def test_laplacian_annihilates_constants():
    lap = build_neumann_laplacian(GridSpec(13))
    out = lap.matvec(np.ones(14))
    assert np.max(np.abs(out)) < 1e-10


def test_laplacian_is_weighted_symmetric():
    g = GridSpec(9)
    dense = build_neumann_laplacian(g).dense()
    wa = g.weights()[:, None] * dense
    assert np.allclose(wa, wa.T, atol=1e-9)


def test_cosine_modes_are_exact_eigenvectors():
    g = GridSpec(16)
    lap = build_neumann_laplacian(g)
    x = g.nodes()
    for k in (1, 3, 7, 16):
        v = np.cos(k * np.pi * x)
        lam = 2.0 / g.dx**2 * (1.0 - np.cos(k * np.pi * g.dx))
        assert np.allclose(lap.matvec(v), lam * v, rtol=1e-10, atol=1e-8)


def test_solve_matches_dense_elimination():
    g = GridSpec(8)
    lap = build_neumann_laplacian(g)
    rng = np.random.default_rng(42)
    for _ in range(100):
        delta = rng.uniform(0.1, 5.0)
        dt = rng.uniform(1e-5, 1e-2)
        m = np.eye(g.n_nodes) + delta * dt * lap.dense()
        rhs = rng.standard_normal(g.n_nodes)
        got = factor_semi_implicit(lap, delta, dt).solve(rhs)
        want = np.linalg.solve(m, rhs)
        assert np.max(np.abs(got - want)) <= 1e-12 * max(1.0, np.max(np.abs(want)))


def test_solve_handles_stacked_right_hand_sides():
    g = GridSpec(6)
    fac = factor_semi_implicit(build_neumann_laplacian(g), 1.0, 1e-3)
    rng = np.random.default_rng(3)
    rhs = rng.standard_normal((3, g.n_nodes))
    stacked = fac.solve(rhs)
    rows = np.stack([fac.solve(rhs[i]) for i in range(3)])
    assert np.array_equal(stacked, rows)


def test_factor_validates_parameters():
    lap = build_neumann_laplacian(GridSpec(4))
    with pytest.raises(GridError):
        factor_semi_implicit(lap, 0.0, 1e-3)
    with pytest.raises(GridError):
        factor_semi_implicit(lap, 1.0, -1e-3)


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 40), st.integers(0, 2**31 - 1))
def test_solve_inverts_the_dense_operator(j_cells, seed):
    g = GridSpec(j_cells)
    lap = build_neumann_laplacian(g)
    fac = factor_semi_implicit(lap, 1.0, 1e-3)
    m = np.eye(g.n_nodes) + 1e-3 * lap.dense()
    x = np.random.default_rng(seed).uniform(-2.0, 2.0, g.n_nodes)
    back = fac.solve(m @ x)
    assert np.allclose(back, x, rtol=1e-10, atol=1e-10)


def test_weighted_mass_of_unit_state():
    g = GridSpec(50)
    assert weighted_mass(np.ones(g.n_nodes), g) == pytest.approx(1.0, rel=1e-12)
    two = weighted_mass(np.ones((2, g.n_nodes)), g)
    assert two.shape == (2,)
    assert np.allclose(two, 1.0, rtol=1e-12)


def test_implicit_solve_preserves_weighted_mass():
    """The factored step redistributes but never creates weighted mass."""
    g = GridSpec(20)
    fac = factor_semi_implicit(build_neumann_laplacian(g), 2.0, 5e-4)
    u = np.random.default_rng(11).uniform(0.0, 3.0, g.n_nodes)
    before = weighted_mass(u, g)
    after = weighted_mass(fac.solve(u), g)
    assert after == pytest.approx(before, rel=1e-12)
