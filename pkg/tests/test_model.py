"""Coefficient-matrix algebra: reversibility weights, entropies, spectra."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from xdiff.grid import GridSpec
from xdiff.model import (
    CoefficientMatrix,
    DetailedBalanceWeights,
    ModelError,
    ModelParams,
    NotReversibleError,
    eigenvalues_have_positive_real_part,
    find_detailed_balance_weights,
    pressure,
    rao_entropy,
    relative_rao_entropy,
    spatial_average,
)

SYMMETRIC = np.array([[2.0, 1.0], [1.0, 2.0]])
# a_12 = a_23 = a_31 = 1, everything else (including the diagonal) zero
CYCLIC = np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [1.0, 0.0, 0.0]])


# ---------------------------------------------------------------------------
# CoefficientMatrix


def test_matrix_requires_square():
    with pytest.raises(ModelError):
        CoefficientMatrix(np.ones((2, 3)))
    with pytest.raises(ModelError):
        CoefficientMatrix(np.ones(4))


def test_matrix_rejects_negative_and_nonfinite():
    with pytest.raises(ModelError):
        CoefficientMatrix(np.array([[1.0, -0.5], [0.0, 1.0]]))
    with pytest.raises(ModelError):
        CoefficientMatrix(np.array([[1.0, np.nan], [0.0, 1.0]]))
    with pytest.raises(ModelError):
        CoefficientMatrix(np.array([[np.inf]]))


def test_matrix_is_read_only():
    a = CoefficientMatrix(SYMMETRIC)
    assert a.n == 2
    with pytest.raises(ValueError):
        a.a[0, 0] = 5.0


def test_pressure_matches_hand_value():
    a = CoefficientMatrix(SYMMETRIC)
    u = np.array([[1.0, 2.0], [3.0, 0.0]])
    p = pressure(a, u)
    assert np.array_equal(p, [[5.0, 4.0], [7.0, 2.0]])


# ---------------------------------------------------------------------------
# detailed balance


def test_symmetric_matrix_has_unit_weights():
    pi = find_detailed_balance_weights(CoefficientMatrix(SYMMETRIC))
    assert np.array_equal(pi.pi, [1.0, 1.0])


def test_weights_recovered_for_scaled_symmetric_core():
    # a_ij = s_ij / pi*_i with pi* = (1, 2, 4) and a symmetric core s
    a = CoefficientMatrix(np.array([
        [2.0, 1.0, 1.0],
        [0.5, 1.0, 0.5],
        [0.25, 0.25, 0.5],
    ]))
    pi = find_detailed_balance_weights(a)
    assert np.array_equal(pi.pi, [1.0, 2.0, 4.0])
    w = pi.weighted_matrix()
    assert np.array_equal(w, w.T)


def test_decoupled_species_get_unit_weights():
    pi = find_detailed_balance_weights(
        CoefficientMatrix(np.array([[1.0, 0.0], [0.0, 3.0]]))
    )
    assert np.array_equal(pi.pi, [1.0, 1.0])


def test_cyclic_matrix_is_not_reversible():
    with pytest.raises(NotReversibleError):
        find_detailed_balance_weights(CoefficientMatrix(CYCLIC))


def test_one_sided_coupling_is_not_reversible():
    with pytest.raises(NotReversibleError):
        find_detailed_balance_weights(
            CoefficientMatrix(np.array([[1.0, 2.0], [0.0, 1.0]]))
        )


def test_inconsistent_cycle_is_not_reversible():
    # pairwise ratios exist but disagree around the 0-1-2 loop
    a = CoefficientMatrix(np.array([
        [0.0, 1.0, 1.0],
        [1.0, 0.0, 2.0],
        [1.0, 1.0, 0.0],
    ]))
    with pytest.raises(NotReversibleError):
        find_detailed_balance_weights(a)


def test_weights_validate_against_matrix():
    a = CoefficientMatrix(SYMMETRIC)
    with pytest.raises(ModelError):
        DetailedBalanceWeights(np.array([1.0, -1.0]), a)
    with pytest.raises(NotReversibleError):
        DetailedBalanceWeights(np.array([1.0, 2.0]), a)


@settings(max_examples=30, deadline=None)
@given(
    st.lists(st.floats(0.1, 10.0), min_size=2, max_size=4),
    st.integers(0, 2**31 - 1),
)
def test_weights_round_trip_from_construction(pi_star, seed):
    """A matrix built as s_ij / pi*_i is recognized as reversible."""
    n = len(pi_star)
    rng = np.random.default_rng(seed)
    s = rng.uniform(0.2, 3.0, size=(n, n))
    s = 0.5 * (s + s.T)
    a = CoefficientMatrix(s / np.asarray(pi_star)[:, None])
    pi = find_detailed_balance_weights(a)
    w = pi.pi[:, None] * a.a
    assert np.allclose(w, w.T, rtol=1e-9, atol=1e-12)


# ---------------------------------------------------------------------------
# eigenvalue condition


def test_eigenvalue_condition_accepts_symmetric():
    assert eigenvalues_have_positive_real_part(CoefficientMatrix(SYMMETRIC))


def test_eigenvalue_condition_rejects_cyclic():
    # spectrum is the cube roots of unity; two have real part -1/2
    assert not eigenvalues_have_positive_real_part(CoefficientMatrix(CYCLIC))


def test_eigenvalue_condition_edge_cases():
    assert eigenvalues_have_positive_real_part(CoefficientMatrix(np.array([[1.0]])))
    assert not eigenvalues_have_positive_real_part(CoefficientMatrix(np.array([[0.0]])))
    swap = CoefficientMatrix(np.array([[0.0, 1.0], [1.0, 0.0]]))
    assert not eigenvalues_have_positive_real_part(swap)


# ---------------------------------------------------------------------------
# entropies


def grid3():
    return GridSpec(2)  # nodes 0, 1/2, 1 with weights (1/4, 1/2, 1/4)


def test_rao_entropy_of_constant_state():
    a = CoefficientMatrix(SYMMETRIC)
    pi = find_detailed_balance_weights(a)
    u = np.array([[1.0, 1.0, 1.0], [2.0, 2.0, 2.0]])
    # 0.5 * (2*1*1 + 1*1*2 + 1*2*1 + 2*2*2) = 7
    assert rao_entropy(u, pi, grid3()) == 7.0
    assert relative_rao_entropy(u, pi, grid3()) == 0.0


def test_spatial_average_of_linear_profile():
    g = GridSpec(4)
    u = g.nodes()[None, :]
    assert spatial_average(u, g)[0] == pytest.approx(0.5, rel=1e-14)


def test_entropy_splits_into_relative_plus_mean_part():
    a = CoefficientMatrix(SYMMETRIC)
    pi = find_detailed_balance_weights(a)
    g = GridSpec(16)
    rng = np.random.default_rng(7)
    u = rng.uniform(0.5, 2.0, size=(2, g.n_nodes))
    ubar = spatial_average(u, g)[:, None] * np.ones_like(u)
    total = rao_entropy(u, pi, g)
    rel = relative_rao_entropy(u, pi, g)
    mean_part = rao_entropy(ubar, pi, g)
    assert total == pytest.approx(rel + mean_part, rel=1e-12)
    assert rel <= total + 1e-12


@settings(max_examples=30, deadline=None)
@given(st.floats(0.1, 10.0), st.integers(0, 2**31 - 1))
def test_entropies_are_two_homogeneous(c, seed):
    a = CoefficientMatrix(SYMMETRIC)
    pi = find_detailed_balance_weights(a)
    g = GridSpec(8)
    u = np.random.default_rng(seed).uniform(0.1, 2.0, size=(2, g.n_nodes))
    assert rao_entropy(c * u, pi, g) == pytest.approx(
        c * c * rao_entropy(u, pi, g), rel=1e-12
    )
    assert relative_rao_entropy(c * u, pi, g) == pytest.approx(
        c * c * relative_rao_entropy(u, pi, g), rel=1e-10, abs=1e-18
    )


# ---------------------------------------------------------------------------
# ModelParams


def test_params_validate_delta():
    a = CoefficientMatrix(SYMMETRIC)
    with pytest.raises(ModelError):
        ModelParams(delta=0.0, a=a)
    with pytest.raises(ModelError):
        ModelParams(delta=-1.0, a=a)
    with pytest.raises(ModelError):
        ModelParams(delta=float("nan"), a=a)


def test_params_reject_mismatched_weights():
    a = CoefficientMatrix(SYMMETRIC)
    other = CoefficientMatrix(np.array([[1.0, 2.0], [2.0, 1.0]]))
    pi_other = find_detailed_balance_weights(other)
    with pytest.raises(ModelError):
        ModelParams(delta=1.0, a=a, pi=pi_other)


def test_params_expose_species_count():
    params = ModelParams(delta=1.0, a=CoefficientMatrix(CYCLIC))
    assert params.n == 3
    assert params.pi is None
