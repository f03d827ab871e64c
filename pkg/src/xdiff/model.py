"""Coefficient-matrix algebra for the cross-diffusion population system.

The model couples ``n`` species densities on the unit interval through a
pressure p_i(u) = sum_j a_ij u_j with a nonnegative interaction matrix
``A = (a_ij)``.  This module holds the small amount of linear algebra the
rest of the package builds on: validation of the interaction matrix, the
spectral admissibility check, reversibility (detailed-balance) weights,
and the quadratic entropy functional associated with a reversible matrix.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grid import GridSpec
from .noise import NoiseSpec

__all__ = [
    "ModelError",
    "NotReversibleError",
    "CoefficientMatrix",
    "DetailedBalanceWeights",
    "ModelParams",
    "SpeciesField",
    "pressure",
    "eigenvalues_have_positive_real_part",
    "find_detailed_balance_weights",
    "spatial_average",
    "rao_entropy",
    "relative_rao_entropy",
]


class ModelError(ValueError):
    """Invalid model data (shapes, signs, non-finite entries)."""


class NotReversibleError(ModelError):
    """No positive weights pi with pi_i a_ij = pi_j a_ji exist."""


def _as_readonly(a: np.ndarray) -> np.ndarray:
    out = np.array(a, dtype=float, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class CoefficientMatrix:
    """Square interaction matrix with nonnegative, finite entries."""

    a: np.ndarray

    def __post_init__(self) -> None:
        a = _as_readonly(np.asarray(self.a, dtype=float))
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
            raise ModelError(f"coefficient matrix must be square, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise ModelError("coefficient matrix has non-finite entries")
        if np.any(a < 0.0):
            raise ModelError("coefficient matrix entries must be nonnegative")
        object.__setattr__(self, "a", a)

    @property
    def n(self) -> int:
        return self.a.shape[0]


@dataclass(frozen=True)
class DetailedBalanceWeights:
    """Positive weights pi making diag(pi) @ A symmetric.

    Construction re-checks the symmetry relation pi_i a_ij = pi_j a_ji
    entry by entry (absolute tolerance 1e-12 relative to the largest
    weighted entry), so a value of this type is always a certificate.
    """

    pi: np.ndarray
    matrix: CoefficientMatrix

    _TOL = 1e-12

    def __post_init__(self) -> None:
        pi = _as_readonly(np.asarray(self.pi, dtype=float))
        if pi.ndim != 1 or pi.shape[0] != self.matrix.n:
            raise ModelError(f"weights must have length {self.matrix.n}")
        if not np.all(np.isfinite(pi)) or np.any(pi <= 0.0):
            raise ModelError("detailed-balance weights must be positive and finite")
        weighted = pi[:, None] * self.matrix.a
        scale = max(float(np.max(np.abs(weighted))), 1.0)
        if float(np.max(np.abs(weighted - weighted.T))) > self._TOL * scale:
            raise NotReversibleError("pi_i a_ij = pi_j a_ji violated beyond tolerance")
        object.__setattr__(self, "pi", pi)

    @property
    def n(self) -> int:
        return self.pi.shape[0]

    def weighted_matrix(self) -> np.ndarray:
        """Return the symmetric matrix diag(pi) @ A."""
        return self.pi[:, None] * self.matrix.a


@dataclass(frozen=True)
class ModelParams:
    """Bundle of model parameters.

    Attributes:
        delta: diffusion coefficient, strictly positive.
        a: interaction matrix.
        pi: reversibility weights when the matrix admits them, else None.
        noise: noise specification (see :mod:`xdiff.noise`).
        clamp_positive_part: replace the interface average in the flux by
            its positive part, so locally negative states carry no
            mobility.  Off by default; the plain scheme needs no clamping.
    """

    delta: float
    a: CoefficientMatrix
    pi: DetailedBalanceWeights | None = None
    noise: NoiseSpec | None = None
    clamp_positive_part: bool = False

    def __post_init__(self) -> None:
        if not np.isfinite(self.delta) or self.delta <= 0.0:
            raise ModelError(f"delta must be positive, got {self.delta}")
        if self.pi is not None and not np.array_equal(self.pi.matrix.a, self.a.a):
            raise ModelError("pi was derived for a different coefficient matrix")

    @property
    def n(self) -> int:
        return self.a.n


@dataclass(frozen=True)
class SpeciesField:
    """Nodal values of all species: row i holds species i on the grid nodes."""

    values: np.ndarray

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2 or v.shape[1] < 3:
            raise ModelError(f"species field must be n x (J+1) with J >= 2, got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ModelError("species field has non-finite entries")
        object.__setattr__(self, "values", _as_readonly(v))

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def n_nodes(self) -> int:
        return self.values.shape[1]


def pressure(a: CoefficientMatrix, u: np.ndarray) -> np.ndarray:
    """Evaluate the pressures p_i = sum_j a_ij u_j node by node.

    Args:
        a: interaction matrix.
        u: species values, shape (n, J+1).

    Returns:
        Array of the same shape with p_i(u) at every node.
    """
    u = np.asarray(u, dtype=float)
    if u.ndim != 2 or u.shape[0] != a.n:
        raise ModelError(f"expected {a.n} species rows, got shape {u.shape}")
    return a.a @ u


def _char_poly_roots(a: np.ndarray) -> np.ndarray:
    # Characteristic polynomial, written out for the small sizes that occur
    # in practice; the companion-matrix root finder handles the cubic.
    n = a.shape[0]
    if n == 1:
        return a[0, 0:1].astype(complex)
    if n == 2:
        tr = a[0, 0] + a[1, 1]
        det = a[0, 0] * a[1, 1] - a[0, 1] * a[1, 0]
        disc = complex(tr * tr - 4.0 * det) ** 0.5
        return np.array([(tr + disc) / 2.0, (tr - disc) / 2.0])
    # n == 3: lambda^3 - tr lambda^2 + m2 lambda - det
    tr = a[0, 0] + a[1, 1] + a[2, 2]
    m2 = (
        a[0, 0] * a[1, 1] - a[0, 1] * a[1, 0]
        + a[0, 0] * a[2, 2] - a[0, 2] * a[2, 0]
        + a[1, 1] * a[2, 2] - a[1, 2] * a[2, 1]
    )
    det = float(np.linalg.det(a))
    return np.roots([1.0, -tr, m2, -det])


def eigenvalues_have_positive_real_part(a: CoefficientMatrix, tol: float = 1e-10) -> bool:
    """Check whether every eigenvalue of A has real part above ``tol``.

    For up to three species the eigenvalues come from the explicit
    characteristic polynomial; larger matrices fall back to the standard
    dense eigenvalue solver.
    """
    m = a.a
    roots = _char_poly_roots(m) if a.n <= 3 else np.linalg.eigvals(m)
    return bool(np.min(roots.real) > tol)


def find_detailed_balance_weights(
    a: CoefficientMatrix, tol: float = 1e-10
) -> DetailedBalanceWeights:
    """Compute positive weights pi with pi_i a_ij = pi_j a_ji, if they exist.

    The weights are fixed by propagating pi_j = pi_i a_ij / a_ji along a
    spanning tree of the interaction graph (edges where a_ij or a_ji is
    nonzero), starting from pi = 1 on the lowest-indexed node of each
    connected component, and then verifying the symmetry relation on all
    pairs at relative tolerance ``tol``.

    Raises:
        NotReversibleError: if any pair has a one-sided zero coupling or
            the propagated weights fail the all-pairs verification.
    """
    m = a.a
    n = a.n
    pi = np.zeros(n)
    # one-sided couplings can never balance with positive weights
    one_sided = ((m > 0.0) != (m.T > 0.0))
    if np.any(one_sided):
        i, j = np.argwhere(one_sided)[0]
        raise NotReversibleError(
            f"one-sided coupling between species {i} and {j} (a_ij, a_ji cannot balance)"
        )
    for root in range(n):
        if pi[root] > 0.0:
            continue
        pi[root] = 1.0
        stack = [root]
        while stack:
            i = stack.pop()
            for j in range(n):
                if j == i or pi[j] > 0.0 or m[i, j] == 0.0:
                    continue
                pi[j] = pi[i] * m[i, j] / m[j, i]
                stack.append(j)
    weighted = pi[:, None] * m
    scale = max(float(np.max(np.abs(weighted))), 1.0)
    mismatch = float(np.max(np.abs(weighted - weighted.T)))
    if mismatch > tol * scale:
        raise NotReversibleError(
            f"weighted matrix asymmetry {mismatch:.3e} exceeds tolerance"
        )
    return DetailedBalanceWeights(pi=pi, matrix=a)


def spatial_average(u: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Trapezoid average of each species over the domain (exact on affine data)."""
    u = np.asarray(u, dtype=float)
    w = grid.weights()
    return (u @ w) / grid.length


def rao_entropy(
    u: np.ndarray, pi: DetailedBalanceWeights, grid: GridSpec
) -> float:
    """Quadratic entropy 1/2 * integral of sum_ij pi_i a_ij u_i u_j dx.

    The spatial integral uses the trapezoid weights of ``grid``; the
    integrand is the quadratic form of diag(pi) @ A at each node.
    """
    u = np.asarray(u, dtype=float)
    m = pi.weighted_matrix()
    w = grid.weights()
    # sum_j w_j * u(:,j)^T M u(:,j)
    return 0.5 * float(np.einsum("il,ij,lj,j->", m, u, u, w))


def relative_rao_entropy(
    u: np.ndarray, pi: DetailedBalanceWeights, grid: GridSpec
) -> float:
    """Entropy of the deviation from the spatial averages, H(u - ubar)."""
    u = np.asarray(u, dtype=float)
    ubar = spatial_average(u, grid)
    return rao_entropy(u - ubar[:, None], pi, grid)
