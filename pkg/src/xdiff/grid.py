"""Uniform grid on the unit interval and the no-flux diffusion operator.

Nodes sit at x_j = j/J for j = 0..J.  Spatial integrals throughout the
package use trapezoid weights (dx/2 at the two boundary nodes, dx
inside), which make the discrete operators below exactly mass-preserving.

``build_neumann_laplacian`` assembles the (J+1) x (J+1) matrix A that
discretizes -d^2/dx^2 with reflection (no-flux) closure at both ends:

    row 0:        ( 2 -2  0 ... ) / dx^2
    interior row: (-1  2 -1     ) / dx^2
    row J:        ( ... 0 -2  2 ) / dx^2

A has zero row sums, is symmetric with respect to the trapezoid weights,
and is positive semidefinite, so I + delta*dt*A is strictly diagonally
dominant and a Thomas-style factorization can be computed once and reused
for every implicit solve of a run or ensemble.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class GridError(ValueError):
    """Invalid grid or operator parameters."""


@dataclass(frozen=True)
class GridSpec:
    """Uniform node-centered grid with J cells (J + 1 nodes) on (0, 1)."""

    j_cells: int

    #: length of the domain; fixed to the unit interval
    length: float = 1.0

    def __post_init__(self) -> None:
        if self.j_cells < 2:
            raise GridError(f"need at least 2 cells, got {self.j_cells}")
        if not np.isfinite(self.length) or self.length <= 0.0:
            raise GridError(f"domain length must be positive, got {self.length}")

    @property
    def dx(self) -> float:
        return self.length / self.j_cells

    @property
    def n_nodes(self) -> int:
        return self.j_cells + 1

    def nodes(self) -> np.ndarray:
        return np.linspace(0.0, self.length, self.n_nodes)

    def weights(self) -> np.ndarray:
        """Trapezoid quadrature weights: dx/2 at the ends, dx inside."""
        w = np.full(self.n_nodes, self.dx)
        w[0] = w[-1] = 0.5 * self.dx
        return w


@dataclass(frozen=True)
class LaplacianOperator:
    """Tridiagonal representation of the no-flux -d^2/dx^2 matrix."""

    grid: GridSpec
    sub: np.ndarray    # length J, entries A[j+1, j]
    diag: np.ndarray   # length J+1
    sup: np.ndarray    # length J, entries A[j, j+1]

    def matvec(self, u: np.ndarray) -> np.ndarray:
        """Apply the operator to nodal values (last axis is the grid axis)."""
        u = np.asarray(u, dtype=float)
        out = self.diag * u
        out[..., :-1] += self.sup * u[..., 1:]
        out[..., 1:] += self.sub * u[..., :-1]
        return out

    def dense(self) -> np.ndarray:
        n = self.grid.n_nodes
        m = np.zeros((n, n))
        np.fill_diagonal(m, self.diag)
        m[np.arange(n - 1), np.arange(1, n)] = self.sup
        m[np.arange(1, n), np.arange(n - 1)] = self.sub
        return m


def build_neumann_laplacian(grid: GridSpec) -> LaplacianOperator:
    """Assemble the reflection-closed second-difference operator on ``grid``."""
    n = grid.n_nodes
    inv_dx2 = 1.0 / (grid.dx * grid.dx)
    diag = np.full(n, 2.0 * inv_dx2)
    sub = np.full(n - 1, -inv_dx2)
    sup = np.full(n - 1, -inv_dx2)
    # ghost-node reflection folds the exterior neighbor onto the interior one
    sup[0] = -2.0 * inv_dx2
    sub[-1] = -2.0 * inv_dx2
    return LaplacianOperator(grid=grid, sub=sub, diag=diag, sup=sup)


@dataclass(frozen=True)
class SemiImplicitFactor:
    """Precomputed Thomas factorization of I + delta*dt*A.

    ``beta`` and ``gamma`` are the forward-sweep coefficients; a solve is
    one forward and one backward pass, O(J) per right-hand side.
    """

    grid: GridSpec
    delta: float
    dt: float
    sub: np.ndarray    # length J, sub-diagonal of the system matrix
    beta: np.ndarray   # length J+1, modified pivots
    gamma: np.ndarray  # length J, modified super-diagonal

    def solve(self, b: np.ndarray) -> np.ndarray:
        """Solve (I + delta*dt*A) x = b for one or several right-hand sides.

        Accepts shape (J+1,) or (n, J+1); returns the same shape.
        """
        b = np.asarray(b, dtype=float)
        squeeze = b.ndim == 1
        rhs = b[None, :] if squeeze else b
        if rhs.shape[-1] != self.grid.n_nodes:
            raise GridError(f"right-hand side has {rhs.shape[-1]} nodes, expected {self.grid.n_nodes}")
        x = np.empty_like(rhs)
        n = rhs.shape[-1]
        x[:, 0] = rhs[:, 0] / self.beta[0]
        for j in range(1, n):
            x[:, j] = (rhs[:, j] - self.sub[j - 1] * x[:, j - 1]) / self.beta[j]
        for j in range(n - 2, -1, -1):
            x[:, j] -= self.gamma[j] * x[:, j + 1]
        return x[0] if squeeze else x


def factor_semi_implicit(lap: LaplacianOperator, delta: float, dt: float) -> SemiImplicitFactor:
    """Factor I + delta*dt*A once for reuse across steps and samples."""
    if not np.isfinite(delta) or delta <= 0.0:
        raise GridError(f"delta must be positive, got {delta}")
    if not np.isfinite(dt) or dt <= 0.0:
        raise GridError(f"dt must be positive, got {dt}")
    r = delta * dt
    diag = 1.0 + r * lap.diag
    sub = r * lap.sub
    sup = r * lap.sup
    n = diag.shape[0]
    beta = np.empty(n)
    gamma = np.empty(n - 1)
    beta[0] = diag[0]
    for j in range(n - 1):
        gamma[j] = sup[j] / beta[j]
        beta[j + 1] = diag[j + 1] - sub[j] * gamma[j]
    return SemiImplicitFactor(
        grid=lap.grid, delta=delta, dt=dt, sub=sub, beta=beta, gamma=gamma
    )


def weighted_mass(u: np.ndarray, grid: GridSpec) -> float | np.ndarray:
    """Trapezoid mass of nodal values; per species when given an (n, J+1) array."""
    u = np.asarray(u, dtype=float)
    w = grid.weights()
    if u.shape[-1] != grid.n_nodes:
        raise GridError(f"field has {u.shape[-1]} nodes, expected {grid.n_nodes}")
    out = u @ w
    return float(out) if u.ndim == 1 else out
