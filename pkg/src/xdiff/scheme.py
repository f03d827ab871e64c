"""Semi-implicit Euler-Maruyama stepper for the cross-diffusion system.

One step advances every species i by

    (I + delta*dt*A_grid) u_i^{k+1}
        = u_i^k + dt * div_h(F_i^k) + sigma_i(u^k) * dW_i^k,

where A_grid is the no-flux second-difference operator, F_i is the
centered interface flux

    F_{i,j+1/2} = (u_{i,j+1} + u_{i,j}) / (2 dx)
                  * sum_l a_il (u_{l,j+1} - u_{l,j}),

and the discrete divergence at node j divides the interface difference
by the trapezoid cell width (dx inside, dx/2 at the two boundary nodes)
with zero flux prescribed outside the domain.  Dividing by the cell
width rather than uniformly by dx makes the divergence telescope against
the trapezoid weights, so the explicit transport term carries exactly
zero total mass and the full step conserves the weighted mass of every
species whenever the noise is off.

The linear solve reuses a Thomas factorization computed once per
(delta, dt, grid) combination; a step costs O(n^2 J) arithmetic.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .diagnostics import DiagnosticsRecord, l2_norm
from .grid import GridSpec, SemiImplicitFactor, weighted_mass
from .model import CoefficientMatrix, ModelParams, rao_entropy, relative_rao_entropy
from .noise import NoiseKind, NoisePath, NoiseSpec, cosine_mode_profiles, sigma_apply


class SchemeError(ValueError):
    """Invalid stepper inputs (shapes, time spec, path mismatch)."""


class BlowupError(RuntimeError):
    """The updated state contains NaN or infinity.

    Attributes:
        step_index: absolute index of the offending step.
    """

    def __init__(self, step_index: int):
        self.step_index = step_index
        super().__init__(f"non-finite state after step {step_index}")


@dataclass(frozen=True)
class TimeSpec:
    """Step size and step count; the horizon is dt * n_steps."""

    dt: float
    n_steps: int

    def __post_init__(self) -> None:
        if not np.isfinite(self.dt) or self.dt <= 0.0:
            raise SchemeError(f"dt must be positive, got {self.dt}")
        if self.n_steps < 0:
            raise SchemeError(f"n_steps must be >= 0, got {self.n_steps}")

    @property
    def t_final(self) -> float:
        return self.dt * self.n_steps

    @classmethod
    def from_horizon(cls, dt: float, t_final: float) -> "TimeSpec":
        """Build a spec for the horizon t_final, requiring dt to divide it."""
        if not np.isfinite(dt) or dt <= 0.0:
            raise SchemeError(f"dt must be positive, got {dt}")
        steps = round(t_final / dt)
        if steps < 0 or abs(steps * dt - t_final) > 1e-9 * max(t_final, dt):
            raise SchemeError(f"dt={dt} does not divide the horizon T={t_final}")
        return cls(dt=dt, n_steps=steps)


@dataclass
class StepWorkspace:
    """Reusable scratch buffers for one stepping job.

    ``clamp_events`` accumulates the number of square-root clamps over
    all steps run with this workspace.
    """

    flux: np.ndarray
    rhs: np.ndarray
    clamp_events: int = 0
    mode_profiles: np.ndarray | None = None

    @classmethod
    def for_problem(cls, n_species: int, grid: GridSpec, noise: NoiseSpec | None = None) -> "StepWorkspace":
        profiles = None
        if noise is not None and noise.modes > 1:
            profiles = cosine_mode_profiles(noise.modes, grid.nodes())
        return cls(
            flux=np.empty((n_species, grid.j_cells)),
            rhs=np.empty((n_species, grid.n_nodes)),
            mode_profiles=profiles,
        )


def discrete_flux(
    u: np.ndarray,
    a: CoefficientMatrix,
    grid: GridSpec,
    clamp_positive_part: bool = False,
    out: np.ndarray | None = None,
) -> np.ndarray:
    """Centered interface fluxes, shape (n, J).

    Column j holds F_{i,j+1/2}; reversing the grid orientation negates
    and reverses the columns.  With ``clamp_positive_part`` the interface
    average is replaced by its positive part, so a locally negative
    state contributes no mobility.
    """
    u = np.asarray(u, dtype=float)
    if u.shape[-1] != grid.n_nodes:
        raise SchemeError(f"state has {u.shape[-1]} nodes, expected {grid.n_nodes}")
    jump = u[:, 1:] - u[:, :-1]
    avg = u[:, 1:] + u[:, :-1]
    if clamp_positive_part:
        avg = np.maximum(avg, 0.0)
    f = avg * (a.a @ jump) * (0.5 / grid.dx)
    if out is not None:
        out[:] = f
        return out
    return f


def _flux_divergence(flux: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Divergence of interface fluxes against the trapezoid cell widths."""
    n = flux.shape[0]
    div = np.zeros((n, grid.n_nodes))
    div[:, :-1] += flux
    div[:, 1:] -= flux
    return div / grid.weights()


_KIND_CODES = {
    NoiseKind.OFF: _kernels.NOISE_OFF,
    NoiseKind.DIAGONAL_SQRT: _kernels.NOISE_SQRT,
    NoiseKind.DIAGONAL_LINEAR: _kernels.NOISE_LINEAR,
}

_EMPTY_DW = np.zeros((1, 1))


def _advance(
    u: np.ndarray,
    params: ModelParams,
    grid: GridSpec,
    factor: SemiImplicitFactor,
    dw: np.ndarray | None,
    n_steps: int,
    step0: int,
    ws: StepWorkspace,
) -> None:
    """Advance ``u`` in place by ``n_steps`` steps of size factor.dt."""
    noise = params.noise if params.noise is not None else NoiseSpec(NoiseKind.OFF)
    if noise.modes == 1:
        kind = _KIND_CODES[noise.kind]
        dw_arr = _EMPTY_DW if (dw is None or kind == _kernels.NOISE_OFF) else dw
        blow_step, clamps = _kernels.advance(
            u, params.a.a, factor.dt, grid.dx, grid.weights(),
            factor.sub, factor.beta, factor.gamma,
            kind, noise.c, dw_arr, n_steps, step0,
            params.clamp_positive_part, ws.flux, ws.rhs,
        )
        ws.clamp_events += int(clamps)
        if blow_step >= 0:
            raise BlowupError(int(blow_step))
        return
    # cosine-expansion noise: plain numpy stepping
    for k in range(n_steps):
        term, clamps = sigma_apply(noise, u, dw[..., k], ws.mode_profiles)
        ws.clamp_events += clamps
        f = discrete_flux(
            u, params.a, grid, params.clamp_positive_part, out=ws.flux
        )
        rhs = u + factor.dt * _flux_divergence(f, grid) + term
        new = factor.solve(rhs)
        if not np.all(np.isfinite(new)):
            raise BlowupError(step0 + k)
        u[:] = new


def em_step(
    u: np.ndarray,
    params: ModelParams,
    grid: GridSpec,
    factor: SemiImplicitFactor,
    dw: np.ndarray | None,
    workspace: StepWorkspace | None = None,
    step_index: int = 0,
) -> np.ndarray:
    """One semi-implicit Euler-Maruyama step; returns the new state.

    Args:
        u: current state, shape (n, J+1); not modified.
        dw: Brownian increments for this step, shape (n,) for the scalar
            driver or (n, modes) for the cosine expansion; ignored when
            the noise is off.
        workspace: scratch buffers; allocated on the fly when omitted.
        step_index: absolute step number, used in the blow-up error.

    Raises:
        BlowupError: if the updated state contains a non-finite value.
    """
    u = np.array(u, dtype=float)
    if u.ndim != 2 or u.shape[-1] != grid.n_nodes:
        raise SchemeError(f"state must be (n, {grid.n_nodes}), got {u.shape}")
    noise = params.noise if params.noise is not None else NoiseSpec(NoiseKind.OFF)
    if workspace is None:
        workspace = StepWorkspace.for_problem(u.shape[0], grid, noise)
    if noise.is_off or dw is None:
        dw_steps = None
    else:
        dw_steps = np.asarray(dw, dtype=float).reshape(u.shape[0], -1, 1)
        if noise.modes == 1:
            dw_steps = dw_steps[:, 0, :]
    _advance(u, params, grid, factor, dw_steps, 1, step_index, workspace)
    return u


@dataclass
class RunResult:
    final: np.ndarray
    record: DiagnosticsRecord
    clamp_events: int


def run_path(
    u0: np.ndarray,
    params: ModelParams,
    grid: GridSpec,
    time: TimeSpec,
    path: NoisePath | None = None,
    record_every: int | None = None,
    factor: SemiImplicitFactor | None = None,
) -> RunResult:
    """Integrate one sample path and record diagnostics along the way.

    The initial state is always recorded; afterwards every
    ``record_every``-th step is recorded, and the final step is recorded
    regardless.  With ``n_steps == 0`` the record holds only the initial
    state.  When the noise is off the supplied path (if any) is ignored,
    so the result is a deterministic function of the remaining inputs.

    Raises:
        BlowupError: propagated from the stepper, carrying the step index.
    """
    u = np.array(u0, dtype=float)
    if u.ndim != 2 or u.shape[-1] != grid.n_nodes:
        raise SchemeError(f"initial state must be (n, {grid.n_nodes}), got {u.shape}")
    if not np.all(np.isfinite(u)):
        raise SchemeError("initial state has non-finite entries")
    noise = params.noise if params.noise is not None else NoiseSpec(NoiseKind.OFF)
    dw = None
    if not noise.is_off:
        if path is None:
            raise SchemeError("noise is on but no path was supplied")
        if path.n_steps != time.n_steps:
            raise SchemeError(
                f"path has {path.n_steps} steps but the time spec asks for {time.n_steps}"
            )
        if abs(path.dt - time.dt) > 1e-9 * time.dt:
            raise SchemeError(f"path dt {path.dt} does not match time spec dt {time.dt}")
        if path.n_species != u.shape[0]:
            raise SchemeError("path species count does not match the state")
        if path.modes != noise.modes:
            raise SchemeError("path modes do not match the noise spec")
        dw = path.increments
    if record_every is None:
        record_every = max(1, time.n_steps)
    if record_every < 1:
        raise SchemeError(f"record_every must be >= 1, got {record_every}")

    if factor is None:
        from .grid import build_neumann_laplacian, factor_semi_implicit

        factor = factor_semi_implicit(build_neumann_laplacian(grid), params.delta, time.dt)
    ws = StepWorkspace.for_problem(u.shape[0], grid, noise)

    times: list[float] = []
    l2s: list[np.ndarray] = []
    masses: list[np.ndarray] = []
    mins: list[np.ndarray] = []
    raos: list[float] = []
    rels: list[float] = []
    clamps: list[int] = []

    def record(step: int) -> None:
        times.append(step * time.dt)
        l2s.append(np.asarray(l2_norm(u, grid)))
        masses.append(np.asarray(weighted_mass(u, grid)))
        mins.append(u.min(axis=1))
        if params.pi is not None:
            raos.append(rao_entropy(u, params.pi, grid))
            rels.append(relative_rao_entropy(u, params.pi, grid))
        else:
            raos.append(float("nan"))
            rels.append(float("nan"))
        clamps.append(ws.clamp_events)

    record(0)
    step = 0
    while step < time.n_steps:
        chunk = min(record_every, time.n_steps - step)
        dw_chunk = None if dw is None else dw[..., step : step + chunk]
        _advance(u, params, grid, factor, dw_chunk, chunk, step, ws)
        step += chunk
        record(step)

    rec = DiagnosticsRecord(
        times=np.array(times),
        l2=np.array(l2s),
        mass=np.array(masses),
        min_value=np.array(mins),
        rao=np.array(raos),
        rel_rao=np.array(rels),
        clamp_events=np.array(clamps, dtype=int),
        entropy_available=params.pi is not None,
    )
    return RunResult(final=u, record=rec, clamp_events=ws.clamp_events)


def two_species_initial_data(grid: GridSpec) -> np.ndarray:
    """Benchmark two-species start: a box for u1, a smooth hump for u2.

    u1 is the indicator of [0, 1/2] (the node at 1/2 included) and
    u2(x) = 10 x^2 (1/2 - x/3), so u2(1) = 5/3.
    """
    x = grid.nodes()
    u1 = (x <= 0.5).astype(float)
    u2 = 10.0 * x * x * (0.5 - x / 3.0)
    return np.stack([u1, u2])


def default_initial_data(n_species: int, grid: GridSpec) -> np.ndarray:
    """Generic smooth positive start: u_i = 1 + cos((i+1) pi x) / 2."""
    x = grid.nodes()
    i = np.arange(1, n_species + 1)[:, None]
    return 1.0 + 0.5 * np.cos(i * np.pi * x[None, :])
