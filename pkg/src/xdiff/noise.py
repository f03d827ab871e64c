"""Brownian drivers and multiplicative noise amplitudes.

Each species is driven by one scalar Brownian motion (spatially constant
increments), which keeps paths comparable across grids of different
resolution.  Sampling uses the counter-based Philox generator keyed by
(base_seed, sample_index), so the path for a given sample is the same no
matter how many workers the ensemble runs on or in which order samples
execute.

A cosine-expansion variant with several modes per species is available
behind the same interface (``modes > 1``) for experimentation; the
default experiments all use the single scalar driver.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np


class NoiseError(ValueError):
    """Invalid noise specification or path data."""


class NoiseKind(enum.Enum):
    OFF = "off"
    DIAGONAL_SQRT = "diagonal_sqrt"
    DIAGONAL_LINEAR = "diagonal_linear"


@dataclass(frozen=True)
class NoiseSpec:
    """Noise amplitude family.

    DIAGONAL_SQRT applies c*sqrt(1 + u_i) per species; the square-root
    argument is clamped at zero for u_i < -1 and the clamp is counted.
    DIAGONAL_LINEAR applies c*u_i, which vanishes on the zero state and
    is globally Lipschitz.  OFF disables the stochastic term entirely.
    """

    kind: NoiseKind
    c: float = 0.0
    modes: int = 1

    def __post_init__(self) -> None:
        if self.kind is not NoiseKind.OFF:
            if not np.isfinite(self.c) or self.c < 0.0:
                raise NoiseError(f"noise amplitude must be nonnegative, got {self.c}")
        if self.modes < 1:
            raise NoiseError(f"modes must be >= 1, got {self.modes}")

    @property
    def is_off(self) -> bool:
        return self.kind is NoiseKind.OFF


@dataclass(frozen=True)
class NoisePath:
    """Brownian increments for one sample.

    ``increments`` has shape (n_species, n_steps) for the scalar driver
    and (n_species, modes, n_steps) for the cosine-expansion variant; in
    both layouts the last axis is time and each entry has variance dt.
    """

    increments: np.ndarray
    dt: float
    base_seed: int
    sample_index: int

    @property
    def n_species(self) -> int:
        return self.increments.shape[0]

    @property
    def n_steps(self) -> int:
        return self.increments.shape[-1]

    @property
    def modes(self) -> int:
        return self.increments.shape[1] if self.increments.ndim == 3 else 1

    def step(self, k: int) -> np.ndarray:
        """Increment vector for step k: shape (n,) or (n, modes)."""
        return self.increments[..., k]


def sample_path(
    n_species: int,
    n_steps: int,
    dt: float,
    base_seed: int,
    sample_index: int,
    modes: int = 1,
) -> NoisePath:
    """Draw the increments for sample ``sample_index`` of an ensemble.

    The Philox key is the 128-bit word (sample_index << 64) | base_seed,
    so distinct samples use provably independent streams and the result
    depends only on the arguments, never on scheduling.
    """
    if n_species < 1 or n_steps < 0 or modes < 1:
        raise NoiseError("need n_species >= 1, n_steps >= 0, modes >= 1")
    if not np.isfinite(dt) or dt <= 0.0:
        raise NoiseError(f"dt must be positive, got {dt}")
    if not (0 <= base_seed < 2**64 and 0 <= sample_index < 2**64):
        raise NoiseError("base_seed and sample_index must fit in 64 bits")
    key = (sample_index << 64) | base_seed
    gen = np.random.Generator(np.random.Philox(key=key))
    shape = (n_species, n_steps) if modes == 1 else (n_species, modes, n_steps)
    increments = gen.standard_normal(shape) * np.sqrt(dt)
    return NoisePath(
        increments=increments, dt=dt, base_seed=base_seed, sample_index=sample_index
    )


def coarsen(path: NoisePath, factor: int) -> NoisePath:
    """Merge consecutive increments in blocks of ``factor``.

    The result is the same Brownian path sampled at dt * factor, which is
    what couples coarse and fine runs in strong-convergence studies.
    """
    if factor < 1:
        raise NoiseError(f"factor must be >= 1, got {factor}")
    if factor == 1:
        return path
    if path.n_steps % factor != 0:
        raise NoiseError(
            f"factor {factor} does not divide n_steps={path.n_steps}"
        )
    shape = path.increments.shape[:-1] + (path.n_steps // factor, factor)
    merged = path.increments.reshape(shape).sum(axis=-1)
    return NoisePath(
        increments=merged,
        dt=path.dt * factor,
        base_seed=path.base_seed,
        sample_index=path.sample_index,
    )


def cosine_mode_profiles(modes: int, nodes: np.ndarray) -> np.ndarray:
    """Orthonormal cosine profiles e_0 = 1, e_k = sqrt(2) cos(k pi x)."""
    k = np.arange(modes)[:, None]
    profiles = np.sqrt(2.0) * np.cos(np.pi * k * nodes[None, :])
    profiles[0, :] = 1.0
    return profiles


def sigma_apply(
    spec: NoiseSpec,
    u: np.ndarray,
    dw: np.ndarray,
    mode_profiles: np.ndarray | None = None,
) -> tuple[np.ndarray, int]:
    """Evaluate the noise term sigma(u) * dW node by node.

    Args:
        spec: noise family and amplitude.
        u: state, shape (n, J+1).
        dw: increments for one step, shape (n,) or (n, modes).
        mode_profiles: (modes, J+1) spatial profiles, required iff modes > 1.

    Returns:
        (term, clamp_count): the additive term with shape (n, J+1) and
        the number of nodes where the square-root argument was clamped.
    """
    u = np.asarray(u, dtype=float)
    if spec.is_off:
        return np.zeros_like(u), 0
    dw = np.asarray(dw, dtype=float)
    if spec.modes == 1:
        field = dw[:, None] * np.ones_like(u)
    else:
        if mode_profiles is None:
            raise NoiseError("mode_profiles required for modes > 1")
        field = dw @ mode_profiles
    clamp_count = 0
    if spec.kind is NoiseKind.DIAGONAL_SQRT:
        arg = 1.0 + u
        clamped = arg < 0.0
        clamp_count = int(np.count_nonzero(clamped))
        amp = spec.c * np.sqrt(np.where(clamped, 0.0, arg))
    else:  # DIAGONAL_LINEAR
        amp = spec.c * u
    return amp * field, clamp_count
