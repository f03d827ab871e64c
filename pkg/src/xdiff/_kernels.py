"""Compiled inner loop of the semi-implicit stepper.

The kernel advances a state through a block of steps without touching the
interpreter: centered interface fluxes, flux divergence scaled by the
trapezoid cell widths, the noise term, and the Thomas solve of the
factored implicit system.  Everything here is a straight loop
transcription of the formulas in :mod:`xdiff.scheme` and
:mod:`xdiff.grid`; the pure-numpy paths in those modules double as the
reference implementation in the test suite.
"""

from __future__ import annotations

import numba
import numpy as np

# noise kinds, must match the order used in scheme.py
NOISE_OFF = 0
NOISE_SQRT = 1
NOISE_LINEAR = 2


@numba.njit(cache=True)
def advance(
    u,            # (n, J+1) state, updated in place
    a,            # (n, n) interaction matrix
    dt,
    dx,
    wq,           # (J+1,) trapezoid cell widths
    sub,          # (J,)   factored system sub-diagonal
    beta,         # (J+1,) factored pivots
    gamma,        # (J,)   factored super-diagonal
    noise_kind,   # int, one of the NOISE_* constants
    c,            # noise amplitude
    dw,           # (n, n_steps) Brownian increments (ignored when off)
    n_steps,
    step0,        # absolute index of the first step, for error reporting
    clamp_flux,   # bool: use the positive part of the interface average
    flux,         # (n, J) scratch
    rhs,          # (n, J+1) scratch
):
    """Run ``n_steps`` steps; return (blowup_step, clamp_count).

    ``blowup_step`` is -1 on success, else the absolute index of the
    first step whose updated state contains a non-finite value (the state
    then holds the last finite iterate).
    """
    n, m = u.shape
    half = 0.5 / dx
    clamps = 0
    for k in range(n_steps):
        for j in range(m - 1):
            for i in range(n):
                s = 0.0
                for l in range(n):
                    s += a[i, l] * (u[l, j + 1] - u[l, j])
                avg = u[i, j + 1] + u[i, j]
                if clamp_flux and avg < 0.0:
                    avg = 0.0
                flux[i, j] = avg * s * half
        for i in range(n):
            for j in range(m):
                fr = flux[i, j] if j < m - 1 else 0.0
                fl = flux[i, j - 1] if j > 0 else 0.0
                val = u[i, j] + dt * (fr - fl) / wq[j]
                if noise_kind == NOISE_SQRT:
                    arg = 1.0 + u[i, j]
                    if arg < 0.0:
                        arg = 0.0
                        clamps += 1
                    val += c * np.sqrt(arg) * dw[i, k]
                elif noise_kind == NOISE_LINEAR:
                    val += c * u[i, j] * dw[i, k]
                rhs[i, j] = val
        for i in range(n):
            rhs[i, 0] = rhs[i, 0] / beta[0]
            for j in range(1, m):
                rhs[i, j] = (rhs[i, j] - sub[j - 1] * rhs[i, j - 1]) / beta[j]
            for j in range(m - 2, -1, -1):
                rhs[i, j] = rhs[i, j] - gamma[j] * rhs[i, j + 1]
        for i in range(n):
            for j in range(m):
                if not np.isfinite(rhs[i, j]):
                    return step0 + k, clamps
        for i in range(n):
            for j in range(m):
                u[i, j] = rhs[i, j]
    return -1, clamps
