"""Norms, recorded time series, and least-squares rate/order fits."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import GridSpec


class FitError(ValueError):
    """Data unsuitable for a least-squares fit."""


def l2_norm(u: np.ndarray, grid: GridSpec) -> float | np.ndarray:
    """Trapezoid-weighted L2 norm over the grid (per species for 2-D input)."""
    u = np.asarray(u, dtype=float)
    w = grid.weights()
    out = np.sqrt((u * u) @ w)
    return float(out) if u.ndim == 1 else out


@dataclass
class DiagnosticsRecord:
    """Per-run recorded series; one entry per recorded time.

    ``rao`` and ``rel_rao`` hold NaN when the model admits no
    reversibility weights (``entropy_available`` is False then).
    ``clamp_events`` is cumulative over the run up to each record time.
    """

    times: np.ndarray        # (R,)
    l2: np.ndarray           # (R, n)
    mass: np.ndarray         # (R, n)
    min_value: np.ndarray    # (R, n)
    rao: np.ndarray          # (R,)
    rel_rao: np.ndarray      # (R,)
    clamp_events: np.ndarray # (R,) cumulative counts
    entropy_available: bool

    def __post_init__(self) -> None:
        r = self.times.shape[0]
        for name in ("l2", "mass", "min_value", "rao", "rel_rao", "clamp_events"):
            if getattr(self, name).shape[0] != r:
                raise ValueError(f"diagnostics field {name} disagrees with times length {r}")

    @property
    def n_records(self) -> int:
        return self.times.shape[0]


@dataclass(frozen=True)
class FitResult:
    slope: float
    intercept: float
    r_squared: float


def _least_squares_line(x: np.ndarray, y: np.ndarray) -> FitResult:
    # points are sorted before the arithmetic so the result does not
    # depend on the order the caller assembled them in
    order = np.lexsort((y, x))
    x = x[order]
    y = y[order]
    xbar = x.mean()
    ybar = y.mean()
    dx = x - xbar
    sxx = float(dx @ dx)
    if sxx <= 0.0:
        raise FitError("degenerate abscissae: all x values coincide")
    slope = float(dx @ (y - ybar)) / sxx
    intercept = ybar - slope * xbar
    resid = y - (slope * x + intercept)
    ss_res = float(resid @ resid)
    ss_tot = float((y - ybar) @ (y - ybar))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    r2 = min(1.0, max(0.0, r2))
    return FitResult(slope=slope, intercept=float(intercept), r_squared=r2)


def fit_order(h: np.ndarray, err: np.ndarray) -> FitResult:
    """Slope of log(err) against log(h): the observed convergence order.

    Requires at least two distinct positive step sizes and positive,
    finite errors.
    """
    h = np.asarray(h, dtype=float)
    err = np.asarray(err, dtype=float)
    if h.ndim != 1 or h.shape != err.shape or h.size < 2:
        raise FitError("need matching 1-D arrays with at least two points")
    if not np.all(np.isfinite(h)) or not np.all(np.isfinite(err)):
        raise FitError("non-finite step sizes or errors")
    if np.any(h <= 0.0) or np.any(err <= 0.0):
        raise FitError("step sizes and errors must be positive for a log-log fit")
    return _least_squares_line(np.log(h), np.log(err))


def fit_exponential_rate(
    t: np.ndarray, v: np.ndarray, drop_initial_fraction: float = 0.0
) -> FitResult:
    """Slope of log(v) against t, optionally dropping an initial transient.

    Points with t < drop_initial_fraction * max(t) are excluded before
    the fit, which is how decay rates are estimated without polluting the
    line with early-time behavior.
    """
    t = np.asarray(t, dtype=float)
    v = np.asarray(v, dtype=float)
    if t.ndim != 1 or t.shape != v.shape or t.size < 2:
        raise FitError("need matching 1-D arrays with at least two points")
    if not np.all(np.isfinite(t)) or not np.all(np.isfinite(v)):
        raise FitError("non-finite times or values")
    if np.any(v <= 0.0):
        raise FitError("values must be positive for a log-linear fit")
    if not 0.0 <= drop_initial_fraction < 1.0:
        raise FitError(f"drop_initial_fraction must be in [0, 1), got {drop_initial_fraction}")
    keep = t >= drop_initial_fraction * float(np.max(t))
    t = t[keep]
    v = v[keep]
    if t.size < 2:
        raise FitError("fewer than two points remain after transient exclusion")
    return _least_squares_line(t, np.log(v))


def ensemble_mean_error(
    states: np.ndarray, reference: np.ndarray, grid: GridSpec
) -> tuple[float, float]:
    """Monte Carlo mean and standard error of the per-sample state error.

    The per-sample error is the sum over species of the weighted L2 norm
    of (state - reference) on ``grid``.  ``states`` and ``reference`` are
    (M, n, J+1) arrays paired sample by sample.

    Returns:
        (mean, stderr) with stderr = std / sqrt(M) (ddof=1); stderr is
        NaN for a single sample.
    """
    states = np.asarray(states, dtype=float)
    reference = np.asarray(reference, dtype=float)
    if states.shape != reference.shape or states.ndim != 3:
        raise ValueError(
            f"states and reference must both be (M, n, nodes), got {states.shape} vs {reference.shape}"
        )
    if states.shape[0] < 1:
        raise ValueError("need at least one sample")
    diff = states - reference
    w = grid.weights()
    per_species = np.sqrt((diff * diff) @ w)      # (M, n)
    errors = per_species.sum(axis=1)              # (M,)
    mean = float(errors.mean())
    if errors.size < 2:
        return mean, float("nan")
    stderr = float(errors.std(ddof=1) / np.sqrt(errors.size))
    return mean, stderr
