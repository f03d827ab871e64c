"""Rendering: CSV tables to raster figures.

Three figure kinds:

- ``convergence``: mean error versus resolution on log-log axes, with
  order-0.5 and order-1.0 guide lines and the fitted order annotated.
  The optional square-root axis option plots against sqrt(h), under
  which a half-order data set appears with unit slope.
- ``longtime``: ensemble-mean discrete l2 norm of every species over
  time.
- ``entropy-decay``: ensemble-mean relative entropy on a log y-axis
  with the fitted decay rate annotated.

Annotated slopes are recomputed from the data file; when a fit file is
also supplied, the recomputed value is cross-checked against it and a
disagreement beyond 1e-9 is reported as a warning (it usually means
the two files came from different runs).

Rendering is a pure function of the file contents and the job options:
figure geometry is fixed and the image carries no timestamps or
software tags, so the same inputs produce identical bytes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from matplotlib.figure import Figure

from .tables import ConvergenceTable, EmptyDataError, FitSummary, SeriesTable

KINDS = ("convergence", "longtime", "entropy-decay")

#: leading fraction of the horizon excluded from the decay-rate fit,
#: matching the convention of the fit rows the simulator writes
TRANSIENT_FRACTION = 0.05

#: slope disagreement between the recomputed annotation and a supplied
#: fit file beyond this is reported
CROSS_CHECK_TOL = 1e-9

FIGSIZE = (6.4, 4.8)
DPI = 120


class PlotError(ValueError):
    """The inputs cannot produce the requested figure."""


@dataclass(frozen=True)
class PlotJob:
    """One figure request.

    inputs: the data CSV first, optionally followed by its fit CSV.
    sqrt_axis: plot convergence data against sqrt(h) instead of h.
    """

    inputs: tuple[Path, ...]
    output: Path
    kind: str
    sqrt_axis: bool = False

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise PlotError(f"unknown plot kind {self.kind!r}, expected one of {KINDS}")
        if not 1 <= len(self.inputs) <= 2:
            raise PlotError(f"expected one data CSV and optionally a fit CSV, got {len(self.inputs)}")


@dataclass(frozen=True)
class RenderInfo:
    """What the renderer computed, for callers and cross-checks."""

    annotation_slope: float | None
    file_slope: float | None
    mismatch: float | None
    warnings: tuple[str, ...] = field(default=())


def _least_squares(x: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    """Centered least-squares line, points sorted first for a stable sum."""
    order = np.lexsort((y, x))
    x = x[order]
    y = y[order]
    dx = x - x.mean()
    sxx = float(dx @ dx)
    if sxx <= 0.0:
        raise PlotError("degenerate fit: all abscissae coincide")
    slope = float(dx @ (y - y.mean())) / sxx
    return slope, float(y.mean() - slope * x.mean())


def _cross_check(
    fit: FitSummary | None, recomputed: float | None, expected_studies: tuple[str, ...]
) -> tuple[float | None, float | None, list[str]]:
    warnings: list[str] = []
    if fit is None:
        return None, None, warnings
    if fit.study not in expected_studies:
        warnings.append(
            f"{fit.path}: fit row is for study {fit.study!r}, expected one of {expected_studies}"
        )
    if recomputed is None:
        return fit.slope, None, warnings
    mismatch = abs(fit.slope - recomputed)
    if mismatch > CROSS_CHECK_TOL:
        warnings.append(
            f"{fit.path}: slope {fit.slope!r} disagrees with the value recomputed "
            f"from the data ({recomputed!r}) by {mismatch:.3g}"
        )
    return fit.slope, mismatch, warnings


def _save(fig: Figure, output: Path) -> None:
    output.parent.mkdir(parents=True, exist_ok=True)
    # a None value drops matplotlib's default Software tag, keeping the
    # bytes a function of the data alone
    fig.savefig(output, format="png", dpi=DPI, metadata={"Software": None})


def _render_convergence(job: PlotJob) -> RenderInfo:
    table = ConvergenceTable.load(job.inputs[0])
    fit = FitSummary.load(job.inputs[1]) if len(job.inputs) > 1 else None
    mask = table.plottable()
    if not mask.any():
        raise EmptyDataError(f"{table.path}: no plottable levels (all aborted or non-finite)")
    h = table.h[mask]
    err = table.mean_error[mask]
    std = table.std_error[mask]

    slope = None
    if h.size >= 2:
        slope, _ = _least_squares(np.log(h), np.log(err))
    file_slope, mismatch, warnings = _cross_check(
        fit, slope, ("convergence-time", "convergence-space")
    )

    x = np.sqrt(h) if job.sqrt_axis else h
    fig = Figure(figsize=FIGSIZE)
    ax = fig.add_subplot()
    if np.all(np.isfinite(std)):
        ax.errorbar(x, err, yerr=std, marker="o", capsize=3, label="mean error")
    else:
        ax.plot(x, err, marker="o", label="mean error")
    anchor = int(np.argmax(h))
    ref = np.sort(h)
    for p, style in ((0.5, "--"), (1.0, ":")):
        guide = err[anchor] * (ref / h[anchor]) ** p
        ax.plot(np.sqrt(ref) if job.sqrt_axis else ref, guide,
                style, color="gray", label=f"order {p:g} guide")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("sqrt(h)" if job.sqrt_axis else "h")
    ax.set_ylabel("mean error")
    if slope is not None:
        ax.set_title(f"observed order {slope:.3f}")
    ax.legend()
    _save(fig, job.output)
    return RenderInfo(slope, file_slope, mismatch, tuple(warnings))


def _render_longtime(job: PlotJob) -> RenderInfo:
    if len(job.inputs) != 1:
        raise PlotError("longtime figures take exactly one series CSV")
    series = SeriesTable.load(job.inputs[0])
    times, curves = series.mean_l2_by_species()
    fig = Figure(figsize=FIGSIZE)
    ax = fig.add_subplot()
    for s in sorted(curves):
        ax.plot(times, curves[s], label=f"species {s}")
    ax.set_xlabel("t")
    ax.set_ylabel("mean l2 norm")
    ax.legend()
    _save(fig, job.output)
    return RenderInfo(None, None, None)


def _render_entropy_decay(job: PlotJob) -> RenderInfo:
    series = SeriesTable.load(job.inputs[0])
    fit = FitSummary.load(job.inputs[1]) if len(job.inputs) > 1 else None
    times, rel = series.mean_rel_entropy()
    if not np.any(np.isfinite(rel)):
        raise PlotError(
            f"{series.path}: column 'rel_entropy' has no finite values "
            "(the model admits no reversibility weights)"
        )

    window = times >= TRANSIENT_FRACTION * float(times.max())
    slope = None
    intercept = None
    if np.count_nonzero(window) >= 2 and np.all(rel[window] > 0.0):
        slope, intercept = _least_squares(times[window], np.log(rel[window]))
    file_slope, mismatch, warnings = _cross_check(fit, slope, ("entropy-decay",))

    fig = Figure(figsize=FIGSIZE)
    ax = fig.add_subplot()
    positive = rel > 0.0
    ax.plot(times[positive], rel[positive], marker=".", label="mean relative entropy")
    if slope is not None:
        tw = times[window]
        ax.plot(tw, np.exp(intercept + slope * tw), "--", color="gray",
                label=f"rate {slope:.4f}")
        ax.set_title(f"fitted decay rate {slope:.4f}")
    ax.set_yscale("log")
    ax.set_xlabel("t")
    ax.set_ylabel("relative entropy")
    ax.legend()
    _save(fig, job.output)
    return RenderInfo(slope, file_slope, mismatch, tuple(warnings))


def render(job: PlotJob) -> RenderInfo:
    """Render ``job`` to its output path and report what was annotated.

    Raises:
        TableError: schema mismatch, naming the offending column.
        EmptyDataError: nothing to plot; no file is written.
        PlotError: structurally valid inputs that cannot make this figure.
    """
    if job.kind == "convergence":
        return _render_convergence(job)
    if job.kind == "longtime":
        return _render_longtime(job)
    return _render_entropy_decay(job)
