"""Monte Carlo experiment harnesses: convergence studies and long runs.

Samples are independent work items.  Every sample's Brownian path is a
pure function of (base_seed, sample_index), and all reductions (means,
standard errors, fits) walk the samples in index order, so running an
ensemble on one worker or many produces bit-identical results.  A sample
whose integration blows up is excluded from the statistics and reported;
it never takes the rest of the ensemble down with it.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial
from typing import Callable, Sequence

import numpy as np

from .diagnostics import (
    DiagnosticsRecord,
    FitError,
    FitResult,
    ensemble_mean_error,
    fit_exponential_rate,
    fit_order,
)
from .grid import GridSpec, build_neumann_laplacian, factor_semi_implicit
from .model import ModelParams
from .noise import coarsen, sample_path
from .scheme import (
    BlowupError,
    TimeSpec,
    default_initial_data,
    run_path,
    two_species_initial_data,
)

#: fraction of the horizon dropped before fitting a decay rate
DECAY_FIT_TRANSIENT_FRACTION = 0.05

#: a convergence level with more than this fraction of aborted samples is
#: flagged invalid and excluded from the order fit
MAX_ABORT_FRACTION = 0.01


class HarnessError(ValueError):
    """Invalid experiment configuration."""


@dataclass(frozen=True, eq=False)
class ExperimentConfig:
    """Validated bundle describing one experiment.

    ``levels`` and ``reference`` are step sizes dt for the time study and
    node counts J for the space study; they are unused for plain runs.
    ``initial_kind`` selects the starting state: "auto" uses the
    two-species benchmark profile when n == 2 and the generic smooth
    profile otherwise.
    """

    model: ModelParams
    grid: GridSpec
    dt: float
    t_final: float
    samples: int
    base_seed: int
    kind: str = "simulate"
    levels: tuple[float, ...] | None = None
    reference: float | None = None
    record_every: int = 1
    out_dir: str | None = None
    initial_kind: str = "auto"

    def __post_init__(self) -> None:
        if not np.isfinite(self.dt) or self.dt <= 0.0:
            raise HarnessError(f"time.dt must be positive, got {self.dt}")
        if not np.isfinite(self.t_final) or self.t_final <= 0.0:
            raise HarnessError(f"time.T must be positive, got {self.t_final}")
        if self.samples < 1:
            raise HarnessError(f"ensemble.samples must be >= 1, got {self.samples}")
        if not 0 <= self.base_seed < 2**64:
            raise HarnessError("ensemble.seed must fit in 64 bits")
        if self.record_every < 1:
            raise HarnessError(f"study.record_every must be >= 1, got {self.record_every}")
        if self.kind not in ("simulate", "convergence-time", "convergence-space", "longtime"):
            raise HarnessError(f"unknown study kind {self.kind!r}")
        if self.initial_kind not in ("auto", "benchmark", "smooth"):
            raise HarnessError(f"unknown initial_kind {self.initial_kind!r}")


def initial_state(cfg: ExperimentConfig, grid: GridSpec | None = None) -> np.ndarray:
    """Starting state for ``cfg`` on ``grid`` (defaults to the config grid)."""
    grid = grid if grid is not None else cfg.grid
    n = cfg.model.n
    if cfg.initial_kind == "benchmark" or (cfg.initial_kind == "auto" and n == 2):
        if n != 2:
            raise HarnessError("benchmark initial data needs exactly two species")
        return two_species_initial_data(grid)
    return default_initial_data(n, grid)


@dataclass
class SampleRun:
    """Per-sample bookkeeping."""

    index: int
    aborted: bool
    abort_step: int | None
    clamp_events: int


@dataclass
class LevelStats:
    level: float       # dt for the time study, J for the space study
    h: float           # dt or dx
    mean_error: float
    std_error: float
    n_valid: int
    n_aborted: int
    valid: bool


@dataclass
class MeanSeries:
    """Ensemble means over valid samples at each recorded time."""

    times: np.ndarray     # (R,)
    l2: np.ndarray        # (R, n)
    rao: np.ndarray       # (R,)
    rel_rao: np.ndarray   # (R,)
    n_valid: int


@dataclass
class EnsembleResult:
    kind: str
    base_seed: int
    sample_runs: list[SampleRun]
    levels: list[LevelStats] | None = None
    fit: FitResult | None = None
    fit_note: str | None = None
    mean_series: MeanSeries | None = None
    series: dict[int, DiagnosticsRecord] | None = None
    entropy_available: bool = False

    @property
    def n_samples(self) -> int:
        return len(self.sample_runs)

    @property
    def n_aborted(self) -> int:
        return sum(1 for s in self.sample_runs if s.aborted)


def run_ensemble(
    n_samples: int,
    runner: Callable[[int], object],
    n_workers: int = 1,
) -> list[object]:
    """Evaluate ``runner`` on samples 0..n_samples-1, in index order.

    With ``n_workers > 1`` the samples are distributed over a process
    pool; results are still returned in index order, so reductions built
    on top cannot observe the scheduling.
    """
    if n_samples < 1:
        raise HarnessError(f"need at least one sample, got {n_samples}")
    if n_workers <= 1:
        return [runner(i) for i in range(n_samples)]
    chunksize = max(1, math.ceil(n_samples / (4 * n_workers)))
    with ProcessPoolExecutor(max_workers=n_workers) as pool:
        return list(pool.map(runner, range(n_samples), chunksize=chunksize))


# ---------------------------------------------------------------------------
# temporal convergence


def _integer_factor(coarse: float, fine: float, what: str) -> int:
    ratio = coarse / fine
    factor = round(ratio)
    if factor < 2 or abs(ratio - factor) > 1e-9 * factor:
        raise HarnessError(
            f"{what} {coarse!r} is not an integer multiple (>= 2) of the reference {fine!r}"
        )
    return factor


def _temporal_sample(cfg: ExperimentConfig, factors: tuple[int, ...], n_ref: int, index: int):
    u0 = initial_state(cfg)
    n = cfg.model.n
    dt_ref = float(cfg.reference)
    modes = cfg.model.noise.modes if cfg.model.noise is not None else 1
    path = sample_path(n, n_ref, dt_ref, cfg.base_seed, index, modes)
    lap = build_neumann_laplacian(cfg.grid)
    try:
        ref = run_path(
            u0, cfg.model, cfg.grid, TimeSpec(dt_ref, n_ref), path,
            record_every=max(1, n_ref),
            factor=factor_semi_implicit(lap, cfg.model.delta, dt_ref),
        )
    except BlowupError as err:
        return {"ok": False, "abort_step": err.step_index, "clamps": 0}
    finals = []
    clamps = ref.clamp_events
    for f in factors:
        cpath = coarsen(path, f)
        spec = TimeSpec(dt_ref * f, n_ref // f)
        try:
            res = run_path(
                u0, cfg.model, cfg.grid, spec, cpath,
                record_every=max(1, spec.n_steps),
                factor=factor_semi_implicit(lap, cfg.model.delta, spec.dt),
            )
            finals.append(res.final)
            clamps += res.clamp_events
        except BlowupError as err:
            finals.append(None)
    return {"ok": True, "ref": ref.final, "finals": finals, "clamps": clamps}


def temporal_convergence_study(cfg: ExperimentConfig, n_workers: int = 1) -> EnsembleResult:
    """Strong error against a fine-step reference on the same Brownian path.

    Every sample draws one path at the reference dt; each coarser level
    reuses that path through block-summed increments.  The error of a
    level is the ensemble mean of the per-sample final-time state error
    against the reference run, and the observed order is the log-log
    slope over the levels.
    """
    if cfg.levels is None or cfg.reference is None:
        raise HarnessError("convergence-time study needs study.levels and study.reference")
    if len(cfg.levels) < 2:
        raise HarnessError("convergence-time study needs at least two dt levels")
    dt_ref = float(cfg.reference)
    factors = tuple(
        _integer_factor(dt, dt_ref, f"study.levels dt={dt}") for dt in cfg.levels
    )
    n_ref = TimeSpec.from_horizon(dt_ref, cfg.t_final).n_steps
    for dt, f in zip(cfg.levels, factors):
        if n_ref % f != 0:
            raise HarnessError(f"level dt={dt}: factor {f} does not divide {n_ref} reference steps")

    results = run_ensemble(
        cfg.samples, partial(_temporal_sample, cfg, factors, n_ref), n_workers
    )

    sample_runs = [
        SampleRun(
            index=i,
            aborted=not r["ok"],
            abort_step=r.get("abort_step"),
            clamp_events=r.get("clamps", 0),
        )
        for i, r in enumerate(results)
    ]
    levels: list[LevelStats] = []
    for li, (dt, f) in enumerate(zip(cfg.levels, factors)):
        states, refs = [], []
        for r in results:
            if r["ok"] and r["finals"][li] is not None:
                states.append(r["finals"][li])
                refs.append(r["ref"])
        n_valid = len(states)
        n_aborted = cfg.samples - n_valid
        if n_valid >= 1:
            mean, stderr = ensemble_mean_error(
                np.asarray(states), np.asarray(refs), cfg.grid
            )
        else:
            mean, stderr = float("nan"), float("nan")
        levels.append(
            LevelStats(
                level=float(dt), h=float(dt), mean_error=mean, std_error=stderr,
                n_valid=n_valid, n_aborted=n_aborted,
                valid=n_valid >= 1 and n_aborted <= MAX_ABORT_FRACTION * cfg.samples,
            )
        )
    fit, note = _order_fit(levels)
    return EnsembleResult(
        kind="convergence-time", base_seed=cfg.base_seed, sample_runs=sample_runs,
        levels=levels, fit=fit, fit_note=note,
        entropy_available=cfg.model.pi is not None,
    )


def _order_fit(levels: list[LevelStats]) -> tuple[FitResult | None, str | None]:
    usable = [lv for lv in levels if lv.valid and np.isfinite(lv.mean_error)]
    if len(usable) < 2:
        return None, "fewer than two valid levels"
    try:
        fit = fit_order(
            np.array([lv.h for lv in usable]), np.array([lv.mean_error for lv in usable])
        )
    except FitError as err:
        return None, str(err)
    return fit, None


# ---------------------------------------------------------------------------
# spatial convergence


def _spatial_sample(cfg: ExperimentConfig, j_levels: tuple[int, ...], index: int):
    n = cfg.model.n
    time = TimeSpec.from_horizon(cfg.dt, cfg.t_final)
    modes = cfg.model.noise.modes if cfg.model.noise is not None else 1
    # one scalar driver per species: the very same path works on every grid
    path = sample_path(n, time.n_steps, cfg.dt, cfg.base_seed, index, modes)
    grid_ref = GridSpec(int(cfg.reference))
    try:
        ref = run_path(
            initial_state(cfg, grid_ref), cfg.model, grid_ref, time, path,
            record_every=max(1, time.n_steps),
        )
    except BlowupError as err:
        return {"ok": False, "abort_step": err.step_index, "clamps": 0}
    finals = []
    clamps = ref.clamp_events
    for j in j_levels:
        grid_j = GridSpec(j)
        try:
            res = run_path(
                initial_state(cfg, grid_j), cfg.model, grid_j, time, path,
                record_every=max(1, time.n_steps),
            )
            finals.append(res.final)
            clamps += res.clamp_events
        except BlowupError:
            finals.append(None)
    return {"ok": True, "ref": ref.final, "finals": finals, "clamps": clamps}


def spatial_convergence_study(cfg: ExperimentConfig, n_workers: int = 1) -> EnsembleResult:
    """Strong error of coarse grids against a fine-grid reference run.

    All runs of a sample share one Brownian path (the scalar per-species
    driver needs no spatial projection).  The reference solution is
    restricted to each coarse grid by taking every (J_ref/J)-th node, and
    errors are measured in the coarse grid's weighted norm.
    """
    if cfg.levels is None or cfg.reference is None:
        raise HarnessError("convergence-space study needs study.levels and study.reference")
    if len(cfg.levels) < 2:
        raise HarnessError("convergence-space study needs at least two J levels")
    j_ref = int(cfg.reference)
    j_levels = []
    for j in cfg.levels:
        ji = int(j)
        if ji != j or ji < 2:
            raise HarnessError(f"study.levels J={j!r} must be an integer >= 2")
        if ji >= j_ref or j_ref % ji != 0:
            raise HarnessError(f"study.levels J={ji} must divide the reference J={j_ref}")
        j_levels.append(ji)
    j_levels = tuple(j_levels)
    TimeSpec.from_horizon(cfg.dt, cfg.t_final)  # validates divisibility

    results = run_ensemble(
        cfg.samples, partial(_spatial_sample, cfg, j_levels), n_workers
    )
    sample_runs = [
        SampleRun(
            index=i, aborted=not r["ok"], abort_step=r.get("abort_step"),
            clamp_events=r.get("clamps", 0),
        )
        for i, r in enumerate(results)
    ]
    levels: list[LevelStats] = []
    for li, j in enumerate(j_levels):
        grid_j = GridSpec(j)
        stride = j_ref // j
        states, refs = [], []
        for r in results:
            if r["ok"] and r["finals"][li] is not None:
                states.append(r["finals"][li])
                refs.append(r["ref"][:, ::stride])
        n_valid = len(states)
        n_aborted = cfg.samples - n_valid
        if n_valid >= 1:
            mean, stderr = ensemble_mean_error(np.asarray(states), np.asarray(refs), grid_j)
        else:
            mean, stderr = float("nan"), float("nan")
        levels.append(
            LevelStats(
                level=float(j), h=grid_j.dx, mean_error=mean, std_error=stderr,
                n_valid=n_valid, n_aborted=n_aborted,
                valid=n_valid >= 1 and n_aborted <= MAX_ABORT_FRACTION * cfg.samples,
            )
        )
    fit, note = _order_fit(levels)
    return EnsembleResult(
        kind="convergence-space", base_seed=cfg.base_seed, sample_runs=sample_runs,
        levels=levels, fit=fit, fit_note=note,
        entropy_available=cfg.model.pi is not None,
    )


# ---------------------------------------------------------------------------
# long-time runs


def _series_sample(cfg: ExperimentConfig, index: int):
    time = TimeSpec.from_horizon(cfg.dt, cfg.t_final)
    noise = cfg.model.noise
    path = None
    if noise is not None and not noise.is_off:
        path = sample_path(
            cfg.model.n, time.n_steps, cfg.dt, cfg.base_seed, index, noise.modes
        )
    try:
        res = run_path(
            initial_state(cfg), cfg.model, cfg.grid, time, path,
            record_every=cfg.record_every,
        )
    except BlowupError as err:
        return {"ok": False, "abort_step": err.step_index, "clamps": 0}
    return {"ok": True, "record": res.record, "clamps": res.clamp_events}


def _collect_series(cfg: ExperimentConfig, results: list) -> tuple[list[SampleRun], dict[int, DiagnosticsRecord]]:
    sample_runs = [
        SampleRun(
            index=i, aborted=not r["ok"], abort_step=r.get("abort_step"),
            clamp_events=r.get("clamps", 0),
        )
        for i, r in enumerate(results)
    ]
    series = {i: r["record"] for i, r in enumerate(results) if r["ok"]}
    return sample_runs, series


def simulate_ensemble(cfg: ExperimentConfig, n_workers: int = 1) -> EnsembleResult:
    """Record per-sample diagnostic series for an ensemble of paths."""
    results = run_ensemble(cfg.samples, partial(_series_sample, cfg), n_workers)
    sample_runs, series = _collect_series(cfg, results)
    return EnsembleResult(
        kind="simulate", base_seed=cfg.base_seed, sample_runs=sample_runs,
        series=series, entropy_available=cfg.model.pi is not None,
    )


def longtime_study(cfg: ExperimentConfig, n_workers: int = 1) -> EnsembleResult:
    """Ensemble means of the recorded series plus an entropy decay fit.

    The decay rate is the log-linear slope of the mean relative entropy
    after dropping the initial transient; it is only computed when the
    interaction matrix admits reversibility weights (otherwise the
    entropy columns are unavailable and no fit is produced).
    """
    results = run_ensemble(cfg.samples, partial(_series_sample, cfg), n_workers)
    sample_runs, series = _collect_series(cfg, results)
    if not series:
        return EnsembleResult(
            kind="longtime", base_seed=cfg.base_seed, sample_runs=sample_runs,
            series=series, fit_note="all samples aborted",
            entropy_available=cfg.model.pi is not None,
        )
    valid = [series[i] for i in sorted(series)]
    times = valid[0].times
    l2_mean = np.mean(np.stack([r.l2 for r in valid]), axis=0)
    rao_mean = np.mean(np.stack([r.rao for r in valid]), axis=0)
    rel_mean = np.mean(np.stack([r.rel_rao for r in valid]), axis=0)
    mean_series = MeanSeries(
        times=times, l2=l2_mean, rao=rao_mean, rel_rao=rel_mean, n_valid=len(valid)
    )
    fit = None
    note = None
    if cfg.model.pi is None:
        note = "no reversibility weights: entropy unavailable"
    else:
        try:
            fit = fit_exponential_rate(
                times, rel_mean, drop_initial_fraction=DECAY_FIT_TRANSIENT_FRACTION
            )
        except FitError as err:
            note = str(err)
    return EnsembleResult(
        kind="longtime", base_seed=cfg.base_seed, sample_runs=sample_runs,
        series=series, mean_series=mean_series, fit=fit, fit_note=note,
        entropy_available=cfg.model.pi is not None,
    )
