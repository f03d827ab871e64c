"""Deterministic CSV emission for study results.

Three files cover all studies:

    series.csv       sample,t,species,l2_norm,mass,min_value,rao_entropy,rel_entropy
    convergence.csv  level,h,mean_error,std_error,n_valid,n_aborted
    fit.csv          study,slope,intercept,r_squared

Every file starts with two comment lines, ``# seed=...`` and
``# config_hash=...``.  Floats are written with ``repr``, the shortest
form that round-trips to the identical double, and rows follow sample
then record then species order, so re-running the same configuration on
any worker count yields byte-identical files.

The species column is 1-based (species 1 is the first row of the state).
Entropy columns repeat the joint value on each species row and read
``nan`` when the model admits no reversibility weights.
"""

from __future__ import annotations

from pathlib import Path
from typing import Iterable

from .diagnostics import FitResult
from .harness import EnsembleResult

SERIES_HEADER = "sample,t,species,l2_norm,mass,min_value,rao_entropy,rel_entropy"
CONVERGENCE_HEADER = "level,h,mean_error,std_error,n_valid,n_aborted"
FIT_HEADER = "study,slope,intercept,r_squared"


def format_value(x: object) -> str:
    if isinstance(x, bool):
        raise TypeError("booleans have no CSV representation here")
    if isinstance(x, int):
        return str(x)
    if isinstance(x, float):
        return repr(x)
    if isinstance(x, str):
        return x
    return repr(float(x))


def _write(path: Path, seed: int, config_hash: str, header: str, rows: Iterable[tuple]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"# seed={seed}\n")
        fh.write(f"# config_hash={config_hash}\n")
        fh.write(header + "\n")
        for row in rows:
            fh.write(",".join(format_value(v) for v in row) + "\n")


def write_series_csv(path: str | Path, result: EnsembleResult, seed: int, config_hash: str) -> None:
    """Per-sample diagnostic series; aborted samples contribute no rows."""
    if result.series is None:
        raise ValueError(f"{result.kind} result carries no series data")

    def rows():
        for idx in sorted(result.series):
            rec = result.series[idx]
            n = rec.l2.shape[1]
            for r in range(rec.n_records):
                t = float(rec.times[r])
                for s in range(n):
                    yield (
                        idx,
                        t,
                        s + 1,
                        float(rec.l2[r, s]),
                        float(rec.mass[r, s]),
                        float(rec.min_value[r, s]),
                        float(rec.rao[r]),
                        float(rec.rel_rao[r]),
                    )

    _write(Path(path), seed, config_hash, SERIES_HEADER, rows())


def write_convergence_csv(path: str | Path, result: EnsembleResult, seed: int, config_hash: str) -> None:
    if result.levels is None:
        raise ValueError(f"{result.kind} result carries no convergence levels")
    rows = (
        (
            float(lv.level),
            float(lv.h),
            float(lv.mean_error),
            float(lv.std_error),
            lv.n_valid,
            lv.n_aborted,
        )
        for lv in result.levels
    )
    _write(Path(path), seed, config_hash, CONVERGENCE_HEADER, rows)


def write_fit_csv(path: str | Path, study: str, fit: FitResult, seed: int, config_hash: str) -> None:
    rows = [(study, float(fit.slope), float(fit.intercept), float(fit.r_squared))]
    _write(Path(path), seed, config_hash, FIT_HEADER, rows)
