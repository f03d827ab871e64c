"""Readers for the simulator's three CSV file kinds.

The files share a layout: two comment lines (``# seed=...`` and
``# config_hash=...``), a header row, then data rows.  Loading is
strict — a header that deviates from the expected schema fails with a
message naming the first offending column, so a file from the wrong
study (or a stale schema) cannot be plotted by accident.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

SERIES_COLUMNS = (
    "sample", "t", "species", "l2_norm", "mass", "min_value",
    "rao_entropy", "rel_entropy",
)
CONVERGENCE_COLUMNS = ("level", "h", "mean_error", "std_error", "n_valid", "n_aborted")
FIT_COLUMNS = ("study", "slope", "intercept", "r_squared")

#: a refinement level with more than this fraction of aborted samples is
#: treated as invalid and left out of plots and slope fits
MAX_ABORT_FRACTION = 0.01


class TableError(ValueError):
    """A CSV file does not match its expected schema."""


class EmptyDataError(TableError):
    """A schema-valid CSV file with no data rows."""


def _read_raw(path: str | Path) -> tuple[dict[str, str], list[str], list[list[str]]]:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as err:
        raise TableError(f"{path}: cannot read: {err}") from err
    meta: dict[str, str] = {}
    header: list[str] | None = None
    rows: list[list[str]] = []
    for line in text.splitlines():
        if not line.strip():
            continue
        if line.startswith("#"):
            if header is None and "=" in line:
                key, _, value = line.lstrip("# ").partition("=")
                meta[key.strip()] = value.strip()
            continue
        fields = line.split(",")
        if header is None:
            header = fields
        else:
            rows.append(fields)
    if header is None:
        raise TableError(f"{path}: no header row found")
    return meta, header, rows


def _check_columns(path: Path, found: list[str], expected: tuple[str, ...]) -> None:
    if tuple(found) == expected:
        return
    for col in expected:
        if col not in found:
            raise TableError(f"{path}: missing column {col!r}")
    for col in found:
        if col not in expected:
            raise TableError(f"{path}: unexpected column {col!r}")
    raise TableError(f"{path}: columns out of order, expected {','.join(expected)}")


def _column(path: Path, rows: list[list[str]], index: int, name: str, kind: type) -> np.ndarray:
    out = []
    for r, fields in enumerate(rows):
        if len(fields) != len(rows[0]):
            raise TableError(f"{path}: row {r} has {len(fields)} fields")
        try:
            out.append(kind(fields[index]))
        except ValueError as err:
            raise TableError(f"{path}: column {name!r}, row {r}: {err}") from None
    return np.asarray(out)


@dataclass(frozen=True)
class ConvergenceTable:
    """One row per refinement level of a convergence study."""

    path: Path
    meta: dict[str, str]
    level: np.ndarray
    h: np.ndarray
    mean_error: np.ndarray
    std_error: np.ndarray
    n_valid: np.ndarray
    n_aborted: np.ndarray

    @classmethod
    def load(cls, path: str | Path) -> "ConvergenceTable":
        path = Path(path)
        meta, header, rows = _read_raw(path)
        _check_columns(path, header, CONVERGENCE_COLUMNS)
        if not rows:
            raise EmptyDataError(f"{path}: no data rows")
        return cls(
            path=path,
            meta=meta,
            level=_column(path, rows, 0, "level", float),
            h=_column(path, rows, 1, "h", float),
            mean_error=_column(path, rows, 2, "mean_error", float),
            std_error=_column(path, rows, 3, "std_error", float),
            n_valid=_column(path, rows, 4, "n_valid", int),
            n_aborted=_column(path, rows, 5, "n_aborted", int),
        )

    def plottable(self) -> np.ndarray:
        """Mask of levels that carry a usable error estimate.

        A level is usable when at least one sample survived, at most 1%
        aborted, and the mean error is finite and positive (a log axis
        cannot show anything else).
        """
        total = self.n_valid + self.n_aborted
        with np.errstate(invalid="ignore"):
            return (
                (self.n_valid >= 1)
                & (self.n_aborted <= MAX_ABORT_FRACTION * total)
                & np.isfinite(self.mean_error)
                & (self.mean_error > 0.0)
            )


@dataclass(frozen=True)
class SeriesTable:
    """Per-sample diagnostic series, one row per (sample, time, species)."""

    path: Path
    meta: dict[str, str]
    sample: np.ndarray
    t: np.ndarray
    species: np.ndarray
    l2_norm: np.ndarray
    mass: np.ndarray
    min_value: np.ndarray
    rao_entropy: np.ndarray
    rel_entropy: np.ndarray

    @classmethod
    def load(cls, path: str | Path) -> "SeriesTable":
        path = Path(path)
        meta, header, rows = _read_raw(path)
        _check_columns(path, header, SERIES_COLUMNS)
        if not rows:
            raise EmptyDataError(f"{path}: no data rows")
        return cls(
            path=path,
            meta=meta,
            sample=_column(path, rows, 0, "sample", int),
            t=_column(path, rows, 1, "t", float),
            species=_column(path, rows, 2, "species", int),
            l2_norm=_column(path, rows, 3, "l2_norm", float),
            mass=_column(path, rows, 4, "mass", float),
            min_value=_column(path, rows, 5, "min_value", float),
            rao_entropy=_column(path, rows, 6, "rao_entropy", float),
            rel_entropy=_column(path, rows, 7, "rel_entropy", float),
        )

    def mean_l2_by_species(self) -> tuple[np.ndarray, dict[int, np.ndarray]]:
        """Ensemble mean of the l2 norm per species at each time."""
        times = np.unique(self.t)
        curves: dict[int, np.ndarray] = {}
        for s in np.unique(self.species):
            mask = self.species == s
            curves[int(s)] = np.array(
                [self.l2_norm[mask & (self.t == tv)].mean() for tv in times]
            )
        return times, curves

    def mean_rel_entropy(self) -> tuple[np.ndarray, np.ndarray]:
        """Ensemble mean relative entropy at each time.

        The value is repeated across a sample's species rows, so the
        mean over all rows at a time equals the mean over samples.
        """
        times = np.unique(self.t)
        mean = np.array([self.rel_entropy[self.t == tv].mean() for tv in times])
        return times, mean


@dataclass(frozen=True)
class FitSummary:
    """The single-row fit file written next to a study's data file."""

    path: Path
    meta: dict[str, str]
    study: str
    slope: float
    intercept: float
    r_squared: float

    @classmethod
    def load(cls, path: str | Path) -> "FitSummary":
        path = Path(path)
        meta, header, rows = _read_raw(path)
        _check_columns(path, header, FIT_COLUMNS)
        if not rows:
            raise EmptyDataError(f"{path}: no data rows")
        if len(rows) != 1:
            raise TableError(f"{path}: expected exactly one fit row, got {len(rows)}")
        row = rows[0]
        try:
            return cls(
                path=path, meta=meta, study=row[0],
                slope=float(row[1]), intercept=float(row[2]), r_squared=float(row[3]),
            )
        except (ValueError, IndexError) as err:
            raise TableError(f"{path}: malformed fit row: {err}") from None
