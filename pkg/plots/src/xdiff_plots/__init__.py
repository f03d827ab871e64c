"""Figures from the xdiff simulator's CSV files."""

from .figures import PlotError, PlotJob, RenderInfo, render
from .tables import (
    ConvergenceTable,
    EmptyDataError,
    FitSummary,
    SeriesTable,
    TableError,
)

__all__ = [
    "ConvergenceTable",
    "EmptyDataError",
    "FitSummary",
    "PlotError",
    "PlotJob",
    "RenderInfo",
    "SeriesTable",
    "TableError",
    "render",
]
