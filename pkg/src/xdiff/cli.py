"""Command-line entry point.

    xdiff simulate         --config cfg.json [--seed N] [--samples M] [--out DIR] [--threads K|auto]
    xdiff convergence-time --config cfg.json ...
    xdiff convergence-space --config cfg.json ...
    xdiff longtime         --config cfg.json ...
    xdiff check-model      --config cfg.json

Exit codes: 0 on success, 1 for configuration/validation problems, 2 for
runtime failures such as every sample aborting.  The worker count comes
from --threads, falling back to the XDIFF_THREADS environment variable
and then to 1; "auto" uses the machine's CPU count.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from .config import ConfigError, load_config
from .csvio import write_convergence_csv, write_fit_csv, write_series_csv
from .grid import GridError
from .harness import (
    EnsembleResult,
    ExperimentConfig,
    HarnessError,
    longtime_study,
    simulate_ensemble,
    spatial_convergence_study,
    temporal_convergence_study,
)
from .model import (
    ModelError,
    NotReversibleError,
    eigenvalues_have_positive_real_part,
    find_detailed_balance_weights,
)
from .noise import NoiseError
from .scheme import SchemeError

_VALIDATION_ERRORS = (ConfigError, HarnessError, ModelError, GridError, NoiseError, SchemeError)


class RuntimeFailure(RuntimeError):
    """A study ran but produced nothing usable."""


def _add_common(p: argparse.ArgumentParser, with_run_flags: bool = True) -> None:
    p.add_argument("--config", required=True, help="path to the JSON config")
    if with_run_flags:
        p.add_argument("--seed", type=int, default=None, help="override ensemble.seed")
        p.add_argument("--samples", type=int, default=None, help="override ensemble.samples")
        p.add_argument("--out", default=None, help="override output.dir")
        p.add_argument(
            "--threads",
            default=None,
            help="worker count, or 'auto' (default: $XDIFF_THREADS or 1)",
        )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="xdiff",
        description="Stochastic cross-diffusion simulations on the unit interval.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("simulate", "integrate an ensemble of paths and write series.csv"),
        ("convergence-time", "strong error over dt levels against a fine-dt reference"),
        ("convergence-space", "strong error over grids against a fine-grid reference"),
        ("longtime", "ensemble mean series and entropy decay fit"),
    ):
        _add_common(sub.add_parser(name, help=help_text))
    _add_common(
        sub.add_parser("check-model", help="report eigenvalue and reversibility checks"),
        with_run_flags=False,
    )
    return parser


def _resolve_threads(value: str | None) -> int:
    if value is None:
        value = os.environ.get("XDIFF_THREADS", "1")
    if value == "auto":
        return os.cpu_count() or 1
    try:
        threads = int(value)
    except ValueError:
        raise ConfigError(f"--threads: expected an integer or 'auto', got {value!r}") from None
    if threads < 1:
        raise ConfigError(f"--threads: must be >= 1, got {threads}")
    return threads


def _check_study_kind(cfg: ExperimentConfig, expected: str) -> ExperimentConfig:
    if cfg.kind != expected:
        raise ConfigError(
            f"study.kind: config says {cfg.kind!r} but the command is {expected!r}"
        )
    return cfg


def _out_dir(cfg: ExperimentConfig) -> Path:
    return Path(cfg.out_dir) if cfg.out_dir is not None else Path("out")


def _report_aborts(result: EnsembleResult) -> None:
    if result.n_aborted:
        print(
            f"warning: {result.n_aborted} of {result.n_samples} samples aborted",
            file=sys.stderr,
        )
    if result.n_aborted == result.n_samples:
        raise RuntimeFailure("all samples aborted")


def _cmd_simulate(args: argparse.Namespace) -> int:
    cfg, digest = load_config(args.config, seed=args.seed, samples=args.samples, out_dir=args.out)
    if cfg.kind != "simulate":
        raise ConfigError(f"study.kind: config says {cfg.kind!r} but the command is 'simulate'")
    result = simulate_ensemble(cfg, n_workers=_resolve_threads(args.threads))
    _report_aborts(result)
    out = _out_dir(cfg)
    write_series_csv(out / "series.csv", result, cfg.base_seed, digest)
    print(f"wrote {out / 'series.csv'} ({result.n_samples - result.n_aborted} samples)")
    return 0


def _cmd_convergence(args: argparse.Namespace, kind: str) -> int:
    cfg, digest = load_config(args.config, seed=args.seed, samples=args.samples, out_dir=args.out)
    _check_study_kind(cfg, kind)
    study = temporal_convergence_study if kind == "convergence-time" else spatial_convergence_study
    result = study(cfg, n_workers=_resolve_threads(args.threads))
    _report_aborts(result)
    out = _out_dir(cfg)
    write_convergence_csv(out / "convergence.csv", result, cfg.base_seed, digest)
    print(f"wrote {out / 'convergence.csv'}")
    if result.fit is not None:
        write_fit_csv(out / "fit.csv", kind, result.fit, cfg.base_seed, digest)
        print(f"wrote {out / 'fit.csv'}")
        print(
            f"{kind}: order {result.fit.slope:.3f} "
            f"(r^2 {result.fit.r_squared:.4f}, {len(result.levels)} levels, "
            f"{result.n_samples} samples)"
        )
    else:
        print(f"warning: no order fit: {result.fit_note}", file=sys.stderr)
    return 0


def _cmd_longtime(args: argparse.Namespace) -> int:
    cfg, digest = load_config(args.config, seed=args.seed, samples=args.samples, out_dir=args.out)
    _check_study_kind(cfg, "longtime")
    result = longtime_study(cfg, n_workers=_resolve_threads(args.threads))
    _report_aborts(result)
    out = _out_dir(cfg)
    write_series_csv(out / "series.csv", result, cfg.base_seed, digest)
    print(f"wrote {out / 'series.csv'}")
    if result.fit is not None:
        write_fit_csv(out / "fit.csv", "entropy-decay", result.fit, cfg.base_seed, digest)
        print(f"wrote {out / 'fit.csv'}")
        print(
            f"entropy decay rate {result.fit.slope:.4f} (r^2 {result.fit.r_squared:.4f})"
        )
    elif not result.entropy_available:
        print("entropy unavailable: no reversibility weights for this matrix")
    else:
        print(f"warning: no decay fit: {result.fit_note}", file=sys.stderr)
    return 0


def _cmd_check_model(args: argparse.Namespace) -> int:
    cfg, _ = load_config(args.config)
    matrix = cfg.model.a
    if eigenvalues_have_positive_real_part(matrix):
        print("eigenvalues: all real parts positive")
    else:
        print("eigenvalues: NOT all real parts positive")
    try:
        weights = find_detailed_balance_weights(matrix)
        pi_text = ", ".join(repr(float(p)) for p in weights.pi)
        print(f"detailed balance: satisfied, pi = ({pi_text})")
    except NotReversibleError as err:
        print("detailed balance: NOT satisfied")
        print(f"  reason: {err}")
    return 0


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "simulate":
            return _cmd_simulate(args)
        if args.command == "convergence-time":
            return _cmd_convergence(args, "convergence-time")
        if args.command == "convergence-space":
            return _cmd_convergence(args, "convergence-space")
        if args.command == "longtime":
            return _cmd_longtime(args)
        if args.command == "check-model":
            return _cmd_check_model(args)
        raise AssertionError(f"unhandled command {args.command!r}")
    except _VALIDATION_ERRORS as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except (RuntimeFailure, RuntimeError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
