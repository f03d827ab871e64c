"""Strict JSON experiment configuration.

A config file has the sections shown in ``configs/two_species.json``:

    model    {n, delta, A (row-major list of n*n entries), noise {kind, c[, modes]}}
    grid     {J}
    time     {dt, T}
    ensemble {samples, seed}
    study    {kind, levels, reference, record_every}   (optional parts)
    output   {dir}                                     (optional)

Unknown keys anywhere are rejected, and every diagnostic names the
offending dotted field, so a typo cannot silently fall back to a
default.  Reversibility weights are derived from the matrix at load
time when they exist; nothing in the file sets them directly.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from .harness import ExperimentConfig
from .model import (
    CoefficientMatrix,
    ModelParams,
    NotReversibleError,
    find_detailed_balance_weights,
)
from .grid import GridSpec
from .noise import NoiseKind, NoiseSpec

STUDY_KINDS = ("simulate", "convergence-time", "convergence-space", "longtime")


class ConfigError(ValueError):
    """Malformed or invalid configuration file."""


def _require_table(raw: Mapping[str, Any], name: str, allowed: set[str], required: set[str]) -> Mapping[str, Any]:
    section = raw.get(name)
    if section is None:
        raise ConfigError(f"{name}: required section is missing")
    if not isinstance(section, dict):
        raise ConfigError(f"{name}: must be an object")
    for key in section:
        if key not in allowed:
            raise ConfigError(f"{name}.{key}: unknown key")
    for key in required:
        if key not in section:
            raise ConfigError(f"{name}.{key}: required key is missing")
    return section


def _number(section: Mapping[str, Any], where: str, key: str) -> float:
    v = section[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{where}.{key}: expected a number, got {v!r}")
    return float(v)


def _integer(section: Mapping[str, Any], where: str, key: str) -> int:
    v = section[key]
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(f"{where}.{key}: expected an integer, got {v!r}")
    return v


def _parse_noise(section: Mapping[str, Any]) -> NoiseSpec:
    allowed = {"kind", "c", "modes"}
    for key in section:
        if key not in allowed:
            raise ConfigError(f"model.noise.{key}: unknown key")
    kind_s = section.get("kind")
    kinds = {k.value: k for k in NoiseKind}
    if kind_s not in kinds:
        raise ConfigError(
            f"model.noise.kind: expected one of {sorted(kinds)}, got {kind_s!r}"
        )
    kind = kinds[kind_s]
    modes = section.get("modes", 1)
    if isinstance(modes, bool) or not isinstance(modes, int) or modes < 1:
        raise ConfigError(f"model.noise.modes: expected a positive integer, got {modes!r}")
    if kind is NoiseKind.OFF:
        if "c" in section:
            raise ConfigError("model.noise.c: not allowed when kind is 'off'")
        return NoiseSpec(kind=kind, modes=modes)
    if "c" not in section:
        raise ConfigError("model.noise.c: required for this noise kind")
    c = _number(section, "model.noise", "c")
    if c < 0.0:
        raise ConfigError(f"model.noise.c: must be nonnegative, got {c}")
    return NoiseSpec(kind=kind, c=c, modes=modes)


def _parse_model(raw: Mapping[str, Any]) -> ModelParams:
    section = _require_table(raw, "model", {"n", "delta", "A", "noise"}, {"n", "delta", "A", "noise"})
    n = _integer(section, "model", "n")
    if n < 1:
        raise ConfigError(f"model.n: must be >= 1, got {n}")
    delta = _number(section, "model", "delta")
    if delta <= 0.0:
        raise ConfigError(f"model.delta: must be positive, got {delta}")
    a_raw = section["A"]
    if not isinstance(a_raw, list) or len(a_raw) != n * n:
        raise ConfigError(f"model.A: expected a row-major list of {n * n} numbers")
    entries = []
    for idx, v in enumerate(a_raw):
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ConfigError(f"model.A[{idx}]: expected a number, got {v!r}")
        if v < 0.0:
            raise ConfigError(f"model.A[{idx}]: entries must be nonnegative, got {v}")
        entries.append(float(v))
    matrix = CoefficientMatrix(np.array(entries).reshape(n, n))
    noise = _parse_noise(section["noise"]) if isinstance(section["noise"], dict) else None
    if noise is None:
        raise ConfigError("model.noise: must be an object")
    try:
        pi = find_detailed_balance_weights(matrix)
    except NotReversibleError:
        pi = None
    return ModelParams(delta=delta, a=matrix, pi=pi, noise=noise)


def _parse_study(raw: Mapping[str, Any], n_steps: int) -> dict[str, Any]:
    if "study" not in raw:
        return {
            "kind": "simulate",
            "levels": None,
            "reference": None,
            "record_every": _default_record_every(n_steps),
        }
    section = _require_table(
        raw, "study", {"kind", "levels", "reference", "record_every"}, {"kind"}
    )
    kind = section["kind"]
    if kind not in STUDY_KINDS:
        raise ConfigError(f"study.kind: expected one of {STUDY_KINDS}, got {kind!r}")
    levels = None
    if "levels" in section:
        lv = section["levels"]
        if not isinstance(lv, list) or len(lv) < 1:
            raise ConfigError("study.levels: expected a non-empty list of numbers")
        vals = []
        for idx, v in enumerate(lv):
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise ConfigError(f"study.levels[{idx}]: expected a number, got {v!r}")
            if v <= 0:
                raise ConfigError(f"study.levels[{idx}]: must be positive, got {v}")
            vals.append(float(v))
        levels = tuple(vals)
    reference = None
    if "reference" in section:
        reference = _number(section, "study", "reference")
        if reference <= 0.0:
            raise ConfigError(f"study.reference: must be positive, got {reference}")
    if kind.startswith("convergence") and (levels is None or reference is None):
        raise ConfigError(f"study.levels and study.reference: required for kind {kind!r}")
    if "record_every" in section:
        record_every = _integer(section, "study", "record_every")
        if record_every < 1:
            raise ConfigError(f"study.record_every: must be >= 1, got {record_every}")
    else:
        record_every = _default_record_every(n_steps)
    return {"kind": kind, "levels": levels, "reference": reference, "record_every": record_every}


def _default_record_every(n_steps: int) -> int:
    # about one hundred records per run regardless of the step count
    return max(1, n_steps // 100)


def config_hash(raw: Mapping[str, Any]) -> str:
    """SHA-256 of the canonical JSON form of the (effective) raw config."""
    canon = json.dumps(raw, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


def load_config(
    path: str | Path,
    *,
    seed: int | None = None,
    samples: int | None = None,
    out_dir: str | None = None,
) -> tuple[ExperimentConfig, str]:
    """Parse and validate a config file, applying command-line overrides.

    Returns the validated bundle together with the hash of the effective
    configuration (overrides applied), which output files embed so runs
    can be traced back to their exact inputs.

    Raises:
        ConfigError: naming the offending field, including line/column
            positions for malformed JSON.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as err:
        raise ConfigError(f"{path}: cannot read config: {err}") from err
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as err:
        raise ConfigError(f"{path}:{err.lineno}:{err.colno}: {err.msg}") from err
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be an object")
    for key in raw:
        if key not in ("model", "grid", "time", "ensemble", "study", "output"):
            raise ConfigError(f"{key}: unknown section")

    grid_sec = _require_table(raw, "grid", {"J"}, {"J"})
    j_cells = _integer(grid_sec, "grid", "J")
    if j_cells < 2:
        raise ConfigError(f"grid.J: must be >= 2, got {j_cells}")

    time_sec = _require_table(raw, "time", {"dt", "T"}, {"dt", "T"})
    dt = _number(time_sec, "time", "dt")
    t_final = _number(time_sec, "time", "T")
    if dt <= 0.0:
        raise ConfigError(f"time.dt: must be positive, got {dt}")
    if t_final <= 0.0:
        raise ConfigError(f"time.T: must be positive, got {t_final}")
    steps = round(t_final / dt)
    if steps < 1 or abs(steps * dt - t_final) > 1e-9 * t_final:
        raise ConfigError(f"time.dt: {dt} does not divide the horizon T={t_final}")

    ens_sec = _require_table(raw, "ensemble", {"samples", "seed"}, {"samples", "seed"})
    n_samples = _integer(ens_sec, "ensemble", "samples")
    if n_samples < 1:
        raise ConfigError(f"ensemble.samples: must be >= 1, got {n_samples}")
    base_seed = _integer(ens_sec, "ensemble", "seed")
    if not 0 <= base_seed < 2**64:
        raise ConfigError(f"ensemble.seed: must fit in 64 bits, got {base_seed}")

    out = None
    if "output" in raw:
        out_sec = _require_table(raw, "output", {"dir"}, {"dir"})
        if not isinstance(out_sec["dir"], str):
            raise ConfigError("output.dir: expected a string")
        out = out_sec["dir"]

    model = _parse_model(raw)
    study = _parse_study(raw, steps)

    # command-line overrides become part of the effective config and hash
    effective = json.loads(json.dumps(raw))
    if seed is not None:
        if not 0 <= seed < 2**64:
            raise ConfigError(f"--seed: must fit in 64 bits, got {seed}")
        effective["ensemble"]["seed"] = seed
        base_seed = seed
    if samples is not None:
        if samples < 1:
            raise ConfigError(f"--samples: must be >= 1, got {samples}")
        effective["ensemble"]["samples"] = samples
        n_samples = samples
    if out_dir is not None:
        effective.setdefault("output", {})["dir"] = out_dir
        out = out_dir

    cfg = ExperimentConfig(
        model=model,
        grid=GridSpec(j_cells),
        dt=dt,
        t_final=t_final,
        samples=n_samples,
        base_seed=base_seed,
        kind=study["kind"],
        levels=study["levels"],
        reference=study["reference"],
        record_every=study["record_every"],
        out_dir=out,
    )
    return cfg, config_hash(effective)
