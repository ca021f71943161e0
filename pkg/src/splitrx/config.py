"""Experiment configuration files.

A config is a flat ``key = value`` file with three sections::

    [experiment]
    name = fig3
    kind = ser_vs_rho            # ser_vs_rho | gain | complexity
    formats = csv, json
    emit_plot_data = false
    output_dir = results
    assumptions = power levels are preset choices

    [sweep]
    constellation = qam64
    power = 100, 200, 300
    rho = 0.05:0.95:0.05         # start:stop:step, stop included
    detectors = low_complexity, ml_3d
    trials = 100000
    seed = 1

    [channel]
    var_antenna = 1
    var_conversion = 1
    var_rectifier = 0.1

``#`` starts a comment. Multiple assumptions are separated by ``;``.
:func:`canonical_text` writes the normalized form, with ranges expanded,
which parses back to an equal config.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from splitrx.channel import ChannelParams
from splitrx.constellation import parse_constellation
from splitrx.errors import ConfigError, InvalidOrder
from splitrx.montecarlo import DETECTORS, SweepConfig, check_detector

__all__ = ["ExperimentConfig", "parse_config", "load_config", "canonical_text", "config_hash"]

KINDS = ("ser_vs_rho", "gain", "complexity")
FORMATS = ("csv", "json")

_EXPERIMENT_KEYS = ("name", "kind", "formats", "emit_plot_data", "output_dir", "assumptions")
_SWEEP_KEYS = ("constellation", "power", "rho", "detectors", "trials", "seed", "ci_level",
               "quadrature_order", "ml_stride", "split_detector", "block_size")
_CHANNEL_KEYS = ("gain", "phase_shift", "eta", "var_antenna", "var_conversion", "var_rectifier")
_SECTIONS = {"experiment": _EXPERIMENT_KEYS, "sweep": _SWEEP_KEYS, "channel": _CHANNEL_KEYS}
_REQUIRED = {"experiment": ("name", "kind"), "sweep": ("constellation", "power")}


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    kind: str
    sweep: SweepConfig
    constellation: str
    output_dir: Path = Path("results")
    formats: tuple[str, ...] = ("csv", "json")
    emit_plot_data: bool = False
    assumptions: tuple[str, ...] = ()


def _split_list(value: str) -> list[str]:
    return [v.strip() for v in value.split(",") if v.strip()]


def _floats(value: str) -> list[float]:
    if ":" in value:
        parts = value.split(":")
        if len(parts) != 3:
            raise ValueError("range must be start:stop:step")
        start, stop, step = (float(p) for p in parts)
        if step <= 0 or stop < start:
            raise ValueError("range needs step > 0 and stop >= start")
        n = int(np.floor((stop - start) / step + 1e-9)) + 1
        # round away accumulated binary error so ranges print cleanly
        return [round(start + k * step, 12) for k in range(n)]
    return [float(v) for v in _split_list(value)]


def _bool(value: str) -> bool:
    v = value.strip().lower()
    if v in ("true", "yes", "1", "on"):
        return True
    if v in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"expected true/false, got {value!r}")


def _lex(text: str) -> tuple[dict, dict]:
    values: dict[str, dict[str, str]] = {}
    lines: dict[tuple[str, str], int] = {}
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigError(f"malformed section header {line!r}", lineno)
            section = line[1:-1].strip().lower()
            if section not in _SECTIONS:
                raise ConfigError(f"unknown section [{section}]", lineno)
            values.setdefault(section, {})
            lines[(section, "")] = lineno
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {line!r}", lineno)
        if section is None:
            raise ConfigError("key outside of any section", lineno)
        key, _, value = line.partition("=")
        key = key.strip().lower()
        if key not in _SECTIONS[section]:
            raise ConfigError(f"unknown key {key!r} in [{section}]", lineno, key)
        if key in values[section]:
            raise ConfigError(f"duplicate key {key!r}", lineno, key)
        values[section][key] = value.strip()
        lines[(section, key)] = lineno
    return values, lines


def parse_config(text: str) -> ExperimentConfig:
    """Parse and validate config text; raises :class:`ConfigError` with a line number."""
    values, lines = _lex(text)
    for section, keys in _REQUIRED.items():
        for key in keys:
            if key not in values.get(section, {}):
                raise ConfigError(f"missing required key {key!r} in [{section}]",
                                  lines.get((section, "")), key)

    def get(section, key, convert, default=None):
        raw = values.get(section, {}).get(key)
        if raw is None:
            return default
        try:
            return convert(raw)
        except (ValueError, InvalidOrder) as exc:
            raise ConfigError(f"{key}: {exc}", lines[(section, key)], key) from None

    def fail(section, key, message):
        raise ConfigError(f"{key}: {message}", lines.get((section, key)), key)

    name = get("experiment", "name", str)
    if not name:
        fail("experiment", "name", "must not be empty")
    kind = get("experiment", "kind", str.strip)
    if kind not in KINDS:
        fail("experiment", "kind", f"must be one of {', '.join(KINDS)}, got {kind!r}")
    formats = tuple(get("experiment", "formats", _split_list, ["csv", "json"]))
    if not formats or any(f not in FORMATS for f in formats):
        fail("experiment", "formats", f"must be a non-empty subset of {', '.join(FORMATS)}")
    emit = get("experiment", "emit_plot_data", _bool, False)
    output_dir = Path(get("experiment", "output_dir", str, "results"))
    assumptions = tuple(
        a.strip() for a in get("experiment", "assumptions", str, "").split(";") if a.strip()
    )

    cons_text = get("sweep", "constellation", str.strip)
    cons = get("sweep", "constellation", parse_constellation)
    powers = get("sweep", "power", _floats)
    if not powers or any(p <= 0 for p in powers):
        fail("sweep", "power", "values must be > 0")
    rhos = get("sweep", "rho", _floats, [0.5])
    for r in rhos:
        if not 0.0 <= r <= 1.0:
            fail("sweep", "rho", f"value {r:g} outside [0, 1]")
    for key, grid in (("power", powers), ("rho", rhos)):
        if any(b <= a for a, b in zip(grid, grid[1:])):
            fail("sweep", key, "values must be strictly increasing")
    detectors = tuple(get("sweep", "detectors", _split_list, ["low_complexity"]))
    split = get("sweep", "split_detector", str.strip, "ml_3d")
    for d in detectors + (split,):
        if d not in DETECTORS:
            key = "split_detector" if d == split and d not in detectors else "detectors"
            fail("sweep", key, f"unknown detector {d!r}; choose from {', '.join(DETECTORS)}")
    if kind == "ser_vs_rho" and "low_complexity" in detectors:
        edge = [r for r in rhos if r in (0.0, 1.0)]
        if edge:
            fail("sweep", "rho", f"low_complexity is undefined at rho={edge[0]:g}; "
                                 "use cd at rho=1 and pd at rho=0")
    if kind == "gain" and not any(0.0 < r < 1.0 for r in rhos):
        fail("sweep", "rho", "gain needs at least one rho strictly inside (0, 1)")

    channel = {}
    for key in _CHANNEL_KEYS:
        v = get("channel", key, float)
        if v is not None:
            channel[key] = v
    try:
        params = ChannelParams(power=powers[0], rho=rhos[0], **channel)
    except ValueError as exc:
        key = str(exc).split()[0]
        raise ConfigError(str(exc), lines.get(("channel", key)), key) from None

    sweep_kwargs = dict(
        trials=get("sweep", "trials", int, 100_000),
        master_seed=get("sweep", "seed", int, 0),
        ci_level=get("sweep", "ci_level", float, 0.95),
        quadrature_order=get("sweep", "quadrature_order", int, 48),
        ml_stride=get("sweep", "ml_stride", int, 1),
        block_size=get("sweep", "block_size", int, 10_000),
    )
    key_of = {"trials": "trials", "master_seed": "seed", "ci_level": "ci_level",
              "quadrature_order": "quadrature_order", "ml_stride": "ml_stride",
              "block_size": "block_size"}
    try:
        sweep = SweepConfig(cons, params, tuple(rhos), tuple(powers), detectors,
                            split_detector=split, **sweep_kwargs)
    except ValueError as exc:
        msg = str(exc)
        key = next((k for attr, k in key_of.items() if attr in msg or k in msg), None)
        raise ConfigError(msg, lines.get(("sweep", key)) if key else None, key) from None

    if kind == "gain":
        interior = [r for r in rhos if 0.0 < r < 1.0]
        needed = [("cd", 1.0), ("pd", 0.0)] + [(split, r) for r in interior]
    elif kind == "ser_vs_rho":
        needed = [(d, r) for d in detectors for r in rhos]
    else:
        needed = []
    for det, rho in needed:
        try:
            check_detector(det, params.replace(rho=rho))
        except ValueError as exc:
            key = "split_detector" if kind == "gain" and det == split else "detectors"
            raise ConfigError(f"{key}: {exc}", lines.get(("sweep", key)), key) from None

    return ExperimentConfig(name, kind, sweep, cons_text, output_dir, formats, emit, assumptions)


def load_config(path: str | Path) -> ExperimentConfig:
    return parse_config(Path(path).read_text())


def _num(v: float) -> str:
    return repr(int(v)) if float(v).is_integer() and abs(v) < 1e15 else repr(float(v))


def canonical_text(cfg: ExperimentConfig, *, include_output: bool = True) -> str:
    s, p = cfg.sweep, cfg.sweep.params
    out = [
        "[experiment]",
        f"name = {cfg.name}",
        f"kind = {cfg.kind}",
        f"formats = {', '.join(cfg.formats)}",
        f"emit_plot_data = {'true' if cfg.emit_plot_data else 'false'}",
    ]
    if include_output:
        out.append(f"output_dir = {cfg.output_dir.as_posix()}")
    if cfg.assumptions:
        out.append(f"assumptions = {'; '.join(cfg.assumptions)}")
    out += [
        "",
        "[sweep]",
        f"constellation = {cfg.constellation}",
        f"power = {', '.join(_num(v) for v in s.power_grid)}",
        f"rho = {', '.join(_num(v) for v in s.rho_grid)}",
        f"detectors = {', '.join(s.detectors)}",
        f"split_detector = {s.split_detector}",
        f"trials = {s.trials}",
        f"seed = {s.master_seed}",
        f"ci_level = {_num(s.ci_level)}",
        f"quadrature_order = {s.quadrature_order}",
        f"ml_stride = {s.ml_stride}",
        f"block_size = {s.block_size}",
        "",
        "[channel]",
    ]
    out += [f"{k} = {_num(getattr(p, k))}" for k in _CHANNEL_KEYS]
    return "\n".join(out) + "\n"


def config_hash(cfg: ExperimentConfig) -> str:
    """SHA-256 of the canonical text, ignoring where results are written."""
    return hashlib.sha256(canonical_text(cfg, include_output=False).encode()).hexdigest()
