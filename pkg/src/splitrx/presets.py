"""Built-in experiments.

Each preset is ordinary config text, so it goes through the same parser and
validation as a user file. Parameters that are choices rather than given
values are listed under ``assumptions`` and copied into the run manifest.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path

from splitrx.config import ExperimentConfig, parse_config

__all__ = ["Preset", "PRESETS", "get_preset", "list_presets"]


@dataclass(frozen=True)
class Preset:
    name: str
    description: str
    text: str

    def config(self, *, trials: int | None = None, seed: int | None = None,
               output_dir: str | Path | None = None) -> ExperimentConfig:
        cfg = parse_config(self.text)
        sweep = cfg.sweep
        if trials is not None:
            sweep = replace(sweep, trials=trials)
        if seed is not None:
            sweep = replace(sweep, master_seed=seed)
        out = Path(output_dir) if output_dir is not None else cfg.output_dir
        return replace(cfg, sweep=sweep, output_dir=out)


_FIG3 = """\
[experiment]
name = fig3
kind = ser_vs_rho
formats = csv, json
emit_plot_data = true
assumptions = power levels 100, 200, 300 are preset choices

[sweep]
constellation = qam64
power = 100, 200, 300
rho = 0.05:0.95:0.05
detectors = low_complexity, ml_3d
trials = 100000
seed = 3
ml_stride = 1

[channel]
var_antenna = 1
var_conversion = 1
var_rectifier = 0.1
"""

_FIG4 = """\
[experiment]
name = fig4
kind = ser_vs_rho
formats = csv, json
emit_plot_data = true
assumptions = var_antenna = 1 is assumed; ring radii 1, 2, 3, 4 before normalization; ring k rotated by pi/n_k

[sweep]
constellation = apsk:6,8,8,10
power = 200, 300
rho = 0.05:0.9:0.05
detectors = low_complexity, ml_3d
trials = 100000
seed = 4

[channel]
var_antenna = 1
var_conversion = 1
var_rectifier = 1
"""

_FIG5 = """\
[experiment]
name = fig5
kind = gain
formats = csv, json
emit_plot_data = true
assumptions = power levels 50, 100, 200, 400 are preset choices; gain = min(SER_cd, SER_pd) / min over rho of SER_ml_3d

[sweep]
constellation = qam64
power = 50, 100, 200, 400
rho = 0.05:0.95:0.05
split_detector = ml_3d
trials = 100000
seed = 5

[channel]
var_antenna = 1
var_conversion = 1
var_rectifier = 0.1
"""

_COMPLEXITY = """\
[experiment]
name = complexity
kind = complexity
formats = csv, json
assumptions = reference cost is a stub of 300 multiplications plus binary exponentiation

[sweep]
constellation = qam64
power = 200
rho = 0.5
trials = 1000

[channel]
var_antenna = 1
var_conversion = 1
var_rectifier = 0.1
"""

PRESETS: dict[str, Preset] = {
    p.name: p
    for p in (
        Preset("fig3", "64-QAM SER vs rho, low-complexity vs exact ML; P in {100, 200, 300} "
                       "(preset choice), var_antenna = var_conversion = 1, var_rectifier = 0.1",
               _FIG3),
        Preset("fig4", "32-APSK (rings 6,8,8,10) SER vs rho, low-complexity vs exact ML; "
                       "P in {200, 300}, var_conversion = var_rectifier = 1, "
                       "var_antenna = 1 (assumed)",
               _FIG4),
        Preset("fig5", "64-QAM joint processing gain vs P in {50, 100, 200, 400} (preset choice), "
                       "splitting detector ml_3d", _FIG5),
        Preset("complexity", "multiplications per upsilon evaluation and ratio against a "
                             "300-multiplication likelihood cost stub", _COMPLEXITY),
    )
}


def get_preset(name: str) -> Preset:
    try:
        return PRESETS[name]
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}") from None


def list_presets() -> str:
    width = max(len(n) for n in PRESETS)
    return "\n".join(f"{p.name:<{width}}  {p.description}" for p in PRESETS.values()) + "\n"
