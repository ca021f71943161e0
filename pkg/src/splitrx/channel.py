"""Dual-branch splitting-receiver channel.

The received signal ``sqrt(P) h x + w`` is split by ``rho``: the coherent
branch sees ``sqrt(rho)`` of the field plus conversion noise, the power
branch sees ``(1 - rho)`` of its squared magnitude (times the conversion
efficiency ``eta``) plus rectifier noise.

:func:`transmit` returns the phase-derotated, ``eta``-normalized form that
every detector consumes. :func:`transmit_raw` is the physical form; the two
agree after :func:`derotate`.

All functions accept scalars or numpy arrays and broadcast.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "ChannelParams",
    "NoiseDraw",
    "SplitObservation",
    "draw_noise",
    "transmit",
    "transmit_raw",
    "derotate",
]


@dataclass(frozen=True)
class ChannelParams:
    """Physical parameters of one link; variances are linear powers."""

    power: float
    gain: float = 1.0
    phase_shift: float = 0.0
    rho: float = 0.5
    eta: float = 1.0
    var_antenna: float = 1.0
    var_conversion: float = 1.0
    var_rectifier: float = 0.1

    def __post_init__(self):
        checks = (
            ("power", self.power > 0, "must be > 0"),
            ("gain", self.gain > 0, "must be > 0"),
            ("phase_shift", math.isfinite(self.phase_shift), "must be finite"),
            ("rho", 0.0 <= self.rho <= 1.0, "must lie in [0, 1]"),
            ("eta", 0.0 < self.eta <= 1.0, "must lie in (0, 1]"),
            ("var_antenna", self.var_antenna >= 0, "must be >= 0"),
            ("var_conversion", self.var_conversion >= 0, "must be >= 0"),
            ("var_rectifier", self.var_rectifier >= 0, "must be >= 0"),
        )
        for name, ok, msg in checks:
            # NaN fails every comparison above, so it lands here too
            if not ok:
                raise ValueError(f"{name} {msg}, got {getattr(self, name)!r}")

    @property
    def amplitude(self) -> float:
        """Received amplitude scale ``sqrt(P) |h|``."""
        return math.sqrt(self.power) * self.gain

    def replace(self, **changes) -> "ChannelParams":
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True)
class NoiseDraw:
    """Antenna, conversion and rectifier noise in the derotated frame."""

    antenna: complex | np.ndarray
    conversion: complex | np.ndarray
    rectifier: float | np.ndarray

    @classmethod
    def zeros(cls, size=None) -> "NoiseDraw":
        if size is None:
            return cls(0j, 0j, 0.0)
        return cls(np.zeros(size, complex), np.zeros(size, complex), np.zeros(size))


@dataclass(frozen=True)
class SplitObservation:
    """Coherent sample ``y1`` and power sample ``y2``; ``y2`` may be negative."""

    coherent: complex | np.ndarray
    power: float | np.ndarray

    def __len__(self) -> int:
        return np.size(self.coherent)

    def __getitem__(self, key) -> "SplitObservation":
        return SplitObservation(np.asarray(self.coherent)[key], np.asarray(self.power)[key])


def _value(x):
    return getattr(x, "value", x)


def draw_noise(params: ChannelParams, rng: np.random.Generator, size=None) -> NoiseDraw:
    """Sample one noise triple (or ``size`` of them).

    Five standard normals are drawn per sample in a fixed order and scaled,
    so two parameter sets with the same seed see the same underlying noise.
    """
    shape = (5,) if size is None else (5,) + tuple(np.atleast_1d(size))
    g = rng.standard_normal(shape)
    sa = math.sqrt(params.var_antenna / 2)
    sc = math.sqrt(params.var_conversion / 2)
    sr = math.sqrt(params.var_rectifier)
    w = sa * (g[0] + 1j * g[1])
    z = sc * (g[2] + 1j * g[3])
    n = sr * g[4]
    if size is None:
        return NoiseDraw(complex(w), complex(z), float(n))
    return NoiseDraw(w, z, n)


def transmit(x, params: ChannelParams, noise: NoiseDraw) -> SplitObservation:
    """Derotated observation ``(sqrt(rho)(A x + w) + z, (1-rho)|A x + w|^2 + n)``."""
    field = params.amplitude * np.asarray(_value(x)) + noise.antenna
    y1 = math.sqrt(params.rho) * field + noise.conversion
    y2 = (1.0 - params.rho) * np.abs(field) ** 2 + noise.rectifier
    if np.ndim(y1) == 0:
        return SplitObservation(complex(y1), float(y2))
    return SplitObservation(y1, y2)


def transmit_raw(x, params: ChannelParams, noise: NoiseDraw) -> SplitObservation:
    """Physical observation before derotation by the channel phase and division by ``eta``.

    ``noise`` is given in the derotated frame; the physical noises are
    ``w' = e^{j phi} w``, ``z' = e^{j phi} z`` and ``n' = eta n``.
    """
    rot = np.exp(1j * params.phase_shift)
    h = params.gain * rot
    field = math.sqrt(params.power) * h * np.asarray(_value(x)) + rot * noise.antenna
    y1 = math.sqrt(params.rho) * field + rot * noise.conversion
    y2 = params.eta * (1.0 - params.rho) * np.abs(field) ** 2 + params.eta * noise.rectifier
    if np.ndim(y1) == 0:
        return SplitObservation(complex(y1), float(y2))
    return SplitObservation(y1, y2)


def derotate(obs: SplitObservation, params: ChannelParams) -> SplitObservation:
    """Map a physical observation to the canonical frame used by detectors."""
    y1 = np.exp(-1j * params.phase_shift) * np.asarray(obs.coherent)
    y2 = np.asarray(obs.power) / params.eta
    if np.ndim(y1) == 0:
        return SplitObservation(complex(y1), float(y2))
    return SplitObservation(y1, y2)
