"""Low-complexity two-dimensional detection and the coherent-only baseline.

The splitting receiver's three-dimensional observation ``(y1, y2)`` is
collapsed to one complex sample carrying the amplitude of the power branch
and the phase of the coherent branch. Around each candidate symbol the
remaining noise is approximately Gaussian, with antenna noise alone along
the symbol direction and antenna plus conversion noise across it. After a
rotation into that frame the two components are independent, and maximum
likelihood becomes a weighted minimum-distance rule (the ``upsilon``
metric).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from splitrx.channel import ChannelParams, SplitObservation
from splitrx.constellation import Constellation, ConstellationPoint
from splitrx.errors import SplitterDegenerate

__all__ = [
    "ApproxNoiseModel",
    "RotatedObservation",
    "DetectorVerdict",
    "collapse_2d",
    "detection_frame",
    "rotate",
    "upsilon",
    "upsilon_terms",
    "upsilon_matrix",
    "cd_metrics",
    "detect_low_complexity",
    "detect_cd",
    "low_complexity_indices",
    "cd_indices",
]


@dataclass(frozen=True)
class ApproxNoiseModel:
    """Gaussian noise model of the collapsed sample around one symbol.

    ``var_r``/``var_i``/``corr`` describe the in-phase and quadrature
    components in the original axes; ``var_r_rot``/``var_i_rot`` the
    components along and across the symbol direction, which are independent.
    """

    var_r: float
    var_i: float
    corr: float
    var_r_rot: float
    var_i_rot: float

    @classmethod
    def for_symbol(cls, candidate: ConstellationPoint | complex, params: ChannelParams):
        if params.rho <= 0:
            raise SplitterDegenerate("the collapsed noise model needs rho > 0")
        x = complex(getattr(candidate, "value", candidate))
        mag = abs(x)
        sin_t, cos_t = x.imag / mag, x.real / mag
        half_a = params.var_antenna / 2
        half_c = params.var_conversion / (2 * params.rho)
        var_r = half_a + sin_t**2 * half_c
        var_i = half_a + cos_t**2 * half_c
        denom = math.sqrt(var_r * var_i)
        corr = -sin_t * cos_t * half_c / denom if denom > 0 else 0.0
        return cls(var_r, var_i, corr, half_a, half_a + half_c)

    @property
    def covariance(self) -> np.ndarray:
        c = self.corr * math.sqrt(self.var_r * self.var_i)
        return np.array([[self.var_r, c], [c, self.var_i]])


@dataclass(frozen=True)
class RotatedObservation:
    r_prime: float
    i_prime: float


@dataclass(frozen=True)
class DetectorVerdict:
    """Decision plus the per-candidate metric it was taken from.

    ``metrics`` holds the upsilon / distance values (minimized) or the
    log-likelihoods (maximized), depending on the detector.
    """

    symbol_index: int
    metrics: tuple[float, ...]
    mult_count: int | None = None


def collapse_2d(obs: SplitObservation):
    """``sqrt(max(y2, 0)) * exp(j angle(y1))``, with angle 0 when ``y1 == 0``."""
    y1 = np.asarray(obs.coherent)
    mag = np.sqrt(np.maximum(np.asarray(obs.power, dtype=float), 0.0))
    out = mag * np.exp(1j * np.angle(y1))
    return complex(out) if out.ndim == 0 else out


def detection_frame(obs: SplitObservation, params: ChannelParams):
    """Collapse the observation and put it on the scale ``sqrt(P)|h| x``.

    The coherent branch is divided by ``sqrt(rho)`` and the power branch by
    ``1 - rho`` before collapsing (the phase of ``y1`` is unaffected by the
    first, so only the second matters).
    """
    if not 0.0 < params.rho < 1.0:
        raise SplitterDegenerate(
            f"collapsing both branches needs 0 < rho < 1, got rho={params.rho}"
        )
    scaled = SplitObservation(obs.coherent, np.asarray(obs.power) / (1.0 - params.rho))
    return collapse_2d(scaled)


def rotate(y, candidate: ConstellationPoint, params: ChannelParams) -> RotatedObservation:
    """Express ``y`` relative to the candidate in along/across coordinates."""
    mag = candidate.magnitude
    cos_t = candidate.value.real / mag
    sin_t = candidate.value.imag / mag
    y_r, y_i = np.real(y), np.imag(y)
    r = y_r * cos_t + y_i * sin_t - params.amplitude * mag
    i = y_i * cos_t - y_r * sin_t
    return RotatedObservation(r, i)


def upsilon_terms(y_r, y_i, x_r, x_i, mag, amp, var_a, var_c, rho):
    """Upsilon written out term by term.

    Plain arithmetic only, so the same code runs on floats, numpy arrays and
    the operation-counting scalar in :mod:`splitrx.opcount`.
    """
    along = y_r * x_r / mag + y_i * x_i / mag - amp * mag
    across = y_i * x_r - y_r * x_i
    inv_mag2 = 1 / (mag * mag)
    return along**2 / var_a + inv_mag2 * across**2 / (var_a + var_c / rho)


def _check_lc(params: ChannelParams):
    if not 0.0 < params.rho < 1.0:
        raise SplitterDegenerate(
            f"the low-complexity detector needs 0 < rho < 1, got rho={params.rho}; "
            "use the cd detector at rho=1 and pd at rho=0"
        )
    if params.var_antenna <= 0:
        raise ValueError("the low-complexity detector needs var_antenna > 0")


def upsilon(y, candidate: ConstellationPoint, params: ChannelParams) -> float:
    _check_lc(params)
    x = candidate.value
    return upsilon_terms(
        np.real(y), np.imag(y), x.real, x.imag, candidate.magnitude,
        params.amplitude, params.var_antenna, params.var_conversion, params.rho,
    )


def upsilon_matrix(y, cons: Constellation, params: ChannelParams) -> np.ndarray:
    """Upsilon for every (sample, candidate) pair, shape ``y.shape + (M,)``."""
    _check_lc(params)
    y = np.asarray(y)[..., None]
    x = cons.values
    return upsilon_terms(
        y.real, y.imag, x.real, x.imag, cons.magnitudes,
        params.amplitude, params.var_antenna, params.var_conversion, params.rho,
    )


def cd_metrics(obs: SplitObservation, cons: Constellation, params: ChannelParams) -> np.ndarray:
    """Squared distance of ``y1`` to each scaled constellation point."""
    ref = math.sqrt(params.rho) * params.amplitude * cons.values
    y1 = np.asarray(obs.coherent)[..., None]
    return np.abs(y1 - ref) ** 2


def low_complexity_indices(obs: SplitObservation, cons: Constellation, params: ChannelParams):
    # np.argmin keeps the first minimum, which is the lowest-index tie-break
    return np.argmin(upsilon_matrix(detection_frame(obs, params), cons, params), axis=-1)


def cd_indices(obs: SplitObservation, cons: Constellation, params: ChannelParams):
    return np.argmin(cd_metrics(obs, cons, params), axis=-1)


def _verdict(metrics: np.ndarray, minimize: bool) -> DetectorVerdict:
    k = int(np.argmin(metrics) if minimize else np.argmax(metrics))
    return DetectorVerdict(k, tuple(float(m) for m in metrics))


def detect_low_complexity(obs: SplitObservation, cons: Constellation, params: ChannelParams):
    """Weighted minimum-distance decision on the collapsed sample."""
    y = detection_frame(obs, params)
    return _verdict(upsilon_matrix(y, cons, params), minimize=True)


def detect_cd(obs: SplitObservation, cons: Constellation, params: ChannelParams):
    """Nearest neighbour on the coherent branch only."""
    return _verdict(cd_metrics(obs, cons, params), minimize=True)
