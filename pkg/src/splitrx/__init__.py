"""Detection for power-splitting receivers that combine a coherent and a power-detection branch."""

from splitrx.channel import ChannelParams, NoiseDraw, SplitObservation, draw_noise, transmit, transmit_raw
from splitrx.constellation import Constellation, ConstellationPoint, make_apsk, make_psk, make_qam
from splitrx.detect import detect_cd, detect_low_complexity, upsilon
from splitrx.errors import (
    ConfigError,
    DegenerateDensity,
    GainUndefined,
    InvalidOrder,
    SplitterDegenerate,
)
from splitrx.likelihood import QuadratureSpec, detect_ml_3d, detect_pd, likelihood_3d
from splitrx.montecarlo import SerEstimate, SweepConfig, estimate_ser, joint_gain, sweep_rho

__version__ = "0.1.0"

__all__ = [
    "ChannelParams",
    "NoiseDraw",
    "SplitObservation",
    "draw_noise",
    "transmit",
    "transmit_raw",
    "Constellation",
    "ConstellationPoint",
    "make_qam",
    "make_psk",
    "make_apsk",
    "detect_low_complexity",
    "detect_cd",
    "detect_ml_3d",
    "detect_pd",
    "upsilon",
    "likelihood_3d",
    "QuadratureSpec",
    "SerEstimate",
    "SweepConfig",
    "estimate_ser",
    "sweep_rho",
    "joint_gain",
    "ConfigError",
    "DegenerateDensity",
    "GainUndefined",
    "InvalidOrder",
    "SplitterDegenerate",
    "__version__",
]
