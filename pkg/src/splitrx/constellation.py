"""Transmit alphabets: square M-QAM, M-PSK and multi-ring APSK.

Every constellation is normalized to unit average energy so that the
transmit power ``P`` of :class:`~splitrx.channel.ChannelParams` alone sets
the signal level.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import Enum
from functools import cached_property
from typing import Sequence

import numpy as np

from splitrx.errors import InvalidOrder

__all__ = [
    "Scheme",
    "ConstellationPoint",
    "Constellation",
    "make_qam",
    "make_psk",
    "make_apsk",
    "parse_constellation",
]


class Scheme(str, Enum):
    QAM = "QAM"
    PSK = "PSK"
    APSK = "APSK"


@dataclass(frozen=True)
class ConstellationPoint:
    """One symbol of the alphabet with its integer label."""

    index: int
    value: complex

    @property
    def magnitude(self) -> float:
        return abs(self.value)

    @property
    def phase(self) -> float:
        return math.atan2(self.value.imag, self.value.real)


@dataclass(frozen=True)
class Constellation:
    """Immutable ordered alphabet.

    ``ring_spec`` is only set for APSK and lists ``(points, radius)`` per ring
    after normalization.
    """

    scheme: Scheme
    points: tuple[ConstellationPoint, ...]
    ring_spec: tuple[tuple[int, float], ...] | None = None

    def __post_init__(self):
        labels = [p.index for p in self.points]
        if labels != list(range(len(self.points))):
            raise InvalidOrder("point indices must run 0..M-1 in order")
        if any(p.magnitude == 0.0 for p in self.points):
            raise InvalidOrder("constellation point at the origin has no phase")

    @property
    def order(self) -> int:
        return len(self.points)

    @property
    def label(self) -> str:
        if self.scheme is Scheme.APSK and self.ring_spec is not None:
            rings = "+".join(str(n) for n, _ in self.ring_spec)
            return f"{self.order}-APSK({rings})"
        return f"{self.order}-{self.scheme.value}"

    @cached_property
    def values(self) -> np.ndarray:
        arr = np.array([p.value for p in self.points], dtype=np.complex128)
        arr.flags.writeable = False
        return arr

    @cached_property
    def magnitudes(self) -> np.ndarray:
        arr = np.abs(self.values)
        arr.flags.writeable = False
        return arr

    @cached_property
    def phases(self) -> np.ndarray:
        arr = np.array([p.phase for p in self.points])
        arr.flags.writeable = False
        return arr

    @property
    def average_energy(self) -> float:
        return float(np.mean(np.abs(self.values) ** 2))

    @cached_property
    def magnitude_classes(self) -> tuple[np.ndarray, np.ndarray]:
        """Group symbols that share a magnitude.

        Returns ``(class_of_symbol, class_magnitude)``; classes are numbered
        in order of their lowest symbol index, so the first member of every
        class is also its lowest index.
        """
        reps: list[float] = []
        cls = np.empty(self.order, dtype=np.intp)
        for k, mag in enumerate(self.magnitudes):
            for c, r in enumerate(reps):
                if abs(mag - r) <= 1e-9 * r:
                    cls[k] = c
                    break
            else:
                cls[k] = len(reps)
                reps.append(float(mag))
        return cls, np.array(reps)

    def min_distance(self) -> float:
        d = np.abs(self.values[:, None] - self.values[None, :])
        d[np.diag_indices(self.order)] = np.inf
        return float(d.min())

    def to_dict(self) -> dict:
        out = {
            "scheme": self.scheme.value,
            "M": self.order,
            "points": [[p.value.real, p.value.imag] for p in self.points],
        }
        if self.ring_spec is not None:
            out["rings"] = [[n, r] for n, r in self.ring_spec]
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data: dict) -> "Constellation":
        pts = tuple(
            ConstellationPoint(k, complex(re, im)) for k, (re, im) in enumerate(data["points"])
        )
        if len(pts) != data["M"]:
            raise InvalidOrder(f"M={data['M']} but {len(pts)} points given")
        rings = data.get("rings")
        ring_spec = tuple((int(n), float(r)) for n, r in rings) if rings else None
        return cls(Scheme(data["scheme"]), pts, ring_spec)


def _normalized(scheme: Scheme, raw: np.ndarray, ring_spec=None) -> Constellation:
    scale = 1.0 / math.sqrt(float(np.mean(np.abs(raw) ** 2)))
    pts = tuple(ConstellationPoint(k, complex(v * scale)) for k, v in enumerate(raw))
    if ring_spec is not None:
        ring_spec = tuple((n, r * scale) for n, r in ring_spec)
    return Constellation(scheme, pts, ring_spec)


def make_qam(M: int) -> Constellation:
    """Square M-QAM on the odd-integer grid, row-major from the top-left.

    Symbol ``k`` sits at column ``k % L`` and row ``k // L`` with
    ``L = sqrt(M)``; rows run from the largest imaginary part downwards.
    """
    L = math.isqrt(M) if isinstance(M, int) and M > 0 else 0
    if L * L != M or M < 4 or L % 2:
        raise InvalidOrder(f"square QAM needs M = L*L with L even and M >= 4, got {M}")
    levels = np.arange(-(L - 1), L, 2, dtype=float)
    re = np.tile(levels, L)
    im = np.repeat(levels[::-1], L)
    return _normalized(Scheme.QAM, re + 1j * im)


def make_psk(M: int) -> Constellation:
    """Unit-circle PSK with a half-sector offset, ``exp(j(2 pi k + pi) / M)``."""
    if not isinstance(M, int) or M < 2:
        raise InvalidOrder(f"PSK needs M >= 2, got {M}")
    k = np.arange(M)
    raw = np.exp(1j * (2 * np.pi * k + np.pi) / M)
    # already unit energy; skip the rescale so magnitudes stay exactly 1
    pts = tuple(ConstellationPoint(int(i), complex(v)) for i, v in zip(k, raw))
    return Constellation(Scheme.PSK, pts)


def make_apsk(ring_points: Sequence[int], radius_mode: str = "uniform") -> Constellation:
    """Concentric-ring APSK.

    Parameters
    ----------
    ring_points : sequence of int
        Number of points on each ring, innermost first.
    radius_mode : {"uniform"}
        ``"uniform"`` places ring ``k`` (1-based) at radius ``k`` before
        normalization.

    Each ring is uniformly populated in phase with an offset of half its
    angular spacing.
    """
    rings = [int(n) for n in ring_points]
    if not rings:
        raise InvalidOrder("APSK needs at least one ring")
    if any(n < 1 for n in rings):
        raise InvalidOrder(f"every ring needs at least one point, got {rings}")
    if radius_mode != "uniform":
        raise ValueError(f"unknown radius_mode {radius_mode!r}")
    raw = []
    layout = []
    for k, n in enumerate(rings, start=1):
        j = np.arange(n)
        raw.append(k * np.exp(1j * (2 * np.pi * j + np.pi) / n))
        layout.append((n, float(k)))
    return _normalized(Scheme.APSK, np.concatenate(raw), tuple(layout))


def parse_constellation(text: str) -> Constellation:
    """Build a constellation from a short name.

    Accepted forms: ``qam64``, ``64qam``, ``qpsk``, ``psk8``, ``bpsk`` and
    ``apsk:6,8,8,10``.
    """
    s = text.strip().lower().replace("-", "").replace("_", "")
    if s.startswith("apsk:"):
        try:
            rings = [int(p) for p in s[5:].split(",") if p.strip()]
        except ValueError:
            raise InvalidOrder(f"bad APSK ring list in {text!r}") from None
        return make_apsk(rings)
    if s == "qpsk":
        return make_qam(4)
    if s == "bpsk":
        return make_psk(2)
    for name, factory in (("qam", make_qam), ("psk", make_psk)):
        if name in s:
            digits = s.replace(name, "")
            if digits.isdigit():
                return factory(int(digits))
    raise InvalidOrder(f"cannot parse constellation {text!r}")
