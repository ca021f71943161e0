"""Multiplication counting for the detection metrics.

:class:`CountingScalar` wraps a float and records every multiplication and
division applied to it in a shared :class:`OpTally`. Running straight-line
metric code on counting scalars gives an exact per-evaluation cost.

The comparison baseline is a cost-model stub of a closed-form likelihood
costing about 300 multiplications plus one exponential, where the
exponential is charged as binary exponentiation (at most ``2 log2(n)``
multiplications).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from splitrx.channel import ChannelParams
from splitrx.constellation import Constellation
from splitrx.detect import upsilon_terms

__all__ = [
    "OpTally",
    "CountingScalar",
    "count_multiplications",
    "reference_pdf_stub",
    "count_reference_multiplications",
    "complexity_report",
]

STUB_MULTIPLICATIONS = 300


@dataclass
class OpTally:
    mul: int = 0
    div: int = 0
    add: int = 0

    @property
    def multiplications(self) -> int:
        """Multiplications and divisions together."""
        return self.mul + self.div


@dataclass
class CountingScalar:
    value: float
    tally: OpTally = field(repr=False)

    def _wrap(self, v: float) -> "CountingScalar":
        return CountingScalar(v, self.tally)

    @staticmethod
    def _raw(other):
        return other.value if isinstance(other, CountingScalar) else other

    def __add__(self, other):
        self.tally.add += 1
        return self._wrap(self.value + self._raw(other))

    __radd__ = __add__

    def __sub__(self, other):
        self.tally.add += 1
        return self._wrap(self.value - self._raw(other))

    def __rsub__(self, other):
        self.tally.add += 1
        return self._wrap(self._raw(other) - self.value)

    def __neg__(self):
        return self._wrap(-self.value)

    def __mul__(self, other):
        self.tally.mul += 1
        return self._wrap(self.value * self._raw(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        self.tally.div += 1
        return self._wrap(self.value / self._raw(other))

    def __rtruediv__(self, other):
        self.tally.div += 1
        return self._wrap(self._raw(other) / self.value)

    def __pow__(self, n):
        n = self._raw(n)
        if not (isinstance(n, int) and n >= 1):
            raise TypeError("only positive integer powers are counted")
        # square-and-multiply
        self.tally.mul += (n.bit_length() - 1) + (bin(n).count("1") - 1)
        return self._wrap(self.value**n)

    def __float__(self):
        return float(self.value)


def count_multiplications(cons: Constellation, params: ChannelParams,
                          y: complex | None = None, candidate: int = 0) -> int:
    """Multiplications and divisions in one upsilon evaluation for one candidate."""
    x = cons.points[candidate]
    if y is None:
        y = params.amplitude * x.value * (1.05 + 0.02j)
    tally = OpTally()

    def c(v):
        return CountingScalar(float(v), tally)

    upsilon_terms(
        c(y.real), c(y.imag), c(x.value.real), c(x.value.imag), c(x.magnitude),
        c(params.amplitude), c(params.var_antenna), c(params.var_conversion), c(params.rho),
    )
    return tally.multiplications


def _exp_by_squaring(base: CountingScalar, n: int) -> CountingScalar:
    result = None
    while n:
        if n & 1:
            result = base if result is None else result * base
        n >>= 1
        if n:
            base = base * base
    return result


def reference_pdf_stub(arg: float, tally: OpTally, exponent: int = 2) -> CountingScalar:
    """Cost model of a closed-form likelihood evaluation.

    Performs ``STUB_MULTIPLICATIONS`` counted multiplications for the
    algebraic part and one exponential ``e ** exponent`` by binary
    exponentiation. The numerical value is meaningless; only the tally is.
    """
    acc = CountingScalar(1.0, tally)
    step = CountingScalar(1.0 + 1e-12 * arg, tally)
    for _ in range(STUB_MULTIPLICATIONS):
        acc = acc * step
    e = _exp_by_squaring(CountingScalar(math.e, tally), max(int(exponent), 1))
    return acc + e


def count_reference_multiplications(exponent: int = 2) -> int:
    tally = OpTally()
    reference_pdf_stub(1.0, tally, exponent)
    return tally.multiplications


def complexity_report(cons: Constellation, params: ChannelParams, exponent: int = 2) -> dict:
    """Per-candidate cost of upsilon against the cost-model stub."""
    ups = count_multiplications(cons, params)
    ref = count_reference_multiplications(exponent)
    return {
        "constellation": cons.label,
        "upsilon_multiplications": ups,
        "reference_multiplications": ref,
        "ratio": ref / ups,
        "per_symbol_upsilon": ups * cons.order,
        "per_symbol_reference": ref * cons.order,
    }
