"""2s-unary temporal encoding and the tub (temporal-unary-binary) multiplier.

A weight is streamed as a train of pulses. Every pulse is worth 2, except
that an odd magnitude ends with a pulse worth 1, so a magnitude ``m`` costs
``ceil(m / 2)`` cycles. The sign travels alongside the stream and is applied
to the addend on every pulse. The other operand stays binary and is added
into the accumulator once per pulse.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

from .errors import RangeError

__all__ = [
    "Precision",
    "PulseStream",
    "TubProduct",
    "TubMultiplier",
    "encode_2s_unary",
    "decode",
    "tub_multiply",
    "worst_case_cycles",
    "unary_worst_case_cycles",
    "pulse_cycles",
]


class Precision(enum.IntEnum):
    """Signed integer precision; the enum value is the bit width."""

    INT2 = 2
    INT4 = 4
    INT8 = 8

    @property
    def bits(self) -> int:
        return int(self)

    @property
    def min_value(self) -> int:
        return -(1 << (self.bits - 1))

    @property
    def max_value(self) -> int:
        return (1 << (self.bits - 1)) - 1

    @property
    def max_magnitude(self) -> int:
        """Largest encodable magnitude, reached only by the most negative value."""
        return 1 << (self.bits - 1)

    @property
    def max_pulses(self) -> int:
        return 1 << (self.bits - 2)

    @property
    def label(self) -> str:
        return f"int{self.bits}"

    @classmethod
    def parse(cls, value: "Precision | int | str") -> "Precision":
        """Accept ``Precision.INT8``, ``8``, ``"int8"`` or ``"INT8"``."""
        if isinstance(value, Precision):
            return value
        if isinstance(value, str):
            text = value.strip().lower()
            if text.startswith("int"):
                text = text[3:]
            try:
                value = int(text)
            except ValueError:
                raise ValueError(f"unknown precision {value!r}") from None
        try:
            return cls(value)
        except ValueError:
            raise ValueError(f"unsupported precision {value!r}; expected int2, int4 or int8") from None

    def contains(self, value: int) -> bool:
        return self.min_value <= value <= self.max_value

    def check(self, value: int) -> int:
        if not self.contains(value):
            raise RangeError(
                f"{value} outside {self.label} range [{self.min_value}, {self.max_value}]"
            )
        return value


def pulse_cycles(magnitude: int) -> int:
    """Pulses needed for a magnitude under 2s-unary encoding."""
    return (abs(magnitude) + 1) // 2


@dataclass(frozen=True)
class PulseStream:
    pulse_count: int
    last_pulse_weight: int = 2
    sign: int = 1

    def __post_init__(self):
        if self.pulse_count < 0:
            raise ValueError("pulse_count must be non-negative")
        if self.last_pulse_weight not in (1, 2):
            raise ValueError("last_pulse_weight must be 1 or 2")
        if self.sign not in (1, -1):
            raise ValueError("sign must be +1 or -1")

    @property
    def magnitude(self) -> int:
        if self.pulse_count == 0:
            return 0
        return 2 * (self.pulse_count - 1) + self.last_pulse_weight

    def pulse_weight(self, cycle: int) -> int:
        """Value carried by pulse ``cycle`` (0-based); 0 once the stream is exhausted."""
        if cycle >= self.pulse_count:
            return 0
        if cycle == self.pulse_count - 1:
            return self.last_pulse_weight
        return 2

    def pulses(self):
        """Yield the unsigned weight of each pulse in emission order."""
        for t in range(self.pulse_count):
            yield self.pulse_weight(t)


@dataclass(frozen=True)
class TubProduct:
    value: int
    cycles: int


def encode_2s_unary(value: int, precision: Precision | int | str = Precision.INT8) -> PulseStream:
    """Encode a signed integer as a 2s-unary pulse stream.

    The most negative value of a precision (e.g. -128 for int8) is accepted,
    its magnitude 2**(w-1) takes exactly 2**(w-2) pulses.

    >>> encode_2s_unary(7, "int4")
    PulseStream(pulse_count=4, last_pulse_weight=1, sign=1)
    """
    p = Precision.parse(precision)
    p.check(value)
    magnitude = abs(value)
    return PulseStream(
        pulse_count=pulse_cycles(magnitude),
        last_pulse_weight=1 if magnitude % 2 else 2,
        sign=-1 if value < 0 else 1,
    )


def decode(stream: PulseStream) -> int:
    return stream.sign * stream.magnitude


class TubMultiplier:
    """Cycle-stepped tub multiplier.

    Each call to :meth:`step` consumes one pulse of the stream and adds
    ``sign * pulse_weight * binary_operand`` into the accumulator.
    ``accumulator_writes`` counts how many times the accumulator was touched;
    a silent (zero) stream never touches it.
    """

    def __init__(self, binary_operand: int, stream: PulseStream):
        self.binary_operand = int(binary_operand)
        self.stream = stream
        self.cycle = 0
        self.accumulator = 0
        self.accumulator_writes = 0

    @property
    def done(self) -> bool:
        return self.cycle >= self.stream.pulse_count

    def step(self) -> int:
        """Advance one cycle and return the addend applied (0 when idle)."""
        if self.done:
            return 0
        addend = self.stream.sign * self.stream.pulse_weight(self.cycle) * self.binary_operand
        self.accumulator += addend
        self.accumulator_writes += 1
        self.cycle += 1
        return addend

    def run(self) -> TubProduct:
        while not self.done:
            self.step()
        return TubProduct(self.accumulator, self.cycle)


def tub_multiply(binary_operand: int, stream: PulseStream) -> TubProduct:
    return TubMultiplier(binary_operand, stream).run()


def worst_case_cycles(precision: Precision | int | str, common_dim: int = 1) -> int:
    """Worst-case 2s-unary latency ``N * 2**(w-2)`` for a GEMM of common dimension N."""
    if common_dim < 1:
        raise ValueError("common dimension must be >= 1")
    return common_dim * Precision.parse(precision).max_pulses


def unary_worst_case_cycles(precision: Precision | int | str, common_dim: int = 1) -> int:
    """Plain (1s) unary worst case ``N * (2**(w-1))**2``, kept for comparison only."""
    if common_dim < 1:
        raise ValueError("common dimension must be >= 1")
    return common_dim * Precision.parse(precision).max_magnitude ** 2
