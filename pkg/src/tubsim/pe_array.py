"""Cycle-level model of the tub PE cell unit (PCU) and the binary CMAC baseline.

A PCU holds ``k`` PE cells of ``n`` tub multipliers each. One 1x1xn feature
cube is broadcast to every cell while each cell caches its own 1x1xn weight
cube. All multipliers advance on a shared cycle counter; a multiplier whose
stream has ended (or whose weight is zero) idles with its clock gated. The
per-cell adder tree folds the n addends into a running partial sum, and the
k sums are latched into the output registers together once the slowest
multiplier finishes.

:class:`PcuArray` carries an optional leading batch axis so that a whole
convolution's worth of independent atoms can be stepped in lockstep. Each
batch entry still has its own cycle budget and release point; stepping them
together is only a vectorisation of independent state machines.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .arith import Precision
from .errors import ConfigurationError, RangeError

__all__ = [
    "PcuConfig",
    "PcuResult",
    "TraceCycle",
    "PcuArray",
    "cell_compute",
    "pcu_compute",
    "cmac_compute",
    "cmac_batch",
    "step_trace",
    "validate_cube",
]

ACC_DTYPE = np.int64


@dataclass(frozen=True)
class PcuConfig:
    k: int = 16
    n: int = 16
    precision: Precision = Precision.INT8
    handshake_overhead_cycles: int = 2
    clock_period_ns: float = 4.0

    def __post_init__(self):
        object.__setattr__(self, "precision", Precision.parse(self.precision))
        if self.k < 1 or self.n < 1:
            raise ConfigurationError(f"array geometry must be positive, got {self.k}x{self.n}")
        if self.handshake_overhead_cycles < 0:
            raise ConfigurationError("handshake_overhead_cycles must be non-negative")
        if not self.clock_period_ns > 0:
            raise ConfigurationError("clock_period_ns must be positive")

    @property
    def size(self) -> int:
        return self.k * self.n


@dataclass
class PcuResult:
    partial_sums: np.ndarray
    compute_cycles: int
    total_cycles: int
    active_pe_count: int
    silent_pe_count: int = 0


@dataclass
class TraceCycle:
    """State of the PCU at the end of one compute cycle.

    ``accumulators`` are the adder-tree running sums inside each cell;
    ``registers`` holds the released output registers and stays ``None``
    until the final cycle.
    """

    cycle: int
    active: np.ndarray
    addends: np.ndarray
    accumulators: np.ndarray
    registers: Optional[np.ndarray] = None


def validate_cube(values, n: int, precision: Precision, what: str = "cube") -> np.ndarray:
    arr = np.asarray(values, dtype=ACC_DTYPE)
    if arr.shape[-1:] != (n,):
        raise ConfigurationError(f"{what} has trailing length {arr.shape[-1:] or 'scalar'}, expected {n}")
    if arr.size and (arr.min() < precision.min_value or arr.max() > precision.max_value):
        bad = arr[(arr < precision.min_value) | (arr > precision.max_value)].flat[0]
        raise RangeError(f"{what} element {bad} outside {precision.label} range")
    return arr


class PcuArray:
    """Tub PE array state machine.

    ``weights`` has shape ``(..., k, n)`` and ``features`` shape ``(..., n)``
    with matching leading (batch) axes. Call :meth:`step` until
    :attr:`done`, or :meth:`run` to drive it to completion.
    """

    def __init__(self, weights, features, precision: Precision | str = Precision.INT8):
        self.precision = Precision.parse(precision)
        w = np.asarray(weights, dtype=ACC_DTYPE)
        if w.ndim < 2:
            raise ConfigurationError("weights must have shape (..., k, n)")
        self.k, self.n = w.shape[-2:]
        w = validate_cube(w, self.n, self.precision, "weight cube")
        f = validate_cube(features, self.n, self.precision, "feature cube")
        if f.shape[:-1] != w.shape[:-2]:
            raise ConfigurationError(
                f"feature batch shape {f.shape[:-1]} does not match weight batch shape {w.shape[:-2]}"
            )
        self.batch_shape = w.shape[:-2]

        magnitude = np.abs(w)
        self.pulse_count = (magnitude + 1) // 2
        self.last_weight = np.where(magnitude % 2 == 1, 1, 2).astype(ACC_DTYPE)
        self.sign = np.where(w < 0, -1, 1).astype(ACC_DTYPE)
        # broadcast the shared feature cube to every cell
        self.features = f[..., np.newaxis, :]
        self.cycles_needed = self.pulse_count.max(axis=(-2, -1), initial=0)
        self.active_pe_count = np.count_nonzero(w, axis=(-2, -1))

        self.cycle = 0
        self.accumulators = np.zeros(self.batch_shape + (self.k,), dtype=ACC_DTYPE)
        self.active_cycles = np.zeros_like(self.pulse_count)
        self.registers = np.zeros(self.batch_shape + (self.k,), dtype=ACC_DTYPE)
        self.released = np.zeros(self.batch_shape, dtype=bool)
        self.release_cycle = np.zeros(self.batch_shape, dtype=ACC_DTYPE)
        self._release_ready()

    @property
    def done(self) -> bool:
        return bool(self.released.all())

    def _release_ready(self):
        ready = (~self.released) & (self.cycle >= self.cycles_needed)
        if ready.any():
            self.registers[ready] = self.accumulators[ready]
            self.release_cycle[ready] = self.cycle
            self.released |= ready

    def pulse_weights(self, cycle: int) -> np.ndarray:
        """Unsigned pulse value each multiplier emits on ``cycle`` (0 when idle)."""
        pc = self.pulse_count
        return np.where(cycle < pc - 1, 2, np.where(cycle == pc - 1, self.last_weight, 0))

    def step(self):
        """Advance one cycle. Returns ``(active_mask, addends)``."""
        pw = self.pulse_weights(self.cycle)
        active = pw != 0
        addends = self.sign * pw * self.features
        self.accumulators += addends.sum(axis=-1)
        self.active_cycles += active
        self.cycle += 1
        self._release_ready()
        return active, addends

    def run(self):
        while not self.done:
            self.step()
        return self.registers


def _block(weight_cubes, cfg: PcuConfig) -> np.ndarray:
    w = np.asarray(weight_cubes, dtype=ACC_DTYPE)
    if w.ndim != 2 or w.shape[0] != cfg.k:
        raise ConfigurationError(f"expected {cfg.k} weight cubes, got shape {w.shape}")
    if w.shape[1] != cfg.n:
        raise ConfigurationError(f"weight cubes have length {w.shape[1]}, expected {cfg.n}")
    return w


def cell_compute(weights: Sequence[int], features: Sequence[int],
                 precision: Precision | str = Precision.INT8,
                 n: Optional[int] = None) -> tuple[int, int, int]:
    """Run one PE cell and return ``(partial_sum, cycles, silent_count)``."""
    w = np.asarray(weights, dtype=ACC_DTYPE)
    f = np.asarray(features, dtype=ACC_DTYPE)
    n = len(w) if n is None else n
    if w.shape != (n,) or f.shape != (n,):
        raise ConfigurationError(f"cube lengths {w.shape}/{f.shape} do not match n={n}")
    cell = PcuArray(w[np.newaxis, :], f, precision)
    sums = cell.run()
    return int(sums[0]), int(cell.cycle), int(n - cell.active_pe_count)


def pcu_compute(weight_cubes, features, cfg: PcuConfig) -> PcuResult:
    w = _block(weight_cubes, cfg)
    pcu = PcuArray(w, features, cfg.precision)
    sums = pcu.run()
    cycles = int(pcu.cycle)
    active = int(pcu.active_pe_count)
    return PcuResult(
        partial_sums=sums.copy(),
        compute_cycles=cycles,
        total_cycles=cycles + cfg.handshake_overhead_cycles,
        active_pe_count=active,
        silent_pe_count=cfg.size - active,
    )


def cmac_batch(weights, features) -> np.ndarray:
    """One-cycle binary dot products: ``(..., k, n)`` x ``(..., n)`` -> ``(..., k)``."""
    w = np.asarray(weights, dtype=ACC_DTYPE)
    f = np.asarray(features, dtype=ACC_DTYPE)
    return np.einsum("...kn,...n->...k", w, f)


def cmac_compute(weight_cubes, features, cfg: PcuConfig) -> PcuResult:
    """Binary baseline: k partial sums from k parallel dot products in one cycle."""
    w = validate_cube(_block(weight_cubes, cfg), cfg.n, cfg.precision, "weight cube")
    f = validate_cube(features, cfg.n, cfg.precision, "feature cube")
    if f.shape != (cfg.n,):
        raise ConfigurationError(f"feature cube shape {f.shape}, expected ({cfg.n},)")
    active = int(np.count_nonzero(w))
    return PcuResult(
        partial_sums=cmac_batch(w, f),
        compute_cycles=1,
        total_cycles=1 + cfg.handshake_overhead_cycles,
        active_pe_count=active,
        silent_pe_count=cfg.size - active,
    )


def step_trace(weight_cubes, features, cfg: PcuConfig) -> list[TraceCycle]:
    """Per-cycle trace of one PCU invocation (empty for an all-zero block)."""
    pcu = PcuArray(_block(weight_cubes, cfg), features, cfg.precision)
    trace = []
    while not pcu.done:
        active, addends = pcu.step()
        trace.append(TraceCycle(
            cycle=pcu.cycle - 1,
            active=active.copy(),
            addends=addends.copy(),
            accumulators=pcu.accumulators.copy(),
            registers=pcu.registers.copy() if pcu.done else None,
        ))
    return trace
