"""Direct convolution on the PCU (or the binary CMAC) with CACC-style accumulation.

Tensor layouts: activations are ``(C, H, W)`` and weights ``(K, C, R, S)``.
Channels are cut into blocks of ``n`` (zero padded) and kernels into groups
of ``k`` (zero padded). One atom is a 1x1xn feature cube at some
``(output position, r, s, channel block)`` together with the matching
``k x n`` weight block. The feature cube is broadcast to all k cells, the
engine yields k partial sums, and the accumulator plane adds them into the
output map.

Atom order is: kernel group, then output position (row major), then r, s,
then channel block.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Iterator, Optional

import numpy as np

from .errors import ConfigurationError, RangeError, ValidationError
from .pe_array import ACC_DTYPE, PcuArray, PcuConfig, cmac_batch
from .tensorio import QuantTensor

__all__ = [
    "ConvShape",
    "Atom",
    "TransposedFeed",
    "AccumulatorPlane",
    "ConvResult",
    "atomize",
    "transpose_feed",
    "convolve",
    "reference_convolution",
    "atom_weight_matrix",
]

# bounds the (atoms x k x n) working set when stepping atoms together
_MAX_BATCH_ELEMS = 1 << 21


def _pair(v) -> tuple[int, int]:
    if isinstance(v, (tuple, list)):
        if len(v) != 2:
            raise ValidationError(f"expected a pair, got {v!r}")
        return int(v[0]), int(v[1])
    return int(v), int(v)


@dataclass(frozen=True)
class ConvShape:
    C: int
    H: int
    W: int
    K: int
    R: int
    S: int
    stride: tuple[int, int] = (1, 1)
    padding: tuple[int, int] = (0, 0)

    def __post_init__(self):
        object.__setattr__(self, "stride", _pair(self.stride))
        object.__setattr__(self, "padding", _pair(self.padding))
        for name in ("C", "H", "W", "K", "R", "S"):
            if getattr(self, name) < 1:
                raise ValidationError(f"{name} must be positive")
        if min(self.stride) < 1:
            raise ValidationError("stride must be positive")
        if min(self.padding) < 0:
            raise ValidationError("padding must be non-negative")
        if self.out_h < 1 or self.out_w < 1:
            raise ValidationError(f"kernel {self.R}x{self.S} does not fit padded input {self.H}x{self.W}")

    @property
    def out_h(self) -> int:
        return (self.H + 2 * self.padding[0] - self.R) // self.stride[0] + 1

    @property
    def out_w(self) -> int:
        return (self.W + 2 * self.padding[1] - self.S) // self.stride[1] + 1

    @property
    def weight_dims(self) -> tuple[int, int, int, int]:
        return (self.K, self.C, self.R, self.S)

    @property
    def activation_dims(self) -> tuple[int, int, int]:
        return (self.C, self.H, self.W)

    @classmethod
    def from_tensors(cls, weights, activations, stride=1, padding=0) -> "ConvShape":
        w = _as_array(weights)
        a = _as_array(activations)
        if w.ndim != 4 or a.ndim != 3:
            raise ValidationError(f"expected weights (K,C,R,S) and activations (C,H,W), got {w.shape} and {a.shape}")
        K, C, R, S = w.shape
        if a.shape[0] != C:
            raise ValidationError(f"weights have {C} channels, activations {a.shape[0]}")
        return cls(C, a.shape[1], a.shape[2], K, R, S, stride, padding)

    def check(self, weights, activations) -> tuple[np.ndarray, np.ndarray]:
        w = _as_array(weights)
        a = _as_array(activations)
        if w.shape != self.weight_dims:
            raise ValidationError(f"weights shape {w.shape} != {self.weight_dims}")
        if a.shape != self.activation_dims:
            raise ValidationError(f"activations shape {a.shape} != {self.activation_dims}")
        return w, a


def _as_array(t) -> np.ndarray:
    if isinstance(t, QuantTensor):
        return t.data
    return np.asarray(t, dtype=ACC_DTYPE)


def _ceil_div(a: int, b: int) -> int:
    return -(-a // b)


@dataclass
class Atom:
    group: int
    position: tuple[int, int]
    r: int
    s: int
    block: int
    features: np.ndarray
    weights: np.ndarray


@dataclass
class _Layout:
    """Padded operands and atom geometry shared by atomize and convolve."""

    shape: ConvShape
    k: int
    n: int
    act: np.ndarray  # (Cp, Hp, Wp), spatially and channel padded
    wgt: np.ndarray  # (G, R, S, B, k, n)

    @property
    def groups(self) -> int:
        return self.wgt.shape[0]

    @property
    def blocks(self) -> int:
        return self.wgt.shape[3]

    def features(self, oy: np.ndarray, ox: np.ndarray) -> np.ndarray:
        """Feature cubes for positions ``(oy, ox)`` as ``(P, R, S, B, n)``."""
        sh = self.shape
        rows = oy[:, None] * sh.stride[0] + np.arange(sh.R)[None, :]  # (P, R)
        cols = ox[:, None] * sh.stride[1] + np.arange(sh.S)[None, :]  # (P, S)
        patch = self.act[:, rows[:, :, None], cols[:, None, :]]  # (Cp, P, R, S)
        patch = patch.reshape(self.blocks, self.n, len(oy), sh.R, sh.S)
        return patch.transpose(2, 3, 4, 0, 1)


def _layout(shape: ConvShape, weights, activations, n: int, k: Optional[int]) -> _Layout:
    w, a = shape.check(weights, activations)
    if n < 1:
        raise ConfigurationError("n must be positive")
    k = shape.K if k is None else k
    if k < 1:
        raise ConfigurationError("k must be positive")
    B = _ceil_div(shape.C, n)
    G = _ceil_div(shape.K, k)
    py, px = shape.padding
    act = np.zeros((B * n, shape.H + 2 * py, shape.W + 2 * px), dtype=ACC_DTYPE)
    act[: shape.C, py : py + shape.H, px : px + shape.W] = a
    wp = np.zeros((G * k, B * n, shape.R, shape.S), dtype=ACC_DTYPE)
    wp[: shape.K, : shape.C] = w
    # (G*k, B*n, R, S) -> (G, k, B, n, R, S) -> (G, R, S, B, k, n)
    wgt = wp.reshape(G, k, B, n, shape.R, shape.S).transpose(0, 4, 5, 2, 1, 3)
    return _Layout(shape, k, n, act, np.ascontiguousarray(wgt))


def atom_weight_matrix(weights, n: int) -> np.ndarray:
    """Flatten ``(K, C, R, S)`` weights to ``K x (R*S*Cp)`` in atom order.

    Column block ``j`` of width n is the weight block of channel block
    ``j % B`` at ``(r, s) = divmod(j // B, S)``, so k x n tiles of this matrix
    are exactly the PCU weight blocks.
    """
    w = _as_array(weights)
    if w.ndim != 4:
        raise ValidationError(f"expected (K, C, R, S) weights, got {w.shape}")
    K, C, R, S = w.shape
    Cp = _ceil_div(C, n) * n
    wp = np.zeros((K, Cp, R, S), dtype=ACC_DTYPE)
    wp[:, :C] = w
    return wp.transpose(0, 2, 3, 1).reshape(K, R * S * Cp)


def atomize(shape: ConvShape, weights, activations, n: int, k: Optional[int] = None) -> Iterator[Atom]:
    """Yield atoms in the deterministic dataflow order.

    ``k`` defaults to ``shape.K`` (one kernel group).
    """
    lay = _layout(shape, weights, activations, n, k)
    for g in range(lay.groups):
        for oy in range(shape.out_h):
            for ox in range(shape.out_w):
                feats = lay.features(np.array([oy]), np.array([ox]))[0]
                for r in range(shape.R):
                    for s in range(shape.S):
                        for b in range(lay.blocks):
                            yield Atom(g, (oy, ox), r, s, b, feats[r, s, b].copy(), lay.wgt[g, r, s, b].copy())


@dataclass
class TransposedFeed:
    """A weight block plus the feature cube broadcast to each of its k cells."""

    weights: np.ndarray  # (k, n)
    features: np.ndarray  # (n,)

    @property
    def broadcast(self) -> np.ndarray:
        return np.broadcast_to(self.features, self.weights.shape)

    def elementwise(self) -> np.ndarray:
        """``W (.) F`` with F replicated per row; summing rows gives ``W x F^T``."""
        return self.weights * self.broadcast


def transpose_feed(weight_block, feature_block) -> TransposedFeed:
    w = np.asarray(weight_block, dtype=ACC_DTYPE)
    f = np.asarray(feature_block, dtype=ACC_DTYPE).reshape(-1)
    if w.ndim != 2 or w.shape[1] != f.shape[0]:
        raise ConfigurationError(f"weight block {w.shape} incompatible with feature block {f.shape}")
    return TransposedFeed(w, f)


class AccumulatorPlane:
    """CACC: wide K x H' x W' partial-sum storage."""

    def __init__(self, K: int, out_h: int, out_w: int):
        self.psums = np.zeros((K, out_h, out_w), dtype=ACC_DTYPE)
        self.atom_count = 0

    def accumulate(self, group: int, k: int, oy, ox, partial_sums) -> None:
        """Add the k partial sums of one or more atoms.

        ``oy``/``ox`` are scalars or arrays of length A, ``partial_sums`` is
        ``(k,)`` or ``(A, k)``. Rows beyond K (kernel padding) are dropped.
        """
        sums = np.atleast_2d(np.asarray(partial_sums, dtype=ACC_DTYPE))
        oy = np.broadcast_to(np.asarray(oy), sums.shape[:1])
        ox = np.broadcast_to(np.asarray(ox), sums.shape[:1])
        K = self.psums.shape[0]
        lo = group * k
        keep = min(k, K - lo)
        for j in range(keep):
            np.add.at(self.psums[lo + j], (oy, ox), sums[:, j])
        self.atom_count += sums.shape[0]


@dataclass
class ConvResult:
    output: QuantTensor
    engine: str
    atom_count: int
    total_compute_cycles: int
    total_cycles: int
    cycle_histogram: Counter = field(default_factory=Counter)
    magnitude_histogram: Counter = field(default_factory=Counter)


def convolve(shape: ConvShape, weights, activations, engine: str = "tub",
             cfg: Optional[PcuConfig] = None) -> ConvResult:
    """Run a direct convolution through the tub PCU or the binary CMAC.

    The output is the exact integer convolution at accumulator width.
    ``cycle_histogram`` maps per-atom compute cycles to atom counts, and
    ``magnitude_histogram`` maps the largest weight magnitude of each atom's
    k x n block to atom counts.
    """
    cfg = cfg or PcuConfig()
    if engine not in ("tub", "binary"):
        raise ValidationError(f"unknown engine {engine!r}")
    lay = _layout(shape, weights, activations, cfg.n, cfg.k)
    w = lay.wgt
    for arr, what in ((w, "weight"), (lay.act, "activation")):
        if arr.min() < cfg.precision.min_value or arr.max() > cfg.precision.max_value:
            raise RangeError(f"{what} tensor exceeds {cfg.precision.label} range")

    plane = AccumulatorPlane(shape.K, shape.out_h, shape.out_w)
    positions = np.array([(oy, ox) for oy in range(shape.out_h) for ox in range(shape.out_w)])
    per_pos = shape.R * shape.S * lay.blocks
    chunk = max(1, _MAX_BATCH_ELEMS // (per_pos * cfg.k * cfg.n))

    cycle_hist: Counter = Counter()
    mag_hist: Counter = Counter()
    compute_total = 0
    atoms = 0
    for g in range(lay.groups):
        block_mag = np.abs(w[g]).max(axis=(-2, -1))  # (R, S, B)
        for start in range(0, len(positions), chunk):
            pos = positions[start : start + chunk]
            feats = lay.features(pos[:, 0], pos[:, 1])  # (P, R, S, B, n)
            wb = np.broadcast_to(w[g], (len(pos),) + w[g].shape)
            if engine == "tub":
                pcu = PcuArray(wb, feats, cfg.precision)
                sums = pcu.run()  # (P, R, S, B, k)
                cycles = pcu.release_cycle
            else:
                sums = cmac_batch(wb, feats)
                cycles = np.ones(sums.shape[:-1], dtype=ACC_DTYPE)
            # CACC folds every (r, s, block) atom of a position into the plane
            flat = sums.reshape(len(pos), per_pos, cfg.k)
            plane.accumulate(g, cfg.k, np.repeat(pos[:, 0], per_pos), np.repeat(pos[:, 1], per_pos),
                             flat.reshape(-1, cfg.k))
            cycle_hist.update(cycles.reshape(-1).tolist())
            mag_hist.update(np.broadcast_to(block_mag, cycles.shape).reshape(-1).tolist())
            compute_total += int(cycles.sum())
            atoms += cycles.size

    return ConvResult(
        output=QuantTensor("int64", plane.psums),
        engine=engine,
        atom_count=atoms,
        total_compute_cycles=compute_total,
        total_cycles=compute_total + atoms * cfg.handshake_overhead_cycles,
        cycle_histogram=Counter(dict(sorted(cycle_hist.items()))),
        magnitude_histogram=Counter(dict(sorted(mag_hist.items()))),
    )


def reference_convolution(shape: ConvShape, weights, activations) -> np.ndarray:
    """Naive nested-loop convolution; test oracle only."""
    w, a = shape.check(weights, activations)
    w = w.tolist()
    a = a.tolist()
    sy, sx = shape.stride
    py, px = shape.padding
    out = [[[0] * shape.out_w for _ in range(shape.out_h)] for _ in range(shape.K)]
    for kk in range(shape.K):
        for oy in range(shape.out_h):
            for ox in range(shape.out_w):
                acc = 0
                for c in range(shape.C):
                    for r in range(shape.R):
                        y = oy * sy + r - py
                        if y < 0 or y >= shape.H:
                            continue
                        for s in range(shape.S):
                            x = ox * sx + s - px
                            if 0 <= x < shape.W:
                                acc += w[kk][c][r][s] * a[c][y][x]
                out[kk][oy][ox] = acc
    return np.array(out, dtype=ACC_DTYPE)
