"""Synthetic quantized tensors with controllable magnitude and sparsity structure.

All randomness comes from ``numpy.random.Generator(PCG64(seed))``, so a
``(generator, seed, parameters)`` triple fully determines the tensor.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .arith import Precision
from .errors import ValidationError
from .tensorio import QuantTensor

__all__ = ["make_rng", "uniform", "clustered", "sparse", "tile_max", "DISTRIBUTIONS"]

DISTRIBUTIONS = ("uniform", "clustered", "sparse", "tile-max")


def make_rng(seed: int) -> np.random.Generator:
    if seed < 0:
        raise ValidationError("seed must be non-negative")
    return np.random.Generator(np.random.PCG64(seed))


def _nonzero(rng: np.random.Generator, size: int, bound: int, p: Precision) -> np.ndarray:
    """Uniform non-zero values in ``[-bound, bound]`` clipped to the precision."""
    lo = max(-bound, p.min_value)
    hi = min(bound, p.max_value)
    choices = np.array([v for v in range(lo, hi + 1) if v != 0], dtype=np.int64)
    if choices.size == 0:
        raise ValidationError(f"no non-zero values within magnitude {bound}")
    return rng.choice(choices, size=size)


def uniform(dims: Sequence[int], precision="int8", seed: int = 0) -> QuantTensor:
    p = Precision.parse(precision)
    rng = make_rng(seed)
    return QuantTensor(p, rng.integers(p.min_value, p.max_value, size=tuple(dims), endpoint=True))


def clustered(dims: Sequence[int], magnitude: int, spread: float = 4.0, precision="int8",
              seed: int = 0) -> QuantTensor:
    """Magnitudes ~ Normal(magnitude, spread) rounded and clipped, with random signs."""
    p = Precision.parse(precision)
    if not 0 <= magnitude <= p.max_magnitude:
        raise ValidationError(f"magnitude {magnitude} outside {p.label} domain")
    rng = make_rng(seed)
    mags = np.clip(np.rint(rng.normal(magnitude, spread, size=tuple(dims))), 0, p.max_magnitude).astype(np.int64)
    signs = np.where(rng.random(size=mags.shape) < 0.5, -1, 1)
    vals = mags * signs
    # only the negative end can reach max_magnitude
    vals = np.where(vals == p.max_magnitude, p.min_value, vals)
    return QuantTensor(p, vals)


def sparse(dims: Sequence[int], rate: float, precision="int8", seed: int = 0) -> QuantTensor:
    """Exactly ``round(rate * size)`` zeros at random positions, other values uniform non-zero."""
    p = Precision.parse(precision)
    if not 0.0 <= rate <= 1.0:
        raise ValidationError("sparsity rate must be within [0, 1]")
    rng = make_rng(seed)
    size = int(np.prod(dims))
    n_zero = int(round(rate * size))
    vals = _nonzero(rng, size, p.max_magnitude, p)
    vals[rng.permutation(size)[:n_zero]] = 0
    return QuantTensor(p, vals.reshape(tuple(dims)))


def tile_max(dims: Sequence[int], maxima: Sequence[int], zeros_per_tile: int = 0, tile_k: int = 16,
             tile_n: int = 16, precision="int8", seed: int = 0) -> QuantTensor:
    """2-D tensor whose k x n tiles have engineered maxima and zero counts.

    Tiles (row-major) receive the magnitudes in ``maxima`` in equal shares,
    in a shuffled order. Each tile holds exactly one element of that
    magnitude, exactly ``zeros_per_tile`` zeros, and non-zero values of
    smaller-or-equal magnitude everywhere else.
    """
    p = Precision.parse(precision)
    if len(dims) != 2:
        raise ValidationError("tile-max tensors are 2-D (rows x cols)")
    rows, cols = dims
    if rows % tile_k or cols % tile_n:
        raise ValidationError(f"dims {tuple(dims)} are not a multiple of the {tile_k}x{tile_n} tile")
    maxima = [int(m) for m in maxima]
    if not maxima:
        raise ValidationError("at least one tile maximum is required")
    cap = tile_k * tile_n
    if not 0 <= zeros_per_tile <= cap - 1:
        raise ValidationError(f"zeros_per_tile must be within [0, {cap - 1}]")
    for m in maxima:
        if not 1 <= m <= p.max_magnitude:
            raise ValidationError(f"tile maximum {m} outside {p.label} domain [1, {p.max_magnitude}]")

    n_tiles = (rows // tile_k) * (cols // tile_n)
    if n_tiles % len(maxima):
        raise ValidationError(f"{n_tiles} tiles cannot be split equally over {len(maxima)} maxima")
    rng = make_rng(seed)
    assignment = rng.permutation(np.repeat(maxima, n_tiles // len(maxima)))

    tiles = np.empty((n_tiles, cap), dtype=np.int64)
    for t, m in enumerate(assignment):
        tile = _nonzero(rng, cap, max(int(m) - 1, 1), p)
        slots = rng.permutation(cap)
        peak = slots[0]
        tile[peak] = -m if m > p.max_value or rng.random() < 0.5 else m
        tile[slots[1 : 1 + zeros_per_tile]] = 0
        tiles[t] = tile
    tr, tc = rows // tile_k, cols // tile_n
    data = tiles.reshape(tr, tc, tile_k, tile_n).transpose(0, 2, 1, 3).reshape(rows, cols)
    return QuantTensor(p, data)
