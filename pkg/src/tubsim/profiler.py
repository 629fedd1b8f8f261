"""Weight profiling: k x n max-pool tiling, latency histograms and silent-PE counts.

A weight tensor is flattened to a 2-D matrix (kernels x receptive field)
and cut into ``tile_k x tile_n`` tiles, the footprint of one PE array. The
largest magnitude in a tile sets the array's compute latency
(``ceil(max / 2)`` cycles under 2s-unary encoding) and its zeros are the
silent multipliers. Ragged edges are zero padded; padding never counts as
a weight for sparsity purposes.
"""

from __future__ import annotations

import csv
import io
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Sequence, Union

import numpy as np

from .arith import Precision, pulse_cycles
from .dataflow import ConvShape, atom_weight_matrix, convolve
from .errors import TextFormatError, ValidationError
from .pe_array import PcuConfig
from .tensorio import QuantTensor

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib
import tomli_w

__all__ = [
    "TileStats",
    "LatencyProfile",
    "CrossCheckReport",
    "weight_matrix",
    "tile_weights",
    "tile_layers",
    "build_profile",
    "profile_to_text",
    "profile_from_text",
    "profile_to_csv",
    "save_profile",
    "load_profile",
    "cross_check_profile_against_sim",
]

LAYOUTS = ("kcrs", "atom")


@dataclass(frozen=True)
class TileStats:
    tile_index: tuple[int, int]
    max_magnitude: int
    zero_count: int
    valid_count: int
    tile_shape: tuple[int, int]

    @property
    def capacity(self) -> int:
        return self.tile_shape[0] * self.tile_shape[1]

    @property
    def cycles(self) -> int:
        return pulse_cycles(self.max_magnitude)

    @property
    def ragged(self) -> bool:
        return self.valid_count < self.capacity


def weight_matrix(weights, layout: str = "kcrs", tile_n: int = 16) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(matrix, valid_mask)`` for a weight tensor.

    ``"kcrs"`` reshapes to ``dims[0] x prod(dims[1:])`` in storage order.
    ``"atom"`` needs ``(K, C, R, S)`` weights and orders columns the way the
    PCU consumes them (r, s, then channel blocks of ``tile_n``), so each tile
    is exactly one atom's weight block.
    """
    data = weights.data if isinstance(weights, QuantTensor) else np.asarray(weights, dtype=np.int64)
    if data.size == 0:
        raise ValidationError("cannot profile an empty tensor")
    if layout not in LAYOUTS:
        raise ValidationError(f"unknown layout {layout!r}; expected one of {LAYOUTS}")
    if layout == "atom":
        if data.ndim != 4:
            raise ValidationError("atom layout needs (K, C, R, S) weights")
        mat = atom_weight_matrix(data, tile_n)
        mask = atom_weight_matrix(np.ones_like(data), tile_n).astype(bool)
        return mat, mask
    mat = data.reshape(1, -1) if data.ndim == 1 else data.reshape(data.shape[0], -1)
    return mat, np.ones(mat.shape, dtype=bool)


def _tile_matrix(mat: np.ndarray, mask: np.ndarray, tile_k: int, tile_n: int,
                 row_offset: int = 0) -> list[TileStats]:
    rows, cols = mat.shape
    tr, tc = -(-rows // tile_k), -(-cols // tile_n)
    pm = np.zeros((tr * tile_k, tc * tile_n), dtype=np.int64)
    pv = np.zeros(pm.shape, dtype=bool)
    pm[:rows, :cols] = mat
    pv[:rows, :cols] = mask
    # (tr, tile_k, tc, tile_n) -> (tr, tc, tile_k * tile_n)
    tiles = pm.reshape(tr, tile_k, tc, tile_n).transpose(0, 2, 1, 3).reshape(tr, tc, -1)
    valid = pv.reshape(tr, tile_k, tc, tile_n).transpose(0, 2, 1, 3).reshape(tr, tc, -1)
    max_mag = np.abs(tiles).max(axis=-1)
    zeros = ((tiles == 0) & valid).sum(axis=-1)
    nvalid = valid.sum(axis=-1)
    return [
        TileStats((row_offset + i, j), int(max_mag[i, j]), int(zeros[i, j]), int(nvalid[i, j]), (tile_k, tile_n))
        for i in range(tr)
        for j in range(tc)
    ]


def tile_weights(weights, tile_k: int = 16, tile_n: int = 16, layout: str = "kcrs") -> list[TileStats]:
    """Max-pool a weight tensor over ``tile_k x tile_n`` tiles, row-major tile order."""
    if tile_k < 1 or tile_n < 1:
        raise ValidationError("tile dims must be positive")
    mat, mask = weight_matrix(weights, layout, tile_n)
    return _tile_matrix(mat, mask, tile_k, tile_n)


def tile_layers(layers: Sequence, tile_k: int = 16, tile_n: int = 16, layout: str = "kcrs",
                concat: bool = False) -> list[TileStats]:
    """Tile several layers.

    By default every layer is tiled on its own and the stats are chained.
    With ``concat=True`` the flattened layers are stacked vertically (zero
    padded to a common width) and tiled as one matrix, so tiles may span
    layer boundaries.
    """
    if not layers:
        raise ValidationError("no layers to profile")
    mats = [weight_matrix(t, layout, tile_n) for t in layers]
    if concat:
        width = max(m.shape[1] for m, _ in mats)
        mat = np.vstack([np.pad(m, ((0, 0), (0, width - m.shape[1]))) for m, _ in mats])
        mask = np.vstack([np.pad(v, ((0, 0), (0, width - v.shape[1]))) for _, v in mats])
        return _tile_matrix(mat, mask, tile_k, tile_n)
    stats: list[TileStats] = []
    offset = 0
    for mat, mask in mats:
        part = _tile_matrix(mat, mask, tile_k, tile_n, offset)
        offset = part[-1].tile_index[0] + 1
        stats.extend(part)
    return stats


@dataclass
class LatencyProfile:
    precision: Precision
    tile_k: int
    tile_n: int
    histogram: dict[int, int]
    tile_count: int
    total_weights: int
    zero_weights: int
    average_cycles: float
    average_silent_pes: float
    word_sparsity_percent: float
    include_ragged: bool = False
    silent_pe_tiles: int = 0

    @property
    def cycle_histogram(self) -> dict[int, int]:
        out: Counter = Counter()
        for mag, freq in self.histogram.items():
            if freq:
                out[pulse_cycles(mag)] += freq
        return dict(sorted(out.items()))

    @property
    def worst_case_cycles(self) -> int:
        return self.precision.max_pulses


def build_profile(stats: Iterable[TileStats], precision: Precision | str = Precision.INT8,
                  include_ragged: bool = False) -> LatencyProfile:
    """Aggregate tile statistics into a latency/sparsity profile.

    ``average_cycles`` is the area under the magnitude histogram (with each
    magnitude converted to its 2s-unary cycle count) divided by the number of
    tiles. Ragged edge tiles are left out of ``average_silent_pes`` unless
    ``include_ragged`` is set, in which case their padding slots count as
    silent. If every tile is ragged they are all used.
    """
    stats = list(stats)
    if not stats:
        raise ValidationError("cannot build a profile from zero tiles")
    p = Precision.parse(precision)
    shapes = {s.tile_shape for s in stats}
    if len(shapes) != 1:
        raise ValidationError(f"mixed tile shapes {sorted(shapes)}")
    tile_k, tile_n = shapes.pop()
    if any(s.max_magnitude > p.max_magnitude for s in stats):
        raise ValidationError(f"tile magnitude exceeds {p.label} domain")

    hist = {m: 0 for m in range(p.max_magnitude + 1)}
    for s in stats:
        hist[s.max_magnitude] += 1
    tiles = sum(hist.values())
    average_cycles = sum(pulse_cycles(m) * f for m, f in hist.items()) / tiles

    silent_pool = stats if include_ragged else [s for s in stats if not s.ragged]
    if not silent_pool:
        silent_pool = stats
    silent = [s.zero_count + (s.capacity - s.valid_count) for s in silent_pool]
    total = sum(s.valid_count for s in stats)
    zeros = sum(s.zero_count for s in stats)

    return LatencyProfile(
        precision=p,
        tile_k=tile_k,
        tile_n=tile_n,
        histogram=hist,
        tile_count=tiles,
        total_weights=total,
        zero_weights=zeros,
        average_cycles=average_cycles,
        average_silent_pes=sum(silent) / len(silent),
        word_sparsity_percent=100.0 * zeros / total if total else 0.0,
        include_ragged=include_ragged,
        silent_pe_tiles=len(silent),
    )


def profile_to_text(profile: LatencyProfile) -> str:
    """Serialize a profile as a TOML document with a nested histogram table."""
    doc = {
        "profile": {
            "precision": profile.precision.label,
            "tile_k": profile.tile_k,
            "tile_n": profile.tile_n,
            "tile_count": profile.tile_count,
            "total_weights": profile.total_weights,
            "zero_weights": profile.zero_weights,
            "average_cycles": profile.average_cycles,
            "average_silent_pes": profile.average_silent_pes,
            "word_sparsity_percent": profile.word_sparsity_percent,
            "include_ragged": profile.include_ragged,
            "silent_pe_tiles": profile.silent_pe_tiles,
            "histogram": {str(m): f for m, f in sorted(profile.histogram.items())},
        }
    }
    return tomli_w.dumps(doc)


def profile_from_text(text: str) -> LatencyProfile:
    try:
        doc = tomllib.loads(text)["profile"]
        return LatencyProfile(
            precision=Precision.parse(doc["precision"]),
            tile_k=int(doc["tile_k"]),
            tile_n=int(doc["tile_n"]),
            histogram={int(m): int(f) for m, f in doc["histogram"].items()},
            tile_count=int(doc["tile_count"]),
            total_weights=int(doc["total_weights"]),
            zero_weights=int(doc["zero_weights"]),
            average_cycles=float(doc["average_cycles"]),
            average_silent_pes=float(doc["average_silent_pes"]),
            word_sparsity_percent=float(doc["word_sparsity_percent"]),
            include_ragged=bool(doc.get("include_ragged", False)),
            silent_pe_tiles=int(doc.get("silent_pe_tiles", 0)),
        )
    except (tomllib.TOMLDecodeError, KeyError, ValueError) as exc:
        raise TextFormatError(f"malformed profile document: {exc}") from exc


def profile_to_csv(profile: LatencyProfile) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["max_magnitude", "frequency"])
    for mag, freq in sorted(profile.histogram.items()):
        writer.writerow([mag, freq])
    return buf.getvalue()


def save_profile(profile: LatencyProfile, path: Union[str, Path]) -> None:
    Path(path).write_text(profile_to_text(profile))


def load_profile(path: Union[str, Path]) -> LatencyProfile:
    return profile_from_text(Path(path).read_text())


@dataclass
class CrossCheckReport:
    positions: int
    profile_magnitudes: dict[int, int]
    sim_magnitudes: dict[int, int]
    profile_cycles: dict[int, int]
    sim_cycles: dict[int, int]

    @property
    def agree(self) -> bool:
        return self.profile_magnitudes == self.sim_magnitudes and self.profile_cycles == self.sim_cycles


def _per_position(hist: Counter, positions: int, what: str) -> dict[int, int]:
    out = {}
    for key, count in sorted(hist.items()):
        if count % positions:
            raise ValidationError(f"{what} count {count} for {key} not a multiple of {positions} positions")
        out[int(key)] = count // positions
    return out


def cross_check_profile_against_sim(weights, activations, shape: Optional[ConvShape] = None,
                                    cfg: Optional[PcuConfig] = None) -> CrossCheckReport:
    """Compare profiler tile latencies against the simulated per-atom latencies.

    Every weight block is replayed once per output position, so the
    simulator's histograms are divided by the number of output positions
    before comparison.
    """
    cfg = cfg or PcuConfig()
    shape = shape or ConvShape.from_tensors(weights, activations)
    sim = convolve(shape, weights, activations, "tub", cfg)
    stats = tile_weights(weights, cfg.k, cfg.n, layout="atom")
    positions = shape.out_h * shape.out_w

    prof_mag: Counter = Counter(s.max_magnitude for s in stats)
    prof_cyc: Counter = Counter(s.cycles for s in stats)
    return CrossCheckReport(
        positions=positions,
        profile_magnitudes=dict(sorted(prof_mag.items())),
        sim_magnitudes=_per_position(sim.magnitude_histogram, positions, "magnitude"),
        profile_cycles=dict(sorted(prof_cyc.items())),
        sim_cycles=_per_position(sim.cycle_histogram, positions, "cycle"),
    )
