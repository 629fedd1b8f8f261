"""Quantized tensor carrier and its binary container format.

Layout (all integers little-endian)::

    offset 0   8 bytes   magic b"TQTENS01"
    offset 8   u32       dtype code (bit width: 2, 4, 8, 32 or 64)
    offset 12  u32       rank
    offset 16  rank*u64  dims
    ...        payload   row-major two's-complement elements

int2 packs four elements per byte and int4 two per byte, lowest bits first.
A partially filled final byte is zero padded. int8/int32/int64 store one
element per 1/4/8 bytes. The wide codes exist so convolution outputs can be
written at full accumulator width.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Union

import numpy as np

from .arith import Precision
from .errors import (
    BadMagicError,
    ElementRangeError,
    PayloadLengthError,
    RangeError,
    UnknownDtypeError,
    ValidationError,
)

__all__ = ["QuantTensor", "MAGIC", "DTYPE_BITS", "save_tensor", "load_tensor", "encode_tensor", "decode_tensor"]

MAGIC = b"TQTENS01"
DTYPE_BITS = {"int2": 2, "int4": 4, "int8": 8, "int32": 32, "int64": 64}
_CODE_TO_DTYPE = {bits: name for name, bits in DTYPE_BITS.items()}
_HEADER = struct.Struct("<8sII")

PathLike = Union[str, Path]


def _dtype_range(dtype: str) -> tuple[int, int]:
    bits = DTYPE_BITS[dtype]
    return -(1 << (bits - 1)), (1 << (bits - 1)) - 1


@dataclass(frozen=True, eq=False)
class QuantTensor:
    """Signed integer tensor with a declared storage precision."""

    dtype: str
    data: np.ndarray

    def __post_init__(self):
        dtype = self.dtype.label if isinstance(self.dtype, Precision) else str(self.dtype).lower()
        if dtype not in DTYPE_BITS:
            raise ValidationError(f"unknown dtype {self.dtype!r}")
        data = np.array(self.data, dtype=np.int64, copy=True)
        if data.ndim == 0:
            raise ValidationError("tensor must have rank >= 1")
        if any(d < 1 for d in data.shape):
            raise ValidationError(f"every dim must be positive, got {data.shape}")
        lo, hi = _dtype_range(dtype)
        if dtype != "int64" and (data.min() < lo or data.max() > hi):
            bad = data[(data < lo) | (data > hi)].flat[0]
            raise RangeError(f"element {bad} outside {dtype} range [{lo}, {hi}]")
        data.setflags(write=False)
        object.__setattr__(self, "dtype", dtype)
        object.__setattr__(self, "data", data)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(self.data.shape)

    @property
    def bits(self) -> int:
        return DTYPE_BITS[self.dtype]

    @property
    def precision(self) -> Precision:
        """Arithmetic precision; only defined for int2/int4/int8 tensors."""
        if self.bits > 8:
            raise ValidationError(f"{self.dtype} is a storage width, not an arithmetic precision")
        return Precision(self.bits)

    def __eq__(self, other):
        if not isinstance(other, QuantTensor):
            return NotImplemented
        return self.dtype == other.dtype and self.dims == other.dims and np.array_equal(self.data, other.data)

    def __repr__(self):
        return f"QuantTensor(dtype={self.dtype!r}, dims={self.dims})"


def _payload_size(dtype: str, count: int) -> int:
    return (count * DTYPE_BITS[dtype] + 7) // 8


def encode_tensor(tensor: QuantTensor) -> bytes:
    flat = tensor.data.reshape(-1)
    bits = tensor.bits
    header = _HEADER.pack(MAGIC, bits, len(tensor.dims)) + struct.pack(f"<{len(tensor.dims)}Q", *tensor.dims)
    if bits >= 8:
        payload = flat.astype(f"<i{bits // 8}").tobytes()
    else:
        per_byte = 8 // bits
        mask = (1 << bits) - 1
        codes = (flat & mask).astype(np.uint8)
        pad = (-len(codes)) % per_byte
        codes = np.concatenate([codes, np.zeros(pad, dtype=np.uint8)]).reshape(-1, per_byte)
        shifts = (np.arange(per_byte) * bits).astype(np.uint8)
        payload = np.bitwise_or.reduce(codes << shifts, axis=1).astype(np.uint8).tobytes()
    return header + payload


def decode_tensor(blob: bytes) -> QuantTensor:
    if len(blob) < _HEADER.size or blob[:8] != MAGIC:
        raise BadMagicError(f"not a tensor container (magic {blob[:8]!r})")
    _, code, rank = _HEADER.unpack_from(blob)
    if code not in _CODE_TO_DTYPE:
        raise UnknownDtypeError(f"unknown dtype code {code}")
    dtype = _CODE_TO_DTYPE[code]
    dims_end = _HEADER.size + 8 * rank
    if rank == 0:
        raise PayloadLengthError("rank 0 tensors are not supported")
    if len(blob) < dims_end:
        raise PayloadLengthError(f"header truncated: {len(blob)} bytes, dims need {dims_end}")
    dims = struct.unpack_from(f"<{rank}Q", blob, _HEADER.size)
    if any(d == 0 for d in dims):
        raise PayloadLengthError(f"zero-length dim in {dims}")
    count = int(np.prod(dims, dtype=object))
    payload = blob[dims_end:]
    expected = _payload_size(dtype, count)
    if len(payload) != expected:
        raise PayloadLengthError(
            f"{dtype} tensor with dims {dims} needs {expected} payload bytes, found {len(payload)}"
        )
    bits = DTYPE_BITS[dtype]
    if bits >= 8:
        flat = np.frombuffer(payload, dtype=f"<i{bits // 8}").astype(np.int64)
    else:
        per_byte = 8 // bits
        raw = np.frombuffer(payload, dtype=np.uint8)
        shifts = (np.arange(per_byte) * bits).astype(np.uint8)
        codes = ((raw[:, None] >> shifts) & ((1 << bits) - 1)).reshape(-1)[:count].astype(np.int64)
        flat = np.where(codes >= 1 << (bits - 1), codes - (1 << bits), codes)
    try:
        return QuantTensor(dtype, flat.reshape(dims))
    except RangeError as exc:
        raise ElementRangeError(str(exc)) from None


def save_tensor(tensor: QuantTensor, path: PathLike) -> None:
    Path(path).write_bytes(encode_tensor(tensor))


def load_tensor(path: PathLike) -> QuantTensor:
    return decode_tensor(Path(path).read_bytes())
