"""Core value types, deterministic RNG streams, and the tensor-blob container.

Everything downstream (cropping, augmentation, scoring, the CLI) is built on
the pieces in this module:

* :class:`ImageBuffer` — an immutable 8-bit RGB raster.
* :class:`RngStream` — a SplitMix64 generator giving platform-stable draws.
* :func:`derive_sample_seed` — maps (global seed, sample id, operator index)
  to an independent 64-bit seed, so augmentation is reproducible per sample.
* ``CTNS`` tensor blobs — a tiny self-describing binary container used to
  hand pixel tensors to external trainers.
* :func:`quantize_u8` — the single rounding rule used whenever float pixel
  math is converted back to 8-bit (round half away from zero, then clamp).
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import BinaryIO, Sequence, Union

import numpy as np

__all__ = [
    "ImageBuffer",
    "Clip",
    "RngStream",
    "BlobDType",
    "BlobFormatError",
    "derive_sample_seed",
    "fnv1a64",
    "splitmix64",
    "quantize_u8",
    "round_half_away",
    "write_tensor_blob",
    "read_tensor_blob",
    "write_array_blob",
    "read_array_blob",
]

_MASK64 = (1 << 64) - 1

BLOB_MAGIC = b"CTNS"
BLOB_VERSION = 1


class BlobFormatError(ValueError):
    """Raised when a tensor blob is malformed; the message names the field."""


def fnv1a64(data: bytes) -> int:
    """64-bit FNV-1a hash (offset basis 0xcbf29ce484222325, prime 0x100000001b3)."""
    h = 0xCBF29CE484222325
    for b in data:
        h ^= b
        h = (h * 0x100000001B3) & _MASK64
    return h


def splitmix64(state: int) -> tuple[int, int]:
    """One SplitMix64 step: returns ``(output, next_state)``.

    Pure integer arithmetic mod 2**64, so the sequence is identical on every
    platform and Python build.
    """
    state = (state + 0x9E3779B97F4A7C15) & _MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31), state


def derive_sample_seed(global_seed: int, sample_id: str, op_index: int) -> int:
    """Derive the 64-bit seed for one (sample, operator) pair.

    The derivation is ``SplitMix64(global_seed XOR FNV-1a-64(sample_id) XOR
    op_index)`` — the first output of a SplitMix64 stream seeded with the XOR
    combination. It is a pure function of its arguments.

    Raises:
        ValueError: if ``sample_id`` is empty.
    """
    if not sample_id:
        raise ValueError("sample_id must be non-empty")
    state = (global_seed & _MASK64) ^ fnv1a64(sample_id.encode("utf-8")) ^ (op_index & _MASK64)
    value, _ = splitmix64(state)
    return value


class RngStream:
    """Deterministic random stream backed by SplitMix64.

    A stream is single-owner: create one per (sample, operator) via
    :func:`derive_sample_seed` and never share it across threads. All float
    draws are derived from the integer sequence, so identical seeds give
    identical draw sequences everywhere.
    """

    __slots__ = ("seed64", "_state")

    def __init__(self, seed64: int) -> None:
        self.seed64 = seed64 & _MASK64
        self._state = self.seed64

    def next_u64(self) -> int:
        value, self._state = splitmix64(self._state)
        return value

    def next_float64(self) -> float:
        """Uniform in [0, 1) with 53 bits of precision."""
        return (self.next_u64() >> 11) * (2.0**-53)

    def uniform(self, low: float, high: float) -> float:
        """Uniform in [low, high). Consumes one u64 draw."""
        return low + (high - low) * self.next_float64()

    def normal(self) -> float:
        """Standard normal via Box-Muller (cosine branch).

        Consumes exactly two u64 draws per call; the sine branch is discarded
        to keep the stream position a simple function of the call count.
        """
        u1 = 1.0 - self.next_float64()  # (0, 1]: keeps log() finite
        u2 = self.next_float64()
        return math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)

    def next_below(self, n: int) -> int:
        """Integer in [0, n) via the multiply-shift reduction of one u64 draw."""
        if n <= 0:
            raise ValueError("n must be positive")
        return (self.next_u64() * n) >> 64

    def next_bytes(self, n: int) -> bytes:
        """``n`` bytes from consecutive u64 draws, little-endian, truncated."""
        out = bytearray()
        for _ in range((n + 7) // 8):
            out += self.next_u64().to_bytes(8, "little")
        return bytes(out[:n])

    def permutation(self, n: int) -> list[int]:
        """Fisher-Yates permutation of range(n); consumes n-1 draws."""
        idx = list(range(n))
        for i in range(n - 1, 0, -1):
            j = self.next_below(i + 1)
            idx[i], idx[j] = idx[j], idx[i]
        return idx


def round_half_away(x: np.ndarray | float) -> np.ndarray | float:
    """Round half away from zero (0.5 -> 1, -0.5 -> -1), elementwise."""
    if isinstance(x, np.ndarray):
        return np.where(x >= 0, np.floor(x + 0.5), np.ceil(x - 0.5))
    return math.floor(x + 0.5) if x >= 0 else math.ceil(x - 0.5)


def quantize_u8(x: np.ndarray) -> np.ndarray:
    """Re-quantize float pixel data to uint8.

    The toolkit-wide rule: round half away from zero, then clamp to [0, 255].
    """
    return np.clip(round_half_away(np.asarray(x, dtype=np.float64)), 0, 255).astype(np.uint8)


class ImageBuffer:
    """Immutable 8-bit RGB raster, height x width x 3, row-major.

    The backing numpy array is marked read-only at construction; transforms
    always allocate a new buffer. Construction rejects any data whose length
    is not exactly ``height * width * 3``.
    """

    __slots__ = ("_data",)

    def __init__(self, data: np.ndarray) -> None:
        arr = np.asarray(data)
        if arr.dtype != np.uint8:
            raise ValueError(f"ImageBuffer requires uint8 data, got {arr.dtype}")
        if arr.ndim != 3 or arr.shape[2] != 3:
            raise ValueError(f"ImageBuffer requires shape (H, W, 3), got {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"ImageBuffer requires height, width >= 1, got {arr.shape[:2]}")
        arr = np.ascontiguousarray(arr).copy()
        arr.flags.writeable = False
        self._data = arr

    @classmethod
    def from_bytes(cls, height: int, width: int, data: bytes) -> "ImageBuffer":
        expected = height * width * 3
        if len(data) != expected:
            raise ValueError(
                f"data length {len(data)} != height*width*3 = {expected}"
            )
        return cls(np.frombuffer(data, dtype=np.uint8).reshape(height, width, 3))

    @classmethod
    def full(cls, height: int, width: int, value: int = 0) -> "ImageBuffer":
        return cls(np.full((height, width, 3), value, dtype=np.uint8))

    @property
    def data(self) -> np.ndarray:
        """Read-only (H, W, 3) uint8 view."""
        return self._data

    @property
    def height(self) -> int:
        return self._data.shape[0]

    @property
    def width(self) -> int:
        return self._data.shape[1]

    @property
    def channels(self) -> int:
        return 3

    def to_bytes(self) -> bytes:
        return self._data.tobytes()

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ImageBuffer):
            return NotImplemented
        return bool(np.array_equal(self._data, other._data))

    def __repr__(self) -> str:
        return f"ImageBuffer({self.height}x{self.width})"


FrameRef = Union[Path, str, ImageBuffer]


@dataclass(frozen=True)
class Clip:
    """Ordered frame sequence for one sample/view.

    ``frames`` are either file paths or in-memory buffers, strictly ordered
    by temporal index.
    """

    sample_id: str
    view: str
    frames: tuple = field(default_factory=tuple)

    def __post_init__(self) -> None:
        object.__setattr__(self, "frames", tuple(self.frames))

    @property
    def frame_count(self) -> int:
        return len(self.frames)


# --- CTNS tensor blob -------------------------------------------------------
#
# Layout (little-endian):
#   magic   4 bytes  "CTNS"
#   version 1 byte   = 1
#   dtype   1 byte   0 = u8, 1 = f32
#   ndim    1 byte   1..5
#   shape   ndim x u32
#   payload row-major element data


class BlobDType:
    U8 = 0
    F32 = 1


_DTYPE_SIZE = {BlobDType.U8: 1, BlobDType.F32: 4}
_DTYPE_NUMPY = {BlobDType.U8: np.dtype(np.uint8), BlobDType.F32: np.dtype("<f4")}


def write_tensor_blob(
    shape: Sequence[int], dtype: int, payload: bytes, sink: BinaryIO
) -> int:
    """Write one tensor blob to ``sink``; returns total bytes written.

    ``payload`` length must equal ``prod(shape) * element_size``; the total
    is ``7 + 4 * ndim + len(payload)``.
    """
    shape = tuple(int(s) for s in shape)
    if dtype not in _DTYPE_SIZE:
        raise BlobFormatError(f"dtype: unknown code {dtype}")
    ndim = len(shape)
    if not 1 <= ndim <= 5:
        raise BlobFormatError(f"ndim: must be in [1, 5], got {ndim}")
    if any(s < 0 for s in shape):
        raise BlobFormatError(f"shape: negative dimension in {shape}")
    expected = int(np.prod(shape, dtype=np.int64)) * _DTYPE_SIZE[dtype]
    if len(payload) != expected:
        raise BlobFormatError(
            f"payload: length {len(payload)} != prod(shape) * element size = {expected}"
        )
    header = BLOB_MAGIC + struct.pack("<BBB", BLOB_VERSION, dtype, ndim)
    header += struct.pack(f"<{ndim}I", *shape)
    sink.write(header)
    sink.write(payload)
    return len(header) + len(payload)


def read_tensor_blob(source: BinaryIO) -> tuple[tuple[int, ...], int, bytes]:
    """Inverse of :func:`write_tensor_blob`; returns ``(shape, dtype, payload)``.

    Raises :class:`BlobFormatError` naming the offending field on bad magic,
    version, dtype, ndim, or truncation.
    """
    magic = source.read(4)
    if len(magic) < 4:
        raise BlobFormatError(f"magic: truncated header, got {len(magic)} of 4 bytes")
    if magic != BLOB_MAGIC:
        raise BlobFormatError(f"magic: expected {BLOB_MAGIC!r}, got {magic!r}")
    rest = source.read(3)
    if len(rest) < 3:
        raise BlobFormatError("header: truncated before ndim")
    version, dtype, ndim = struct.unpack("<BBB", rest)
    if version != BLOB_VERSION:
        raise BlobFormatError(f"version: expected {BLOB_VERSION}, got {version}")
    if dtype not in _DTYPE_SIZE:
        raise BlobFormatError(f"dtype: unknown code {dtype}")
    if not 1 <= ndim <= 5:
        raise BlobFormatError(f"ndim: must be in [1, 5], got {ndim}")
    raw_shape = source.read(4 * ndim)
    if len(raw_shape) < 4 * ndim:
        raise BlobFormatError(
            f"shape: truncated, expected {4 * ndim} bytes, got {len(raw_shape)}"
        )
    shape = struct.unpack(f"<{ndim}I", raw_shape)
    expected = int(np.prod(shape, dtype=np.int64)) * _DTYPE_SIZE[dtype]
    payload = source.read(expected)
    if len(payload) < expected:
        raise BlobFormatError(
            f"payload: truncated, expected {expected} bytes, got {len(payload)}"
        )
    return shape, dtype, payload


def write_array_blob(arr: np.ndarray, sink: BinaryIO) -> int:
    """Write a uint8 or float32 numpy array as a tensor blob."""
    if arr.dtype == np.uint8:
        dtype = BlobDType.U8
    elif arr.dtype == np.float32:
        dtype = BlobDType.F32
    else:
        raise BlobFormatError(f"dtype: unsupported array dtype {arr.dtype}")
    data = np.ascontiguousarray(arr)
    if dtype == BlobDType.F32:
        data = data.astype("<f4", copy=False)
    return write_tensor_blob(arr.shape, dtype, data.tobytes(), sink)


def read_array_blob(source: BinaryIO) -> np.ndarray:
    """Read a tensor blob back into a numpy array."""
    shape, dtype, payload = read_tensor_blob(source)
    return np.frombuffer(payload, dtype=_DTYPE_NUMPY[dtype]).reshape(shape)
