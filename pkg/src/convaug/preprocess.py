"""Geometry and sampling stage: strip crops, face crops, resizing, frame
sampling policies, and viewpoint-ordered concatenation.

All operations are pure; the resize convention is pinned so per-pixel oracles
are exact:

* bilinear, align-corners=false — source coordinate ``(dst + 0.5) * scale - 0.5``,
* edge-clamped taps, channels interpolated independently,
* float intermediates re-quantized by the core rounding rule.
"""

from __future__ import annotations

import csv
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .core import Clip, ImageBuffer, quantize_u8

__all__ = [
    "CropSpec",
    "FaceBox",
    "SamplingPolicy",
    "PipelineCounters",
    "InvalidCropError",
    "strip_crop",
    "face_crop",
    "bilinear_resize",
    "sample_frames",
    "concat_views",
    "load_face_sidecar",
    "discover_clip",
]

FRAME_NAME_RE = re.compile(r"^frame_(\d{6})\.(png|ppm)$")


class InvalidCropError(ValueError):
    """Raised when crop margins consume the entire image width."""


@dataclass(frozen=True)
class CropSpec:
    """Fixed left/right pixel bands to remove (e.g. 200/200 on 1000-wide video)."""

    left_margin: int
    right_margin: int

    def __post_init__(self) -> None:
        if self.left_margin < 0 or self.right_margin < 0:
            raise ValueError("crop margins must be non-negative")


@dataclass(frozen=True)
class FaceBox:
    """Half-open detector box for one frame, in source-image pixels."""

    frame_index: int
    detected: bool
    x0: int = 0
    y0: int = 0
    x1: int = 0
    y1: int = 0

    def __post_init__(self) -> None:
        if self.detected and (self.x0 >= self.x1 or self.y0 >= self.y1 or self.x0 < 0 or self.y0 < 0):
            raise ValueError(
                f"detected box must satisfy 0 <= x0 < x1 and 0 <= y0 < y1, "
                f"got ({self.x0},{self.y0},{self.x1},{self.y1})"
            )


@dataclass(frozen=True)
class SamplingPolicy:
    """Frame-sampling policy: ``last_one``, ``last_k`` (k), or ``uniform_n`` (n)."""

    kind: str
    k: int = 1

    _KINDS = ("last_one", "last_k", "uniform_n")

    def __post_init__(self) -> None:
        if self.kind not in self._KINDS:
            raise ValueError(f"unknown sampling kind {self.kind!r}")
        if self.k < 1:
            raise ValueError("sampling count must be >= 1")

    @classmethod
    def last_one(cls) -> "SamplingPolicy":
        return cls("last_one")

    @classmethod
    def last_k(cls, k: int) -> "SamplingPolicy":
        return cls("last_k", k)

    @classmethod
    def uniform_n(cls, n: int) -> "SamplingPolicy":
        return cls("uniform_n", n)

    @classmethod
    def parse(cls, token: str) -> "SamplingPolicy":
        """Parse CLI tokens: ``last1``, ``lastK:k``, ``uniform:n``."""
        if token == "last1":
            return cls.last_one()
        if token.startswith("lastK:"):
            return cls.last_k(int(token.split(":", 1)[1]))
        if token.startswith("uniform:"):
            return cls.uniform_n(int(token.split(":", 1)[1]))
        raise ValueError(f"bad sampling policy {token!r}, expected last1|lastK:k|uniform:n")


@dataclass
class PipelineCounters:
    """Mutable tally the CLI threads through face_crop calls."""

    black_filled: int = 0
    empty_boxes: int = 0


def strip_crop(img: ImageBuffer, spec: CropSpec) -> ImageBuffer:
    """Remove ``left_margin``/``right_margin`` pixel columns; rows untouched.

    Output pixel (r, c) equals input pixel (r, c + left_margin) exactly — the
    crop is a slice, never a resample.
    """
    if spec.left_margin + spec.right_margin >= img.width:
        raise InvalidCropError(
            f"margins {spec.left_margin}+{spec.right_margin} consume entire width {img.width}"
        )
    if spec.left_margin == 0 and spec.right_margin == 0:
        return img
    return ImageBuffer(img.data[:, spec.left_margin : img.width - spec.right_margin, :])


def bilinear_resize(img: ImageBuffer, out_h: int, out_w: int) -> ImageBuffer:
    """Resize with the pinned convention (align-corners=false, edge clamp)."""
    if out_h < 1 or out_w < 1:
        raise ValueError("output dimensions must be >= 1")
    if out_h == img.height and out_w == img.width:
        return img
    src = img.data.astype(np.float64)
    h, w = img.height, img.width

    ys = (np.arange(out_h, dtype=np.float64) + 0.5) * (h / out_h) - 0.5
    xs = (np.arange(out_w, dtype=np.float64) + 0.5) * (w / out_w) - 0.5
    y0 = np.floor(ys).astype(np.int64)
    x0 = np.floor(xs).astype(np.int64)
    fy = ys - y0
    fx = xs - x0
    y0c = np.clip(y0, 0, h - 1)
    y1c = np.clip(y0 + 1, 0, h - 1)
    x0c = np.clip(x0, 0, w - 1)
    x1c = np.clip(x0 + 1, 0, w - 1)

    fx = fx[None, :, None]
    fy = fy[:, None, None]
    top = src[y0c][:, x0c] * (1.0 - fx) + src[y0c][:, x1c] * fx
    bot = src[y1c][:, x0c] * (1.0 - fx) + src[y1c][:, x1c] * fx
    return ImageBuffer(quantize_u8(top * (1.0 - fy) + bot * fy))


def face_crop(
    img: ImageBuffer,
    box: FaceBox,
    out_size: int,
    counters: PipelineCounters | None = None,
) -> ImageBuffer:
    """Extract a detector box and resize it to ``out_size`` square.

    Undetected frames yield an all-black substitute of the requested size. A
    detected box is clamped to the image bounds first; if clamping leaves zero
    area it is treated as undetected and ``counters.empty_boxes`` is bumped.
    """
    if out_size < 1:
        raise ValueError("out_size must be >= 1")
    if not box.detected:
        if counters is not None:
            counters.black_filled += 1
        return ImageBuffer.full(out_size, out_size, 0)
    x0 = max(0, box.x0)
    y0 = max(0, box.y0)
    x1 = min(img.width, box.x1)
    y1 = min(img.height, box.y1)
    if x0 >= x1 or y0 >= y1:
        if counters is not None:
            counters.empty_boxes += 1
            counters.black_filled += 1
        return ImageBuffer.full(out_size, out_size, 0)
    region = ImageBuffer(img.data[y0:y1, x0:x1, :])
    return bilinear_resize(region, out_size, out_size)


def sample_frames(clip: Clip, policy: SamplingPolicy) -> list[int]:
    """Frame indices selected by ``policy`` over a clip of length T.

    * ``last_one`` -> ``[T-1]``
    * ``last_k(k)`` -> ``[max(0, T-k) .. T-1]`` (shorter clips yield fewer
      indices, never repetition — each sampled frame is an independent sample)
    * ``uniform_n(n)`` -> ``floor(i*T/n)`` for i in 0..n-1 when T >= n, else
      ``0..T-1`` padded by repeating the last index up to length n
    """
    t = clip.frame_count
    if t < 1:
        raise ValueError(f"clip {clip.sample_id!r} has no frames")
    if policy.kind == "last_one":
        return [t - 1]
    if policy.kind == "last_k":
        return list(range(max(0, t - policy.k), t))
    n = policy.k
    if t >= n:
        return [(i * t) // n for i in range(n)]
    return list(range(t)) + [t - 1] * (n - t)


def concat_views(frames: Sequence[tuple[str, ImageBuffer]]) -> np.ndarray:
    """Stack one frame per view into a (views, H, W, 3) uint8 tensor.

    Input must already be ordered by the annotation's view order (see
    ``manifest.enumerate_views``); slice i is byte-identical to frame i.
    """
    if not frames:
        raise ValueError("concat_views needs at least one frame")
    ref_tag, ref = frames[0]
    for tag, img in frames[1:]:
        if (img.height, img.width) != (ref.height, ref.width):
            raise ValueError(
                f"view {tag!r} has dimensions {img.height}x{img.width}, "
                f"expected {ref.height}x{ref.width} (from view {ref_tag!r})"
            )
    return np.stack([img.data for _, img in frames], axis=0)


def load_face_sidecar(path: str | Path) -> dict[int, FaceBox]:
    """Load a face-detector sidecar CSV keyed by frame index.

    Schema: ``frame_index,detected,x0,y0,x1,y1`` with ``detected`` in {0,1}
    and half-open box coordinates in source-image pixels.
    """
    boxes: dict[int, FaceBox] = {}
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["frame_index", "detected", "x0", "y0", "x1", "y1"]:
            raise ValueError(f"{path}: bad sidecar header {header}")
        for row in reader:
            if not row:
                continue
            if len(row) != 6:
                raise ValueError(f"{path}: line {reader.line_num}: expected 6 fields, got {len(row)}")
            try:
                idx = int(row[0])
                detected = {"0": False, "1": True}[row[1]]
                coords = [int(v) for v in row[2:]]
            except (ValueError, KeyError):
                raise ValueError(f"{path}: line {reader.line_num}: malformed row {row}") from None
            boxes[idx] = FaceBox(idx, detected, *coords)
    return boxes


def discover_clip(sample_id: str, view: str, clip_dir: str | Path) -> Clip:
    """Build a Clip from the numbered frame files in a per-clip directory.

    Frames are ordered by their filename index; the temporal index is the
    position in that sorted order.
    """
    clip_dir = Path(clip_dir)
    if not clip_dir.is_dir():
        raise FileNotFoundError(f"clip directory not found: {clip_dir}")
    indexed: list[tuple[int, Path]] = []
    for entry in clip_dir.iterdir():
        m = FRAME_NAME_RE.match(entry.name)
        if m:
            indexed.append((int(m.group(1)), entry))
    if not indexed:
        raise FileNotFoundError(f"no frame_%06d.png/.ppm files in {clip_dir}")
    indexed.sort(key=lambda pair: pair[0])
    return Clip(sample_id=sample_id, view=view, frames=tuple(p for _, p in indexed))
