"""Frame ingestion: 8-bit RGB PNG and binary PPM (P6) readers and writers.

Frames arrive as individual image files (``frame_%06d.png`` or ``.ppm``);
video-container decoding is out of scope. Any file that is not an 8-bit RGB
PNG or a maxval-255 P6 PPM is rejected with a descriptive error.
"""

from __future__ import annotations

import io
from pathlib import Path

import numpy as np
from PIL import Image

from .core import ImageBuffer

__all__ = ["ImageFormatError", "read_image", "write_image", "write_png", "write_ppm"]

_PNG_SIGNATURE = b"\x89PNG\r\n\x1a\n"


class ImageFormatError(ValueError):
    """Raised for unsupported or malformed image files."""


def read_image(path: str | Path) -> ImageBuffer:
    """Read an 8-bit RGB image from a PNG or binary PPM (P6) file."""
    path = Path(path)
    data = path.read_bytes()
    if data.startswith(_PNG_SIGNATURE):
        return _decode_png(data, path)
    if data.startswith(b"P6"):
        return _decode_ppm(data, path)
    raise ImageFormatError(
        f"{path}: unsupported format (expected 8-bit RGB PNG or binary PPM P6)"
    )


def _decode_png(data: bytes, path: Path) -> ImageBuffer:
    try:
        img = Image.open(io.BytesIO(data))
        img.load()
    except Exception as exc:
        raise ImageFormatError(f"{path}: cannot decode PNG ({exc})") from exc
    if img.mode != "RGB":
        raise ImageFormatError(
            f"{path}: PNG mode {img.mode!r} not supported, expected 8-bit RGB"
        )
    return ImageBuffer(np.asarray(img, dtype=np.uint8))


def _decode_ppm(data: bytes, path: Path) -> ImageBuffer:
    """Minimal P6 parser: 'P6 <w> <h> <maxval>' header then raw RGB bytes.

    Comments (# to end of line) are allowed inside the header per the netpbm
    grammar; only maxval 255 is accepted.
    """
    pos = 2  # past "P6"
    fields: list[int] = []

    def skip_ws(p: int) -> int:
        while p < len(data):
            if data[p : p + 1].isspace():
                p += 1
            elif data[p : p + 1] == b"#":
                while p < len(data) and data[p] not in (0x0A, 0x0D):
                    p += 1
            else:
                break
        return p

    while len(fields) < 3:
        pos = skip_ws(pos)
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        token = data[start:pos]
        if not token.isdigit():
            raise ImageFormatError(f"{path}: malformed PPM header near byte {start}")
        fields.append(int(token))
    width, height, maxval = fields
    if maxval != 255:
        raise ImageFormatError(f"{path}: PPM maxval {maxval} not supported, expected 255")
    pos += 1  # single whitespace byte after maxval
    expected = width * height * 3
    pixels = data[pos : pos + expected]
    if len(pixels) < expected:
        raise ImageFormatError(
            f"{path}: PPM pixel data truncated, expected {expected} bytes, got {len(pixels)}"
        )
    return ImageBuffer.from_bytes(height, width, pixels)


def write_png(img: ImageBuffer, path: str | Path) -> None:
    Image.fromarray(img.data, mode="RGB").save(str(path), format="PNG")


def write_ppm(img: ImageBuffer, path: str | Path) -> None:
    header = f"P6\n{img.width} {img.height}\n255\n".encode("ascii")
    Path(path).write_bytes(header + img.to_bytes())


def write_image(img: ImageBuffer, path: str | Path) -> None:
    """Write PNG or PPM depending on the file extension."""
    path = Path(path)
    if path.suffix.lower() == ".png":
        write_png(img, path)
    elif path.suffix.lower() == ".ppm":
        write_ppm(img, path)
    else:
        raise ImageFormatError(f"{path}: unsupported output extension {path.suffix!r}")
