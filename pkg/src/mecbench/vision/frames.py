"""Frame container, wire encodings and nearest-neighbour resizing."""

from __future__ import annotations

import enum
import io
import struct
from dataclasses import dataclass

import numpy as np

from mecbench.errors import MalformedImage, UnsupportedEncoding

RAW_HEADER = struct.Struct(">III")  # width, height, channels


class Encoding(str, enum.Enum):
    PNG = "png"
    JPEG = "jpeg"
    RAW = "raw"

    @property
    def content_type(self) -> str:
        return _CONTENT_TYPES[self]

    @classmethod
    def from_content_type(cls, content_type: str | None) -> Encoding:
        ctype = (content_type or "").split(";")[0].strip().lower()
        for enc, name in _CONTENT_TYPES.items():
            if name == ctype:
                return enc
        raise UnsupportedEncoding(f"content type {content_type!r}")


_CONTENT_TYPES = {
    Encoding.PNG: "image/png",
    Encoding.JPEG: "image/jpeg",
    Encoding.RAW: "application/x-raw-frame",
}


@dataclass(frozen=True)
class Frame:
    """Row-major 8-bit raster; ``pixels`` holds ``width * height * channels`` octets."""

    width: int
    height: int
    channels: int
    pixels: bytes

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError(f"frame dimensions must be >= 1, got {self.width}x{self.height}")
        if self.channels not in (1, 3):
            raise ValueError(f"channels must be 1 or 3, got {self.channels}")
        if len(self.pixels) != self.width * self.height * self.channels:
            raise ValueError(
                f"pixel buffer has {len(self.pixels)} octets, expected {self.width * self.height * self.channels}"
            )

    @classmethod
    def from_array(cls, array: np.ndarray) -> Frame:
        """Accepts ``(h, w)`` or ``(h, w, c)`` uint8 arrays."""
        arr = np.asarray(array)
        if arr.dtype != np.uint8:
            raise ValueError(f"expected uint8 array, got {arr.dtype}")
        if arr.ndim == 2:
            arr = arr[:, :, None]
        h, w, c = arr.shape
        return cls(w, h, c, np.ascontiguousarray(arr).tobytes())

    def array(self) -> np.ndarray:
        """Read-only ``(height, width, channels)`` view of the pixels."""
        return np.frombuffer(self.pixels, dtype=np.uint8).reshape(self.height, self.width, self.channels)


def encode_frame(frame: Frame, encoding: Encoding | str) -> bytes:
    encoding = Encoding(encoding)
    if encoding is Encoding.RAW:
        return RAW_HEADER.pack(frame.width, frame.height, frame.channels) + frame.pixels
    from PIL import Image

    arr = frame.array()
    image = Image.fromarray(arr[:, :, 0] if frame.channels == 1 else arr, mode="L" if frame.channels == 1 else "RGB")
    buf = io.BytesIO()
    if encoding is Encoding.PNG:
        image.save(buf, format="PNG")
    else:
        image.save(buf, format="JPEG", quality=90)
    return buf.getvalue()


def decode_frame(data: bytes, encoding: Encoding | str) -> Frame:
    try:
        encoding = Encoding(encoding)
    except ValueError:
        raise UnsupportedEncoding(f"encoding {encoding!r}") from None
    if encoding is Encoding.RAW:
        return _decode_raw(data)
    return _decode_pillow(data, encoding)


def _decode_raw(data: bytes) -> Frame:
    if len(data) < RAW_HEADER.size:
        raise MalformedImage(f"RAW frame shorter than its {RAW_HEADER.size}-octet header")
    width, height, channels = RAW_HEADER.unpack_from(data)
    if width < 1 or height < 1 or channels not in (1, 3):
        raise MalformedImage(f"RAW header invalid: {width}x{height}x{channels}")
    expected = width * height * channels
    payload = data[RAW_HEADER.size:]
    if len(payload) != expected:
        raise MalformedImage(f"RAW payload has {len(payload)} samples, header says {expected}")
    return Frame(width, height, channels, bytes(payload))


def _decode_pillow(data: bytes, encoding: Encoding) -> Frame:
    from PIL import Image, UnidentifiedImageError

    try:
        with Image.open(io.BytesIO(data)) as image:
            if image.format != encoding.name:
                raise MalformedImage(f"expected {encoding.name} data, found {image.format}")
            if image.mode != "L":
                image = image.convert("RGB")
            arr = np.asarray(image, dtype=np.uint8)
    except (UnidentifiedImageError, OSError, SyntaxError, ValueError) as exc:
        raise MalformedImage(f"undecodable {encoding.name}: {exc}") from exc
    return Frame.from_array(arr)


def resize(frame: Frame, out_w: int, out_h: int) -> Frame:
    """Nearest-neighbour resize; output pixel ``i`` samples source ``floor(i * in / out)``."""
    if out_w < 1 or out_h < 1:
        raise ValueError(f"output dimensions must be >= 1, got {out_w}x{out_h}")
    if (out_w, out_h) == (frame.width, frame.height):
        return frame
    rows = (np.arange(out_h) * frame.height) // out_h
    cols = (np.arange(out_w) * frame.width) // out_w
    return Frame.from_array(frame.array()[rows[:, None], cols[None, :]])
