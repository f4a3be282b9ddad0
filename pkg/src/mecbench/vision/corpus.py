"""Frame corpora for the load generator."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from mecbench import FRAME_HEIGHT, FRAME_WIDTH
from mecbench.vision.frames import Encoding, Frame, decode_frame, resize

DEFAULT_CORPUS_SIZE = 16
_SUFFIXES = {".png": Encoding.PNG, ".jpg": Encoding.JPEG, ".jpeg": Encoding.JPEG, ".raw": Encoding.RAW}


def _blob_axis(rng: np.random.Generator, extent: int) -> tuple[int, int]:
    """Radius and centre along one axis; radius 8..extent/5 where the frame allows it."""
    lo = max(1, min(8, extent // 5))
    radius = int(rng.integers(lo, max(lo + 1, extent // 5)))
    if extent > 2 * radius:
        return radius, int(rng.integers(radius, extent - radius))
    return radius, int(rng.integers(0, extent))


def synthetic_frame(rng: np.random.Generator, width: int = FRAME_WIDTH, height: int = FRAME_HEIGHT) -> Frame:
    """Dark textured RGB background with one to three bright elliptical blobs."""
    pixels = rng.integers(10, 140, size=(height, width, 3), dtype=np.uint8)
    yy, xx = np.mgrid[0:height, 0:width]
    for _ in range(int(rng.integers(1, 4))):
        ry, cy = _blob_axis(rng, height)
        rx, cx = _blob_axis(rng, width)
        inside = ((yy - cy) / ry) ** 2 + ((xx - cx) / rx) ** 2 <= 1.0
        pixels[inside] = rng.integers(215, 256, size=3, dtype=np.uint8)
    return Frame.from_array(pixels)


def synthetic_corpus(
    seed: int = 0, count: int = DEFAULT_CORPUS_SIZE, width: int = FRAME_WIDTH, height: int = FRAME_HEIGHT
) -> list[Frame]:
    rng = np.random.default_rng(seed)
    return [synthetic_frame(rng, width, height) for _ in range(count)]


def load_directory(path: str | Path, width: int = FRAME_WIDTH, height: int = FRAME_HEIGHT) -> list[Frame]:
    """Decode every image in ``path`` (sorted by name) and resize it to the working resolution."""
    files = sorted(p for p in Path(path).iterdir() if p.suffix.lower() in _SUFFIXES)
    if not files:
        raise ValueError(f"no .png/.jpg/.raw images in {path}")
    return [resize(decode_frame(p.read_bytes(), _SUFFIXES[p.suffix.lower()]), width, height) for p in files]


def load_corpus(source: str, seed: int = 0, width: int = FRAME_WIDTH, height: int = FRAME_HEIGHT) -> list[Frame]:
    """``"synthetic"`` or a directory of images."""
    if source == "synthetic":
        return synthetic_corpus(seed, width=width, height=height)
    return load_directory(source, width, height)
