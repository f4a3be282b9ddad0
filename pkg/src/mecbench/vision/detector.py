"""Deterministic reference "face" detector.

Bright connected regions stand in for faces. The detector is synthetic: its
output has the shape a real facial-expression model would produce (boxes
plus one of six sentiment labels), but the labels are assigned from the
region area. Benchmark validity rests on timing, not recognition accuracy.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Protocol

import numpy as np
from scipy import ndimage

from mecbench.vision.frames import Frame

SENTIMENTS = ("fear", "neutral", "happy", "sad", "anger", "disgust")

_FOUR_CONNECTED = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]])


@dataclass(frozen=True)
class DetectorParams:
    threshold: int = 200
    min_area: int = 16


@dataclass(frozen=True)
class FaceDetection:
    x: int
    y: int
    w: int
    h: int
    sentiment: str
    confidence: float

    def to_wire(self) -> dict:
        return asdict(self)

    @classmethod
    def from_wire(cls, item: dict) -> FaceDetection:
        return cls(int(item["x"]), int(item["y"]), int(item["w"]), int(item["h"]), str(item["sentiment"]), float(item["confidence"]))


def luminance(frame: Frame) -> np.ndarray:
    """BT.601 luma, rounded half-up with exact integer arithmetic."""
    arr = frame.array()
    if frame.channels == 1:
        return arr[:, :, 0]
    rgb = arr.astype(np.uint32)
    luma = (299 * rgb[:, :, 0] + 587 * rgb[:, :, 1] + 114 * rgb[:, :, 2] + 500) // 1000
    return luma.astype(np.uint8)


def detect(frame: Frame, params: DetectorParams = DetectorParams()) -> list[FaceDetection]:
    mask = luminance(frame) >= params.threshold
    labels, count = ndimage.label(mask, structure=_FOUR_CONNECTED)
    if count == 0:
        return []
    areas = np.bincount(labels.ravel(), minlength=count + 1)
    found = []
    for index, box in enumerate(ndimage.find_objects(labels), start=1):
        area = int(areas[index])
        if area < params.min_area:
            continue
        rows, cols = box
        y, x = rows.start, cols.start
        h, w = rows.stop - y, cols.stop - x
        found.append(
            FaceDetection(x, y, w, h, SENTIMENTS[area % 6], min(1.0, area / (w * h)))
        )
    found.sort(key=lambda d: (d.y, d.x))
    return found


class VisionTask(Protocol):
    """Anything that turns a working-resolution frame into face detections.

    A neural facial-expression model can be plugged into the offload app by
    implementing this protocol.
    """

    def analyze(self, frame: Frame) -> list[FaceDetection]: ...


class ReferenceDetector:
    def __init__(self, params: DetectorParams = DetectorParams()):
        self.params = params

    def analyze(self, frame: Frame) -> list[FaceDetection]:
        return detect(frame, self.params)
