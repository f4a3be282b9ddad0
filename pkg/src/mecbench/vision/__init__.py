from mecbench.vision.detector import SENTIMENTS, DetectorParams, FaceDetection, ReferenceDetector, VisionTask, detect
from mecbench.vision.frames import Encoding, Frame, decode_frame, encode_frame, resize
from mecbench.vision.workload import WorkloadProfile, calibrate, synth_load

__all__ = [
    "SENTIMENTS",
    "DetectorParams",
    "Encoding",
    "FaceDetection",
    "Frame",
    "ReferenceDetector",
    "VisionTask",
    "WorkloadProfile",
    "calibrate",
    "decode_frame",
    "detect",
    "encode_frame",
    "resize",
    "synth_load",
]
