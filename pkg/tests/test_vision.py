import time

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import flood_fill_boxes

from mecbench import FRAME_HEIGHT, FRAME_WIDTH
from mecbench.errors import CalibrationUnstable, MalformedImage, UnsupportedEncoding
from mecbench.vision.corpus import load_corpus, load_directory, synthetic_corpus
from mecbench.vision.detector import SENTIMENTS, DetectorParams, detect, luminance
from mecbench.vision.frames import Encoding, Frame, decode_frame, encode_frame, resize
from mecbench.vision.workload import WorkloadProfile, calibrate, synth_load


def gray(rows) -> Frame:
    return Frame.from_array(np.array(rows, dtype=np.uint8))


def test_frame_rejects_bad_buffers():
    with pytest.raises(ValueError):
        Frame(2, 2, 3, b"\0" * 11)
    with pytest.raises(ValueError):
        Frame(0, 2, 1, b"")
    with pytest.raises(ValueError):
        Frame(1, 1, 2, b"\0\0")


def test_resize_hand_oracle():
    src = gray(np.arange(16).reshape(4, 4))
    out = resize(src, 2, 2)
    assert out.array()[:, :, 0].ravel().tolist() == [0, 2, 8, 10]


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 400), st.integers(1, 400), st.sampled_from([1, 3]))
def test_resize_default_resolution(w, h, c):
    frame = Frame(w, h, c, bytes(w * h * c))
    out = resize(frame, FRAME_WIDTH, FRAME_HEIGHT)
    assert (out.width, out.height, out.channels) == (200, 152, c)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 30), st.integers(1, 30), st.integers(1, 30), st.integers(1, 30), st.integers(0, 2**32 - 1))
def test_resize_samples_floor_index(w, h, ow, oh, seed):
    arr = np.random.default_rng(seed).integers(0, 256, (h, w), dtype=np.uint8)
    out = resize(Frame.from_array(arr), ow, oh).array()[:, :, 0]
    for i in range(oh):
        for j in range(ow):
            assert out[i, j] == arr[(i * h) // oh, (j * w) // ow]


def test_luminance_rounds_half_up():
    # 299*255 + 587*0 + 114*0 = 76245 -> 76.245 -> 76; 299+587+114 = 1000 per unit
    frame = Frame.from_array(np.array([[[255, 0, 0], [255, 255, 255], [1, 1, 1]]], dtype=np.uint8))
    assert luminance(frame).ravel().tolist() == [76, 255, 1]
    # 0.5 exactly rounds up: R=G=0, B such that 114*B ends in 500 -> B=250 gives 28.5
    frame = Frame.from_array(np.array([[[0, 0, 250]]], dtype=np.uint8))
    assert luminance(frame).ravel().tolist() == [29]


def test_detect_rectangle_example():
    arr = np.zeros((FRAME_HEIGHT, FRAME_WIDTH), dtype=np.uint8)
    arr[10:14, 10:15] = 255  # 5 wide, 4 high, area 20
    (face,) = detect(gray(arr))
    assert (face.x, face.y, face.w, face.h) == (10, 10, 5, 4)
    assert face.sentiment == "happy" and face.confidence == 1.0


def test_detect_thresholds_and_min_area():
    arr = np.zeros((20, 20), dtype=np.uint8)
    arr[0:4, 0:4] = 199
    arr[10:13, 10:15] = 200  # area 15 < 16
    assert detect(gray(arr)) == []
    assert len(detect(gray(arr), DetectorParams(threshold=199, min_area=15))) == 2


def test_detect_four_connectivity():
    arr = np.zeros((10, 10), dtype=np.uint8)
    arr[0, 0] = arr[1, 1] = 255  # diagonal neighbours stay separate
    assert len(detect(gray(arr), DetectorParams(min_area=1))) == 2


def test_detect_sorted_and_sentiment_by_area():
    arr = np.zeros((40, 40), dtype=np.uint8)
    arr[30:34, 2:6] = 255  # area 16 -> anger
    arr[2:5, 20:26] = 255  # area 18 -> fear
    arr[2:6, 2:7] = 255  # area 20 -> happy
    faces = detect(gray(arr))
    assert [(f.y, f.x) for f in faces] == [(2, 2), (2, 20), (30, 2)]
    assert [f.sentiment for f in faces] == ["happy", "fear", "anger"]


def random_binary_frame(rng) -> tuple[Frame, list[list[bool]]]:
    h, w = int(rng.integers(1, 33)), int(rng.integers(1, 33))
    mask = rng.random((h, w)) < rng.uniform(0.2, 0.7)
    return gray(np.where(mask, 255, 0)), mask.tolist()


def detector_matches_flood_fill(frames: int = 500, seed: int = 0) -> int:
    """Count frames on which the detector's boxes differ from the flood-fill oracle."""
    rng = np.random.default_rng(seed)
    mismatches = 0
    for _ in range(frames):
        frame, mask = random_binary_frame(rng)
        got = sorted((f.x, f.y, f.w, f.h) for f in detect(frame, DetectorParams(min_area=1)))
        want = sorted(box[:4] for box in flood_fill_boxes(mask))
        if got != want:
            mismatches += 1
    return mismatches


def test_detect_matches_flood_fill_oracle():
    assert detector_matches_flood_fill(200) == 0


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_detection_invariants(seed):
    rng = np.random.default_rng(seed)
    frame, mask = random_binary_frame(rng)
    areas = {box[:4]: box[4] for box in flood_fill_boxes(mask)}
    for f in detect(frame, DetectorParams(min_area=1)):
        assert 0 <= f.x and f.x + f.w <= frame.width and 0 <= f.y and f.y + f.h <= frame.height
        assert f.w >= 1 and f.h >= 1 and 0 <= f.confidence <= 1
        assert f.sentiment == SENTIMENTS[areas[(f.x, f.y, f.w, f.h)] % 6]


def test_detect_is_deterministic():
    frame = synthetic_corpus(3, count=1)[0]
    first = detect(frame)
    assert all(detect(frame) == first for _ in range(50))


@pytest.mark.parametrize("encoding", list(Encoding))
def test_encode_decode_round_trip(encoding):
    frame = synthetic_corpus(1, count=1)[0]
    back = decode_frame(encode_frame(frame, encoding), encoding)
    assert (back.width, back.height, back.channels) == (frame.width, frame.height, 3)
    if encoding is not Encoding.JPEG:
        assert back == frame


def test_grayscale_png_round_trip():
    frame = gray(np.arange(12, dtype=np.uint8).reshape(3, 4))
    assert decode_frame(encode_frame(frame, "png"), "png") == frame


def test_decode_errors():
    with pytest.raises(MalformedImage):
        decode_frame(b"\x89PNG garbage", "png")
    with pytest.raises(MalformedImage):
        decode_frame(b"\0\0", "raw")
    raw = encode_frame(gray([[1, 2]]), "raw")
    with pytest.raises(MalformedImage):
        decode_frame(raw[:-1], "raw")
    png = encode_frame(gray([[1, 2]]), "png")
    with pytest.raises(MalformedImage):
        decode_frame(png, "jpeg")
    with pytest.raises(UnsupportedEncoding):
        decode_frame(png, "gif")
    with pytest.raises(UnsupportedEncoding):
        Encoding.from_content_type("image/gif")


def test_content_types():
    for enc in Encoding:
        assert Encoding.from_content_type(enc.content_type) is enc
    assert Encoding.RAW.content_type == "application/x-raw-frame"


def test_synthetic_corpus_is_seeded():
    a, b = synthetic_corpus(5), synthetic_corpus(5)
    assert a == b and a != synthetic_corpus(6)
    assert all(detect(f) for f in a)  # every frame carries at least one blob


def test_load_directory(tmp_path):
    for i, frame in enumerate(synthetic_corpus(0, count=3, width=64, height=48)):
        (tmp_path / f"f{i}.png").write_bytes(encode_frame(frame, "png"))
    (tmp_path / "notes.txt").write_text("ignored")
    frames = load_corpus(str(tmp_path))
    assert len(frames) == 3 and all((f.width, f.height) == (200, 152) for f in frames)
    with pytest.raises(ValueError):
        load_directory(_empty(tmp_path))


def _empty(tmp_path):
    d = tmp_path / "empty"
    d.mkdir()
    return d


# --- workload ----------------------------------------------------------------

def test_calibrate_and_synth_load_timing():
    profile = calibrate(WorkloadProfile(20.0))
    assert profile.calibration > 0
    elapsed = [synth_load(profile) for _ in range(5)]
    assert all(20.0 <= e < 30.0 for e in elapsed)
    assert synth_load(profile, 0) < 1.0


def test_synth_load_requires_calibration():
    with pytest.raises(ValueError):
        synth_load(WorkloadProfile(1.0))


class JitteryClock:
    """Each kernel run appears to take alternately 1 ms and 10 ms."""

    def __init__(self):
        self.t = 0.0
        self.calls = 0

    def __call__(self):
        self.calls += 1
        if self.calls % 2 == 0:
            self.t += 0.001 if (self.calls // 2) % 2 else 0.010
        return self.t


def test_calibrate_rejects_unstable_timings():
    with pytest.raises(CalibrationUnstable):
        calibrate(WorkloadProfile(5.0), clock=JitteryClock())


def test_calibrate_settles_on_median_of_stable_window():
    durations = iter([0.010, 0.001, 0.002, 0.002, 0.002])
    state = {"t": 0.0, "start": True}

    def clock():
        if not state["start"]:
            state["t"] += next(durations)
        state["start"] = not state["start"]
        return state["t"]

    profile = calibrate(WorkloadProfile(5.0), clock=clock)
    # window settles on the last three (2 ms each) measurements
    assert profile.calibration == pytest.approx(60_000 / 2.0)


def test_workload_profile_validation():
    with pytest.raises(ValueError):
        WorkloadProfile(-1.0)
    with pytest.raises(ValueError):
        WorkloadProfile(1.0, calibration=0)


def test_concurrent_synth_load_keeps_service_time():
    import threading

    profile = calibrate(WorkloadProfile(30.0))
    results = []

    def one():
        t0 = time.perf_counter()
        synth_load(profile)
        results.append((time.perf_counter() - t0) * 1000)

    threads = [threading.Thread(target=one) for _ in range(2)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert all(r < 45 for r in results)
