"""Stream format parsing, validation, backprojection, and the synthetic oracle generator."""

import json
import math

import numpy as np
import pytest

from demo2plan.streams import (
    Box,
    DetectionFrame,
    FormatError,
    HandState,
    Intrinsics,
    InvalidDepth,
    InvariantError,
    ObjectDetection,
    Stream,
    StreamHeader,
    backproject,
    hand_point_3d,
    load_depth,
    median_box_depth,
    parse_stream,
    save_depth,
    serialize_stream,
    validate_stream,
)
from demo2plan.synthetic import (
    ArcMove,
    LinearMove,
    ScriptError,
    ScriptEvent,
    ScriptObject,
    SyntheticScript,
    pick_and_place_script,
    synthesize_stream,
)

INTR = Intrinsics(fx=600.0, fy=600.0, cx=320.0, cy=240.0)


def small_stream() -> Stream:
    header = StreamHeader(width=640, height=480, fps=30.0, frame_count=2)
    frames = [
        DetectionFrame(
            frame_index=0,
            timestamp_ms=0,
            hand_box=Box(100, 100, 40, 40),
            hand_state=HandState(holding=False),
            objects=(ObjectDetection("cup", Box(200, 200, 30, 30), 0.9),),
        ),
        DetectionFrame(frame_index=1, timestamp_ms=33),
    ]
    return Stream(header=header, frames=frames)


class TestParseAndSerialize:
    def test_round_trip(self, tmp_path):
        stream = small_stream()
        path = tmp_path / "stream.ldjson"
        serialize_stream(stream, path)
        parsed = parse_stream(path)
        assert parsed.header == stream.header
        assert parsed.frames == stream.frames

    def test_two_frame_file(self, tmp_path):
        path = tmp_path / "s.ldjson"
        serialize_stream(small_stream(), path)
        parsed = parse_stream(path)
        assert len(parsed.frames) == 2

    def test_duplicate_frame_index(self, tmp_path):
        path = tmp_path / "s.ldjson"
        lines = [
            {"type": "header", "width": 640, "height": 480, "fps": 30, "frame_count": 2},
            {"type": "frame", "frame_index": 0, "timestamp_ms": 0, "objects": []},
            {"type": "frame", "frame_index": 0, "timestamp_ms": 33, "objects": []},
        ]
        path.write_text("\n".join(json.dumps(l) for l in lines))
        with pytest.raises(InvariantError, match="strictly increasing"):
            parse_stream(path)

    def test_out_of_bounds_box(self, tmp_path):
        path = tmp_path / "s.ldjson"
        lines = [
            {"type": "header", "width": 640, "height": 480, "fps": 30, "frame_count": 1},
            {
                "type": "frame",
                "frame_index": 0,
                "timestamp_ms": 0,
                "hand_box": {"cx": 650.0, "cy": 100.0, "w": 40.0, "h": 40.0},
                "objects": [],
            },
        ]
        path.write_text("\n".join(json.dumps(l) for l in lines))
        with pytest.raises(InvariantError, match="bounds"):
            parse_stream(path)

    def test_bad_json_line(self, tmp_path):
        path = tmp_path / "s.ldjson"
        path.write_text('{"type":"header","width":640,"height":480,"fps":30,"frame_count":1}\nnot json\n')
        with pytest.raises(FormatError) as err:
            parse_stream(path)
        assert err.value.line == 2

    def test_depth_requires_intrinsics(self):
        header = StreamHeader(width=64, height=48, fps=10, frame_count=1)
        frames = [DetectionFrame(frame_index=0, timestamp_ms=0, depth_path="depth/0.png")]
        with pytest.raises(InvariantError, match="intrinsics"):
            validate_stream(header, frames)

    def test_confidence_range(self):
        header = StreamHeader(width=640, height=480, fps=10, frame_count=1)
        frames = [
            DetectionFrame(
                frame_index=0,
                timestamp_ms=0,
                objects=(ObjectDetection("cup", Box(100, 100, 10, 10), 1.5),),
            )
        ]
        with pytest.raises(InvariantError, match="confidence"):
            validate_stream(header, frames)


class TestBackprojection:
    def test_principal_point(self):
        np.testing.assert_allclose(backproject(320, 240, 1.0, INTR), [0, 0, 1.0])

    def test_one_focal_length_off_axis(self):
        # substitute u = cx + fx into the pinhole model: X = z
        np.testing.assert_allclose(backproject(320 + 600, 240, 2.0, INTR), [2.0, 0.0, 2.0])

    def test_invalid_depth(self):
        with pytest.raises(InvalidDepth):
            backproject(320, 240, 0.0, INTR)
        with pytest.raises(InvalidDepth):
            backproject(320, 240, float("nan"), INTR)


class TestDepthRasters:
    def test_save_load_round_trip_mm(self, tmp_path):
        depth = np.full((48, 64), 1.234)
        save_depth(tmp_path / "d.png", depth)
        loaded = load_depth(tmp_path / "d.png")
        np.testing.assert_allclose(loaded, 1.234, atol=5e-4)

    def test_median_ignores_holes(self, tmp_path):
        depth = np.zeros((48, 64))
        depth[10:20, 10:20] = 0.8
        assert median_box_depth(depth, Box(15, 15, 10, 10)) == pytest.approx(0.8)
        assert median_box_depth(depth, Box(40, 40, 5, 5)) is None


class TestSynthesize:
    def test_holding_flips_at_event_frames(self, tmp_path):
        moves = [LinearMove(0, 120, (0.0, 0.0, 0.6), (0.05, 0.05, 0.6))]
        objects = [ScriptObject("can", (0.02, 0.02, 0.6))]
        events = [ScriptEvent("grasp", 40, "can"), ScriptEvent("release", 91, "can")]
        script = SyntheticScript(moves=moves, objects=objects, events=events)
        stream, truth = synthesize_stream(script)
        holding = [f.hand_state.holding for f in stream.frames]
        assert holding[39] is False and holding[40] is True
        assert holding[90] is True and holding[91] is False
        assert truth.holding == holding

    def test_release_before_grasp_rejected(self):
        moves = [LinearMove(0, 20, (0, 0, 0.6), (0.1, 0, 0.6))]
        objects = [ScriptObject("can", (0.05, 0.0, 0.6))]
        events = [ScriptEvent("release", 5, "can"), ScriptEvent("grasp", 10, "can")]
        with pytest.raises(ScriptError, match="release"):
            synthesize_stream(SyntheticScript(moves=moves, objects=objects, events=events))

    def test_discontinuous_moves_rejected(self):
        moves = [
            LinearMove(0, 10, (0, 0, 0.6), (0.1, 0, 0.6)),
            LinearMove(10, 20, (0.2, 0, 0.6), (0.3, 0, 0.6)),
        ]
        with pytest.raises(ScriptError, match="discontinuous"):
            synthesize_stream(SyntheticScript(moves=moves, objects=[]))

    def test_arc_wrist_points_lie_on_circle(self):
        center = (0.0, 0.0, 0.6)
        moves = [
            ArcMove(0, 30, center, 0.2, (0.0, 0.0, 1.0), 0.0, math.pi / 2),
        ]
        script = SyntheticScript(moves=moves, objects=[], emit_skeleton=True)
        stream, truth = synthesize_stream(script)
        for frame in stream.frames:
            wrist = np.array(frame.skeleton.wrist)
            assert np.linalg.norm(wrist - np.array(center)) == pytest.approx(0.2, abs=1e-12)

    def test_synthesized_stream_passes_validation_and_round_trips(self, tmp_path):
        script = pick_and_place_script(seed=7)
        stream, _ = synthesize_stream(script)
        path = tmp_path / "synth.ldjson"
        serialize_stream(stream, path)
        parsed = parse_stream(path)
        assert parsed.frames == stream.frames

    def test_depth_emission_backprojects_to_hand_path(self, tmp_path):
        script = pick_and_place_script(seed=3, emit_skeleton=False, emit_depth=True)
        stream, truth = synthesize_stream(script, out_dir=tmp_path)
        mid = len(stream.frames) // 2
        frame = stream.frames[mid]
        point = hand_point_3d(stream, frame)
        assert point is not None
        # mm depth quantization bounds the reconstruction error
        assert np.linalg.norm(point - truth.hand_points_3d[mid]) < 5e-3

    def test_skeleton_preferred_for_hand_point(self):
        script = pick_and_place_script(seed=5, emit_skeleton=True)
        stream, truth = synthesize_stream(script)
        point = hand_point_3d(stream, stream.frames[10])
        np.testing.assert_allclose(point, truth.hand_points_3d[10], atol=1e-12)
