"""Synthetic detection-stream generator: the grounding oracle.

A script declares the hand trajectory (piecewise linear / circular arcs),
object placements, and exact grasp/release frames; the emitted stream then has
analytically known anchors, grasped-object identity, and affordance geometry.
Streams are constructed so the hand-object distance has its strict minimum at
the scripted event frame (approach closes to contact, the carried box rides at
a small offset, withdrawal opens again), matching how the anchors are defined.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from .streams import (
    Box,
    DetectionFrame,
    HandState,
    Intrinsics,
    ObjectDetection,
    Skeleton,
    Stream,
    StreamHeader,
    save_depth,
    validate_stream,
)


class ScriptError(ValueError):
    """Inconsistent synthetic script (bad tiling, unmatched events, ...)."""


@dataclass(frozen=True)
class LinearMove:
    start_frame: int
    end_frame: int  # inclusive
    start: tuple[float, float, float]
    end: tuple[float, float, float]

    def point_at(self, frame: int) -> np.ndarray:
        if self.end_frame == self.start_frame:
            return np.array(self.start, dtype=float)
        t = (frame - self.start_frame) / (self.end_frame - self.start_frame)
        return (1 - t) * np.array(self.start, dtype=float) + t * np.array(self.end, dtype=float)


@dataclass(frozen=True)
class ArcMove:
    start_frame: int
    end_frame: int
    center: tuple[float, float, float]
    radius: float
    axis: tuple[float, float, float]
    start_angle: float
    sweep: float
    e1: Optional[tuple[float, float, float]] = None

    def basis(self) -> tuple[np.ndarray, np.ndarray]:
        axis = np.array(self.axis, dtype=float)
        axis = axis / np.linalg.norm(axis)
        if self.e1 is not None:
            e1 = np.array(self.e1, dtype=float)
        else:
            ref = np.array([1.0, 0.0, 0.0]) if abs(axis[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
            e1 = ref - (ref @ axis) * axis
        e1 = e1 / np.linalg.norm(e1)
        return e1, np.cross(axis, e1)

    def point_at(self, frame: int) -> np.ndarray:
        e1, e2 = self.basis()
        span = max(1, self.end_frame - self.start_frame)
        theta = self.start_angle + self.sweep * (frame - self.start_frame) / span
        center = np.array(self.center, dtype=float)
        return center + self.radius * (math.cos(theta) * e1 + math.sin(theta) * e2)


Move = Union[LinearMove, ArcMove]


@dataclass(frozen=True)
class ScriptObject:
    label: str
    position: tuple[float, float, float]
    confidence: float = 0.9
    box_px: tuple[float, float] = (40.0, 40.0)


@dataclass(frozen=True)
class ScriptEvent:
    kind: str  # "grasp" | "release"
    frame: int
    label: str
    grasp_type: Optional[str] = None


@dataclass
class SyntheticScript:
    moves: list[Move]
    objects: list[ScriptObject]
    events: list[ScriptEvent] = field(default_factory=list)
    width: int = 640
    height: int = 480
    fps: float = 10.0
    intrinsics: Intrinsics = Intrinsics(fx=600.0, fy=600.0, cx=320.0, cy=240.0)
    hand_box_px: tuple[float, float] = (50.0, 60.0)
    carry_offset_px: tuple[float, float] = (0.0, 8.0)
    emit_skeleton: bool = True
    elbow_to_wrist: tuple[float, float, float] = (0.05, -0.30, 0.02)
    shoulder_to_elbow: tuple[float, float, float] = (0.02, -0.28, 0.06)
    emit_depth: bool = False
    background_depth_m: float = 3.0
    noise_px: float = 0.0
    seed: int = 0

    @property
    def frame_count(self) -> int:
        return self.moves[-1].end_frame + 1 if self.moves else 0


@dataclass
class StreamTruth:
    """Analytic ground truth emitted alongside a synthesized stream."""

    hand_points_3d: np.ndarray  # (frame_count, 3), meters, pre-noise
    hand_pixels: np.ndarray  # (frame_count, 2), pre-noise
    holding: list[bool]
    events: list[ScriptEvent]

    @property
    def grasp_frames(self) -> list[int]:
        return [e.frame for e in self.events if e.kind == "grasp"]

    @property
    def release_frames(self) -> list[int]:
        return [e.frame for e in self.events if e.kind == "release"]

    def grasped_labels(self) -> list[str]:
        return [e.label for e in self.events if e.kind == "grasp"]


def _validate_script(script: SyntheticScript) -> None:
    if not script.moves:
        raise ScriptError("script declares no hand moves")
    moves = script.moves
    if moves[0].start_frame != 0:
        raise ScriptError("hand trajectory must start at frame 0")
    for a, b in zip(moves, moves[1:]):
        if b.start_frame != a.end_frame:
            raise ScriptError(
                f"moves must tile contiguously; got end {a.end_frame} then start {b.start_frame}"
            )
        if np.linalg.norm(a.point_at(a.end_frame) - b.point_at(b.start_frame)) > 1e-9:
            raise ScriptError(f"discontinuous hand position at frame {a.end_frame}")
    for move in moves:
        if move.end_frame < move.start_frame:
            raise ScriptError("move frame range is reversed")
    labels = {o.label for o in script.objects}
    held: Optional[str] = None
    previous_frame = -1
    for event in sorted(script.events, key=lambda e: e.frame):
        if event.label not in labels:
            raise ScriptError(f"event references unknown object {event.label!r}")
        if event.frame <= previous_frame:
            raise ScriptError("events must occur at strictly increasing frames")
        if not 0 <= event.frame < script.frame_count:
            raise ScriptError(f"event frame {event.frame} outside the stream")
        if event.kind == "grasp":
            if held is not None:
                raise ScriptError(f"grasp of {event.label!r} while {held!r} is held")
            held = event.label
        elif event.kind == "release":
            if held is None:
                raise ScriptError(f"release of {event.label!r} before any grasp")
            if event.label != held:
                raise ScriptError(f"release of {event.label!r} while holding {held!r}")
            held = None
        else:
            raise ScriptError(f"unknown event kind {event.kind!r}")
        previous_frame = event.frame


def _hand_point(script: SyntheticScript, frame: int) -> np.ndarray:
    for move in script.moves:
        if move.start_frame <= frame <= move.end_frame:
            return move.point_at(frame)
    raise ScriptError(f"frame {frame} not covered by any move")


def _project(point: np.ndarray, intr: Intrinsics) -> np.ndarray:
    if point[2] <= 0:
        raise ScriptError("hand trajectory passes behind the camera")
    return np.array([intr.fx * point[0] / point[2] + intr.cx, intr.fy * point[1] / point[2] + intr.cy])


def _clamped_box(center: np.ndarray, size: tuple[float, float], width: int, height: int) -> Box:
    w, h = size
    cx = float(np.clip(center[0], w / 2, width - w / 2))
    cy = float(np.clip(center[1], h / 2, height - h / 2))
    return Box(cx=cx, cy=cy, w=w, h=h)


def _holding_intervals(script: SyntheticScript) -> dict[str, list[tuple[int, int]]]:
    """Per-label (grasp_frame, release_frame) spans; open grasps run to stream end."""
    intervals: dict[str, list[tuple[int, int]]] = {}
    open_grasp: Optional[ScriptEvent] = None
    for event in sorted(script.events, key=lambda e: e.frame):
        if event.kind == "grasp":
            open_grasp = event
        else:
            intervals.setdefault(event.label, []).append((open_grasp.frame, event.frame))
            open_grasp = None
    if open_grasp is not None:
        intervals.setdefault(open_grasp.label, []).append((open_grasp.frame, script.frame_count))
    return intervals


def synthesize_stream(
    script: SyntheticScript, out_dir: Optional[Path | str] = None
) -> tuple[Stream, StreamTruth]:
    """Emit a validated stream plus its analytic ground truth.

    With emit_depth, 16-bit millimeter rasters are written under out_dir/depth
    and referenced by relative path, so out_dir becomes the stream base_dir.
    """
    _validate_script(script)
    if script.emit_depth and out_dir is None:
        raise ScriptError("emit_depth requires an output directory for the rasters")
    rng = np.random.default_rng(script.seed)
    intr = script.intrinsics
    n = script.frame_count
    intervals = _holding_intervals(script)
    events = sorted(script.events, key=lambda e: e.frame)

    hand_points = np.array([_hand_point(script, f) for f in range(n)])
    hand_pixels = np.array([_project(p, intr) for p in hand_points])
    holding = [False] * n
    grasp_types: list[Optional[str]] = [None] * n
    for event in events:
        if event.kind != "grasp":
            continue
        spans = [iv for iv in intervals[event.label] if iv[0] == event.frame]
        for start, stop in spans:
            for f in range(start, min(stop, n)):
                holding[f] = True
                grasp_types[f] = event.grasp_type

    # static 2D/3D positions of each object over time, honoring carry spans
    object_pixels: dict[str, np.ndarray] = {}
    object_depths: dict[str, np.ndarray] = {}
    carry = np.array(script.carry_offset_px)
    for obj in script.objects:
        base3d = np.array(obj.position, dtype=float)
        pixels = np.zeros((n, 2))
        depths = np.zeros(n)
        static2d = _project(base3d, intr)
        staticz = base3d[2]
        for f in range(n):
            spans = intervals.get(obj.label, [])
            active = next((iv for iv in spans if iv[0] < f < iv[1]), None)
            boundary = next((iv for iv in spans if f == iv[0] or f == iv[1]), None)
            if active is not None:
                pixels[f] = hand_pixels[f] + carry
                depths[f] = hand_points[f][2]
            elif boundary is not None and f == boundary[1]:
                # set-down moment and thereafter: object rests where the hand released it
                pixels[f] = hand_pixels[f]
                depths[f] = hand_points[f][2]
                static2d = pixels[f].copy()
                staticz = depths[f]
            else:
                pixels[f] = static2d
                depths[f] = staticz
        object_pixels[obj.label] = pixels
        object_depths[obj.label] = depths

    depth_dir = None
    if script.emit_depth:
        depth_dir = Path(out_dir) / "depth"
        depth_dir.mkdir(parents=True, exist_ok=True)

    frames = []
    for f in range(n):
        jitter = rng.normal(0.0, script.noise_px, size=2) if script.noise_px > 0 else np.zeros(2)
        hand_box = _clamped_box(hand_pixels[f] + jitter, script.hand_box_px, script.width, script.height)
        detections = []
        for obj in script.objects:
            jitter_o = rng.normal(0.0, script.noise_px, size=2) if script.noise_px > 0 else np.zeros(2)
            box = _clamped_box(object_pixels[obj.label][f] + jitter_o, obj.box_px, script.width, script.height)
            detections.append(ObjectDetection(label=obj.label, box=box, confidence=obj.confidence))
        skeleton = None
        if script.emit_skeleton:
            wrist = hand_points[f]
            elbow = wrist - np.array(script.elbow_to_wrist)
            shoulder = elbow - np.array(script.shoulder_to_elbow)
            skeleton = Skeleton(shoulder=tuple(shoulder), elbow=tuple(elbow), wrist=tuple(wrist))
        depth_path = None
        if script.emit_depth:
            raster = np.full((script.height, script.width), script.background_depth_m)
            for obj, det in zip(script.objects, detections):
                x0, y0, x1, y1 = det.box.bounds()
                raster[int(y0) : int(math.ceil(y1)), int(x0) : int(math.ceil(x1))] = object_depths[obj.label][f]
            x0, y0, x1, y1 = hand_box.bounds()
            raster[int(y0) : int(math.ceil(y1)), int(x0) : int(math.ceil(x1))] = hand_points[f][2]
            depth_path = f"depth/{f:05d}.png"
            save_depth(Path(out_dir) / depth_path, raster)
        frames.append(
            DetectionFrame(
                frame_index=f,
                timestamp_ms=round(1000.0 * f / script.fps),
                hand_box=hand_box,
                hand_state=HandState(holding=holding[f], grasp_type=grasp_types[f]),
                objects=tuple(detections),
                depth_path=depth_path,
                skeleton=skeleton,
            )
        )
    header = StreamHeader(
        width=script.width,
        height=script.height,
        fps=script.fps,
        frame_count=n,
        intrinsics=intr,
    )
    validate_stream(header, frames)
    stream = Stream(header=header, frames=frames, base_dir=Path(out_dir) if out_dir else None)
    truth = StreamTruth(
        hand_points_3d=hand_points, hand_pixels=hand_pixels, holding=holding, events=events
    )
    return stream, truth


def pick_and_place_script(
    seed: int,
    clip_length: int = 20,
    carry_shape: str = "linear",
    distractors: int = 2,
    noise_px: float = 0.0,
    emit_skeleton: bool = True,
    emit_depth: bool = False,
    target_label: str = "juice",
    grasp_type: str = "power",
) -> SyntheticScript:
    """Randomized grasp-carry-release script whose anchors avoid clip boundaries.

    The activity stays in the left half of the image; distractors sit far right,
    which keeps their mean hand distance well above the target's (>10 px margin).
    """
    rng = np.random.default_rng(seed)
    jitter = lambda: int(rng.integers(-3, 4))
    approach_end = clip_length + clip_length // 2 + jitter()  # mid-clip grasp
    carry_end = approach_end + clip_length + clip_length // 2 + jitter()
    total_end = carry_end + clip_length - 2
    if approach_end % clip_length == 0 or carry_end % clip_length == 0:
        approach_end += 1
        carry_end += 1
        total_end += 1
    if approach_end // clip_length == carry_end // clip_length:
        carry_end += clip_length
        total_end += clip_length

    z = float(rng.uniform(0.55, 0.8))
    target = np.array([rng.uniform(-0.15, -0.05), rng.uniform(-0.05, 0.05), z])
    start = target + np.array([rng.uniform(-0.10, -0.06), rng.uniform(-0.16, -0.10), 0.0])
    drop = target + np.array([rng.uniform(0.04, 0.09), rng.uniform(0.06, 0.12), 0.0])
    away = drop + np.array([rng.uniform(-0.04, 0.04), rng.uniform(-0.14, -0.08), 0.0])

    if carry_shape == "lshape":
        lift = target + np.array([0.0, -0.08, 0.0])
        mid = approach_end + (carry_end - approach_end) // 2
        carry_moves: list[Move] = [
            LinearMove(approach_end, mid, tuple(target), tuple(lift)),
            LinearMove(mid, carry_end, tuple(lift), tuple(drop)),
        ]
    elif carry_shape == "arc":
        chord = drop - target
        center = target + chord / 2 + np.array([0.0, 0.0, 0.0])
        radius = float(np.linalg.norm(chord) / 2)
        e1 = (target - center) / np.linalg.norm(target - center)
        carry_moves = [
            ArcMove(
                approach_end,
                carry_end,
                tuple(center),
                radius,
                (0.0, 0.0, 1.0),
                0.0,
                math.pi,
                e1=tuple(e1),
            )
        ]
    else:
        carry_moves = [LinearMove(approach_end, carry_end, tuple(target), tuple(drop))]

    moves: list[Move] = [LinearMove(0, approach_end, tuple(start), tuple(target))]
    moves.extend(carry_moves)
    moves.append(LinearMove(carry_end, total_end, tuple(carry_moves[-1].point_at(carry_end)), tuple(away)))

    objects = [ScriptObject(label=target_label, position=tuple(target), confidence=0.9)]
    for d in range(distractors):
        pos = np.array([rng.uniform(0.12, 0.22), rng.uniform(-0.12, 0.12), z])
        objects.append(ScriptObject(label=f"distractor_{d}", position=tuple(pos), confidence=0.8))
    events = [
        ScriptEvent("grasp", approach_end, target_label, grasp_type=grasp_type),
        ScriptEvent("release", carry_end, target_label),
    ]
    return SyntheticScript(
        moves=moves,
        objects=objects,
        events=events,
        noise_px=noise_px,
        emit_skeleton=emit_skeleton,
        emit_depth=emit_depth,
        seed=seed,
    )
