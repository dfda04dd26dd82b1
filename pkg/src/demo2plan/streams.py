"""Detection-stream input format: per-frame hand boxes, hand state, object candidates,
optional depth sidecars and skeletons.

Wire format is line-delimited JSON: one header line, then one frame record per
line. Depth lives in 16-bit millimeter PNG sidecars referenced by relative path.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Optional

import numpy as np
from PIL import Image


class FormatError(ValueError):
    def __init__(self, line: int, reason: str):
        super().__init__(f"line {line}: {reason}")
        self.line = line
        self.reason = reason


class InvariantError(ValueError):
    """A structurally well-formed stream that breaks a stream invariant."""


class InvalidDepth(ValueError):
    """Backprojection asked for a non-positive or non-finite depth."""


@dataclass(frozen=True)
class Box:
    cx: float
    cy: float
    w: float
    h: float

    @property
    def center(self) -> np.ndarray:
        return np.array([self.cx, self.cy])

    def bounds(self) -> tuple[float, float, float, float]:
        return (self.cx - self.w / 2, self.cy - self.h / 2, self.cx + self.w / 2, self.cy + self.h / 2)


@dataclass(frozen=True)
class HandState:
    holding: bool
    grasp_type: Optional[str] = None


@dataclass(frozen=True)
class ObjectDetection:
    label: str
    box: Box
    confidence: float


@dataclass(frozen=True)
class Skeleton:
    shoulder: tuple[float, float, float]
    elbow: tuple[float, float, float]
    wrist: tuple[float, float, float]


@dataclass(frozen=True)
class Intrinsics:
    fx: float
    fy: float
    cx: float
    cy: float


@dataclass(frozen=True)
class DetectionFrame:
    frame_index: int
    timestamp_ms: int
    hand_box: Optional[Box] = None
    hand_state: Optional[HandState] = None
    objects: tuple[ObjectDetection, ...] = ()
    depth_path: Optional[str] = None
    skeleton: Optional[Skeleton] = None


@dataclass(frozen=True)
class StreamHeader:
    width: int
    height: int
    fps: float
    frame_count: int
    intrinsics: Optional[Intrinsics] = None


@dataclass
class Stream:
    """A validated detection stream; frames immutable and index-addressable."""

    header: StreamHeader
    frames: list[DetectionFrame]
    base_dir: Optional[Path] = None
    _by_index: dict[int, DetectionFrame] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        self._by_index = {f.frame_index: f for f in self.frames}

    def get(self, frame_index: int) -> Optional[DetectionFrame]:
        return self._by_index.get(frame_index)

    def __len__(self) -> int:
        return len(self.frames)

    def depth_map(self, frame: DetectionFrame) -> Optional[np.ndarray]:
        if frame.depth_path is None:
            return None
        path = Path(frame.depth_path)
        if not path.is_absolute() and self.base_dir is not None:
            path = self.base_dir / path
        return load_depth(path)


def load_depth(path: Path | str) -> np.ndarray:
    """Read a 16-bit millimeter raster into a float array of meters (0 = hole)."""
    with Image.open(path) as img:
        raw = np.asarray(img, dtype=np.uint16)
    return raw.astype(np.float64) / 1000.0


def save_depth(path: Path | str, meters: np.ndarray) -> None:
    mm = np.clip(np.round(meters * 1000.0), 0, 65535).astype(np.uint16)
    Image.fromarray(mm).save(path)


def backproject(u: float, v: float, z: float, intrinsics: Intrinsics) -> np.ndarray:
    """Pinhole backprojection of pixel (u, v) at depth z meters into the camera frame."""
    if not math.isfinite(z) or z <= 0.0:
        raise InvalidDepth(f"depth must be positive and finite, got {z!r}")
    x = (u - intrinsics.cx) * z / intrinsics.fx
    y = (v - intrinsics.cy) * z / intrinsics.fy
    return np.array([x, y, z])


def median_box_depth(depth: np.ndarray, box: Box) -> Optional[float]:
    """Median of valid (positive) depths inside a box; robust to depth holes."""
    h, w = depth.shape
    x0, y0, x1, y1 = box.bounds()
    x0, y0 = max(0, int(math.floor(x0))), max(0, int(math.floor(y0)))
    x1, y1 = min(w, int(math.ceil(x1))), min(h, int(math.ceil(y1)))
    if x1 <= x0 or y1 <= y0:
        return None
    window = depth[y0:y1, x0:x1]
    valid = window[window > 0.0]
    if valid.size == 0:
        return None
    return float(np.median(valid))


def hand_point_2d(frame: DetectionFrame) -> Optional[np.ndarray]:
    return frame.hand_box.center if frame.hand_box is not None else None


def hand_point_3d(stream: Stream, frame: DetectionFrame) -> Optional[np.ndarray]:
    """3D hand position in meters: skeleton wrist when present, else the hand box
    center backprojected at the median depth inside the box."""
    if frame.skeleton is not None:
        return np.array(frame.skeleton.wrist, dtype=float)
    if frame.hand_box is None or stream.header.intrinsics is None:
        return None
    depth = stream.depth_map(frame)
    if depth is None:
        return None
    z = median_box_depth(depth, frame.hand_box)
    if z is None:
        return None
    return backproject(frame.hand_box.cx, frame.hand_box.cy, z, stream.header.intrinsics)


def object_point_3d(stream: Stream, frame: DetectionFrame, detection: ObjectDetection) -> Optional[np.ndarray]:
    if stream.header.intrinsics is None:
        return None
    depth = stream.depth_map(frame)
    if depth is None:
        return None
    z = median_box_depth(depth, detection.box)
    if z is None:
        return None
    return backproject(detection.box.cx, detection.box.cy, z, stream.header.intrinsics)


def _box_from_json(raw: dict) -> Box:
    return Box(cx=float(raw["cx"]), cy=float(raw["cy"]), w=float(raw["w"]), h=float(raw["h"]))


def _frame_from_json(raw: dict) -> DetectionFrame:
    hand_box = _box_from_json(raw["hand_box"]) if raw.get("hand_box") else None
    hand_state = None
    if raw.get("hand_state") is not None:
        hs = raw["hand_state"]
        hand_state = HandState(holding=bool(hs["holding"]), grasp_type=hs.get("grasp_type"))
    objects = tuple(
        ObjectDetection(label=o["label"], box=_box_from_json(o["box"]), confidence=float(o["confidence"]))
        for o in raw.get("objects", [])
    )
    skeleton = None
    if raw.get("skeleton") is not None:
        sk = raw["skeleton"]
        skeleton = Skeleton(
            shoulder=tuple(float(x) for x in sk["shoulder"]),
            elbow=tuple(float(x) for x in sk["elbow"]),
            wrist=tuple(float(x) for x in sk["wrist"]),
        )
    return DetectionFrame(
        frame_index=int(raw["frame_index"]),
        timestamp_ms=int(raw["timestamp_ms"]),
        hand_box=hand_box,
        hand_state=hand_state,
        objects=objects,
        depth_path=raw.get("depth_path"),
        skeleton=skeleton,
    )


def _check_box_bounds(box: Box, header: StreamHeader, line: int, owner: str) -> None:
    x0, y0, x1, y1 = box.bounds()
    eps = 1e-6
    if x0 < -eps or y0 < -eps or x1 > header.width + eps or y1 > header.height + eps:
        raise InvariantError(
            f"line {line}: {owner} box ({x0:.1f},{y0:.1f})-({x1:.1f},{y1:.1f}) "
            f"exceeds image bounds {header.width}x{header.height}"
        )


def validate_stream(header: StreamHeader, frames: Iterable[DetectionFrame], start_line: int = 2) -> None:
    """Enforce stream invariants; raises InvariantError with the offending line."""
    if header.fps <= 0:
        raise InvariantError("fps must be positive")
    if header.frame_count < 1:
        raise InvariantError("frame_count must be at least 1")
    previous = None
    any_depth = False
    for offset, frame in enumerate(frames):
        line = start_line + offset
        if previous is not None and frame.frame_index <= previous:
            raise InvariantError(
                f"line {line}: frame_index {frame.frame_index} not strictly increasing (previous {previous})"
            )
        previous = frame.frame_index
        if frame.frame_index < 0 or frame.frame_index >= header.frame_count:
            raise InvariantError(
                f"line {line}: frame_index {frame.frame_index} outside declared frame_count {header.frame_count}"
            )
        if frame.hand_box is not None:
            _check_box_bounds(frame.hand_box, header, line, "hand")
        for det in frame.objects:
            _check_box_bounds(det.box, header, line, f"object {det.label!r}")
            if not 0.0 <= det.confidence <= 1.0:
                raise InvariantError(f"line {line}: confidence {det.confidence} outside [0, 1]")
        any_depth = any_depth or frame.depth_path is not None
    if any_depth and header.intrinsics is None:
        raise InvariantError("frames carry depth but the header declares no intrinsics")


def parse_stream(path: Path | str) -> Stream:
    """Parse and validate a line-delimited JSON detection stream."""
    path = Path(path)
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines:
        raise FormatError(1, "empty stream file")
    try:
        head_raw = json.loads(lines[0])
    except json.JSONDecodeError as err:
        raise FormatError(1, f"invalid JSON: {err}") from err
    if head_raw.get("type") != "header":
        raise FormatError(1, "first line must be the stream header")
    try:
        intrinsics = None
        if head_raw.get("intrinsics") is not None:
            intr = head_raw["intrinsics"]
            intrinsics = Intrinsics(fx=float(intr["fx"]), fy=float(intr["fy"]), cx=float(intr["cx"]), cy=float(intr["cy"]))
        header = StreamHeader(
            width=int(head_raw["width"]),
            height=int(head_raw["height"]),
            fps=float(head_raw["fps"]),
            frame_count=int(head_raw["frame_count"]),
            intrinsics=intrinsics,
        )
    except (KeyError, TypeError, ValueError) as err:
        raise FormatError(1, f"malformed header: {err}") from err
    frames = []
    for number, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            raw = json.loads(line)
        except json.JSONDecodeError as err:
            raise FormatError(number, f"invalid JSON: {err}") from err
        if raw.get("type") != "frame":
            raise FormatError(number, f"expected a frame record, got type={raw.get('type')!r}")
        try:
            frames.append(_frame_from_json(raw))
        except (KeyError, TypeError, ValueError) as err:
            raise FormatError(number, f"malformed frame: {err}") from err
    validate_stream(header, frames)
    return Stream(header=header, frames=frames, base_dir=path.parent)


def _strip_nones(obj):
    if isinstance(obj, dict):
        return {k: _strip_nones(v) for k, v in obj.items() if v is not None}
    if isinstance(obj, (list, tuple)):
        return [_strip_nones(v) for v in obj]
    return obj


def serialize_stream(stream: Stream, path: Path | str) -> None:
    """Write the bit-exact LDJSON stream format; round-trips through parse_stream."""
    path = Path(path)
    records = [{"type": "header", **_strip_nones(asdict(stream.header))}]
    for frame in stream.frames:
        records.append({"type": "frame", **_strip_nones(asdict(frame))})
    text = "\n".join(json.dumps(r, sort_keys=True) for r in records) + "\n"
    path.write_text(text, encoding="utf-8")
