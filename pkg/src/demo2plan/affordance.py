"""Affordance extraction from grounded video segments.

Once anchors align the plan with the video, each task mines its own geometry:
approach/withdrawal/departure directions, collision-avoiding waypoints,
rotation axis/center/angle, slide displacement, surface normals, and
discretized upper-arm/forearm postures.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .config import PipelineConfig
from .geometry import (
    DegenerateGeometry,
    ZeroVector,
    fit_rotation_from_points,
    principal_extent,
    quantize_direction,
    rdp_indices,
    surface_normal_from_points,
)
from .grounding import (
    AnchorEvent,
    ClipKind,
    ClipSegment,
    StepAlignment,
    _hand_track,
    align_anchors,
    classify_clips,
    identify_grasped_object,
    locate_anchor,
    segment_clips,
)
from .serialization import canonical_dumps
from .streams import Stream
from .task_model import ActionKind, TaskStep


class InsufficientTrajectory(ValueError):
    pass


@dataclass(frozen=True)
class PostureSample:
    frame_index: int
    upper_arm: Optional[tuple[float, float, float]]
    forearm: Optional[tuple[float, float, float]]


@dataclass
class AffordanceRecord:
    """Task-variant payload keyed by what the action needs downstream."""

    kind: str  # action name
    payload: dict
    postures: list[PostureSample] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            **self.payload,
            "postures": [
                {
                    "frame_index": p.frame_index,
                    "upper_arm": list(p.upper_arm) if p.upper_arm else None,
                    "forearm": list(p.forearm) if p.forearm else None,
                }
                for p in self.postures
            ],
            "warnings": list(self.warnings),
        }


def extract_direction(
    stream: Stream,
    anchor_frame: int,
    window: int,
    side: str,
    quantizer: str = "d26",
) -> np.ndarray:
    """Quantized mean motion direction of the hand in the window before/after an anchor."""
    if side == "before":
        start, end = anchor_frame - window, anchor_frame
    elif side == "after":
        start, end = anchor_frame, anchor_frame + window
    else:
        raise ValueError(f"side must be 'before' or 'after', got {side!r}")
    frames, points = _hand_track(stream, start, end)
    if len(points) < 2:
        raise InsufficientTrajectory(
            f"only {len(points)} hand observation(s) in the {side}-window of frame {anchor_frame}"
        )
    displacement = points[-1] - points[0]
    try:
        return quantize_direction(displacement, quantizer)
    except ZeroVector as err:
        raise InsufficientTrajectory(f"hand shows no net motion {side} frame {anchor_frame}") from err


def extract_waypoints(
    stream: Stream, segment: tuple[int, int], epsilon: float
) -> tuple[list[int], np.ndarray]:
    """Hand trajectory simplified by RDP; returns (frame indices, points), endpoints kept."""
    frames, points = _hand_track(stream, segment[0], segment[1])
    if len(points) < 2:
        raise InsufficientTrajectory(f"fewer than 2 hand observations in segment {segment}")
    kept = rdp_indices(points, epsilon)
    return [frames[i] for i in kept], points[kept]


def fit_rotation(stream: Stream, segment: tuple[int, int], min_radius: float = 1e-3):
    """Rotation axis/center/angle from the hand path over the segment."""
    frames, points = _hand_track(stream, segment[0], segment[1])
    if len(points) < 3:
        raise InsufficientTrajectory(f"rotation fit needs at least 3 hand observations in {segment}")
    return fit_rotation_from_points(points, min_radius=min_radius)


def extract_slide(stream: Stream, segment: tuple[int, int]) -> tuple[np.ndarray, float, list[str]]:
    """Net displacement over the segment plus travel along the first principal component."""
    frames, points = _hand_track(stream, segment[0], segment[1])
    if len(points) < 2:
        raise InsufficientTrajectory(f"fewer than 2 hand observations in segment {segment}")
    displacement = points[-1] - points[0]
    warnings = []
    if not np.any(np.abs(displacement) > 0):
        warnings.append(f"zero net slide displacement over segment {segment}")
    return displacement, principal_extent(points), warnings


def extract_surface_normal(
    stream: Stream, segment: tuple[int, int], quantizer: str = "d26"
) -> tuple[np.ndarray, np.ndarray]:
    """Unit normal of the wiped surface (toward the camera) and its quantized variant."""
    frames, points = _hand_track(stream, segment[0], segment[1])
    if len(points) < 3:
        raise InsufficientTrajectory(f"surface fit needs at least 3 hand observations in {segment}")
    normal = surface_normal_from_points(points)
    return normal, quantize_direction(normal, quantizer)


def encode_posture(
    stream: Stream, frame_index: int, window: int = 5, quantizer: str = "d26"
) -> tuple[Optional[PostureSample], list[str]]:
    """Quantized upper-arm and forearm vectors at (or near) a frame.

    Missing skeletons and degenerate joints are omissions with warnings, never
    errors: postures are optional constraints.
    """
    frame = None
    for offset in range(window + 1):
        for candidate in (frame_index - offset, frame_index + offset):
            got = stream.get(candidate)
            if got is not None and got.skeleton is not None:
                frame = got
                break
        if frame is not None:
            break
    if frame is None:
        return None, [f"no skeleton within {window} frames of frame {frame_index}"]
    sk = frame.skeleton
    warnings = []
    upper_arm = forearm = None
    try:
        upper_arm = tuple(quantize_direction(np.array(sk.elbow) - np.array(sk.shoulder), quantizer))
    except ZeroVector:
        warnings.append(f"degenerate shoulder/elbow at frame {frame.frame_index}")
    try:
        forearm = tuple(quantize_direction(np.array(sk.wrist) - np.array(sk.elbow), quantizer))
    except ZeroVector:
        warnings.append(f"degenerate elbow/wrist at frame {frame.frame_index}")
    return PostureSample(frame.frame_index, upper_arm, forearm), warnings


@dataclass
class GroundingResult:
    clips: list[ClipSegment]
    anchors: list[AnchorEvent]
    alignments: list[StepAlignment]
    records: dict[int, AffordanceRecord]
    warnings: list[str] = field(default_factory=list)


def _grasp_type_for(
    stream: Stream, clip: Optional[ClipSegment], anchor: AnchorEvent, default: str
) -> str:
    start = clip.start_frame if clip else anchor.frame_index
    end = clip.end_frame if clip else anchor.frame_index
    for frame in stream.frames:
        if start <= frame.frame_index <= end:
            if frame.hand_state is not None and frame.hand_state.grasp_type:
                return frame.hand_state.grasp_type
    return default


def _posture_at(
    stream: Stream, frame_indices: Sequence[int], config: PipelineConfig
) -> tuple[list[PostureSample], list[str]]:
    samples, warnings = [], []
    for index in frame_indices:
        sample, warns = encode_posture(stream, index, config.posture_window, config.quantizer)
        warnings.extend(warns)
        if sample is not None:
            samples.append(sample)
    return samples, warnings


def _vec(v) -> list[float]:
    return [float(x) for x in v]


def _need_anchor(alignment: StepAlignment) -> AnchorEvent:
    if alignment.anchor is None:
        raise InsufficientTrajectory(f"step {alignment.step_index} has no aligned anchor")
    return alignment.anchor


def _need_segment(alignment: StepAlignment) -> tuple[int, int]:
    if alignment.segment is None:
        raise InsufficientTrajectory(f"step {alignment.step_index} has no aligned video segment")
    return alignment.segment


def extract_step_affordance(
    stream: Stream,
    alignment: StepAlignment,
    clip_by_anchor: dict[int, ClipSegment],
    config: PipelineConfig,
) -> AffordanceRecord:
    """Dispatch on the action kind; failures degrade to an 'unavailable' payload."""
    step = alignment.step
    kind = step.action
    record = AffordanceRecord(kind=kind.value, payload={})
    posture_frames: list[int] = []
    try:
        if kind is ActionKind.GRAB:
            anchor = _need_anchor(alignment)
            direction = extract_direction(
                stream, anchor.frame_index, config.direction_window, "before", config.quantizer
            )
            clip = clip_by_anchor.get(anchor.frame_index)
            record.payload = {
                "approach_direction": _vec(direction),
                "grasp_type": _grasp_type_for(stream, clip, anchor, config.default_grasp_type),
            }
            posture_frames = [anchor.frame_index]
        elif kind is ActionKind.RELEASE:
            anchor = _need_anchor(alignment)
            direction = extract_direction(
                stream, anchor.frame_index, config.direction_window, "after", config.quantizer
            )
            record.payload = {"withdrawal_direction": _vec(direction)}
            posture_frames = [anchor.frame_index]
        elif kind is ActionKind.PICK_UP:
            anchor = _need_anchor(alignment)
            direction = extract_direction(
                stream, anchor.frame_index, config.direction_window, "after", config.quantizer
            )
            record.payload = {"departure_direction": _vec(direction)}
            posture_frames = [anchor.frame_index]
        elif kind is ActionKind.PUT:
            anchor = _need_anchor(alignment)
            direction = extract_direction(
                stream, anchor.frame_index, config.direction_window, "before", config.quantizer
            )
            record.payload = {"approach_direction": _vec(direction)}
            posture_frames = [anchor.frame_index]
        elif kind is ActionKind.MOVE_HAND:
            frames, points = extract_waypoints(stream, _need_segment(alignment), config.rdp_epsilon)
            record.payload = {
                "waypoints": [_vec(p) for p in points],
                "waypoint_frames": list(frames),
            }
            posture_frames = list(frames)
        elif kind is ActionKind.ROTATE:
            fit = fit_rotation(stream, _need_segment(alignment), config.min_rotation_radius)
            record.payload = {
                "axis": _vec(fit.axis),
                "center": _vec(fit.center),
                "angle": float(fit.angle),
                "radius": float(fit.radius),
            }
            posture_frames = list(alignment.segment)
        elif kind is ActionKind.SLIDE:
            displacement, extent, warnings = extract_slide(stream, _need_segment(alignment))
            record.payload = {
                "displacement": _vec(displacement),
                "principal_extent": float(extent),
            }
            record.warnings.extend(warnings)
            posture_frames = list(alignment.segment)
        elif kind is ActionKind.MOVE_ON_SURFACE:
            normal, quantized = extract_surface_normal(stream, _need_segment(alignment), config.quantizer)
            record.payload = {
                "surface_normal": _vec(normal),
                "surface_normal_quantized": _vec(quantized),
            }
            posture_frames = list(alignment.segment)
    except (InsufficientTrajectory, DegenerateGeometry) as err:
        reason = str(err) or err.__class__.__name__
        record.payload = {"unavailable": reason}
        record.warnings.append(f"{kind.value} affordance unavailable: {reason}")
        return record
    samples, warnings = _posture_at(stream, posture_frames, config)
    record.postures = samples
    record.warnings.extend(warnings)
    return record


def analyze_stream(
    stream: Stream, steps: Sequence[TaskStep], config: Optional[PipelineConfig] = None
) -> GroundingResult:
    """Full grounding pass: clips, anchors, plan alignment, per-step affordances."""
    config = config or PipelineConfig()
    clip_length = max(2, round(stream.header.fps * config.clip_length_s))
    clips = classify_clips(stream, segment_clips(stream, clip_length))
    grab_labels = [s.args[0] for s in steps if s.action is ActionKind.GRAB]
    warnings: list[str] = []
    anchors: list[AnchorEvent] = []
    clip_by_anchor: dict[int, ClipSegment] = {}
    held_label: Optional[str] = None
    grasp_count = 0
    for clip in clips:
        if clip.kind is ClipKind.GRASP:
            label = identify_grasped_object(clip, stream, grab_labels or [held_label or ""])
            if grasp_count < len(grab_labels):
                expected = grab_labels[grasp_count]
                if label.casefold() != expected.casefold():
                    warnings.append(
                        f"grasp clip [{clip.start_frame}, {clip.end_frame}] identified "
                        f"{label!r} but the plan grabs {expected!r}"
                    )
            anchor = locate_anchor(clip, stream, label)
            anchors.append(anchor)
            clip_by_anchor[anchor.frame_index] = clip
            held_label = label
            grasp_count += 1
        elif clip.kind is ClipKind.RELEASE and held_label is not None:
            anchor = locate_anchor(clip, stream, held_label)
            anchors.append(anchor)
            clip_by_anchor[anchor.frame_index] = clip
            held_label = None
    alignments = align_anchors(
        anchors, steps, stream, config.pickup_arc_share, config.put_arc_share
    )
    records = {
        a.step_index: extract_step_affordance(stream, a, clip_by_anchor, config)
        for a in alignments
    }
    for record in records.values():
        warnings.extend(record.warnings)
    return GroundingResult(
        clips=clips, anchors=anchors, alignments=alignments, records=records, warnings=warnings
    )


def report_dict(result: GroundingResult) -> dict:
    return {
        "clips": [
            {"start_frame": c.start_frame, "end_frame": c.end_frame, "kind": c.kind.value}
            for c in result.clips
        ],
        "anchors": [
            {
                "kind": a.kind,
                "frame_index": a.frame_index,
                "object_label": a.object_label,
                "hand_position_2d": _vec(a.hand_position_2d),
                "object_position_2d": _vec(a.object_position_2d),
                "hand_position_3d": _vec(a.hand_position_3d) if a.hand_position_3d else None,
                "object_position_3d": _vec(a.object_position_3d) if a.object_position_3d else None,
            }
            for a in result.anchors
        ],
        "alignments": [
            {
                "step_index": al.step_index,
                "action": al.step.action.value,
                "args": list(al.step.args),
                "anchor_frame": al.anchor.frame_index if al.anchor else None,
                "segment": list(al.segment) if al.segment else None,
            }
            for al in result.alignments
        ],
        "affordances": {
            str(index): record.to_dict() for index, record in sorted(result.records.items())
        },
        "warnings": list(result.warnings),
    }


def write_report(result: GroundingResult, path: Path | str) -> None:
    Path(path).write_text(canonical_dumps(report_dict(result)), encoding="utf-8")


def records_from_report(report: dict) -> dict[int, AffordanceRecord]:
    """Rebuild per-step affordance records from a persisted anchors report."""
    records = {}
    for key, raw in report.get("affordances", {}).items():
        payload = {
            k: v for k, v in raw.items() if k not in ("kind", "postures", "warnings")
        }
        postures = [
            PostureSample(
                frame_index=p["frame_index"],
                upper_arm=tuple(p["upper_arm"]) if p.get("upper_arm") else None,
                forearm=tuple(p["forearm"]) if p.get("forearm") else None,
            )
            for p in raw.get("postures", [])
        ]
        records[int(key)] = AffordanceRecord(
            kind=raw["kind"], payload=payload, postures=postures, warnings=list(raw.get("warnings", []))
        )
    return records
