"""Spatiotemporal grounding: clip segmentation, grasp/release classification,
grasped-object identification by hand proximity, anchor localization, and
anchor-to-plan alignment.

GPT models play no part here: everything works off the detection stream.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from .errors import InvalidArgument
from .geometry import arc_length
from .streams import DetectionFrame, Stream, hand_point_3d, object_point_3d
from .task_model import ActionKind, TaskStep, canonical_name


class GroundingError(Exception):
    pass


class NoCandidateDetected(GroundingError):
    def __init__(self, labels: Sequence[str], clip: "ClipSegment"):
        super().__init__(
            f"none of {list(labels)} detected in clip [{clip.start_frame}, {clip.end_frame}]"
        )
        self.labels = list(labels)


class AnchorCountMismatch(GroundingError):
    def __init__(self, expected_grasps: int, found_grasps: int, expected_releases: int, found_releases: int):
        super().__init__(
            f"plan expects {expected_grasps} grasp / {expected_releases} release anchors, "
            f"video grounding found {found_grasps} / {found_releases}"
        )
        self.expected_grasps = expected_grasps
        self.found = found_grasps
        self.expected_releases = expected_releases
        self.found_releases = found_releases


class AnchorSequenceError(GroundingError):
    """Anchors that do not alternate grasp/release starting with a grasp."""


class ClipKind(Enum):
    GRASP = "Grasp"
    RELEASE = "Release"
    OTHER = "Other"


@dataclass(frozen=True)
class ClipSegment:
    start_frame: int
    end_frame: int  # inclusive
    kind: Optional[ClipKind] = None


@dataclass(frozen=True)
class AnchorEvent:
    kind: str  # "grasp" | "release"
    frame_index: int
    object_label: str
    hand_position_2d: tuple[float, float]
    object_position_2d: tuple[float, float]
    hand_position_3d: Optional[tuple[float, float, float]] = None
    object_position_3d: Optional[tuple[float, float, float]] = None


def segment_clips(stream: Stream, clip_length_frames: int) -> list[ClipSegment]:
    """Tile the stream into equal-length clips; the final clip may run short."""
    if clip_length_frames < 2:
        raise InvalidArgument(
            f"clip_length_frames must be at least 2 to compare first and last frames, got {clip_length_frames}"
        )
    frames = stream.frames
    clips = []
    for start in range(0, len(frames), clip_length_frames):
        chunk = frames[start : start + clip_length_frames]
        clips.append(ClipSegment(start_frame=chunk[0].frame_index, end_frame=chunk[-1].frame_index))
    return clips


def _clip_frames(stream: Stream, clip: ClipSegment) -> list[DetectionFrame]:
    return [f for f in stream.frames if clip.start_frame <= f.frame_index <= clip.end_frame]


def _holding_at_end(frames: list[DetectionFrame], from_start: bool) -> Optional[bool]:
    ordered = frames if from_start else list(reversed(frames))
    for frame in ordered:
        if frame.hand_state is not None:
            return frame.hand_state.holding
    return None


def classify_clip(clip: ClipSegment, stream: Stream) -> ClipKind:
    """Grasp: empty hand at the first frame, holding at the last. Release: the reverse.

    Frames without a hand-state reading defer to the nearest informative frame
    inside the clip; a clip with no reading at all is Other.
    """
    frames = _clip_frames(stream, clip)
    first = _holding_at_end(frames, from_start=True)
    last = _holding_at_end(frames, from_start=False)
    if first is None or last is None:
        return ClipKind.OTHER
    if not first and last:
        return ClipKind.GRASP
    if first and not last:
        return ClipKind.RELEASE
    return ClipKind.OTHER


def classify_clips(stream: Stream, clips: Sequence[ClipSegment]) -> list[ClipSegment]:
    return [
        ClipSegment(c.start_frame, c.end_frame, kind=classify_clip(c, stream)) for c in clips
    ]


def _closest_detection(frame: DetectionFrame, label: str):
    """Closest same-label detection to the hand in one frame, or None."""
    if frame.hand_box is None:
        return None
    key = canonical_name(label)
    candidates = [d for d in frame.objects if canonical_name(d.label) == key]
    if not candidates:
        return None
    hand = frame.hand_box.center
    return min(candidates, key=lambda d: float(np.linalg.norm(d.box.center - hand)))


def identify_grasped_object(
    clip: ClipSegment, stream: Stream, candidate_labels: Sequence[str]
) -> str:
    """The candidate with minimal mean hand distance over co-detected clip frames.

    The mean (not the minimum) is used so one jittery detection cannot steal
    the match. Ties break to higher mean confidence, then lexicographic label.
    """
    frames = _clip_frames(stream, clip)
    scores = []
    for label in candidate_labels:
        distances, confidences = [], []
        for frame in frames:
            det = _closest_detection(frame, label)
            if det is None:
                continue
            distances.append(float(np.linalg.norm(det.box.center - frame.hand_box.center)))
            confidences.append(det.confidence)
        if distances:
            scores.append((float(np.mean(distances)), -float(np.mean(confidences)), label.casefold(), label))
    if not scores:
        raise NoCandidateDetected(candidate_labels, clip)
    return min(scores)[3]


def locate_anchor(clip: ClipSegment, stream: Stream, object_label: str) -> AnchorEvent:
    """The moment of grasping/releasing: the clip frame where hand and object
    are spatially closest (earliest frame wins ties)."""
    if clip.kind not in (ClipKind.GRASP, ClipKind.RELEASE):
        raise InvalidArgument(f"anchors exist only in Grasp/Release clips, got {clip.kind}")
    best = None
    for frame in _clip_frames(stream, clip):
        det = _closest_detection(frame, object_label)
        if det is None:
            continue
        distance = float(np.linalg.norm(det.box.center - frame.hand_box.center))
        if best is None or distance < best[0]:
            best = (distance, frame, det)
    if best is None:
        raise NoCandidateDetected([object_label], clip)
    _, frame, det = best
    hand3d = hand_point_3d(stream, frame)
    obj3d = object_point_3d(stream, frame, det)
    return AnchorEvent(
        kind="grasp" if clip.kind is ClipKind.GRASP else "release",
        frame_index=frame.frame_index,
        object_label=det.label,
        hand_position_2d=tuple(frame.hand_box.center),
        object_position_2d=tuple(det.box.center),
        hand_position_3d=tuple(hand3d) if hand3d is not None else None,
        object_position_3d=tuple(obj3d) if obj3d is not None else None,
    )


@dataclass(frozen=True)
class StepAlignment:
    step_index: int
    step: TaskStep
    anchor: Optional[AnchorEvent] = None
    segment: Optional[tuple[int, int]] = None  # inclusive frame range


def _hand_track(stream: Stream, start_frame: int, end_frame: int) -> tuple[list[int], np.ndarray]:
    """Hand positions over a frame range: 3D meters when available, else 2D pixels.

    Sources are never mixed: a range where some frames lack 3D falls back to the
    frames that have it, and only fully-2D ranges use pixel coordinates.
    """
    frames3d, points3d, frames2d, points2d = [], [], [], []
    for frame in stream.frames:
        if not start_frame <= frame.frame_index <= end_frame:
            continue
        p3 = hand_point_3d(stream, frame)
        if p3 is not None:
            frames3d.append(frame.frame_index)
            points3d.append(p3)
        if frame.hand_box is not None:
            frames2d.append(frame.frame_index)
            points2d.append(np.array([frame.hand_box.cx, frame.hand_box.cy, 0.0]))
    if len(points3d) >= 2:
        return frames3d, np.array(points3d)
    if len(points2d) >= 2:
        return frames2d, np.array(points2d)
    return (frames3d or frames2d), np.array(points3d or points2d).reshape(-1, 3)


def _partition_weights(steps: Sequence[TaskStep], pickup_share: float, put_share: float) -> list[float]:
    raw = []
    for step in steps:
        if step.action is ActionKind.PICK_UP:
            raw.append(pickup_share)
        elif step.action is ActionKind.PUT:
            raw.append(put_share)
        else:
            raw.append(-1.0)  # placeholder for an equal split of the remainder
    anchored = sum(w for w in raw if w > 0)
    free = sum(1 for w in raw if w < 0)
    if free:
        remainder = max(0.0, 1.0 - anchored) / free
        raw = [remainder if w < 0 else w for w in raw]
    total = sum(raw)
    return [w / total for w in raw] if total > 0 else [1.0 / len(raw)] * len(raw)


def _partition_by_arc_length(
    stream: Stream, start_frame: int, end_frame: int, weights: Sequence[float]
) -> list[tuple[int, int]]:
    """Split a frame interval into per-step ranges proportional to hand travel."""
    frames, points = _hand_track(stream, start_frame, end_frame)
    if len(frames) < 2:
        # no usable trajectory: split uniformly by frame count
        edges = np.linspace(start_frame, end_frame, len(weights) + 1)
        return [(int(round(a)), int(round(b))) for a, b in zip(edges, edges[1:])]
    lengths = arc_length(points)
    total = lengths[-1]
    if total <= 0.0:
        edges = np.linspace(start_frame, end_frame, len(weights) + 1)
        return [(int(round(a)), int(round(b))) for a, b in zip(edges, edges[1:])]
    targets = np.cumsum(weights) * total
    boundaries = [start_frame]
    for target in targets[:-1]:
        idx = int(np.searchsorted(lengths, target))
        idx = min(idx, len(frames) - 1)
        boundaries.append(frames[idx])
    boundaries.append(end_frame)
    return [(a, b) for a, b in zip(boundaries, boundaries[1:])]


def align_anchors(
    anchors: Sequence[AnchorEvent],
    steps: Sequence[TaskStep],
    stream: Stream,
    pickup_share: float = 0.10,
    put_share: float = 0.10,
) -> list[StepAlignment]:
    """Pair the k-th grasp/release anchor with the k-th Grab/Release step and
    hand out the inter-anchor video to the steps in between by arc length."""
    ordered = sorted(anchors, key=lambda a: a.frame_index)
    expected = "grasp"
    for anchor in ordered:
        if anchor.kind != expected:
            raise AnchorSequenceError(
                f"anchor at frame {anchor.frame_index} is a {anchor.kind}, expected {expected}"
            )
        expected = "release" if expected == "grasp" else "grasp"
    grasps = [a for a in ordered if a.kind == "grasp"]
    releases = [a for a in ordered if a.kind == "release"]
    grab_indices = [i for i, s in enumerate(steps) if s.action is ActionKind.GRAB]
    release_indices = [i for i, s in enumerate(steps) if s.action is ActionKind.RELEASE]
    if len(grasps) != len(grab_indices) or len(releases) != len(release_indices):
        raise AnchorCountMismatch(
            len(grab_indices), len(grasps), len(release_indices), len(releases)
        )

    anchor_by_step: dict[int, AnchorEvent] = {}
    anchor_by_step.update(zip(grab_indices, grasps))
    anchor_by_step.update(zip(release_indices, releases))

    first_frame = stream.frames[0].frame_index if stream.frames else 0
    last_frame = stream.frames[-1].frame_index if stream.frames else 0
    alignments: dict[int, StepAlignment] = {
        i: StepAlignment(i, steps[i], anchor=a) for i, a in anchor_by_step.items()
    }

    # contiguous runs of unanchored steps between pinned plan positions
    pin_positions = [-1] + sorted(anchor_by_step) + [len(steps)]
    for left, right in zip(pin_positions, pin_positions[1:]):
        gap = [i for i in range(left + 1, right) if i not in anchor_by_step]
        if not gap:
            continue
        start = anchor_by_step[left].frame_index if left >= 0 else first_frame
        end = anchor_by_step[right].frame_index if right < len(steps) else last_frame
        weights = _partition_weights([steps[i] for i in gap], pickup_share, put_share)
        ranges = _partition_by_arc_length(stream, start, end, weights)
        grasp_context = anchor_by_step.get(left) if left >= 0 else None
        release_context = anchor_by_step.get(right) if right < len(steps) else None
        for i, frame_range in zip(gap, ranges):
            context = None
            if steps[i].action is ActionKind.PICK_UP and grasp_context is not None:
                context = grasp_context  # departure measured away from the grasp moment
            elif steps[i].action is ActionKind.PUT and release_context is not None:
                context = release_context  # approach measured into the release moment
            alignments[i] = StepAlignment(i, steps[i], anchor=context, segment=frame_range)
    return [alignments[i] for i in sorted(alignments)]
