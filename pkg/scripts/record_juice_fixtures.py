#!/usr/bin/env python3
"""Regenerate the committed juice-relocation fixture job.

Produces, under fixtures/juice_relocation/:
  frames/*.png         deterministic demonstration frames
  stream.ldjson        synthetic detection stream (skeleton-based 3D)
  fixtures/*.json      recorded chat exchanges keyed by canonical request hash
  expected_document.json   golden compiled document

Run this after changing prompt templates, the default configuration, or the
request hashing scheme; commit the refreshed outputs. The scripted replies
below stand in for recorded live transcripts of each prompting stage.
"""

from __future__ import annotations

import json
import shutil
import sys
from pathlib import Path

from PIL import Image, ImageDraw

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "src"))

from demo2plan.config import PipelineConfig
from demo2plan.jobs import JobStore
from demo2plan.streams import serialize_stream
from demo2plan.synthetic import pick_and_place_script, synthesize_stream
from demo2plan.vlm import RecordTransport, ScriptedTransport

TARGET = ROOT / "fixtures" / "juice_relocation"


def fence(payload: dict, prose: str) -> str:
    return f"{prose}\n```json\n{json.dumps(payload, indent=2)}\n```\n"


VIDEO_REPLY = fence(
    {"instruction": "Please move the juice can from the bottom shelf to the top shelf."},
    "The person reaches for a juice can on the lower shelf, lifts it, and places it on the shelf above.",
)

SCENE_REPLY = fence(
    {
        "objects": [
            {"name": "juice", "graspable": True},
            {"name": "bottom shelf", "graspable": False},
            {"name": "top shelf", "graspable": False},
        ],
        "relations": [["juice", "on", "bottom shelf"], ["top shelf", "above", "bottom shelf"]],
        "rationale": (
            "The juice can is the manipulated object. Both shelves matter as the source "
            "and destination supports. Background items play no role in this instruction."
        ),
    },
    "I examined the first frame in light of the instruction.",
)

PLAN_REPLY = fence(
    {
        "tasks": [
            {"action": "Grab", "args": ["juice"], "explanation": "Take hold of the juice can."},
            {"action": "PickUp", "args": ["juice"], "explanation": "Lift the can off the bottom shelf."},
            {"action": "MoveHand", "args": ["top shelf"], "explanation": "Carry the can toward the top shelf."},
            {"action": "Put", "args": ["juice", "top shelf"], "explanation": "Place the can onto the top shelf."},
            {"action": "Release", "args": ["juice"], "explanation": "Let go of the can."},
        ],
        "environment_after": {
            "objects": [
                {"name": "juice", "graspable": True},
                {"name": "bottom shelf", "graspable": False},
                {"name": "top shelf", "graspable": False},
            ],
            "relations": [["juice", "on", "top shelf"], ["top shelf", "above", "bottom shelf"]],
            "rationale": "The juice can now rests on the top shelf and the hand is empty.",
        },
        "summary": "Relocate the juice can from the bottom shelf to the top shelf.",
    },
    "Decomposing the instruction with the given environment.",
)


def draw_frame(index: int, can_y: int) -> Image.Image:
    img = Image.new("RGB", (320, 240), (235, 235, 230))
    draw = ImageDraw.Draw(img)
    draw.rectangle([40, 150, 280, 160], fill=(120, 90, 60))  # bottom shelf
    draw.rectangle([40, 70, 280, 80], fill=(120, 90, 60))  # top shelf
    draw.rectangle([140, can_y, 170, can_y + 40], fill=(200, 40, 40))  # juice can
    draw.ellipse([190 - 12, can_y - 6, 190 + 12, can_y + 18], fill=(230, 190, 160))  # hand
    draw.text((10, 10), f"t={index}", fill=(0, 0, 0))
    return img


def main() -> None:
    if TARGET.exists():
        shutil.rmtree(TARGET)
    (TARGET / "frames").mkdir(parents=True)

    # demonstration frames: can moves from the bottom shelf to the top shelf
    for index, can_y in enumerate((108, 100, 60, 30, 28)):
        draw_frame(index, can_y).save(TARGET / "frames" / f"frame_{index:02d}.png")

    script = pick_and_place_script(seed=2024, carry_shape="lshape", target_label="juice")
    stream, truth = synthesize_stream(script)
    serialize_stream(stream, TARGET / "stream.ldjson")
    (TARGET / "truth.json").write_text(
        json.dumps(
            {
                "grasp_frames": truth.grasp_frames,
                "release_frames": truth.release_frames,
                "events": [
                    {"kind": e.kind, "frame": e.frame, "label": e.label} for e in truth.events
                ],
            },
            indent=2,
        )
    )

    config = PipelineConfig()
    scripted = ScriptedTransport([VIDEO_REPLY, SCENE_REPLY, PLAN_REPLY])
    recorder = RecordTransport(scripted, TARGET / "fixtures", model_id=config.model_id)
    # provenance is labeled "replay": the golden document must match what a
    # replay-backed run of these fixtures produces, byte for byte
    store = JobStore(TARGET / "_record_jobs", config, recorder, transport_kind="replay")

    frames = [(p.name, p.read_bytes()) for p in sorted((TARGET / "frames").glob("*.png"))]
    job_id = store.create_job(frames=frames, stream_bytes=(TARGET / "stream.ldjson").read_bytes())
    store.advance(job_id)
    store.submit_review(job_id, "approve")
    store.advance(job_id)
    store.submit_review(job_id, "approve")
    store.advance(job_id)
    record = store.advance(job_id)
    assert record.state == "compiled", f"walkthrough ended in {record.state}: {record.error}"

    document_path = TARGET / "_record_jobs" / job_id / "document.json"
    shutil.copy(document_path, TARGET / "expected_document.json")
    shutil.rmtree(TARGET / "_record_jobs")
    fixture_count = len(list((TARGET / "fixtures").glob("*.json")))
    print(f"recorded {fixture_count} fixtures; golden document at {TARGET / 'expected_document.json'}")


if __name__ == "__main__":
    main()
