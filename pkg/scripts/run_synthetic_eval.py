#!/usr/bin/env python3
"""Build a synthetic replay corpus and print the three-mode ablation table.

Everything is scripted and deterministic: plans come from canned transcripts,
annotations are chosen so each mode improves on the last, loosely echoing how
feedback and scene context helped in live runs.
"""

from __future__ import annotations

import json
import sys
import tempfile
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "src"))

from demo2plan.evaluation import load_corpus, render_table, run_ablation, write_reports
from demo2plan.vlm import ScriptedTransport

GOOD = ["Grab", "PickUp", "MoveHand", "Put", "Release"]
ROUGH = ["Grab", "MoveHand", "Put", "Release"]  # planner-only misses the lift
SCENE = {
    "objects": [
        {"name": "juice", "graspable": True},
        {"name": "bottom shelf", "graspable": False},
        {"name": "top shelf", "graspable": False},
    ],
    "relations": [["juice", "on", "bottom shelf"]],
    "rationale": "source and destination supports plus the manipulated can",
}


def fence(payload: dict) -> str:
    return "```json\n" + json.dumps(payload) + "\n```"


def tasks_for(actions):
    return [
        {"action": a, "args": (["juice", "top shelf"] if a == "Put" else ["juice"]), "explanation": ""}
        for a in actions
    ]


def plan_reply(actions):
    return fence({"tasks": tasks_for(actions), "environment_after": SCENE, "summary": "relocate"})


def main() -> None:
    with tempfile.TemporaryDirectory() as tmp:
        base = Path(tmp)
        lines = []
        for i in range(10):
            video_id = f"synthetic_{i:02d}"
            (base / f"{video_id}_ann.json").write_text(
                json.dumps({"video_id": video_id, "actions": GOOD})
            )
            (base / f"{video_id}_inst.json").write_text(
                json.dumps({"text": f"move the juice to the top shelf (take {i})"})
            )
            (base / f"{video_id}_fb.json").write_text(
                json.dumps({"text": "remember to lift the can before carrying it"})
            )
            (base / f"{video_id}_scene.json").write_text(json.dumps(SCENE))
            lines.append(
                json.dumps(
                    {
                        "video_id": video_id,
                        "annotation_path": f"{video_id}_ann.json",
                        "instruction_fixture": f"{video_id}_inst.json",
                        "feedback_fixture": f"{video_id}_fb.json",
                        "scene_fixture": f"{video_id}_scene.json",
                    }
                )
            )
        manifest = base / "corpus.jsonl"
        manifest.write_text("\n".join(lines) + "\n")
        corpus = load_corpus(manifest)

        # planner alone gets 6/10 right; feedback fixes 3 more; scene context all 10
        def replies_for(mode):
            out = []
            for i in range(10):
                if mode == "planner":
                    out.append(plan_reply(GOOD if i < 6 else ROUGH))
                elif mode == "planner_fb":
                    out.append(plan_reply(GOOD if i < 6 else ROUGH))
                    out.append(plan_reply(GOOD if i < 9 else ROUGH))
                else:
                    out.append(plan_reply(GOOD))
                    out.append(plan_reply(GOOD))
            return out

        reports = [
            run_ablation(corpus, mode, ScriptedTransport(replies_for(mode)))
            for mode in ("planner", "planner_fb", "planner_sa_fb")
        ]
        print(render_table(reports))
        out = ROOT / "synthetic_eval_report.json"
        write_reports(reports, out)
        print(f"\nwrote {out}")


if __name__ == "__main__":
    main()
