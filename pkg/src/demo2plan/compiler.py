"""Compile a validated plan plus grounded affordances into the executable JSON document.

The document is hardware-independent: per-task pre/postconditions verbalize the
action-table semantics, affordances carry the demonstration-derived geometry,
and provenance pins the fixtures and configuration that produced it.
"""

from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Mapping, Optional

import jsonschema

from .affordance import AffordanceRecord
from .config import PipelineConfig
from .planner import PlannerOutput
from .serialization import canonical_dumps, round_floats
from .task_model import ActionKind, PlanDocument, SceneDescription, TaskStep

SCHEMA_VERSION = "1.0"


class CompileError(ValueError):
    pass


class MissingAffordance(CompileError):
    def __init__(self, step_index: int, action: str):
        super().__init__(f"step {step_index} ({action}) has no grounded affordance record")
        self.step_index = step_index


def render_conditions(step: TaskStep) -> tuple[list[str], list[str]]:
    """Verbalized pre/postconditions for one task, matching the simulator semantics."""
    a1 = step.args[0]
    held = f"{a1} is currently being held"
    continues = f"{a1} continues to be held"
    kind = step.action
    if kind is ActionKind.GRAB:
        return (
            [f"{a1} is within reachable distance", "no object is currently held"],
            [f"{a1} is being held"],
        )
    if kind is ActionKind.MOVE_HAND:
        return [], []
    if kind is ActionKind.RELEASE:
        return [held], [f"{a1} is no longer held"]
    if kind is ActionKind.PICK_UP:
        return [held], [continues, f"{a1} no longer rests on its support"]
    if kind is ActionKind.PUT:
        return [held], [continues, f"{a1} is on {step.args[1]}"]
    if kind in (ActionKind.ROTATE, ActionKind.SLIDE):
        return [held], [continues, f"the fixture linked to {a1} is opened or closed"]
    return [held], [continues]  # MoveOnSurface


def _scene_dict(scene: SceneDescription) -> dict:
    return {
        "objects": [{"name": o.name, "graspable": o.graspable} for o in scene.objects],
        "relations": [list(r) for r in scene.relations],
        "rationale": scene.rationale,
    }


def _scene_from_dict(raw: dict) -> SceneDescription:
    from .planner import scene_from_payload

    return scene_from_payload(raw)


@dataclass(frozen=True)
class ExecutableDocument:
    data: dict

    @property
    def tasks(self) -> list[dict]:
        return self.data["tasks"]

    def to_json(self) -> str:
        return canonical_dumps(self.data)

    def save(self, path: Path | str) -> None:
        Path(path).write_text(self.to_json(), encoding="utf-8")

    @classmethod
    def from_json(cls, text: str) -> "ExecutableDocument":
        return cls(data=json.loads(text))

    @classmethod
    def load(cls, path: Path | str) -> "ExecutableDocument":
        return cls.from_json(Path(path).read_text(encoding="utf-8"))


def compile_document(
    instruction: str,
    scene_before: SceneDescription,
    plan: PlannerOutput,
    affordances: Optional[Mapping[int, AffordanceRecord]] = None,
    config: Optional[PipelineConfig] = None,
    provenance: Optional[dict] = None,
    strict: bool = True,
) -> ExecutableDocument:
    """Deterministic merge of plan and affordances; floats fixed at 6 significant digits.

    strict refuses to compile when a Grab/Release step lacks a grounded record;
    lenient mode (a human approved the mismatch) emits an explicit
    "unavailable" marker instead.
    """
    config = config or PipelineConfig()
    if not plan.validated or plan.violations:
        raise CompileError(
            f"plan must validate with zero violations before compilation "
            f"({len(plan.violations)} present, validated={plan.validated})"
        )
    document_plan = PlanDocument.build(instruction, scene_before, plan.steps, summary=plan.summary)
    records = dict(affordances) if affordances is not None else {}
    tasks = []
    for index, step in enumerate(plan.steps):
        preconditions, postconditions = render_conditions(step)
        record = records.get(index)
        if record is not None:
            affordance = record.to_dict()
        else:
            if strict and step.action in (ActionKind.GRAB, ActionKind.RELEASE):
                raise MissingAffordance(index, step.action.value)
            affordance = {"unavailable": "no video grounding available for this step"}
        tasks.append(
            {
                "action": step.action.value,
                "args": list(step.args),
                "explanation": step.explanation,
                "preconditions": preconditions,
                "postconditions": postconditions,
                "affordance": affordance,
            }
        )
    data = {
        "schema_version": SCHEMA_VERSION,
        "instruction": instruction,
        "scene_before": _scene_dict(scene_before),
        "scene_after": _scene_dict(document_plan.scene_after),
        "tasks": tasks,
        "summary": plan.summary,
        "provenance": {"config_digest": config.digest(), **(provenance or {})},
    }
    return ExecutableDocument(data=round_floats(data))


def load_schema() -> dict:
    text = resources.files("demo2plan").joinpath("schema/executable_plan.schema.json").read_text()
    return json.loads(text)


def _lenient_schema(schema: dict) -> dict:
    """Same shape requirements, but unknown fields are preserved rather than rejected."""
    relaxed = copy.deepcopy(schema)

    def scrub(node):
        if isinstance(node, dict):
            node.pop("additionalProperties", None)
            for value in node.values():
                scrub(value)
        elif isinstance(node, list):
            for value in node:
                scrub(value)

    scrub(relaxed)
    return relaxed


@dataclass
class DocumentReport:
    problems: list[str] = field(default_factory=list)

    @property
    def valid(self) -> bool:
        return not self.problems


_UNIT_FIELDS = (
    "approach_direction",
    "withdrawal_direction",
    "departure_direction",
    "axis",
    "surface_normal",
    "surface_normal_quantized",
)


def _check_affordance_invariants(index: int, affordance: Optional[dict], problems: list[str]) -> None:
    if not isinstance(affordance, dict):
        return
    for key in _UNIT_FIELDS:
        vector = affordance.get(key)
        if vector is None:
            continue
        norm = math.sqrt(sum(float(x) ** 2 for x in vector))
        if abs(norm - 1.0) > 1e-6:
            problems.append(f"task {index}: {key} norm {norm:.8f} is not unit within 1e-6")
    angle = affordance.get("angle")
    if angle is not None and not 0.0 < float(angle) < 2.0 * math.pi:
        problems.append(f"task {index}: rotation angle {angle} outside (0, 2*pi)")
    waypoints = affordance.get("waypoints")
    if waypoints is not None and len(waypoints) < 2:
        problems.append(f"task {index}: waypoints must include both segment endpoints")


def validate_document(source: Path | str | dict, strict: bool = True) -> DocumentReport:
    """Schema plus invariant checks; problems are reported, not raised."""
    if isinstance(source, dict):
        data = source
    else:
        try:
            data = json.loads(Path(source).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as err:
            return DocumentReport(problems=[f"unreadable document: {err}"])
    schema = load_schema() if strict else _lenient_schema(load_schema())
    validator = jsonschema.Draft202012Validator(schema)
    problems = [
        f"schema: {'/'.join(str(p) for p in error.absolute_path) or '<root>'}: {error.message}"
        for error in validator.iter_errors(data)
    ]
    for index, task in enumerate(data.get("tasks", []) if isinstance(data, dict) else []):
        if not isinstance(task, dict):
            continue
        action = task.get("action")
        args = task.get("args", [])
        expected = 2 if action == "Put" else 1
        if action in ActionKind._value2member_map_ and len(args) != expected:
            problems.append(f"task {index}: {action} takes {expected} argument(s), got {len(args)}")
        _check_affordance_invariants(index, task.get("affordance"), problems)
    return DocumentReport(problems=problems)
