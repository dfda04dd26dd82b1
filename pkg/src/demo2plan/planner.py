"""Three-stage prompting pipeline: video analyzer, scene analyzer, task planner.

Each stage asks the model for a fenced JSON block, parses it into typed
structures, and keeps the whole conversation in one stateful session so human
corrective feedback can revise the plan in context.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .task_model import (
    ActionKind,
    ActionVocabularyViolation,
    InvalidScene,
    InvalidStep,
    SceneDescription,
    SceneObject,
    TaskStep,
    Violation,
    validate_plan,
)
from .vlm import ChatMessage, ImageRef, InvalidArgument, SessionState, Transport, render_template, send


class ParseFailure(ValueError):
    """Model output that could not be parsed; the raw text is always preserved."""

    def __init__(self, message: str, raw: str):
        super().__init__(message)
        self.raw = raw


class SchemaViolation(ValueError):
    def __init__(self, missing: Sequence[str], raw: str = ""):
        super().__init__(f"output missing or invalid fields: {', '.join(missing)}")
        self.missing = list(missing)
        self.raw = raw


@dataclass(frozen=True)
class InstructionText:
    text: str
    source: str = "model"  # model | human_edited

    def __post_init__(self) -> None:
        if not self.text.strip():
            raise InvalidArgument("instruction text is empty")
        if self.source not in ("model", "human_edited"):
            raise InvalidArgument(f"unknown instruction source {self.source!r}")


@dataclass
class PlannerOutput:
    steps: list[TaskStep]
    step_explanations: list[str]
    scene_after: Optional[SceneDescription]
    summary: str
    violations: list[Violation] = field(default_factory=list)
    validated: bool = False

    @property
    def valid(self) -> bool:
        return self.validated and not self.violations


@dataclass
class PlanningSession:
    """One job's conversation plus the latest typed results."""

    chat: SessionState
    instruction: Optional[InstructionText] = None
    scene: Optional[SceneDescription] = None
    last_output: Optional[PlannerOutput] = None
    revision: int = 0

    @classmethod
    def start(cls, config) -> "PlanningSession":
        chat = SessionState.start(
            system_prompt=(
                "You are part of a robot teaching pipeline. Follow each request's "
                "output format exactly; always include the requested fenced JSON block."
            ),
            budget=config.token_budget,
            model_id=config.model_id,
            temperature=config.temperature,
            chars_per_token=config.chars_per_token,
            image_token_cost=config.image_token_cost,
        )
        return cls(chat=chat)


_FENCE = re.compile(r"```(?:json)?\s*\n(.*?)```", re.DOTALL)


def extract_fenced_json(text: str) -> dict:
    """Parse the first fenced JSON block, ignoring any prose around it."""
    match = _FENCE.search(text)
    if match is None:
        raise ParseFailure("no fenced JSON block in model output", raw=text)
    try:
        payload = json.loads(match.group(1))
    except json.JSONDecodeError as err:
        raise ParseFailure(f"fenced block is not valid JSON: {err}", raw=text) from err
    if not isinstance(payload, dict):
        raise ParseFailure("fenced JSON block is not an object", raw=text)
    return payload


def scene_from_payload(payload: dict, raw: str = "") -> SceneDescription:
    missing = [key for key in ("objects",) if key not in payload]
    if missing:
        raise SchemaViolation(missing, raw=raw)
    objects_raw = payload["objects"]
    if not isinstance(objects_raw, list) or not objects_raw:
        raise SchemaViolation(["objects (empty or not a list)"], raw=raw)
    try:
        objects = tuple(
            SceneObject(name=str(o["name"]), graspable=bool(o.get("graspable", True)))
            for o in objects_raw
        )
        relations = tuple(
            (str(s), str(w), str(o)) for s, w, o in payload.get("relations", [])
        )
        return SceneDescription(
            objects=objects, relations=relations, rationale=str(payload.get("rationale", ""))
        )
    except (KeyError, TypeError, ValueError) as err:
        raise SchemaViolation([f"objects/relations ({err})"], raw=raw) from err
    except InvalidScene as err:
        raise SchemaViolation(err.problems, raw=raw) from err


def steps_from_payload(payload: dict, raw: str = "") -> tuple[list[TaskStep], list[str]]:
    if "tasks" not in payload or not isinstance(payload["tasks"], list):
        raise SchemaViolation(["tasks"], raw=raw)
    steps: list[TaskStep] = []
    explanations: list[str] = []
    for entry in payload["tasks"]:
        try:
            action = ActionKind.parse(str(entry["action"]))
            args = tuple(str(a) for a in entry.get("args", []))
            explanation = str(entry.get("explanation", ""))
            steps.append(TaskStep(action=action, args=args, explanation=explanation))
        except ActionVocabularyViolation:
            raise
        except InvalidStep as err:
            raise ParseFailure(f"bad task entry: {err}", raw=raw) from err
        except (KeyError, TypeError) as err:
            raise ParseFailure(f"malformed task entry: {err}", raw=raw) from err
        explanations.append(explanation)
    return steps, explanations


def analyze_video(
    frames: Sequence[ImageRef], session: PlanningSession, transport: Transport
) -> InstructionText:
    """Transcribe sampled frames into a one-sentence human-style instruction."""
    prompt = render_template("video_analyzer.txt", {})
    reply = send(session.chat, ChatMessage(role="user", text=prompt, images=tuple(frames)), transport)
    payload = extract_fenced_json(reply)
    if "instruction" not in payload or not str(payload["instruction"]).strip():
        raise SchemaViolation(["instruction"], raw=reply)
    instruction = InstructionText(text=str(payload["instruction"]).strip(), source="model")
    session.instruction = instruction
    return instruction


def analyze_scene(
    first_frame: Optional[ImageRef],
    instruction: InstructionText,
    session: PlanningSession,
    transport: Transport,
) -> SceneDescription:
    """Encode the first frame plus the instruction into a working-area description."""
    prompt = render_template("scene_analyzer.txt", {"ACTION": instruction.text})
    images = (first_frame,) if first_frame is not None else ()
    reply = send(session.chat, ChatMessage(role="user", text=prompt, images=images), transport)
    scene = scene_from_payload(extract_fenced_json(reply), raw=reply)
    session.scene = scene
    return scene


def _parse_planner_reply(reply: str, scene: Optional[SceneDescription]) -> PlannerOutput:
    payload = extract_fenced_json(reply)
    steps, explanations = steps_from_payload(payload, raw=reply)
    scene_after = None
    if payload.get("environment_after") is not None:
        scene_after = scene_from_payload(payload["environment_after"], raw=reply)
    summary = str(payload.get("summary", ""))
    output = PlannerOutput(
        steps=steps, step_explanations=explanations, scene_after=scene_after, summary=summary
    )
    if scene is not None:
        report = validate_plan(scene, steps)
        output.violations = report.violations
        output.validated = True
    return output


def plan_tasks(
    instruction: InstructionText,
    scene: Optional[SceneDescription],
    session: PlanningSession,
    transport: Transport,
) -> PlannerOutput:
    """Decompose the instruction into the eight-action vocabulary.

    Validation violations are attached as warnings, not raised: the plan still
    reaches human review, which is where they get resolved.
    """
    if scene is not None:
        objects_json = json.dumps(
            [{"name": o.name, "graspable": o.graspable} for o in scene.objects]
        )
        environment = json.dumps(
            {"relations": [list(r) for r in scene.relations], "rationale": scene.rationale}
        )
    else:
        objects_json = "(no object list available)"
        environment = "(no environment description available)"
    prompt = render_template(
        "task_planner.txt",
        {"ACTION": instruction.text, "OBJECTS": objects_json, "ENVIRONMENT": environment},
    )
    reply = send(session.chat, ChatMessage(role="user", text=prompt), transport)
    output = _parse_planner_reply(reply, scene)
    session.instruction = instruction
    session.scene = scene
    session.last_output = output
    return output


def apply_feedback(feedback: str, session: PlanningSession, transport: Transport) -> PlannerOutput:
    """Send linguistic feedback into the session and parse the revised plan."""
    if not feedback.strip():
        raise InvalidArgument("feedback text is empty")
    if session.last_output is None:
        raise InvalidArgument("feedback requires a prior plan in this session")
    reply = send(session.chat, ChatMessage(role="user", text=feedback), transport)
    output = _parse_planner_reply(reply, session.scene)
    session.last_output = output
    session.revision += 1
    return output
