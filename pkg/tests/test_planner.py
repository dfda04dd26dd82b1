"""Prompting stages: fenced-JSON parsing, validation wiring, and corrective feedback."""

import json

import pytest

from demo2plan.config import PipelineConfig
from demo2plan.planner import (
    InstructionText,
    ParseFailure,
    PlanningSession,
    SchemaViolation,
    analyze_scene,
    analyze_video,
    apply_feedback,
    extract_fenced_json,
    plan_tasks,
    scene_from_payload,
)
from demo2plan.task_model import ActionKind, ActionVocabularyViolation
from demo2plan.vlm import ImageRef, InvalidArgument, RecordTransport, ReplayTransport, ScriptedTransport

CONFIG = PipelineConfig()


def fence(payload: dict, prose: str = "Here is the result.") -> str:
    return f"{prose}\n```json\n{json.dumps(payload)}\n```\nDone."


def scene_payload(*names, relations=(), rationale="selected task-relevant objects"):
    return {
        "objects": [{"name": n, "graspable": not n.endswith("shelf")} for n in names],
        "relations": [list(r) for r in relations],
        "rationale": rationale,
    }


def plan_payload(tasks, scene=None, summary="relocate the juice"):
    return {
        "tasks": tasks,
        "environment_after": scene or scene_payload("juice", "top shelf", "bottom shelf"),
        "summary": summary,
    }


JUICE_TASKS = [
    {"action": "Grab", "args": ["juice"], "explanation": "take hold of the juice"},
    {"action": "PickUp", "args": ["juice"], "explanation": "lift it off the shelf"},
    {"action": "MoveHand", "args": ["top shelf"], "explanation": "carry it upward"},
    {"action": "Put", "args": ["juice", "top shelf"], "explanation": "place it down"},
    {"action": "Release", "args": ["juice"], "explanation": "let go"},
]
JUICE_SCENE_PAYLOAD = scene_payload(
    "juice", "bottom shelf", "top shelf", relations=[("juice", "on", "bottom shelf")]
)


def session():
    return PlanningSession.start(CONFIG)


class TestFencedJson:
    def test_extracts_first_block(self):
        payload = extract_fenced_json("noise\n```json\n{\"a\": 1}\n```\nmore\n```json\n{\"b\": 2}\n```")
        assert payload == {"a": 1}

    def test_no_block_preserves_raw(self):
        with pytest.raises(ParseFailure) as err:
            extract_fenced_json("the model rambled with no JSON")
        assert err.value.raw == "the model rambled with no JSON"

    def test_bad_json(self):
        with pytest.raises(ParseFailure):
            extract_fenced_json("```json\n{nope}\n```")


class TestAnalyzeVideo:
    def test_returns_model_instruction(self):
        reply = fence({"instruction": "Please open the fridge."})
        transport = ScriptedTransport([reply])
        frames = (ImageRef.from_bytes(b"f0"), ImageRef.from_bytes(b"f1"))
        instruction = analyze_video(frames, session(), transport)
        assert instruction.text == "Please open the fridge."
        assert instruction.source == "model"

    def test_human_edit_is_passthrough(self):
        edited = InstructionText(text="Open the drawer.", source="human_edited")
        assert edited.source == "human_edited"

    def test_missing_instruction_field(self):
        transport = ScriptedTransport([fence({"caption": "??"})])
        with pytest.raises(SchemaViolation):
            analyze_video((), session(), transport)


class TestAnalyzeScene:
    def test_fridge_objects_kept_background_ignored(self):
        payload = scene_payload("fridge handle", "fridge door", rationale="handle is the contact point")
        transport = ScriptedTransport([fence(payload)])
        scene = analyze_scene(
            ImageRef.from_bytes(b"frame0"),
            InstructionText("Please open the fridge."),
            session(),
            transport,
        )
        names = scene.object_names()
        assert "fridge handle" in names
        assert "computer display" not in names
        assert scene.rationale == "handle is the contact point"

    def test_malformed_block_is_parse_failure(self):
        transport = ScriptedTransport(["no fence at all"])
        with pytest.raises(ParseFailure) as err:
            analyze_scene(None, InstructionText("x"), session(), transport)
        assert err.value.raw == "no fence at all"

    def test_empty_object_list_rejected(self):
        with pytest.raises(SchemaViolation):
            scene_from_payload({"objects": [], "relations": []})


class TestPlanTasks:
    def test_juice_plan_parses_and_validates(self):
        sess = session()
        scene = scene_from_payload(JUICE_SCENE_PAYLOAD)
        transport = ScriptedTransport([fence(plan_payload(JUICE_TASKS))])
        output = plan_tasks(InstructionText("move the juice to the top shelf"), scene, sess, transport)
        assert [s.action for s in output.steps] == [
            ActionKind.GRAB,
            ActionKind.PICK_UP,
            ActionKind.MOVE_HAND,
            ActionKind.PUT,
            ActionKind.RELEASE,
        ]
        assert output.valid
        assert output.summary == "relocate the juice"
        assert len(output.step_explanations) == 5

    def test_vocabulary_violation(self):
        tasks = [{"action": "Throw", "args": ["can"], "explanation": ""}]
        transport = ScriptedTransport([fence(plan_payload(tasks))])
        with pytest.raises(ActionVocabularyViolation) as err:
            plan_tasks(InstructionText("toss it"), scene_from_payload(scene_payload("can")), session(), transport)
        assert err.value.token == "Throw"

    def test_put_arity_parse_failure(self):
        tasks = [{"action": "Put", "args": ["juice"], "explanation": ""}]
        transport = ScriptedTransport([fence(plan_payload(tasks))])
        with pytest.raises(ParseFailure):
            plan_tasks(InstructionText("x"), scene_from_payload(JUICE_SCENE_PAYLOAD), session(), transport)

    def test_violations_attached_not_raised(self):
        tasks = [{"action": "Release", "args": ["juice"], "explanation": "premature"}]
        transport = ScriptedTransport([fence(plan_payload(tasks))])
        output = plan_tasks(InstructionText("x"), scene_from_payload(JUICE_SCENE_PAYLOAD), session(), transport)
        assert not output.valid
        assert output.violations[0].step_index == 0

    def test_no_scene_skips_validation(self):
        transport = ScriptedTransport([fence(plan_payload(JUICE_TASKS))])
        output = plan_tasks(InstructionText("x"), None, session(), transport)
        assert not output.validated and output.violations == []


class TestApplyFeedback:
    def drawer_session(self):
        sess = session()
        safe_tasks = [
            {"action": "Grab", "args": ["safe handle"], "explanation": ""},
            {"action": "Rotate", "args": ["safe handle"], "explanation": ""},
            {"action": "Release", "args": ["safe handle"], "explanation": ""},
        ]
        drawer_tasks = [
            {"action": "Grab", "args": ["drawer handle"], "explanation": ""},
            {"action": "Slide", "args": ["drawer handle"], "explanation": ""},
            {"action": "Release", "args": ["drawer handle"], "explanation": ""},
        ]
        scene = scene_from_payload(scene_payload("safe handle", "drawer handle"))
        transport = ScriptedTransport(
            [
                fence(plan_payload(safe_tasks, scene=scene_payload("safe handle", "drawer handle"))),
                fence(plan_payload(drawer_tasks, scene=scene_payload("safe handle", "drawer handle"))),
            ]
        )
        plan_tasks(InstructionText("open it"), scene, sess, transport)
        return sess, transport

    def test_replan_references_drawer(self):
        sess, transport = self.drawer_session()
        output = apply_feedback("the object is a drawer, not a safe", sess, transport)
        assert output.steps[0].args == ("drawer handle",)
        assert sess.revision == 1

    def test_empty_feedback(self):
        sess, transport = self.drawer_session()
        with pytest.raises(InvalidArgument):
            apply_feedback("   ", sess, transport)

    def test_feedback_requires_prior_plan(self):
        with pytest.raises(InvalidArgument):
            apply_feedback("fix it", session(), ScriptedTransport(["x"]))

    def test_feedback_survives_truncation(self):
        # budget just above the largest single message: planning twice forces eviction
        config = PipelineConfig(token_budget=900)
        sess = PlanningSession.start(config)
        scene = scene_from_payload(JUICE_SCENE_PAYLOAD)
        replies = [fence(plan_payload(JUICE_TASKS)) for _ in range(3)]
        transport = ScriptedTransport(replies)
        plan_tasks(InstructionText("move the juice"), scene, sess, transport)
        apply_feedback("try again", sess, transport)
        output = apply_feedback("and once more", sess, transport)
        assert output.steps
        assert sess.chat.messages[0].role == "system"
        assert sess.chat.token_estimate <= 900 + sess.chat.estimate(sess.chat.messages[-1])


class TestDeterminism:
    def test_replayed_pipeline_is_identical(self, tmp_path):
        scene = scene_from_payload(JUICE_SCENE_PAYLOAD)
        recorder = RecordTransport(ScriptedTransport([fence(plan_payload(JUICE_TASKS))]), tmp_path)
        first = plan_tasks(InstructionText("move the juice"), scene, session(), recorder)

        outputs = []
        for _ in range(2):
            replay = ReplayTransport(tmp_path)
            outputs.append(plan_tasks(InstructionText("move the juice"), scene, session(), replay))
        assert outputs[0] == outputs[1]
        assert outputs[0].steps == first.steps
