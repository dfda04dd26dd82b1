"""CLI surface: stage commands, eval, fixture management (replay-backed)."""

import io
import json

import pytest
from click.testing import CliRunner
from PIL import Image

import demo2plan.cli as cli
from demo2plan.streams import serialize_stream
from demo2plan.synthetic import pick_and_place_script, synthesize_stream
from demo2plan.vlm import RecordTransport, ScriptedTransport

from .test_evaluation import tasks_for, write_corpus
from .test_planner import JUICE_SCENE_PAYLOAD, JUICE_TASKS, fence, plan_payload

PLAN_A = ["Grab", "PickUp", "MoveHand", "Put", "Release"]


@pytest.fixture
def runner():
    return CliRunner()


def scripted(monkeypatch, replies, fixtures_dir=None):
    """Route the CLI's transport to canned replies (recording when asked)."""

    def fake_build(kind, config, fdir):
        inner = ScriptedTransport(replies)
        if kind == "record":
            return RecordTransport(inner, fixtures_dir or fdir, model_id=config.model_id)
        if kind == "replay":
            from demo2plan.vlm import ReplayTransport

            return ReplayTransport(fdir)
        return inner

    monkeypatch.setattr(cli, "build_transport", fake_build)


class TestPlanCommand:
    def test_plan_then_replay_identical(self, runner, tmp_path, monkeypatch):
        scripted(monkeypatch, [fence(plan_payload(JUICE_TASKS))])
        scene_path = tmp_path / "scene.json"
        scene_path.write_text(json.dumps(JUICE_SCENE_PAYLOAD))
        fixtures = tmp_path / "fx"
        out1 = tmp_path / "plan1.json"
        result = runner.invoke(
            cli.main,
            ["--transport", "record", "--fixtures", str(fixtures), "plan",
             "--instruction", "move the juice to the top shelf",
             "--scene", str(scene_path), "--out", str(out1)],
        )
        assert result.exit_code == 0, result.output
        out2 = tmp_path / "plan2.json"
        result = runner.invoke(
            cli.main,
            ["--transport", "replay", "--fixtures", str(fixtures), "plan",
             "--instruction", "move the juice to the top shelf",
             "--scene", str(scene_path), "--out", str(out2)],
        )
        assert result.exit_code == 0, result.output
        assert out1.read_text() == out2.read_text()
        plan = json.loads(out1.read_text())
        assert [t["action"] for t in plan["tasks"]] == PLAN_A
        assert plan["validated"] and plan["violations"] == []


class TestGroundAndCompile:
    def test_ground_compile_validate(self, runner, tmp_path, monkeypatch):
        scripted(monkeypatch, [fence(plan_payload(JUICE_TASKS))])
        scene_path = tmp_path / "scene.json"
        scene_path.write_text(json.dumps(JUICE_SCENE_PAYLOAD))
        plan_path = tmp_path / "plan.json"
        runner.invoke(
            cli.main,
            ["--transport", "record", "--fixtures", str(tmp_path / "fx"), "plan",
             "--instruction", "move the juice", "--scene", str(scene_path),
             "--out", str(plan_path)],
        )
        stream, _ = synthesize_stream(pick_and_place_script(seed=5, carry_shape="lshape"))
        stream_path = tmp_path / "stream.ldjson"
        serialize_stream(stream, stream_path)
        anchors_path = tmp_path / "anchors.json"
        result = runner.invoke(
            cli.main,
            ["ground", "--stream", str(stream_path), "--plan", str(plan_path),
             "--out", str(anchors_path)],
        )
        assert result.exit_code == 0, result.output
        assert "2 anchors" in result.output

        document_path = tmp_path / "document.json"
        result = runner.invoke(
            cli.main,
            ["compile", "--instruction", "move the juice", "--scene", str(scene_path),
             "--plan", str(plan_path), "--anchors", str(anchors_path),
             "--out", str(document_path)],
        )
        assert result.exit_code == 0, result.output
        document = json.loads(document_path.read_text())
        assert len(document["tasks"]) == 5
        assert document["tasks"][0]["affordance"]["grasp_type"] == "power"

    def test_compile_strict_fails_without_anchors(self, runner, tmp_path, monkeypatch):
        scripted(monkeypatch, [fence(plan_payload(JUICE_TASKS))])
        scene_path = tmp_path / "scene.json"
        scene_path.write_text(json.dumps(JUICE_SCENE_PAYLOAD))
        plan_path = tmp_path / "plan.json"
        runner.invoke(
            cli.main,
            ["--transport", "record", "--fixtures", str(tmp_path / "fx"), "plan",
             "--instruction", "move it", "--scene", str(scene_path), "--out", str(plan_path)],
        )
        result = runner.invoke(
            cli.main,
            ["compile", "--instruction", "move it", "--scene", str(scene_path),
             "--plan", str(plan_path), "--out", str(tmp_path / "d.json")],
        )
        assert result.exit_code != 0

        result = runner.invoke(
            cli.main,
            ["compile", "--instruction", "move it", "--scene", str(scene_path),
             "--plan", str(plan_path), "--lenient", "--out", str(tmp_path / "d.json")],
        )
        assert result.exit_code == 0, result.output


class TestEvalCommand:
    def test_eval_prints_table(self, runner, tmp_path, monkeypatch):
        videos = [("vid_a", PLAN_A, "move the juice", None)]
        manifest = write_corpus(tmp_path, videos)
        scripted(monkeypatch, [fence(plan_payload(tasks_for(PLAN_A)))])
        result = runner.invoke(
            cli.main,
            ["--transport", "live", "eval", "--corpus", str(manifest),
             "--mode", "planner", "--out", str(tmp_path / "report.json")],
        )
        assert result.exit_code == 0, result.output
        assert "Task planner" in result.output
        report = json.loads((tmp_path / "report.json").read_text())
        assert report["reports"][0]["mean"] == 1.0


class TestFixturesCommands:
    def test_fixtures_list(self, runner, tmp_path, monkeypatch):
        scripted(monkeypatch, [fence(plan_payload(JUICE_TASKS))])
        runner.invoke(
            cli.main,
            ["--transport", "record", "--fixtures", str(tmp_path / "fx"), "plan",
             "--instruction", "x", "--out", str(tmp_path / "p.json")],
        )
        result = runner.invoke(cli.main, ["--fixtures", str(tmp_path / "fx"), "fixtures", "list"])
        assert result.exit_code == 0, result.output
        assert "gpt-4-vision-preview" in result.output


class TestAnalyzeCommand:
    def test_analyze_frames(self, runner, tmp_path, monkeypatch):
        frames_dir = tmp_path / "frames"
        frames_dir.mkdir()
        for i in range(3):
            buffer = io.BytesIO()
            Image.new("RGB", (32, 24), (i * 50, 10, 10)).save(buffer, format="PNG")
            (frames_dir / f"f{i}.png").write_bytes(buffer.getvalue())
        scripted(monkeypatch, [fence({"instruction": "Please open the fridge."})])
        result = runner.invoke(
            cli.main, ["--transport", "live", "analyze", "--frames", str(frames_dir)]
        )
        assert result.exit_code == 0, result.output
        assert "Please open the fridge." in result.output
