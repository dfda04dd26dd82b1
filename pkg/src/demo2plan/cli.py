"""Command-line interface: run pipeline stages standalone, evaluate, serve the API,
and manage record/replay fixtures."""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .affordance import analyze_stream, records_from_report, write_report
from .compiler import compile_document, validate_document
from .config import PipelineConfig
from .evaluation import load_corpus, render_table, run_ablation, write_reports
from .planner import (
    InstructionText,
    PlannerOutput,
    PlanningSession,
    analyze_video,
    plan_tasks,
    scene_from_payload,
    steps_from_payload,
)
from .streams import parse_stream
from .task_model import validate_plan
from .vlm import (
    Fixture,
    LiveTransport,
    RecordTransport,
    ReplayTransport,
    encode_frame,
    sample_frames,
)


def build_transport(kind: str, config: PipelineConfig, fixtures_dir: Path):
    if kind == "replay":
        return ReplayTransport(fixtures_dir)
    live = LiveTransport(
        config.endpoint,
        attempts=config.retry_attempts,
        backoff_s=config.retry_backoff_s,
    )
    if kind == "record":
        return RecordTransport(live, fixtures_dir, model_id=config.model_id)
    return live


@click.group()
@click.option("--config", "config_path", type=click.Path(exists=True, path_type=Path), default=None,
              help="YAML/JSON pipeline configuration.")
@click.option("--transport", type=click.Choice(["live", "record", "replay"]), default="replay",
              show_default=True)
@click.option("--fixtures", "fixtures_dir", type=click.Path(path_type=Path), default=Path("fixtures"),
              show_default=True, help="Fixture directory for record/replay transports.")
@click.pass_context
def main(ctx, config_path, transport, fixtures_dir):
    """Compile one-shot teaching demonstrations into executable robot task plans."""
    config = PipelineConfig.from_file(config_path) if config_path else PipelineConfig()
    ctx.obj = {
        "config": config,
        "transport_kind": transport,
        "transport": build_transport(transport, config, fixtures_dir),
        "fixtures_dir": fixtures_dir,
    }


def _load_frames(config: PipelineConfig, frames_dir: Path):
    paths = sorted(p for p in frames_dir.iterdir() if p.is_file())
    if not paths:
        raise click.ClickException(f"no frame files under {frames_dir}")
    indices = sample_frames(len(paths), config.frame_sample_count)
    return [encode_frame(paths[i], config.max_image_edge) for i in indices]


def _emit(payload: dict, out: Path | None):
    text = json.dumps(payload, indent=2, sort_keys=True)
    if out:
        out.write_text(text + "\n", encoding="utf-8")
        click.echo(f"wrote {out}")
    else:
        click.echo(text)


@main.command()
@click.option("--frames", "frames_dir", type=click.Path(exists=True, path_type=Path), required=True,
              help="Directory of demonstration frame images.")
@click.option("--out", type=click.Path(path_type=Path), default=None)
@click.pass_obj
def analyze(obj, frames_dir, out):
    """Transcribe demonstration frames into a text instruction."""
    session = PlanningSession.start(obj["config"])
    refs = _load_frames(obj["config"], frames_dir)
    instruction = analyze_video(refs, session, obj["transport"])
    _emit({"text": instruction.text, "source": instruction.source}, out)


@main.command()
@click.option("--instruction", required=True)
@click.option("--scene", "scene_path", type=click.Path(exists=True, path_type=Path), default=None,
              help="Scene description JSON (objects/relations/rationale).")
@click.option("--out", type=click.Path(path_type=Path), default=None)
@click.pass_obj
def plan(obj, instruction, scene_path, out):
    """Decompose an instruction into the eight-action task vocabulary."""
    session = PlanningSession.start(obj["config"])
    scene = None
    if scene_path:
        scene = scene_from_payload(json.loads(scene_path.read_text(encoding="utf-8")))
    output = plan_tasks(InstructionText(instruction, source="human_edited"), scene, session, obj["transport"])
    payload = {
        "tasks": [
            {"action": s.action.value, "args": list(s.args), "explanation": s.explanation}
            for s in output.steps
        ],
        "summary": output.summary,
        "validated": output.validated,
        "violations": [{"step_index": v.step_index, "reason": v.reason} for v in output.violations],
    }
    _emit(payload, out)
    if output.violations:
        click.echo(f"warning: plan has {len(output.violations)} validation violation(s)", err=True)


def _plan_from_file(plan_path: Path, scene) -> PlannerOutput:
    raw = json.loads(plan_path.read_text(encoding="utf-8"))
    steps, explanations = steps_from_payload(raw)
    output = PlannerOutput(
        steps=steps,
        step_explanations=explanations,
        scene_after=None,
        summary=raw.get("summary", ""),
    )
    if scene is not None:
        report = validate_plan(scene, steps)
        output.violations = report.violations
        output.validated = True
    return output


@main.command()
@click.option("--stream", "stream_path", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--plan", "plan_path", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--out", type=click.Path(path_type=Path), default=Path("anchors.json"), show_default=True)
@click.pass_obj
def ground(obj, stream_path, plan_path, out):
    """Ground a plan in its detection stream and extract affordances."""
    stream = parse_stream(stream_path)
    output = _plan_from_file(plan_path, None)
    result = analyze_stream(stream, output.steps, obj["config"])
    write_report(result, out)
    click.echo(f"wrote {out} ({len(result.anchors)} anchors, {len(result.warnings)} warnings)")


@main.command("compile")
@click.option("--instruction", required=True)
@click.option("--scene", "scene_path", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--plan", "plan_path", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--anchors", "anchors_path", type=click.Path(exists=True, path_type=Path), default=None)
@click.option("--strict/--lenient", default=True, show_default=True,
              help="Strict refuses Grab/Release steps without grounded affordances.")
@click.option("--out", type=click.Path(path_type=Path), default=Path("document.json"), show_default=True)
@click.pass_obj
def compile_cmd(obj, instruction, scene_path, plan_path, anchors_path, strict, out):
    """Merge a validated plan and affordances into the executable document."""
    scene = scene_from_payload(json.loads(scene_path.read_text(encoding="utf-8")))
    output = _plan_from_file(plan_path, scene)
    records = None
    if anchors_path:
        records = records_from_report(json.loads(anchors_path.read_text(encoding="utf-8")))
    document = compile_document(
        instruction=instruction,
        scene_before=scene,
        plan=output,
        affordances=records,
        config=obj["config"],
        provenance={"model_id": obj["config"].model_id, "transport": obj["transport_kind"]},
        strict=strict,
    )
    document.save(out)
    report = validate_document(document.data)
    if not report.valid:
        raise click.ClickException("compiled document failed validation: " + "; ".join(report.problems))
    click.echo(f"wrote {out} ({len(document.tasks)} tasks)")


@main.command("eval")
@click.option("--corpus", "corpus_path", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--mode", "modes", multiple=True,
              type=click.Choice(["planner", "planner_fb", "planner_sa_fb"]),
              default=("planner",), show_default=True)
@click.option("--strict-tokens", is_flag=True, default=False,
              help="Compare (action, first argument) pairs instead of actions only.")
@click.option("--out", type=click.Path(path_type=Path), default=None)
@click.pass_obj
def eval_cmd(obj, corpus_path, modes, strict_tokens, out):
    """Score planner variants against corpus annotations (normalized Levenshtein)."""
    corpus = load_corpus(corpus_path)
    reports = [
        run_ablation(corpus, mode, obj["transport"], obj["config"], strict_tokens=strict_tokens)
        for mode in modes
    ]
    click.echo(render_table(reports))
    for report in reports:
        if report.skipped:
            click.echo(f"{report.mode}: skipped {len(report.skipped)} video(s)", err=True)
    if out:
        write_reports(reports, out)
        click.echo(f"wrote {out}")


@main.command()
@click.option("--jobs-dir", type=click.Path(path_type=Path), default=Path("jobs"), show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True)
@click.option("--ui-dir", type=click.Path(path_type=Path), default=None,
              help="Serve the built review UI (frontend/dist) from /.")
@click.pass_obj
def serve(obj, jobs_dir, host, port, ui_dir):
    """Run the review-UI HTTP service."""
    import uvicorn

    from .api import create_app
    from .jobs import JobStore

    store = JobStore(jobs_dir, obj["config"], obj["transport"], obj["transport_kind"])
    uvicorn.run(create_app(store, ui_dir=ui_dir), host=host, port=port)


@main.group()
def fixtures():
    """Record and inspect chat fixtures."""


@fixtures.command("record")
@click.option("--instruction", required=True)
@click.option("--scene", "scene_path", type=click.Path(exists=True, path_type=Path), default=None)
@click.option("--frames", "frames_dir", type=click.Path(exists=True, path_type=Path), default=None)
@click.pass_obj
def fixtures_record(obj, instruction, scene_path, frames_dir):
    """Run planning stages against the live endpoint, persisting fixtures."""
    config = obj["config"]
    transport = RecordTransport(
        LiveTransport(config.endpoint, attempts=config.retry_attempts, backoff_s=config.retry_backoff_s),
        obj["fixtures_dir"],
        model_id=config.model_id,
    )
    session = PlanningSession.start(config)
    text = instruction
    if frames_dir:
        refs = _load_frames(config, frames_dir)
        text = analyze_video(refs, session, transport).text
        click.echo(f"video analyzer: {text}")
    scene = None
    if scene_path:
        scene = scene_from_payload(json.loads(scene_path.read_text(encoding="utf-8")))
    output = plan_tasks(InstructionText(text, source="human_edited"), scene, session, transport)
    click.echo(f"recorded plan with {len(output.steps)} step(s) into {obj['fixtures_dir']}")


@fixtures.command("list")
@click.pass_obj
def fixtures_list(obj):
    """List recorded fixtures: hash, model, timestamp."""
    directory = obj["fixtures_dir"]
    if not Path(directory).exists():
        click.echo("no fixtures directory")
        return
    for path in sorted(Path(directory).glob("*.json")):
        fixture = Fixture.load(path)
        meta = fixture.metadata
        click.echo(f"{fixture.request_hash}  {meta.get('model_id', '?'):24}  {meta.get('recorded_at', '?')}")


if __name__ == "__main__":
    main(prog_name="demo2plan")
