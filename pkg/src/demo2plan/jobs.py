"""Job orchestration: state machine, directory-per-job persistence, audit log.

A job's directory is the source of truth: job.json (record), frames/,
stream.ldjson, transcript.json, scene/plan/anchors/document artifacts, and an
append-only audit.jsonl. Re-reading the directory reconstructs the job after a
restart.
"""

from __future__ import annotations

import json
import secrets
import threading
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional

from .affordance import analyze_stream, report_dict, write_report
from .compiler import compile_document
from .config import PipelineConfig
from .errors import InvalidArgument
from .grounding import AnchorCountMismatch, GroundingError
from .planner import (
    InstructionText,
    ParseFailure,
    PlannerOutput,
    PlanningSession,
    SchemaViolation,
    analyze_scene,
    analyze_video,
    apply_feedback,
    plan_tasks,
    steps_from_payload,
)
from .streams import parse_stream
from .task_model import ActionVocabularyViolation, Violation
from .vlm import ChatRequest, FixtureMiss, ImageRef, Transport, encode_frame, sample_frames

STATES = ("created", "analyzing", "needs_review", "planning", "grounding", "compiled", "failed")

_CROCKFORD = "0123456789ABCDEFGHJKMNPQRSTVWXYZ"


def new_ulid(timestamp_ms: Optional[int] = None) -> str:
    """128-bit ULID: 48-bit millisecond timestamp + 80 random bits, Crockford base32."""
    ts = int(time.time() * 1000) if timestamp_ms is None else timestamp_ms
    value = (ts << 80) | secrets.randbits(80)
    return "".join(_CROCKFORD[(value >> (5 * i)) & 31] for i in range(25, -1, -1))


class JobError(Exception):
    pass


class UnknownJob(JobError):
    def __init__(self, job_id: str):
        super().__init__(f"no job {job_id}")
        self.job_id = job_id


class InvalidState(JobError):
    pass


class StaleRevision(JobError):
    def __init__(self, expected: int, actual: int):
        super().__init__(f"revision check failed: expected {expected}, job is at {actual}")
        self.expected = expected
        self.actual = actual


class HashTrackingTransport:
    """Wraps a transport and remembers every request hash for provenance."""

    def __init__(self, inner: Transport):
        self.inner = inner
        self.hashes: list[str] = []

    def complete(self, request: ChatRequest) -> str:
        self.hashes.append(request.hash())
        return self.inner.complete(request)


@dataclass
class JobRecord:
    job_id: str
    state: str = "created"
    revision: int = 0
    pending: Optional[str] = None  # instruction | plan | mismatch
    approved: bool = False
    instruction: Optional[dict] = None  # {text, source}
    violations: list[dict] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)
    error: Optional[str] = None
    artifacts: dict[str, str] = field(default_factory=dict)
    fixture_hashes: list[str] = field(default_factory=list)
    config_digest: str = ""

    def to_dict(self) -> dict:
        return {
            "job_id": self.job_id,
            "state": self.state,
            "revision": self.revision,
            "pending": self.pending,
            "approved": self.approved,
            "instruction": self.instruction,
            "violations": self.violations,
            "warnings": self.warnings,
            "error": self.error,
            "artifacts": self.artifacts,
            "fixture_hashes": self.fixture_hashes,
            "config_digest": self.config_digest,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "JobRecord":
        return cls(**raw)


class JobStore:
    """Directory-backed job registry with per-job locking."""

    def __init__(self, root: Path | str, config: PipelineConfig, transport: Transport, transport_kind: str = "replay"):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.config = config
        self.transport = transport
        self.transport_kind = transport_kind
        self._locks: dict[str, threading.Lock] = {}
        self._registry_lock = threading.Lock()
        self._sessions: dict[str, PlanningSession] = {}
        self._grounding_cache: dict[str, object] = {}

    # -- persistence -------------------------------------------------------

    def _dir(self, job_id: str) -> Path:
        return self.root / job_id

    def _lock(self, job_id: str) -> threading.Lock:
        with self._registry_lock:
            return self._locks.setdefault(job_id, threading.Lock())

    def _save(self, record: JobRecord) -> None:
        path = self._dir(record.job_id) / "job.json"
        path.write_text(json.dumps(record.to_dict(), indent=2, sort_keys=True), encoding="utf-8")

    def _audit(self, record: JobRecord, event: str, **details) -> None:
        entry = {
            "ts": datetime.now(timezone.utc).isoformat(),
            "event": event,
            "revision": record.revision,
            **details,
        }
        with (self._dir(record.job_id) / "audit.jsonl").open("a", encoding="utf-8") as handle:
            handle.write(json.dumps(entry, sort_keys=True) + "\n")

    def load(self, job_id: str) -> JobRecord:
        path = self._dir(job_id) / "job.json"
        if not path.exists():
            raise UnknownJob(job_id)
        return JobRecord.from_dict(json.loads(path.read_text(encoding="utf-8")))

    def list_jobs(self) -> list[str]:
        return sorted(p.name for p in self.root.iterdir() if (p / "job.json").exists())

    # -- creation ----------------------------------------------------------

    def create_job(
        self,
        frames: Optional[list[tuple[str, bytes]]] = None,
        stream_bytes: Optional[bytes] = None,
        instruction: Optional[str] = None,
    ) -> str:
        if not frames and not (instruction and instruction.strip()):
            raise InvalidArgument("a job needs teaching frames, a text instruction, or both")
        job_id = new_ulid()
        job_dir = self._dir(job_id)
        (job_dir / "frames").mkdir(parents=True, exist_ok=True)
        for name, data in frames or []:
            safe = Path(name).name or "frame.png"
            (job_dir / "frames" / safe).write_bytes(data)
        record = JobRecord(job_id=job_id, config_digest=self.config.digest())
        if stream_bytes is not None:
            stream_path = job_dir / "stream.ldjson"
            stream_path.write_bytes(stream_bytes)
            parse_stream(stream_path)  # validate up front; raises on bad input
            record.artifacts["stream"] = "stream.ldjson"
        if frames:
            record.artifacts["frames"] = "frames"
        if instruction and instruction.strip():
            record.instruction = {"text": instruction.strip(), "source": "human_edited"}
            self._write_json(record, "instruction.json", record.instruction)
        self._save(record)
        self._audit(record, "created", config_digest=record.config_digest,
                    transport=self.transport_kind)
        return job_id

    def _write_json(self, record: JobRecord, name: str, payload) -> None:
        (self._dir(record.job_id) / name).write_text(
            json.dumps(payload, indent=2, sort_keys=True), encoding="utf-8"
        )
        key = name.rsplit(".", 1)[0]
        record.artifacts[key] = name

    def read_artifact(self, job_id: str, name: str):
        record = self.load(job_id)
        if name not in record.artifacts:
            return None
        path = self._dir(job_id) / record.artifacts[name]
        if not path.exists():
            return None
        return json.loads(path.read_text(encoding="utf-8"))

    # -- session handling ----------------------------------------------------

    def _session(self, record: JobRecord) -> PlanningSession:
        job_id = record.job_id
        if job_id not in self._sessions:
            session = PlanningSession.start(self.config)
            transcript = self.read_artifact(job_id, "transcript")
            if transcript:
                for message in transcript["messages"]:
                    images = tuple(
                        self._load_encoded_image(job_id, digest)
                        for digest in message.get("image_digests", [])
                    )
                    from .vlm import ChatMessage

                    if message["role"] == "system":
                        continue  # PlanningSession.start already seeded it
                    session.chat.append(
                        ChatMessage(role=message["role"], text=message["text"], images=images)
                    )
                plan = self.read_artifact(job_id, "plan")
                if plan is not None:
                    session.last_output = self._planner_output_from_artifact(plan)
                scene = self.read_artifact(job_id, "scene")
                if scene is not None:
                    from .planner import scene_from_payload

                    session.scene = scene_from_payload(scene)
            self._sessions[job_id] = session
        return self._sessions[job_id]

    def _load_encoded_image(self, job_id: str, digest: str) -> ImageRef:
        path = self._dir(job_id) / "encoded" / f"{digest}.png"
        data = path.read_bytes() if path.exists() else b""
        return ImageRef(data=data, digest=digest)

    def _store_encoded_image(self, job_id: str, ref: ImageRef) -> None:
        directory = self._dir(job_id) / "encoded"
        directory.mkdir(exist_ok=True)
        (directory / f"{ref.digest}.png").write_bytes(ref.data)

    def _persist_transcript(self, record: JobRecord) -> None:
        session = self._sessions.get(record.job_id)
        if session is None:
            return
        messages = [
            {
                "role": m.role,
                "text": m.text,
                "image_digests": [ref.digest for ref in m.images],
            }
            for m in session.chat.messages
        ]
        self._write_json(record, "transcript.json", {"messages": messages})

    @staticmethod
    def _planner_output_from_artifact(plan: dict) -> PlannerOutput:
        steps, explanations = steps_from_payload({"tasks": plan["tasks"]})
        output = PlannerOutput(
            steps=steps,
            step_explanations=explanations,
            scene_after=None,
            summary=plan.get("summary", ""),
            violations=[Violation(**v) for v in plan.get("violations", [])],
            validated=plan.get("validated", False),
        )
        return output

    def _persist_plan(self, record: JobRecord, output: PlannerOutput) -> None:
        payload = {
            "tasks": [
                {"action": s.action.value, "args": list(s.args), "explanation": s.explanation}
                for s in output.steps
            ],
            "summary": output.summary,
            "validated": output.validated,
            "violations": [
                {"step_index": v.step_index, "reason": v.reason} for v in output.violations
            ],
        }
        self._write_json(record, "plan.json", payload)
        record.violations = payload["violations"]

    # -- stage runner --------------------------------------------------------

    def _encoded_frames(self, record: JobRecord) -> list[ImageRef]:
        frames_dir = self._dir(record.job_id) / "frames"
        paths = sorted(frames_dir.glob("*"))
        if not paths:
            return []
        indices = sample_frames(len(paths), self.config.frame_sample_count)
        refs = []
        for index in indices:
            ref = encode_frame(paths[index], self.config.max_image_edge)
            self._store_encoded_image(record.job_id, ref)
            refs.append(ref)
        return refs

    def advance(self, job_id: str) -> JobRecord:
        """Run the next pipeline stage; review gates must be approved first."""
        with self._lock(job_id):
            record = self.load(job_id)
            try:
                return self._advance_locked(record)
            except (GroundingError, ParseFailure, SchemaViolation, ActionVocabularyViolation, FixtureMiss) as err:
                # recoverable: park the job for human review with the reason
                failed_stage = record.state
                record.state = "needs_review"
                if isinstance(err, AnchorCountMismatch):
                    record.pending = "mismatch"
                else:
                    record.pending = {
                        "analyzing": "instruction",
                        "planning": "plan",
                        "grounding": "mismatch",
                    }.get(failed_stage, record.pending)
                record.approved = False
                record.error = str(err)
                if isinstance(err, ParseFailure):
                    self._write_json(record, "raw_output.json", {"raw": err.raw})
                self._save(record)
                self._audit(record, "stage_error", error=str(err))
                return record
            except JobError:
                raise
            except Exception as err:  # unrecoverable stage failure
                record.state = "failed"
                record.error = str(err)
                self._save(record)
                self._audit(record, "failed", error=str(err))
                return record

    def _advance_locked(self, record: JobRecord) -> JobRecord:
        transport = HashTrackingTransport(self.transport)
        state = record.state
        if state == "created":
            if record.instruction is None:
                return self._run_video_analysis(record, transport)
            return self._run_planning(record, transport)
        if state == "needs_review":
            if not record.approved:
                raise InvalidState(f"job {record.job_id} is awaiting review ({record.pending})")
            pending, record.pending, record.approved = record.pending, None, False
            if pending == "instruction":
                return self._run_planning(record, transport)
            if pending == "plan":
                return self._run_grounding(record, transport)
            if pending == "mismatch":
                return self._run_compile(record, override_mismatch=True)
            raise InvalidState(f"job {record.job_id} has nothing pending")
        if state == "grounding":
            return self._run_compile(record)
        raise InvalidState(f"job {record.job_id} in state {state} cannot advance")

    def _run_video_analysis(self, record: JobRecord, transport: HashTrackingTransport) -> JobRecord:
        record.state = "analyzing"
        self._save(record)
        frames = self._encoded_frames(record)
        if not frames:
            raise InvalidState("job has no frames to analyze")
        session = self._session(record)
        instruction = analyze_video(frames, session, transport)
        record.instruction = {"text": instruction.text, "source": instruction.source}
        self._write_json(record, "instruction.json", record.instruction)
        record.fixture_hashes = sorted(set(record.fixture_hashes) | set(transport.hashes))
        record.state = "needs_review"
        record.pending = "instruction"
        record.approved = False
        self._persist_transcript(record)
        self._save(record)
        self._audit(record, "video_analyzed", instruction=instruction.text, fixtures=transport.hashes)
        return record

    def _run_planning(self, record: JobRecord, transport: HashTrackingTransport) -> JobRecord:
        record.state = "planning"
        self._save(record)
        session = self._session(record)
        instruction = InstructionText(**record.instruction)
        scene = session.scene
        if scene is None:
            # text-only jobs still get a scene estimate: the scene analyzer can
            # work from the instruction alone when no frame exists
            frames = self._encoded_frames(record) if "frames" in record.artifacts else []
            scene = analyze_scene(frames[0] if frames else None, instruction, session, transport)
            self._write_json(
                record,
                "scene.json",
                {
                    "objects": [{"name": o.name, "graspable": o.graspable} for o in scene.objects],
                    "relations": [list(r) for r in scene.relations],
                    "rationale": scene.rationale,
                },
            )
        output = plan_tasks(instruction, scene, session, transport)
        self._persist_plan(record, output)
        record.fixture_hashes = sorted(set(record.fixture_hashes) | set(transport.hashes))
        record.state = "needs_review"
        record.pending = "plan"
        record.approved = False
        self._persist_transcript(record)
        self._save(record)
        self._audit(record, "planned", violations=len(output.violations), fixtures=transport.hashes)
        return record

    def _run_grounding(self, record: JobRecord, transport: HashTrackingTransport) -> JobRecord:
        if "stream" not in record.artifacts:
            return self._run_compile(record)  # text-only job: nothing to ground
        record.state = "grounding"
        self._save(record)
        stream = parse_stream(self._dir(record.job_id) / record.artifacts["stream"])
        session = self._session(record)
        result = analyze_stream(stream, session.last_output.steps, self.config)
        write_report(result, self._dir(record.job_id) / "anchors.json")
        record.artifacts["anchors"] = "anchors.json"
        record.warnings = list(result.warnings)
        self._save(record)
        self._audit(record, "grounded", anchors=len(result.anchors), warnings=len(result.warnings))
        self._grounding_cache[record.job_id] = result
        return record

    def _run_compile(self, record: JobRecord, override_mismatch: bool = False) -> JobRecord:
        session = self._session(record)
        output = session.last_output
        if output is None:
            raise InvalidState("job has no plan to compile")
        scene = session.scene
        if scene is None:
            raise InvalidState("job has no scene description; cannot compile")
        grounding = self._grounding_cache.get(record.job_id)
        if grounding is not None:
            records = grounding.records
        elif "anchors" in record.artifacts and not override_mismatch:
            from .affordance import records_from_report

            records = records_from_report(self.read_artifact(record.job_id, "anchors"))
        else:
            records = None
        strict = records is not None and not override_mismatch
        document = compile_document(
            instruction=InstructionText(**record.instruction).text,
            scene_before=scene,
            plan=output,
            affordances=records,
            config=self.config,
            provenance={
                "model_id": self.config.model_id,
                "transport": self.transport_kind,
                "fixtures": sorted(record.fixture_hashes),
            },
            strict=strict,
        )
        document.save(self._dir(record.job_id) / "document.json")
        record.artifacts["document"] = "document.json"
        record.state = "compiled"
        record.pending = None
        self._save(record)
        self._audit(record, "compiled", strict=strict, override=override_mismatch)
        return record

    # -- review -------------------------------------------------------------

    def submit_review(
        self,
        job_id: str,
        action: str,
        payload: Optional[dict] = None,
        expected_revision: Optional[int] = None,
    ) -> JobRecord:
        payload = payload or {}
        with self._lock(job_id):
            record = self.load(job_id)
            if record.state != "needs_review":
                raise InvalidState(f"job {job_id} is not awaiting review (state {record.state})")
            if expected_revision is not None and expected_revision != record.revision:
                raise StaleRevision(expected_revision, record.revision)
            if action == "edit_instruction":
                text = (payload.get("text") or "").strip()
                if not text:
                    raise InvalidArgument("edited instruction is empty")
                record.instruction = {"text": text, "source": "human_edited"}
                self._write_json(record, "instruction.json", record.instruction)
                session = self._session(record)
                session.instruction = InstructionText(**record.instruction)
                record.pending = "instruction"
                record.approved = False
                record.revision += 1
            elif action == "feedback":
                text = (payload.get("text") or "").strip()
                if not text:
                    raise InvalidArgument("feedback text is empty")
                session = self._session(record)
                transport = HashTrackingTransport(self.transport)
                output = apply_feedback(text, session, transport)
                self._persist_plan(record, output)
                record.fixture_hashes = sorted(set(record.fixture_hashes) | set(transport.hashes))
                record.pending = "plan"
                record.approved = False
                record.revision += 1
                self._persist_transcript(record)
            elif action == "approve":
                if record.pending is None:
                    raise InvalidArgument("nothing awaiting approval")
                if record.pending == "plan":
                    if record.violations:
                        raise InvalidArgument(
                            f"cannot approve a plan with {len(record.violations)} validation violation(s)"
                        )
                    if "plan" not in record.artifacts:
                        raise InvalidArgument("no plan to approve; edit the instruction or send feedback")
                record.approved = True
                record.error = None
            elif action == "override_mismatch":
                if record.pending != "mismatch":
                    raise InvalidState("no anchor mismatch to override")
                record.approved = True
                record.revision += 1
            else:
                raise InvalidArgument(f"unknown review action {action!r}")
            self._save(record)
            self._audit(record, f"review_{action}", payload=payload)
            return record
