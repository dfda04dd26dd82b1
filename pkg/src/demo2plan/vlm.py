"""Transport-agnostic chat-completions access with stateful history and record/replay.

Requests are canonicalized (sorted keys, image payloads replaced by their
digests) and content-hashed, so recorded fixtures replay byte-identically
regardless of serializer field order.
"""

from __future__ import annotations

import base64
import hashlib
import io
import json
import math
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from importlib import resources
from pathlib import Path
from typing import Callable, Optional, Protocol, Sequence

import httpx
from PIL import Image

from .errors import InvalidArgument

API_KEY_ENV = "DEMO2PLAN_API_KEY"


class BudgetExceeded(RuntimeError):
    pass


class FixtureMiss(LookupError):
    def __init__(self, request_hash: str):
        super().__init__(f"no fixture recorded for request {request_hash}")
        self.request_hash = request_hash


class EndpointError(RuntimeError):
    def __init__(self, status: Optional[int], body: str):
        super().__init__(f"endpoint failed with status {status}: {body[:200]}")
        self.status = status
        self.body = body


def sample_frames(frame_count: int, k: int = 5) -> list[int]:
    """Evenly spaced frame indices (round half up), always including both ends.

    Five frames is the practical default: enough temporal coverage without
    blowing the model's token budget.
    """
    if frame_count < 1:
        raise InvalidArgument(f"frame_count must be at least 1, got {frame_count}")
    if k < 2:
        raise InvalidArgument(f"k must be at least 2, got {k}")
    if frame_count < k:
        return list(range(frame_count))
    return [int(math.floor(i * (frame_count - 1) / (k - 1) + 0.5)) for i in range(k)]


@dataclass(frozen=True)
class ImageRef:
    """An encoded frame payload plus its content digest."""

    data: bytes
    digest: str
    media_type: str = "image/png"

    @classmethod
    def from_bytes(cls, data: bytes, media_type: str = "image/png") -> "ImageRef":
        return cls(data=data, digest=hashlib.sha256(data).hexdigest(), media_type=media_type)


_PNG_MAGIC = b"\x89PNG\r\n\x1a\n"


def encode_frame(source: Path | str | bytes, max_edge: int = 768) -> ImageRef:
    """Load an image, downscale to the configured max edge, and encode as PNG.

    PNGs already within the size bound pass through byte-for-byte, so their
    digests (and any fixtures hashed from them) stay stable across codec
    versions.
    """
    raw = Path(source).read_bytes() if isinstance(source, (str, Path)) else bytes(source)
    with Image.open(io.BytesIO(raw)) as img:
        if raw[:8] == _PNG_MAGIC and max(img.size) <= max_edge:
            return ImageRef.from_bytes(raw)
        img = img.convert("RGB")
        longest = max(img.size)
        if longest > max_edge:
            scale = max_edge / longest
            img = img.resize((round(img.width * scale), round(img.height * scale)))
        buffer = io.BytesIO()
        img.save(buffer, format="PNG")
    return ImageRef.from_bytes(buffer.getvalue())


@dataclass(frozen=True)
class ChatMessage:
    role: str  # system | user | assistant
    text: str
    images: tuple[ImageRef, ...] = ()

    def __post_init__(self) -> None:
        if self.role not in ("system", "user", "assistant"):
            raise InvalidArgument(f"unknown role {self.role!r}")
        if self.images and self.role != "user":
            raise InvalidArgument("images are only permitted on user messages")


@dataclass
class SessionState:
    """Ordered conversation with a token budget; the system prompt is never evicted."""

    budget: int
    model_id: str
    temperature: float = 0.0
    chars_per_token: int = 4
    image_token_cost: int = 512
    messages: list[ChatMessage] = field(default_factory=list)
    token_estimate: int = 0

    @classmethod
    def start(cls, system_prompt: str, budget: int, model_id: str, **kwargs) -> "SessionState":
        session = cls(budget=budget, model_id=model_id, **kwargs)
        session.append(ChatMessage(role="system", text=system_prompt))
        return session

    def estimate(self, message: ChatMessage) -> int:
        return math.ceil(len(message.text) / self.chars_per_token) + self.image_token_cost * len(
            message.images
        )

    def append(self, message: ChatMessage) -> None:
        self.messages.append(message)
        self.token_estimate += self.estimate(message)


def truncate_history(session: SessionState) -> SessionState:
    """Evict oldest user/assistant pairs after the system prompt until within budget.

    A trailing unpaired user message (the in-flight request) is never evicted.
    Raises BudgetExceeded when eviction cannot reach the budget.
    """
    while session.token_estimate > session.budget:
        evictable = len(session.messages) - 1  # after system prompt
        if session.messages and session.messages[-1].role == "user":
            evictable -= 1  # keep the in-flight user message
        if evictable < 2:
            raise BudgetExceeded(
                f"history cannot fit budget {session.budget}: "
                f"{session.token_estimate} tokens remain after eviction"
            )
        evicted = session.messages[1:3]
        del session.messages[1:3]
        session.token_estimate -= sum(session.estimate(m) for m in evicted)
    return session


@dataclass(frozen=True)
class ChatRequest:
    model_id: str
    temperature: float
    messages: tuple[ChatMessage, ...]

    def canonical(self) -> dict:
        """Order-independent request structure; image payloads appear as digests."""
        return {
            "model": self.model_id,
            "temperature": self.temperature,
            "messages": [
                {
                    "role": m.role,
                    "text": m.text,
                    "images": [ref.digest for ref in m.images],
                }
                for m in self.messages
            ],
        }

    def hash(self) -> str:
        payload = json.dumps(self.canonical(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()

    def wire_body(self) -> dict:
        """OpenAI-style chat-completions body with inline base64 image parts."""
        messages = []
        for m in self.messages:
            if not m.images:
                messages.append({"role": m.role, "content": m.text})
                continue
            parts: list[dict] = [{"type": "text", "text": m.text}]
            for ref in m.images:
                encoded = base64.b64encode(ref.data).decode("ascii")
                parts.append(
                    {
                        "type": "image_url",
                        "image_url": {"url": f"data:{ref.media_type};base64,{encoded}"},
                    }
                )
            messages.append({"role": m.role, "content": parts})
        return {"model": self.model_id, "temperature": self.temperature, "messages": messages}


class Transport(Protocol):
    def complete(self, request: ChatRequest) -> str: ...


@dataclass(frozen=True)
class Fixture:
    request_hash: str
    response_text: str
    metadata: dict

    def save(self, directory: Path) -> Path:
        directory.mkdir(parents=True, exist_ok=True)
        path = directory / f"{self.request_hash}.json"
        payload = {
            "request_hash": self.request_hash,
            "response_text": self.response_text,
            "metadata": self.metadata,
        }
        path.write_text(json.dumps(payload, sort_keys=True, indent=2), encoding="utf-8")
        return path

    @classmethod
    def load(cls, path: Path) -> "Fixture":
        raw = json.loads(path.read_text(encoding="utf-8"))
        return cls(raw["request_hash"], raw["response_text"], raw.get("metadata", {}))


class LiveTransport:
    """HTTPS chat-completions endpoint with bounded exponential-backoff retry."""

    def __init__(
        self,
        endpoint: str,
        api_key: Optional[str] = None,
        attempts: int = 3,
        backoff_s: float = 1.0,
        client: Optional[httpx.Client] = None,
        sleep: Callable[[float], None] = time.sleep,
    ):
        import os

        self.endpoint = endpoint
        self.api_key = api_key if api_key is not None else os.environ.get(API_KEY_ENV, "")
        self.attempts = attempts
        self.backoff_s = backoff_s
        self.client = client or httpx.Client(timeout=120.0)
        self.sleep = sleep

    def complete(self, request: ChatRequest) -> str:
        headers = {"Authorization": f"Bearer {self.api_key}"}
        last: tuple[Optional[int], str] = (None, "no attempt made")
        for attempt in range(self.attempts):
            try:
                response = self.client.post(self.endpoint, json=request.wire_body(), headers=headers)
            except httpx.HTTPError as err:
                last = (None, str(err))
            else:
                if response.status_code == 200:
                    body = response.json()
                    return body["choices"][0]["message"]["content"]
                last = (response.status_code, response.text)
            if attempt + 1 < self.attempts:
                self.sleep(self.backoff_s * (2**attempt))
        raise EndpointError(*last)


class RecordTransport:
    """Delegates to a live transport and persists each exchange as a fixture."""

    def __init__(self, inner: Transport, fixtures_dir: Path | str, model_id: str = ""):
        self.inner = inner
        self.fixtures_dir = Path(fixtures_dir)
        self.model_id = model_id

    def complete(self, request: ChatRequest) -> str:
        response = self.inner.complete(request)
        Fixture(
            request_hash=request.hash(),
            response_text=response,
            metadata={
                "recorded_at": datetime.now(timezone.utc).isoformat(),
                "model_id": request.model_id or self.model_id,
            },
        ).save(self.fixtures_dir)
        return response


class ReplayTransport:
    """Pure fixture lookup; replies are byte-identical to what was recorded."""

    def __init__(self, fixtures_dir: Path | str):
        self.fixtures_dir = Path(fixtures_dir)

    def complete(self, request: ChatRequest) -> str:
        path = self.fixtures_dir / f"{request.hash()}.json"
        if not path.exists():
            raise FixtureMiss(request.hash())
        return Fixture.load(path).response_text


class ScriptedTransport:
    """Returns canned responses in order; handy for tests and fixture authoring."""

    def __init__(self, responses: Sequence[str]):
        self.responses = list(responses)
        self.requests: list[ChatRequest] = []

    def complete(self, request: ChatRequest) -> str:
        self.requests.append(request)
        if not self.responses:
            raise EndpointError(None, "scripted transport exhausted")
        return self.responses.pop(0)


def send(session: SessionState, message: ChatMessage, transport: Transport) -> str:
    """Append the user message, truncate to budget, call the transport, append the reply."""
    if session.estimate(message) > session.budget:
        raise BudgetExceeded(
            f"message alone estimates {session.estimate(message)} tokens over budget {session.budget}"
        )
    session.append(message)
    truncate_history(session)
    request = ChatRequest(
        model_id=session.model_id,
        temperature=session.temperature,
        messages=tuple(session.messages),
    )
    reply = transport.complete(request)
    session.append(ChatMessage(role="assistant", text=reply))
    return reply


def render_template(name: str, substitutions: dict[str, str]) -> str:
    """Load a prompt asset and substitute its bracketed placeholders."""
    text = resources.files("demo2plan").joinpath(f"prompts/{name}").read_text(encoding="utf-8")
    for key, value in substitutions.items():
        text = text.replace(f"[{key}]", value)
    return text
