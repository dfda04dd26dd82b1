"""Gateway behavior: sampling, budgets, canonical hashing, and the three transports."""

import httpx
import pytest
from hypothesis import given
from hypothesis import strategies as st

from demo2plan.vlm import (
    BudgetExceeded,
    ChatMessage,
    ChatRequest,
    EndpointError,
    Fixture,
    FixtureMiss,
    ImageRef,
    InvalidArgument,
    LiveTransport,
    RecordTransport,
    ReplayTransport,
    ScriptedTransport,
    SessionState,
    render_template,
    sample_frames,
    send,
    truncate_history,
)


class TestSampleFrames:
    def test_hundred_frames(self):
        # round(i * 99 / 4) half-up: 0, 24.75, 49.5, 74.25, 99
        assert sample_frames(100, 5) == [0, 25, 50, 74, 99]

    def test_exact_fit(self):
        assert sample_frames(5, 5) == [0, 1, 2, 3, 4]

    def test_fewer_than_k(self):
        assert sample_frames(3, 5) == [0, 1, 2]

    def test_invalid(self):
        with pytest.raises(InvalidArgument):
            sample_frames(0)
        with pytest.raises(InvalidArgument):
            sample_frames(10, k=1)

    @given(st.integers(1, 100_000), st.integers(2, 12))
    def test_monotone_and_bounded(self, n, k):
        indices = sample_frames(n, k)
        assert indices[0] == 0 and indices[-1] == n - 1
        assert all(b > a for a, b in zip(indices, indices[1:]))
        assert len(indices) == min(n, k)


def plain_session(budget=1000, **kwargs) -> SessionState:
    return SessionState.start("sys!", budget=budget, model_id="test-model", **kwargs)


class TestMessagesAndBudget:
    def test_images_only_on_user(self):
        ref = ImageRef.from_bytes(b"zz")
        ChatMessage(role="user", text="ok", images=(ref,))
        with pytest.raises(InvalidArgument):
            ChatMessage(role="assistant", text="no", images=(ref,))

    def test_truncation_count(self):
        # system: 4 chars -> 1 token; each message 40 chars -> 10 tokens; pair = 20
        session = plain_session(budget=175)
        for _ in range(10):
            session.append(ChatMessage(role="user", text="u" * 40))
            session.append(ChatMessage(role="assistant", text="a" * 40))
        assert session.token_estimate == 201
        truncate_history(session)
        assert session.messages[0].text == "sys!"
        assert len(session.messages) == 1 + 2 * 8  # exactly two pairs evicted
        assert session.token_estimate == 161 <= session.budget

    def test_under_budget_untouched(self):
        session = plain_session(budget=1000)
        session.append(ChatMessage(role="user", text="hello"))
        before = list(session.messages)
        truncate_history(session)
        assert session.messages == before

    def test_order_preserved(self):
        session = plain_session(budget=62)
        sent = []
        for i in range(4):
            session.append(ChatMessage(role="user", text=f"u{i}" + "x" * 38))
            session.append(ChatMessage(role="assistant", text=f"a{i}" + "x" * 38))
            sent += [f"u{i}", f"a{i}"]
        truncate_history(session)
        survivors = [m.text[:2] for m in session.messages[1:]]
        assert survivors == sent[-len(survivors):]  # oldest evicted, order intact

    def test_system_prompt_over_budget(self):
        session = SessionState.start("s" * 400, budget=50, model_id="m")
        with pytest.raises(BudgetExceeded):
            truncate_history(session)

    def test_send_rejects_oversized_message(self):
        session = plain_session(budget=10)
        with pytest.raises(BudgetExceeded):
            send(session, ChatMessage(role="user", text="x" * 400), ScriptedTransport(["hi"]))


class TestHashing:
    def test_stable_and_image_sensitive(self):
        ref = ImageRef.from_bytes(b"frame-bytes")
        messages = (
            ChatMessage(role="system", text="s"),
            ChatMessage(role="user", text="u", images=(ref,)),
        )
        r1 = ChatRequest("m", 0.0, messages)
        r2 = ChatRequest("m", 0.0, messages)
        assert r1.hash() == r2.hash()
        other = ChatRequest(
            "m",
            0.0,
            (
                ChatMessage(role="system", text="s"),
                ChatMessage(role="user", text="u", images=(ImageRef.from_bytes(b"other"),)),
            ),
        )
        assert other.hash() != r1.hash()

    def test_payload_replaced_by_digest(self):
        ref = ImageRef.from_bytes(b"frame-bytes")
        canonical = ChatRequest("m", 0.0, (ChatMessage(role="user", text="u", images=(ref,)),)).canonical()
        assert canonical["messages"][0]["images"] == [ref.digest]


class TestTransports:
    def test_record_then_replay_identical(self, tmp_path):
        session = plain_session()
        recorder = RecordTransport(ScriptedTransport(["first reply"]), tmp_path)
        reply = send(session, ChatMessage(role="user", text="q"), recorder)
        assert reply == "first reply"

        replay_session = plain_session()
        replayed = send(replay_session, ChatMessage(role="user", text="q"), ReplayTransport(tmp_path))
        assert replayed == "first reply"
        assert [m.text for m in replay_session.messages] == [m.text for m in session.messages]

    def test_replay_twice_byte_identical(self, tmp_path):
        recorder = RecordTransport(ScriptedTransport(["r1", "r2"]), tmp_path)
        base = plain_session()
        send(base, ChatMessage(role="user", text="a"), recorder)
        send(base, ChatMessage(role="user", text="b"), recorder)

        transcripts = []
        for _ in range(2):
            session = plain_session()
            send(session, ChatMessage(role="user", text="a"), ReplayTransport(tmp_path))
            send(session, ChatMessage(role="user", text="b"), ReplayTransport(tmp_path))
            transcripts.append("\x00".join(m.text for m in session.messages))
        assert transcripts[0] == transcripts[1]

    def test_fixture_miss(self, tmp_path):
        session = plain_session()
        with pytest.raises(FixtureMiss):
            send(session, ChatMessage(role="user", text="unseen"), ReplayTransport(tmp_path))

    def test_fixture_file_shape(self, tmp_path):
        recorder = RecordTransport(ScriptedTransport(["pong"]), tmp_path, model_id="m")
        send(plain_session(), ChatMessage(role="user", text="ping"), recorder)
        files = list(tmp_path.glob("*.json"))
        assert len(files) == 1
        fixture = Fixture.load(files[0])
        assert fixture.response_text == "pong"
        assert files[0].stem == fixture.request_hash
        assert "recorded_at" in fixture.metadata and "model_id" in fixture.metadata


def _mock_client(responses):
    """httpx client whose transport pops canned (status, json) responses."""
    queue = list(responses)

    def handler(request):
        status, payload = queue.pop(0)
        return httpx.Response(status, json=payload)

    return httpx.Client(transport=httpx.MockTransport(handler))


def _completion(text):
    return {"choices": [{"message": {"content": text}}]}


class TestLiveTransport:
    def make(self, responses, sleeps):
        return LiveTransport(
            "https://example.test/v1/chat/completions",
            api_key="k",
            client=_mock_client(responses),
            sleep=sleeps.append,
        )

    def request(self):
        return ChatRequest("m", 0.0, (ChatMessage(role="user", text="hi"),))

    def test_success(self):
        sleeps = []
        transport = self.make([(200, _completion("ok"))], sleeps)
        assert transport.complete(self.request()) == "ok"
        assert sleeps == []

    def test_retry_then_success(self):
        sleeps = []
        transport = self.make([(500, {}), (200, _completion("ok"))], sleeps)
        assert transport.complete(self.request()) == "ok"
        assert sleeps == [1.0]

    def test_exhausted_retries(self):
        sleeps = []
        transport = self.make([(500, {"err": 1})] * 3, sleeps)
        with pytest.raises(EndpointError) as err:
            transport.complete(self.request())
        assert err.value.status == 500
        assert sleeps == [1.0, 2.0]  # exponential backoff between 3 attempts


def test_render_template_substitution():
    text = render_template("scene_analyzer.txt", {"ACTION": "open the fridge"})
    assert "open the fridge" in text
    assert "[ACTION]" not in text
