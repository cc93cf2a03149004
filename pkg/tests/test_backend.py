import json

import httpx
import pytest
from hypothesis import given
from hypothesis import strategies as st

from strides.backend import (
    ChatRequest,
    ChatResponse,
    RecordingBackend,
    RemoteBackend,
    ReplayBackend,
    ScriptedBackend,
    Transcript,
    complete,
    estimate_tokens,
    extract_structured,
)
from strides.errors import AuthMissing, Exhausted, MalformedObject, NoObjectFound, TranscriptMiss, UnbalancedBraces


def _req(tag="inst/theory", temperature=0.0):
    return ChatRequest("system", "user", tag, temperature)


def test_replay_is_deterministic():
    t = Transcript.from_responses({"inst/theory": ['{"a": 1}', '{"a": 2}']})
    runs = []
    for _ in range(2):
        b = ReplayBackend(t)
        runs.append([complete(_req(), b).text for _ in range(2)])
    assert runs[0] == runs[1] == ['{"a": 1}', '{"a": 2}']


def test_replay_miss_names_tag_and_index():
    b = ReplayBackend(Transcript.from_responses({"inst/theory": ["{}"]}))
    with pytest.raises(TranscriptMiss) as err:
        complete(_req("inst/critic"), b)
    assert "inst/critic" in str(err.value)


def test_replay_reports_tokens_verbatim():
    resp = ChatResponse("{}", 11, 7, "remote:x")
    b = ReplayBackend(Transcript([("inst/theory#0", resp)]))
    assert complete(_req(), b) == resp


def test_transcript_rejects_duplicate_keys():
    r = ChatResponse("{}")
    with pytest.raises(ValueError):
        Transcript([("k#0", r), ("k#0", r)])


def test_transcript_save_load(tmp_path):
    t = Transcript.from_responses({"a/theory": ["x", "y"], "a/critic": ["z"]})
    path = tmp_path / "t.jsonl"
    t.save(path)
    assert Transcript.load(path).entries == t.entries


def test_recording_then_replay_matches():
    inner = ScriptedBackend(lambda r: f"reply to {r.role_tag}")
    rec = RecordingBackend(inner)
    first = [complete(_req(tag), rec).text for tag in ("a/theory", "a/critic", "a/theory")]
    replay = ReplayBackend(rec.transcript)
    assert [complete(_req(tag), replay).text for tag in ("a/theory", "a/critic", "a/theory")] == first


def test_request_validation():
    with pytest.raises(ValueError):
        ChatRequest("s", "u", "tag", temperature=2.5)
    with pytest.raises(ValueError):
        ChatRequest("s", "u", "")
    with pytest.raises(ValueError):
        ChatResponse("x", -1, 0)


def test_estimate_tokens_is_ceiling():
    assert estimate_tokens("") == 0
    assert estimate_tokens("abcd") == 1
    assert estimate_tokens("abcde") == 2


def test_remote_requires_credentials(monkeypatch):
    monkeypatch.delenv("STRIDES_API_KEY", raising=False)
    with pytest.raises(AuthMissing):
        RemoteBackend("m")


def _remote(monkeypatch, handler, **kw):
    monkeypatch.setenv("STRIDES_API_KEY", "k")
    client = httpx.Client(transport=httpx.MockTransport(handler))
    return RemoteBackend("m", url="http://test/v1", client=client, sleep=lambda s: None, **kw)


def test_remote_uses_reported_usage(monkeypatch):
    def handler(request):
        body = json.loads(request.content)
        assert body["model"] == "m" and body["messages"][0]["role"] == "system"
        assert request.headers["authorization"] == "Bearer k"
        return httpx.Response(200, json={"choices": [{"message": {"content": "hi"}}],
                                         "usage": {"prompt_tokens": 5, "completion_tokens": 2}})
    resp = _remote(monkeypatch, handler).complete(_req())
    assert (resp.text, resp.prompt_tokens, resp.completion_tokens, resp.estimated) == ("hi", 5, 2, False)


def test_remote_estimates_missing_usage(monkeypatch):
    def handler(request):
        return httpx.Response(200, json={"choices": [{"message": {"content": "abcdefgh"}}]})
    resp = _remote(monkeypatch, handler).complete(_req())
    assert resp.estimated and resp.completion_tokens == 2


def test_remote_retries_then_exhausts(monkeypatch):
    calls = []

    def handler(request):
        calls.append(1)
        return httpx.Response(503)
    backend = _remote(monkeypatch, handler, max_retries=2)
    with pytest.raises(Exhausted):
        backend.complete(_req())
    assert len(calls) == 3


def test_remote_recovers_after_transient(monkeypatch):
    state = {"n": 0}

    def handler(request):
        state["n"] += 1
        if state["n"] == 1:
            return httpx.Response(429)
        return httpx.Response(200, json={"choices": [{"message": {"content": "ok"}}]})
    assert _remote(monkeypatch, handler).complete(_req()).text == "ok"


def test_extract_fenced():
    assert extract_structured('```json\n{"a":1}\n```') == {"a": 1}


def test_extract_from_prose():
    obj = extract_structured('Sure. {"pass": true, "critique": "fine {ok}"} Thanks!')
    assert obj["pass"] is True and obj["critique"] == "fine {ok}"


def test_extract_errors():
    with pytest.raises(NoObjectFound):
        extract_structured("no braces here")
    with pytest.raises(UnbalancedBraces):
        extract_structured('{"a": {"b": 1}')
    with pytest.raises(MalformedObject):
        extract_structured("{a: 1}")


_json = st.recursive(
    st.none() | st.booleans() | st.integers() | st.text(max_size=10),
    lambda children: st.lists(children, max_size=3) | st.dictionaries(st.text(max_size=5), children, max_size=3),
    max_leaves=10,
)


@given(st.dictionaries(st.text(max_size=8), _json, max_size=4))
def test_extract_inverts_serialization(value):
    assert extract_structured(json.dumps(value)) == value
