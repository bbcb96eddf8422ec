import json
import socket

import httpx
import pytest
from hypothesis import given
from hypothesis import strategies as st

import checks
from worldmind import backends, core
from worldmind.backends import (
    AuthFailure,
    BackendError,
    ChatRequest,
    MissingField,
    ModelAbstractor,
    ModelJudge,
    RateLimited,
    ScriptedBackend,
    Timeout,
    Transport,
    Trigger,
    WireClient,
    make_backend,
    parse_agent_response,
    serialize_response,
)
from worldmind.core import SKIP_STRING, AgentResponse, PlanStep
from worldmind.learning import ProviderFailure, judge
from worldmind.sim import build_catalog, load_world, step

CORPUS = json.loads((checks.DATA / "parser_corpus.json").read_text())
REQ = ChatRequest((("system", "sys"), ("user", "hello")), model_id="m")
OK_BODY = {"choices": [{"message": {"role": "assistant", "content": "hi"}}]}


@pytest.mark.parametrize("case", CORPUS, ids=[c["id"] for c in CORPUS])
def test_parser_corpus(case, kitchen_catalog):
    expect = case["expect"]
    if "ok" in expect:
        resp = parse_agent_response(case["raw"], kitchen_catalog)
        assert len(resp.executable_plan) == expect["ok"]
        return
    cls = getattr(backends, expect["error"], None) or getattr(core, expect["error"])
    with pytest.raises(cls) as exc:
        parse_agent_response(case["raw"], kitchen_catalog)
    for attr, value in expect.get("attrs", {}).items():
        assert getattr(exc.value, attr) == value


def test_corpus_size():
    assert len(CORPUS) == 40
    assert sum("ok" in c["expect"] for c in CORPUS) >= 20


def test_missing_executable_plan(kitchen_catalog):
    with pytest.raises(MissingField) as exc:
        parse_agent_response('{"language_plan": "p"}', kitchen_catalog)
    assert exc.value.name == "executable_plan"


def test_fence_is_stripped(kitchen_catalog):
    raw = '```json\n{"language_plan": "done", "executable_plan": []}\n```'
    assert parse_agent_response(raw, kitchen_catalog) == AgentResponse("done", ())


CAT = build_catalog(load_world(checks.FIXTURES / "worlds" / "kitchen_small.json"))


@st.composite
def valid_responses(draw):
    n = draw(st.integers(0, core.MAX_PLAN_LENGTH))
    cut = draw(st.integers(0, n))
    text = st.text(st.characters(blacklist_categories=("Cs",)), min_size=1, max_size=30).filter(
        lambda s: s.strip() and s.strip() != SKIP_STRING)
    steps = []
    for i in range(n):
        a = draw(st.sampled_from(CAT))
        steps.append(PlanStep(a.id, a.text, SKIP_STRING if i >= cut else draw(text)))
    return AgentResponse(draw(st.text(max_size=40)), tuple(steps))


@given(valid_responses())
def test_parse_serialize_round_trip(resp):
    assert parse_agent_response(serialize_response(resp), CAT) == resp


# --------------------------------------------------------------------------
# scripted backend

def test_scripted_first_match_and_default():
    b = ScriptedBackend([(Trigger(contains=("apple",)), "A"), (Trigger(matches=(r"app\w+",)), "B")], "D")
    assert b.complete(ChatRequest((("user", "an apple"),))) == "A"
    assert b.complete(ChatRequest((("user", "apples are red"),))) == "A"
    assert b.complete(ChatRequest((("user", "application"),))) == "B"
    assert b.complete(ChatRequest((("user", "pear"),))) == "D"
    assert Trigger(contains=("a",), excludes=("b",))("a c") and not Trigger(contains=("a",), excludes=("b",))("a b")


def test_scripted_backend_from_fixture_is_deterministic_and_offline(monkeypatch):
    def no_network(*args, **kwargs):
        raise AssertionError("network access attempted")

    monkeypatch.setattr(socket, "socket", no_network)
    monkeypatch.setattr(httpx.Client, "send", no_network)
    b1 = make_backend(f"scripted:{checks.FIXTURES / 'backends' / 'knife_a.json'}")
    b2 = make_backend(f"scripted:{checks.FIXTURES / 'backends' / 'knife_a.json'}")
    prompts = ["Instruction: Slice the Apple.\n", "Visible objects: Apple (CounterTop_1)", "nothing"]
    for p in prompts:
        r = ChatRequest((("user", p),))
        assert b1.complete(r) == b2.complete(r) == b1.complete(r)


def test_trigger_rejects_unknown_keys():
    with pytest.raises(ValueError):
        Trigger.from_dict({"contain": ["x"]})


def test_chat_request_validation():
    with pytest.raises(ValueError):
        ChatRequest(())
    with pytest.raises(ValueError):
        ChatRequest((("robot", "x"),))
    with pytest.raises(ValueError):
        ChatRequest((("user", "x"),), temperature=-1)


def test_make_backend_errors(monkeypatch):
    monkeypatch.delenv("WORLDMIND_API_BASE", raising=False)
    with pytest.raises(ValueError):
        make_backend("magic:thing")
    with pytest.raises(BackendError):
        make_backend("wire:some-model")
    monkeypatch.setenv("WORLDMIND_API_BASE", "https://example.invalid/v1")
    assert isinstance(make_backend("wire:some-model"), WireClient)


# --------------------------------------------------------------------------
# wire client

class Script:
    """MockTransport handler replaying a list of outcomes."""

    def __init__(self, *outcomes):
        self.outcomes = list(outcomes)
        self.seen = []

    def __call__(self, request):
        self.seen.append(request)
        out = self.outcomes[min(len(self.seen) - 1, len(self.outcomes) - 1)]
        if isinstance(out, Exception):
            raise out
        status, body, headers = out if len(out) == 3 else (*out, {})
        return httpx.Response(status, json=body, headers=headers)


def client(script):
    sleeps = []
    c = WireClient("m", "https://api.test/v1/", "k", transport=httpx.MockTransport(script), sleep=sleeps.append)
    return c, sleeps


def test_wire_success_payload():
    script = Script((200, OK_BODY))
    c, sleeps = client(script)
    assert c.complete(REQ) == "hi" and sleeps == []
    sent = script.seen[0]
    assert str(sent.url) == "https://api.test/v1/chat/completions"
    assert sent.headers["authorization"] == "Bearer k"
    body = json.loads(sent.content)
    assert body["messages"] == [{"role": "system", "content": "sys"}, {"role": "user", "content": "hello"}]
    assert body["temperature"] == 0.0 and body["model"] == "m"


def test_wire_retries_5xx_then_succeeds():
    script = Script((500, {}), (200, OK_BODY))
    c, sleeps = client(script)
    assert c.complete(REQ) == "hi"
    assert len(script.seen) == 2 and sleeps == [0.5]


def test_wire_5xx_exhausts_after_three_retries():
    script = Script((503, {}))
    c, sleeps = client(script)
    with pytest.raises(Transport) as exc:
        c.complete(REQ)
    assert exc.value.kind == "http_503"
    assert len(script.seen) == 4 and sleeps == [0.5, 1.0, 2.0]


@pytest.mark.parametrize("status", [401, 403])
def test_wire_auth_not_retried(status):
    script = Script((status, {}))
    c, sleeps = client(script)
    with pytest.raises(AuthFailure):
        c.complete(REQ)
    assert len(script.seen) == 1 and sleeps == []


def test_wire_rate_limited_not_retried():
    script = Script((429, {}, {"retry-after": "7"}))
    c, _ = client(script)
    with pytest.raises(RateLimited) as exc:
        c.complete(REQ)
    assert exc.value.retry_after == 7.0 and len(script.seen) == 1
    c, _ = client(Script((429, {}, {"retry-after": "Wed, 21 Oct 2015 07:28:00 GMT"})))
    with pytest.raises(RateLimited) as exc:
        c.complete(REQ)
    assert exc.value.retry_after is None


def test_wire_other_4xx_not_retried():
    script = Script((404, {"error": "no such model"}))
    c, _ = client(script)
    with pytest.raises(Transport) as exc:
        c.complete(REQ)
    assert exc.value.kind == "http_404" and len(script.seen) == 1


def test_wire_timeout_retried_then_raised():
    script = Script(httpx.ReadTimeout("slow"))
    c, sleeps = client(script)
    with pytest.raises(Timeout):
        c.complete(REQ)
    assert len(script.seen) == 4 and len(sleeps) == 3


def test_wire_connect_error_then_success():
    script = Script(httpx.ConnectError("refused"), (200, OK_BODY))
    c, _ = client(script)
    assert c.complete(REQ) == "hi"


def test_wire_bad_body():
    c, _ = client(Script((200, {"choices": []})))
    with pytest.raises(Transport) as exc:
        c.complete(REQ)
    assert exc.value.kind == "bad_body"


def test_wire_failure_surfaces_as_provider_failure():
    c, _ = client(Script((500, {})))
    out = judge("Apple is sliced", "No change in environment state.", ModelJudge(c))
    assert out.provider_failed


def test_model_abstractor_sees_delta():
    kitchen = load_world(checks.FIXTURES / "worlds" / "kitchen_small.json")
    after, _ = step(kitchen, CAT[3])
    b = ScriptedBackend([(Trigger(contains=('"agent_at": ["start", "CounterTop_1"]',)), "Agent walked over.")], "?")
    assert ModelAbstractor(b)(kitchen, after, CAT[3]) == "Agent walked over."
    with pytest.raises(ProviderFailure):
        ModelAbstractor(client(Script((502, {})))[0])(kitchen, after, CAT[3])
