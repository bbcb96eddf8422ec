"""Model backends and the strict parser for agent responses.

Every model role (policy, abstractor, judge, reflector, distiller) goes
through the same ``complete(ChatRequest) -> str`` contract.
"""
from __future__ import annotations

import json
import logging
import os
import re
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Protocol, Sequence

import httpx

from .core import (
    ActionSpec,
    AgentResponse,
    PlanStep,
    ResponseError,
    WorldMindError,
    validate_response,
)
from .learning import (
    JudgmentOutcome,
    ProviderFailure,
    ReflexionContext,
    Trajectory,
    Verdict,
    decisive_actions,
)

log = logging.getLogger(__name__)

ROLES = ("system", "user", "assistant")
RETRY_DELAYS = (0.5, 1.0, 2.0)
API_BASE_ENV = "WORLDMIND_API_BASE"
API_KEY_ENV = "WORLDMIND_API_KEY"


# --------------------------------------------------------------------------
# errors

class BackendError(WorldMindError):
    pass


class Transport(BackendError):
    def __init__(self, kind: str, detail: str = ""):
        self.kind = kind
        super().__init__(f"transport error ({kind}) {detail}".rstrip())


class RateLimited(BackendError):
    def __init__(self, retry_after: float | None):
        self.retry_after = retry_after
        super().__init__(f"rate limited (retry after {retry_after})")


class AuthFailure(BackendError):
    pass


class Timeout(BackendError):
    pass


class ParseError(ResponseError):
    pass


class NotJson(ParseError):
    pass


class MissingField(ParseError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"missing field {name!r}")


class WrongType(ParseError):
    def __init__(self, path: str, expected: str):
        self.path = path
        super().__init__(f"{path}: expected {expected}")


# --------------------------------------------------------------------------
# request / backend contract

@dataclass(frozen=True)
class ChatRequest:
    messages: tuple[tuple[str, str], ...]
    model_id: str = ""
    temperature: float = 0.0
    max_output_tokens: int = 2048
    timeout_ms: int = 60_000

    def __post_init__(self):
        if not self.messages:
            raise ValueError("a request needs at least one message")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        for role, _ in self.messages:
            if role not in ROLES:
                raise ValueError(f"unknown role {role!r}")

    def prompt_text(self) -> str:
        return "\n\n".join(content for _, content in self.messages)


class Backend(Protocol):
    model_id: str

    def complete(self, request: ChatRequest) -> str: ...


# --------------------------------------------------------------------------
# scripted backend

@dataclass(frozen=True)
class Trigger:
    """All listed conditions must hold on the prompt text."""

    contains: tuple[str, ...] = ()
    excludes: tuple[str, ...] = ()
    matches: tuple[str, ...] = ()

    def __call__(self, prompt: str) -> bool:
        return (
            all(c in prompt for c in self.contains)
            and not any(c in prompt for c in self.excludes)
            and all(re.search(p, prompt) for p in self.matches)
        )

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "Trigger":
        unknown = set(d) - {"contains", "excludes", "matches"}
        if unknown:
            raise ValueError(f"unknown trigger keys {sorted(unknown)}")
        return cls(
            tuple(d.get("contains", ())), tuple(d.get("excludes", ())), tuple(d.get("matches", ())),
        )


@dataclass
class ScriptedBackend:
    """First matching rule wins; ``default_response`` answers everything else."""

    rules: list[tuple[Callable[[str], bool], str]] = field(default_factory=list)
    default_response: str = '{"language_plan": "No plan.", "executable_plan": []}'
    model_id: str = "scripted"
    calls: int = 0

    def complete(self, request: ChatRequest) -> str:
        self.calls += 1
        prompt = request.prompt_text()
        for trigger, response in self.rules:
            if trigger(prompt):
                return response
        return self.default_response

    @classmethod
    def from_document(cls, doc: dict[str, Any]) -> "ScriptedBackend":
        rules = []
        for r in doc.get("rules", []):
            resp = r["response"]
            if not isinstance(resp, str):
                resp = json.dumps(resp, ensure_ascii=False)
            rules.append((Trigger.from_dict(r.get("when", {})), resp))
        default = doc.get("default_response", cls.default_response)
        if not isinstance(default, str):
            default = json.dumps(default, ensure_ascii=False)
        return cls(rules, default, doc.get("model_id", "scripted"))

    @classmethod
    def load(cls, path: str | Path) -> "ScriptedBackend":
        return cls.from_document(json.loads(Path(path).read_text(encoding="utf-8")))


# --------------------------------------------------------------------------
# wire client

class WireClient:
    """Chat-completions client over HTTPS with bounded retries.

    Retries 5xx responses and transport failures (3 retries, backoff
    0.5s/1s/2s). 4xx responses are never retried.
    """

    def __init__(self, model_id: str, api_base: str | None = None, api_key: str | None = None,
                 transport: httpx.BaseTransport | None = None,
                 sleep: Callable[[float], None] = time.sleep,
                 delays: Sequence[float] = RETRY_DELAYS):
        self.model_id = model_id
        self.api_base = (api_base or os.environ.get(API_BASE_ENV, "")).rstrip("/")
        self.api_key = api_key if api_key is not None else os.environ.get(API_KEY_ENV, "")
        if not self.api_base:
            raise BackendError(f"no endpoint configured; set {API_BASE_ENV}")
        self._client = httpx.Client(transport=transport)
        self._sleep = sleep
        self._delays = tuple(delays)

    def _payload(self, request: ChatRequest) -> dict[str, Any]:
        return {
            "model": request.model_id or self.model_id,
            "messages": [{"role": r, "content": c} for r, c in request.messages],
            "temperature": request.temperature,
            "max_tokens": request.max_output_tokens,
        }

    def complete(self, request: ChatRequest) -> str:
        url = f"{self.api_base}/chat/completions"
        headers = {"Authorization": f"Bearer {self.api_key}"} if self.api_key else {}
        last: BackendError = Transport("unknown")
        for attempt in range(len(self._delays) + 1):
            if attempt:
                self._sleep(self._delays[attempt - 1])
            try:
                resp = self._client.post(url, json=self._payload(request), headers=headers,
                                         timeout=request.timeout_ms / 1000)
            except httpx.TimeoutException as exc:
                last = Timeout(str(exc))
                continue
            except httpx.TransportError as exc:
                last = Transport(type(exc).__name__, str(exc))
                continue
            status = resp.status_code
            if status in (401, 403):
                raise AuthFailure(f"HTTP {status}")
            if status == 429:
                raise RateLimited(_retry_after(resp.headers.get("retry-after")))
            if 400 <= status < 500:
                raise Transport(f"http_{status}", resp.text[:200])
            if status >= 500:
                last = Transport(f"http_{status}")
                log.warning("attempt %d: HTTP %d from %s", attempt + 1, status, url)
                continue
            try:
                return resp.json()["choices"][0]["message"]["content"] or ""
            except (ValueError, KeyError, IndexError, TypeError) as exc:
                raise Transport("bad_body", str(exc)) from exc
        raise last

    def close(self) -> None:
        self._client.close()


def _retry_after(value: str | None) -> float | None:
    try:
        return float(value) if value else None
    except ValueError:
        return None


def make_backend(spec: str) -> Backend:
    """Build a backend from ``scripted:<file>`` or ``wire:<model_id>``."""
    kind, _, arg = spec.partition(":")
    if kind == "scripted" and arg:
        return ScriptedBackend.load(arg)
    if kind == "wire" and arg:
        return WireClient(arg)
    raise ValueError(f"bad backend spec {spec!r}; use scripted:<file> or wire:<model_id>")


# --------------------------------------------------------------------------
# response parsing

_FENCE = re.compile(r"^\s*```[A-Za-z0-9_-]*\s*\n?(.*?)\n?\s*```\s*$", re.DOTALL)


def _outermost_object(text: str) -> str | None:
    """First balanced ``{...}`` span, honoring JSON string quoting."""
    start = text.find("{")
    if start < 0:
        return None
    depth = 0
    in_str = esc = False
    for i in range(start, len(text)):
        ch = text[i]
        if in_str:
            if esc:
                esc = False
            elif ch == "\\":
                esc = True
            elif ch == '"':
                in_str = False
        elif ch == '"':
            in_str = True
        elif ch == "{":
            depth += 1
        elif ch == "}":
            depth -= 1
            if depth == 0:
                return text[start:i + 1]
    return None


def extract_json_text(raw: str) -> str:
    text = raw.strip()
    m = _FENCE.match(text)
    if m:
        text = m.group(1).strip()
    span = _outermost_object(text)
    if span is None:
        raise NotJson("no complete JSON object found")
    return span


def _require(obj: dict, key: str, path: str, kind: type, label: str):
    if key not in obj:
        raise MissingField(path)
    val = obj[key]
    if kind is int:
        ok = isinstance(val, int) and not isinstance(val, bool)
    else:
        ok = isinstance(val, kind)
    if not ok:
        raise WrongType(path, label)
    return val


def parse_agent_response(raw: str, catalog: Sequence[ActionSpec]) -> AgentResponse:
    """Parse model text into a validated :class:`AgentResponse`.

    Only code fences and surrounding prose are repaired; anything that is not
    strict JSON afterwards is rejected.
    """
    text = extract_json_text(raw)
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise NotJson(str(exc)) from exc
    if not isinstance(doc, dict):
        raise WrongType("$", "object")
    plan_text = _require(doc, "language_plan", "language_plan", str, "string")
    items = _require(doc, "executable_plan", "executable_plan", list, "list")
    steps = []
    for i, item in enumerate(items):
        path = f"executable_plan[{i}]"
        if not isinstance(item, dict):
            raise WrongType(path, "object")
        steps.append(PlanStep(
            _require(item, "action_id", f"{path}.action_id", int, "integer"),
            _require(item, "action_name", f"{path}.action_name", str, "string"),
            _require(item, "predicted_state", f"{path}.predicted_state", str, "string"),
        ))
    return validate_response(AgentResponse(plan_text, tuple(steps)), catalog)


def serialize_response(resp: AgentResponse) -> str:
    return resp.to_json()


# --------------------------------------------------------------------------
# model-backed providers for the non-policy roles

def _ask(backend: Backend, system: str, user: str, timeout_ms: int) -> str:
    req = ChatRequest((("system", system), ("user", user)), model_id=backend.model_id,
                      timeout_ms=timeout_ms)
    try:
        return backend.complete(req)
    except BackendError as exc:
        raise ProviderFailure(str(exc)) from exc


@dataclass
class ModelJudge:
    backend: Backend
    timeout_ms: int = 30_000

    def __call__(self, predicted: str, actual: str) -> JudgmentOutcome:
        text = _ask(
            self.backend,
            "You verify an embodied agent's state prediction against what actually happened. "
            "Reply MATCH if the prediction is consistent with the outcome, otherwise "
            "DISCREPANCY: <one-line reason>.",
            f"Predicted: {predicted}\nActual: {actual}",
            self.timeout_ms,
        ).strip()
        head = text.split(":", 1)[0].strip().upper()
        if head.startswith("MATCH"):
            return JudgmentOutcome(Verdict.MATCH, text)
        if head.startswith("DISCREPANCY"):
            reason = text.split(":", 1)[1].strip() if ":" in text else "model reported discrepancy"
            return JudgmentOutcome(Verdict.DISCREPANCY, reason or "model reported discrepancy")
        raise ProviderFailure(f"unreadable judge reply {text[:80]!r}")


@dataclass
class ModelReflector:
    backend: Backend
    timeout_ms: int = 30_000

    def __call__(self, ctx: ReflexionContext) -> str:
        history = "\n".join(f"- {r.action.text}: {r.feedback.render()}" for r in ctx.history_tail) or "- (none)"
        return _ask(
            self.backend,
            "Write one imperative causal rule (a single sentence) that would have prevented "
            "the agent's wrong prediction.",
            f"Recent history:\n{history}\nAction: {ctx.action.text}\n"
            f"State before: {ctx.abstract_before}\nPredicted: {ctx.predicted}\n"
            f"Actual: {ctx.abstract_after}",
            self.timeout_ms,
        ).strip()


@dataclass
class ModelDistiller:
    backend: Backend
    timeout_ms: int = 30_000

    def __call__(self, trajectory: Trajectory) -> list[str]:
        text = _ask(
            self.backend,
            "Summarize up to three reusable strategy heuristics, one per line, from this "
            "successful episode. Ignore incidental details.",
            f"Goal: {trajectory.goal.instruction}\nActions: {', '.join(decisive_actions(trajectory.steps))}",
            self.timeout_ms,
        )
        return [ln.strip(" -*\t") for ln in text.splitlines() if ln.strip(" -*\t")]


@dataclass
class ModelAbstractor:
    """Model-written description of the fluent delta between two states."""

    backend: Backend
    timeout_ms: int = 30_000

    def __call__(self, before, after, action) -> str:
        from .sim import fluents

        b, a = fluents(before), fluents(after)
        delta = {k: (b.get(k), a.get(k)) for k in a if k != "step_count" and b.get(k) != a.get(k)}
        return _ask(
            self.backend,
            "Describe in one short sentence the high-level change in the environment.",
            f"Action: {action.text}\nChanged fluents: {json.dumps(delta, sort_keys=True)}",
            self.timeout_ms,
        ).strip()
