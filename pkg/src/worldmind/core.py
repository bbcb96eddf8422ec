"""Shared vocabulary: action catalogs, goals, plan steps and response validation."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Iterable, Sequence

SKIP_STRING = "Exploration phase: target not visible, prediction skipped."
SUCCESS_MESSAGE = "Last action executed successfully."
MAX_PLAN_LENGTH = 20


class Profile(str, Enum):
    ALFRED = "AlfredLike"
    HABITAT = "HabitatLike"


LEGAL_ACTIONS: dict[Profile, tuple[str, ...]] = {
    Profile.ALFRED: (
        "find", "pick up", "put down", "drop", "open", "close",
        "turn on", "turn off", "slice",
    ),
    Profile.HABITAT: ("navigation", "pick", "place", "open", "close"),
}


class WorldMindError(Exception):
    """Base class for all package errors."""


class SchemaError(WorldMindError):
    pass


class ResponseError(WorldMindError):
    """A model response that cannot be turned into an executable plan."""


class IdNameMismatch(ResponseError):
    def __init__(self, step_index: int, detail: str = ""):
        self.step_index = step_index
        super().__init__(f"step {step_index}: action id/name mismatch {detail}".rstrip())


class PlanTooLong(ResponseError):
    def __init__(self, length: int):
        self.length = length
        super().__init__(f"plan has {length} actions, limit is {MAX_PLAN_LENGTH}")


class SkipViolation(ResponseError):
    def __init__(self, step_index: int):
        self.step_index = step_index
        super().__init__(f"step {step_index}: prediction resumed after skip string")


class EmptyPredictedState(ResponseError):
    def __init__(self, step_index: int):
        self.step_index = step_index
        super().__init__(f"step {step_index}: empty predicted_state")


@dataclass(frozen=True)
class ActionSpec:
    id: int
    name: str
    parameter: str

    @property
    def text(self) -> str:
        return f"{self.name} {self.parameter}"

    def to_dict(self) -> dict[str, Any]:
        return {"id": self.id, "name": self.text}


@dataclass(frozen=True)
class PlanStep:
    action_id: int
    action_name: str
    predicted_state: str

    def to_dict(self) -> dict[str, Any]:
        return {
            "action_id": self.action_id,
            "action_name": self.action_name,
            "predicted_state": self.predicted_state,
        }


@dataclass(frozen=True)
class AgentResponse:
    language_plan: str
    executable_plan: tuple[PlanStep, ...] = ()

    def to_dict(self) -> dict[str, Any]:
        return {
            "language_plan": self.language_plan,
            "executable_plan": [s.to_dict() for s in self.executable_plan],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False)


@dataclass(frozen=True)
class Feedback:
    ok: bool
    message: str
    hint: str | None = None

    def __post_init__(self):
        if self.ok and self.message != SUCCESS_MESSAGE:
            raise ValueError("successful feedback must carry the success message")

    @classmethod
    def success(cls) -> "Feedback":
        return cls(True, SUCCESS_MESSAGE)

    def render(self) -> str:
        return f"{self.message} ({self.hint})" if self.hint else self.message


class PredicateKind(str, Enum):
    AT = "ObjectAtReceptacle"
    STATE = "ObjectState"
    HOLDING = "Holding"
    NOT_HOLDING = "NotHolding"


STATE_TOKENS = ("on", "off", "open", "closed", "sliced")


@dataclass(frozen=True)
class GoalPredicate:
    kind: PredicateKind
    subject: str
    target: str | None = None

    def __post_init__(self):
        needs_target = self.kind in (PredicateKind.AT, PredicateKind.STATE)
        if needs_target and not self.target:
            raise SchemaError(f"{self.kind.value} needs a target")
        if not needs_target and self.target is not None:
            raise SchemaError(f"{self.kind.value} takes no target")
        if self.kind is PredicateKind.STATE and self.target not in STATE_TOKENS:
            raise SchemaError(f"unknown state token {self.target!r}")
        if not self.subject:
            raise SchemaError("predicate subject is empty")

    def to_dict(self) -> dict[str, Any]:
        d: dict[str, Any] = {"kind": self.kind.value, "subject": self.subject}
        if self.target is not None:
            d["target"] = self.target
        return d


@dataclass(frozen=True)
class Goal:
    id: str
    instruction: str
    conditions: tuple[GoalPredicate, ...]

    def __post_init__(self):
        if not self.conditions:
            raise SchemaError(f"goal {self.id!r} has no conditions")

    def to_dict(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "instruction": self.instruction,
            "conditions": [c.to_dict() for c in self.conditions],
        }

    @classmethod
    def from_dict(cls, doc: dict[str, Any]) -> "Goal":
        try:
            conds = tuple(
                GoalPredicate(PredicateKind(c["kind"]), c["subject"], c.get("target"))
                for c in doc["conditions"]
            )
            return cls(str(doc["id"]), doc["instruction"], conds)
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, SchemaError):
                raise
            raise SchemaError(f"bad goal document: {exc}") from exc


@dataclass(frozen=True)
class WkMdp:
    """Bundle of what an episode is played against: profile, actions, goal, knowledge."""

    state_space_profile: Profile
    action_catalog: tuple[ActionSpec, ...]
    goal: Goal
    repository_ref: Any = field(default=None, compare=False)

    def __post_init__(self):
        check_catalog(self.action_catalog, self.state_space_profile)


def check_catalog(catalog: Sequence[ActionSpec], profile: Profile) -> None:
    legal = LEGAL_ACTIONS[profile]
    for i, spec in enumerate(catalog):
        if spec.id != i:
            raise SchemaError(f"catalog ids must be contiguous from 0; got {spec.id} at {i}")
        if spec.name not in legal:
            raise SchemaError(f"{spec.name!r} is not a {profile.value} action")
        if not spec.parameter:
            raise SchemaError(f"action {i} has an empty parameter")


def split_action_text(text: str, profile: Profile | None = None) -> tuple[str, str]:
    """Split ``"pick up Apple"`` into ``("pick up", "Apple")``.

    The verb is matched case-insensitively against the legal verbs (longest
    first); the parameter keeps its casing.
    """
    verbs: Iterable[str]
    if profile is None:
        verbs = {v for vs in LEGAL_ACTIONS.values() for v in vs}
    else:
        verbs = LEGAL_ACTIONS[profile]
    stripped = text.strip()
    lowered = stripped.lower()
    for verb in sorted(verbs, key=len, reverse=True):
        if lowered.startswith(verb + " "):
            return verb, stripped[len(verb):].strip()
    raise SchemaError(f"cannot parse action {text!r}")


def load_catalog(path: str | Path, profile: Profile) -> tuple[ActionSpec, ...]:
    """Read a JSON ``[{id, name}]`` catalog."""
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    return catalog_from_doc(doc, profile)


def catalog_from_doc(doc: Any, profile: Profile) -> tuple[ActionSpec, ...]:
    if not isinstance(doc, list):
        raise SchemaError("catalog must be a list")
    specs = []
    for item in doc:
        if not isinstance(item, dict) or "id" not in item or "name" not in item:
            raise SchemaError(f"bad catalog entry {item!r}")
        if "parameter" in item:
            verb, param = item["name"].strip().lower(), item["parameter"]
        else:
            verb, param = split_action_text(item["name"], profile)
        specs.append(ActionSpec(int(item["id"]), verb, param))
    specs.sort(key=lambda s: s.id)
    catalog = tuple(specs)
    check_catalog(catalog, profile)
    return catalog


def load_goal(path: str | Path) -> Goal:
    return Goal.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def is_skip(predicted_state: str) -> bool:
    return predicted_state.strip() == SKIP_STRING


def _matches_catalog(step: PlanStep, catalog: Sequence[ActionSpec]) -> bool:
    if not 0 <= step.action_id < len(catalog):
        return False
    spec = catalog[step.action_id]
    name = step.action_name.strip()
    if not name.lower().startswith(spec.name + " "):
        return False
    return name[len(spec.name):].strip() == spec.parameter


def validate_response(raw: AgentResponse, catalog: Sequence[ActionSpec]) -> AgentResponse:
    """Return ``raw`` unchanged if every plan invariant holds, else raise."""
    plan = raw.executable_plan
    if len(plan) > MAX_PLAN_LENGTH:
        raise PlanTooLong(len(plan))
    skipping = False
    for i, step in enumerate(plan):
        if not _matches_catalog(step, catalog):
            raise IdNameMismatch(i, f"({step.action_id}, {step.action_name!r})")
        if not step.predicted_state.strip():
            raise EmptyPredictedState(i)
        if is_skip(step.predicted_state):
            skipping = True
        elif skipping:
            raise SkipViolation(i)
    return raw
