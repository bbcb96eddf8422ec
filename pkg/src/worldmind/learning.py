"""Turning episodes into experience.

Process experience comes from prediction errors: a judge compares the
predicted next state with the abstracted actual outcome and, on a
discrepancy, a reflector writes a corrective rule. Goal experience is
distilled from successful trajectories.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Protocol, Sequence

from .core import ActionSpec, Feedback, Goal, PlanStep, WorldMindError, is_skip
from .sim import Observation, base_name

DEFAULT_HISTORY_TAIL = 3
DEFAULT_GOAL_CAP = 3

REFLECTION_TEMPLATE = (
    "When attempting '{action}' in state [{before}], the outcome was [{after}], "
    "not [{predicted}]; precondition likely missing — verify before repeating."
)
GOAL_TEMPLATE = "For goals like '{instruction}': successful action order was {actions}."


class ProviderFailure(WorldMindError):
    pass


class NotSuccessful(WorldMindError):
    pass


class Verdict(str, Enum):
    MATCH = "Match"
    DISCREPANCY = "Discrepancy"
    SKIPPED = "Skipped"


@dataclass(frozen=True)
class JudgmentOutcome:
    verdict: Verdict
    rationale: str = ""
    provider_failed: bool = False

    def __post_init__(self):
        if self.verdict is Verdict.DISCREPANCY and not self.rationale:
            raise ValueError("a discrepancy needs a rationale")


@dataclass(frozen=True)
class StepRecord:
    t: int
    observation: Observation
    action: ActionSpec
    plan_step: PlanStep
    feedback: Feedback
    abstract_before: str
    abstract_after: str
    judgment: JudgmentOutcome
    gated: bool = False

    def to_log(self) -> dict:
        return {
            "t": self.t,
            "action": self.action.text,
            "predicted_state": self.plan_step.predicted_state,
            "feedback": self.feedback.render(),
            "judgment": self.judgment.verdict.value,
            "abstract_before": self.abstract_before,
            "abstract_after": self.abstract_after,
        }


@dataclass
class Trajectory:
    goal: Goal
    steps: list[StepRecord] = field(default_factory=list)
    sr: bool = False

    def tail(self, m: int | None) -> tuple[StepRecord, ...]:
        if m is None:
            return tuple(self.steps)
        return tuple(self.steps[-m:]) if m > 0 else ()


@dataclass(frozen=True)
class ReflexionContext:
    history_tail: tuple[StepRecord, ...]
    action: ActionSpec
    abstract_before: str
    predicted: str
    abstract_after: str

    def __post_init__(self):
        if is_skip(self.predicted):
            raise ValueError("cannot reflect on a skipped prediction")


# --------------------------------------------------------------------------
# judgment

_PHRASES: list[tuple[re.Pattern[str], str]] = [
    (re.compile(p), tok) for p, tok in [
        (r"\bclose (?:to|by)\b", " "),
        (r"\bno longer (?:holds?|holding|carr(?:y|ies|ying))\b", " flrelease "),
        (r"\b(?:released?|releases|puts? down|dropped|drops?|let go of)\b", " flrelease "),
        (r"\b(?:turned|turns|turn|switched|switches|switch|powered) on\b", " flon "),
        (r"\b(?:turned|turns|turn|switched|switches|switch|powered) off\b", " floff "),
        (r"\b(?:opened|opens|open)\b", " flopen "),
        (r"\b(?:closed|closes|close|shut)\b", " flclosed "),
        (r"\b(?:sliced|slices|slice|cut|cuts|chopped)\b", " flsliced "),
        (r"\b(?:now holds|holds|holding|held|hold|picks? up|picked up|grabs|grabbed|grab|carries|carrying)\b", " flhold "),
        (r"\b(?:removed|removes|taken|leaves)\b", " flremoved "),
        (r"\b(?:placed|places|stored|stores)\b", " flplaced "),
        (r"\b(?:moved|moves|navigated|navigates|arrived|arrives|goes|went|reached|reaches|travels|traveled)\b", " flmoved "),
    ]
]
_AGENT = {"agent", "robot", "gripper", "hand", "hands", "i", "you"}
_STOP = set("""
a an the is are was were be been being now will would should then it its this that
there here of from to in into on onto at with by and or no not change changes
environment state nothing still remain remains remained new location as after before
has have had which also just successfully becomes become same visible see sees seen
can could may might up down longer inside near next currently current position
""".split())
_WORD = re.compile(r"[a-z0-9_]+")


def _normalize(text: str) -> tuple[set[str], set[str]]:
    """Return (fluent tokens, entity tokens) of a state description."""
    s = text.lower()
    for pattern, tok in _PHRASES:
        s = pattern.sub(tok, s)
    fluents, entities = set(), set()
    for tok in _WORD.findall(s):
        if tok.startswith("fl") and tok in {"flrelease", "flon", "floff", "flopen", "flclosed",
                                            "flsliced", "flhold", "flremoved", "flplaced", "flmoved"}:
            fluents.add(tok)
            continue
        if tok in _STOP:
            continue
        if tok in _AGENT:
            entities.add("agent")
            continue
        if len(tok) > 3 and tok.endswith("s") and not tok.endswith("ss"):
            tok = tok[:-1]
        entities.add(tok)
    return fluents, entities


class DeterministicJudge:
    """Token-subset judge: the prediction matches if every fluent and entity
    it mentions also appears in the actual outcome."""

    def __call__(self, predicted: str, actual: str) -> JudgmentOutcome:
        pf, pe = _normalize(predicted)
        af, ae = _normalize(actual)
        missing_f = sorted(pf - af)
        actual_bases = ae | {base_name(e) for e in ae}
        missing_e = sorted(e for e in pe if e not in actual_bases)
        if not missing_f and not missing_e:
            return JudgmentOutcome(Verdict.MATCH, "prediction consistent with outcome")
        bits = []
        if missing_f:
            bits.append("unrealized changes: " + ", ".join(f[2:] for f in missing_f))
        if missing_e:
            bits.append("entities not in outcome: " + ", ".join(missing_e))
        return JudgmentOutcome(Verdict.DISCREPANCY, "; ".join(bits))


JudgeProvider = Callable[[str, str], JudgmentOutcome]


def judge(predicted: str, abstract_after: str, judge_provider: JudgeProvider | None = None) -> JudgmentOutcome:
    """Compare a prediction with the abstracted outcome.

    Skip-string predictions are ``Skipped`` without consulting the provider.
    A failing provider yields ``Match`` so judge noise never becomes a rule.
    """
    if is_skip(predicted):
        return JudgmentOutcome(Verdict.SKIPPED, "prediction skipped")
    provider = judge_provider or DeterministicJudge()
    try:
        return provider(predicted, abstract_after)
    except ProviderFailure as exc:
        return JudgmentOutcome(Verdict.MATCH, f"judge failure: {exc}", provider_failed=True)


# --------------------------------------------------------------------------
# reflexion

class Reflector(Protocol):
    def __call__(self, ctx: ReflexionContext) -> str: ...


class TemplateReflector:
    def __call__(self, ctx: ReflexionContext) -> str:
        return REFLECTION_TEMPLATE.format(
            action=ctx.action.text,
            before=ctx.abstract_before,
            after=ctx.abstract_after,
            predicted=ctx.predicted.strip(),
        )


def reflect(ctx: ReflexionContext, reflector_provider: Reflector | None = None) -> str:
    provider = reflector_provider or TemplateReflector()
    text = provider(ctx)
    if not text or not text.strip():
        raise ProviderFailure("reflector returned empty text")
    return text.strip()


# --------------------------------------------------------------------------
# goal distillation

_UNDO = {("pick up", "drop"), ("pick", "drop")}


def decisive_actions(steps: Sequence[StepRecord]) -> list[str]:
    """Successful actions with pick-then-drop pairs and consecutive repeats removed."""
    kept: list[ActionSpec] = []
    for rec in steps:
        if not rec.feedback.ok:
            continue
        a = rec.action
        if kept and (kept[-1].name, a.name) in _UNDO and kept[-1].parameter == a.parameter:
            kept.pop()
            continue
        kept.append(a)
    out: list[str] = []
    for a in kept:
        if not out or out[-1] != a.text:
            out.append(a.text)
    return out


class Distiller(Protocol):
    def __call__(self, trajectory: Trajectory) -> list[str]: ...


class TemplateDistiller:
    def __call__(self, trajectory: Trajectory) -> list[str]:
        actions = decisive_actions(trajectory.steps)
        if not actions:
            return []
        return [GOAL_TEMPLATE.format(instruction=trajectory.goal.instruction, actions=", ".join(actions))]


def distill_goals(trajectory: Trajectory, distiller_provider: Distiller | None = None,
                  cap: int = DEFAULT_GOAL_CAP) -> list[str]:
    if not trajectory.sr:
        raise NotSuccessful(f"goal {trajectory.goal.id!r} was not achieved")
    provider = distiller_provider or TemplateDistiller()
    texts = [t.strip() for t in provider(trajectory) if t and t.strip()]
    return texts[:cap]


@dataclass
class Providers:
    """The model roles other than the policy; defaults are deterministic."""

    judge: JudgeProvider = field(default_factory=DeterministicJudge)
    reflector: Reflector = field(default_factory=TemplateReflector)
    distiller: Distiller = field(default_factory=TemplateDistiller)
    abstractor: Callable | None = None
