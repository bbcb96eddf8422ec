"""Predict-Act-Verify episode loop.

Each replanning round retrieves experience for the goal, asks the policy for
a plan whose steps carry predicted next states, executes the plan step by
step, and judges every grounded prediction against the abstracted outcome.
Discrepancies become process rules; successful episodes become goal
heuristics.
"""
from __future__ import annotations

import json
import logging
import re
from dataclasses import asdict, dataclass
from enum import Enum
from pathlib import Path
from typing import Sequence

from .backends import Backend, BackendError, ChatRequest, parse_agent_response
from .core import (
    SKIP_STRING,
    ActionSpec,
    AgentResponse,
    Feedback,
    Goal,
    PlanStep,
    Profile,
    ResponseError,
    WorldMindError,
)
from .learning import (
    Providers,
    ProviderFailure,
    ReflexionContext,
    StepRecord,
    Trajectory,
    Verdict,
    distill_goals,
    judge,
    reflect,
)
from .prompts import system_prompt
from .repository import ExperienceEntry, Kind, ProcessContext, Repository, Source
from .sim import (
    Observation,
    WorldState,
    abstract_snapshot,
    abstract_state,
    build_catalog,
    evaluate_goal,
    observe,
)
from .sim import step as sim_step

log = logging.getLogger(__name__)

REPAIR_MESSAGE = (
    "!!! Please do not output anything other than the above-mentioned JSON, "
    "do not include ```json and ```!!!"
)
NO_EXPERIENCE = "Summarized experiences: (none)"


class BackendUnavailable(WorldMindError):
    pass


class Termination(str, Enum):
    DECLARED_MET = "GoalDeclaredAndMet"
    DECLARED_UNMET = "GoalDeclaredUnmet"
    TIMEOUT = "Timeout"
    INVALID_STREAK = "InvalidStreak"


class ErrorCategory(str, Enum):
    SUCCESS = "Success"
    INVALID_ACTIONS = "InvalidActions"
    TIMEOUT = "Timeout"
    WRONG_TERMINATION = "WrongTermination"


@dataclass(frozen=True)
class EpisodeConfig:
    step_budget: int = 30
    invalid_streak_cap: int = 5
    retrieval_k: int = 5
    learning_enabled: bool = True
    use_process: bool = True
    use_goal: bool = True
    profile: Profile | None = None
    history_tail: int = 3
    parse_retries: int = 2
    goal_cap: int = 3

    def __post_init__(self):
        if self.step_budget < 1:
            raise ValueError("step_budget must be >= 1")
        if self.invalid_streak_cap < 1:
            raise ValueError("invalid_streak_cap must be >= 1")
        if self.retrieval_k < 0:
            raise ValueError("retrieval_k must be >= 0")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["profile"] = self.profile.value if self.profile else None
        return d


@dataclass(frozen=True)
class EpisodeResult:
    sr: bool
    gc: float
    steps_used: int
    termination: Termination
    wp_added: int = 0
    wg_added: int = 0
    parse_failures: int = 0
    judge_failures: int = 0
    reflection_failures: int = 0
    distill_failures: int = 0

    def __post_init__(self):
        if self.sr != (self.gc == 1.0 and self.termination is Termination.DECLARED_MET):
            raise ValueError("sr must hold exactly when gc == 1 and the goal was declared met")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["termination"] = self.termination.value
        return d


@dataclass(frozen=True)
class GatedStep:
    step: PlanStep
    action: ActionSpec
    grounded: bool

    @property
    def effective_prediction(self) -> str:
        return self.step.predicted_state if self.grounded else SKIP_STRING


# --------------------------------------------------------------------------
# prompt assembly

def _experience_block(retrieved_wp: Sequence[ExperienceEntry], retrieved_wg: Sequence[ExperienceEntry]) -> str:
    if not retrieved_wp and not retrieved_wg:
        return NO_EXPERIENCE
    lines = ["Summarized experiences:"]
    lines += [f"- [goal] {e.text}" for e in retrieved_wg]
    lines += [f"- [process] {e.text}" for e in retrieved_wp]
    return "\n".join(lines)


def _history_block(history_tail: Sequence[StepRecord]) -> str:
    if not history_tail:
        return "Interaction history: (none)"
    lines = ["Interaction history:"]
    lines += [f"Step {r.t}: {r.action.text} -> {r.feedback.render()}" for r in history_tail]
    return "\n".join(lines)


def build_prompt(observation: Observation, goal: Goal, retrieved_wp: Sequence[ExperienceEntry],
                 retrieved_wg: Sequence[ExperienceEntry], history_tail: Sequence[StepRecord],
                 profile: Profile, catalog: Sequence[ActionSpec]) -> tuple[tuple[str, str], ...]:
    """Deterministically assemble the (system, user) messages for one planning round."""
    action_lines = [f"action id {a.id}: {a.text}" for a in catalog]
    system = system_prompt(profile, action_lines)
    user = "\n\n".join([
        f"Instruction: {goal.instruction}",
        _experience_block(retrieved_wp, retrieved_wg),
        "Current observation:\n" + observation.render(),
        _history_block(history_tail),
    ])
    return (("system", system), ("user", user))


# --------------------------------------------------------------------------
# gating

def _mentioned(name: str, texts: Sequence[str]) -> bool:
    pat = re.compile(r"(?<![A-Za-z0-9_])" + re.escape(name) + r"(?![A-Za-z0-9_])", re.IGNORECASE)
    return any(pat.search(t) for t in texts)


def enforce_gating(plan: AgentResponse, observation: Observation, repository_texts: Sequence[str],
                   catalog: Sequence[ActionSpec]) -> list[GatedStep]:
    """Mark each step grounded iff its target is in view or named in retrieved experience.

    Ungrounded steps are judged as skipped whatever the model predicted.
    """
    seen = observation.grounded_names()
    out = []
    for s in plan.executable_plan:
        action = catalog[s.action_id]
        target = action.parameter
        grounded = target in seen or _mentioned(target, repository_texts)
        out.append(GatedStep(s, action, grounded))
    return out


def classify_outcome(result: EpisodeResult) -> ErrorCategory:
    if result.sr:
        return ErrorCategory.SUCCESS
    return {
        Termination.INVALID_STREAK: ErrorCategory.INVALID_ACTIONS,
        Termination.TIMEOUT: ErrorCategory.TIMEOUT,
        Termination.DECLARED_UNMET: ErrorCategory.WRONG_TERMINATION,
        # declared-and-met with gc == 1 is always sr; kept for totality
        Termination.DECLARED_MET: ErrorCategory.WRONG_TERMINATION,
    }[result.termination]


# --------------------------------------------------------------------------
# the loop

def _plan(backend: Backend, messages: tuple[tuple[str, str], ...], catalog: Sequence[ActionSpec],
          config: EpisodeConfig) -> tuple[AgentResponse | None, str]:
    """Query the policy, re-prompting on unusable output. Returns (response, last error)."""
    error = ""
    for _ in range(config.parse_retries + 1):
        request = ChatRequest(messages, model_id=getattr(backend, "model_id", ""))
        try:
            raw = backend.complete(request)
        except BackendError as exc:
            raise BackendUnavailable(str(exc)) from exc
        try:
            return parse_agent_response(raw, catalog), ""
        except ResponseError as exc:
            error = str(exc)
            log.debug("unusable response: %s", error)
            messages = messages + (("assistant", raw), ("user", f"Error: {error}\n{REPAIR_MESSAGE}"))
    return None, error


def run_episode(env_state: WorldState, goal: Goal, repository: Repository, backend: Backend,
                config: EpisodeConfig = EpisodeConfig(), providers: Providers | None = None, *,
                task_id: str = "", catalog: Sequence[ActionSpec] | None = None,
                ) -> tuple[EpisodeResult, Trajectory, Repository]:
    providers = providers or Providers()
    abstractor = providers.abstractor or abstract_state
    catalog = tuple(catalog) if catalog is not None else build_catalog(env_state)
    profile = config.profile or env_state.profile
    evaluate_goal(env_state, goal)
    model_id = getattr(backend, "model_id", "")
    learn_process = config.learning_enabled and config.use_process

    state = env_state
    traj = Trajectory(goal)
    steps_used = streak = 0
    wp_added = wg_added = 0
    counts = {"parse": 0, "judge": 0, "reflect": 0, "distill": 0}
    last_fb: Feedback | None = None
    termination: Termination | None = None

    while termination is None:
        if steps_used >= config.step_budget:
            termination = Termination.TIMEOUT
            break
        k = config.retrieval_k
        wp = [e for e, _ in repository.retrieve(goal.instruction, Kind.PROCESS, k)] if config.use_process else []
        wg = [e for e, _ in repository.retrieve(goal.instruction, Kind.GOAL, k)] if config.use_goal else []
        obs = observe(state, last_fb)
        messages = build_prompt(obs, goal, wp, wg, traj.tail(config.history_tail), profile, catalog)
        response, error = _plan(backend, messages, catalog, config)

        if response is None:
            counts["parse"] += 1
            streak += 1
            last_fb = Feedback(False, f"Invalid response: {error}")
            if streak >= config.invalid_streak_cap:
                termination = Termination.INVALID_STREAK
            continue

        if not response.executable_plan:
            met = evaluate_goal(state, goal).sr
            termination = Termination.DECLARED_MET if met else Termination.DECLARED_UNMET
            break

        texts = [e.text for e in wp] + [e.text for e in wg]
        for gs in enforce_gating(response, obs, texts, catalog):
            if steps_used >= config.step_budget:
                break
            before = state
            state, fb = sim_step(state, gs.action)
            t = steps_used
            steps_used += 1
            abs_before = abstract_snapshot(before, gs.action)
            abs_after = abstractor(before, state, gs.action)
            verdict = judge(gs.effective_prediction, abs_after, providers.judge)
            if verdict.provider_failed:
                counts["judge"] += 1
            if verdict.verdict is Verdict.DISCREPANCY and learn_process:
                ctx = ReflexionContext(traj.tail(config.history_tail), gs.action, abs_before,
                                       gs.step.predicted_state, abs_after)
                try:
                    rule = reflect(ctx, providers.reflector)
                except ProviderFailure:
                    counts["reflect"] += 1
                else:
                    repository.add_process(
                        ProcessContext(gs.action.text, abs_before, gs.step.predicted_state, abs_after),
                        rule, Source(model_id, task_id, t),
                    )
                    wp_added += 1
            traj.steps.append(StepRecord(t, obs, gs.action, gs.step, fb, abs_before, abs_after,
                                         verdict, gated=not gs.grounded))
            last_fb = fb
            if evaluate_goal(state, goal).sr:
                termination = Termination.DECLARED_MET
                break
            if not fb.ok:
                streak += 1
                if streak >= config.invalid_streak_cap:
                    termination = Termination.INVALID_STREAK
                break
            streak = 0

    status = evaluate_goal(state, goal)
    sr = status.sr and termination is Termination.DECLARED_MET
    traj.sr = sr
    if sr and config.learning_enabled and config.use_goal:
        try:
            texts = distill_goals(traj, providers.distiller, config.goal_cap)
        except ProviderFailure:
            counts["distill"] += 1
        else:
            wg_added = len(repository.add_goal(texts, Source(model_id, task_id, steps_used)))
    result = EpisodeResult(
        sr=sr, gc=status.gc, steps_used=steps_used, termination=termination,
        wp_added=wp_added, wg_added=wg_added, parse_failures=counts["parse"],
        judge_failures=counts["judge"], reflection_failures=counts["reflect"],
        distill_failures=counts["distill"],
    )
    return result, traj, repository


def write_trajectory(path: str | Path, trajectory: Trajectory) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for rec in trajectory.steps:
            fh.write(json.dumps(rec.to_log(), ensure_ascii=False) + "\n")
