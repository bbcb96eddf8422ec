import pytest
from hypothesis import given
from hypothesis import strategies as st

from worldmind.backends import ModelDistiller, ModelJudge, ModelReflector, ScriptedBackend, Trigger
from worldmind.core import SKIP_STRING, ActionSpec, Feedback, Goal, GoalPredicate, PlanStep, PredicateKind
from worldmind.learning import (
    GOAL_TEMPLATE,
    DeterministicJudge,
    JudgmentOutcome,
    NotSuccessful,
    ProviderFailure,
    ReflexionContext,
    StepRecord,
    Trajectory,
    Verdict,
    decisive_actions,
    distill_goals,
    judge,
    reflect,
)
from worldmind.sim import NO_CHANGE, Observation

GOAL = Goal("g", "Slice the Apple.", (GoalPredicate(PredicateKind.STATE, "Apple", "sliced"),))
OBS = Observation("start", (), (), None)


def rec(t, verb, target, ok=True):
    a = ActionSpec(t, verb, target)
    fb = Feedback.success() if ok else Feedback(False, "Invalid action: nope")
    return StepRecord(t, OBS, a, PlanStep(a.id, a.text, SKIP_STRING), fb, "", "",
                      JudgmentOutcome(Verdict.SKIPPED))


class Exploding:
    calls = 0

    def __call__(self, *args):
        self.calls += 1
        raise ProviderFailure("down")


def test_skip_never_consults_provider():
    provider = Exploding()
    out = judge(SKIP_STRING, "anything", provider)
    assert out.verdict is Verdict.SKIPPED and provider.calls == 0


def test_judge_examples():
    assert judge("Agent now holds Apple",
                 "Agent now holds Apple; Apple removed from CounterTop_1.").verdict is Verdict.MATCH
    assert judge("Apple is sliced", NO_CHANGE).verdict is Verdict.DISCREPANCY
    assert judge("Gripper holds Apple; Apple leaves CounterTop",
                 "Agent now holds Apple; Apple removed from CounterTop_1.").verdict is Verdict.MATCH
    assert judge("Agent is close to the Fridge_1", "Agent moved to Fridge_1.").verdict is Verdict.MATCH
    assert judge("Fridge_1 is open", "Agent moved to Fridge_1.").verdict is Verdict.DISCREPANCY
    assert judge("Apple is placed in CounterTop_1",
                 "Agent released Apple; Apple placed in CounterTop_2.").verdict is Verdict.DISCREPANCY


def test_judge_failure_defaults_to_match():
    out = judge("Apple is sliced", NO_CHANGE, Exploding())
    assert out.verdict is Verdict.MATCH and out.provider_failed


phrases = st.lists(st.sampled_from([
    "Agent", "moved", "to", "CounterTop_1", "Apple", "is", "now", "sliced", "holds", "Knife",
    "Fridge_1", "open", "closed", "placed", "in", "removed", "from", "turned", "on", "off", "released", ";",
]), min_size=1, max_size=12).map(" ".join)


@given(phrases | st.text(min_size=1, max_size=40))
def test_judge_identity(x):
    if x.strip() == SKIP_STRING:
        return
    assert DeterministicJudge()(x, x).verdict is Verdict.MATCH


def ctx(history=()):
    return ReflexionContext(tuple(history), ActionSpec(17, "slice", "Apple"),
                            "Agent at CounterTop_1; holding nothing", "Apple is sliced", NO_CHANGE)


def test_reflection_template():
    rule = reflect(ctx())
    assert "slice Apple" in rule and "No change" in rule
    assert reflect(ctx()) == rule
    assert reflect(ctx([rec(0, "find", "Apple")])) == rule


def test_reflection_rejects_skip_and_empty():
    with pytest.raises(ValueError):
        ReflexionContext((), ActionSpec(0, "find", "Apple"), "", SKIP_STRING, NO_CHANGE)
    with pytest.raises(ProviderFailure):
        reflect(ctx(), lambda c: "  ")


def test_distill_requires_success():
    with pytest.raises(NotSuccessful):
        distill_goals(Trajectory(GOAL, [rec(0, "find", "Apple")], sr=False))


def test_distill_knife_plan():
    steps = [rec(0, "find", "Knife"), rec(1, "pick up", "Knife"), rec(2, "find", "Apple"), rec(3, "slice", "Apple")]
    out = distill_goals(Trajectory(GOAL, steps, sr=True))
    assert out == [GOAL_TEMPLATE.format(instruction=GOAL.instruction,
                                        actions="find Knife, pick up Knife, find Apple, slice Apple")]


def test_distill_drops_noise():
    steps = [rec(0, "find", "Apple"), rec(1, "slice", "Apple", ok=False), rec(2, "find", "Knife"),
             rec(3, "pick up", "Knife"), rec(4, "find", "Apple"), rec(5, "find", "Apple"), rec(6, "slice", "Apple")]
    assert decisive_actions(steps) == ["find Apple", "find Knife", "pick up Knife", "find Apple", "slice Apple"]
    undo = [rec(0, "pick up", "Egg"), rec(1, "drop", "Egg"), rec(2, "find", "Knife")]
    assert decisive_actions(undo) == ["find Knife"]


def test_distill_cap():
    out = distill_goals(Trajectory(GOAL, [rec(0, "find", "Apple")], sr=True),
                        lambda t: ["a", "b", "", "c", "d"], cap=3)
    assert out == ["a", "b", "c"]


def scripted(*pairs, default="x"):
    return ScriptedBackend([(Trigger(contains=(c,)), r) for c, r in pairs], default)


def test_model_judge_parsing():
    j = ModelJudge(scripted(("Predicted: A", "MATCH"), ("Predicted: B", "DISCREPANCY: no knife")))
    assert j("A", "x").verdict is Verdict.MATCH
    out = j("B", "x")
    assert out.verdict is Verdict.DISCREPANCY and out.rationale == "no knife"
    with pytest.raises(ProviderFailure):
        j("C", "x")
    assert judge("C", "x", j).provider_failed


def test_model_reflector_and_distiller():
    r = ModelReflector(scripted(("Action: slice Apple", "Hold a knife before slicing.")))
    assert reflect(ctx(), r) == "Hold a knife before slicing."
    d = ModelDistiller(scripted(("Goal: Slice the Apple.", "- get knife\n- then slice\n\n* done")))
    out = distill_goals(Trajectory(GOAL, [rec(0, "find", "Apple")], sr=True), d)
    assert out == ["get knife", "then slice", "done"]
