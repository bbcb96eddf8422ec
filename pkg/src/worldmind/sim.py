"""Deterministic symbolic household simulator.

States are immutable; :func:`step` returns a new state plus in-band feedback.
Invalid actions never raise: they leave the state untouched except for
``step_count`` and report which validity rule was violated.
"""
from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any, Iterable, Iterator, Sequence

import jsonschema

from .core import (
    LEGAL_ACTIONS,
    ActionSpec,
    Feedback,
    Goal,
    PredicateKind,
    Profile,
    SchemaError,
    WorldMindError,
    split_action_text,
)

START = "start"
FLOOR = "Floor"
NO_CHANGE = "No change in environment state."

IN_RECEPTACLE = "receptacle"
IN_GRIPPER = "gripper"
ON_FLOOR = "floor"


class DanglingReference(SchemaError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"reference to unknown receptacle {name!r}")


class DuplicateName(SchemaError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"duplicate entity name {name!r}")


class UnknownEntity(WorldMindError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"unknown entity {name!r}")


@dataclass(frozen=True)
class Location:
    kind: str
    place: str | None = None

    def render(self) -> str:
        if self.kind == IN_RECEPTACLE:
            return f"in {self.place}"
        if self.kind == IN_GRIPPER:
            return "held"
        return f"on the floor at {self.place}"


@dataclass(frozen=True)
class Receptacle:
    name: str
    openable: bool = False
    is_open: bool = True
    segment_group: str | None = None


@dataclass(frozen=True)
class ObjectRec:
    name: str
    location: Location
    sliceable: bool = False
    sliced: bool = False
    toggleable: bool = False
    is_on: bool = False
    pickupable: bool = True
    cls: str = ""

    @property
    def object_class(self) -> str:
        return self.cls or base_name(self.name)


@dataclass(frozen=True)
class LatentRule:
    action: str
    requires_holding_class: str | None = None


@dataclass(frozen=True)
class WorldState:
    profile: Profile
    receptacles: dict[str, Receptacle]
    objects: dict[str, ObjectRec]
    agent_at: str = START
    gripper: str | None = None
    step_count: int = 0
    rng_seed: int = 0
    latent_rules: tuple[LatentRule, ...] = ()
    emit_hints: bool = False

    def key(self) -> tuple:
        """Hashable identity of the dynamic fluents (ignores step_count)."""
        return (
            self.agent_at,
            self.gripper,
            tuple(sorted((r.name, r.is_open) for r in self.receptacles.values())),
            tuple(sorted(
                (o.name, o.location.kind, o.location.place, o.sliced, o.is_on)
                for o in self.objects.values()
            )),
        )


@dataclass(frozen=True)
class Observation:
    agent_at: str
    visible_objects: tuple[tuple[str, str], ...]
    visible_receptacles: tuple[str, ...]
    gripper_view: str | None
    last_feedback: Feedback | None = None
    segment_peers: tuple[str, ...] = ()

    def grounded_names(self) -> set[str]:
        names = {o for o, _ in self.visible_objects} | set(self.visible_receptacles)
        if self.gripper_view:
            names.add(self.gripper_view)
        return names

    def render(self) -> str:
        objs = ", ".join(f"{o} ({r})" for o, r in self.visible_objects) or "none"
        lines = [
            f"Agent location: {self.agent_at}",
            f"Visible receptacles: {', '.join(self.visible_receptacles) or 'none'}",
            f"Visible objects: {objs}",
            f"Holding: {self.gripper_view or 'nothing'}",
        ]
        if self.segment_peers:
            lines.append(f"Connected segments: {', '.join(self.segment_peers)}")
        fb = self.last_feedback.render() if self.last_feedback else "none"
        lines.append(f"Last feedback: {fb}")
        return "\n".join(lines)


@dataclass(frozen=True)
class SubgoalStatus:
    bits: tuple[bool, ...]

    @property
    def gc(self) -> float:
        return sum(self.bits) / len(self.bits)

    @property
    def sr(self) -> bool:
        return all(self.bits)


_SUFFIX = re.compile(r"^(.*?)_(\d+)$")


def base_name(name: str) -> str:
    m = _SUFFIX.match(name)
    return m.group(1) if m else name


def instance_index(name: str) -> int:
    m = _SUFFIX.match(name)
    return int(m.group(2)) if m else 0


def _receptacle_order(name: str) -> tuple:
    return (base_name(name), instance_index(name), name)


# --------------------------------------------------------------------------
# loading

WORLD_SCHEMA: dict[str, Any] = {
    "type": "object",
    "required": ["profile", "receptacles", "objects"],
    "properties": {
        "profile": {"enum": [p.value for p in Profile]},
        "receptacles": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["name"],
                "properties": {
                    "name": {"type": "string", "minLength": 1},
                    "openable": {"type": "boolean"},
                    "open": {"type": "boolean"},
                    "segment_group": {"type": ["string", "null"]},
                },
                "additionalProperties": False,
            },
        },
        "objects": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["name", "at"],
                "properties": {
                    "name": {"type": "string", "minLength": 1},
                    "at": {"type": "string", "minLength": 1},
                    "sliceable": {"type": "boolean"},
                    "sliced": {"type": "boolean"},
                    "toggleable": {"type": "boolean"},
                    "on": {"type": "boolean"},
                    "pickupable": {"type": "boolean"},
                    "class": {"type": "string"},
                },
                "additionalProperties": False,
            },
        },
        "latent_rules": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["action"],
                "properties": {
                    "action": {"type": "string"},
                    "requires_holding_class": {"type": ["string", "null"]},
                },
                "additionalProperties": False,
            },
        },
        "emit_hints": {"type": "boolean"},
        "seed": {"type": "integer"},
    },
}


def load_world(world_spec: dict[str, Any] | str | Path, seed: int | None = None) -> WorldState:
    """Build the initial state from a world-spec document (or a path to one)."""
    if isinstance(world_spec, (str, Path)):
        world_spec = json.loads(Path(world_spec).read_text(encoding="utf-8"))
    try:
        jsonschema.validate(world_spec, WORLD_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise SchemaError(exc.message) from exc

    profile = Profile(world_spec["profile"])
    receptacles: dict[str, Receptacle] = {}
    for r in world_spec["receptacles"]:
        if r["name"] in receptacles or r["name"] in (START, FLOOR):
            raise DuplicateName(r["name"])
        openable = r.get("openable", False)
        receptacles[r["name"]] = Receptacle(
            r["name"], openable, r.get("open", not openable) or not openable,
            r.get("segment_group"),
        )
    objects: dict[str, ObjectRec] = {}
    for o in world_spec["objects"]:
        name = o["name"]
        if name in objects or name in receptacles:
            raise DuplicateName(name)
        if o["at"] not in receptacles:
            raise DanglingReference(o["at"])
        sliceable = o.get("sliceable", False)
        toggleable = o.get("toggleable", False)
        if o.get("sliced", False) and not sliceable:
            raise SchemaError(f"{name} is sliced but not sliceable")
        if o.get("on", False) and not toggleable:
            raise SchemaError(f"{name} is on but not toggleable")
        objects[name] = ObjectRec(
            name=name,
            location=Location(IN_RECEPTACLE, o["at"]),
            sliceable=sliceable,
            sliced=o.get("sliced", False),
            toggleable=toggleable,
            is_on=o.get("on", False),
            pickupable=o.get("pickupable", True),
            cls=o.get("class", ""),
        )
    legal = LEGAL_ACTIONS[profile]
    rules = []
    for lr in world_spec.get("latent_rules", []):
        if lr["action"] not in legal:
            raise SchemaError(f"latent rule for unknown action {lr['action']!r}")
        rules.append(LatentRule(lr["action"], lr.get("requires_holding_class")))
    return WorldState(
        profile=profile,
        receptacles=receptacles,
        objects=objects,
        rng_seed=seed if seed is not None else world_spec.get("seed", 0),
        latent_rules=tuple(rules),
        emit_hints=world_spec.get("emit_hints", False),
    )


def world_to_spec(state: WorldState) -> dict[str, Any]:
    """Inverse of :func:`load_world` for a state whose objects all sit in receptacles."""
    objs = []
    for o in state.objects.values():
        if o.location.kind != IN_RECEPTACLE:
            raise ValueError("only initial-style states can be serialized")
        d: dict[str, Any] = {"name": o.name, "at": o.location.place}
        if o.sliceable:
            d["sliceable"] = True
        if o.sliced:
            d["sliced"] = True
        if o.toggleable:
            d["toggleable"] = True
        if o.is_on:
            d["on"] = True
        if not o.pickupable:
            d["pickupable"] = False
        if o.cls:
            d["class"] = o.cls
        objs.append(d)
    recs = []
    for r in state.receptacles.values():
        d = {"name": r.name, "openable": r.openable, "open": r.is_open}
        if r.segment_group:
            d["segment_group"] = r.segment_group
        recs.append(d)
    spec: dict[str, Any] = {"profile": state.profile.value, "receptacles": recs, "objects": objs}
    if state.latent_rules:
        spec["latent_rules"] = [
            {"action": r.action, "requires_holding_class": r.requires_holding_class}
            for r in state.latent_rules
        ]
    spec["emit_hints"] = state.emit_hints
    return spec


def build_catalog(state: WorldState) -> tuple[ActionSpec, ...]:
    """Enumerate every grounded action for the world, in a fixed order."""
    recs = sorted(state.receptacles, key=_receptacle_order)
    objs = sorted(state.objects)
    pick = [o for o in objs if state.objects[o].pickupable]
    openable = [r for r in recs if state.receptacles[r].openable]
    toggle = [o for o in objs if state.objects[o].toggleable]
    slice_ = [o for o in objs if state.objects[o].sliceable]
    if state.profile is Profile.ALFRED:
        table = [
            ("find", recs + objs), ("pick up", pick), ("put down", pick), ("drop", pick),
            ("open", openable), ("close", openable), ("turn on", toggle),
            ("turn off", toggle), ("slice", slice_),
        ]
    else:
        table = [
            ("navigation", recs), ("pick", pick), ("place", recs),
            ("open", openable), ("close", openable),
        ]
    out: list[ActionSpec] = []
    for verb, params in table:
        for p in params:
            out.append(ActionSpec(len(out), verb, p))
    return tuple(out)


def parse_action(text: str, state: WorldState, action_id: int = -1) -> ActionSpec:
    verb, param = split_action_text(text, state.profile)
    return ActionSpec(action_id, verb, param)


# --------------------------------------------------------------------------
# observation and goals

def _contents_visible(state: WorldState, rec_name: str) -> bool:
    rec = state.receptacles[rec_name]
    return not rec.openable or rec.is_open


def observe(state: WorldState, last_feedback: Feedback | None = None) -> Observation:
    visible: list[tuple[str, str]] = []
    peers: tuple[str, ...] = ()
    if state.agent_at in state.receptacles:
        rec = state.receptacles[state.agent_at]
        open_ = _contents_visible(state, rec.name)
        for o in sorted(state.objects.values(), key=lambda o: o.name):
            loc = o.location
            if loc.kind == IN_RECEPTACLE and loc.place == rec.name and open_:
                visible.append((o.name, rec.name))
            elif loc.kind == ON_FLOOR and loc.place == rec.name:
                visible.append((o.name, FLOOR))
        recs: tuple[str, ...] = (rec.name,)
        if rec.segment_group:
            peers = tuple(sorted(
                (r.name for r in state.receptacles.values()
                 if r.segment_group == rec.segment_group and r.name != rec.name),
                key=_receptacle_order,
            ))
    else:
        recs = ()
        for o in sorted(state.objects.values(), key=lambda o: o.name):
            if o.location.kind == ON_FLOOR and o.location.place == state.agent_at:
                visible.append((o.name, FLOOR))
    return Observation(state.agent_at, tuple(visible), recs, state.gripper, last_feedback, peers)


def _predicate_holds(state: WorldState, kind: PredicateKind, subject: str, target: str | None) -> bool:
    if kind is PredicateKind.HOLDING:
        return state.gripper == subject
    if kind is PredicateKind.NOT_HOLDING:
        return state.gripper != subject
    if kind is PredicateKind.AT:
        obj = state.objects[subject]
        return obj.location == Location(IN_RECEPTACLE, target)
    if subject in state.receptacles:
        rec = state.receptacles[subject]
        if target == "open":
            return rec.is_open
        if target == "closed":
            return rec.openable and not rec.is_open
        return False
    obj = state.objects[subject]
    return {
        "on": obj.toggleable and obj.is_on,
        "off": obj.toggleable and not obj.is_on,
        "sliced": obj.sliced,
        "open": False,
        "closed": False,
    }[target]


def evaluate_goal(state: WorldState, goal: Goal) -> SubgoalStatus:
    bits = []
    for c in goal.conditions:
        known = set(state.objects) | set(state.receptacles)
        if c.subject not in known:
            raise UnknownEntity(c.subject)
        if c.kind is PredicateKind.AT:
            if c.subject not in state.objects:
                raise UnknownEntity(c.subject)
            if c.target not in state.receptacles:
                raise UnknownEntity(c.target)
        if c.kind in (PredicateKind.HOLDING, PredicateKind.NOT_HOLDING) and c.subject not in state.objects:
            raise UnknownEntity(c.subject)
        bits.append(_predicate_holds(state, c.kind, c.subject, c.target))
    return SubgoalStatus(tuple(bits))


# --------------------------------------------------------------------------
# transition dynamics

def _invalid(state: WorldState, message: str, hint: str | None = None) -> tuple[WorldState, Feedback]:
    return replace(state, step_count=state.step_count + 1), Feedback(False, message, hint)


def _ok(state: WorldState, **changes: Any) -> tuple[WorldState, Feedback]:
    return replace(state, step_count=state.step_count + 1, **changes), Feedback.success()


def _with_object(state: WorldState, obj: ObjectRec) -> dict[str, ObjectRec]:
    objs = dict(state.objects)
    objs[obj.name] = obj
    return objs


def _with_receptacle(state: WorldState, rec: Receptacle) -> dict[str, Receptacle]:
    recs = dict(state.receptacles)
    recs[rec.name] = rec
    return recs


def _close_to_object(state: WorldState, obj: ObjectRec) -> bool:
    loc = obj.location
    if loc.kind == IN_GRIPPER:
        return True
    return loc.place == state.agent_at


def _absent(name: str) -> str:
    return f"Invalid action: {name} not present in scene"


def _find(state: WorldState, target: str) -> tuple[WorldState, Feedback]:
    if target in state.receptacles:
        return _ok(state, agent_at=target)
    matches = [o for o in state.objects.values() if target in (o.name, base_name(o.name))]
    places = [o.location.place for o in matches if o.location.kind != IN_GRIPPER]
    if places:
        return _ok(state, agent_at=min(places, key=_receptacle_order))
    if matches:
        return _ok(state)
    recs = [r for r in state.receptacles if base_name(r) == target]
    if recs:
        return _ok(state, agent_at=min(recs, key=_receptacle_order))
    return _invalid(state, _absent(target))


def _pick(state: WorldState, target: str) -> tuple[WorldState, Feedback]:
    obj = state.objects.get(target)
    if obj is None:
        if target in state.receptacles:
            return _invalid(state, f"Invalid action: {target} cannot be picked up")
        return _invalid(state, _absent(target))
    if state.gripper is not None:
        return _invalid(state, "Invalid action: already holding another object")
    if not obj.pickupable:
        return _invalid(state, f"Invalid action: {target} cannot be picked up")
    if obj.location.kind == ON_FLOOR:
        return _invalid(state, f"Invalid action: {target} is on the floor and cannot be picked up")
    if obj.location.place != state.agent_at:
        hint = f"{target} is in {obj.location.place}" if state.emit_hints else None
        return _invalid(state, f"Invalid action: not close to {target}", hint)
    if not _contents_visible(state, obj.location.place):
        return _invalid(state, f"Invalid action: {target} is inside a closed receptacle")
    held = replace(obj, location=Location(IN_GRIPPER))
    return _ok(state, gripper=target, objects=_with_object(state, held))


def _put_down(state: WorldState, target: str) -> tuple[WorldState, Feedback]:
    if target not in state.objects:
        return _invalid(state, _absent(target))
    if state.gripper is None:
        return _invalid(state, "Invalid action: not holding any object")
    if state.gripper != target:
        return _invalid(state, f"Invalid action: not holding {target}")
    return _release_into(state, state.agent_at)


def _place(state: WorldState, target: str) -> tuple[WorldState, Feedback]:
    if target not in state.receptacles:
        if target in state.objects:
            return _invalid(state, f"Invalid action: {target} is not a receptacle")
        return _invalid(state, _absent(target))
    if state.gripper is None:
        return _invalid(state, "Invalid action: not holding any object")
    if state.agent_at != target:
        return _invalid(state, f"Invalid action: not close to {target}")
    return _release_into(state, target)


def _release_into(state: WorldState, rec_name: str) -> tuple[WorldState, Feedback]:
    if rec_name not in state.receptacles:
        return _invalid(state, "Invalid action: no receptacle nearby")
    if not _contents_visible(state, rec_name):
        return _invalid(state, f"Invalid action: {rec_name} is closed")
    obj = replace(state.objects[state.gripper], location=Location(IN_RECEPTACLE, rec_name))
    return _ok(state, gripper=None, objects=_with_object(state, obj))


def _drop(state: WorldState, target: str) -> tuple[WorldState, Feedback]:
    if target not in state.objects:
        return _invalid(state, _absent(target))
    if state.gripper is None:
        return _invalid(state, "Invalid action: not holding any object")
    if state.gripper != target:
        return _invalid(state, f"Invalid action: not holding {target}")
    obj = replace(state.objects[target], location=Location(ON_FLOOR, state.agent_at))
    return _ok(state, gripper=None, objects=_with_object(state, obj))


def _open_close(state: WorldState, target: str, opening: bool) -> tuple[WorldState, Feedback]:
    verb = "opened" if opening else "closed"
    rec = state.receptacles.get(target)
    if rec is None:
        if target in state.objects:
            return _invalid(state, f"Invalid action: {target} cannot be {verb}")
        return _invalid(state, _absent(target))
    if not rec.openable:
        return _invalid(state, f"Invalid action: {target} cannot be {verb}")
    if state.agent_at != target:
        return _invalid(state, f"Invalid action: not close to {target}")
    if rec.is_open == opening:
        return _invalid(state, f"Invalid action: {target} is already {'open' if opening else 'closed'}")
    return _ok(state, receptacles=_with_receptacle(state, replace(rec, is_open=opening)))


def _toggle(state: WorldState, target: str, on: bool) -> tuple[WorldState, Feedback]:
    word = "on" if on else "off"
    obj = state.objects.get(target)
    if obj is None:
        if target in state.receptacles:
            return _invalid(state, f"Invalid action: {target} cannot be turned {word}")
        return _invalid(state, _absent(target))
    if not obj.toggleable:
        return _invalid(state, f"Invalid action: {target} cannot be turned {word}")
    if not _close_to_object(state, obj):
        return _invalid(state, f"Invalid action: not close to {target}")
    if obj.is_on == on:
        return _invalid(state, f"Invalid action: {target} is already {word}")
    return _ok(state, objects=_with_object(state, replace(obj, is_on=on)))


def _slice(state: WorldState, target: str) -> tuple[WorldState, Feedback]:
    obj = state.objects.get(target)
    if obj is None:
        if target in state.receptacles:
            return _invalid(state, f"Invalid action: {target} is not sliceable")
        return _invalid(state, _absent(target))
    if not obj.sliceable:
        return _invalid(state, f"Invalid action: {target} is not sliceable")
    if not _close_to_object(state, obj):
        return _invalid(state, f"Invalid action: not close to {target}")
    if obj.sliced:
        return _invalid(state, f"Invalid action: {target} is already sliced")
    return _ok(state, objects=_with_object(state, replace(obj, sliced=True)))


_HANDLERS = {
    "find": _find,
    "navigation": _find,
    "pick up": _pick,
    "pick": _pick,
    "put down": _put_down,
    "place": _place,
    "drop": _drop,
    "open": lambda s, t: _open_close(s, t, True),
    "close": lambda s, t: _open_close(s, t, False),
    "turn on": lambda s, t: _toggle(s, t, True),
    "turn off": lambda s, t: _toggle(s, t, False),
    "slice": _slice,
}


def _latent_violation(state: WorldState, verb: str) -> str | None:
    for rule in state.latent_rules:
        if rule.action != verb or rule.requires_holding_class is None:
            continue
        held = state.objects[state.gripper] if state.gripper else None
        if held is None or held.object_class != rule.requires_holding_class:
            return f"Invalid action: {verb} requires holding a {rule.requires_holding_class}"
    return None


def step(state: WorldState, action: ActionSpec) -> tuple[WorldState, Feedback]:
    """Apply one action. Deterministic; never raises for invalid actions."""
    verb = action.name.lower()
    if verb not in LEGAL_ACTIONS[state.profile]:
        raise ValueError(f"{action.name!r} is not a {state.profile.value} action")
    nxt, fb = _HANDLERS[verb](state, action.parameter)
    if fb.ok:
        violation = _latent_violation(state, verb)
        if violation:
            return _invalid(state, violation)
    return nxt, fb


# --------------------------------------------------------------------------
# abstraction

def abstract_state(state_before: WorldState, state_after: WorldState, action: ActionSpec | None = None) -> str:
    """Canonical English rendering of what changed between two states.

    Clause order is fixed: agent location, gripper/containment, receptacle
    open state, device power, slicing. ``action`` is accepted for signature
    compatibility with model-backed abstractors; the rendering depends only
    on the two states.
    """
    clauses: list[str] = []
    if state_before.agent_at != state_after.agent_at:
        clauses.append(f"Agent moved to {state_after.agent_at}")
    g0, g1 = state_before.gripper, state_after.gripper
    if g0 != g1:
        if g0 is not None:
            clauses.append(f"Agent released {g0}")
            loc = state_after.objects[g0].location
            if loc.kind == IN_RECEPTACLE:
                clauses.append(f"{g0} placed in {loc.place}")
            elif loc.kind == ON_FLOOR:
                clauses.append(f"{g0} dropped on the floor at {loc.place}")
        if g1 is not None:
            clauses.append(f"Agent now holds {g1}")
            loc = state_before.objects[g1].location
            if loc.kind == IN_RECEPTACLE:
                clauses.append(f"{g1} removed from {loc.place}")
            elif loc.kind == ON_FLOOR:
                clauses.append(f"{g1} picked up from the floor")
    for name in sorted(state_after.objects):
        if name in (g0, g1):
            continue
        a, b = state_before.objects[name].location, state_after.objects[name].location
        if a != b:
            clauses.append(f"{name} moved from {a.render()} to {b.render()}")
    for name in sorted(state_after.receptacles, key=_receptacle_order):
        a, b = state_before.receptacles[name], state_after.receptacles[name]
        if a.is_open != b.is_open:
            clauses.append(f"{name} is now {'open' if b.is_open else 'closed'}")
    for name in sorted(state_after.objects):
        a, b = state_before.objects[name], state_after.objects[name]
        if a.is_on != b.is_on:
            clauses.append(f"{name} is now turned {'on' if b.is_on else 'off'}")
        if a.sliced != b.sliced:
            clauses.append(f"{name} is now sliced")
    if not clauses:
        return NO_CHANGE
    return "; ".join(clauses) + "."


def abstract_snapshot(state: WorldState, action: ActionSpec | None = None) -> str:
    """Short description of the fluents an action depends on, before it runs."""
    parts = [f"Agent at {state.agent_at}", f"holding {state.gripper or 'nothing'}"]
    target = action.parameter if action is not None else None
    if target in state.objects:
        obj = state.objects[target]
        parts.append(f"{target} {obj.location.render()}")
        if obj.sliceable:
            parts.append(f"{target} {'sliced' if obj.sliced else 'not sliced'}")
        if obj.toggleable:
            parts.append(f"{target} turned {'on' if obj.is_on else 'off'}")
    elif target in state.receptacles:
        rec = state.receptacles[target]
        if rec.openable:
            parts.append(f"{target} {'open' if rec.is_open else 'closed'}")
    return "; ".join(parts)


# --------------------------------------------------------------------------
# digests and replay logs

def fluents(state: WorldState) -> dict[str, Any]:
    """Flat map of every field a step may touch, keyed by a stable path."""
    out: dict[str, Any] = {
        "agent_at": state.agent_at,
        "gripper": state.gripper,
        "step_count": state.step_count,
    }
    for r in state.receptacles.values():
        out[f"rec/{r.name}/is_open"] = r.is_open
        out[f"rec/{r.name}/openable"] = r.openable
        out[f"rec/{r.name}/segment_group"] = r.segment_group
    for o in state.objects.values():
        out[f"obj/{o.name}/location"] = [o.location.kind, o.location.place]
        for attr in ("sliceable", "sliced", "toggleable", "is_on", "pickupable", "cls"):
            out[f"obj/{o.name}/{attr}"] = getattr(o, attr)
    return out


def state_digest(state: WorldState) -> str:
    blob = json.dumps(fluents(state), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]


def replay(state: WorldState, actions: Iterable[ActionSpec]) -> Iterator[dict[str, Any]]:
    """Yield replay-log records for an action sequence."""
    for action in actions:
        state, fb = step(state, action)
        yield {
            "action": action.text,
            "feedback": {"ok": fb.ok, "message": fb.message, "hint": fb.hint},
            "state_digest": state_digest(state),
        }


def write_replay_log(path: str | Path, records: Iterable[dict[str, Any]]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for rec in records:
            fh.write(json.dumps(rec, ensure_ascii=False) + "\n")


def audit_replay(initial: WorldState, log_lines: Sequence[str]) -> list[int]:
    """Re-run a replay log; return indices of records that do not reproduce."""
    bad = []
    state = initial
    for i, line in enumerate(log_lines):
        rec = json.loads(line)
        action = parse_action(rec["action"], state)
        state, fb = step(state, action)
        got = {"ok": fb.ok, "message": fb.message, "hint": fb.hint}
        if got != rec["feedback"] or state_digest(state) != rec["state_digest"]:
            bad.append(i)
    return bad
