"""Generate the benchmark suites and scripted backend rule files.

Run from the repository root:  python3 scripts/build_fixtures.py
Outputs land under src/worldmind/fixtures/. Tests regenerate in memory and
compare against the committed files, so edit this script rather than the JSON.
"""
from __future__ import annotations

import json
import sys
from pathlib import Path

from worldmind.core import SKIP_STRING
from worldmind.sim import build_catalog, load_world

FIXTURES = Path(__file__).resolve().parents[1] / "src" / "worldmind" / "fixtures"

PROCESS_SLICE = r"\[process\][^\n]*slice"
GOAL_CLOSE = r"\[goal\][^\n]*close Fridge_1"
KNIFE_FEEDBACK = "-> Invalid action: slice requires holding a Knife"

RECEPTACLES = [
    {"name": "CounterTop_1", "openable": False, "open": True},
    {"name": "CounterTop_2", "openable": False, "open": True},
    {"name": "DiningTable_1", "openable": False, "open": True},
    {"name": "Drawer_1", "openable": True, "open": False},
    {"name": "Fridge_1", "openable": True, "open": False},
]
KNIFE_RULE = [{"action": "slice", "requires_holding_class": "Knife"}]


def world(objects: list[dict]) -> dict:
    return {"profile": "AlfredLike", "receptacles": RECEPTACLES, "objects": objects,
            "latent_rules": KNIFE_RULE, "emit_hints": False}


class Planner:
    """Builds plan JSON against one world's catalog."""

    def __init__(self, spec: dict):
        self.ids = {a.text: a.id for a in build_catalog(load_world(spec))}

    def plan(self, summary: str, steps: list[tuple[str, str | None]]) -> dict:
        out = []
        for text, pred in steps:
            out.append({"action_id": self.ids[text], "action_name": text,
                        "predicted_state": pred if pred is not None else SKIP_STRING})
        return {"language_plan": summary, "executable_plan": out}


def instr_key(instruction: str) -> str:
    return f"Instruction: {instruction}\n"


def visible(name: str) -> str:
    return r"Visible objects:[^\n]*\b" + name + r" \("


DONE = {"language_plan": "The task is complete.", "executable_plan": []}


# --------------------------------------------------------------------------
# slice behaviour shared by both suites

def slice_rules(pl: Planner, instruction: str, target: str, knife_at: str, style: str) -> list[dict]:
    """Rules for one slicing task.

    style "a": after a failed slice, keep slicing (invalid streak).
    style "b": after a failed slice, walk back to the target first (timeout).
    Both switch to a knife-first plan once a process rule about slicing is in view.
    """
    key = instr_key(instruction)
    if knife_at == "Drawer_1":
        fetch = [("find Drawer_1", None), ("open Drawer_1", None), ("pick up Knife", None)]
    else:
        fetch = [("find Knife", None), ("pick up Knife", None)]
    knife_plan = pl.plan(f"Fetch the knife first, then slice the {target}.",
                         fetch + [(f"find {target}", None), (f"slice {target}", None)])
    naive_pred = f"{target} is now sliced" if style == "a" else f"The {target} has been cut into pieces"
    rules = [{"when": {"contains": [key], "matches": [PROCESS_SLICE]}, "response": knife_plan}]
    if style == "b":
        rules.append({"when": {"contains": [key, KNIFE_FEEDBACK]},
                      "response": pl.plan(f"Go back to the {target} and slice it.",
                                          [(f"find {target}", f"Agent is next to the {target}"),
                                           (f"slice {target}", naive_pred)])})
    rules.append({"when": {"contains": [key], "matches": [visible(target)]},
                  "response": pl.plan(f"Slice the {target}.", [(f"slice {target}", naive_pred)])})
    rules.append({"when": {"contains": [key]},
                  "response": pl.plan(f"Look for the {target}.", [(f"find {target}", None)])})
    return rules


def move_rules(pl: Planner, instruction: str, obj: str, dest: str) -> list[dict]:
    key = instr_key(instruction)
    return [{"when": {"contains": [key]},
             "response": pl.plan(f"Move the {obj} to {dest}.",
                                 [(f"find {obj}", None), (f"pick up {obj}", None),
                                  (f"find {dest}", None), (f"put down {obj}", None)])}]


def slice_task(tid: str, instruction: str, target: str, target_at: str, knife_at: str | None,
               extra: list[dict] = ()) -> dict:
    objects = [{"name": target, "at": target_at, "sliceable": True}]
    if knife_at is not None:
        objects.append({"name": "Knife", "at": knife_at})
    objects += list(extra)
    return {"id": tid, "world": world(objects),
            "goal": {"instruction": instruction,
                     "conditions": [{"kind": "ObjectState", "subject": target, "target": "sliced"}]}}


# --------------------------------------------------------------------------
# knife suite: 4 learning tasks, 20 eval tasks (12 slice, 8 move)

KNIFE_SLICE_LEARN = [
    ("kl1", "Slice the Apple on the counter.", "Apple", "CounterTop_1", "CounterTop_2"),
    ("kl2", "Cut the Bread into slices.", "Bread", "DiningTable_1", "CounterTop_1"),
]
KNIFE_MOVE_LEARN = [
    ("kl3", "Put the Mug on the dining table.", "Mug", "CounterTop_1", "DiningTable_1"),
    ("kl4", "Move the Plate to the second counter.", "Plate", "DiningTable_1", "CounterTop_2"),
]
KNIFE_SLICE_EVAL = [
    ("ke01", "Slice the Tomato for a salad.", "Tomato", "CounterTop_1", "CounterTop_2"),
    ("ke02", "Cut the Potato before cooking.", "Potato", "CounterTop_2", "DiningTable_1"),
    ("ke03", "Slice the Lettuce.", "Lettuce", "DiningTable_1", "CounterTop_1"),
    ("ke04", "Prepare sliced Apple for dessert.", "Apple", "CounterTop_1", "Drawer_1"),
    ("ke05", "Chop the Bread on the table.", "Bread", "DiningTable_1", "Drawer_1"),
    ("ke06", "Slice the Cucumber.", "Cucumber", "CounterTop_2", "CounterTop_1"),
    ("ke07", "Cut the Orange in pieces.", "Orange", "CounterTop_1", "DiningTable_1"),
    ("ke08", "Slice up the Onion.", "Onion", "CounterTop_2", "Drawer_1"),
    ("ke09", "Make Tomato slices on the counter.", "Tomato", "CounterTop_2", "CounterTop_1"),
    ("ke10", "Cut the Pear for a snack.", "Pear", "DiningTable_1", "CounterTop_2"),
    ("ke11", "Slice the Carrot for soup.", "Carrot", "CounterTop_1", "Drawer_1"),
    ("ke12", "Cut the Melon in the kitchen.", "Melon", "DiningTable_1", "CounterTop_1"),
]
KNIFE_MOVE_EVAL = [
    ("ke13", "Put the Cup on the dining table.", "Cup", "CounterTop_1", "DiningTable_1"),
    ("ke14", "Move the Bowl to the first counter.", "Bowl", "DiningTable_1", "CounterTop_1"),
    ("ke15", "Place the Spoon on the second counter.", "Spoon", "CounterTop_1", "CounterTop_2"),
    ("ke16", "Put the Pan on the dining table.", "Pan", "CounterTop_2", "DiningTable_1"),
    ("ke17", "Move the Kettle to the first counter.", "Kettle", "CounterTop_2", "CounterTop_1"),
    ("ke18", "Set the Fork on the second counter.", "Fork", "DiningTable_1", "CounterTop_2"),
    ("ke19", "Put the Glass on the first counter.", "Glass", "DiningTable_1", "CounterTop_1"),
    ("ke20", "Bring the Vase to the dining table.", "Vase", "CounterTop_2", "DiningTable_1"),
]


def move_task(tid: str, instruction: str, obj: str, src: str, dest: str) -> dict:
    return {"id": tid, "world": world([{"name": obj, "at": src}, {"name": "Knife", "at": "CounterTop_2"}]),
            "goal": {"instruction": instruction,
                     "conditions": [{"kind": "ObjectAtReceptacle", "subject": obj, "target": dest}]}}


def knife_suite() -> tuple[dict, dict, dict]:
    tasks, rules_a, rules_b = [], [], []
    for tid, ins, tgt, at, knife in KNIFE_SLICE_LEARN + KNIFE_SLICE_EVAL:
        t = slice_task(tid, ins, tgt, at, knife)
        pl = Planner(t["world"])
        tasks.append(t)
        rules_a += slice_rules(pl, ins, tgt, knife, "a")
        rules_b += slice_rules(pl, ins, tgt, knife, "b")
    for tid, ins, obj, src, dest in KNIFE_MOVE_LEARN + KNIFE_MOVE_EVAL:
        t = move_task(tid, ins, obj, src, dest)
        pl = Planner(t["world"])
        tasks.append(t)
        rules_a += move_rules(pl, ins, obj, dest)
        rules_b += move_rules(pl, ins, obj, dest)
    learning = [x[0] for x in KNIFE_SLICE_LEARN + KNIFE_MOVE_LEARN]
    evals = sorted(x[0] for x in KNIFE_SLICE_EVAL + KNIFE_MOVE_EVAL)
    suite = {"name": "knife", "tasks": sorted(tasks, key=lambda t: t["id"]),
             "split": {"learning": learning, "eval": evals}}
    return (suite, {"model_id": "scripted-a", "rules": rules_a, "default_response": DONE},
            {"model_id": "scripted-b", "rules": rules_b, "default_response": DONE})


# --------------------------------------------------------------------------
# mixed suite: slice, store-and-close, tidy and knifeless tasks

def fridge_rules(pl: Planner, instruction: str, obj: str, explicit_close: bool) -> list[dict]:
    key = instr_key(instruction)
    store = [(f"find {obj}", None), (f"pick up {obj}", None), ("find Fridge_1", None),
             ("open Fridge_1", None), (f"put down {obj}", None)]
    closing = pl.plan(f"Put the {obj} in the fridge and close it.", store + [("close Fridge_1", None)])
    rules = [{"when": {"contains": [key, f"put down {obj} -> "]}, "response": DONE}]
    if explicit_close:
        rules.append({"when": {"contains": [key]}, "response": closing})
        return rules
    rules.append({"when": {"contains": [key], "matches": [GOAL_CLOSE]}, "response": closing})
    rules.append({"when": {"contains": [key]},
                  "response": pl.plan(f"Put the {obj} in the fridge.", store)})
    return rules


def explore_rules(pl: Planner, instruction: str, target: str) -> list[dict]:
    key = instr_key(instruction)
    search = pl.plan("Search the kitchen for a knife.",
                     [("find CounterTop_1", None), ("find CounterTop_2", None), ("find DiningTable_1", None)])
    return [{"when": {"contains": [key], "matches": [PROCESS_SLICE]}, "response": search},
            {"when": {"contains": [key], "matches": [visible(target)]},
             "response": pl.plan(f"Slice the {target}.", [(f"slice {target}", f"{target} is now sliced")])},
            {"when": {"contains": [key]},
             "response": pl.plan(f"Look for the {target}.", [(f"find {target}", None)])}]


def fridge_task(tid: str, instruction: str, obj: str, src: str, side: tuple[str, str, str] | None = None) -> dict:
    objects = [{"name": obj, "at": src}, {"name": "Knife", "at": "CounterTop_2"}]
    conds = [{"kind": "ObjectAtReceptacle", "subject": obj, "target": "Fridge_1"},
             {"kind": "ObjectState", "subject": "Fridge_1", "target": "closed"}]
    if side is not None:
        name, at, dest = side
        objects.append({"name": name, "at": at})
        conds.append({"kind": "ObjectAtReceptacle", "subject": name, "target": dest})
    return {"id": tid, "world": world(objects), "goal": {"instruction": instruction, "conditions": conds}}


MIXED_SLICE_LEARN = [
    ("ml1", "Slice the Apple next to the sink.", "Apple", "CounterTop_1", "CounterTop_2"),
    ("ml2", "Cut the Bread for toast.", "Bread", "DiningTable_1", "CounterTop_1"),
]
MIXED_STORE_LEARN = [
    ("ml3", "Put the Milk in the fridge and close the door.", "Milk", "CounterTop_1"),
    ("ml4", "Store the Butter in the fridge and shut it.", "Butter", "DiningTable_1"),
]
MIXED_SLICE_EVAL = [
    ("me01", "Slice the Tomato for sandwiches.", "Tomato", "CounterTop_1", "CounterTop_2"),
    ("me02", "Cut the Potato for fries.", "Potato", "CounterTop_2", "DiningTable_1"),
    ("me03", "Slice the Lettuce for the burger.", "Lettuce", "DiningTable_1", "Drawer_1"),
    ("me04", "Cut the Cucumber for the salad bowl.", "Cucumber", "CounterTop_1", "DiningTable_1"),
    ("me05", "Slice the Orange for juice.", "Orange", "CounterTop_2", "CounterTop_1"),
    ("me06", "Cut the Melon for breakfast.", "Melon", "DiningTable_1", "Drawer_1"),
]
MIXED_STORE_EVAL = [
    ("me07", "Chill the Egg.", "Egg", "CounterTop_1"),
    ("me08", "Keep the Cheese cold.", "Cheese", "DiningTable_1"),
]
MIXED_TIDY_EVAL = [
    ("me09", "Tidy up: chill the Juice and set the Bowl on the table.", "Juice", "CounterTop_1",
     ("Bowl", "CounterTop_2", "DiningTable_1")),
    ("me10", "Clean up: refrigerate the Yogurt and put the Cup on the first counter.", "Yogurt", "CounterTop_2",
     ("Cup", "DiningTable_1", "CounterTop_1")),
    ("me11", "Reset the kitchen: cool the Wine and move the Pan to the table.", "Wine", "DiningTable_1",
     ("Pan", "CounterTop_1", "DiningTable_1")),
    ("me12", "Prepare dinner: chill the Soda and place the Plate on the second counter.", "Soda", "CounterTop_1",
     ("Plate", "DiningTable_1", "CounterTop_2")),
]
MIXED_KNIFELESS_EVAL = [
    ("me13", "Slice the Pear with whatever is around.", "Pear", "CounterTop_1"),
    ("me14", "Cut the Carrot without delay.", "Carrot", "DiningTable_1"),
]


def mixed_suite() -> tuple[dict, dict]:
    tasks, rules = [], []
    for tid, ins, tgt, at, knife in MIXED_SLICE_LEARN + MIXED_SLICE_EVAL:
        t = slice_task(tid, ins, tgt, at, knife)
        tasks.append(t)
        rules += slice_rules(Planner(t["world"]), ins, tgt, knife, "a")
    for tid, ins, obj, src in MIXED_STORE_LEARN:
        t = fridge_task(tid, ins, obj, src)
        tasks.append(t)
        rules += fridge_rules(Planner(t["world"]), ins, obj, explicit_close=True)
    for tid, ins, obj, src in MIXED_STORE_EVAL:
        t = fridge_task(tid, ins, obj, src)
        tasks.append(t)
        rules += fridge_rules(Planner(t["world"]), ins, obj, explicit_close=False)
    for tid, ins, obj, src, side in MIXED_TIDY_EVAL:
        t = fridge_task(tid, ins, obj, src, side)
        tasks.append(t)
        rules += fridge_rules(Planner(t["world"]), ins, obj, explicit_close=False)
    for tid, ins, tgt, at in MIXED_KNIFELESS_EVAL:
        t = slice_task(tid, ins, tgt, at, None)
        tasks.append(t)
        rules += explore_rules(Planner(t["world"]), ins, tgt)
    learning = [x[0] for x in MIXED_SLICE_LEARN + MIXED_STORE_LEARN]
    evals = [x[0] for x in MIXED_SLICE_EVAL + MIXED_STORE_EVAL + MIXED_TIDY_EVAL + MIXED_KNIFELESS_EVAL]
    suite = {"name": "mixed", "tasks": sorted(tasks, key=lambda t: t["id"]),
             "split": {"learning": learning, "eval": evals}}
    return suite, {"model_id": "scripted-mixed", "rules": rules, "default_response": DONE}


def build() -> dict[str, str]:
    """Relative path -> file content for every generated fixture."""
    knife, a, b = knife_suite()
    mixed, m = mixed_suite()
    docs = {
        "suites/knife.json": knife,
        "suites/mixed.json": mixed,
        "backends/knife_a.json": a,
        "backends/knife_b.json": b,
        "backends/mixed.json": m,
    }
    return {k: json.dumps(v, indent=1, ensure_ascii=False) + "\n" for k, v in docs.items()}


def main(argv: list[str]) -> int:
    root = Path(argv[0]) if argv else FIXTURES
    for rel, text in build().items():
        path = root / rel
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
        print(f"wrote {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main(sys.argv[1:]))
