import json
import subprocess
import sys
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import checks
import oracle
from worldmind.core import SchemaError
from worldmind.repository import (
    EmptyText,
    HashingEmbedder,
    Kind,
    ProcessContext,
    Repository,
    Source,
    VersionMismatch,
    cosine,
    embed,
    export,
    import_repository,
)


def test_embedding_normalization():
    assert cosine(embed("pick up apple"), embed("Pick Up  APPLE!")) == pytest.approx(1.0, abs=1e-12)
    c = cosine(embed("slice bread"), embed("open fridge"))
    assert -1.0 <= c <= 1.0
    with pytest.raises(EmptyText):
        embed("   ")
    with pytest.raises(EmptyText):
        embed("!!!")


def test_similarity_ordering_against_exact_oracle():
    q = oracle.exact_counts("slice the apple with knife")
    near = oracle.ExactCosine(q, oracle.exact_counts("slice apple"))
    far = oracle.ExactCosine(q, oracle.exact_counts("turn on lamp"))
    assert far < near
    lo, hi = near.value_bounds()
    got = cosine(embed("slice the apple with knife"), embed("slice apple"))
    assert float(lo) - 1e-12 <= got <= float(hi) + 1e-12
    assert cosine(embed("slice the apple with knife"), embed("turn on lamp")) < got


def test_add_and_ids():
    r = Repository()
    assert r.add_process(None, "rule") == 0 and len(r) == 1
    assert r.add_process(None, "rule") == 1
    assert r.add_goal([]) == []
    assert r.add_goal(["a", "b", "c"]) == [2, 3, 4]
    with pytest.raises(EmptyText):
        r.add_goal(["ok", " "])
    assert len(r) == 5


def test_process_entry_retrievable():
    r = Repository()
    ctx = ProcessContext("slice Apple", "Agent at CounterTop_1", "Apple sliced", "No change in environment state.")
    eid = r.add_process(ctx, "slice needs a knife in hand", Source("m", "t", 3))
    hits = r.retrieve("slice the apple", Kind.PROCESS, 5)
    assert [e.id for e, _ in hits] == [eid] and hits[0][0].context == ctx
    assert r.retrieve("slice the apple", Kind.GOAL, 5) == []


def test_retrieve_edges():
    r = Repository()
    assert r.retrieve("anything", Kind.PROCESS) == []
    r.add_process(None, "x y")
    assert r.retrieve("x", Kind.PROCESS, 0) == []
    with pytest.raises(ValueError):
        r.retrieve("x", Kind.PROCESS, -1)


def test_duplicates_collapse_at_retrieval():
    r = Repository()
    r.add_goal(["open the fridge first", "open the fridge first", "hold a knife"])
    hits = r.retrieve("open fridge", Kind.GOAL, 5)
    assert [e.id for e, _ in hits] == [0, 2]
    assert len(r) == 3


def test_retrieval_matches_exact_oracle_1000_entries():
    assert checks.retrieval_mismatches(1000, 5, n_queries=30) == []


@settings(max_examples=40, deadline=None)
@given(st.lists(st.sampled_from(checks.WORDS), min_size=1, max_size=6).map(" ".join),
       st.integers(1, 8))
def test_retrieve_properties(query, k):
    r = Repository()
    for i, t in enumerate(checks.random_texts(60, 5)):
        (r.add_process(None, t) if i % 2 else r.add_goal([t]))
    hits = r.retrieve(query, Kind.PROCESS, k)
    assert len(hits) <= k
    assert all(e.kind is Kind.PROCESS for e, _ in hits)
    sims = [s for _, s in hits]
    assert sims == sorted(sims, reverse=True)


def test_export_empty():
    assert json.loads(Repository().export()) == {"version": 1, "entries": []}


def _filled(n=50):
    r = Repository()
    for i, t in enumerate(checks.random_texts(n, 9)):
        if i % 3 == 0:
            r.add_goal([t + " é"], Source("model-a", f"task{i}", i))
        else:
            r.add_process(ProcessContext(f"slice X{i}", "before", "pred", "after"), t, Source("model-a", f"task{i}", i))
    return r


def test_round_trip_byte_identity(tmp_path):
    r = _filled()
    text = export(r)
    again = import_repository(text)
    assert again.export() == text
    path = tmp_path / "repo.json"
    r.save(path)
    assert Repository.load(path).export().encode() == path.read_bytes()
    assert [e.text for e in again.entries] == [e.text for e in r.entries]
    assert again.digest() == r.digest()


def test_import_errors():
    with pytest.raises(VersionMismatch):
        import_repository({"version": 2, "entries": []})
    with pytest.raises(SchemaError):
        import_repository({"version": 1, "entries": [{"id": 0, "kind": "weird", "text": "x",
                                                      "source": {"model_id": "", "task_id": "", "episode_step": 0},
                                                      "created_at": 0}]})
    doc = json.loads(_filled(2).export())
    doc["entries"][1]["id"] = 0
    with pytest.raises(SchemaError):
        import_repository(doc)
    with pytest.raises(SchemaError):
        import_repository("{not json")


class ReversedEmbedder:
    name = "reversed"

    def __init__(self):
        self.inner = HashingEmbedder(64, b"other")

    def embed(self, text):
        return self.inner.embed(" ".join(reversed(text.split())))


def test_embedder_swap_keeps_entry_set():
    r = _filled(20)
    other = import_repository(r.export(), embedder=ReversedEmbedder())
    a = {e.id for e, _ in r.retrieve("slice apple", Kind.PROCESS, 100)}
    b = {e.id for e, _ in other.retrieve("slice apple", Kind.PROCESS, 100)}
    assert a == b


def test_append_only_copy_is_independent():
    r = _filled(5)
    before = r.export()
    c = r.copy()
    c.add_goal(["new"])
    assert r.export() == before and len(c) == len(r) + 1
    assert c.entries[-1].id == len(r)


def test_cross_process_determinism():
    code = ("from worldmind.repository import embed; import sys; "
            "sys.stdout.write(embed('slice the apple with a knife').tobytes().hex())")
    outs = {subprocess.run([sys.executable, "-c", code], capture_output=True, text=True, check=True).stdout
            for _ in range(2)}
    assert len(outs) == 1
    assert outs.pop() == embed("slice the apple with a knife").tobytes().hex()


def test_embedding_counts_are_exact():
    counts = HashingEmbedder().counts("apple apple knife")
    assert counts.sum() == 3 and list(counts.astype(int)) == oracle.exact_counts("apple apple knife")
    v = embed("apple apple knife")
    assert Fraction(float(np.dot(v, v))).limit_denominator(10**6) == 1
