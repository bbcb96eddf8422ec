"""World knowledge store: process rules and goal heuristics with similarity retrieval."""
from __future__ import annotations

import hashlib
import json
import re
import threading
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Protocol, Sequence

import jsonschema
import numpy as np

from .core import SchemaError, WorldMindError

EMBED_DIM = 256
HASH_SEED = b"worldmind-v1"
FORMAT_VERSION = 1
DEFAULT_K = 5
TIE_DECIMALS = 12

_TOKEN = re.compile(r"[a-z0-9]+")


class EmptyText(WorldMindError):
    pass


class VersionMismatch(SchemaError):
    pass


class Kind(str, Enum):
    PROCESS = "process"
    GOAL = "goal"


@dataclass(frozen=True)
class Source:
    model_id: str = ""
    task_id: str = ""
    episode_step: int = 0

    def to_dict(self) -> dict[str, Any]:
        return {"model_id": self.model_id, "task_id": self.task_id, "episode_step": self.episode_step}


@dataclass(frozen=True)
class ProcessContext:
    action_name: str
    abstract_before: str
    predicted: str
    abstract_after: str

    def to_dict(self) -> dict[str, str]:
        return {
            "action_name": self.action_name,
            "abstract_before": self.abstract_before,
            "predicted": self.predicted,
            "abstract_after": self.abstract_after,
        }


@dataclass(frozen=True)
class ExperienceEntry:
    id: int
    kind: Kind
    text: str
    source: Source = field(default_factory=Source)
    created_at: int = 0
    context: ProcessContext | None = None

    def to_dict(self) -> dict[str, Any]:
        d: dict[str, Any] = {"id": self.id, "kind": self.kind.value, "text": self.text}
        if self.context is not None:
            d["context"] = self.context.to_dict()
        d["source"] = self.source.to_dict()
        d["created_at"] = self.created_at
        return d


class EmbeddingProvider(Protocol):
    name: str

    def embed(self, text: str) -> np.ndarray: ...


def tokenize(text: str) -> list[str]:
    return _TOKEN.findall(text.lower())


def bucket(token: str, dim: int = EMBED_DIM, seed: bytes = HASH_SEED) -> int:
    digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8, key=seed).digest()
    return int.from_bytes(digest, "little") % dim


class HashingEmbedder:
    """Bag-of-words hashed into ``dim`` buckets, L2-normalized.

    Uses a keyed BLAKE2 hash so buckets are identical across processes
    (Python's ``hash`` is salted per process).
    """

    def __init__(self, dim: int = EMBED_DIM, seed: bytes = HASH_SEED):
        self.dim = dim
        self.seed = seed
        self.name = f"hashing-{dim}-{seed.hex()}"

    def counts(self, text: str) -> np.ndarray:
        tokens = tokenize(text)
        if not tokens:
            raise EmptyText("cannot embed text without alphanumeric tokens")
        vec = np.zeros(self.dim, dtype=np.float64)
        for tok in tokens:
            vec[bucket(tok, self.dim, self.seed)] += 1.0
        return vec

    def embed(self, text: str) -> np.ndarray:
        vec = self.counts(text)
        return vec / np.linalg.norm(vec)


_default_embedder = HashingEmbedder()


def embed(text: str) -> np.ndarray:
    if not text or not text.strip():
        raise EmptyText("empty text")
    return _default_embedder.embed(text)


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.dot(a, b))


ENTRY_SCHEMA: dict[str, Any] = {
    "type": "object",
    "required": ["id", "kind", "text", "source", "created_at"],
    "properties": {
        "id": {"type": "integer", "minimum": 0},
        "kind": {"enum": ["process", "goal"]},
        "text": {"type": "string", "minLength": 1},
        "context": {
            "type": "object",
            "required": ["action_name", "abstract_before", "predicted", "abstract_after"],
            "properties": {k: {"type": "string"} for k in
                           ("action_name", "abstract_before", "predicted", "abstract_after")},
            "additionalProperties": False,
        },
        "source": {
            "type": "object",
            "required": ["model_id", "task_id", "episode_step"],
            "properties": {
                "model_id": {"type": "string"},
                "task_id": {"type": "string"},
                "episode_step": {"type": "integer"},
            },
            "additionalProperties": False,
        },
        "created_at": {"type": "integer", "minimum": 0},
    },
    "additionalProperties": False,
}

DOCUMENT_SCHEMA: dict[str, Any] = {
    "type": "object",
    "required": ["version", "entries"],
    "properties": {
        "version": {"type": "integer"},
        "entries": {"type": "array", "items": ENTRY_SCHEMA},
    },
    "additionalProperties": False,
}


class Repository:
    """Append-only experience store.

    Writes go through a lock (single writer); reads may run concurrently once
    :meth:`warm` has populated the embedding cache.
    """

    def __init__(self, embedder: EmbeddingProvider | None = None):
        self.entries: list[ExperienceEntry] = []
        self.embedder: EmbeddingProvider = embedder or _default_embedder
        self.embedding_cache: dict[int, np.ndarray] = {}
        self._next_id = 0
        self._clock = 0
        self._lock = threading.Lock()

    def __len__(self) -> int:
        return len(self.entries)

    def use_embedder(self, embedder: EmbeddingProvider) -> None:
        self.embedder = embedder
        self.embedding_cache = {}

    def _append(self, kind: Kind, text: str, source: Source, context: ProcessContext | None) -> int:
        if not text or not text.strip():
            raise EmptyText("experience text is empty")
        with self._lock:
            entry = ExperienceEntry(self._next_id, kind, text, source, self._clock, context)
            self.entries.append(entry)
            self._next_id += 1
            self._clock += 1
        return entry.id

    def add_process(self, entry_context: ProcessContext | None, rule_text: str, source: Source | None = None) -> int:
        return self._append(Kind.PROCESS, rule_text, source or Source(), entry_context)

    def add_goal(self, heuristic_texts: Sequence[str], source: Source | None = None) -> list[int]:
        for t in heuristic_texts:
            if not t or not t.strip():
                raise EmptyText("goal heuristic is empty")
        return [self._append(Kind.GOAL, t, source or Source(), None) for t in heuristic_texts]

    def of_kind(self, kind: Kind) -> list[ExperienceEntry]:
        return [e for e in self.entries if e.kind is kind]

    def _vector(self, entry: ExperienceEntry) -> np.ndarray:
        vec = self.embedding_cache.get(entry.id)
        if vec is None:
            vec = self.embedder.embed(entry.text)
            self.embedding_cache[entry.id] = vec
        return vec

    def warm(self) -> None:
        for e in self.entries:
            self._vector(e)

    def retrieve(self, query_text: str, kind: Kind, k: int = DEFAULT_K) -> list[tuple[ExperienceEntry, float]]:
        """Top-``k`` entries of ``kind`` by cosine similarity to ``query_text``.

        Exact-duplicate texts are collapsed to their earliest id; scores are
        rounded to ``TIE_DECIMALS`` places and ties broken by ascending id.
        """
        if k < 0:
            raise ValueError("k must be non-negative")
        if k == 0:
            return []
        seen: set[str] = set()
        pool = []
        for e in self.entries:
            if e.kind is kind and e.text not in seen:
                seen.add(e.text)
                pool.append(e)
        if not pool:
            return []
        query = self.embedder.embed(query_text)
        mat = np.stack([self._vector(e) for e in pool])
        # quantize so mathematically equal scores tie regardless of summation order
        sims = np.round(mat @ query, TIE_DECIMALS)
        order = sorted(range(len(pool)), key=lambda i: (-sims[i], pool[i].id))
        return [(pool[i], float(sims[i])) for i in order[:k]]

    # ---- interchange

    def to_document(self) -> dict[str, Any]:
        return {"version": FORMAT_VERSION, "entries": [e.to_dict() for e in sorted(self.entries, key=lambda e: e.id)]}

    def export(self) -> str:
        return json.dumps(self.to_document(), ensure_ascii=False, indent=2) + "\n"

    def digest(self) -> str:
        return hashlib.sha256(self.export().encode("utf-8")).hexdigest()

    def save(self, path: str | Path) -> None:
        Path(path).write_bytes(self.export().encode("utf-8"))

    @classmethod
    def from_document(cls, doc: Any, embedder: EmbeddingProvider | None = None) -> "Repository":
        if isinstance(doc, dict) and "version" in doc and doc["version"] != FORMAT_VERSION:
            raise VersionMismatch(f"unsupported repository version {doc['version']!r}")
        try:
            jsonschema.validate(doc, DOCUMENT_SCHEMA)
        except jsonschema.ValidationError as exc:
            raise SchemaError(exc.message) from exc
        repo = cls(embedder)
        ids = set()
        for d in doc["entries"]:
            if d["id"] in ids:
                raise SchemaError(f"duplicate entry id {d['id']}")
            ids.add(d["id"])
            ctx = ProcessContext(**d["context"]) if "context" in d else None
            repo.entries.append(ExperienceEntry(
                d["id"], Kind(d["kind"]), d["text"], Source(**d["source"]), d["created_at"], ctx,
            ))
        repo.entries.sort(key=lambda e: e.id)
        if repo.entries:
            repo._next_id = repo.entries[-1].id + 1
            repo._clock = max(e.created_at for e in repo.entries) + 1
        return repo

    @classmethod
    def import_text(cls, text: str, embedder: EmbeddingProvider | None = None) -> "Repository":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"repository is not JSON: {exc}") from exc
        return cls.from_document(doc, embedder)

    @classmethod
    def load(cls, path: str | Path, embedder: EmbeddingProvider | None = None) -> "Repository":
        return cls.import_text(Path(path).read_text(encoding="utf-8"), embedder)

    def copy(self) -> "Repository":
        return Repository.from_document(self.to_document(), self.embedder)


def export(repo: Repository) -> str:
    return repo.export()


def import_repository(document: str | dict[str, Any], embedder: EmbeddingProvider | None = None) -> Repository:
    if isinstance(document, str):
        return Repository.import_text(document, embedder)
    return Repository.from_document(document, embedder)
