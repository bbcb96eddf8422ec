"""Suites, learn-then-freeze runs, transfer and ablation experiments, reports."""
from __future__ import annotations

import csv
import io
import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Sequence

from .backends import Backend
from .core import Goal, SchemaError
from .engine import (
    BackendUnavailable,
    EpisodeConfig,
    EpisodeResult,
    ErrorCategory,
    classify_outcome,
    run_episode,
    write_trajectory,
)
from .learning import Providers, Trajectory
from .repository import Repository
from .sim import evaluate_goal, load_world

log = logging.getLogger(__name__)

ABORTED = "Aborted"
CATEGORIES = [c.value for c in ErrorCategory]
CSV_FIELDS = ["task_id", "sr", "gc", "category", "steps", "wp_added", "wg_added"]
ABLATION_ARMS = (
    ("full", True, True),
    ("-goal", False, True),
    ("-process", True, False),
    ("-both", False, False),
)


@dataclass(frozen=True)
class Task:
    id: str
    world: dict[str, Any]
    goal: Goal


@dataclass
class TaskSuite:
    name: str
    tasks: dict[str, Task]
    learning_tasks: list[str]
    eval_tasks: list[str]

    def __post_init__(self):
        overlap = set(self.learning_tasks) & set(self.eval_tasks)
        if overlap:
            raise SchemaError(f"learning and eval splits overlap: {sorted(overlap)}")
        for tid in self.learning_tasks + self.eval_tasks:
            if tid not in self.tasks:
                raise SchemaError(f"split references unknown task {tid!r}")

    @classmethod
    def from_document(cls, doc: dict[str, Any], base: Path | None = None) -> "TaskSuite":
        tasks: dict[str, Task] = {}
        for t in doc["tasks"]:
            if "world" in t:
                world = t["world"]
            elif "world_ref" in t:
                world = json.loads(((base or Path.cwd()) / t["world_ref"]).read_text(encoding="utf-8"))
            else:
                raise SchemaError(f"task {t.get('id')!r} has no world")
            goal_doc = dict(t["goal"])
            goal_doc.setdefault("id", t["id"])
            if t["id"] in tasks:
                raise SchemaError(f"duplicate task id {t['id']!r}")
            tasks[t["id"]] = Task(t["id"], world, Goal.from_dict(goal_doc))
        split = doc.get("split", {})
        return cls(doc["name"], tasks, list(split.get("learning", [])), list(split.get("eval", [])))

    @classmethod
    def load(cls, path: str | Path) -> "TaskSuite":
        path = Path(path)
        return cls.from_document(json.loads(path.read_text(encoding="utf-8")), path.parent)


@dataclass
class TaskRow:
    task_id: str
    sr: bool
    gc: float
    category: str
    steps: int
    wp_added: int
    wg_added: int
    seconds: float = field(default=0.0, compare=False)

    def to_dict(self) -> dict[str, Any]:
        return {
            "task_id": self.task_id,
            "sr": int(self.sr),
            "gc": round(self.gc, 3),
            "category": self.category,
            "steps": self.steps,
            "wp_added": self.wp_added,
            "wg_added": self.wg_added,
        }


@dataclass
class MetricsReport:
    suite: str
    rows: list[TaskRow]
    config: dict[str, Any]
    repository_digest: str
    learning: dict[str, Any] = field(default_factory=dict)

    @property
    def sr_mean(self) -> float:
        return sum(r.sr for r in self.rows) / len(self.rows) if self.rows else 0.0

    @property
    def gc_mean(self) -> float:
        return sum(r.gc for r in self.rows) / len(self.rows) if self.rows else 0.0

    @property
    def error_histogram(self) -> dict[str, int]:
        hist = {c: 0 for c in CATEGORIES}
        for r in self.rows:
            if r.category in hist:
                hist[r.category] += 1
        return hist

    @property
    def aborted(self) -> int:
        return sum(r.category == ABORTED for r in self.rows)

    def to_dict(self) -> dict[str, Any]:
        return {
            "suite": self.suite,
            "tasks": len(self.rows),
            "sr_mean": round(self.sr_mean, 3),
            "gc_mean": round(self.gc_mean, 3),
            "error_histogram": self.error_histogram,
            "aborted": self.aborted,
            "per_task": [r.to_dict() for r in self.rows],
            "config": self.config,
            "repository_digest": self.repository_digest,
            "learning": self.learning,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, ensure_ascii=False) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_FIELDS)
        for r in self.rows:
            w.writerow([r.task_id, int(r.sr), f"{r.gc:.3f}", r.category, r.steps, r.wp_added, r.wg_added])
        return buf.getvalue()


def _run_task(task: Task, repo: Repository, backend: Backend, config: EpisodeConfig,
              providers: Providers | None, seed: int,
              trajectory_dir: Path | None) -> tuple[TaskRow, EpisodeResult | None, Trajectory | None]:
    t0 = time.perf_counter()
    state = load_world(task.world, seed=seed)
    try:
        result, traj, _ = run_episode(state, task.goal, repo, backend, config, providers, task_id=task.id)
    except BackendUnavailable as exc:
        log.error("task %s aborted: %s", task.id, exc)
        gc = evaluate_goal(state, task.goal).gc
        return TaskRow(task.id, False, gc, ABORTED, 0, 0, 0, time.perf_counter() - t0), None, None
    if trajectory_dir is not None:
        write_trajectory(trajectory_dir / f"{task.id}.jsonl", traj)
        (trajectory_dir / f"{task.id}.summary.json").write_text(
            json.dumps(result.to_dict(), indent=2) + "\n", encoding="utf-8")
    row = TaskRow(task.id, result.sr, result.gc, classify_outcome(result).value, result.steps_used,
                  result.wp_added, result.wg_added, time.perf_counter() - t0)
    return row, result, traj


def run_suite(suite: TaskSuite, config: EpisodeConfig, backend: Backend,
              repository_in: Repository | None = None, *, providers: Providers | None = None,
              jobs: int = 1, online: bool = False, seed: int = 0,
              trajectory_dir: str | Path | None = None) -> tuple[MetricsReport, Repository]:
    """Learn on the learning split (sequentially), then evaluate on the eval split.

    The eval phase runs against a frozen copy of the repository unless
    ``online`` is set, in which case learning continues through evaluation.
    """
    repo = repository_in.copy() if repository_in is not None else Repository()
    tdir = Path(trajectory_dir) if trajectory_dir is not None else None
    if tdir is not None:
        tdir.mkdir(parents=True, exist_ok=True)

    learning: dict[str, Any] = {"episodes": 0, "successes": 0, "wp_added": 0, "wg_added": 0}
    if config.learning_enabled:
        for i, tid in enumerate(suite.learning_tasks):
            row, _, _ = _run_task(suite.tasks[tid], repo, backend, config, providers, seed + i, tdir)
            learning["episodes"] += 1
            learning["successes"] += int(row.sr)
            learning["wp_added"] += row.wp_added
            learning["wg_added"] += row.wg_added

    eval_config = config if online else replace(config, learning_enabled=False)
    digest_before = repo.digest()
    repo.warm()
    offset = len(suite.learning_tasks)
    tasks = [suite.tasks[tid] for tid in suite.eval_tasks]
    if jobs > 1 and not eval_config.learning_enabled:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(_run_task, t, repo, backend, eval_config, providers, seed + offset + i, tdir)
                       for i, t in enumerate(tasks)]
            rows = [f.result()[0] for f in futures]
    else:
        rows = [_run_task(t, repo, backend, eval_config, providers, seed + offset + i, tdir)[0]
                for i, t in enumerate(tasks)]
    digest = repo.digest()
    if not eval_config.learning_enabled and digest != digest_before:
        raise RuntimeError("repository changed during frozen evaluation")

    echo = config.to_dict()
    echo.update({"online": online, "jobs": jobs, "seed": seed, "backend": getattr(backend, "model_id", "")})
    return MetricsReport(suite.name, rows, echo, digest, learning), repo


def write_outputs(out_dir: str | Path, report: MetricsReport, repo: Repository, prefix: str = "") -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / f"{prefix}report.json").write_bytes(report.to_json().encode("utf-8"))
    (out / f"{prefix}report.csv").write_bytes(report.to_csv().encode("utf-8"))
    repo.save(out / f"{prefix}repository.json")
    timings = "task_id,seconds\n" + "".join(f"{r.task_id},{r.seconds:.4f}\n" for r in report.rows)
    (out / f"{prefix}timings.csv").write_text(timings, encoding="utf-8")


# --------------------------------------------------------------------------
# experiments

def summary_row(label: str, report: MetricsReport) -> dict[str, Any]:
    row: dict[str, Any] = {"arm": label, "sr": round(report.sr_mean, 3), "gc": round(report.gc_mean, 3)}
    row.update(report.error_histogram)
    row["aborted"] = report.aborted
    return row


def rows_to_csv(rows: Sequence[dict[str, Any]]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: (f"{v:.3f}" if isinstance(v, float) else v) for k, v in r.items()})
    return buf.getvalue()


@dataclass
class TransferResult:
    baseline: MetricsReport
    transfer: MetricsReport

    def delta_rows(self) -> list[dict[str, Any]]:
        rows = []
        for metric in ("sr_mean", "gc_mean"):
            a, b = getattr(self.baseline, metric), getattr(self.transfer, metric)
            rows.append({"metric": metric, "baseline": round(a, 3), "transfer": round(b, 3), "delta": round(b - a, 3)})
        ha, hb = self.baseline.error_histogram, self.transfer.error_histogram
        for cat in CATEGORIES:
            rows.append({"metric": cat, "baseline": ha[cat], "transfer": hb[cat], "delta": hb[cat] - ha[cat]})
        return rows


def transfer_experiment(repo_path_a: str | Path | Repository, backend_b: Backend, suite: TaskSuite,
                        config: EpisodeConfig, *, providers: Providers | None = None,
                        jobs: int = 1, seed: int = 0) -> TransferResult:
    """Evaluate ``backend_b`` twice with learning off: with an empty repository
    and with the repository built by another backend."""
    repo_a = repo_path_a if isinstance(repo_path_a, Repository) else Repository.load(repo_path_a)
    frozen = replace(config, learning_enabled=False)
    base, _ = run_suite(suite, frozen, backend_b, Repository(), providers=providers, jobs=jobs, seed=seed)
    moved, _ = run_suite(suite, frozen, backend_b, repo_a, providers=providers, jobs=jobs, seed=seed)
    return TransferResult(base, moved)


def ablation_run(suite: TaskSuite, backend: Backend, config: EpisodeConfig | None = None, *,
                 providers: Providers | None = None, jobs: int = 1, seed: int = 0,
                 ) -> list[tuple[str, MetricsReport, Repository]]:
    """Four learn-then-evaluate runs: full, -goal, -process, -both (no repository use)."""
    config = config or EpisodeConfig()
    out = []
    for label, use_goal, use_process in ABLATION_ARMS:
        cfg = replace(config, learning_enabled=True, use_goal=use_goal, use_process=use_process)
        report, repo = run_suite(suite, cfg, backend, Repository(), providers=providers, jobs=jobs, seed=seed)
        out.append((label, report, repo))
    return out
