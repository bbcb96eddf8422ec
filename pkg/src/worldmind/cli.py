"""worldmind command line: run, transfer, ablate."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .backends import make_backend
from .bench import (
    TaskSuite,
    ablation_run,
    rows_to_csv,
    run_suite,
    summary_row,
    transfer_experiment,
    write_outputs,
)
from .core import WorldMindError
from .engine import EpisodeConfig
from .repository import Repository


def _config(args: argparse.Namespace) -> EpisodeConfig:
    return EpisodeConfig(
        step_budget=args.step_budget,
        retrieval_k=args.k,
        use_goal=not getattr(args, "no_goal_exp", False),
        use_process=not getattr(args, "no_process_exp", False),
    )


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--suite", required=True, help="task suite JSON")
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--jobs", type=int, default=1, help="parallel eval episodes")
    p.add_argument("--step-budget", type=int, default=30)
    p.add_argument("--k", type=int, default=5, help="retrieval depth per experience kind")
    p.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="worldmind", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="learn on the learning split, evaluate on the eval split")
    _common(run)
    run.add_argument("--backend", required=True, help="scripted:<file> or wire:<model_id>")
    run.add_argument("--repo", default="none", help="repository to start from, or 'none'")
    run.add_argument("--no-goal-exp", action="store_true", help="disable goal experience")
    run.add_argument("--no-process-exp", action="store_true", help="disable process experience")
    run.add_argument("--no-learn", action="store_true", help="skip the learning phase")
    run.add_argument("--online", action="store_true", help="keep learning during evaluation")

    tr = sub.add_parser("transfer", help="evaluate backend B with and without repository A")
    _common(tr)
    tr.add_argument("--repo-a", required=True)
    tr.add_argument("--backend-b", required=True)

    ab = sub.add_parser("ablate", help="full / -goal / -process / -both")
    _common(ab)
    ab.add_argument("--backend", required=True)
    return parser


def cmd_run(args: argparse.Namespace) -> int:
    suite = TaskSuite.load(args.suite)
    config = _config(args)
    if args.no_learn:
        config = replace(config, learning_enabled=False)
    repo = None if args.repo == "none" else Repository.load(args.repo)
    out = Path(args.out)
    report, repo_out = run_suite(suite, config, make_backend(args.backend), repo, jobs=args.jobs,
                                 online=args.online, seed=args.seed, trajectory_dir=out / "trajectories")
    write_outputs(out, report, repo_out)
    print(f"{suite.name}: sr={report.sr_mean:.3f} gc={report.gc_mean:.3f} "
          f"{json.dumps(report.error_histogram)} aborted={report.aborted}")
    return 0


def cmd_transfer(args: argparse.Namespace) -> int:
    suite = TaskSuite.load(args.suite)
    result = transfer_experiment(args.repo_a, make_backend(args.backend_b), suite, _config(args),
                                 jobs=args.jobs, seed=args.seed)
    out = Path(args.out)
    repo_a = Repository.load(args.repo_a)
    write_outputs(out, result.baseline, Repository(), prefix="baseline_")
    write_outputs(out, result.transfer, repo_a, prefix="transfer_")
    table = rows_to_csv(result.delta_rows())
    (out / "transfer_delta.csv").write_text(table, encoding="utf-8")
    sys.stdout.write(table)
    return 0


def cmd_ablate(args: argparse.Namespace) -> int:
    suite = TaskSuite.load(args.suite)
    out = Path(args.out)
    rows = []
    for label, report, repo in ablation_run(suite, make_backend(args.backend), _config(args),
                                            jobs=args.jobs, seed=args.seed):
        write_outputs(out / label, report, repo)
        rows.append(summary_row(label, report))
    table = rows_to_csv(rows)
    out.mkdir(parents=True, exist_ok=True)
    (out / "ablation.csv").write_text(table, encoding="utf-8")
    sys.stdout.write(table)
    return 0


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    handler = {"run": cmd_run, "transfer": cmd_transfer, "ablate": cmd_ablate}[args.command]
    try:
        return handler(args)
    except (WorldMindError, OSError, ValueError) as exc:
        print(f"worldmind: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
