"""The eight acceptance criteria, each printed as one pass/fail line."""
import json
import time
from fractions import Fraction

import acceptance_log
import checks
from worldmind import backends, core
from worldmind.backends import ScriptedBackend, parse_agent_response
from worldmind.bench import TaskSuite, ablation_run, run_suite, transfer_experiment
from worldmind.engine import EpisodeConfig
from worldmind.sim import build_catalog, load_world

SUITES = checks.FIXTURES / "suites"
BACKENDS = checks.FIXTURES / "backends"


def backend(name):
    return ScriptedBackend.load(BACKENDS / f"{name}.json")


def test_criterion_1_simulator_oracle_equivalence():
    t0 = time.perf_counter()
    worlds = [w for w in checks.oracle_worlds() if len(w["receptacles"]) <= 3 and len(w["objects"]) <= 3]
    transitions, bad = 0, []
    for spec in worlds:
        _, n, b = checks.enumerate_and_compare(spec)
        transitions += n
        bad += b
    secs = time.perf_counter() - t0
    ok = not bad and transitions > 0 and secs < 60
    acceptance_log.record(1, ok, f"{len(worlds)} worlds, {transitions} transitions, "
                                 f"{len(bad)} mismatches, {secs:.1f}s (limit 60s)")
    assert ok, bad[:5]


def test_criterion_2_invariant_suites():
    t0 = time.perf_counter()
    results = {
        "frame fuzz (10000 steps)": checks.frame_fuzz(10_000, seed=2),
        "cascading skip": checks.cascading_skip_problems(2000, seed=2),
        "retrieval vs exact cosine (1000 entries, top-5)": checks.retrieval_mismatches(1000, 5, n_queries=30),
        "round-trip byte identity": checks.round_trip_problems(20, seed=2),
        "judge identity": checks.judge_identity_problems(2000, seed=2),
        "learning conservation": checks.conservation_problems(200, seed=2),
    }
    secs = time.perf_counter() - t0
    failed = [k for k, v in results.items() if v]
    ok = not failed and secs < 120
    acceptance_log.record(2, ok, f"{len(results) - len(failed)}/{len(results)} suites green, "
                                 f"{secs:.1f}s (limit 120s)" + (f"; failing: {failed}" if failed else ""))
    assert ok, {k: v[:3] for k, v in results.items() if v}


def test_criterion_3_directional_effect():
    t0 = time.perf_counter()
    suite = TaskSuite.load(SUITES / "knife.json")
    base, _ = run_suite(suite, EpisodeConfig(learning_enabled=False), backend("knife_a"))
    wm, _ = run_suite(suite, EpisodeConfig(), backend("knife_a"))
    secs = time.perf_counter() - t0
    ok = wm.sr_mean >= base.sr_mean + 0.30 - 1e-12 and secs < 30
    acceptance_log.record(3, ok, f"SR baseline {base.sr_mean:.3f} -> learned {wm.sr_mean:.3f} "
                                 f"(need +0.300), {secs:.1f}s (limit 30s)")
    assert ok


def test_criterion_4_transfer():
    suite = TaskSuite.load(SUITES / "knife.json")
    _, repo_a = run_suite(suite, EpisodeConfig(), backend("knife_a"))
    base, _ = run_suite(suite, EpisodeConfig(learning_enabled=False), backend("knife_b"))
    own, _ = run_suite(suite, EpisodeConfig(), backend("knife_b"))
    moved = transfer_experiment(repo_a, backend("knife_b"), suite, EpisodeConfig())
    assert moved.baseline.to_csv() == base.to_csv()
    own_delta = own.sr_mean - base.sr_mean
    transfer_delta = moved.transfer.sr_mean - moved.baseline.sr_mean
    ok = transfer_delta > 0 and abs(transfer_delta - own_delta) <= 0.05 + 1e-12
    acceptance_log.record(4, ok, f"B own-learning delta {own_delta:+.3f}, transfer delta {transfer_delta:+.3f} "
                                 f"(gap {abs(transfer_delta - own_delta):.3f}, limit 0.050)")
    assert ok


def _ablation():
    suite = TaskSuite.load(SUITES / "mixed.json")
    return {label: report for label, report, _ in ablation_run(suite, backend("mixed"))}


def test_criterion_5_error_redistribution():
    arms = _ablation()
    full, no_proc = arms["full"].error_histogram, arms["-process"].error_histogram
    ia_full, ia_np = full["InvalidActions"], no_proc["InvalidActions"]
    ok = ia_full < ia_np and ia_full <= 0.5 * ia_np
    acceptance_log.record(5, ok, f"InvalidActions -process {ia_np} -> full {ia_full}; "
                                 f"Timeout -process {no_proc['Timeout']} -> full {full['Timeout']} (reported)")
    assert ok


def test_criterion_6_ablation_directionality():
    arms = _ablation()
    d_sr_proc = arms["full"].sr_mean - arms["-process"].sr_mean
    d_sr_goal = arms["full"].sr_mean - arms["-goal"].sr_mean
    d_gc_goal = arms["full"].gc_mean - arms["-goal"].gc_mean
    ok = d_sr_proc > d_sr_goal and d_gc_goal >= d_sr_goal - 1e-12
    acceptance_log.record(6, ok, f"SR(-process->full) {d_sr_proc:+.3f} vs SR(-goal->full) {d_sr_goal:+.3f}; "
                                 f"GC(-goal->full) {d_gc_goal:+.3f} >= {d_sr_goal:+.3f}")
    assert ok


def test_criterion_7_parser_corpus():
    t0 = time.perf_counter()
    corpus = json.loads((checks.DATA / "parser_corpus.json").read_text())
    catalog = build_catalog(load_world(checks.FIXTURES / "worlds" / "kitchen_small.json"))
    wrong = []
    for case in corpus:
        expect = case["expect"]
        try:
            resp = parse_agent_response(case["raw"], catalog)
        except core.ResponseError as exc:
            cls = getattr(backends, expect.get("error", ""), None) or getattr(core, expect.get("error", ""), None)
            if cls is None or not isinstance(exc, cls) or any(
                    getattr(exc, k, None) != v for k, v in expect.get("attrs", {}).items()):
                wrong.append(case["id"])
        else:
            if expect.get("ok") != len(resp.executable_plan):
                wrong.append(case["id"])
    secs = time.perf_counter() - t0
    ok = len(corpus) == 40 and not wrong and secs < 5
    acceptance_log.record(7, ok, f"{len(corpus) - len(wrong)}/{len(corpus)} cases adjudicated, "
                                 f"{secs:.2f}s (limit 5s)" + (f"; wrong: {wrong}" if wrong else ""))
    assert ok


def test_criterion_8_metrics_audit():
    episodes = checks.metrics_episodes()
    worst, wrong = 0.0, []
    srs, gcs = [], []
    for ep in episodes:
        res, category = checks.run_metrics_episode(ep)
        err = abs(res.gc - float(Fraction(ep["gc"])))
        worst = max(worst, err)
        if err > 1e-9 or int(res.sr) != ep["sr"] or category != ep["category"]:
            wrong.append(ep["id"])
        srs.append(res.sr)
        gcs.append(res.gc)
    sr_err = abs(sum(srs) / len(srs) - sum(e["sr"] for e in episodes) / len(episodes))
    gc_err = abs(sum(gcs) / len(gcs) - float(sum(Fraction(e["gc"]) for e in episodes) / len(episodes)))
    ok = not wrong and max(sr_err, gc_err) <= 1e-9
    acceptance_log.record(8, ok, f"{len(episodes) - len(wrong)}/{len(episodes)} episodes match, "
                                 f"max per-episode GC error {worst:.1e}, aggregate error {max(sr_err, gc_err):.1e}")
    assert ok, wrong
