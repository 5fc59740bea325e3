"""End-to-end acceptance checks, one test per criterion.

Each test prints a single PASS/FAIL line (also collected into the pytest
terminal summary under "acceptance") before asserting.
"""
import itertools
import random
import time

import numpy as np
import pytest

from synthrl import cli
from synthrl.dfa import bundled_fixture, chain_dfa
from synthrl.gridworld import TASKS, default_map
from synthrl.harness import (ExperimentConfig, bench_corpus, run_bench, run_deepsynth,
                             task_traces)
from synthrl.rl.mlp import MLP, finite_difference_grad
from synthrl.rl.modules import mlp_modules
from synthrl.rl.nfq import converged_epoch, sweep_experience, train_temporal_nfq
from synthrl.rl.product import task_optimum
from synthrl.rl.ql import greedy_return, train_flat_ql
from synthrl.sat import CnfFormula, solve
from synthrl.synth import (ExtensionConflict, SizeBoundExceeded, brute_force_min_dfa, extend,
                           synthesize)
from synthrl.traces import Trace, TraceStore, build_prefix_tree

pytestmark = pytest.mark.acceptance


def truth_table_sat(f: CnfFormula) -> bool:
    for bits in itertools.product((False, True), repeat=f.num_vars):
        model = {i + 1: b for i, b in enumerate(bits)}
        if f.evaluate(model):
            return True
    return False


def test_sat_matches_truth_table(report):
    rng = random.Random(20)
    t0 = time.perf_counter()
    solver_time = 0.0
    wrong = 0
    n_sat = 0
    for _ in range(500):
        n = rng.randint(1, 10)
        clauses = [tuple(rng.choice((1, -1)) * rng.randint(1, n) for _ in range(rng.randint(1, 3)))
                   for _ in range(rng.randint(0, 40))]
        f = CnfFormula(n, clauses)
        s0 = time.perf_counter()
        model = solve(f)
        solver_time += time.perf_counter() - s0
        expected = truth_table_sat(f)
        n_sat += expected
        if (model is not None) != expected or (model is not None and not f.evaluate(model)):
            wrong += 1
    total = time.perf_counter() - t0
    ok = wrong == 0 and total < 10.0
    report(1, "SAT vs truth table", ok,
           f"{500 - wrong}/500 verdicts agree ({n_sat} satisfiable), "
           f"solver {solver_time:.2f}s, total {total:.2f}s (limit 10s)")
    assert ok


def _small_sample(rng: random.Random) -> list[Trace]:
    alphabet = "abc"[:rng.randint(1, 3)]
    return [Trace(tuple(rng.choice(alphabet) for _ in range(rng.randint(1, 5))), True)
            for _ in range(rng.randint(1, 6))]


def test_minimal_dfa_matches_brute_force(report):
    # brute force enumerates up to 3 states, so draw until 100 samples it can decide;
    # on the rest synthesis must also find nothing within 3 states
    rng = random.Random(7)
    t0 = time.perf_counter()
    decided = mismatches = skipped = 0
    while decided < 100:
        tree = build_prefix_tree(_small_sample(rng))
        try:
            expected = brute_force_min_dfa(tree, 3).num_states
        except SizeBoundExceeded:
            expected = None
        try:
            got = synthesize(tree, 3).num_states
        except SizeBoundExceeded:
            got = None
        if got != expected:
            mismatches += 1
        if expected is None:
            skipped += 1
        else:
            decided += 1
    total = time.perf_counter() - t0
    ok = mismatches == 0 and total < 60.0
    report(2, "minimal DFA vs brute force", ok,
           f"{decided} decided samples, {mismatches} mismatches "
           f"({skipped} samples beyond 3 states also agreed), {total:.1f}s (limit 60s)")
    assert ok


def test_task_shapes(report):
    rng = np.random.default_rng(3)
    results = {}
    for task, states in ((3, 5), (4, 3)):
        traces = task_traces(task, 20, rng)
        dfa = synthesize(build_prefix_tree(traces), 8)
        target = chain_dfa(TASKS[task].required_sequence)
        results[task] = (dfa.num_states == states and dfa.isomorphic(target)
                         and dfa.isomorphic(bundled_fixture(f"minecraft-task{task}")), dfa.num_states)
    ok = all(r[0] for r in results.values())
    report(3, "task automaton shapes", ok,
           f"task 3 -> {results[3][1]} states (chain of 5: {results[3][0]}), "
           f"task 4 -> {results[4][1]} states (chain of 3: {results[4][0]})")
    assert ok


def _target_words(rng: random.Random, n: int) -> list[tuple]:
    """Positive words for a random subsequence task over a small alphabet."""
    alphabet = "abcd"[:rng.randint(2, 4)]
    seq = [rng.choice(alphabet) for _ in range(rng.randint(1, 3))]
    out = []
    while len(out) < n:
        word, i = [], 0
        for _ in range(12):
            lab = rng.choice(alphabet)
            word.append(lab)
            if lab == seq[i]:
                i += 1
                if i == len(seq):
                    out.append(tuple(word))
                    break
    return out


def test_extend_superset_invariant(report):
    rng = random.Random(11)
    steps = violations = conflicts = 0
    for _ in range(200):
        store = TraceStore()
        old = None
        for word in _target_words(rng, rng.randint(2, 6)):
            store.add_trace(Trace(word, True))
            tree = build_prefix_tree(store)
            if old is None:
                old = synthesize(tree, 40)
                continue
            try:
                new = extend(old, tree, 40)
            except ExtensionConflict:
                conflicts += 1
                continue
            steps += 1
            violations += not new.contains(old)
            old = new
    ok = violations == 0 and steps > 0
    report(4, "extend superset invariant", ok,
           f"{steps - violations}/{steps} extensions contain their predecessor "
           f"over 200 runs ({conflicts} traces refused as conflicts)")
    assert ok


def _pearson(x, y) -> float:
    return float(np.corrcoef(np.asarray(x, float), np.asarray(y, float))[0, 1])


def test_runtime_trends(report):
    lengths = list(range(500, 8001, 500))
    t0 = time.perf_counter()
    corpus = bench_corpus(max(lengths), np.random.default_rng(0))
    rows = run_bench(corpus, lengths, ("synth", "tabu"), repeats=1, seed=0)
    total = time.perf_counter() - t0
    synth = [r.ms for r in rows if r.learner == "synth"]
    tabu = [(r.cum_trace_len, r.ms) for r in rows if r.learner == "tabu"]
    q = len(synth) // 4
    second, last = np.mean(synth[q:2 * q]), np.mean(synth[3 * q:])
    r = _pearson(*zip(*tabu))
    ok = last <= 2 * second and r >= 0.9 and total < 300
    report(5, "runtime trends", ok,
           f"synth last/second quartile {last:.1f}/{second:.1f} ms = {last / second:.2f} (<= 2), "
           f"tabu Pearson r {r:.3f} (>= 0.9), {total:.1f}s (limit 300s)")
    assert ok


def test_rl_convergence_gap(report):
    world = default_map()
    opt1, opt3 = task_optimum(world, 1), task_optimum(world, 3)
    ratios = []
    for seed in range(5):
        cfg = ExperimentConfig(task=1, seed=seed, episodes=2000, backend="tabular")
        ratios.append(run_deepsynth(cfg, write=False).summary["ratio"])
    flat = []
    for seed in range(5):
        agent, _ = train_flat_ql(world, 3, 2000, seed)
        flat.append(greedy_return(world, 3, agent) / opt3)
    ok = np.mean(ratios) >= 0.9 and np.mean(flat) < 0.2
    report(6, "RL convergence gap", ok,
           f"task 1 temporal QL {np.mean(ratios):.3f} of optimum {opt1:.4f} (>= 0.9; per seed "
           f"{', '.join(f'{x:.3f}' for x in ratios)}); task 3 flat QL {np.mean(flat):.3f} "
           f"of optimum {opt3:.4f} (< 0.2)")
    assert ok


def test_mlp_gradient_check(report):
    rng = np.random.default_rng(5)
    worst = 0.0
    for _ in range(20):
        net = MLP((6, 8, 8, 4), rng)
        net.set_flat(rng.normal(0.0, 0.5, net.flat().size))
        x = rng.normal(size=(5, 6))
        actions = rng.integers(0, 4, 5)
        targets = rng.normal(size=5)
        _, grads = net.loss_and_grad(x, actions, targets)
        analytic = np.concatenate([g.ravel() for g in grads])
        numeric = finite_difference_grad(net, x, actions, targets)
        rel = np.linalg.norm(analytic - numeric) / max(np.linalg.norm(analytic),
                                                       np.linalg.norm(numeric), 1e-12)
        worst = max(worst, rel)
    ok = worst <= 1e-4
    report(7, "MLP gradient check", ok, f"worst relative error {worst:.2e} over 20 points (<= 1e-4)")
    assert ok


def test_nfq_backprop_ordering(report):
    world = default_map()
    dfa = chain_dfa(TASKS[3].required_sequence)
    last, first = max(set(dfa.states) - dfa.accepting), dfa.initial
    wins = 0
    detail = []
    for seed in range(5):
        rng = np.random.default_rng(seed)
        modules = mlp_modules(dfa, world.num_cells, rng)
        sweep_experience(world, dfa, modules)
        _, hist = train_temporal_nfq(dfa, modules, 80, fit_steps=100, rng=rng)
        a, b = converged_epoch(hist[last]), converged_epoch(hist[first])
        wins += a is not None and (b is None or a < b)
        detail.append(f"{a}/{b}")
    ok = wins >= 4
    report(8, "NFQ back-propagation order", ok,
           f"q{last} before q{first} in {wins}/5 seeds (>= 4); epochs q{last}/q{first}: "
           f"{', '.join(detail)}")
    assert ok


def test_reproducible_artifacts(report, tmp_path):
    train_same = []
    for run in ("a", "b"):
        out = tmp_path / f"train_{run}"
        assert cli.main(["train", "--task", "1", "--backend", "tabular", "--seed", "7",
                         "--out", str(out)]) == 0
        train_same.append((out / "curves.csv").read_bytes())
    bench_same = []
    for run in ("a", "b"):
        out = tmp_path / f"bench_{run}.csv"
        assert cli.main(["bench", "--seed", "0", "--lengths", "500,1000,2000",
                         "--out", str(out)]) == 0
        bench_same.append(out.read_bytes())
    train_ok = train_same[0] == train_same[1]
    bench_ok = bench_same[0] == bench_same[1]
    ok = train_ok and bench_ok
    report(9, "byte-identical CSV", ok,
           f"train curves.csv identical: {train_ok}; bench CSV identical: {bench_ok}"
           + ("" if bench_ok else " (its ms column is measured wall-clock time)"))
    assert ok
