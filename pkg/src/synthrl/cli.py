"""Command line interface.

Exit status: 0 on success, 1 on usage errors, 2 when the command fails.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import harness
from .baselines import KTailsConfig, TabuConfig, ktails, tabu_learn
from .dfa import DFA, bundled_fixture, bundled_fixture_names, load_fixture, parse_dot, to_dot
from .gridworld import read_map
from .rl.modules import MLPEstimator, ModuleSet, QModule, TabularEstimator, load_checkpoint
from .rl.product import evaluate_policy, task_optimum
from .synth import extend, synthesize
from .traces import build_prefix_tree, load_traces

EXIT_OK, EXIT_USAGE, EXIT_FAIL = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _seed(args) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get(harness.SEED_ENV)
    if env is None:
        raise UsageError(f"--seed is required (or set {harness.SEED_ENV})")
    try:
        return int(env)
    except ValueError:
        raise UsageError(f"{harness.SEED_ENV} must be an integer") from None


def read_dfa(path) -> DFA:
    """Load an automaton from a DOT file written by this tool or a plain-text fixture."""
    text = Path(path).read_text()
    return parse_dot(text) if text.lstrip().startswith("digraph") else load_fixture(text)


def _write(path, text: str) -> None:
    p = Path(path)
    if p.parent != Path("."):
        p.parent.mkdir(parents=True, exist_ok=True)
    p.write_text(text)


def cmd_synth(args) -> int:
    tree = build_prefix_tree(load_traces(args.traces))
    compliance = not args.no_compliance
    if args.extend:
        dfa = extend(read_dfa(args.extend), tree, args.k_max, compliance=compliance)
    else:
        dfa = synthesize(tree, args.k_max, compliance=compliance)
    _write(args.out, to_dot(dfa))
    print(f"{dfa.num_states} states written to {args.out}")
    return EXIT_OK


def cmd_merge(args) -> int:
    dfa = ktails(build_prefix_tree(load_traces(args.traces)), KTailsConfig(args.k))
    _write(args.out, to_dot(dfa, "ktails"))
    print(f"{dfa.num_states} states written to {args.out}")
    return EXIT_OK


def cmd_tabu(args) -> int:
    cfg = TabuConfig(args.max_states, args.iterations, args.tabu_len, _seed(args))
    dfa, history = tabu_learn(load_traces(args.traces), cfg)
    _write(args.out, to_dot(dfa, "tabu"))
    print(f"{dfa.num_states} states, final cost {history[-1] if history else 'n/a'}, "
          f"written to {args.out}")
    return EXIT_OK


def _overrides(args) -> dict:
    values = {}
    for item in args.set or []:
        if "=" not in item:
            raise UsageError(f"--set expects key=value, got {item!r}")
        key, value = item.split("=", 1)
        values[key.strip()] = value.strip()
    for key in ("task", "backend", "map", "out", "episodes", "seed"):
        value = getattr(args, key, None)
        if value is not None:
            values[key] = value
    return values


def cmd_train(args) -> int:
    overrides = _overrides(args)
    try:
        if args.config:
            cfg = harness.load_config(args.config, overrides)
        else:
            cfg = harness.ExperimentConfig.from_mapping(overrides)
        cfg = cfg.validate()
    except harness.ConfigError as exc:
        raise UsageError(str(exc)) from None
    result = harness.run_deepsynth(cfg)
    s = result.summary
    print(f"task {s['task']}: {s['states']} automaton states, greedy return "
          f"{s['final_return']:.4f} of optimum {s['optimum']:.4f}; artifacts in {cfg.out}")
    return EXIT_OK


def modules_from_checkpoint(path) -> ModuleSet:
    arrays = load_checkpoint(path)
    mods = ModuleSet(factory=None)
    rng = np.random.default_rng(0)
    for q, params in sorted(arrays.items()):
        if len(params) == 1:
            est = TabularEstimator(*params[0].shape)
            est.table[...] = params[0]
        else:
            sizes = [params[0].shape[0]] + [w.shape[1] for w in params[0::2]]
            est = MLPEstimator(sizes[0], rng, tuple(sizes[1:-1]), sizes[-1])
            for p, src in zip(est.params(), params):
                p[...] = src
        mods[q] = QModule(q, est)
    return mods


def cmd_eval(args) -> int:
    run = Path(args.run) if args.run else None
    dfa_path = args.dfa or (run / "dfa.txt" if run else None)
    ckpt = args.checkpoint or (run / "modules.ckpt" if run else None)
    if dfa_path is None or ckpt is None:
        raise UsageError("give --run DIR or both --dfa and --checkpoint")
    task, map_path = args.task, args.map
    if run and (run / "summary.json").is_file():
        summary = json.loads((run / "summary.json").read_text())
        task = task if task is not None else summary.get("task")
    if task is None:
        raise UsageError("--task is required")
    world = read_map(map_path)
    dfa = read_dfa(dfa_path)
    mods = modules_from_checkpoint(ckpt)
    ret = evaluate_policy(world, task, dfa, mods, 1, args.gamma, args.budget)
    opt = task_optimum(world, task, args.gamma)
    print(json.dumps({"task": int(task), "return": ret, "optimum": opt,
                      "ratio": ret / opt if opt else 0.0}, sort_keys=True))
    return EXIT_OK


def cmd_bench(args) -> int:
    seed = _seed(args)
    try:
        lengths = [int(x) for x in args.lengths.split(",") if x.strip()]
    except ValueError:
        raise UsageError("--lengths expects comma separated integers") from None
    learners = [x.strip() for x in args.learners.split(",") if x.strip()]
    bad = set(learners) - set(harness.LEARNERS)
    if bad:
        raise UsageError(f"unknown learners {sorted(bad)}")
    if any(b <= a for a, b in zip(lengths, lengths[1:])):
        raise UsageError("--lengths must be strictly increasing")
    if args.traces:
        corpus = list(load_traces(args.traces).traces)
    else:
        corpus = harness.bench_corpus(max(lengths, default=0), np.random.default_rng(seed))
    rows = harness.run_bench(corpus, lengths, learners, args.repeats, seed)
    _write(args.out, harness.bench_csv(rows))
    print(f"{len(rows)} rows written to {args.out}")
    return EXIT_OK


def cmd_export_dot(args) -> int:
    if args.list:
        print("\n".join(bundled_fixture_names()))
        return EXIT_OK
    if bool(args.fixture) == bool(args.dfa):
        raise UsageError("give exactly one of --fixture or --dfa")
    if not args.out:
        raise UsageError("--out is required")
    dfa = bundled_fixture(args.fixture) if args.fixture else read_dfa(args.dfa)
    name = (args.fixture or Path(args.dfa).stem).replace("-", "_")
    _write(args.out, to_dot(dfa, name))
    print(f"written to {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="synthrl",
                description="Automaton synthesis from traces and automaton-guided RL.")
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("synth", help="minimal automaton from positive traces (SAT)")
    s.add_argument("--traces", required=True, help="JSON-lines trace file")
    s.add_argument("--out", required=True, help="DOT output path")
    s.add_argument("--k-max", type=int, default=12, help="largest state count tried")
    s.add_argument("--extend", metavar="DFA", help="grow this automaton instead of starting over")
    s.add_argument("--no-compliance", action="store_true",
                   help="allow label pairs that never occur consecutively in a trace")
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("merge", help="kTails state-merge baseline")
    s.add_argument("--traces", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--k", type=int, default=2, help="tail depth")
    s.set_defaults(func=cmd_merge)

    s = sub.add_parser("tabu", help="tabu-search baseline")
    s.add_argument("--traces", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--max-states", type=int, default=5)
    s.add_argument("--iterations", type=int, default=50)
    s.add_argument("--tabu-len", type=int, default=10)
    s.add_argument("--seed", type=int)
    s.set_defaults(func=cmd_tabu)

    s = sub.add_parser("train", help="explore, synthesize and train on one task")
    s.add_argument("--task", type=int)
    s.add_argument("--backend", choices=harness.BACKENDS)
    s.add_argument("--seed", type=int)
    s.add_argument("--map", help="map file (default: bundled 10x10 map)")
    s.add_argument("--out", help="output directory (default: run)")
    s.add_argument("--episodes", type=int)
    s.add_argument("--config", help="key = value config file")
    s.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="config override, e.g. eta=0 or hp.learning_rate=0.001")
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("eval", help="greedy return of trained modules")
    s.add_argument("--run", help="directory written by train")
    s.add_argument("--dfa", help="automaton (DOT or fixture text)")
    s.add_argument("--checkpoint", help="module checkpoint")
    s.add_argument("--task", type=int)
    s.add_argument("--map")
    s.add_argument("--gamma", type=float, default=0.99)
    s.add_argument("--budget", type=int, default=100)
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("bench", help="runtime of synth, tabu and ktails on growing corpora")
    s.add_argument("--out", required=True, help="CSV output path")
    s.add_argument("--traces", help="corpus (default: synthetic behaviour-set corpus)")
    s.add_argument("--lengths", default="500,1000,1500,2000,2500,3000,3500,4000")
    s.add_argument("--learners", default=",".join(harness.LEARNERS))
    s.add_argument("--repeats", type=int, default=1)
    s.add_argument("--seed", type=int)
    s.set_defaults(func=cmd_bench)

    s = sub.add_parser("export-dot", help="write an automaton as DOT")
    s.add_argument("--fixture", help="bundled automaton name")
    s.add_argument("--dfa", help="automaton file (fixture text or DOT)")
    s.add_argument("--out")
    s.add_argument("--list", action="store_true", help="list bundled automata")
    s.set_defaults(func=cmd_export_dot)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"synthrl: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # noqa: BLE001 - reported as a runtime failure
        logging.getLogger(__name__).debug("command failed", exc_info=True)
        print(f"synthrl: error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
