"""Experiment orchestration: the explore/synthesize/train loop and runtime benchmarks."""
from __future__ import annotations

import csv
import gc
import io
import json
import logging
import os
import time
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .baselines import KTailsConfig, TabuConfig, ktails, tabu_learn
from .dfa import DFA, dump_fixture, to_dot
from .gridworld import DEFAULT_BUDGET, TASKS, get_task, read_map
from .rl.config import EpsilonSchedule, HyperParams, QLConfig, TotalReward
from .rl.dqn import TemporalDQN
from .rl.modules import save_checkpoint
from .rl.nfq import TemporalNFQ
from .rl.product import ProductEnv, evaluate_policy, task_optimum, trivial_dfa
from .rl.ql import TemporalQL, run_episode
from .synth import ExtensionConflict, SizeBoundExceeded, extend, synthesize
from .traces import Trace, TraceStore, build_prefix_tree, compress_episode, save_traces

log = logging.getLogger(__name__)

BACKENDS = ("tabular", "nfq", "dqn")
LEARNERS = ("synth", "tabu", "ktails")
SEED_ENV = "SYNTHRL_SEED"


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    """Settings of one run.

    Config files are flat ``key = value`` lines (``#`` comments). Keys are
    the field names below; ``hp.<name>`` sets a DQN/NFQ hyper-parameter.
    """
    task: int = 1
    seed: Optional[int] = None
    map: Optional[str] = None
    backend: str = "tabular"
    k_max: int = 10
    episodes: int = 2000
    budget: int = DEFAULT_BUDGET
    eta: float = 0.1
    gamma: float = 0.99
    alpha: float = 0.1
    epsilon_initial: float = 1.0
    epsilon_final: float = 0.1
    epsilon_anneal: int = 100_000
    eval_every: int = 100
    patience: int = 0
    nfq_every: int = 1000
    nfq_epochs: int = 5
    nfq_fit_steps: int = 50
    out: str = "run"
    hp: dict = field(default_factory=dict)

    def validate(self) -> "ExperimentConfig":
        cfg = self
        if cfg.seed is None:
            env = os.environ.get(SEED_ENV)
            if env is None:
                raise ConfigError(f"a seed is required (--seed or {SEED_ENV})")
            try:
                cfg = replace(cfg, seed=int(env))
            except ValueError:
                raise ConfigError(f"{SEED_ENV} must be an integer") from None
        if cfg.task not in TASKS:
            raise ConfigError(f"unknown task {cfg.task}; expected 1..7")
        if cfg.backend not in BACKENDS:
            raise ConfigError(f"backend must be one of {', '.join(BACKENDS)}")
        if cfg.map is not None and not Path(cfg.map).is_file():
            raise ConfigError(f"map file {cfg.map} not found")
        if cfg.k_max < 1 or cfg.episodes < 0 or cfg.budget < 1 or cfg.eval_every < 1:
            raise ConfigError("k_max, budget and eval_every must be positive, episodes non-negative")
        if cfg.eta < 0:
            raise ConfigError("eta must be non-negative")
        try:
            cfg.hyper_params()
            cfg.ql_config()
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from None
        return cfg

    def ql_config(self) -> QLConfig:
        return QLConfig(self.alpha, self.gamma,
                        EpsilonSchedule(self.epsilon_initial, self.epsilon_final, self.epsilon_anneal))

    def hyper_params(self) -> HyperParams:
        known = {f.name: f.type for f in fields(HyperParams)}
        changes = {"gamma": self.gamma}
        for key, value in self.hp.items():
            if key not in known:
                raise ValueError(f"unknown hyper-parameter {key!r}")
            changes[key] = _coerce(getattr(HyperParams(), key), value)
        return HyperParams().override(**changes)

    @classmethod
    def from_mapping(cls, values: dict) -> "ExperimentConfig":
        defaults = cls()
        known = {f.name for f in fields(cls)}
        kwargs: dict = {"hp": dict(defaults.hp)}
        for key, value in values.items():
            if key.startswith("hp."):
                kwargs["hp"][key[3:]] = value
            elif key in known and key != "hp":
                kwargs[key] = _coerce(getattr(defaults, key), value, key)
            else:
                raise ConfigError(f"unknown config key {key!r}")
        return cls(**kwargs)


def _coerce(default, value, key: str = ""):
    if not isinstance(value, str):
        return value
    try:
        if isinstance(default, bool):
            return value.lower() in ("1", "true", "yes")
        if isinstance(default, int) or key == "seed":
            return int(value)
        if isinstance(default, float):
            return float(value)
        if isinstance(default, tuple):
            return tuple(int(v) for v in value.split(","))
    except ValueError:
        raise ConfigError(f"bad value {value!r} for {key or 'hyper-parameter'}") from None
    if key == "map" and value.lower() in ("", "default", "none"):
        return None
    return value


def parse_config_text(text: str) -> dict[str, str]:
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"config line {lineno}: expected key = value")
        key, value = (part.strip() for part in line.split("=", 1))
        values[key] = value
    return values


def load_config(path, overrides: Optional[dict] = None) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    values = parse_config_text(text)
    values.update(overrides or {})
    return ExperimentConfig.from_mapping(values)


@dataclass
class DeepSynthResult:
    dfa: DFA
    curve: list[dict]
    summary: dict
    agent: object
    store: TraceStore
    automata: list[DFA]


def _make_agent(cfg: ExperimentConfig, n_cells: int, dfa: DFA):
    reward = TotalReward(cfg.eta)
    if cfg.backend == "tabular":
        return TemporalQL(n_cells, dfa, cfg.ql_config(), reward)
    rng = np.random.default_rng([cfg.seed, 1])
    hp = cfg.hyper_params()
    if cfg.backend == "dqn":
        return TemporalDQN(n_cells, dfa, hp, rng, reward)
    return TemporalNFQ(n_cells, dfa, hp, rng, cfg.nfq_every, cfg.nfq_epochs,
                       cfg.nfq_fit_steps, reward)


def _fmt(x: float) -> str:
    return f"{x:.10g}"


def run_deepsynth(cfg: ExperimentConfig, write: bool = True) -> DeepSynthResult:
    """Explore, synthesize on new completing behaviour, and train, for ``cfg.episodes`` episodes.

    The automaton starts as a single non-accepting state. The first
    completing trace is synthesized into an automaton; later completing
    traces it does not accept extend it. A trace the current automaton
    rejects outright cannot be added without dropping structure, so it is
    set aside and counted as a conflict.
    """
    cfg = cfg.validate()
    world = read_map(cfg.map)
    task = get_task(cfg.task)
    rng = np.random.default_rng(cfg.seed)
    dfa = trivial_dfa()
    agent = _make_agent(cfg, world.num_cells, dfa)
    env = ProductEnv(world, task, dfa, cfg.budget, TotalReward(cfg.eta))
    store = TraceStore()
    corpus: list[Trace] = []
    automata = [dfa]
    curve, evals, events = [], [], []
    conflicts = 0
    superset_ok = True
    stable = 0
    for episode in range(1, cfg.episodes + 1):
        ep = run_episode(env, agent, rng, gamma=cfg.gamma)
        trace = compress_episode(ep.raw_labels, ep.completed)
        delta = store.add_trace(trace)
        if delta.new_labels:
            events.append({"episode": episode, "kind": "new_labels", "labels": delta.new_labels})
        if trace.positive and not dfa.reaches_accepting(trace.labels):
            trace = destutter(trace)
            tree = build_prefix_tree(corpus + [trace])
            try:
                new = synthesize(tree, cfg.k_max) if not dfa.accepting else extend(dfa, tree, cfg.k_max)
            except ExtensionConflict:
                conflicts += 1
                new = None
            except SizeBoundExceeded:
                events.append({"episode": episode, "kind": "size_bound"})
                new = None
            if new is not None:
                corpus.append(trace)
                superset_ok &= new.contains(dfa)
                dfa = new
                automata.append(dfa)
                agent.set_dfa(dfa)
                env.dfa = dfa
                events.append({"episode": episode, "kind": "automaton", "states": dfa.num_states})
        curve.append({"episode": episode, "return": ep.discounted_return,
                      "epsilon": agent.epsilon(), "completed": int(ep.completed),
                      "states": dfa.num_states, "visits": ep.visits})
        if episode % cfg.eval_every == 0 or episode == cfg.episodes:
            g = evaluate_policy(world, task, dfa, agent.modules, 1, cfg.gamma, cfg.budget)
            stable = stable + 1 if evals and g > 0 and g == evals[-1]["return"] else 0
            evals.append({"episode": episode, "return": g})
            if cfg.patience and stable >= cfg.patience:
                break

    optimum = task_optimum(world, task, cfg.gamma)
    final = evaluate_policy(world, task, dfa, agent.modules, 1, cfg.gamma, cfg.budget)
    summary = {
        "task": cfg.task, "seed": cfg.seed, "backend": cfg.backend,
        "episodes": len(curve), "states": dfa.num_states,
        "automaton_updates": len(automata) - 1, "extension_conflicts": conflicts,
        "superset_ok": superset_ok, "optimum": optimum, "final_return": final,
        "ratio": final / optimum if optimum else 0.0,
        "completions": sum(r["completed"] for r in curve),
        "evaluations": evals, "events": events,
    }
    result = DeepSynthResult(dfa, curve, summary, agent, store, automata)
    if write:
        write_artifacts(result, cfg)
    return result


def destutter(trace: Trace) -> Trace:
    """Collapse runs of one label. Re-entering a labelled cell repeats its label,
    and an automaton that leaves repeats undefined already ignores them."""
    labels = [lab for i, lab in enumerate(trace.labels) if i == 0 or lab != trace.labels[i - 1]]
    return Trace(tuple(labels), trace.positive)


def curve_csv(curve: list[dict], num_states: int) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["episode", "return", "epsilon", "completed", "states"]
               + [f"visits_q{q}" for q in range(1, num_states + 1)])
    for row in curve:
        w.writerow([row["episode"], _fmt(row["return"]), _fmt(row["epsilon"]), row["completed"],
                    row["states"]] + [row["visits"].get(q, 0) for q in range(1, num_states + 1)])
    return buf.getvalue()


def write_artifacts(result: DeepSynthResult, cfg: ExperimentConfig) -> Path:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "dfa.dot").write_text(to_dot(result.dfa, f"task{cfg.task}"))
    (out / "dfa.txt").write_text(dump_fixture(result.dfa))
    (out / "curves.csv").write_text(curve_csv(result.curve, result.dfa.num_states))
    (out / "summary.json").write_text(json.dumps(result.summary, indent=2, sort_keys=True) + "\n")
    save_traces(result.store, out / "traces.jsonl")
    save_checkpoint(result.agent.modules, out / "modules.ckpt")
    return out


def task_traces(task, n: int, rng: np.random.Generator, gap: float = 0.5,
                max_gap: int = 4) -> list[Trace]:
    """Completing episodes for ``task``: the required labels separated by
    random runs of unlabelled steps, compressed into traces."""
    seq = get_task(task).required_sequence
    out = []
    for _ in range(n):
        raw: list = []
        for lab in seq:
            if rng.random() < gap:
                raw.extend([None] * int(rng.integers(1, max_gap + 1)))
            raw.append(lab)
        out.append(compress_episode(raw, True))
    return out


BENCH_BEHAVIOURS = (
    ("key", "door", "cookie"),
    ("button", "cookie"),
    ("key", "button", "door", "cookie"),
    ("symbol", "key", "door", "cookie"),
    ("button", "symbol", "cookie"),
    ("key2", "key", "door", "door2", "cookie"),
)


def bench_corpus(total_length: int, rng: np.random.Generator,
                 behaviours: Sequence[Sequence[str]] = BENCH_BEHAVIOURS) -> list[Trace]:
    """Positive traces drawn from a fixed behaviour set until ``total_length`` labels."""
    out: list[Trace] = []
    length = 0
    while length < total_length:
        word = behaviours[int(rng.integers(len(behaviours)))]
        out.append(Trace(tuple(word), True))
        length += len(word)
    return out


def corpus_prefix(corpus: Sequence[Trace], length: int) -> list[Trace]:
    out, total = [], 0
    for t in corpus:
        if total >= length:
            break
        out.append(t)
        total += len(t)
    return out


def incremental_synth(traces: Iterable[Trace], k_max: int = 12) -> tuple[DFA, int]:
    """Feed traces one at a time: synthesize on the first positive, extend on
    each positive the current automaton rejects. Returns the automaton and
    the number of traces set aside as conflicts."""
    dfa = trivial_dfa()
    used: list[Trace] = []
    conflicts = 0
    for t in traces:
        if not t.positive or dfa.accepts(t.labels):
            continue
        tree = build_prefix_tree(used + [t])
        try:
            dfa = synthesize(tree, k_max) if not used else extend(dfa, tree, k_max)
        except ExtensionConflict:
            conflicts += 1
            continue
        used.append(t)
    return dfa, conflicts


@dataclass(frozen=True)
class BenchRow:
    learner: str
    cum_trace_len: int
    ms: float
    states: int


def _run_learner(learner: str, traces: list[Trace], seed: int) -> DFA:
    if learner == "synth":
        return incremental_synth(traces)[0]
    if learner == "tabu":
        return tabu_learn(traces, TabuConfig(max_states=6, iterations=50, seed=seed))[0]
    if learner == "ktails":
        return ktails(build_prefix_tree(traces), KTailsConfig(2))
    raise ValueError(f"unknown learner {learner!r}")


def run_bench(corpus: Sequence[Trace], lengths: Sequence[int], learners: Sequence[str] = LEARNERS,
              repeats: int = 1, seed: int = 0) -> list[BenchRow]:
    """Time each learner on growing prefixes of ``corpus``; times averaged over repeats."""
    if any(b <= a for a, b in zip(lengths, lengths[1:])):
        raise ValueError("lengths must be strictly increasing")
    for learner in learners:
        if learner not in LEARNERS:
            raise ValueError(f"unknown learner {learner!r}")
    rows = []
    for learner in learners:
        for length in lengths:
            traces = corpus_prefix(corpus, length)
            if not traces:
                continue
            total = 0.0
            for _ in range(repeats):
                # as timeit does: keep collector pauses out of the measurement
                gc.collect()
                gc.disable()
                try:
                    t0 = time.perf_counter()
                    dfa = _run_learner(learner, traces, seed)
                    total += time.perf_counter() - t0
                finally:
                    gc.enable()
            rows.append(BenchRow(learner, sum(len(t) for t in traces),
                                 1000.0 * total / repeats, dfa.num_states))
    return rows


def bench_csv(rows: Iterable[BenchRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["learner", "cum_trace_len", "ms", "states"])
    for r in rows:
        w.writerow([r.learner, r.cum_trace_len, f"{r.ms:.3f}", r.states])
    return buf.getvalue()
