"""Temporal neural fitted Q-iteration over per-state experience sets."""
from __future__ import annotations

from typing import NamedTuple, Optional

import numpy as np

from ..dfa import DFA
from ..gridworld import DEFAULT_BUDGET, GridWorld
from .config import TotalReward
from .modules import N_ACTIONS, EmptyBuffer, ModuleSet, Transition, mlp_modules
from .product import ProductEnv
from .ql import TemporalAgent


class NoAcceptingState(ValueError):
    pass


class PatternSet(NamedTuple):
    states: np.ndarray
    actions: np.ndarray
    targets: np.ndarray


def build_pattern_set(q: int, modules: ModuleSet, dfa: DFA, gamma: float = 0.99,
                      snapshot: Optional[dict] = None) -> PatternSet:
    """Bellman targets for the experience set of automaton state ``q``.

    The bootstrap term is read from the module owning the successor
    automaton state; ``snapshot`` maps states to frozen estimators.
    """
    buf = modules[q].buffer
    if not len(buf):
        raise EmptyBuffer(f"experience set of q{q} is empty")
    est = snapshot if snapshot is not None else {p: m.estimator for p, m in modules.items()}
    s, a, s2, r, done, labels = buf.arrays()
    q2 = np.array([dfa.step(q, lab) for lab in labels])
    targets = r.copy()
    for p in np.unique(q2):
        sel = (q2 == p) & ~done
        if sel.any():
            targets[sel] += gamma * est[int(p)].q_values(s2[sel]).max(axis=1)
    return PatternSet(s, a, targets)


def bellman_loss(estimator, patterns: PatternSet) -> float:
    pred = estimator.q_values(patterns.states)[np.arange(len(patterns.actions)), patterns.actions]
    return float(np.mean((pred - patterns.targets) ** 2))


def train_temporal_nfq(dfa: DFA, modules: ModuleSet, epochs: int, gamma: float = 0.99,
                       fit_steps: int = 100, batch: Optional[int] = None,
                       rng: Optional[np.random.Generator] = None
                       ) -> tuple[ModuleSet, dict[int, list[float]]]:
    """Fit every module on its pattern set, last automaton state first.

    Each epoch builds all pattern sets from a frozen copy of the modules,
    then fits. Returns the modules and, per state, the Bellman loss measured
    before each epoch's fit.
    """
    if not dfa.accepting:
        raise NoAcceptingState("automaton has no accepting state")
    modules.ensure(dfa)
    history: dict[int, list[float]] = {q: [] for q in dfa.states}
    order = sorted(dfa.states, reverse=True)
    for _ in range(epochs):
        frozen = {p: m.estimator.copy() for p, m in modules.items()}
        patterns = {}
        for q in order:
            try:
                patterns[q] = build_pattern_set(q, modules, dfa, gamma, frozen)
            except EmptyBuffer:
                continue
        for q in order:
            if q not in patterns:
                history[q].append(0.0)
                continue
            p = patterns[q]
            history[q].append(modules[q].estimator.fit(p.states, p.actions, p.targets,
                                                      steps=fit_steps, batch=batch, rng=rng))
    return modules, history


def converged_epoch(losses, threshold: float = 1e-3) -> Optional[int]:
    """First epoch from which the loss stays at or below ``threshold``."""
    last = None
    for i in reversed(range(len(losses))):
        if losses[i] > threshold:
            break
        last = i
    return last


def sweep_experience(world: GridWorld, dfa: DFA, modules: ModuleSet,
                     reward: TotalReward = TotalReward(), task_reward: float = 1.0) -> None:
    """Store every (cell, action) pair once per non-accepting automaton state.

    Entering an accepting state pays the task reward and ends the episode;
    any other change of automaton state counts as reaching a new state.
    """
    modules.ensure(dfa)
    for q in dfa.states:
        if q in dfa.accepting or q in dfa.trap:
            continue
        for cell in range(world.num_cells):
            pos = world.position(cell)
            if pos in world.obstacles:
                continue
            for a in range(N_ACTIONS):
                pos2 = world.move(pos, a)
                lab = world.cell_labels.get(pos2)
                q2 = dfa.step(q, lab)
                done = q2 in dfa.accepting
                r = reward(task_reward if done else 0.0, q2 != q)
                modules[q].buffer.add(Transition(cell, a, world.index(pos2), r, lab, done,
                                                 task_reward if done else 0.0))


def random_experience(world: GridWorld, task, dfa: DFA, modules: ModuleSet, episodes: int,
                      rng: np.random.Generator, reward: TotalReward = TotalReward(),
                      budget: int = DEFAULT_BUDGET) -> None:
    """Uniformly random episodes, each transition filed under its automaton state."""
    modules.ensure(dfa)
    env = ProductEnv(world, task, dfa, budget, reward)
    for _ in range(episodes):
        s, q = env.reset()
        while True:
            a = int(rng.integers(N_ACTIONS))
            res = env.step(a)
            modules[q].buffer.add(Transition(s, a, res.cell, res.reward, res.label, res.completed,
                                             res.extrinsic))
            s, q = res.cell, res.aut_state
            if res.done:
                break


class TemporalNFQ(TemporalAgent):
    """Epsilon-greedy data collection with periodic batch fitting of all modules."""

    def __init__(self, n_cells: int, dfa: DFA, hp, rng: np.random.Generator,
                 fit_every: int = 1000, epochs: int = 5, fit_steps: int = 50,
                 reward: TotalReward = TotalReward()):
        modules = mlp_modules(dfa, n_cells, rng, hp.hidden, hp.learning_rate, "adam",
                              hp.replay_capacity)
        super().__init__(dfa, modules, reward, hp.epsilon, hp.replay_capacity)
        self.hp = hp
        self.rng = rng
        self.fit_every, self.epochs, self.fit_steps = fit_every, epochs, fit_steps
        self.history: dict[int, list[float]] = {}

    def learn(self, q: int, tr: Transition) -> None:
        if self.t % self.fit_every == 0 and self.dfa.accepting:
            _, hist = train_temporal_nfq(self.dfa, self.modules, self.epochs, self.hp.gamma,
                                         self.fit_steps, self.hp.minibatch_size * 8, self.rng)
            for p, losses in hist.items():
                self.history.setdefault(p, []).extend(losses)
