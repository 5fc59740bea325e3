"""Tabular temporal Q-learning: one Q table per automaton state."""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..dfa import DFA
from ..gridworld import DEFAULT_BUDGET, GridWorld
from .config import QLConfig, TotalReward
from .modules import ModuleSet, Transition, tabular_modules
from .product import ProductEnv, evaluate_policy, trivial_dfa


def ql_update(q_table: np.ndarray, s: int, a: int, r: float, s2: Optional[int],
              cfg: QLConfig, next_table: Optional[np.ndarray] = None) -> np.ndarray:
    """One Q-learning backup in place; ``s2=None`` marks a terminal successor.

    ``next_table`` is the table that owns ``s2`` (defaults to ``q_table``).
    """
    nxt = q_table if next_table is None else next_table
    future = 0.0 if s2 is None else float(np.max(nxt[s2]))
    q_table[s, a] += cfg.alpha * (r + cfg.gamma * future - q_table[s, a])
    return q_table


def epsilon_greedy(q_values: np.ndarray, eps: float, rng: np.random.Generator) -> int:
    """Random action with probability ``eps``, else a uniformly chosen maximiser."""
    if rng.random() < eps:
        return int(rng.integers(len(q_values)))
    best = np.flatnonzero(q_values == q_values.max())
    return int(best[0]) if len(best) == 1 else int(rng.choice(best))


@dataclass
class EpisodeLog:
    raw_labels: list
    discounted_return: float
    completed: bool
    steps: int
    visits: dict = field(default_factory=dict)


class TemporalAgent:
    """Bookkeeping shared by the temporal learners.

    Every step is also kept in an episode memory holding the observed label
    and extrinsic reward. When the automaton changes, the experience sets
    are rebuilt by replaying those label histories through the new
    automaton, so each transition sits in the set of the state that was
    active when it was taken and carries that automaton's total reward.
    """

    def __init__(self, dfa: DFA, modules: ModuleSet, reward: TotalReward, schedule,
                 capacity: int = 150_000):
        self.dfa = dfa
        self.modules = modules
        self.reward = reward
        self.schedule = schedule
        self.capacity = capacity
        self.episodes: deque[list[Transition]] = deque()
        self._stored = 0
        self.t = 0

    def epsilon(self) -> float:
        return self.schedule.value(self.t)

    def act(self, s: int, q: int, rng: np.random.Generator, greedy: bool = False) -> int:
        return epsilon_greedy(self.modules[q].q_values([s])[0], 0.0 if greedy else self.epsilon(), rng)

    def begin_episode(self) -> None:
        self.episodes.append([])
        while self._stored > self.capacity and len(self.episodes) > 1:
            self._stored -= len(self.episodes.popleft())

    def observe(self, q: int, tr: Transition) -> None:
        if not self.episodes:
            self.begin_episode()
        self.episodes[-1].append(tr)
        self._stored += 1
        self.modules[q].buffer.add(tr)
        self.t += 1
        self.learn(q, tr)

    def learn(self, q: int, tr: Transition) -> None:
        pass

    def refile(self) -> None:
        for m in self.modules.values():
            m.buffer.clear()
        for ep in self.episodes:
            q = self.dfa.initial
            seen = {q}
            for tr in ep:
                q2 = self.dfa.step(q, tr.label)
                r = self.reward(tr.extrinsic, q2 not in seen)
                seen.add(q2)
                self.modules[q].buffer.add(tr._replace(reward=r))
                q = q2

    def set_dfa(self, dfa: DFA) -> list[int]:
        """Adopt a (superset) automaton: add modules for new states, refile experience."""
        self.dfa = dfa
        added = self.modules.ensure(dfa)
        self.refile()
        self.after_update(added)
        return added

    def after_update(self, added: list[int]) -> None:
        pass


class TemporalQL(TemporalAgent):
    """Online temporal Q-learning, one table per automaton state.

    After an automaton update the refiled experience is replayed a few
    times so the tables catch up with the new partition.
    """

    def __init__(self, n_cells: int, dfa: DFA, cfg: QLConfig = QLConfig(),
                 reward: TotalReward = TotalReward(), capacity: int = 150_000,
                 replay_sweeps: int = 3):
        super().__init__(dfa, tabular_modules(dfa, n_cells, capacity), reward, cfg.epsilon, capacity)
        self.cfg = cfg
        self.replay_sweeps = replay_sweeps

    def _backup(self, q: int, tr: Transition) -> None:
        q2 = self.dfa.step(q, tr.label)
        s2 = None if tr.done else tr.next_state
        ql_update(self.modules[q].estimator.table, tr.state, tr.action, tr.reward, s2,
                  self.cfg, self.modules[q2].estimator.table)

    def learn(self, q: int, tr: Transition) -> None:
        self._backup(q, tr)

    def after_update(self, added: list[int]) -> None:
        for _ in range(self.replay_sweeps):
            for q in sorted(self.modules, reverse=True):
                for tr in list(self.modules[q].buffer):
                    self._backup(q, tr)


def run_episode(env: ProductEnv, agent, rng: np.random.Generator, learn: bool = True,
                gamma: float = 0.99) -> EpisodeLog:
    s, q = env.reset()
    if learn:
        agent.begin_episode()
    raw, visits = [], {q: 1}
    total, disc, steps = 0.0, 1.0, 0
    while True:
        a = agent.act(s, q, rng)
        res = env.step(a)
        raw.append(res.label)
        if learn:
            agent.observe(q, Transition(s, a, res.cell, res.reward, res.label, res.completed,
                                        res.extrinsic))
        total += disc * res.extrinsic
        disc *= gamma
        steps += 1
        s, q = res.cell, res.aut_state
        visits[q] = visits.get(q, 0) + 1
        if res.done:
            return EpisodeLog(raw, total, res.completed, steps, visits)


def train_temporal_ql(world: GridWorld, task, dfa: DFA, episodes: int, seed: int,
                      cfg: QLConfig = QLConfig(), reward: TotalReward = TotalReward(),
                      budget: int = DEFAULT_BUDGET) -> tuple[TemporalQL, list[EpisodeLog]]:
    """Temporal QL with a fixed automaton. A one-state automaton gives the flat baseline."""
    rng = np.random.default_rng(seed)
    agent = TemporalQL(world.num_cells, dfa, cfg, reward)
    env = ProductEnv(world, task, dfa, budget, reward)
    logs = [run_episode(env, agent, rng, gamma=cfg.gamma) for _ in range(episodes)]
    return agent, logs


def train_flat_ql(world: GridWorld, task, episodes: int, seed: int,
                  cfg: QLConfig = QLConfig(), budget: int = DEFAULT_BUDGET):
    """Memoryless baseline: Q over grid cells only, extrinsic reward only."""
    return train_temporal_ql(world, task, trivial_dfa(), episodes, seed, cfg,
                             TotalReward(0.0), budget)


def greedy_return(world: GridWorld, task, agent: TemporalQL, gamma: float = 0.99,
                  budget: int = DEFAULT_BUDGET) -> float:
    return evaluate_policy(world, task, agent.dfa, agent.modules, 1, gamma, budget)
