"""Temporal DQN: one Q-network, target network and replay memory per automaton state."""
from __future__ import annotations

from typing import Optional

import numpy as np

from ..dfa import DFA
from ..gridworld import DEFAULT_BUDGET, GridWorld
from .config import HyperParams, TotalReward
from .modules import ModuleSet, Transition, mlp_modules
from .product import ProductEnv
from .ql import EpisodeLog, TemporalAgent, run_episode


class TemporalDQN(TemporalAgent):
    def __init__(self, n_cells: int, dfa: DFA, hp: HyperParams, rng: np.random.Generator,
                 reward: TotalReward = TotalReward(), optimizer: str = "adam"):
        modules = mlp_modules(dfa, n_cells, rng, hp.hidden, hp.learning_rate, optimizer,
                              hp.replay_capacity)
        super().__init__(dfa, modules, reward, hp.epsilon, hp.replay_capacity)
        self.hp = hp
        self.rng = rng
        self._sync_targets()

    def _sync_targets(self) -> None:
        for m in self.modules.values():
            m.target = m.estimator.copy()

    def after_update(self, added: list[int]) -> None:
        for q in added:
            self.modules[q].target = self.modules[q].estimator.copy()

    def learn(self, q: int, tr: Transition) -> None:
        mod = self.modules[q]
        if self.t >= self.hp.replay_start:
            batch = mod.buffer.sample(self.rng, self.hp.minibatch_size)
            s, a, s2, r, done, labels = mod.buffer.arrays(batch)
            q2 = np.array([self.dfa.step(q, lab) for lab in labels])
            y = r.copy()
            for p in np.unique(q2):
                sel = (q2 == p) & ~done
                if sel.any():
                    y[sel] += self.hp.gamma * self.modules[int(p)].target.q_values(s2[sel]).max(axis=1)
            mod.estimator.train_step(s, a, y)
        if self.t % self.hp.target_update == 0:
            self._sync_targets()


def train_temporal_dqn(world: GridWorld, task, dfa: DFA, hp: HyperParams = HyperParams(),
                       seed: int = 0, episodes: int = 2000, reward: TotalReward = TotalReward(),
                       budget: int = DEFAULT_BUDGET, agent: Optional[TemporalDQN] = None
                       ) -> tuple[ModuleSet, list[EpisodeLog]]:
    """Episodes of epsilon-greedy control, each step filed under the active state's memory."""
    rng = np.random.default_rng(seed)
    if agent is None:
        agent = TemporalDQN(world.num_cells, dfa, hp, rng, reward)
    env = ProductEnv(world, task, dfa, budget, reward)
    curve = [run_episode(env, agent, rng, gamma=hp.gamma) for _ in range(episodes)]
    return agent.modules, curve
