"""Product of the grid world with an automaton, value iteration and rollouts."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional

import numpy as np

from ..dfa import DFA, chain_dfa
from ..gridworld import DEFAULT_BUDGET, GridWorld, TaskSpec, get_task, reset, step
from .config import TotalReward
from .modules import N_ACTIONS


def trivial_dfa() -> DFA:
    """One non-accepting state and no transitions: the model before any synthesis."""
    return DFA(1, set(), {}, set())


@dataclass
class ProductMDP:
    """Finite deterministic MDP on (cell, automaton state) pairs.

    State ``i`` encodes ``(cell, q)`` as ``(q - 1) * n_cells + cell``.
    ``terminal`` states are absorbing with value zero.
    """
    n_cells: int
    n_aut: int
    next_state: np.ndarray  # (S, A) int
    reward: np.ndarray      # (S, A) float
    terminal: np.ndarray    # (S,) bool
    start: int

    @property
    def n_states(self) -> int:
        return self.n_cells * self.n_aut

    def index(self, cell: int, q: int) -> int:
        return (q - 1) * self.n_cells + cell

    def split(self, i: int) -> tuple[int, int]:
        return i % self.n_cells, i // self.n_cells + 1


def build_product(world: GridWorld, dfa: DFA, reward: float = 1.0) -> ProductMDP:
    """Reward ``reward`` on entering an accepting state; accepting states absorb."""
    n, k = world.num_cells, dfa.num_states
    nxt = np.zeros((n * k, N_ACTIONS), dtype=np.int64)
    rew = np.zeros((n * k, N_ACTIONS))
    term = np.zeros(n * k, dtype=bool)
    mdp = ProductMDP(n, k, nxt, rew, term, 0)
    for q in dfa.states:
        for cell in range(n):
            i = mdp.index(cell, q)
            term[i] = q in dfa.accepting or q in dfa.trap
            pos = world.position(cell)
            for a in range(N_ACTIONS):
                pos2 = world.move(pos, a)
                q2 = dfa.step(q, world.cell_labels.get(pos2))
                nxt[i, a] = mdp.index(world.index(pos2), q2)
                if q2 in dfa.accepting and q not in dfa.accepting:
                    rew[i, a] = reward
    mdp.start = mdp.index(world.index(world.start), dfa.initial)
    return mdp


def build_task_product(world: GridWorld, task) -> tuple[ProductMDP, DFA]:
    """Product with the task's ground-truth progress automaton."""
    task = get_task(task)
    dfa = chain_dfa(task.required_sequence)
    return build_product(world, dfa, task.extrinsic_reward), dfa


def value_iteration(mdp: ProductMDP, gamma: float = 0.99, tol: float = 1e-10,
                    max_iter: int = 100_000) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Optimal values, greedy policy and action values.

    Stops once the sup-norm Bellman residual drops below ``tol``.
    """
    U = np.zeros(mdp.n_states)
    live = ~mdp.terminal
    for _ in range(max_iter):
        Q = mdp.reward + gamma * U[mdp.next_state]
        Q[mdp.terminal] = 0.0
        U_new = Q.max(axis=1)
        U_new[~live] = 0.0
        residual = np.max(np.abs(U_new - U)) if U.size else 0.0
        U = U_new
        if residual < tol:
            break
    Q = mdp.reward + gamma * U[mdp.next_state]
    Q[mdp.terminal] = 0.0
    return U, Q.argmax(axis=1), Q


def task_optimum(world: GridWorld, task, gamma: float = 0.99) -> float:
    mdp, _ = build_task_product(world, task)
    U, _, _ = value_iteration(mdp, gamma)
    return float(U[mdp.start])


class StepResult(NamedTuple):
    cell: int
    aut_state: int
    reward: float
    label: Optional[str]
    extrinsic: float
    done: bool
    completed: bool


class ProductEnv:
    """Grid world episode coupled with an automaton run.

    Rewards are ``TotalReward`` of the task's extrinsic reward and whether the
    automaton just entered a state not visited earlier in this episode.
    """

    def __init__(self, world: GridWorld, task, dfa: DFA, budget: int = DEFAULT_BUDGET,
                 reward: TotalReward = TotalReward()):
        self.world = world
        self.task: TaskSpec = get_task(task)
        self.dfa = dfa
        self.budget = budget
        self.reward = reward
        self.state = None
        self.q = dfa.initial
        self.visited: set[int] = set()

    def reset(self) -> tuple[int, int]:
        self.state = reset(self.world)
        self.q = self.dfa.initial
        self.visited = {self.q}
        return self.world.index(self.state.position), self.q

    def step(self, action: int) -> StepResult:
        self.state, label, extrinsic = step(self.world, self.state, action, self.task, self.budget)
        q2 = self.dfa.step(self.q, label)
        new = q2 not in self.visited
        self.visited.add(q2)
        self.q = q2
        r = self.reward(extrinsic, new)
        return StepResult(self.world.index(self.state.position), q2, r, label, extrinsic,
                          self.state.done, self.state.completed)


Policy = Callable[[int, int], int]


def rollout_return(world: GridWorld, task, dfa: DFA, policy: Policy, gamma: float = 0.99,
                   budget: int = DEFAULT_BUDGET) -> float:
    """Discounted extrinsic return of one rollout; reward at step t weighs gamma**(t-1)."""
    env = ProductEnv(world, task, dfa, budget, TotalReward(0.0))
    s, q = env.reset()
    total, disc = 0.0, 1.0
    while True:
        res = env.step(policy(s, q))
        total += disc * res.extrinsic
        disc *= gamma
        s, q = res.cell, res.aut_state
        if res.done:
            return total


def module_policy(modules) -> Policy:
    def policy(s: int, q: int) -> int:
        return modules[q].greedy(s)
    return policy


def mdp_policy(mdp: ProductMDP, pi: np.ndarray) -> Policy:
    def policy(s: int, q: int) -> int:
        return int(pi[mdp.index(s, q)])
    return policy


def evaluate_policy(world: GridWorld, task, dfa: DFA, modules, episodes: int = 1,
                    gamma: float = 0.99, budget: int = DEFAULT_BUDGET) -> float:
    """Mean discounted return of greedy rollouts (the world is deterministic)."""
    policy = modules if callable(modules) else module_policy(modules)
    returns = [rollout_return(world, task, dfa, policy, gamma, budget) for _ in range(episodes)]
    return float(np.mean(returns)) if returns else 0.0
