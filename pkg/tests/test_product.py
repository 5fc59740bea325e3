from collections import deque

import numpy as np
import pytest

from synthrl.dfa import chain_dfa
from synthrl.gridworld import TASKS, default_map, load_map
from synthrl.rl.config import TotalReward
from synthrl.rl.product import (ProductEnv, build_product, build_task_product, evaluate_policy,
                                mdp_policy, rollout_return, task_optimum, trivial_dfa,
                                value_iteration)


def bfs_distance(world, src, dst) -> int:
    dist = {src: 0}
    queue = deque([src])
    while queue:
        pos = queue.popleft()
        if pos == dst:
            return dist[pos]
        for a in range(4):
            nxt = world.move(pos, a)
            if nxt not in dist:
                dist[nxt] = dist[pos] + 1
                queue.append(nxt)
    raise AssertionError("unreachable")


def test_corridor_optimum_by_hand():
    # left to wood, back, right to the table: reward on the third step
    w = load_map("W@C\n")
    assert task_optimum(w, 1, 0.9) == pytest.approx(0.9 ** 2)
    assert task_optimum(w, 2, 0.9) == 0.0   # no grass on this map


@pytest.mark.parametrize("task", sorted(TASKS))
def test_default_map_optimum_is_shortest_route(task):
    # one cell per label, so the best route visits them in order along shortest paths
    w = default_map()
    cell = {lab: pos for pos, lab in w.cell_labels.items()}
    steps, pos = 0, w.start
    for lab in TASKS[task].required_sequence:
        steps += bfs_distance(w, pos, cell[lab])
        pos = cell[lab]
    assert task_optimum(w, task) == pytest.approx(0.99 ** (steps - 1), abs=1e-9)


def test_value_iteration_policy_rollout_matches_value():
    w = default_map()
    for task in (1, 3, 7):
        mdp, dfa = build_task_product(w, task)
        U, pi, _ = value_iteration(mdp)
        assert rollout_return(w, task, dfa, mdp_policy(mdp, pi)) == pytest.approx(U[mdp.start])


def test_product_indexing():
    w = load_map("W@C\n")
    mdp = build_product(w, chain_dfa(["wood", "crafttable"]))
    assert mdp.n_states == 9
    assert mdp.index(2, 3) == 8 and mdp.split(8) == (2, 3)
    assert mdp.start == mdp.index(1, 1)
    # stepping left from the start reads wood
    assert mdp.next_state[mdp.start, 0] == mdp.index(0, 2)
    assert mdp.terminal.tolist() == [False] * 6 + [True] * 3
    assert mdp.reward[mdp.index(1, 2), 1] == 1.0
    # bumping a wall while on the table re-reads its label, so those pay too
    paid = {(mdp.split(i), a) for i, a in zip(*np.nonzero(mdp.reward))}
    assert paid == {((1, 2), 1), ((2, 2), 1), ((2, 2), 2), ((2, 2), 3)}


def test_trivial_dfa_product_has_no_reward():
    mdp = build_product(default_map(), trivial_dfa())
    U, _, _ = value_iteration(mdp)
    assert not U.any()


def test_env_total_reward_counts_first_visits():
    w = load_map("W@C\n")
    env = ProductEnv(w, 1, chain_dfa(["wood", "crafttable"]), reward=TotalReward(0.5))
    assert env.reset() == (1, 1)
    r = env.step(0)
    assert (r.cell, r.aut_state, r.label, r.reward, r.done) == (0, 2, "wood", 0.5, False)
    r = env.step(1)
    assert r.reward == 0.0
    r = env.step(1)
    assert (r.aut_state, r.extrinsic, r.reward, r.completed) == (3, 1.0, 1.5, True)


def test_rollout_discounting():
    w = load_map("W@C\n")
    plan = iter([0, 1, 1])
    ret = rollout_return(w, 1, chain_dfa(["wood", "crafttable"]), lambda s, q: next(plan), 0.5)
    assert ret == 0.25


def test_evaluate_policy_budget_without_completion():
    w = load_map("W@C\n")
    assert evaluate_policy(w, 1, trivial_dfa(), lambda s, q: 2, budget=5) == 0.0


def test_value_iteration_q_consistency():
    mdp, _ = build_task_product(default_map(), 4)
    U, pi, Q = value_iteration(mdp)
    assert np.allclose(Q.max(axis=1), U)
    assert np.array_equal(Q.argmax(axis=1), pi)
