"""State-merge (kTails) and tabu-search automaton learners for comparison."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .dfa import DFA
from .traces import NodeClass, PrefixTree, Trace, TraceStore


@dataclass(frozen=True)
class KTailsConfig:
    k: int = 2

    def __post_init__(self):
        if self.k < 0:
            raise ValueError("k must be non-negative")


class _UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, a: int) -> int:
        while self.parent[a] != a:
            self.parent[a] = self.parent[self.parent[a]]
            a = self.parent[a]
        return a

    def union(self, a: int, b: int) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        if rb < ra:
            ra, rb = rb, ra
        self.parent[rb] = ra
        return True


def _tails(tree: PrefixTree, v: int, k: int) -> frozenset:
    out = set()
    frontier = [((), v)]
    for _ in range(k):
        nxt = []
        for word, u in frontier:
            for lab, w in tree.children[u].items():
                out.add(word + (lab,))
                nxt.append((word + (lab,), w))
        frontier = nxt
    return frozenset(out)


def ktails(tree: PrefixTree, cfg: KTailsConfig = KTailsConfig()) -> DFA:
    """Merge prefix-tree nodes with equal acceptance and equal k-tails.

    Merging can leave a class with two successors on one label; those are
    merged too until the quotient is deterministic.
    """
    n = len(tree)
    uf = _UnionFind(n)
    groups: dict[tuple, int] = {}
    for v in range(n):
        key = (tree.node_class[v] is NodeClass.ACCEPT, _tails(tree, v, cfg.k))
        if key in groups:
            uf.union(groups[key], v)
        else:
            groups[key] = v
    changed = True
    while changed:
        changed = False
        succ: dict[tuple[int, str], int] = {}
        for v, lab, w in tree.edges():
            key = (uf.find(v), lab)
            if key in succ and uf.find(succ[key]) != uf.find(w):
                changed |= uf.union(succ[key], w)
            else:
                succ[key] = w
    ids: dict[int, int] = {}
    for v in range(n):
        ids.setdefault(uf.find(v), len(ids) + 1)
    delta = {(ids[uf.find(v)], lab): ids[uf.find(w)] for v, lab, w in tree.edges()}
    accepting = {ids[uf.find(v)] for v in range(n) if tree.node_class[v] is NodeClass.ACCEPT}
    return DFA(len(ids), set(tree.alphabet), delta, accepting, initial=ids[uf.find(0)]).canonical()


@dataclass(frozen=True)
class TabuConfig:
    max_states: int = 5
    iterations: int = 50
    tabu_len: int = 10
    seed: int = 0
    neighbours: int = 12

    def __post_init__(self):
        for name in ("max_states", "iterations", "tabu_len", "neighbours"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")


class _Sample:
    """Encoded traces: label ids plus, per position, whether that prefix must be rejected."""

    def __init__(self, traces: Iterable[Trace]):
        traces = [t for t in traces if t.positive]
        self.labels = sorted({lab for t in traces for lab in t.labels})
        idx = {lab: i for i, lab in enumerate(self.labels)}
        positives = {t.labels for t in traces}
        cache: dict[tuple, tuple] = {}
        self.rows = []
        for t in traces:
            if t.labels not in cache:
                word = [idx[lab] for lab in t.labels]
                reject = [t.labels[:i] not in positives for i in range(len(word))]
                cache[t.labels] = (word, reject)
            self.rows.append(cache[t.labels])

    def cost(self, delta: list[list[int]], accepting: list[bool]) -> int:
        """Positives not accepted plus rejecting prefixes accepted, over every stored trace."""
        bad = 0
        for word, reject in self.rows:
            q = 0
            alive = True
            for i, lab in enumerate(word):
                if reject[i] and accepting[q]:
                    bad += 1
                q = delta[q][lab]
                if q < 0:
                    alive = False
                    break
            if not alive or not accepting[q]:
                bad += 1
        return bad


def _to_dfa(delta, accepting, labels) -> DFA:
    seen = {0}
    stack = [0]
    while stack:
        q = stack.pop()
        for r in delta[q]:
            if r >= 0 and r not in seen:
                seen.add(r)
                stack.append(r)
    ids = {q: i + 1 for i, q in enumerate(sorted(seen))}
    d = {(ids[q], labels[j]): ids[r] for q in seen for j, r in enumerate(delta[q]) if r >= 0}
    acc = {ids[q] for q in seen if accepting[q]}
    return DFA(len(ids), set(labels), d, acc).canonical()


def tabu_learn(store: TraceStore | Iterable[Trace], cfg: TabuConfig = TabuConfig()
               ) -> tuple[DFA, list[int]]:
    """Tabu search over automata with ``cfg.max_states`` states.

    Each iteration scores ``cfg.neighbours`` random moves (retarget a
    transition, add a missing one, or flip an acceptance bit) by a full scan
    of the traces, then takes the best move that is not tabu; a tabu move is
    allowed only if it beats the best cost so far. Returns the best automaton
    and the best-so-far cost after each iteration.
    """
    traces = store.traces if isinstance(store, TraceStore) else tuple(store)
    sample = _Sample(traces)
    if not sample.rows:
        raise ValueError("tabu search needs at least one positive trace")
    rng = np.random.default_rng(cfg.seed)
    k, L = cfg.max_states, len(sample.labels)
    idx = {lab: i for i, lab in enumerate(sample.labels)}
    delta = [[-1] * L for _ in range(k)]
    accepting = [False] * k
    first = next(t for t in traces if t.positive).labels
    q = 0
    for lab in first[:k - 1]:
        if delta[q][idx[lab]] < 0:
            delta[q][idx[lab]] = q + 1
        q = delta[q][idx[lab]]
    accepting[q] = True

    cost = sample.cost(delta, accepting)
    best = (cost, [row[:] for row in delta], accepting[:])
    tabu: list[tuple] = []
    history = []
    for _ in range(cfg.iterations):
        candidates = []
        for _ in range(cfg.neighbours):
            if rng.random() < 0.2:
                move = ("flip", int(rng.integers(k)))
            else:
                move = ("set", int(rng.integers(k)), int(rng.integers(L)), int(rng.integers(k)))
                if delta[move[1]][move[2]] == move[3]:
                    continue
            candidates.append(move)
        scored = []
        for move in candidates:
            if move[0] == "flip":
                accepting[move[1]] = not accepting[move[1]]
                c = sample.cost(delta, accepting)
                accepting[move[1]] = not accepting[move[1]]
            else:
                _, q, j, r = move
                old = delta[q][j]
                delta[q][j] = r
                c = sample.cost(delta, accepting)
                delta[q][j] = old
            scored.append((c, move))
        for c, move in sorted(scored, key=lambda cm: cm[0]):
            attr = move[:3] if move[0] == "set" else move
            if attr in tabu and c >= best[0]:
                continue
            if move[0] == "flip":
                accepting[move[1]] = not accepting[move[1]]
            else:
                delta[move[1]][move[2]] = move[3]
            tabu.append(attr)
            del tabu[:-cfg.tabu_len]
            cost = c
            if cost < best[0]:
                best = (cost, [row[:] for row in delta], accepting[:])
            break
        history.append(best[0])
    return _to_dfa(best[1], best[2], sample.labels), history
