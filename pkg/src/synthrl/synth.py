"""Exact minimal-DFA identification from a prefix tree via SAT.

Nodes of the prefix tree are coloured with automaton states. Besides the
usual colouring constraints (determinism, accepting/rejecting nodes) the
encoding can require *compliance*: any two consecutive transitions of the
automaton must spell a label bigram that occurs in some positive trace.
Without it, a single positive trace such as ``wood smithtable`` is already
explained by a two-state automaton that loops on ``wood``.
"""
from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .dfa import DFA
from .sat import CnfFormula, solve
from .traces import NodeClass, PrefixTree

log = logging.getLogger(__name__)


class SizeBoundExceeded(RuntimeError):
    pass


class ExtensionConflict(SizeBoundExceeded):
    """The pinned automaton decides a positive trace as rejecting."""


@dataclass
class EncodingVars:
    k: int
    labels: list[str]
    x: dict[tuple[int, int], int] = field(default_factory=dict)
    y: dict[tuple[str, int, int], int] = field(default_factory=dict)
    z: dict[int, int] = field(default_factory=dict)


def _old_run(old: DFA, tree: PrefixTree) -> list[Optional[int]]:
    """State of ``old`` after reading each node's word (None when undefined)."""
    decided: list[Optional[int]] = [None] * len(tree)
    decided[0] = old.initial
    for v, lab, w in tree.edges():
        q = decided[v]
        if q is not None and q not in old.trap:
            decided[w] = old.successors(q).get(lab)
    return decided


def encode(tree: PrefixTree, k: int, *, compliance: bool = True,
           pinned: Optional[DFA] = None, symmetry: bool = True
           ) -> tuple[CnfFormula, EncodingVars]:
    labels = sorted(set(tree.alphabet) | (set(pinned.alphabet) if pinned else set()))
    n = len(tree)
    colors = range(1, k + 1)
    f = CnfFormula()
    ev = EncodingVars(k, labels)
    for v in range(n):
        for c in colors:
            ev.x[v, c] = f.new_var()
    for lab in labels:
        for c in colors:
            for d in colors:
                ev.y[lab, c, d] = f.new_var()
    for c in colors:
        ev.z[c] = f.new_var()
    x, y, z = ev.x, ev.y, ev.z

    node_class = list(tree.node_class)
    pinned_y: set[int] = set()
    k_old = 1
    if pinned is not None:
        k_old = pinned.num_states
        for (q, lab), r in pinned.delta.items():
            f.add_clause([y[lab, q, r]])
            pinned_y.add(y[lab, q, r])
        for q in pinned.states:
            f.add_clause([z[q] if q in pinned.accepting else -z[q]])
        for v, q in enumerate(_old_run(pinned, tree)):
            if q is None:
                continue
            f.add_clause([x[v, q]])
            if node_class[v] is NodeClass.REJECT and q in pinned.accepting:
                # already decided by the old automaton; keep the superset
                node_class[v] = NodeClass.UNKNOWN

    f.add_clause([x[0, 1]])
    for v in range(n):
        f.add_clause([x[v, c] for c in colors])
        for c, d in itertools.combinations(colors, 2):
            f.add_clause([-x[v, c], -x[v, d]])
        if node_class[v] is NodeClass.ACCEPT:
            for c in colors:
                f.add_clause([-x[v, c], z[c]])
        elif node_class[v] is NodeClass.REJECT:
            for c in colors:
                f.add_clause([-x[v, c], -z[c]])

    for v, lab, w in tree.edges():
        for c in colors:
            for d in colors:
                f.add_clause([-x[v, c], -x[w, d], y[lab, c, d]])
                f.add_clause([-x[v, c], -y[lab, c, d], x[w, d]])

    for lab in labels:
        for c in colors:
            for d, e in itertools.combinations(colors, 2):
                f.add_clause([-y[lab, c, d], -y[lab, c, e]])

    if compliance:
        seen = tree.bigrams()
        if pinned is not None:
            seen |= {(a, b) for (q, a), r in pinned.delta.items()
                     for b in pinned.successors(r)}
        for l1, l2 in itertools.product(labels, repeat=2):
            if (l1, l2) in seen:
                continue
            for c, d in itertools.product(colors, repeat=2):
                first = y[l1, c, d]
                if first in pinned_y:
                    continue
                for e in colors:
                    f.add_clause([-first, -y[l2, d, e]])

    if symmetry and k > k_old + 1:
        # new states appear in order of first use along the node numbering
        new = range(k_old + 1, k + 1)
        p: dict[tuple[int, int], int] = {}
        for v in range(n):
            for c in new:
                p[v, c] = f.new_var()
                f.add_clause([-x[v, c], p[v, c]])
                if v == 0:
                    f.add_clause([-p[v, c], x[v, c]])
                else:
                    f.add_clause([-p[v - 1, c], p[v, c]])
                    f.add_clause([-p[v, c], p[v - 1, c], x[v, c]])
                if c > k_old + 1:
                    if v == 0:
                        f.add_clause([-x[v, c]])
                    else:
                        f.add_clause([-x[v, c], p[v - 1, c - 1]])
    return f, ev


def _decode(tree: PrefixTree, ev: EncodingVars, model: dict[int, bool],
            pinned: Optional[DFA]) -> DFA:
    color = [0] * len(tree)
    for (v, c), var in ev.x.items():
        if model[var]:
            color[v] = c
    delta = dict(pinned.delta) if pinned else {}
    accepting = set(pinned.accepting) if pinned else set()
    trap = set(pinned.trap) if pinned else set()
    for v, lab, w in tree.edges():
        delta[color[v], lab] = color[w]
    for v, cls in enumerate(tree.node_class):
        if cls is NodeClass.ACCEPT:
            accepting.add(color[v])
    k = max(max(color), pinned.num_states if pinned else 1)
    alphabet = set(tree.alphabet) | (set(pinned.alphabet) if pinned else set())
    return DFA(k, alphabet, delta, accepting, trap)


def synthesize(tree: PrefixTree, k_max: int, *, compliance: bool = True,
               symmetry: bool = True) -> DFA:
    """Smallest automaton (at most ``k_max`` states) consistent with ``tree``."""
    if k_max < 1:
        raise ValueError("k_max must be at least 1")
    for k in range(1, k_max + 1):
        f, ev = encode(tree, k, compliance=compliance, symmetry=symmetry)
        model = solve(f)
        log.debug("synthesize k=%d vars=%d clauses=%d sat=%s",
                  k, f.num_vars, len(f.clauses), model is not None)
        if model is not None:
            return _decode(tree, ev, model, None)
    raise SizeBoundExceeded(f"no consistent automaton with at most {k_max} states")


def extend(old: DFA, tree: PrefixTree, k_max: int, *, compliance: bool = True,
           symmetry: bool = True) -> DFA:
    """Grow ``old`` into a minimal automaton consistent with ``tree``.

    Every state id, transition and acceptance flag of ``old`` is kept; new
    states get fresh ids after the old ones. Rejecting prefixes whose run is
    fully determined by ``old`` keep the old verdict. Returns ``old`` itself
    when it already accepts every positive trace of ``tree``.
    """
    decided = _old_run(old, tree)
    accepts_all = True
    for v, cls in enumerate(tree.node_class):
        if cls is not NodeClass.ACCEPT:
            continue
        q = decided[v]
        if q is None:
            accepts_all = False
        elif q not in old.accepting:
            raise ExtensionConflict(
                f"old automaton rejects positive trace {tree.word(v)} in state {q}")
    if accepts_all:
        return old
    for k in range(max(1, old.num_states), k_max + 1):
        f, ev = encode(tree, k, compliance=compliance, pinned=old, symmetry=symmetry)
        model = solve(f)
        log.debug("extend k=%d vars=%d clauses=%d sat=%s",
                  k, f.num_vars, len(f.clauses), model is not None)
        if model is not None:
            return _decode(tree, ev, model, old)
    raise SizeBoundExceeded(f"no consistent extension with at most {k_max} states")


def check_consistent(dfa: DFA, tree: PrefixTree, *, compliance: bool = True) -> list[str]:
    """Problems found when checking ``dfa`` against ``tree``; empty when consistent."""
    problems = []
    for v, cls in enumerate(tree.node_class):
        word = tree.word(v)
        acc = dfa.accepts(word)
        if cls is NodeClass.ACCEPT and not acc:
            problems.append(f"positive {word} not accepted")
        if cls is NodeClass.REJECT and acc:
            problems.append(f"prefix {word} accepted")
    if compliance:
        seen = tree.bigrams()
        for (q, l1), r in dfa.delta.items():
            for l2 in dfa.successors(r):
                if (l1, l2) not in seen:
                    problems.append(f"unobserved bigram {l1} {l2} at q{q}")
    return problems


_TABLES: dict[tuple[int, int], np.ndarray] = {}


def _all_tables(k: int, n_labels: int) -> np.ndarray:
    """Every partial transition table: row-major over (state, label), 0 = undefined."""
    key = (k, n_labels)
    if key not in _TABLES:
        cells = k * n_labels
        idx = np.arange((k + 1) ** cells, dtype=np.int64)
        digits = np.empty((idx.size, cells), dtype=np.int8)
        for j in range(cells):
            digits[:, cells - 1 - j] = idx % (k + 1)
            idx //= k + 1
        _TABLES[key] = digits
    return _TABLES[key]


def brute_force_min_dfa(tree: PrefixTree, k_max: int = 3, *, compliance: bool = True) -> DFA:
    """Exhaustive search over all partial DFAs with up to ``k_max`` states.

    Meant as a test oracle: small alphabets (at most 3 labels), ``k_max <= 3``.
    """
    labels = tree.alphabet
    L = len(labels)
    if k_max > 3 or L > 3:
        raise ValueError("brute force limited to k_max <= 3 and 3 labels")
    lab_idx = {lab: i for i, lab in enumerate(labels)}
    edges = list(tree.edges())
    seen = tree.bigrams()
    accept_nodes = [v for v, c in enumerate(tree.node_class) if c is NodeClass.ACCEPT]
    reject_nodes = [v for v, c in enumerate(tree.node_class) if c is NodeClass.REJECT]
    for k in range(1, k_max + 1):
        if L == 0:
            tables = np.zeros((1, 0), dtype=np.int8)
        else:
            tables = _all_tables(k, L)
        N = tables.shape[0]
        rows = np.arange(N)
        st = np.zeros((len(tree), N), dtype=np.int8)
        st[0] = 1
        ok = np.ones(N, dtype=bool)
        for v, lab, w in edges:  # parents precede children
            src = st[v]
            col = (np.maximum(src, 1) - 1).astype(np.int64) * L + lab_idx[lab]
            st[w] = np.where(src > 0, tables[rows, col], 0)
            ok &= st[w] > 0
        for s in range(1, k + 1):
            has_acc = np.zeros(N, dtype=bool)
            has_rej = np.zeros(N, dtype=bool)
            for v in accept_nodes:
                has_acc |= st[v] == s
            for v in reject_nodes:
                has_rej |= st[v] == s
            ok &= ~(has_acc & has_rej)
        if compliance and edges:
            used = np.zeros((N, k + 1, L), dtype=bool)
            for v, lab, w in edges:
                used[rows, st[v], lab_idx[lab]] = True
            for l1, l2 in itertools.product(labels, repeat=2):
                if (l1, l2) in seen:
                    continue
                i1, i2 = lab_idx[l1], lab_idx[l2]
                for s in range(1, k + 1):
                    tgt = tables[:, (s - 1) * L + i1].astype(np.int64)
                    bad = used[:, s, i1] & used[rows, tgt, i2]
                    ok &= ~bad
        hits = np.flatnonzero(ok)
        if hits.size:
            i = hits[0]
            delta = {(int(st[v, i]), lab): int(st[w, i]) for v, lab, w in edges}
            accepting = {int(st[v, i]) for v in accept_nodes}
            return DFA(k, set(labels), delta, accepting)
    raise SizeBoundExceeded(f"no consistent automaton with at most {k_max} states")
