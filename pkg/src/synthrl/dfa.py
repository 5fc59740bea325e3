"""Partial deterministic finite automata over string labels.

States are the integers ``1..num_states``. Transitions that are not listed
are undefined. Unlabelled steps never move the automaton.
"""
from __future__ import annotations

import enum
import json
import re
from collections import deque
from dataclasses import dataclass, field
from importlib import resources
from typing import Iterable, Mapping, Optional, Sequence

from .traces import Label, Trace

EMPTY_SYMBOL = "∅"


class InvalidDFA(ValueError):
    pass


class UnknownLabel(KeyError):
    pass


class FixtureParseError(ValueError):
    pass


class Verdict(enum.Enum):
    ACCEPTED = "accepted"
    REJECTED = "rejected"
    UNDEFINED = "undefined"
    TRAPPED = "trapped"


@dataclass(frozen=True)
class RunResult:
    path: tuple[int, ...]
    verdict: Verdict

    @property
    def state(self) -> int:
        return self.path[-1]


@dataclass(frozen=True)
class DFA:
    num_states: int
    alphabet: frozenset[Label]
    delta: Mapping[tuple[int, Label], int]
    accepting: frozenset[int]
    trap: frozenset[int] = frozenset()
    initial: int = 1
    _succ: dict = field(default=None, init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        object.__setattr__(self, "alphabet", frozenset(self.alphabet))
        object.__setattr__(self, "accepting", frozenset(self.accepting))
        object.__setattr__(self, "trap", frozenset(self.trap))
        object.__setattr__(self, "delta", dict(sorted(self.delta.items())))
        states = range(1, self.num_states + 1)
        if self.num_states < 1 or self.initial not in states:
            raise InvalidDFA("initial state outside the state set")
        if not (self.accepting | self.trap) <= set(states):
            raise InvalidDFA("accepting/trap state outside the state set")
        if self.accepting & self.trap:
            raise InvalidDFA("state both accepting and trap")
        succ: dict[int, dict[Label, int]] = {q: {} for q in states}
        for (q, lab), r in self.delta.items():
            if q not in succ or r not in succ:
                raise InvalidDFA(f"transition {q} -{lab}-> {r} leaves the state set")
            if lab not in self.alphabet:
                raise InvalidDFA(f"label {lab!r} not in alphabet")
            succ[q][lab] = r
        object.__setattr__(self, "_succ", succ)
        unreachable = set(states) - self.reachable()
        if unreachable:
            raise InvalidDFA(f"unreachable states {sorted(unreachable)}")

    @property
    def states(self) -> range:
        return range(1, self.num_states + 1)

    def successors(self, q: int) -> dict[Label, int]:
        return self._succ[q]

    def reachable(self) -> set[int]:
        seen = {self.initial}
        queue = deque([self.initial])
        while queue:
            q = queue.popleft()
            for r in self._succ[q].values():
                if r not in seen:
                    seen.add(r)
                    queue.append(r)
        return seen

    def step(self, q: int, label: Optional[Label]) -> int:
        """Product-MDP semantics: no label, unknown or undefined labels keep ``q``."""
        if label is None:
            return q
        return self._succ[q].get(label, q)

    def run(self, trace: Trace | Sequence[Optional[Label]]) -> RunResult:
        labels = trace.labels if isinstance(trace, Trace) else trace
        q = self.initial
        path = [q]
        for lab in labels:
            if lab is None:
                continue
            if lab not in self.alphabet:
                raise UnknownLabel(lab)
            nxt = self._succ[q].get(lab)
            if nxt is None:
                return RunResult(tuple(path), Verdict.UNDEFINED)
            q = nxt
            path.append(q)
            if q in self.trap:
                return RunResult(tuple(path), Verdict.TRAPPED)
        verdict = Verdict.ACCEPTED if q in self.accepting else Verdict.REJECTED
        return RunResult(tuple(path), verdict)

    def accepts(self, labels: Sequence[Label]) -> bool:
        q = self.initial
        for lab in labels:
            q = self._succ[q].get(lab)
            if q is None or q in self.trap:
                return False
        return q in self.accepting

    def reaches_accepting(self, labels: Sequence[Optional[Label]]) -> bool:
        """Acceptance under product semantics, where undefined labels keep the state."""
        q = self.initial
        for lab in labels:
            q = self.step(q, lab)
            if q in self.trap:
                return False
        return q in self.accepting

    def contains(self, other: "DFA") -> bool:
        """True when ``other`` is a sub-structure with identical state ids."""
        if other.num_states > self.num_states or other.initial != self.initial:
            return False
        if not other.alphabet <= self.alphabet:
            return False
        if any(self.delta.get(k) != v for k, v in other.delta.items()):
            return False
        olds = set(other.states)
        return (self.accepting & olds) == other.accepting and (self.trap & olds) == other.trap

    def relabel(self, mapping: Mapping[int, int]) -> "DFA":
        return DFA(
            num_states=self.num_states,
            alphabet=self.alphabet,
            delta={(mapping[q], lab): mapping[r] for (q, lab), r in self.delta.items()},
            accepting={mapping[q] for q in self.accepting},
            trap={mapping[q] for q in self.trap},
            initial=mapping[self.initial],
        )

    def canonical(self) -> "DFA":
        """Renumber states breadth-first from the initial state, labels sorted."""
        order = {self.initial: 1}
        queue = deque([self.initial])
        while queue:
            q = queue.popleft()
            for lab in sorted(self._succ[q]):
                r = self._succ[q][lab]
                if r not in order:
                    order[r] = len(order) + 1
                    queue.append(r)
        return self.relabel(order)

    def isomorphic(self, other: "DFA") -> bool:
        # all states are reachable, so the BFS numbering is a canonical form
        return self.canonical() == other.canonical()


def run(dfa: DFA, trace) -> RunResult:
    return dfa.run(trace)


def _dot_id(q: int) -> str:
    return f"q{q}"


def to_dot(dfa: DFA, name: str = "dfa") -> str:
    """DOT digraph with one edge per (state, label).

    Accepting states are green double circles, trap states red. An explicit
    empty-label self-loop is drawn on every non-trap state that is either
    non-accepting or initial.
    """
    lines = [f"digraph {name} {{",
             f"  // alphabet: {json.dumps(sorted(dfa.alphabet))}",
             "  rankdir=LR;",
             '  __start [shape=point];']
    for q in dfa.states:
        attrs = [f'label="{_dot_id(q)}"']
        if q in dfa.accepting:
            attrs += ["shape=doublecircle", "style=filled", "fillcolor=green"]
        elif q in dfa.trap:
            attrs += ["shape=circle", "style=filled", "fillcolor=red"]
        else:
            attrs += ["shape=circle"]
        lines.append(f"  {_dot_id(q)} [{', '.join(attrs)}];")
    lines.append(f"  __start -> {_dot_id(dfa.initial)};")
    for (q, lab), r in dfa.delta.items():
        lines.append(f'  {_dot_id(q)} -> {_dot_id(r)} [label="{lab}"];')
    for q in dfa.states:
        if q not in dfa.trap and (q not in dfa.accepting or q == dfa.initial):
            lines.append(f'  {_dot_id(q)} -> {_dot_id(q)} [label="{EMPTY_SYMBOL}", style=dashed];')
    lines.append("}")
    return "\n".join(lines) + "\n"


_NODE_RE = re.compile(r'^\s*q(\d+)\s*\[(.*)\];\s*$')
_EDGE_RE = re.compile(r'^\s*(q\d+|__start)\s*->\s*q(\d+)\s*(?:\[label="([^"]*)".*\])?;\s*$')


def parse_dot(text: str) -> DFA:
    """Inverse of :func:`to_dot`; only understands the dialect it writes."""
    alphabet: set[str] = set()
    states: set[int] = set()
    accepting, trap = set(), set()
    delta: dict[tuple[int, str], int] = {}
    initial = None
    for line in text.splitlines():
        stripped = line.strip()
        if stripped.startswith("// alphabet:"):
            alphabet.update(json.loads(stripped.split(":", 1)[1]))
            continue
        m = _NODE_RE.match(line)
        if m:
            q = int(m.group(1))
            states.add(q)
            if "fillcolor=green" in m.group(2):
                accepting.add(q)
            elif "fillcolor=red" in m.group(2):
                trap.add(q)
            continue
        m = _EDGE_RE.match(line)
        if m:
            src, dst, lab = m.group(1), int(m.group(2)), m.group(3)
            if src == "__start":
                initial = dst
            elif lab != EMPTY_SYMBOL:
                delta[(int(src[1:]), lab)] = dst
                alphabet.add(lab)
    if initial is None or not states:
        raise FixtureParseError("not a DFA in this DOT dialect")
    return DFA(max(states), alphabet, delta, accepting, trap, initial)


def dump_fixture(dfa: DFA) -> str:
    lines = [f"states {dfa.num_states} initial {dfa.initial}"]
    used = {lab for (_, lab) in dfa.delta}
    if dfa.alphabet - used:
        lines.append("alphabet " + " ".join(sorted(dfa.alphabet)))
    lines += [f"accept {q}" for q in sorted(dfa.accepting)]
    lines += [f"trap {q}" for q in sorted(dfa.trap)]
    lines += [f"trans {q} {lab} {r}" for (q, lab), r in dfa.delta.items()]
    return "\n".join(lines) + "\n"


def load_fixture(text: str) -> DFA:
    """Parse the plain-text automaton format.

    Header ``states k initial i`` followed by ``accept i``, ``trap i`` and
    ``trans i label j`` lines; ``#`` starts a comment. An optional
    ``alphabet a b ...`` line declares labels without transitions.
    """
    num_states = initial = None
    alphabet: set[str] = set()
    accepting, trap = set(), set()
    delta: dict[tuple[int, str], int] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        try:
            if parts[0] == "states" and len(parts) == 4 and parts[2] == "initial":
                num_states, initial = int(parts[1]), int(parts[3])
            elif parts[0] == "accept" and len(parts) == 2:
                accepting.add(int(parts[1]))
            elif parts[0] == "trap" and len(parts) == 2:
                trap.add(int(parts[1]))
            elif parts[0] == "trans" and len(parts) == 4:
                key = (int(parts[1]), parts[2])
                if key in delta and delta[key] != int(parts[3]):
                    raise FixtureParseError(f"line {lineno}: nondeterministic transition")
                delta[key] = int(parts[3])
                alphabet.add(parts[2])
            elif parts[0] == "alphabet":
                alphabet.update(parts[1:])
            else:
                raise FixtureParseError(f"line {lineno}: cannot parse {raw!r}")
        except ValueError as exc:
            if isinstance(exc, FixtureParseError):
                raise
            raise FixtureParseError(f"line {lineno}: {exc}") from exc
    if num_states is None:
        raise FixtureParseError("missing 'states k initial i' header")
    try:
        return DFA(num_states, alphabet, delta, accepting, trap, initial)
    except InvalidDFA as exc:
        raise FixtureParseError(str(exc)) from exc


def bundled_fixture(name: str) -> DFA:
    """Load one of the automata shipped in ``synthrl/data/fixtures``."""
    path = resources.files("synthrl") / "data" / "fixtures" / f"{name}.dfa"
    if not path.is_file():
        raise FileNotFoundError(f"no bundled fixture {name!r}")
    return load_fixture(path.read_text())


def bundled_fixture_names() -> list[str]:
    folder = resources.files("synthrl") / "data" / "fixtures"
    return sorted(p.name[:-4] for p in folder.iterdir() if p.name.endswith(".dfa"))


def chain_dfa(labels: Iterable[Label]) -> DFA:
    """Linear automaton reading ``labels`` in order into a single accepting state."""
    labels = list(labels)
    delta = {(i + 1, lab): i + 2 for i, lab in enumerate(labels)}
    return DFA(len(labels) + 1, set(labels), delta, {len(labels) + 1})
