"""Episode traces, the label vocabulary and the prefix tree acceptor."""
from __future__ import annotations

import enum
import json
import threading
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

Label = str
# An unlabelled step. Never stored inside a Trace.
NO_LABEL = None


class InvalidTrace(ValueError):
    pass


class EmptySample(ValueError):
    pass


@dataclass(frozen=True)
class Trace:
    labels: tuple[Label, ...]
    positive: bool

    def __post_init__(self):
        object.__setattr__(self, "labels", tuple(self.labels))
        for lab in self.labels:
            if not isinstance(lab, str) or not lab or lab.split() != [lab]:
                raise InvalidTrace(f"bad label {lab!r}")
        if self.positive and not self.labels:
            raise InvalidTrace("positive trace with no labels")

    def __len__(self) -> int:
        return len(self.labels)

    def to_json(self) -> str:
        return json.dumps({"labels": list(self.labels), "positive": self.positive})

    @classmethod
    def from_json(cls, line: str) -> "Trace":
        obj = json.loads(line)
        try:
            return cls(tuple(obj["labels"]), bool(obj["positive"]))
        except (KeyError, TypeError) as exc:
            raise InvalidTrace(f"bad trace record {line!r}") from exc


def compress_episode(raw: Iterable[Optional[Label]], completed: bool) -> Trace:
    """Drop unlabelled steps from an episode's observations."""
    labels = tuple(lab for lab in raw if lab is not NO_LABEL)
    if completed and not labels:
        raise InvalidTrace("completed episode emitted no labels")
    return Trace(labels, completed)


@dataclass(frozen=True)
class DeltaReport:
    new_labels: list[Label]
    new_behaviour: bool


class TraceStore:
    """Append-only trace collection with a growing vocabulary.

    One writer at a time; ``snapshot`` gives readers a consistent view.
    """

    def __init__(self, traces: Iterable[Trace] = ()):
        self._lock = threading.Lock()
        self._traces: tuple[Trace, ...] = ()
        self._seen: set[Trace] = set()
        self._vocab: list[Label] = []
        for t in traces:
            self.add_trace(t)

    @property
    def traces(self) -> tuple[Trace, ...]:
        return self._traces

    @property
    def vocabulary(self) -> frozenset[Label]:
        return frozenset(self._vocab)

    def snapshot(self) -> tuple[Trace, ...]:
        return self._traces

    def positives(self) -> list[Trace]:
        return [t for t in self._traces if t.positive]

    def total_length(self) -> int:
        return sum(len(t) for t in self._traces)

    def add_trace(self, t: Trace) -> DeltaReport:
        with self._lock:
            known = set(self._vocab)
            new_labels = []
            for lab in t.labels:
                if lab not in known:
                    known.add(lab)
                    new_labels.append(lab)
            self._vocab.extend(new_labels)
            new_behaviour = t not in self._seen
            self._seen.add(t)
            self._traces = self._traces + (t,)
        return DeltaReport(new_labels, new_behaviour)

    def __len__(self) -> int:
        return len(self._traces)


def load_traces(path) -> TraceStore:
    store = TraceStore()
    with open(path) as fh:
        for line in fh:
            if line.strip():
                store.add_trace(Trace.from_json(line))
    return store


def save_traces(store_or_traces, path) -> None:
    traces = store_or_traces.traces if isinstance(store_or_traces, TraceStore) else store_or_traces
    Path(path).write_text("".join(t.to_json() + "\n" for t in traces))


class NodeClass(enum.Enum):
    ACCEPT = "accept"
    REJECT = "reject"
    UNKNOWN = "unknown"


@dataclass
class PrefixTree:
    """Prefix tree acceptor. Node 0 is the empty word; nodes are numbered
    breadth-first with children visited in label order."""

    children: list[dict[Label, int]] = field(default_factory=list)
    node_class: list[NodeClass] = field(default_factory=list)
    parent: list[int] = field(default_factory=list)
    label: list[Optional[Label]] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.children)

    @property
    def alphabet(self) -> list[Label]:
        return sorted({lab for ch in self.children for lab in ch})

    def edges(self):
        for v, ch in enumerate(self.children):
            for lab, w in ch.items():
                yield v, lab, w

    def word(self, v: int) -> tuple[Label, ...]:
        out = []
        while v != 0:
            out.append(self.label[v])
            v = self.parent[v]
        return tuple(reversed(out))

    def depth(self) -> int:
        return max(len(self.word(v)) for v in range(len(self)))

    def find(self, word: Sequence[Label]) -> Optional[int]:
        v = 0
        for lab in word:
            v = self.children[v].get(lab)
            if v is None:
                return None
        return v

    def bigrams(self) -> set[tuple[Label, Label]]:
        """Consecutive label pairs along tree paths."""
        out = set()
        for v, lab, w in self.edges():
            for lab2 in self.children[w]:
                out.add((lab, lab2))
        return out

    @classmethod
    def from_words(cls, labelled: Iterable[tuple[Sequence[Label], NodeClass]]) -> "PrefixTree":
        """Build a tree from words with classes; unlisted prefixes are UNKNOWN."""
        root: dict = {}
        classes: dict[tuple, NodeClass] = {}
        for word, cls_ in labelled:
            node = root
            for lab in word:
                node = node.setdefault(lab, {})
            classes[tuple(word)] = cls_
        tree = cls()
        queue = deque([((), root, -1, None)])
        while queue:
            word, node, par, lab = queue.popleft()
            idx = len(tree.children)
            tree.children.append({})
            tree.node_class.append(classes.get(word, NodeClass.UNKNOWN))
            tree.parent.append(par)
            tree.label.append(lab)
            if par >= 0:
                tree.children[par][lab] = idx
            for child_lab in sorted(node):
                queue.append((word + (child_lab,), node[child_lab], idx, child_lab))
        return tree


def build_prefix_tree(store: TraceStore | Iterable[Trace]) -> PrefixTree:
    """Prefix tree of the positive traces.

    Full positive traces are ACCEPT; every other prefix is REJECT, which is
    what keeps synthesis from collapsing to a single accepting state.
    Repeated traces count once.
    """
    traces = store.traces if isinstance(store, TraceStore) else tuple(store)
    positives = {t.labels for t in traces if t.positive}
    if not positives:
        raise EmptySample("no positive traces")
    labelled: dict[tuple, NodeClass] = {}
    for word in positives:
        for i in range(len(word)):
            labelled.setdefault(word[:i], NodeClass.REJECT)
    for word in positives:
        labelled[word] = NodeClass.ACCEPT
    return PrefixTree.from_words(labelled.items())
