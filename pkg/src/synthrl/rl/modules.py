"""Per-automaton-state Q modules, their estimators and experience sets."""
from __future__ import annotations

import json
import struct
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Optional

import numpy as np

from ..dfa import DFA
from .mlp import MLP, Adam, RMSProp

N_ACTIONS = 4


class EmptyBuffer(ValueError):
    pass


class Transition(NamedTuple):
    state: int
    action: int
    next_state: int
    reward: float
    label: Optional[str]
    done: bool
    extrinsic: float = 0.0


class ReplayBuffer:
    """FIFO experience set with a fixed capacity."""

    def __init__(self, capacity: int = 150_000):
        self.capacity = capacity
        self.items: deque[Transition] = deque(maxlen=capacity)

    def add(self, t: Transition) -> None:
        self.items.append(t)

    def clear(self) -> None:
        self.items.clear()

    def __len__(self) -> int:
        return len(self.items)

    def __iter__(self):
        return iter(self.items)

    def sample(self, rng: np.random.Generator, n: int) -> list[Transition]:
        if not self.items:
            raise EmptyBuffer("cannot sample from an empty experience set")
        idx = rng.integers(0, len(self.items), size=n)
        return [self.items[i] for i in idx]

    def arrays(self, items: Optional[Iterable[Transition]] = None):
        items = list(self.items if items is None else items)
        s = np.fromiter((t.state for t in items), dtype=np.int64, count=len(items))
        a = np.fromiter((t.action for t in items), dtype=np.int64, count=len(items))
        s2 = np.fromiter((t.next_state for t in items), dtype=np.int64, count=len(items))
        r = np.fromiter((t.reward for t in items), dtype=float, count=len(items))
        done = np.fromiter((t.done for t in items), dtype=bool, count=len(items))
        labels = [t.label for t in items]
        return s, a, s2, r, done, labels


class TabularEstimator:
    kind = "tabular"

    def __init__(self, n_states: int, n_actions: int = N_ACTIONS):
        self.table = np.zeros((n_states, n_actions))

    def q_values(self, states) -> np.ndarray:
        return self.table[np.asarray(states)]

    def fit(self, states, actions, targets, **_) -> float:
        """Exact regression: each (s, a) takes the mean of its targets."""
        states, actions = np.asarray(states), np.asarray(actions)
        targets = np.asarray(targets, dtype=float)
        before = float(np.mean((self.table[states, actions] - targets) ** 2)) if len(targets) else 0.0
        flat = states * self.table.shape[1] + actions
        sums = np.bincount(flat, weights=targets, minlength=self.table.size)
        counts = np.bincount(flat, minlength=self.table.size)
        hit = counts > 0
        view = self.table.reshape(-1)
        view[hit] = sums[hit] / counts[hit]
        return before

    def params(self) -> list[np.ndarray]:
        return [self.table]

    def copy(self) -> "TabularEstimator":
        other = TabularEstimator(*self.table.shape)
        other.table = self.table.copy()
        return other


class MLPEstimator:
    """Q-network over a one-hot encoding of the grid cell."""

    kind = "mlp"

    def __init__(self, n_states: int, rng: np.random.Generator, hidden=(128, 128),
                 n_actions: int = N_ACTIONS, lr: float = 1e-3, optimizer: str = "adam"):
        self.n_states = n_states
        self.net = MLP((n_states, *hidden, n_actions), rng)
        self.lr = lr
        self.optimizer_name = optimizer
        self.opt = Adam(self.net.params, lr=lr) if optimizer == "adam" else RMSProp(self.net.params, lr=lr)

    def encode(self, states) -> np.ndarray:
        states = np.asarray(states)
        x = np.zeros((states.size, self.n_states))
        x[np.arange(states.size), states.ravel()] = 1.0
        return x

    def q_values(self, states) -> np.ndarray:
        return self.net.forward(self.encode(states))

    def train_step(self, states, actions, targets) -> float:
        loss, grads = self.net.loss_and_grad(self.encode(states), np.asarray(actions),
                                             np.asarray(targets, dtype=float))
        self.opt.step(grads)
        return loss

    def fit(self, states, actions, targets, steps: int = 50, batch: Optional[int] = None,
            rng: Optional[np.random.Generator] = None) -> float:
        """Adam steps on the squared error; returns the loss before fitting."""
        states, actions = np.asarray(states), np.asarray(actions)
        targets = np.asarray(targets, dtype=float)
        uniq, rows = np.unique(states, return_inverse=True)
        x = self.encode(uniq)
        before = float(np.mean((self.net.forward(x)[rows, actions] - targets) ** 2))
        for _ in range(steps):
            if batch is not None and batch < len(targets):
                idx = rng.integers(0, len(targets), size=batch)
                _, grads = self.net.loss_and_grad(x, actions[idx], targets[idx], rows[idx])
            else:
                _, grads = self.net.loss_and_grad(x, actions, targets, rows)
            self.opt.step(grads)
        return before

    def params(self) -> list[np.ndarray]:
        return self.net.params

    def copy(self) -> "MLPEstimator":
        other = MLPEstimator.__new__(MLPEstimator)
        other.n_states = self.n_states
        other.net = self.net.copy()
        other.lr = self.lr
        other.optimizer_name = self.optimizer_name
        other.opt = Adam(other.net.params, lr=self.lr) if self.optimizer_name == "adam" \
            else RMSProp(other.net.params, lr=self.lr)
        return other


@dataclass
class QModule:
    owner: int
    estimator: object
    buffer: ReplayBuffer = field(default_factory=ReplayBuffer)
    target: Optional[object] = None

    def q_values(self, states) -> np.ndarray:
        return self.estimator.q_values(states)

    def greedy(self, state: int) -> int:
        return int(np.argmax(self.estimator.q_values([state])[0]))


class ModuleSet(dict):
    """Maps automaton state -> QModule; grows with the automaton."""

    def __init__(self, factory, capacity: int = 150_000):
        super().__init__()
        self.factory = factory
        self.capacity = capacity

    def ensure(self, dfa: DFA) -> list[int]:
        added = []
        for q in dfa.states:
            if q not in self:
                self[q] = QModule(q, self.factory(q), ReplayBuffer(self.capacity))
                added.append(q)
        return added


def tabular_modules(dfa: DFA, n_states: int, capacity: int = 150_000) -> ModuleSet:
    mods = ModuleSet(lambda q: TabularEstimator(n_states), capacity)
    mods.ensure(dfa)
    return mods


def mlp_modules(dfa: DFA, n_states: int, rng: np.random.Generator, hidden=(128, 128),
                lr: float = 1e-3, optimizer: str = "adam", capacity: int = 150_000) -> ModuleSet:
    mods = ModuleSet(lambda q: MLPEstimator(n_states, rng, hidden, lr=lr, optimizer=optimizer),
                     capacity)
    mods.ensure(dfa)
    return mods


MAGIC = b"SYNTHRL1"


def save_checkpoint(modules: ModuleSet, path) -> None:
    """Write module parameters.

    Layout: 8-byte magic, little-endian uint32 header length, a UTF-8 JSON
    header listing every array (module, kind, shape), then all arrays as one
    flat little-endian float64 block in header order.
    """
    entries, blobs = [], []
    for q in sorted(modules):
        est = modules[q].estimator
        for i, p in enumerate(est.params()):
            entries.append({"module": q, "kind": est.kind, "index": i, "shape": list(p.shape)})
            blobs.append(np.asarray(p, dtype="<f8").ravel())
    header = json.dumps({"arrays": entries, "dtype": "<f8"}, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(header)))
        fh.write(header)
        if blobs:
            fh.write(np.concatenate(blobs).astype("<f8").tobytes())


def load_checkpoint(path) -> dict[int, list[np.ndarray]]:
    """Read a checkpoint into ``{module: [arrays...]}``."""
    with open(path, "rb") as fh:
        if fh.read(8) != MAGIC:
            raise ValueError("not a synthrl checkpoint")
        (n,) = struct.unpack("<I", fh.read(4))
        header = json.loads(fh.read(n))
        flat = np.frombuffer(fh.read(), dtype="<f8")
    out: dict[int, list[np.ndarray]] = {}
    pos = 0
    for e in header["arrays"]:
        size = int(np.prod(e["shape"])) if e["shape"] else 1
        out.setdefault(e["module"], []).append(flat[pos:pos + size].reshape(e["shape"]).copy())
        pos += size
    return out


def restore_modules(modules: ModuleSet, arrays: dict[int, list[np.ndarray]]) -> None:
    for q, params in arrays.items():
        est = modules[q].estimator
        for p, src in zip(est.params(), params):
            p[...] = src
