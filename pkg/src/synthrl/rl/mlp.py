"""Small fully connected Q-network in numpy with Adam and RMSProp."""
from __future__ import annotations

from typing import Sequence

import numpy as np


class MLP:
    """ReLU network mapping an input vector to one value per action."""

    def __init__(self, sizes: Sequence[int], rng: np.random.Generator):
        self.sizes = tuple(sizes)
        self.params: list[np.ndarray] = []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            bound = np.sqrt(6.0 / fan_in)
            self.params.append(rng.uniform(-bound, bound, (fan_in, fan_out)) * 0.5)
            self.params.append(np.zeros(fan_out))

    def copy(self) -> "MLP":
        other = MLP.__new__(MLP)
        other.sizes = self.sizes
        other.params = [p.copy() for p in self.params]
        return other

    def forward(self, x: np.ndarray) -> np.ndarray:
        h = x
        n = len(self.params) // 2
        for i in range(n):
            h = h @ self.params[2 * i] + self.params[2 * i + 1]
            if i < n - 1:
                h = np.maximum(h, 0.0)
        return h

    def loss_and_grad(self, x: np.ndarray, actions: np.ndarray, targets: np.ndarray,
                      rows: np.ndarray | None = None) -> tuple[float, list[np.ndarray]]:
        """Mean squared error between Q(x, a) and targets, with its gradient.

        Pattern ``i`` reads input row ``rows[i]`` (default ``i``), so repeated
        inputs need only one forward pass.
        """
        n = len(self.params) // 2
        acts = [x]
        pre = []
        h = x
        for i in range(n):
            z = h @ self.params[2 * i] + self.params[2 * i + 1]
            pre.append(z)
            h = np.maximum(z, 0.0) if i < n - 1 else z
            acts.append(h)
        out = acts[-1]
        if rows is None:
            rows = np.arange(len(actions))
        err = out[rows, actions] - targets
        loss = float(np.mean(err ** 2))
        delta = np.zeros_like(out)
        np.add.at(delta, (rows, actions), 2.0 * err / len(actions))
        grads: list[np.ndarray] = [None] * len(self.params)
        for i in reversed(range(n)):
            grads[2 * i] = acts[i].T @ delta
            grads[2 * i + 1] = delta.sum(axis=0)
            if i > 0:
                delta = (delta @ self.params[2 * i].T) * (pre[i - 1] > 0)
        return loss, grads

    def flat(self) -> np.ndarray:
        return np.concatenate([p.ravel() for p in self.params])

    def set_flat(self, vec: np.ndarray) -> None:
        pos = 0
        for p in self.params:
            p[...] = vec[pos:pos + p.size].reshape(p.shape)
            pos += p.size


class Adam:
    def __init__(self, params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = params
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, grads) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        corr = np.sqrt(1 - b2 ** self.t) / (1 - b1 ** self.t)
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            m *= b1
            m += (1 - b1) * g
            v *= b2
            v += (1 - b2) * g * g
            p -= self.lr * corr * m / (np.sqrt(v) + self.eps)


class RMSProp:
    def __init__(self, params, lr=0.00025, decay=0.95, eps=0.01):
        self.params = params
        self.lr, self.decay, self.eps = lr, decay, eps
        self.ms = [np.zeros_like(p) for p in params]

    def step(self, grads) -> None:
        for p, g, ms in zip(self.params, grads, self.ms):
            ms *= self.decay
            ms += (1 - self.decay) * g * g
            p -= self.lr * g / np.sqrt(ms + self.eps)


def finite_difference_grad(net: MLP, x, actions, targets, h: float = 1e-6) -> np.ndarray:
    """Central-difference gradient of the loss over the flat parameter vector."""
    base = net.flat()
    grad = np.zeros_like(base)
    for i in range(base.size):
        vec = base.copy()
        vec[i] += h
        net.set_flat(vec)
        up, _ = net.loss_and_grad(x, actions, targets)
        vec[i] -= 2 * h
        net.set_flat(vec)
        down, _ = net.loss_and_grad(x, actions, targets)
        grad[i] = (up - down) / (2 * h)
    net.set_flat(base)
    return grad
