from __future__ import annotations

from dataclasses import asdict, dataclass, fields


@dataclass(frozen=True)
class EpsilonSchedule:
    initial: float = 1.0
    final: float = 0.1
    anneal_steps: int = 150_000

    def value(self, t: int) -> float:
        if self.anneal_steps <= 0 or t >= self.anneal_steps:
            return self.final
        return self.initial + (self.final - self.initial) * t / self.anneal_steps


@dataclass(frozen=True)
class QLConfig:
    alpha: float = 0.1
    gamma: float = 0.99
    epsilon: EpsilonSchedule = EpsilonSchedule(1.0, 0.1, 100_000)

    def __post_init__(self):
        if not 0 < self.alpha <= 1:
            raise ValueError("alpha must lie in (0, 1]")
        if not 0 <= self.gamma <= 1:
            raise ValueError("gamma must lie in [0, 1]")


@dataclass(frozen=True)
class HyperParams:
    """DQN module settings; defaults are the Montezuma's Revenge table.

    ``history_length`` and ``noop_max`` only matter for pixel input and are
    carried along unused by the grid world.
    """
    minibatch_size: int = 32
    replay_capacity: int = 150_000
    history_length: int = 4
    target_update: int = 10_000
    gamma: float = 0.99
    learning_rate: float = 0.00025
    epsilon_initial: float = 1.0
    epsilon_final: float = 0.1
    epsilon_anneal: int = 150_000
    replay_start: int = 8_000
    noop_max: int = 30
    hidden: tuple[int, ...] = (128, 128)

    @property
    def epsilon(self) -> EpsilonSchedule:
        return EpsilonSchedule(self.epsilon_initial, self.epsilon_final, self.epsilon_anneal)

    def override(self, **changes) -> "HyperParams":
        known = {f.name for f in fields(self)}
        bad = set(changes) - known
        if bad:
            raise ValueError(f"unknown hyper-parameters {sorted(bad)}")
        return HyperParams(**{**asdict(self), **changes})


@dataclass(frozen=True)
class TotalReward:
    """r_total = extrinsic + eta * [automaton entered a state not yet visited this episode]."""
    eta: float = 0.1

    def __call__(self, extrinsic: float, new_automaton_state: bool) -> float:
        return extrinsic + (self.eta if new_automaton_state else 0.0)
