"""Deterministic labelled grid world with the seven Minecraft crafting tasks.

Coordinates are ``(x, y)`` with the origin in the bottom-left cell; the
first line of a map file is the top row.
"""
from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass, field, replace
from importlib import resources
from typing import Optional

from .traces import Label

VOCABULARY = ("wood", "grass", "iron", "crafttable", "smithtable", "gold")
MAP_CHARS = {"W": "wood", "G": "grass", "I": "iron", "C": "crafttable",
             "S": "smithtable", "D": "gold"}
DEFAULT_BUDGET = 100


class MapParseError(ValueError):
    pass


class InvalidPosition(IndexError):
    pass


class EpisodeFinished(RuntimeError):
    pass


class Action(enum.IntEnum):
    LEFT = 0
    RIGHT = 1
    UP = 2
    DOWN = 3


MOVES = {Action.LEFT: (-1, 0), Action.RIGHT: (1, 0), Action.UP: (0, 1), Action.DOWN: (0, -1)}


@dataclass(frozen=True)
class TaskSpec:
    id: int
    required_sequence: tuple[Label, ...]
    extrinsic_reward: float = 1.0

    def progress(self, matched: int, label: Optional[Label]) -> int:
        """Advance the subsequence matcher by one label."""
        if label is not None and matched < len(self.required_sequence) \
                and label == self.required_sequence[matched]:
            return matched + 1
        return matched

    def matches(self, history) -> bool:
        """True iff the required sequence is a subsequence of ``history``."""
        it = iter(history)
        return all(any(lab == want for lab in it) for want in self.required_sequence)


TASKS = {
    1: TaskSpec(1, ("wood", "crafttable")),
    2: TaskSpec(2, ("grass", "crafttable")),
    3: TaskSpec(3, ("wood", "grass", "iron", "crafttable")),
    4: TaskSpec(4, ("wood", "smithtable")),
    5: TaskSpec(5, ("grass", "smithtable")),
    6: TaskSpec(6, ("iron", "wood", "smithtable")),
    7: TaskSpec(7, ("wood", "iron", "crafttable", "gold")),
}


def get_task(task) -> TaskSpec:
    if isinstance(task, TaskSpec):
        return task
    try:
        return TASKS[int(task)]
    except (KeyError, ValueError):
        raise ValueError(f"unknown task {task!r}; expected 1..7") from None


@dataclass(frozen=True)
class GridWorld:
    width: int
    height: int
    cell_labels: dict[tuple[int, int], Label]
    obstacles: frozenset[tuple[int, int]]
    start: tuple[int, int]

    @property
    def num_cells(self) -> int:
        return self.width * self.height

    def in_bounds(self, pos) -> bool:
        x, y = pos
        return 0 <= x < self.width and 0 <= y < self.height

    def index(self, pos) -> int:
        return pos[1] * self.width + pos[0]

    def position(self, index: int) -> tuple[int, int]:
        return index % self.width, index // self.width

    def move(self, pos, action) -> tuple[int, int]:
        dx, dy = MOVES[Action(action)]
        nxt = (pos[0] + dx, pos[1] + dy)
        if not self.in_bounds(nxt) or nxt in self.obstacles:
            return pos
        return nxt

    def free_cells(self) -> list[tuple[int, int]]:
        return [(x, y) for y in range(self.height) for x in range(self.width)
                if (x, y) not in self.obstacles]

    def reachable(self, src=None) -> set[tuple[int, int]]:
        src = self.start if src is None else src
        seen = {src}
        queue = deque([src])
        while queue:
            pos = queue.popleft()
            for a in Action:
                nxt = self.move(pos, a)
                if nxt not in seen:
                    seen.add(nxt)
                    queue.append(nxt)
        return seen


def labeling(world: GridWorld, pos) -> Optional[Label]:
    if not world.in_bounds(pos):
        raise InvalidPosition(pos)
    return world.cell_labels.get(tuple(pos))


def load_map(text: str) -> GridWorld:
    rows = [line.rstrip("\n") for line in text.strip("\n").splitlines()]
    rows = [r.strip() for r in rows if r.strip()]
    if not rows:
        raise MapParseError("empty map")
    width = len(rows[0])
    if any(len(r) != width for r in rows):
        raise MapParseError("ragged rows")
    height = len(rows)
    labels: dict[tuple[int, int], Label] = {}
    obstacles = set()
    start = None
    for row_idx, row in enumerate(rows):
        y = height - 1 - row_idx
        for x, ch in enumerate(row):
            if ch in MAP_CHARS:
                labels[x, y] = MAP_CHARS[ch]
            elif ch == "~":
                obstacles.add((x, y))
            elif ch == "@":
                if start is not None:
                    raise MapParseError("more than one start cell")
                start = (x, y)
            elif ch != ".":
                raise MapParseError(f"unknown map character {ch!r}")
    if start is None:
        raise MapParseError("missing start cell '@'")
    return GridWorld(width, height, labels, frozenset(obstacles), start)


def dump_map(world: GridWorld) -> str:
    inv = {v: k for k, v in MAP_CHARS.items()}
    lines = []
    for y in reversed(range(world.height)):
        row = []
        for x in range(world.width):
            if (x, y) == world.start:
                row.append("@")
            elif (x, y) in world.obstacles:
                row.append("~")
            else:
                row.append(inv.get(world.cell_labels.get((x, y)), "."))
        lines.append("".join(row))
    return "\n".join(lines) + "\n"


def default_map() -> GridWorld:
    return load_map((resources.files("synthrl") / "data" / "maps" / "default.txt").read_text())


def read_map(path=None) -> GridWorld:
    if path is None:
        return default_map()
    with open(path) as fh:
        return load_map(fh.read())


@dataclass(frozen=True)
class EpisodeState:
    position: tuple[int, int]
    history: tuple[Label, ...] = ()
    done: bool = False
    step_count: int = 0
    matched: int = 0
    completed: bool = False


def reset(world: GridWorld, start=None) -> EpisodeState:
    return EpisodeState(world.start if start is None else tuple(start))


def step(world: GridWorld, state: EpisodeState, action, task,
         budget: int = DEFAULT_BUDGET) -> tuple[EpisodeState, Optional[Label], float]:
    if state.done:
        raise EpisodeFinished("episode already finished")
    task = get_task(task)
    pos = world.move(state.position, action)
    label = world.cell_labels.get(pos)
    history = state.history + (label,) if label is not None else state.history
    matched = task.progress(state.matched, label)
    completed = matched == len(task.required_sequence)
    extrinsic = task.extrinsic_reward if completed and not state.completed else 0.0
    count = state.step_count + 1
    done = completed or count >= budget
    return (replace(state, position=pos, history=history, done=done,
                    step_count=count, matched=matched, completed=completed),
            label, extrinsic)


@dataclass
class Episode:
    """Mutable convenience wrapper around ``step`` for rollout loops."""
    world: GridWorld
    task: TaskSpec
    budget: int = DEFAULT_BUDGET
    state: EpisodeState = field(default=None)
    labels: list = field(default_factory=list)

    def __post_init__(self):
        self.task = get_task(self.task)
        if self.state is None:
            self.state = reset(self.world)

    def step(self, action):
        self.state, label, r = step(self.world, self.state, action, self.task, self.budget)
        self.labels.append(label)
        return label, r
