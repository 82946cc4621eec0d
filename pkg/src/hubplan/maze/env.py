"""Deterministic grid maze: keys, paired-key doors, diamonds, one barrel.

The agent walks cell-snapped with 90-degree turns, carries at most one item,
opens a door by applying its two required key colors (keys are consumed and
respawn at their home cells), and must deposit two diamonds into the barrel
in the requested order. Wrong-key door attempts and wrong deposits end the
episode. All transitions are pure functions of (state, action).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

RED, BLUE, GREEN, PURPLE = 0, 1, 2, 3
COLOR_NAMES = ("red", "blue", "green", "purple")

# door color -> the two key colors that open it
DOOR_REQUIREMENTS = {
    RED: (RED, BLUE),
    BLUE: (RED, GREEN),
    GREEN: (BLUE, PURPLE),
    PURPLE: (GREEN, PURPLE),
}

FORWARD, BACKWARD, TURN_LEFT, TURN_RIGHT, PICKUP, TOGGLE = range(6)
ACTION_NAMES = ("forward", "backward", "turn_left", "turn_right", "pickup", "toggle")
N_ACTIONS = 6

# orientation quarter-turns: 0 east, 1 south, 2 west, 3 north
DIR = ((1, 0), (0, 1), (-1, 0), (0, -1))

LOCKED, HALF_OPEN, OPEN = 0, 1, 2

HORIZON = 400
STEP_REWARD = -0.1
SUCCESS_REWARD = 100.0
WRONG_DEPOSIT_PENALTY = -10.0

# main room (starts, barrel) west; key room north-east; a single corridor
# drops to the door hallway; one diamond room behind each door
DEFAULT_MAP = """\
#################
#.......#..r.b..#
#.......#.......#
#..S..U....g.p..#
#.......#.......#
#.......####.####
#..T....####.####
#...O...####.####
############.####
#...............#
##R###B###G###P##
#.1.#.2.#.3.#.4.#
#################
"""

_KEY_CHARS = {"r": RED, "b": BLUE, "g": GREEN, "p": PURPLE}
_DOOR_CHARS = {"R": RED, "B": BLUE, "G": GREEN, "P": PURPLE}
_DIAMOND_CHARS = {"1": RED, "2": BLUE, "3": GREEN, "4": PURPLE}
_START_CHARS = {"S": 0, "T": 1, "U": 2}


class MazeError(ValueError):
    pass


class TerminalStateError(RuntimeError):
    """An action was applied to a terminal state."""


@dataclass(frozen=True)
class Goal:
    """Ordered pair of distinct diamond colors to deposit."""

    first: int
    second: int

    def __post_init__(self):
        if self.first == self.second:
            raise MazeError("goal colors must be distinct")
        if not (0 <= self.first < 4 and 0 <= self.second < 4):
            raise MazeError("unknown color id")

    def __str__(self) -> str:
        return f"{COLOR_NAMES[self.first]},{COLOR_NAMES[self.second]}"

    @classmethod
    def parse(cls, text: str) -> "Goal":
        a, b = (t.strip() for t in text.split(","))
        return cls(COLOR_NAMES.index(a), COLOR_NAMES.index(b))


def all_goals() -> list[Goal]:
    """The 12 ordered goals, enumerated color-major in (red, blue, green, purple)."""
    return [Goal(a, b) for a in range(4) for b in range(4) if a != b]


@dataclass(frozen=True)
class StartConfig:
    pos: tuple[int, int]
    orientation: int


@dataclass(frozen=True)
class EnvState:
    pos: tuple[int, int]
    orientation: int
    held: tuple[str, int] | None            # ("key", c) or ("diamond", c)
    door_phase: tuple[int, int, int, int]
    keys_applied: tuple[frozenset, frozenset, frozenset, frozenset]
    key_present: tuple[bool, bool, bool, bool]
    diamond_present: tuple[bool, bool, bool, bool]
    barrel: tuple[int, ...]
    goal: Goal
    step_count: int
    terminal: bool
    success: bool


@dataclass(frozen=True)
class Observation:
    """Egocentric channel raster plus the two-slot barrel vector."""

    view: np.ndarray        # flattened (VIEW_W * VIEW_H * N_CHANNELS,)
    barrel_vec: np.ndarray  # (2,) ints, 0 empty else color id + 1

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.view, self.barrel_vec.astype(np.float64) / 4.0])

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Observation)
            and np.array_equal(self.view, other.view)
            and np.array_equal(self.barrel_vec, other.barrel_vec)
        )


class MazeEnv:
    """Static layout plus the pure transition function over EnvState values."""

    def __init__(self, map_text: str = DEFAULT_MAP, wrong_key_penalty: float = 0.0,
                 horizon: int = HORIZON):
        self.wrong_key_penalty = wrong_key_penalty
        self.horizon = horizon
        rows = [r for r in map_text.splitlines() if r]
        widths = {len(r) for r in rows}
        if len(widths) != 1:
            raise MazeError("map rows have unequal widths")
        self.height = len(rows)
        self.width = widths.pop()
        self.wall = np.zeros((self.width, self.height), dtype=bool)
        self.key_home: dict[int, tuple[int, int]] = {}
        self.door_cell: dict[int, tuple[int, int]] = {}
        self.diamond_home: dict[int, tuple[int, int]] = {}
        self.barrel_cell: tuple[int, int] | None = None
        starts: dict[int, tuple[int, int]] = {}
        for y, row in enumerate(rows):
            for x, ch in enumerate(row):
                cell = (x, y)
                if ch == "#":
                    self.wall[x, y] = True
                elif ch == ".":
                    pass
                elif ch == "O":
                    if self.barrel_cell is not None:
                        raise MazeError("more than one barrel")
                    self.barrel_cell = cell
                elif ch in _KEY_CHARS:
                    self.key_home[_KEY_CHARS[ch]] = cell
                elif ch in _DOOR_CHARS:
                    self.door_cell[_DOOR_CHARS[ch]] = cell
                elif ch in _DIAMOND_CHARS:
                    self.diamond_home[_DIAMOND_CHARS[ch]] = cell
                elif ch in _START_CHARS:
                    starts[_START_CHARS[ch]] = cell
                else:
                    raise MazeError(f"unknown map char {ch!r} at {cell}")
        if self.barrel_cell is None:
            raise MazeError("map has no barrel")
        for table, what in ((self.key_home, "key"), (self.door_cell, "door"),
                            (self.diamond_home, "diamond")):
            if set(table) != {RED, BLUE, GREEN, PURPLE}:
                raise MazeError(f"map must place exactly one {what} per color")
        self.starts = [StartConfig(starts[i], 0) for i in sorted(starts)]
        self._door_at = {cell: c for c, cell in self.door_cell.items()}

    @classmethod
    def from_file(cls, path, **kwargs) -> "MazeEnv":
        from pathlib import Path

        return cls(Path(path).read_text(), **kwargs)

    # -- queries ----------------------------------------------------------

    def in_bounds(self, cell) -> bool:
        x, y = cell
        return 0 <= x < self.width and 0 <= y < self.height

    def passable(self, cell, state: EnvState) -> bool:
        if not self.in_bounds(cell) or self.wall[cell]:
            return False
        if cell == self.barrel_cell:
            return False
        dc = self._door_at.get(cell)
        if dc is not None and state.door_phase[dc] != OPEN:
            return False
        for c in range(4):
            if state.key_present[c] and self.key_home[c] == cell:
                return False
            if state.diamond_present[c] and self.diamond_home[c] == cell:
                return False
        return True

    def facing_cell(self, state: EnvState) -> tuple[int, int]:
        dx, dy = DIR[state.orientation]
        return (state.pos[0] + dx, state.pos[1] + dy)

    # -- episode ----------------------------------------------------------

    def reset(self, start: StartConfig, goal: Goal):
        if not self.in_bounds(start.pos) or self.wall[start.pos]:
            raise MazeError(f"start cell {start.pos} is not free")
        state = EnvState(
            pos=start.pos,
            orientation=start.orientation % 4,
            held=None,
            door_phase=(LOCKED,) * 4,
            keys_applied=(frozenset(),) * 4,
            key_present=(True,) * 4,
            diamond_present=(True,) * 4,
            barrel=(),
            goal=goal,
            step_count=0,
            terminal=False,
            success=False,
        )
        return state, self.rasterize(state)

    def step(self, state: EnvState, action: int):
        if state.terminal:
            raise TerminalStateError("cannot step a terminal state")
        if not 0 <= action < N_ACTIONS:
            raise MazeError(f"unknown action {action}")
        reward = STEP_REWARD
        pos = state.pos
        orientation = state.orientation
        held = state.held
        door_phase = list(state.door_phase)
        keys_applied = list(state.keys_applied)
        key_present = list(state.key_present)
        diamond_present = list(state.diamond_present)
        barrel = state.barrel
        terminal = False
        success = False

        if action in (FORWARD, BACKWARD):
            dx, dy = DIR[orientation]
            if action == BACKWARD:
                dx, dy = -dx, -dy
            nxt = (pos[0] + dx, pos[1] + dy)
            if self.passable(nxt, state):
                pos = nxt
        elif action == TURN_LEFT:
            orientation = (orientation - 1) % 4
        elif action == TURN_RIGHT:
            orientation = (orientation + 1) % 4
        elif action == PICKUP:
            face = self.facing_cell(state)
            if held is None:
                for c in range(4):
                    if key_present[c] and self.key_home[c] == face:
                        held = ("key", c)
                        key_present[c] = False
                        break
                    if diamond_present[c] and self.diamond_home[c] == face:
                        held = ("diamond", c)
                        diamond_present[c] = False
                        break
        elif action == TOGGLE:
            face = self.facing_cell(state)
            door_color = self._door_at.get(face)
            if face == self.barrel_cell and held is not None and held[0] == "diamond":
                barrel = barrel + (held[1],)
                held = None
                goal_pair = (state.goal.first, state.goal.second)
                if barrel == goal_pair:
                    terminal = True
                    success = True
                    reward += SUCCESS_REWARD
                elif barrel != goal_pair[: len(barrel)]:
                    terminal = True
                    reward += WRONG_DEPOSIT_PENALTY
            elif (door_color is not None and door_phase[door_color] != OPEN
                  and held is not None and held[0] == "key"):
                key_color = held[1]
                req = DOOR_REQUIREMENTS[door_color]
                if key_color not in req:
                    terminal = True
                    reward += self.wrong_key_penalty
                elif key_color not in keys_applied[door_color]:
                    applied = keys_applied[door_color] | {key_color}
                    keys_applied[door_color] = applied
                    door_phase[door_color] = OPEN if len(applied) == 2 else HALF_OPEN
                    held = None
                    key_present[key_color] = True  # consumed keys respawn at home
                # re-applying an already-used correct key is a no-op

        step_count = state.step_count + 1
        if step_count >= self.horizon and not terminal:
            terminal = True

        new_state = EnvState(
            pos=pos,
            orientation=orientation,
            held=held,
            door_phase=tuple(door_phase),
            keys_applied=tuple(keys_applied),
            key_present=tuple(key_present),
            diamond_present=tuple(diamond_present),
            barrel=barrel,
            goal=state.goal,
            step_count=step_count,
            terminal=terminal,
            success=success,
        )
        return new_state, self.rasterize(new_state), reward, terminal, success

    def rasterize(self, state: EnvState) -> Observation:
        from .raster import rasterize

        return rasterize(self, state)


def door_requirements(color: int) -> tuple[int, int]:
    if color not in DOOR_REQUIREMENTS:
        raise MazeError(f"unknown door color {color}")
    return DOOR_REQUIREMENTS[color]
