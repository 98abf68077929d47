"""Static DoorKey world model.

A square grid bounded by walls, split by a vertical divider wall that holds a
single locked door.  The agent starts on the left side, the goal sits on the
right side, and a key on the agent's side opens the door.  Dynamics layers on
top of this module impose rule overrides (see :class:`RuleOverrides`) and may
place a trigger tile; the grid itself stays agnostic about why.

Grid size counts the full grid including the border walls, so the smallest
layout that fits border + divider + door + key + goal + agent is 5x5.
Coordinates are (x, y) with x the column and y the row, both 0-based.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Callable, NamedTuple

from .errors import InvalidSizeError

MIN_SIZE = 5

_MASK64 = (1 << 64) - 1


class Tile(IntEnum):
    """Cell contents.  A door is either locked or open, never closed-unlocked."""

    FLOOR = 0
    WALL = 1
    KEY = 2
    DOOR_LOCKED = 3
    DOOR_OPEN = 4
    GOAL = 5
    TRIGGER = 6


#: Tiles the agent may walk onto.
WALKABLE = frozenset({Tile.FLOOR, Tile.GOAL, Tile.TRIGGER, Tile.DOOR_OPEN})


class Direction(IntEnum):
    EAST = 0
    SOUTH = 1
    WEST = 2
    NORTH = 3

    def turn_right(self) -> "Direction":
        return Direction((self + 1) % 4)

    def turn_left(self) -> "Direction":
        return Direction((self + 3) % 4)


#: Unit vector (dx, dy) for each direction, indexed by Direction value.
DIR_VEC = ((1, 0), (0, 1), (-1, 0), (0, -1))

DIR_GLYPH = ">v<^"


class Action(IntEnum):
    """Action encoding is stable; traces and wire formats rely on it."""

    TURN_LEFT = 0
    TURN_RIGHT = 1
    FORWARD = 2
    PICKUP = 3
    DROP = 4
    TOGGLE = 5
    NOOP = 6


class Position(NamedTuple):
    x: int
    y: int


@dataclass
class RuleOverrides:
    """Rule hooks the dynamics layer can flip mid-episode."""

    key_enabled: bool = True


class StepOutcome(NamedTuple):
    """What a single world step did.

    progress is true iff the agent changed position or a pickup/drop/toggle
    succeeded; pure rotations, no-ops, and blocked moves are non-progress.
    """

    progress: bool
    reached_goal: bool
    trigger_activated: bool


@dataclass
class WorldState:
    """Full grid contents plus agent pose, inventory, and the PRNG stream.

    The PRNG stream is seeded at layout generation and consumed by later
    seeded placements (the dynamics layer draws the trigger cell from it), so
    copies must duplicate the stream state.
    """

    size: int
    cells: list[list[Tile]]
    agent_pos: Position
    agent_dir: Direction
    carrying_key: bool
    rng: random.Random = field(repr=False)
    divider_col: int
    # Bumped on every cells mutation so snapshot consumers can cache.
    version: int = 0

    def tile_at(self, pos: Position) -> Tile:
        return self.cells[pos.y][pos.x]

    def front_pos(self) -> Position:
        dx, dy = DIR_VEC[self.agent_dir]
        return Position(self.agent_pos.x + dx, self.agent_pos.y + dy)

    def find_tile(self, kind: Tile) -> Position | None:
        for y in range(self.size):
            for x in range(self.size):
                if self.cells[y][x] is kind:
                    return Position(x, y)
        return None

    def door_pos(self) -> Position:
        for y in range(1, self.size - 1):
            t = self.cells[y][self.divider_col]
            if t is Tile.DOOR_LOCKED or t is Tile.DOOR_OPEN:
                return Position(self.divider_col, y)
        raise AssertionError("layout without a door")

    def copy(self) -> "WorldState":
        rng = random.Random()
        rng.setstate(self.rng.getstate())
        return WorldState(
            size=self.size,
            cells=[row[:] for row in self.cells],
            agent_pos=self.agent_pos,
            agent_dir=self.agent_dir,
            carrying_key=self.carrying_key,
            rng=rng,
            divider_col=self.divider_col,
            version=self.version,
        )


def derive_seed(seed: int, k: int) -> int:
    """Fixed splitmix64-style derivation of a child seed.

    Used so regenerated layouts (resizes) are reproducible from the episode
    seed but do not repeat it.
    """
    z = (seed + k * 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


def generate_layout(seed: int, size: int = 6) -> WorldState:
    """Build the deterministic DoorKey layout for (seed, size).

    Border walls all around; a vertical divider wall at a seeded column in
    [2, size-3] carrying one locked door at a seeded row; the agent at the
    leftmost-topmost free cell of the left side facing east; the key at a
    seeded free cell on the agent's side; the goal at the bottom-right
    interior cell of the far side.

    Raises InvalidSizeError for size < 5.
    """
    if size < MIN_SIZE:
        raise InvalidSizeError(f"size {size} < minimum {MIN_SIZE}")

    rng = random.Random(seed)
    cells = [[Tile.FLOOR] * size for _ in range(size)]
    for i in range(size):
        cells[0][i] = Tile.WALL
        cells[size - 1][i] = Tile.WALL
        cells[i][0] = Tile.WALL
        cells[i][size - 1] = Tile.WALL

    divider_col = rng.randrange(2, size - 2)
    for y in range(1, size - 1):
        cells[y][divider_col] = Tile.WALL
    door_row = rng.randrange(1, size - 1)
    cells[door_row][divider_col] = Tile.DOOR_LOCKED

    agent_pos = Position(1, 1)

    key_candidates = [
        Position(x, y)
        for y in range(1, size - 1)
        for x in range(1, divider_col)
        if Position(x, y) != agent_pos
    ]
    key_pos = key_candidates[rng.randrange(len(key_candidates))]
    cells[key_pos.y][key_pos.x] = Tile.KEY

    cells[size - 2][size - 2] = Tile.GOAL

    return WorldState(
        size=size,
        cells=cells,
        agent_pos=agent_pos,
        agent_dir=Direction.EAST,
        carrying_key=False,
        rng=rng,
        divider_col=divider_col,
    )


def step_world(state: WorldState, action: Action, rules: RuleOverrides) -> StepOutcome:
    """Apply one action to the world in place.

    Illegal actions are silent no-ops: the environment never faults on agent
    input.  Toggle opens a facing locked door only while carrying the key and
    while rules.key_enabled holds.
    """
    moved = False
    interacted = False
    reached_goal = False
    trigger_activated = False

    if action is Action.TURN_LEFT:
        state.agent_dir = state.agent_dir.turn_left()
    elif action is Action.TURN_RIGHT:
        state.agent_dir = state.agent_dir.turn_right()
    elif action is Action.FORWARD:
        ahead = state.front_pos()
        target = state.tile_at(ahead)
        if target in WALKABLE:
            state.agent_pos = ahead
            moved = True
            reached_goal = target is Tile.GOAL
            trigger_activated = target is Tile.TRIGGER
    elif action is Action.PICKUP:
        ahead = state.front_pos()
        if state.tile_at(ahead) is Tile.KEY and not state.carrying_key:
            state.cells[ahead.y][ahead.x] = Tile.FLOOR
            state.version += 1
            state.carrying_key = True
            interacted = True
    elif action is Action.DROP:
        ahead = state.front_pos()
        if state.carrying_key and state.tile_at(ahead) is Tile.FLOOR:
            state.cells[ahead.y][ahead.x] = Tile.KEY
            state.version += 1
            state.carrying_key = False
            interacted = True
    elif action is Action.TOGGLE:
        ahead = state.front_pos()
        if (
            state.tile_at(ahead) is Tile.DOOR_LOCKED
            and state.carrying_key
            and rules.key_enabled
        ):
            state.cells[ahead.y][ahead.x] = Tile.DOOR_OPEN
            state.version += 1
            interacted = True
    # NOOP: nothing.

    return StepOutcome(
        progress=moved or interacted,
        reached_goal=reached_goal,
        trigger_activated=trigger_activated,
    )


def world_hash(state: WorldState) -> int:
    """Hash of the progress-relevant world content.

    Excludes agent_dir and the PRNG stream on purpose: a pure rotation is not
    progress, so it must not change this hash.
    """
    return hash(
        (
            tuple(tuple(row) for row in state.cells),
            state.agent_pos,
            state.carrying_key,
        )
    )


_TILE_GLYPH = {
    Tile.FLOOR: ".",
    Tile.WALL: "W",
    Tile.KEY: "K",
    Tile.DOOR_LOCKED: "D",
    Tile.DOOR_OPEN: "d",
    Tile.GOAL: "G",
    Tile.TRIGGER: "T",
}


def render_text(state: WorldState) -> str:
    """Render the grid as size lines of size characters.

    The agent overlays its cell with a direction glyph (> v < ^).
    """
    rows = []
    for y in range(state.size):
        row = [_TILE_GLYPH[t] for t in state.cells[y]]
        if y == state.agent_pos.y:
            row[state.agent_pos.x] = DIR_GLYPH[state.agent_dir]
        rows.append("".join(row))
    return "\n".join(rows)


PassablePredicate = Callable[[Tile], bool]


def default_passable(tile: Tile) -> bool:
    """Cells the movement rules allow the agent to enter."""
    return tile in WALKABLE
