"""Reference policies: random, key planner, trigger planner, hybrid, Q-learner.

The planners work from a full grid snapshot; they keep a queued plan and
rebuild it whenever the grid or the perturbation flag changes (resize,
perturbation, or their own interactions mutate the grid).  The key planner is
deliberately brittle: it never routes through the trigger tile and keeps
trying the key-door pathway even after it stops working.
"""

from __future__ import annotations

import json
import random
from collections import deque
from dataclasses import dataclass

from .dynamics import EnvState, ExtendedState
from .errors import ConfigError, TraceParseError, TraceVersionError
from .grid import DIR_VEC, Action, Direction, Position, Tile

N_ACTIONS = len(Action)

Grid = tuple[tuple[Tile, ...], ...]
Pose = tuple[int, int, int]  # x, y, direction


@dataclass(frozen=True)
class Observation:
    """What an agent sees each step: the exposed record plus a grid snapshot."""

    env_state: EnvState
    grid: Grid
    extended: ExtendedState


# ---------------------------------------------------------------------------
# Pose-level breadth-first planning
# ---------------------------------------------------------------------------

def _walkable_with_trigger(tile: Tile) -> bool:
    return tile in (Tile.FLOOR, Tile.GOAL, Tile.TRIGGER, Tile.DOOR_OPEN)


def _walkable_avoiding_trigger(tile: Tile) -> bool:
    # The key planner does not model the trigger tile and walks around it.
    return tile in (Tile.FLOOR, Tile.GOAL, Tile.DOOR_OPEN)


def _successors(grid: Grid, pose: Pose, passable):
    x, y, d = pose
    dx, dy = DIR_VEC[d]
    nx, ny = x + dx, y + dy
    if 0 <= ny < len(grid) and 0 <= nx < len(grid[0]) and passable(grid[ny][nx]):
        yield Action.FORWARD, (nx, ny, d)
    yield Action.TURN_RIGHT, (x, y, (d + 1) % 4)
    yield Action.TURN_LEFT, (x, y, (d + 3) % 4)


def _pose_bfs(grid: Grid, start: Pose, goals: frozenset[Pose], passable) -> list[Action] | None:
    """Shortest action sequence (turns + forwards) from start to any goal pose."""
    if start in goals:
        return []
    parent: dict[Pose, tuple[Pose, Action] | None] = {start: None}
    queue = deque([start])
    while queue:
        cur = queue.popleft()
        for action, nxt in _successors(grid, cur, passable):
            if nxt in parent:
                continue
            parent[nxt] = (cur, action)
            if nxt in goals:
                actions: list[Action] = []
                node = nxt
                while parent[node] is not None:
                    node, action = parent[node][0], parent[node][1]
                    actions.append(action)
                actions.reverse()
                return actions
            queue.append(nxt)
    return None


def _target_poses(grid: Grid, target: Position, passable) -> frozenset[Pose]:
    """Goal poses for a target cell.

    A walkable target must be stood on (any facing); a non-walkable target
    (key, locked door) must be faced from an adjacent walkable cell.
    Neighbors are considered in fixed east, south, west, north order.
    """
    tx, ty = target
    if passable(grid[ty][tx]):
        return frozenset((tx, ty, d) for d in range(4))
    poses = []
    facing = {
        Direction.EAST: Direction.WEST,
        Direction.SOUTH: Direction.NORTH,
        Direction.WEST: Direction.EAST,
        Direction.NORTH: Direction.SOUTH,
    }
    for d in (Direction.EAST, Direction.SOUTH, Direction.WEST, Direction.NORTH):
        dx, dy = DIR_VEC[d]
        nx, ny = tx + dx, ty + dy
        if 0 <= ny < len(grid) and 0 <= nx < len(grid[0]) and passable(grid[ny][nx]):
            poses.append((nx, ny, int(facing[d])))
    return frozenset(poses)


def bfs_plan(
    grid: Grid,
    start_pos: Position,
    start_dir: Direction,
    target: Position,
    passable=_walkable_with_trigger,
) -> list[Action] | None:
    """Plan the shortest action route to a target cell.

    Ends standing on the target if it is walkable, otherwise adjacent and
    facing it.  Returns None when no route exists.
    """
    goals = _target_poses(grid, target, passable)
    if not goals:
        return None
    return _pose_bfs(grid, (start_pos.x, start_pos.y, int(start_dir)), goals, passable)


def _find(grid: Grid, kind: Tile) -> Position | None:
    for y, row in enumerate(grid):
        for x, tile in enumerate(row):
            if tile is kind:
                return Position(x, y)
    return None


def _grid_without(grid: Grid, pos: Position, replacement: Tile = Tile.FLOOR) -> Grid:
    rows = [list(row) for row in grid]
    rows[pos.y][pos.x] = replacement
    return tuple(tuple(row) for row in rows)


# ---------------------------------------------------------------------------
# Strategy plan builders
# ---------------------------------------------------------------------------

def plan_key_strategy(grid: Grid, pos: Position, direction: Direction, has_key: bool) -> list[Action] | None:
    """Next leg of the key-door-goal routine, or None when nothing is feasible.

    The key approach is chosen by looking one leg ahead: among the adjacent
    cells the key can be taken from, pick the one minimizing route-to-key plus
    route-onward-to-door, so the stitched plan is as short as the best
    single-shot solve.
    """
    passable = _walkable_avoiding_trigger
    door = _find(grid, Tile.DOOR_LOCKED)
    if door is None:
        goal = _find(grid, Tile.GOAL)
        if goal is None:
            return None
        return bfs_plan(grid, pos, direction, goal, passable)
    if has_key:
        route = bfs_plan(grid, pos, direction, door, passable)
        if route is None:
            return None
        return route + [Action.TOGGLE]
    key = _find(grid, Tile.KEY)
    if key is None:
        return None
    route = _route_to_key(grid, pos, direction, key, door, passable)
    if route is None:
        return None
    return route + [Action.PICKUP]


def _route_to_key(grid: Grid, pos: Position, direction: Direction, key: Position, door: Position, passable) -> list[Action] | None:
    start: Pose = (pos.x, pos.y, int(direction))
    after_pickup = _grid_without(grid, key)
    door_goals = _target_poses(after_pickup, door, passable)
    facing = {
        Direction.EAST: Direction.WEST,
        Direction.SOUTH: Direction.NORTH,
        Direction.WEST: Direction.EAST,
        Direction.NORTH: Direction.SOUTH,
    }
    best: tuple[int, list[Action]] | None = None
    fallback: tuple[int, list[Action]] | None = None
    for d in (Direction.EAST, Direction.SOUTH, Direction.WEST, Direction.NORTH):
        dx, dy = DIR_VEC[d]
        nx, ny = key.x + dx, key.y + dy
        if not (0 <= ny < len(grid) and 0 <= nx < len(grid[0])):
            continue
        if not passable(grid[ny][nx]):
            continue
        approach: Pose = (nx, ny, int(facing[d]))
        route = _pose_bfs(grid, start, frozenset((approach,)), passable)
        if route is None:
            continue
        if fallback is None or len(route) < fallback[0]:
            fallback = (len(route), route)
        onward = _pose_bfs(after_pickup, approach, door_goals, passable)
        if onward is None:
            continue
        total = len(route) + len(onward)
        if best is None or total < best[0]:
            best = (total, route)
    if best is not None:
        return best[1]
    if fallback is not None:
        return fallback[1]
    return None


def plan_route_clearing_key(
    grid: Grid,
    pos: Position,
    direction: Direction,
    has_key: bool,
    target: Position,
) -> list[Action] | None:
    """Shortest route to stand on a walkable target, pickup allowed.

    In narrow layouts the key tile can wall off the only corridor, so the
    search runs over (x, y, dir, carrying) and may spend one pickup action to
    clear the key's cell.  Dropping is never considered: it re-blocks a cell
    and cannot shorten a route.
    """
    key_cell = _find(grid, Tile.KEY)
    start = (pos.x, pos.y, int(direction), has_key)
    if (pos.x, pos.y) == target:
        return []
    parent: dict[tuple, tuple | None] = {start: None}
    queue = deque([start])
    while queue:
        cur = queue.popleft()
        x, y, d, carrying = cur
        succs = []
        dx, dy = DIR_VEC[d]
        nx, ny = x + dx, y + dy
        ahead_ok = False
        if 0 <= ny < len(grid) and 0 <= nx < len(grid[0]):
            tile = grid[ny][nx]
            if _walkable_with_trigger(tile):
                ahead_ok = True
            elif key_cell is not None and (nx, ny) == key_cell and carrying:
                ahead_ok = True  # picked up: the cell is bare floor now
        if ahead_ok:
            succs.append((Action.FORWARD, (nx, ny, d, carrying)))
        succs.append((Action.TURN_RIGHT, (x, y, (d + 1) % 4, carrying)))
        succs.append((Action.TURN_LEFT, (x, y, (d + 3) % 4, carrying)))
        if key_cell is not None and not carrying and (nx, ny) == key_cell:
            succs.append((Action.PICKUP, (x, y, d, True)))
        for action, nxt in succs:
            if nxt in parent:
                continue
            parent[nxt] = (cur, action)
            if (nxt[0], nxt[1]) == target:
                actions: list[Action] = []
                node = nxt
                while parent[node] is not None:
                    node, action = parent[node][0], parent[node][1]
                    actions.append(action)
                actions.reverse()
                return actions
            queue.append(nxt)
    return None


def plan_trigger_strategy(grid: Grid, pos: Position, direction: Direction, has_key: bool, door_locked: bool) -> list[Action] | None:
    """Route onto the trigger while the door is locked, then onto the goal."""
    if door_locked:
        target = _find(grid, Tile.TRIGGER)
    else:
        target = _find(grid, Tile.GOAL)
    if target is None:
        return None
    return plan_route_clearing_key(grid, pos, direction, has_key, target)


# ---------------------------------------------------------------------------
# Agents
# ---------------------------------------------------------------------------

class Agent:
    kind = "agent"

    def reset(self) -> None:
        pass

    def act(self, obs: Observation) -> Action:
        raise NotImplementedError


class RandomAgent(Agent):
    kind = "random"

    def __init__(self, seed: int = 0):
        self._seed = seed
        self._rng = random.Random(seed)

    def reset(self) -> None:
        self._rng = random.Random(self._seed)

    def act(self, obs: Observation) -> Action:
        return Action(self._rng.randrange(N_ACTIONS))


class _PlanningAgent(Agent):
    """Shared replanning plumbing: keep a plan, rebuild on any world change.

    Change detection is by grid snapshot identity (the environment reuses the
    snapshot object while the cells are unchanged; holding a reference keeps
    the identity comparison sound).  A fresh tuple every step merely forces a
    harmless replan.
    """

    def __init__(self):
        self._plan: deque[Action] = deque()
        self._last_grid: Grid | None = None
        self._last_flag: float | None = None

    def reset(self) -> None:
        self._plan.clear()
        self._last_grid = None
        self._last_flag = None

    def _build_plan(self, obs: Observation) -> list[Action] | None:
        raise NotImplementedError

    def act(self, obs: Observation) -> Action:
        flag = obs.env_state.perturbation
        if obs.grid is not self._last_grid or flag != self._last_flag:
            self._last_grid = obs.grid
            self._last_flag = flag
            self._plan.clear()
        if not self._plan:
            plan = self._build_plan(obs)
            if not plan:
                return Action.NOOP
            self._plan.extend(plan)
        return self._plan.popleft()


class KeyPlannerAgent(_PlanningAgent):
    """Executes key -> pickup -> door -> toggle -> goal; ignores the trigger."""

    kind = "key"

    def _build_plan(self, obs: Observation) -> list[Action] | None:
        s = obs.env_state
        return plan_key_strategy(obs.grid, s.agent_pos, s.agent_dir, s.has_key)


class TriggerPlannerAgent(_PlanningAgent):
    """Waits for the perturbation, then routes trigger -> goal."""

    kind = "trigger"

    def _build_plan(self, obs: Observation) -> list[Action] | None:
        s = obs.env_state
        if s.perturbation == 0.0:
            return None
        return plan_trigger_strategy(
            obs.grid, s.agent_pos, s.agent_dir, s.has_key, s.door_locked
        )


class HybridAgent(_PlanningAgent):
    """Chooses by the perturbation flag each step: key route or trigger route."""

    kind = "hybrid"

    def _build_plan(self, obs: Observation) -> list[Action] | None:
        s = obs.env_state
        if s.perturbation == 0.0:
            return plan_key_strategy(obs.grid, s.agent_pos, s.agent_dir, s.has_key)
        return plan_trigger_strategy(
            obs.grid, s.agent_pos, s.agent_dir, s.has_key, s.door_locked
        )


class ScriptedAgent(Agent):
    """Replays a fixed action sequence, then noops."""

    kind = "scripted"

    def __init__(self, actions):
        self._actions = [Action(a) for a in actions]
        self._index = 0

    def reset(self) -> None:
        self._index = 0

    def act(self, obs: Observation) -> Action:
        if self._index >= len(self._actions):
            return Action.NOOP
        action = self._actions[self._index]
        self._index += 1
        return action


# ---------------------------------------------------------------------------
# Tabular Q-learning
# ---------------------------------------------------------------------------

@dataclass
class QConfig:
    alpha: float = 0.1
    gamma: float = 0.99
    epsilon: float = 0.1
    episodes: int = 5000

    def validate(self) -> None:
        if not 0.0 < self.alpha <= 1.0:
            raise ConfigError(f"alpha ({self.alpha}) must be in (0, 1]")
        if not 0.0 <= self.gamma <= 1.0:
            raise ConfigError(f"gamma ({self.gamma}) must be in [0, 1]")
        if not 0.0 <= self.epsilon <= 1.0:
            raise ConfigError(f"epsilon ({self.epsilon}) must be in [0, 1]")
        if self.episodes < 1:
            raise ConfigError(f"episodes ({self.episodes}) must be >= 1")


QTable = dict


def state_key(env_state: EnvState, current_size: int):
    return (
        env_state.agent_pos,
        int(env_state.agent_dir),
        env_state.has_key,
        env_state.door_locked,
        env_state.perturbation,
        current_size,
    )


def q_state_key(obs: Observation):
    """Discrete table key; deliberately blind to the layout geometry."""
    return state_key(obs.env_state, obs.extended.current_size)


def q_update(table: QTable, s, a, r: float, s_next, config: QConfig) -> QTable:
    """One-step temporal-difference update; unseen entries default to zero."""
    row = table.setdefault(s, [0.0] * N_ACTIONS)
    bootstrap = 0.0
    if s_next is not None:
        next_row = table.get(s_next)
        if next_row is not None:
            bootstrap = max(next_row)
    row[a] += config.alpha * (r + config.gamma * bootstrap - row[a])
    return table


class QLearnerAgent(Agent):
    """Greedy policy over a learned table; a probe, not a strong baseline."""

    kind = "qlearner"

    def __init__(self, table: QTable | None = None):
        self.table = table if table is not None else {}

    def act(self, obs: Observation) -> Action:
        row = self.table.get(q_state_key(obs))
        if row is None:
            return Action.NOOP
        best = max(range(N_ACTIONS), key=lambda i: (row[i], -i))
        return Action(best)


def _select_training_action(table: QTable, key, epsilon: float, rng: random.Random) -> Action:
    if rng.random() < epsilon:
        return Action(rng.randrange(N_ACTIONS))
    row = table.get(key)
    if row is None:
        return Action(rng.randrange(N_ACTIONS))
    top = max(row)
    best = [i for i, v in enumerate(row) if v == top]
    return Action(best[rng.randrange(len(best))])


def train_q_learner(
    env,
    qconfig: QConfig,
    env_seed: int,
    *,
    noop_prefix: int = 0,
    rng_seed: int = 0,
    table: QTable | None = None,
) -> QLearnerAgent:
    """Train on repeated episodes of one environment seed.

    Exploration is epsilon-greedy with random tie-breaking and epsilon
    annealed linearly to zero across episodes.
    """
    qconfig.validate()
    rng = random.Random(rng_seed)
    table = {} if table is None else table
    for episode in range(qconfig.episodes):
        epsilon = qconfig.epsilon * (1.0 - episode / qconfig.episodes)
        state = env.reset(env_seed)
        for _ in range(noop_prefix):
            transition = env.step(Action.NOOP)
            state = transition.observation
            if env.done:
                break
        key = state_key(state, env.current_size)
        while not env.done:
            action = _select_training_action(table, key, epsilon, rng)
            transition = env.step(action)
            if transition.terminated or transition.truncated:
                next_key = None
            else:
                next_key = state_key(transition.observation, env.current_size)
            q_update(table, key, action, transition.reward, next_key, qconfig)
            key = next_key
    return QLearnerAgent(table)


# ---------------------------------------------------------------------------
# Q-table persistence: versioned text dump, one state row per line
# ---------------------------------------------------------------------------

QTABLE_HEADER = "abidegym-qtable"
QTABLE_VERSION = 1


def save_qtable(table: QTable, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{QTABLE_HEADER} {QTABLE_VERSION}\n")
        for key, row in table.items():
            pos, direction, has_key, door_locked, perturbation, size = key
            record = {
                "s": [pos[0], pos[1], int(direction), int(has_key), int(door_locked), perturbation, size],
                "q": list(row),
            }
            fh.write(json.dumps(record, separators=(",", ":")) + "\n")


def load_qtable(path: str) -> QTable:
    table: QTable = {}
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n")
        parts = header.split()
        if len(parts) != 2 or parts[0] != QTABLE_HEADER:
            raise TraceParseError(1, f"not a q-table file: {header!r}")
        if parts[1] != str(QTABLE_VERSION):
            raise TraceVersionError(f"unsupported q-table version {parts[1]!r}")
        for line_no, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
                x, y, d, has_key, door_locked, perturbation, size = record["s"]
                row = [float(v) for v in record["q"]]
            except (ValueError, KeyError, TypeError) as exc:
                raise TraceParseError(line_no, f"bad q-table row: {exc}")
            if len(row) != N_ACTIONS:
                raise TraceParseError(line_no, f"expected {N_ACTIONS} action values")
            key = (Position(x, y), int(d), bool(has_key), bool(door_locked), float(perturbation), int(size))
            table[key] = row
    return table


# ---------------------------------------------------------------------------
# Factory
# ---------------------------------------------------------------------------

AGENT_KINDS = ("random", "key", "trigger", "hybrid", "qlearner")


def make_agent(kind: str, seed: int = 0, qtable: QTable | None = None) -> Agent:
    if kind == "random":
        return RandomAgent(seed)
    if kind == "key":
        return KeyPlannerAgent()
    if kind == "trigger":
        return TriggerPlannerAgent()
    if kind == "hybrid":
        return HybridAgent()
    if kind == "qlearner":
        return QLearnerAgent(qtable)
    raise ValueError(f"unknown agent kind {kind!r}")
