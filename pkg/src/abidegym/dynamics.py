"""Agent-aware dynamic wrapper around the static DoorKey world.

The environment counts consecutive steps without progress.  Half way to the
timeout threshold it enters a warning phase; at the threshold it perturbs the
task (the key stops working and a trigger tile appears that now unlocks the
door); at a second, larger threshold it escalates by regenerating the world
at a bigger size.  All randomness flows from the episode seed, so identical
(config, seed, action sequence) triples reproduce byte-identical runs.

Threshold boundary convention: events fire on the step the inactivity counter
*reaches* the limit (warning at ceil(threshold/2), perturbation at the
threshold itself, resize at the resize threshold).
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum
from typing import Union

from .errors import ConfigError, EpisodeOverError, PlacementError
from .grid import (
    Action,
    Direction,
    Position,
    RuleOverrides,
    Tile,
    WorldState,
    derive_seed,
    generate_layout,
    step_world,
)

DEFAULT_TIMEOUT_THRESHOLD = 10
DEFAULT_RESIZE_INCREMENT = 2
DEFAULT_INITIAL_SIZE = 6
DEFAULT_MAX_SIZE = 16
DEFAULT_TRIGGER_COLOR = "orange"
DEFAULT_MAX_STEPS_FACTOR = 10


@dataclass
class DynamicsConfig:
    """Thresholds and increments governing perturbation and resizing.

    resize_threshold defaults to twice the timeout threshold when left unset;
    it is an absolute value on the same inactivity counter, not a separate
    timer.  The step budget is max_steps_factor * current_size**2, recomputed
    whenever the grid is resized.
    """

    timeout_threshold: int = DEFAULT_TIMEOUT_THRESHOLD
    resize_threshold: int | None = None
    resize_increment: int = DEFAULT_RESIZE_INCREMENT
    initial_size: int = DEFAULT_INITIAL_SIZE
    max_size: int = DEFAULT_MAX_SIZE
    trigger_color: str = DEFAULT_TRIGGER_COLOR
    perturbation_enabled: bool = True
    resize_enabled: bool = True
    max_steps_factor: int = DEFAULT_MAX_STEPS_FACTOR

    def __post_init__(self):
        if self.resize_threshold is None:
            self.resize_threshold = 2 * self.timeout_threshold

    def validate(self) -> None:
        """Raise ConfigError naming the violated bound, if any."""
        if self.timeout_threshold < 2:
            raise ConfigError(
                f"timeout_threshold ({self.timeout_threshold}) must be >= 2"
            )
        if self.resize_threshold <= self.timeout_threshold:
            raise ConfigError(
                f"resize_threshold ({self.resize_threshold}) must exceed "
                f"timeout_threshold ({self.timeout_threshold})"
            )
        if self.resize_increment < 1:
            raise ConfigError(
                f"resize_increment ({self.resize_increment}) must be >= 1"
            )
        if self.initial_size < 5:
            raise ConfigError(f"initial_size ({self.initial_size}) must be >= 5")
        if self.max_size < self.initial_size:
            raise ConfigError(
                f"max_size ({self.max_size}) must be >= initial_size "
                f"({self.initial_size})"
            )
        if self.max_steps_factor < 1:
            raise ConfigError(
                f"max_steps_factor ({self.max_steps_factor}) must be >= 1"
            )


class Phase(Enum):
    NORMAL = "normal"
    WARNING = "warning"
    PERTURBED = "perturbed"


@dataclass(frozen=True)
class EnvState:
    """The structured observation record exposed to agents.

    perturbation is exactly 0.0 or 1.0; trigger_color is present iff the
    perturbation is active.
    """

    agent_pos: Position
    agent_dir: Direction
    door_locked: bool
    has_key: bool
    trigger_color: str | None
    perturbation: float
    time_step: int


@dataclass(frozen=True)
class ExtendedState:
    """EnvState plus the adaptation bookkeeping the wrapper maintains."""

    agent_pos: Position
    agent_dir: Direction
    door_locked: bool
    has_key: bool
    trigger_color: str | None
    perturbation: float
    time_step: int
    steps_since_move: int
    current_size: int
    timeout_threshold: int
    phase: Phase
    resize_count: int


@dataclass(frozen=True)
class WarningEntered:
    time_step: int


@dataclass(frozen=True)
class PerturbationTriggered:
    time_step: int


@dataclass(frozen=True)
class Resized:
    time_step: int
    old_size: int
    new_size: int


@dataclass(frozen=True)
class GoalReached:
    time_step: int


@dataclass(frozen=True)
class Truncated:
    time_step: int


DynamicEvent = Union[WarningEntered, PerturbationTriggered, Resized, GoalReached, Truncated]


@dataclass(frozen=True)
class Transition:
    """Result of one environment step."""

    observation: EnvState
    extended: ExtendedState
    reward: float
    terminated: bool
    truncated: bool
    events: tuple[DynamicEvent, ...]


def compute_reward(time_step: int, budget: int) -> float:
    """Sparse success reward: 1 - 0.9 * (time_step / budget), paid on goal only."""
    return 1.0 - 0.9 * (time_step / budget)


def place_trigger(world: WorldState) -> Position:
    """Draw the trigger cell from the world's PRNG stream.

    Uniform over floor cells on the agent's side of the divider, excluding the
    agent's own cell (the key cell is excluded already: it is not floor while
    the key sits on it).  Deterministic given the stream state.
    """
    eligible = [
        Position(x, y)
        for y in range(1, world.size - 1)
        for x in range(1, world.divider_col)
        if world.cells[y][x] is Tile.FLOOR and Position(x, y) != world.agent_pos
    ]
    if not eligible:
        raise PlacementError("no eligible cell for the trigger tile")
    return eligible[world.rng.randrange(len(eligible))]


class AbideEnv:
    """The dynamic environment: owns a WorldState and layers the dynamics on it.

    Single-threaded per instance; instances share no state and can run in
    parallel.  Construct with a config, then reset(seed) before stepping.
    """

    def __init__(self, config: DynamicsConfig | None = None):
        self.config = config if config is not None else DynamicsConfig()
        self.config.validate()
        self.seed: int | None = None
        self.world: WorldState | None = None
        self._done = True
        self._epoch = 0
        self._snapshot_key = None
        self._snapshot = None

    # -- lifecycle ----------------------------------------------------------

    def reset(self, seed: int) -> EnvState:
        """Start a fresh episode from the given seed."""
        self.seed = seed
        self.world = generate_layout(seed, self.config.initial_size)
        self._epoch += 1
        self.rules = RuleOverrides(key_enabled=True)
        self.phase = Phase.NORMAL
        self.time_step = 0
        self.steps_since_move = 0
        self.resize_count = 0
        self.current_size = self.config.initial_size
        self.trigger_pos: Position | None = None
        self._door_pos = self.world.door_pos()
        self._done = False
        return self.env_state()

    def step(self, action: Action | int) -> Transition:
        """Advance one step; apply threshold dynamics in a fixed order."""
        if self._done:
            raise EpisodeOverError("episode already terminated or truncated")
        action = Action(action)
        cfg = self.config

        outcome = step_world(self.world, action, self.rules)
        self.time_step += 1
        events: list[DynamicEvent] = []

        if outcome.progress:
            self.steps_since_move = 0
            if self.phase is Phase.WARNING:
                self.phase = Phase.NORMAL
        else:
            # Clamp so the counter never exceeds the resize threshold, even
            # when the resize itself is suppressed at max size.
            self.steps_since_move = min(
                self.steps_since_move + 1, cfg.resize_threshold
            )

        if (
            self.phase is Phase.NORMAL
            and self.steps_since_move == (cfg.timeout_threshold + 1) // 2
        ):
            self.phase = Phase.WARNING
            events.append(WarningEntered(self.time_step))

        if (
            self.steps_since_move == cfg.timeout_threshold
            and cfg.perturbation_enabled
            and self.phase is not Phase.PERTURBED
        ):
            self._apply_perturbation()
            events.append(PerturbationTriggered(self.time_step))

        if (
            self.steps_since_move == cfg.resize_threshold
            and cfg.resize_enabled
            and self.current_size + cfg.resize_increment <= cfg.max_size
        ):
            old_size = self.current_size
            self._apply_resize()
            events.append(Resized(self.time_step, old_size, self.current_size))

        if outcome.trigger_activated:
            self._activate_trigger()

        reward = 0.0
        terminated = False
        truncated = False
        if outcome.reached_goal:
            terminated = True
            reward = compute_reward(self.time_step, self.budget())
            events.append(GoalReached(self.time_step))
        elif self.time_step >= self.budget():
            truncated = True
            events.append(Truncated(self.time_step))
        self._done = terminated or truncated

        return Transition(
            observation=self.env_state(),
            extended=self.extended_state(),
            reward=reward,
            terminated=terminated,
            truncated=truncated,
            events=tuple(events),
        )

    # -- dynamic mechanisms -------------------------------------------------

    def _apply_perturbation(self) -> None:
        """Disable the key and introduce the trigger tile; irreversible."""
        self.rules.key_enabled = False
        pos = place_trigger(self.world)
        self.world.cells[pos.y][pos.x] = Tile.TRIGGER
        self.world.version += 1
        self.trigger_pos = pos
        self.phase = Phase.PERTURBED

    def _activate_trigger(self) -> None:
        """Entering the trigger unlocks and opens the door; idempotent."""
        d = self._door_pos
        if self.world.cells[d.y][d.x] is Tile.DOOR_LOCKED:
            self.world.cells[d.y][d.x] = Tile.DOOR_OPEN
            self.world.version += 1

    def _apply_resize(self) -> None:
        """Regenerate the world one increment larger; the agent restarts.

        The inactivity counter resets so each further resize needs a full
        run; the perturbation, once applied, carries over to the new layout.
        """
        k = self.resize_count + 1
        new_size = self.current_size + self.config.resize_increment
        self.world = generate_layout(derive_seed(self.seed, k), new_size)
        self._epoch += 1
        self._door_pos = self.world.door_pos()
        self.resize_count = k
        self.current_size = new_size
        self.steps_since_move = 0
        if self.phase is Phase.PERTURBED:
            pos = place_trigger(self.world)
            self.world.cells[pos.y][pos.x] = Tile.TRIGGER
            self.world.version += 1
            self.trigger_pos = pos
        else:
            self.trigger_pos = None

    # -- views --------------------------------------------------------------

    def budget(self) -> int:
        return self.config.max_steps_factor * self.current_size**2

    @property
    def done(self) -> bool:
        return self._done

    def door_locked(self) -> bool:
        d = self._door_pos
        return self.world.cells[d.y][d.x] is Tile.DOOR_LOCKED

    def env_state(self) -> EnvState:
        perturbed = self.phase is Phase.PERTURBED
        return EnvState(
            agent_pos=self.world.agent_pos,
            agent_dir=self.world.agent_dir,
            door_locked=self.door_locked(),
            has_key=self.world.carrying_key,
            trigger_color=self.config.trigger_color if perturbed else None,
            perturbation=1.0 if perturbed else 0.0,
            time_step=self.time_step,
        )

    def extended_state(self) -> ExtendedState:
        s = self.env_state()
        return ExtendedState(
            agent_pos=s.agent_pos,
            agent_dir=s.agent_dir,
            door_locked=s.door_locked,
            has_key=s.has_key,
            trigger_color=s.trigger_color,
            perturbation=s.perturbation,
            time_step=s.time_step,
            steps_since_move=self.steps_since_move,
            current_size=self.current_size,
            timeout_threshold=self.config.timeout_threshold,
            phase=self.phase,
            resize_count=self.resize_count,
        )

    def grid_snapshot(self) -> tuple[tuple[Tile, ...], ...]:
        """Immutable copy of the current cells.

        Cached until the cells next mutate, so per-step observers pay for the
        copy only when a pickup, toggle, perturbation, or resize changes the
        grid (the agent's own pose lives outside the cells).
        """
        key = (self._epoch, self.world.version)
        if key != self._snapshot_key:
            self._snapshot_key = key
            self._snapshot = tuple(tuple(row) for row in self.world.cells)
        return self._snapshot


def reset(config: DynamicsConfig, seed: int) -> tuple[AbideEnv, EnvState]:
    """Convenience constructor mirroring the reset contract."""
    env = AbideEnv(config)
    state = env.reset(seed)
    return env, state


def config_to_dict(config: DynamicsConfig) -> dict:
    """Stable, fully resolved mapping of config fields (for traces/reports)."""
    return {
        "timeout_threshold": config.timeout_threshold,
        "resize_threshold": config.resize_threshold,
        "resize_increment": config.resize_increment,
        "initial_size": config.initial_size,
        "max_size": config.max_size,
        "trigger_color": config.trigger_color,
        "perturbation_enabled": config.perturbation_enabled,
        "resize_enabled": config.resize_enabled,
        "max_steps_factor": config.max_steps_factor,
    }


def config_from_dict(data: dict) -> DynamicsConfig:
    cfg = DynamicsConfig(**data)
    cfg.validate()
    return cfg


def copy_config(config: DynamicsConfig, **overrides) -> DynamicsConfig:
    cfg = replace(config, **overrides)
    cfg.validate()
    return cfg
