"""Flat reset/step bindings for the dynamic gridworld.

BoundEnv exposes the environment through the conventional RL loop shape:
``reset(seed)`` returns ``(observation, info)`` and ``step(action)`` returns
``(observation, reward, terminated, truncated, info)``.  Observations are
plain dicts whose scalar fields mirror the native observation record exactly,
plus a one-hot numpy tensor of the full grid; info carries the extended
bookkeeping state and the events raised by the step.  Everything else
(dynamics, rewards, determinism) is the wrapped environment's, untouched.
"""

from __future__ import annotations

import dataclasses
import secrets

import numpy as np

from abidegym import AbideEnv, Action, DynamicsConfig, Tile

__version__ = "0.1.0"

N_ACTIONS = len(Action)
N_TILE_CHANNELS = len(Tile)


class ClosedEnvError(RuntimeError):
    """Raised when a closed BoundEnv is reset or stepped."""


def grid_tensor(grid) -> np.ndarray:
    """One-hot encode a grid as a (size, size, channels) float32 tensor.

    Channel index equals the tile's integer code, so tensor[y, x].argmax()
    recovers the tile at (x, y).
    """
    size = len(grid)
    tensor = np.zeros((size, size, N_TILE_CHANNELS), dtype=np.float32)
    for y, row in enumerate(grid):
        for x, tile in enumerate(row):
            tensor[y, x, int(tile)] = 1.0
    return tensor


def _event_dict(event) -> dict:
    payload = dataclasses.asdict(event)
    payload["type"] = type(event).__name__
    return payload


class BoundEnv:
    """One environment instance behind a reset/step interface.

    The handle must be reset before its first step and becomes unusable after
    close().  Action values are the native action codes 0..6.
    """

    def __init__(self, config: DynamicsConfig | None = None):
        self._env = AbideEnv(config if config is not None else DynamicsConfig())
        self._closed = False
        self._started = False

    @property
    def action_count(self) -> int:
        return N_ACTIONS

    @property
    def config(self) -> DynamicsConfig:
        return self._env.config

    def reset(self, seed: int | None = None) -> tuple[dict, dict]:
        """Start a fresh episode; drawing the seed here if none is given.

        The seed actually used is always reported under info["seed"], so an
        entropy-seeded episode can still be reproduced afterwards.
        """
        self._require_open()
        if seed is None:
            seed = secrets.randbits(32)
        state = self._env.reset(seed)
        self._started = True
        return self._observation(state), self._info((), seed=seed)

    def step(self, action: int) -> tuple[dict, float, bool, bool, dict]:
        self._require_open()
        if not self._started:
            raise RuntimeError("step() before reset()")
        index = int(action)
        if not 0 <= index < N_ACTIONS:
            raise ValueError(
                f"action {action!r} out of range 0..{N_ACTIONS - 1}"
            )
        transition = self._env.step(Action(index))
        return (
            self._observation(transition.observation),
            transition.reward,
            transition.terminated,
            transition.truncated,
            self._info(transition.events),
        )

    def close(self) -> None:
        self._closed = True

    def __enter__(self) -> "BoundEnv":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def _require_open(self) -> None:
        if self._closed:
            raise ClosedEnvError("environment handle is closed")

    def _observation(self, state) -> dict:
        return {
            "agent_pos": (state.agent_pos.x, state.agent_pos.y),
            "agent_dir": int(state.agent_dir),
            "door_locked": state.door_locked,
            "has_key": state.has_key,
            "trigger_color": state.trigger_color,
            "perturbation": state.perturbation,
            "time_step": state.time_step,
            "grid": grid_tensor(self._env.grid_snapshot()),
        }

    def _info(self, events, seed: int | None = None) -> dict:
        ext = self._env.extended_state()
        info = {
            "agent_pos": (ext.agent_pos.x, ext.agent_pos.y),
            "agent_dir": int(ext.agent_dir),
            "door_locked": ext.door_locked,
            "has_key": ext.has_key,
            "trigger_color": ext.trigger_color,
            "perturbation": ext.perturbation,
            "time_step": ext.time_step,
            "steps_since_move": ext.steps_since_move,
            "current_size": ext.current_size,
            "timeout_threshold": ext.timeout_threshold,
            "phase": ext.phase.value,
            "resize_count": ext.resize_count,
            "events": tuple(_event_dict(e) for e in events),
        }
        if seed is not None:
            info["seed"] = seed
        return info


__all__ = [
    "BoundEnv",
    "ClosedEnvError",
    "N_ACTIONS",
    "N_TILE_CHANNELS",
    "grid_tensor",
]
