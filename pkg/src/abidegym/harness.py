"""Benchmark harness: run episodes, record traces, classify and aggregate.

Traces are line-delimited JSON (one header, one record per step, one footer)
so they stream, diff, and replay cleanly.  Strategy classification reads only
the recorded door state and perturbation flag: a door that unlocks before the
perturbation was opened by the key, after it by the trigger.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Callable, Iterable, Sequence

from .agents import Agent, Observation
from .dynamics import (
    AbideEnv,
    DynamicsConfig,
    EnvState,
    ExtendedState,
    GoalReached,
    PerturbationTriggered,
    Phase,
    Resized,
    Truncated,
    WarningEntered,
    config_from_dict,
    config_to_dict,
)
from .errors import TraceParseError, TraceVersionError
from .grid import Action, Direction, Position

TRACE_SCHEMA_VERSION = 1


@dataclass(frozen=True)
class StepRecord:
    time_step: int
    action: Action
    state: EnvState
    reward: float
    terminated: bool
    truncated: bool
    events: tuple[dict, ...]


@dataclass
class EpisodeTrace:
    seed: int
    agent_kind: str
    noop_prefix: int
    config: dict
    initial_state: EnvState
    steps: list[StepRecord] = field(default_factory=list)
    final_extended: ExtendedState | None = None

    @property
    def terminated(self) -> bool:
        return bool(self.steps) and self.steps[-1].terminated

    @property
    def truncated(self) -> bool:
        return bool(self.steps) and self.steps[-1].truncated

    @property
    def outcome(self) -> str:
        return "goal" if self.terminated else "truncated"

    @property
    def total_reward(self) -> float:
        return sum(record.reward for record in self.steps)

    @property
    def length(self) -> int:
        return len(self.steps)


_EVENT_NAMES = {
    WarningEntered: "warning",
    PerturbationTriggered: "perturbation",
    Resized: "resized",
    GoalReached: "goal",
    Truncated: "truncated",
}


def _event_to_dict(event) -> dict:
    data = {"type": _EVENT_NAMES[type(event)]}
    data.update(asdict(event))
    return data


# ---------------------------------------------------------------------------
# Running
# ---------------------------------------------------------------------------

def observe(env: AbideEnv) -> Observation:
    return Observation(env.env_state(), env.grid_snapshot(), env.extended_state())


def run_episode(
    config: DynamicsConfig,
    agent: Agent,
    seed: int,
    *,
    noop_prefix: int = 0,
) -> EpisodeTrace:
    """Run one episode to termination or truncation and record every step.

    noop_prefix forces that many leading no-ops before the agent is consulted;
    it is the standard way to provoke the perturbation on demand and is
    recorded in the trace header so the run stays reproducible.
    """
    env = AbideEnv(config)
    initial = env.reset(seed)
    agent.reset()
    trace = EpisodeTrace(
        seed=seed,
        agent_kind=agent.kind,
        noop_prefix=noop_prefix,
        config=config_to_dict(config),
        initial_state=initial,
    )
    forced = noop_prefix
    while not env.done:
        if forced > 0:
            action = Action.NOOP
            forced -= 1
        else:
            action = agent.act(observe(env))
        transition = env.step(action)
        trace.steps.append(
            StepRecord(
                time_step=transition.observation.time_step,
                action=action,
                state=transition.observation,
                reward=transition.reward,
                terminated=transition.terminated,
                truncated=transition.truncated,
                events=tuple(_event_to_dict(e) for e in transition.events),
            )
        )
        if env.done:
            trace.final_extended = transition.extended
    return trace


# ---------------------------------------------------------------------------
# Trace analysis
# ---------------------------------------------------------------------------

def _unlock_flips(trace: EpisodeTrace) -> list[StepRecord]:
    """Step records where the door goes from locked to unlocked."""
    flips = []
    locked = trace.initial_state.door_locked
    for record in trace.steps:
        if locked and not record.state.door_locked:
            flips.append(record)
        locked = record.state.door_locked
    return flips


def classify_strategy(trace: EpisodeTrace) -> str:
    """"key", "trigger", or "none", by how the door last came unlocked.

    A door unlocked while the perturbation flag is still 0.0 can only have
    been opened by the key; once the flag is 1.0 the key is dead, so any
    unlock was the trigger.  The last unlock is the operative one (a resize
    can re-lock the door mid-episode).
    """
    flips = _unlock_flips(trace)
    if not flips:
        return "none"
    return "key" if flips[-1].state.perturbation == 0.0 else "trigger"


def perturbation_step(trace: EpisodeTrace) -> int | None:
    for record in trace.steps:
        for event in record.events:
            if event["type"] == "perturbation":
                return event["time_step"]
    return None


def adaptation_latency(trace: EpisodeTrace) -> int | None:
    """Steps from the perturbation onset to the first unlock after it.

    None when the episode was never perturbed or the agent never got the door
    open again afterwards.
    """
    onset = perturbation_step(trace)
    if onset is None:
        return None
    for record in _unlock_flips(trace):
        if record.time_step > onset:
            return record.time_step - onset
    return None


@dataclass
class Metrics:
    """Aggregates over a set of episodes for one agent.

    mean_steps_to_goal averages successful episodes only; adaptation_latency
    averages episodes that re-unlocked after a perturbation.  Both are None
    when no episode qualifies.
    """

    episodes: int = 0
    successes: int = 0
    perturbed: int = 0
    steps_to_goal: list[int] = field(default_factory=list)
    total_reward: float = 0.0
    resize_counts: list[int] = field(default_factory=list)
    latencies: list[int] = field(default_factory=list)
    labels: list[tuple[str, bool]] = field(default_factory=list)

    def add(self, trace: EpisodeTrace) -> None:
        self.episodes += 1
        if trace.terminated:
            self.successes += 1
            self.steps_to_goal.append(trace.length)
        was_perturbed = perturbation_step(trace) is not None
        if was_perturbed:
            self.perturbed += 1
        self.total_reward += trace.total_reward
        if trace.final_extended is not None:
            self.resize_counts.append(trace.final_extended.resize_count)
        latency = adaptation_latency(trace)
        if latency is not None:
            self.latencies.append(latency)
        self.labels.append((classify_strategy(trace), was_perturbed))

    @property
    def success_rate(self) -> float:
        return self.successes / self.episodes if self.episodes else 0.0

    @property
    def perturbation_rate(self) -> float:
        return self.perturbed / self.episodes if self.episodes else 0.0

    @property
    def mean_steps_to_goal(self) -> float | None:
        if not self.steps_to_goal:
            return None
        return sum(self.steps_to_goal) / len(self.steps_to_goal)

    @property
    def mean_reward(self) -> float:
        return self.total_reward / self.episodes if self.episodes else 0.0

    @property
    def adaptation_latency_mean(self) -> float | None:
        if not self.latencies:
            return None
        return sum(self.latencies) / len(self.latencies)

    @property
    def resize_count_mean(self) -> float:
        if not self.resize_counts:
            return 0.0
        return sum(self.resize_counts) / len(self.resize_counts)

    @property
    def strategy_counts(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        for label, _ in self.labels:
            counts[label] = counts.get(label, 0) + 1
        return counts

    @property
    def strategy_label(self) -> str:
        """One label for the whole set.

        "hybrid" needs evidence of both behaviors in their home regimes: a
        key unlock in an unperturbed episode and a trigger unlock in a
        perturbed one.  A single consistent behavior keeps its own label.
        """
        key_unperturbed = any(
            label == "key" and not perturbed for label, perturbed in self.labels
        )
        trigger_perturbed = any(
            label == "trigger" and perturbed for label, perturbed in self.labels
        )
        if key_unperturbed and trigger_perturbed:
            return "hybrid"
        seen = {label for label, _ in self.labels if label != "none"}
        if not seen:
            return "none"
        if len(seen) == 1:
            return seen.pop()
        return "mixed"

    def to_dict(self) -> dict:
        return {
            "episodes": self.episodes,
            "success_rate": self.success_rate,
            "mean_steps_to_goal": self.mean_steps_to_goal,
            "mean_reward": self.mean_reward,
            "perturbation_rate": self.perturbation_rate,
            "adaptation_latency": self.adaptation_latency_mean,
            "resize_count_mean": self.resize_count_mean,
            "strategy_label": self.strategy_label,
            "strategy_counts": dict(sorted(self.strategy_counts.items())),
        }


AgentFactory = Callable[[int], Agent]


def run_suite(
    config: DynamicsConfig,
    agent_factories: dict[str, AgentFactory],
    seeds: Sequence[int],
    *,
    forced_prefix: int | None = None,
) -> dict:
    """Benchmark every agent over every seed in two scenarios.

    "base" lets the agent act from the start; "forced" injects a no-op prefix
    of the timeout threshold so the perturbation fires before the agent takes
    over.  Per-agent metrics aggregate both scenarios (that is where a hybrid
    label can emerge) with a per-scenario breakdown alongside.  Factories
    take the episode seed so stochastic agents stay reproducible.
    """
    if not agent_factories:
        raise ValueError("no agents given")
    if not seeds:
        raise ValueError("no seeds given")
    prefix = forced_prefix if forced_prefix is not None else config.timeout_threshold
    scenarios = {"base": 0, "forced": prefix}
    report: dict = {
        "config": config_to_dict(config),
        "seeds": list(seeds),
        "agents": {},
    }
    for name, factory in agent_factories.items():
        overall = Metrics()
        breakdown = {}
        for scenario, noop_prefix in scenarios.items():
            metrics = Metrics()
            for seed in seeds:
                trace = run_episode(
                    config, factory(seed), seed, noop_prefix=noop_prefix
                )
                metrics.add(trace)
                overall.add(trace)
            breakdown[scenario] = {
                "noop_prefix": noop_prefix,
                **metrics.to_dict(),
            }
        report["agents"][name] = {
            "overall": overall.to_dict(),
            "scenarios": breakdown,
        }
    return report


# ---------------------------------------------------------------------------
# Trace serialization
# ---------------------------------------------------------------------------

def _state_to_dict(state: EnvState) -> dict:
    return {
        "agent_pos": [state.agent_pos.x, state.agent_pos.y],
        "agent_dir": int(state.agent_dir),
        "door_locked": state.door_locked,
        "has_key": state.has_key,
        "trigger_color": state.trigger_color,
        "perturbation": state.perturbation,
        "time_step": state.time_step,
    }


def _state_from_dict(data: dict) -> EnvState:
    return EnvState(
        agent_pos=Position(*data["agent_pos"]),
        agent_dir=Direction(data["agent_dir"]),
        door_locked=bool(data["door_locked"]),
        has_key=bool(data["has_key"]),
        trigger_color=data["trigger_color"],
        perturbation=float(data["perturbation"]),
        time_step=int(data["time_step"]),
    )


def _extended_to_dict(ext: ExtendedState) -> dict:
    data = _state_to_dict(
        EnvState(
            agent_pos=ext.agent_pos,
            agent_dir=ext.agent_dir,
            door_locked=ext.door_locked,
            has_key=ext.has_key,
            trigger_color=ext.trigger_color,
            perturbation=ext.perturbation,
            time_step=ext.time_step,
        )
    )
    data.update(
        steps_since_move=ext.steps_since_move,
        current_size=ext.current_size,
        timeout_threshold=ext.timeout_threshold,
        phase=ext.phase.value,
        resize_count=ext.resize_count,
    )
    return data


def _extended_from_dict(data: dict) -> ExtendedState:
    base = _state_from_dict(data)
    return ExtendedState(
        agent_pos=base.agent_pos,
        agent_dir=base.agent_dir,
        door_locked=base.door_locked,
        has_key=base.has_key,
        trigger_color=base.trigger_color,
        perturbation=base.perturbation,
        time_step=base.time_step,
        steps_since_move=int(data["steps_since_move"]),
        current_size=int(data["current_size"]),
        timeout_threshold=int(data["timeout_threshold"]),
        phase=Phase(data["phase"]),
        resize_count=int(data["resize_count"]),
    )


def trace_to_lines(trace: EpisodeTrace) -> list[str]:
    header = {
        "record": "header",
        "schema_version": TRACE_SCHEMA_VERSION,
        "seed": trace.seed,
        "agent": trace.agent_kind,
        "noop_prefix": trace.noop_prefix,
        "config": trace.config,
        "initial_state": _state_to_dict(trace.initial_state),
    }
    lines = [json.dumps(header, separators=(",", ":"))]
    for record in trace.steps:
        lines.append(
            json.dumps(
                {
                    "record": "step",
                    "time_step": record.time_step,
                    "action": int(record.action),
                    "state": _state_to_dict(record.state),
                    "reward": record.reward,
                    "terminated": record.terminated,
                    "truncated": record.truncated,
                    "events": list(record.events),
                },
                separators=(",", ":"),
            )
        )
    footer = {
        "record": "footer",
        "terminated": trace.terminated,
        "truncated": trace.truncated,
        "final_extended": (
            _extended_to_dict(trace.final_extended)
            if trace.final_extended is not None
            else None
        ),
    }
    lines.append(json.dumps(footer, separators=(",", ":")))
    return lines


def write_trace(trace: EpisodeTrace, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for line in trace_to_lines(trace):
            fh.write(line + "\n")


def trace_from_lines(lines: Iterable[str]) -> EpisodeTrace:
    trace: EpisodeTrace | None = None
    saw_footer = False
    line_no = 0
    for line_no, raw in enumerate(lines, start=1):
        raw = raw.strip()
        if not raw:
            continue
        try:
            data = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise TraceParseError(line_no, f"invalid JSON: {exc.msg}")
        if not isinstance(data, dict) or "record" not in data:
            raise TraceParseError(line_no, "missing record type")
        kind = data["record"]
        if kind == "header":
            if trace is not None:
                raise TraceParseError(line_no, "duplicate header")
            if "schema_version" not in data:
                raise TraceParseError(line_no, "header missing schema_version")
            if data["schema_version"] != TRACE_SCHEMA_VERSION:
                raise TraceVersionError(
                    f"unsupported trace schema_version {data['schema_version']!r}"
                )
            try:
                trace = EpisodeTrace(
                    seed=int(data["seed"]),
                    agent_kind=str(data["agent"]),
                    noop_prefix=int(data["noop_prefix"]),
                    config=dict(data["config"]),
                    initial_state=_state_from_dict(data["initial_state"]),
                )
            except (KeyError, TypeError, ValueError) as exc:
                raise TraceParseError(line_no, f"bad header field: {exc}")
        elif kind == "step":
            if trace is None:
                raise TraceParseError(line_no, "step before header")
            if saw_footer:
                raise TraceParseError(line_no, "step after footer")
            try:
                trace.steps.append(
                    StepRecord(
                        time_step=int(data["time_step"]),
                        action=Action(data["action"]),
                        state=_state_from_dict(data["state"]),
                        reward=float(data["reward"]),
                        terminated=bool(data["terminated"]),
                        truncated=bool(data["truncated"]),
                        events=tuple(data.get("events", [])),
                    )
                )
            except (KeyError, TypeError, ValueError) as exc:
                raise TraceParseError(line_no, f"bad step field: {exc}")
        elif kind == "footer":
            if trace is None:
                raise TraceParseError(line_no, "footer before header")
            if saw_footer:
                raise TraceParseError(line_no, "duplicate footer")
            try:
                if data["final_extended"] is not None:
                    trace.final_extended = _extended_from_dict(data["final_extended"])
            except (KeyError, TypeError, ValueError) as exc:
                raise TraceParseError(line_no, f"bad footer field: {exc}")
            saw_footer = True
        else:
            raise TraceParseError(line_no, f"unknown record type {kind!r}")
    if trace is None:
        raise TraceParseError(max(line_no, 1), "missing header")
    if not saw_footer:
        raise TraceParseError(max(line_no, 1), "missing footer")
    return trace


def read_trace(path: str) -> EpisodeTrace:
    with open(path, "r", encoding="utf-8") as fh:
        return trace_from_lines(fh)


# ---------------------------------------------------------------------------
# Replay verification
# ---------------------------------------------------------------------------

def replay_divergence(trace: EpisodeTrace) -> str | None:
    """Re-run the recorded actions; describe the first mismatch, if any.

    Returns None when the deterministic re-run reproduces every recorded
    state, reward, termination flag, and the final extended state exactly.
    """
    config = config_from_dict(trace.config)
    env = AbideEnv(config)
    initial = env.reset(trace.seed)
    if initial != trace.initial_state:
        return f"initial state differs: {initial} != {trace.initial_state}"
    for index, record in enumerate(trace.steps):
        if env.done:
            return f"episode ended early at step {index}"
        transition = env.step(record.action)
        if transition.observation != record.state:
            return (
                f"state differs at time_step {record.time_step}: "
                f"{transition.observation} != {record.state}"
            )
        if transition.reward != record.reward:
            return (
                f"reward differs at time_step {record.time_step}: "
                f"{transition.reward} != {record.reward}"
            )
        if (transition.terminated, transition.truncated) != (
            record.terminated,
            record.truncated,
        ):
            return f"termination flags differ at time_step {record.time_step}"
    if not env.done:
        return "recorded episode ends before termination"
    if trace.final_extended is not None and env.extended_state() != trace.final_extended:
        return "final extended state differs"
    return None
