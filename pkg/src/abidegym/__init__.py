"""AbideGym: a DoorKey gridworld whose rules change while the agent dawdles.

The environment counts steps without progress.  Past a threshold it severs
the key-door pathway and adds a trigger tile that opens the door instead;
past a second threshold it regenerates the world one size larger.  The
package ships the engine, reference agents (planners and a tabular
Q-learner), a benchmark harness with replayable traces, and a CLI.
"""

from .config import ENV_VAR, load_config_file, parse_config_text, resolve_config
from .dynamics import (
    AbideEnv,
    DynamicsConfig,
    EnvState,
    ExtendedState,
    GoalReached,
    PerturbationTriggered,
    Phase,
    Resized,
    Transition,
    Truncated,
    WarningEntered,
    compute_reward,
    config_from_dict,
    config_to_dict,
    copy_config,
    place_trigger,
    reset,
)
from .errors import (
    AbideError,
    ConfigError,
    EpisodeOverError,
    InvalidSizeError,
    PlacementError,
    TraceParseError,
    TraceVersionError,
)
from .agents import (
    AGENT_KINDS,
    Agent,
    HybridAgent,
    KeyPlannerAgent,
    Observation,
    QConfig,
    QLearnerAgent,
    RandomAgent,
    ScriptedAgent,
    TriggerPlannerAgent,
    bfs_plan,
    load_qtable,
    make_agent,
    q_state_key,
    q_update,
    save_qtable,
    train_q_learner,
)
from .grid import (
    Action,
    Direction,
    Position,
    RuleOverrides,
    Tile,
    WorldState,
    derive_seed,
    generate_layout,
    render_text,
    step_world,
    world_hash,
)
from .harness import (
    EpisodeTrace,
    Metrics,
    StepRecord,
    adaptation_latency,
    classify_strategy,
    observe,
    perturbation_step,
    read_trace,
    replay_divergence,
    run_episode,
    run_suite,
    trace_from_lines,
    trace_to_lines,
    write_trace,
)

__version__ = "0.1.0"

__all__ = [
    "ENV_VAR",
    "AGENT_KINDS",
    "AbideEnv",
    "AbideError",
    "Action",
    "Agent",
    "ConfigError",
    "Direction",
    "DynamicsConfig",
    "EnvState",
    "EpisodeOverError",
    "EpisodeTrace",
    "ExtendedState",
    "GoalReached",
    "HybridAgent",
    "InvalidSizeError",
    "KeyPlannerAgent",
    "Metrics",
    "Observation",
    "PerturbationTriggered",
    "Phase",
    "PlacementError",
    "Position",
    "QConfig",
    "QLearnerAgent",
    "RandomAgent",
    "Resized",
    "RuleOverrides",
    "ScriptedAgent",
    "StepRecord",
    "Tile",
    "TraceParseError",
    "TraceVersionError",
    "Transition",
    "TriggerPlannerAgent",
    "Truncated",
    "WarningEntered",
    "WorldState",
    "adaptation_latency",
    "bfs_plan",
    "classify_strategy",
    "compute_reward",
    "config_from_dict",
    "config_to_dict",
    "copy_config",
    "derive_seed",
    "generate_layout",
    "load_config_file",
    "load_qtable",
    "make_agent",
    "observe",
    "parse_config_text",
    "perturbation_step",
    "place_trigger",
    "q_state_key",
    "q_update",
    "read_trace",
    "render_text",
    "replay_divergence",
    "reset",
    "resolve_config",
    "run_episode",
    "run_suite",
    "save_qtable",
    "step_world",
    "trace_from_lines",
    "trace_to_lines",
    "train_q_learner",
    "world_hash",
    "write_trace",
]
