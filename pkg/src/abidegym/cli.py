"""Command-line front end: run episodes, benchmark agents, replay traces, play.

Exit codes: 0 success, 1 usage error, 2 runtime error.  Data goes to stdout,
diagnostics to stderr, so runs can be piped and diffed.
"""

from __future__ import annotations

import argparse
import json
import sys
import time

from .agents import AGENT_KINDS, QLearnerAgent, load_qtable, make_agent
from .config import resolve_config
from .dynamics import AbideEnv, DynamicsConfig, Phase
from .errors import AbideError
from .grid import DIR_GLYPH, Action, render_text
from .harness import (
    EpisodeTrace,
    adaptation_latency,
    classify_strategy,
    perturbation_step,
    read_trace,
    run_episode,
    run_suite,
    write_trace,
)

USAGE_ERROR = 1
RUNTIME_ERROR = 2


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on usage errors; the contract here reserves 2 for
    runtime failures, so route usage problems to exit code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(USAGE_ERROR, f"{self.prog}: error: {message}\n")


def _parse_bool(text: str) -> bool:
    value = text.strip().lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {text!r}")


def _parse_seeds(text: str) -> list[int]:
    """Comma-separated seed values; "a-b" spans an inclusive range."""
    seeds: list[int] = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        lo, sep, hi = part.partition("-")
        try:
            if sep:
                start, stop = int(lo), int(hi)
                if stop < start:
                    raise ValueError
                seeds.extend(range(start, stop + 1))
            else:
                seeds.append(int(part))
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad seed entry {part!r}")
    if not seeds:
        raise argparse.ArgumentTypeError("empty seed list")
    return seeds


_CONFIG_FLAGS = (
    ("--timeout-threshold", int),
    ("--resize-threshold", int),
    ("--resize-increment", int),
    ("--initial-size", int),
    ("--max-size", int),
    ("--trigger-color", str),
    ("--perturbation-enabled", _parse_bool),
    ("--resize-enabled", _parse_bool),
    ("--max-steps-factor", int),
)


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("environment config")
    group.add_argument("--config", metavar="FILE", help="config file to load")
    for flag, kind in _CONFIG_FLAGS:
        group.add_argument(flag, type=kind, default=None)


def _resolve(args) -> DynamicsConfig:
    overrides = {}
    for flag, _ in _CONFIG_FLAGS:
        name = flag.lstrip("-").replace("-", "_")
        value = getattr(args, name)
        if value is not None:
            overrides[name] = value
    return resolve_config(overrides, config_path=args.config)


def _agent_factory(kind: str, qtable_path: str | None):
    if kind == "qlearner":
        table = load_qtable(qtable_path) if qtable_path else {}
        return lambda seed: QLearnerAgent(table)
    return lambda seed: make_agent(kind, seed)


# ---------------------------------------------------------------------------
# run
# ---------------------------------------------------------------------------

def _summary_line(trace: EpisodeTrace) -> str:
    latency = adaptation_latency(trace)
    onset = perturbation_step(trace)
    resizes = trace.final_extended.resize_count if trace.final_extended else 0
    return (
        f"outcome={trace.outcome}"
        f" steps={trace.length}"
        f" reward={trace.total_reward:.4f}"
        f" strategy={classify_strategy(trace)}"
        f" perturbed_at={onset if onset is not None else '-'}"
        f" latency={latency if latency is not None else '-'}"
        f" resizes={resizes}"
    )


def _cmd_run(args) -> int:
    config = _resolve(args)
    agent = _agent_factory(args.agent, args.qtable)(args.seed)
    trace = run_episode(config, agent, args.seed, noop_prefix=args.noop_prefix)
    if args.trace_out:
        write_trace(trace, args.trace_out)
        print(f"wrote {args.trace_out}", file=sys.stderr)
    print(_summary_line(trace))
    return 0


# ---------------------------------------------------------------------------
# bench
# ---------------------------------------------------------------------------

def _cmd_bench(args) -> int:
    config = _resolve(args)
    factories = {}
    for kind in args.agents.split(","):
        kind = kind.strip()
        if not kind:
            continue
        if kind not in AGENT_KINDS:
            raise AbideError(f"unknown agent kind {kind!r}")
        factories[kind] = _agent_factory(kind, args.qtable)
    if not factories:
        raise AbideError("empty agent list")
    report = run_suite(
        config, factories, args.seeds, forced_prefix=args.forced_prefix
    )
    payload = json.dumps(report, indent=2, sort_keys=True)
    if args.report_out:
        with open(args.report_out, "w", encoding="utf-8") as fh:
            fh.write(payload + "\n")
        print(f"wrote {args.report_out}", file=sys.stderr)
    else:
        print(payload)
    return 0


# ---------------------------------------------------------------------------
# replay
# ---------------------------------------------------------------------------

def _render_step(record) -> list[str]:
    state = record.state
    lines = [
        f"step {record.time_step:>5}"
        f"  {record.action.name.lower():<10}"
        f" pos=({state.agent_pos.x},{state.agent_pos.y})"
        f" dir={DIR_GLYPH[state.agent_dir]}"
        f" door={'locked' if state.door_locked else 'open'}"
        f" key={'yes' if state.has_key else 'no'}"
        f" pert={state.perturbation}"
        f" r={record.reward:.4f}"
    ]
    for event in record.events:
        detail = " ".join(
            f"{k}={v}" for k, v in event.items() if k != "type"
        )
        lines.append(f"           ! {event['type']} {detail}".rstrip())
    return lines


def _cmd_replay(args) -> int:
    trace = read_trace(args.trace_in)
    print(
        f"trace seed={trace.seed} agent={trace.agent_kind}"
        f" noop_prefix={trace.noop_prefix}"
        f" size={trace.config['initial_size']} steps={trace.length}"
        f" outcome={trace.outcome}"
    )
    for record in trace.steps:
        for line in _render_step(record):
            print(line)
        if args.step_delay > 0:
            time.sleep(args.step_delay)
    print(_summary_line(trace))
    return 0


# ---------------------------------------------------------------------------
# play
# ---------------------------------------------------------------------------

_KEY_HELP = "arrows: turn/forward   p: pickup   d: drop   t: toggle   .: wait   q: quit"


def _read_key(stdin) -> str:
    ch = stdin.read(1)
    if ch == "\x1b":
        rest = stdin.read(2)
        return ch + rest
    return ch


_KEY_ACTIONS = {
    "\x1b[A": Action.FORWARD,
    "\x1b[C": Action.TURN_RIGHT,
    "\x1b[D": Action.TURN_LEFT,
    "\x1b[B": Action.NOOP,
    "p": Action.PICKUP,
    "d": Action.DROP,
    "t": Action.TOGGLE,
    ".": Action.NOOP,
}


def _status_line(env: AbideEnv) -> str:
    ext = env.extended_state()
    text = (
        f"t={ext.time_step} phase={ext.phase.value}"
        f" idle={ext.steps_since_move}/{ext.timeout_threshold}"
        f" size={ext.current_size}"
        f" key={'yes' if ext.has_key else 'no'}"
        f" door={'locked' if ext.door_locked else 'open'}"
        f" pert={ext.perturbation}"
    )
    if ext.phase is Phase.WARNING:
        return f"\x1b[33m{text}  << warning: rules change soon\x1b[0m"
    if ext.phase is Phase.PERTURBED:
        return f"\x1b[31m{text}  << perturbed: the key no longer works\x1b[0m"
    return text


def play_loop(config: DynamicsConfig, seed: int) -> int:
    """Drive an episode from the keyboard; needs a real terminal."""
    if not sys.stdin.isatty() or not sys.stdout.isatty():
        print("play needs an interactive terminal", file=sys.stderr)
        return USAGE_ERROR
    import termios
    import tty

    env = AbideEnv(config)
    env.reset(seed)
    print(_KEY_HELP)
    print(render_text(env.world))
    print(_status_line(env))
    fd = sys.stdin.fileno()
    saved = termios.tcgetattr(fd)
    last = None
    try:
        while not env.done:
            tty.setraw(fd)
            try:
                key = _read_key(sys.stdin)
            finally:
                termios.tcsetattr(fd, termios.TCSADRAIN, saved)
            if key in ("q", "\x03", "\x04"):
                print("quit")
                return 0
            action = _KEY_ACTIONS.get(key)
            if action is None:
                print(_KEY_HELP)
                continue
            last = env.step(action)
            print(render_text(env.world))
            print(_status_line(env))
            for event in last.events:
                print(f"! {type(event).__name__}")
        outcome = "goal" if last is not None and last.terminated else "truncated"
        print(f"episode over: {outcome}")
    finally:
        termios.tcsetattr(fd, termios.TCSADRAIN, saved)
    return 0


def _cmd_play(args) -> int:
    return play_loop(_resolve(args), args.seed)


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def build_parser() -> _Parser:
    parser = _Parser(prog="abidegym", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one episode and print its summary")
    p_run.add_argument("--agent", choices=AGENT_KINDS, default="hybrid")
    p_run.add_argument("--seed", type=int, default=0)
    p_run.add_argument("--noop-prefix", type=int, default=0)
    p_run.add_argument("--trace-out", metavar="FILE")
    p_run.add_argument("--qtable", metavar="FILE")
    _add_config_flags(p_run)
    p_run.set_defaults(func=_cmd_run)

    p_bench = sub.add_parser("bench", help="benchmark agents over a seed set")
    p_bench.add_argument("--agents", default="random,key,trigger,hybrid")
    p_bench.add_argument("--seeds", type=_parse_seeds, default=list(range(20)))
    p_bench.add_argument("--forced-prefix", type=int, default=None)
    p_bench.add_argument("--report-out", metavar="FILE")
    p_bench.add_argument("--qtable", metavar="FILE")
    _add_config_flags(p_bench)
    p_bench.set_defaults(func=_cmd_bench)

    p_replay = sub.add_parser("replay", help="print a recorded trace step by step")
    p_replay.add_argument("--in", dest="trace_in", required=True, metavar="FILE")
    p_replay.add_argument("--step-delay", type=float, default=0.0)
    p_replay.set_defaults(func=_cmd_replay)

    p_play = sub.add_parser("play", help="drive an episode from the keyboard")
    p_play.add_argument("--seed", type=int, default=0)
    _add_config_flags(p_play)
    p_play.set_defaults(func=_cmd_play)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except AbideError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return RUNTIME_ERROR
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return RUNTIME_ERROR


if __name__ == "__main__":
    sys.exit(main())
