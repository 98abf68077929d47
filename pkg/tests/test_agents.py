"""Planners, scripted/random policies, and the tabular Q-learner."""

import random

import pytest
from oracles import (
    adaptive_route_oracle,
    pose_distance_oracle,
    reachable_cells,
    repeated_update_oracle,
    solve_length_oracle,
)

from abidegym.agents import (
    AGENT_KINDS,
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
    plan_key_strategy,
    plan_route_clearing_key,
    q_state_key,
    q_update,
    save_qtable,
    train_q_learner,
)
from abidegym.dynamics import AbideEnv, DynamicsConfig
from abidegym.errors import ConfigError, TraceParseError, TraceVersionError
from abidegym.grid import DIR_VEC, Action, Direction, Position, Tile, generate_layout
from abidegym.harness import observe, run_episode

_GLYPHS = {
    ".": Tile.FLOOR,
    "W": Tile.WALL,
    "K": Tile.KEY,
    "D": Tile.DOOR_LOCKED,
    "d": Tile.DOOR_OPEN,
    "G": Tile.GOAL,
    "T": Tile.TRIGGER,
}


def grid_from_text(text):
    rows = [line.strip() for line in text.strip().splitlines()]
    return tuple(tuple(_GLYPHS[ch] for ch in row) for row in rows)


def walk(grid, pos, direction, plan, *, carrying=False):
    """Execute a plan under the movement rules; return the path of cells."""
    x, y = pos
    d = int(direction)
    key_cell = next(
        (
            (cx, cy)
            for cy, row in enumerate(grid)
            for cx, t in enumerate(row)
            if t is Tile.KEY
        ),
        None,
    )
    visited = [(x, y)]
    for action in plan:
        if action is Action.TURN_RIGHT:
            d = (d + 1) % 4
        elif action is Action.TURN_LEFT:
            d = (d + 3) % 4
        elif action is Action.FORWARD:
            dx, dy = DIR_VEC[d]
            nx, ny = x + dx, y + dy
            tile = grid[ny][nx]
            passable = tile in (Tile.FLOOR, Tile.GOAL, Tile.TRIGGER, Tile.DOOR_OPEN)
            if (nx, ny) == key_cell:
                passable = carrying
            assert passable, f"plan walks into {tile} at {(nx, ny)}"
            x, y = nx, ny
            visited.append((x, y))
        elif action is Action.PICKUP:
            dx, dy = DIR_VEC[d]
            assert (x + dx, y + dy) == key_cell and not carrying
            carrying = True
        else:
            raise AssertionError(f"unexpected action {action}")
    return visited, (x, y, d)


# ---------------------------------------------------------------------------
# bfs_plan
# ---------------------------------------------------------------------------

def test_bfs_plan_straight_corridor():
    grid = grid_from_text(
        """
        WWWWWW
        W....W
        WWWWWW
        """
    )
    plan = bfs_plan(grid, Position(1, 1), Direction.EAST, Position(4, 1))
    assert plan == [Action.FORWARD, Action.FORWARD, Action.FORWARD]


def test_bfs_plan_same_cell_is_empty():
    grid = grid_from_text(
        """
        WWW
        W.W
        WWW
        """
    )
    assert bfs_plan(grid, Position(1, 1), Direction.NORTH, Position(1, 1)) == []


def test_bfs_plan_unreachable_is_none():
    grid = grid_from_text(
        """
        WWWWW
        W.W.W
        WWWWW
        """
    )
    assert bfs_plan(grid, Position(1, 1), Direction.EAST, Position(3, 1)) is None


def test_bfs_plan_turn_costs_count():
    grid = grid_from_text(
        """
        WWW
        W.W
        W.W
        WWW
        """
    )
    plan = bfs_plan(grid, Position(1, 1), Direction.EAST, Position(1, 2))
    assert plan == [Action.TURN_RIGHT, Action.FORWARD]


def test_bfs_plan_impassable_target_ends_facing_it():
    grid = grid_from_text(
        """
        WWWWW
        W..DW
        WWWWW
        """
    )
    plan = bfs_plan(grid, Position(1, 1), Direction.EAST, Position(3, 1))
    _, (x, y, d) = walk(grid, Position(1, 1), Direction.EAST, plan)
    dx, dy = DIR_VEC[d]
    assert (x + dx, y + dy) == (3, 1)


def test_bfs_plan_optimal_and_valid_on_generated_layouts():
    rng = random.Random(0)
    for _ in range(60):
        w = generate_layout(rng.randrange(10_000), rng.choice([5, 6, 8, 10]))
        grid = tuple(tuple(row) for row in w.cells)
        floors = [
            (x, y)
            for y, row in enumerate(grid)
            for x, t in enumerate(row)
            if t is Tile.FLOOR
        ]
        target = Position(*rng.choice(floors))
        plan = bfs_plan(grid, w.agent_pos, w.agent_dir, target)
        dist = pose_distance_oracle(grid, w.agent_pos, w.agent_dir, target)
        if dist is None:
            assert plan is None
            assert tuple(target) not in reachable_cells(grid, w.agent_pos)
        else:
            assert plan is not None and len(plan) == dist
            _, (x, y, _) = walk(grid, w.agent_pos, w.agent_dir, plan)
            assert (x, y) == tuple(target)


# ---------------------------------------------------------------------------
# Strategy plan builders
# ---------------------------------------------------------------------------

def test_key_route_avoids_trigger_tile():
    # the trigger sits on the straight path to the key; the key strategy must
    # not learn anything from it and walks around
    grid = grid_from_text(
        """
        WWWWWWWW
        W.T.K.DW
        W......W
        WWWWWWWW
        """
    )
    plan = plan_key_strategy(grid, Position(1, 1), Direction.EAST, False)
    assert plan is not None and plan[-1] is Action.PICKUP
    visited, _ = walk(grid, Position(1, 1), Direction.EAST, plan[:-1])
    assert (2, 1) not in visited


def test_key_strategy_stuck_when_trigger_blocks_the_only_lane():
    grid = grid_from_text(
        """
        WWWWW
        W.WDW
        WTWWW
        W.WWW
        WKWWW
        WWWWW
        """
    )
    assert plan_key_strategy(grid, Position(1, 1), Direction.SOUTH, False) is None


def test_trigger_route_picks_up_blocking_key():
    grid = grid_from_text(
        """
        WWWW
        W.WW
        WKWW
        WTWW
        WWWW
        """
    )
    plan = plan_route_clearing_key(
        grid, Position(1, 1), Direction.SOUTH, False, Position(1, 3)
    )
    assert plan is not None and Action.PICKUP in plan
    _, (x, y, _) = walk(grid, Position(1, 1), Direction.SOUTH, plan)
    assert (x, y) == (1, 3)
    assert len(plan) == adaptive_route_oracle(
        grid, Position(1, 1), Direction.SOUTH, False, Position(1, 3)
    )


def test_clearing_route_matches_oracle_on_perturbed_layouts():
    cfg = DynamicsConfig(resize_enabled=False)
    for seed in range(40):
        env = AbideEnv(cfg)
        env.reset(seed)
        for _ in range(cfg.timeout_threshold):
            env.step(Action.NOOP)
        grid = env.grid_snapshot()
        state = env.env_state()
        plan = plan_route_clearing_key(
            grid, state.agent_pos, state.agent_dir, state.has_key, env.trigger_pos
        )
        dist = adaptive_route_oracle(
            grid, state.agent_pos, state.agent_dir, state.has_key, env.trigger_pos
        )
        assert plan is not None and dist is not None
        assert len(plan) == dist


# ---------------------------------------------------------------------------
# Agents, end to end
# ---------------------------------------------------------------------------

def test_random_agent_seeded_stream():
    cfg = DynamicsConfig()
    env = AbideEnv(cfg)
    env.reset(0)
    obs = observe(env)
    a, b = RandomAgent(3), RandomAgent(3)
    seq_a = [a.act(obs) for _ in range(30)]
    seq_b = [b.act(obs) for _ in range(30)]
    assert seq_a == seq_b
    a.reset()
    assert [a.act(obs) for _ in range(30)] == seq_a
    assert [RandomAgent(4).act(obs) for _ in range(30)] != seq_a


def test_scripted_agent_replays_then_noops():
    cfg = DynamicsConfig()
    env = AbideEnv(cfg)
    env.reset(0)
    obs = observe(env)
    agent = ScriptedAgent([2, 0, 5])
    assert [agent.act(obs) for _ in range(5)] == [
        Action.FORWARD,
        Action.TURN_LEFT,
        Action.TOGGLE,
        Action.NOOP,
        Action.NOOP,
    ]
    agent.reset()
    assert agent.act(obs) is Action.FORWARD


def test_key_planner_matches_full_search_oracle():
    cfg = DynamicsConfig()
    for seed in range(30):
        env = AbideEnv(cfg)
        first = env.reset(seed)
        oracle = solve_length_oracle(env.grid_snapshot(), first.agent_pos, first.agent_dir)
        trace = run_episode(cfg, KeyPlannerAgent(), seed)
        assert trace.outcome == "goal"
        assert trace.length == oracle


def test_hybrid_equals_key_planner_while_rules_hold():
    cfg = DynamicsConfig()
    for seed in range(20):
        key_trace = run_episode(cfg, KeyPlannerAgent(), seed)
        hybrid_trace = run_episode(cfg, HybridAgent(), seed)
        assert [r.action for r in key_trace.steps] == [
            r.action for r in hybrid_trace.steps
        ]


def test_trigger_planner_waits_for_the_flag():
    cfg = DynamicsConfig()
    env = AbideEnv(cfg)
    env.reset(1)
    agent = TriggerPlannerAgent()
    assert agent.act(observe(env)) is Action.NOOP


def test_planner_noops_when_nothing_is_feasible():
    cfg = DynamicsConfig()
    env = AbideEnv(cfg)
    env.reset(1)
    agent = KeyPlannerAgent()
    # erase the key from the snapshot: with a locked door and no key there is
    # no plan, so the agent holds still
    grid = list(list(row) for row in env.grid_snapshot())
    grid[3][1] = Tile.FLOOR
    obs = Observation(env.env_state(), tuple(tuple(r) for r in grid), env.extended_state())
    assert agent.act(obs) is Action.NOOP


def test_make_agent_kinds():
    for kind in AGENT_KINDS:
        agent = make_agent(kind, seed=1)
        assert agent.kind == kind
    with pytest.raises(ValueError):
        make_agent("chess")


# ---------------------------------------------------------------------------
# Q-learning
# ---------------------------------------------------------------------------

def test_qconfig_validation():
    QConfig().validate()
    for bad in (
        QConfig(alpha=0.0),
        QConfig(alpha=1.5),
        QConfig(gamma=-0.1),
        QConfig(epsilon=2.0),
        QConfig(episodes=0),
    ):
        with pytest.raises(ConfigError):
            bad.validate()


def test_q_state_key_fields():
    cfg = DynamicsConfig()
    env = AbideEnv(cfg)
    env.reset(1)
    key = q_state_key(observe(env))
    assert key == (Position(1, 1), 0, False, True, 0.0, 6)


def test_q_update_terminal_matches_closed_form():
    qc = QConfig(alpha=0.25)
    table = {}
    for n in range(1, 12):
        q_update(table, "s", Action.FORWARD, 0.8, None, qc)
        assert table["s"][Action.FORWARD] == pytest.approx(
            repeated_update_oracle(0.8, 0.25, n), abs=1e-12
        )
    # untouched actions stay at zero
    assert table["s"][Action.NOOP] == 0.0


def test_q_update_bootstraps_from_best_next_action():
    qc = QConfig(alpha=0.5, gamma=0.9)
    table = {"next": [0.0, 0.2, 0.6, 0.0, 0.0, 0.0, 0.0]}
    q_update(table, "here", Action.TURN_LEFT, 0.0, "next", qc)
    assert table["here"][Action.TURN_LEFT] == pytest.approx(0.5 * 0.9 * 0.6)
    # unseen next state bootstraps from zero
    q_update(table, "here", Action.TURN_RIGHT, 0.0, "unseen", qc)
    assert table["here"][Action.TURN_RIGHT] == 0.0


def test_q_values_stay_bounded():
    qc = QConfig(alpha=0.3, gamma=0.9)
    bound = 1.0 / (1.0 - qc.gamma)
    rng = random.Random(1)
    table = {}
    states = [f"s{i}" for i in range(6)]
    for _ in range(20_000):
        s = rng.choice(states)
        s_next = rng.choice(states + [None])
        q_update(table, s, Action(rng.randrange(7)), rng.random(), s_next, qc)
    for row in table.values():
        assert all(-1e-9 <= v <= bound + 1e-9 for v in row)


def test_training_is_deterministic():
    cfg = DynamicsConfig(resize_enabled=False)
    qc = QConfig(episodes=40)
    a = train_q_learner(AbideEnv(cfg), qc, env_seed=2, noop_prefix=10, rng_seed=5)
    b = train_q_learner(AbideEnv(cfg), qc, env_seed=2, noop_prefix=10, rng_seed=5)
    assert a.table == b.table
    c = train_q_learner(AbideEnv(cfg), qc, env_seed=2, noop_prefix=10, rng_seed=6)
    assert c.table != a.table


def test_greedy_policy_is_deterministic_and_prefers_best():
    agent = QLearnerAgent({})
    cfg = DynamicsConfig()
    env = AbideEnv(cfg)
    env.reset(1)
    obs = observe(env)
    assert agent.act(obs) is Action.NOOP  # unseen state: hold still
    agent.table[q_state_key(obs)] = [0.0, 0.0, 0.9, 0.0, 0.0, 0.9, 0.0]
    assert agent.act(obs) is Action.FORWARD  # first of the tied maxima


def test_qtable_save_load_round_trip(tmp_path):
    cfg = DynamicsConfig(resize_enabled=False)
    agent = train_q_learner(
        AbideEnv(cfg), QConfig(episodes=30), env_seed=2, noop_prefix=10, rng_seed=0
    )
    path = tmp_path / "table.qt"
    save_qtable(agent.table, str(path))
    assert load_qtable(str(path)) == agent.table


def test_qtable_load_rejects_bad_files(tmp_path):
    bad_header = tmp_path / "a.qt"
    bad_header.write_text("something else\n", encoding="utf-8")
    with pytest.raises(TraceParseError):
        load_qtable(str(bad_header))

    bad_version = tmp_path / "b.qt"
    bad_version.write_text("abidegym-qtable 99\n", encoding="utf-8")
    with pytest.raises(TraceVersionError):
        load_qtable(str(bad_version))

    bad_row = tmp_path / "c.qt"
    bad_row.write_text('abidegym-qtable 1\n{"s": [1]}\n', encoding="utf-8")
    with pytest.raises(TraceParseError) as err:
        load_qtable(str(bad_row))
    assert err.value.line_no == 2
