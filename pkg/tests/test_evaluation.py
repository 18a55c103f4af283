"""Rollouts, metrics, trajectory export, grid search, and the benchmark.

A scripted five-step episode is hand-counted down to each record field; the
aggregate paths are then checked for internal consistency (summary vs CSV,
row-count formula, identical-spec benchmark ratio).
"""

import json

import numpy as np
import pytest

from uavgrid.evaluation import (DEFAULT_GLOBAL_SCALINGS, DEFAULT_LOCAL_SIZES,
                                EVAL_COLUMNS, GRID_COLUMNS, EpisodeMetrics,
                                episode_metrics, evaluate,
                                evaluate_random_policy, format_eval_rows,
                                format_grid_rows, greedy_policy, grid_cells,
                                grid_search, random_policy, rollout,
                                run_episodes, speedup_benchmark, summarize,
                                trajectory_header, write_summary)
from uavgrid.mapproc import ObservationSpec
from uavgrid.network import NetworkConfig, QNetwork
from uavgrid.scenarios import ScenarioConfig
from uavgrid.training import TrainConfig
from uavgrid.world import (Action, EnvironmentMap, EpisodeState, Mission,
                           RewardParams, TargetMap)

R = RewardParams()
SPEC = ObservationSpec(local_size=5, global_scaling=3)
TOY_NET = NetworkConfig(n_conv_layers=1, n_kernels=2, kernel_size=3,
                        hidden_sizes=(8,), input_channels=4, time_scale=10.0)


def toy_env(obstacles=()):
    layers = np.zeros((5, 5, 3), dtype=bool)
    layers[0, 0, 0] = True
    layers[0, 1, 0] = True
    for cell in obstacles:
        layers[cell[0], cell[1], 1] = True
        layers[cell[0], cell[1], 2] = True
    return EnvironmentMap(layers, name="toy5")


def cpp_state(env, target_cells, position=(0, 0), battery=10):
    values = np.zeros((5, 5))
    for cell in target_cells:
        values[cell] = 1.0
    return EpisodeState(env=env, target=TargetMap(values, Mission.CPP),
                        position=position, battery=battery, budget=battery)


def scripted_policy(actions):
    it = iter(actions)

    def policy(state):
        return next(it)

    return policy


TOY_SCENARIO = ScenarioConfig(mission=Mission.CPP, movement_budget_range=(4, 8),
                              cpp_shape_count_range=(1, 2),
                              cpp_coverage_fraction_range=(0.1, 0.5))


# --- rollout hand cases ------------------------------------------------------

def test_immediate_land_gives_landed_but_zero_coverage():
    env = toy_env()
    state = cpp_state(env, [(4, 4)])
    metrics, final, records = rollout(scripted_policy([Action.LAND]), state)
    assert metrics.landed and final.landed
    assert metrics.cr == 0.0 and metrics.cral == 0.0
    assert metrics.steps_used == 1
    assert records is None


def test_full_coverage_and_landing_gives_cral_one():
    env = toy_env()
    state = cpp_state(env, [(1, 1), (2, 2)])  # both inside the start FoV
    metrics, _, _ = rollout(scripted_policy([Action.HOVER, Action.LAND]), state)
    assert metrics.cr == 1.0 and metrics.cral == 1.0
    assert metrics.landed and metrics.steps_used == 2


def test_coverage_without_landing_zeroes_cral():
    env = toy_env()
    state = cpp_state(env, [(1, 1)], battery=3)
    metrics, final, _ = rollout(
        scripted_policy([Action.HOVER, Action.HOVER, Action.HOVER]), state)
    assert final.crashed
    assert metrics.cr == 1.0
    assert metrics.cral == 0.0 and not metrics.landed


def test_scripted_episode_records_hand_counted():
    env = toy_env(obstacles=((2, 2),))
    state = cpp_state(env, [(3, 1)], battery=10)
    actions = [Action.EAST, Action.SOUTH, Action.WEST, Action.NORTH, Action.LAND]
    metrics, final, records = rollout(scripted_policy(actions), state,
                                      record=True)
    assert [r["t"] for r in records] == [0, 1, 2, 3, 4]
    assert [r["position"] for r in records] == [
        [0, 1], [1, 1], [1, 0], [0, 0], [0, 0]]
    assert [r["battery"] for r in records] == [9, 8, 7, 6, 5]
    assert [r["action"] for r in records] == [1, 2, 3, 0, 5]
    # (3,1) becomes visible when the agent reaches (1,1)
    assert [r["target_sum"] for r in records] == [1.0, 0.0, 0.0, 0.0, 0.0]
    expected_rewards = [R.r_mov, R.r_mov + R.r_c_scale, R.r_mov, R.r_mov, 0.0]
    assert records[-1]["reward"] == 0.0
    for rec, want in zip(records, expected_rewards):
        assert rec["reward"] == pytest.approx(want)
        assert "comm" not in rec
    assert metrics.cr == 1.0 and metrics.cral == 1.0
    assert metrics.steps_used == 5 and metrics.budget == 10
    assert final.landed


def test_policies_terminate_episodes():
    env = toy_env()
    state = cpp_state(env, [(4, 4)], battery=6)
    metrics, final, _ = rollout(random_policy(np.random.default_rng(0)), state)
    assert final.terminal
    assert metrics.steps_used <= 6

    net = QNetwork(TOY_NET, SPEC, 5, rng=np.random.default_rng(1))
    state = cpp_state(env, [(4, 4)], battery=6)
    metrics, final, _ = rollout(greedy_policy(net), state)
    assert final.terminal


def test_greedy_policy_follows_q_argmax():
    net = QNetwork(TOY_NET, SPEC, 5, rng=np.random.default_rng(2))
    for arr in net.params.values():
        arr[:] = 0.0
    net.params["out.b"][:] = np.array([0.0, 0.0, 0.0, 0.0, 1.0, 0.0])
    env = toy_env()
    state = cpp_state(env, [(4, 4)], battery=3)
    policy = greedy_policy(net)
    assert policy(state) == int(Action.HOVER)


# --- trajectory files ---------------------------------------------------------

def test_cpp_trajectory_file_contents(tmp_path):
    env = toy_env()
    metrics = run_episodes(random_policy(np.random.default_rng(1)), env,
                           TOY_SCENARIO, episodes=2, seed=7,
                           trajectory_dir=tmp_path)
    files = sorted(tmp_path.iterdir())
    assert [f.name for f in files] == ["trajectory_00001.jsonl",
                                       "trajectory_00002.jsonl"]
    for f, m in zip(files, metrics):
        lines = [json.loads(line) for line in f.read_text().splitlines()]
        head, steps = lines[0], lines[1:]
        assert head["type"] == "header"
        assert head["map"] == "toy5"
        assert head["mission"] == "cpp"
        assert head["size"] == 5
        assert head["steps_used"] == m.steps_used == len(steps)
        assert head["cr"] == m.cr
        assert head["landed"] == m.landed
        assert env.landing[tuple(head["start"])]
        initial = len(head["target_cells"])
        uncovered = len(head["uncovered_cells"])
        assert initial > 0 and 0 <= uncovered <= initial
        assert m.cr == pytest.approx((initial - uncovered) / initial)
        for t, rec in enumerate(steps):
            assert rec["t"] == t
            assert set(rec) == {"t", "position", "action", "reward",
                                "battery", "target_sum"}


def test_dh_trajectory_header_devices(tmp_path):
    env = toy_env()
    scenario = ScenarioConfig(mission=Mission.DH, movement_budget_range=(4, 6),
                              dh_device_count_range=(2, 3),
                              dh_data_range=(2.0, 5.0))
    run_episodes(random_policy(np.random.default_rng(2)), env, scenario,
                 episodes=1, seed=11, trajectory_dir=tmp_path)
    lines = [json.loads(line) for line in
             (tmp_path / "trajectory_00001.jsonl").read_text().splitlines()]
    head, steps = lines[0], lines[1:]
    assert head["mission"] == "dh"
    assert 2 <= len(head["devices"]) <= 3
    for dev in head["devices"]:
        assert 2.0 <= dev["data_initial"] <= 5.0
        assert 0.0 <= dev["data_final"] <= dev["data_initial"]
        assert 0 <= dev["color_id"] < 10
    for rec in steps:
        assert "comm" in rec
        assert rec["comm"] is None or 0 <= rec["comm"] < len(head["devices"])


def test_trajectory_header_cpp_cell_lists():
    env = toy_env()
    initial = cpp_state(env, [(1, 1), (3, 3)])
    final_values = np.zeros((5, 5))
    final_values[3, 3] = 1.0
    final = EpisodeState(env=env, target=TargetMap(final_values, Mission.CPP),
                         position=(0, 0), battery=5, budget=10, landed=True,
                         initial_target=2.0, steps_used=5)
    head = trajectory_header(env, initial, final, episode_metrics(final))
    assert sorted(head["target_cells"]) == [[1, 1], [3, 3]]
    assert head["uncovered_cells"] == [[3, 3]]
    assert head["cr"] == 0.5


# --- CSV and summaries ---------------------------------------------------------

def test_format_eval_rows_layout():
    metrics = [EpisodeMetrics(cr=1 / 3, cral=0.0, landed=False, steps_used=7,
                              budget=9),
               EpisodeMetrics(cr=1.0, cral=1.0, landed=True, steps_used=4,
                              budget=9)]
    text = format_eval_rows(metrics)
    lines = text.splitlines()
    assert lines[0] == ",".join(EVAL_COLUMNS)
    first = lines[1].split(",")
    assert first[0] == "1"
    assert float(first[1]) == 1 / 3
    assert first[3] == "0"
    assert lines[2].split(",")[3] == "1"


def test_summarize_means():
    metrics = [EpisodeMetrics(cr=0.5, cral=0.0, landed=False, steps_used=3,
                              budget=5),
               EpisodeMetrics(cr=1.0, cral=1.0, landed=True, steps_used=4,
                              budget=5)]
    summary = summarize(metrics, Mission.CPP, "toy5")
    assert summary["mean_cr"] == pytest.approx(0.75)
    assert summary["mean_cral"] == pytest.approx(0.5)
    assert summary["landed_pct"] == pytest.approx(50.0)
    assert summary["episodes"] == 2
    empty = summarize([], Mission.CPP, "toy5")
    assert empty["mean_cral"] == 0.0 and empty["episodes"] == 0


def test_write_summary_stable_json(tmp_path):
    path = tmp_path / "summary.json"
    write_summary(path, {"b": 1.5, "a": "x"})
    text = path.read_text()
    assert text == '{\n  "a": "x",\n  "b": 1.5\n}\n'


def test_evaluate_summary_consistent_with_csv(tmp_path):
    env = toy_env()
    net = QNetwork(TOY_NET, SPEC, 5, rng=np.random.default_rng(3))
    csv_path = tmp_path / "metrics.csv"
    summary_path = tmp_path / "summary.json"
    summary = evaluate(net, env, TOY_SCENARIO, episodes=8, seed=21,
                       csv_path=csv_path, summary_path=summary_path)
    rows = csv_path.read_text().splitlines()[1:]
    assert len(rows) == 8
    crals = [float(r.split(",")[2]) for r in rows]
    assert summary["mean_cral"] == pytest.approx(float(np.mean(crals)))
    assert json.loads(summary_path.read_text()) == summary


def test_evaluate_deterministic():
    env = toy_env()
    net = QNetwork(TOY_NET, SPEC, 5, rng=np.random.default_rng(4))
    a = evaluate(net, env, TOY_SCENARIO, episodes=5, seed=33)
    b = evaluate(net, env, TOY_SCENARIO, episodes=5, seed=33)
    assert a == b
    c = evaluate_random_policy(env, TOY_SCENARIO, episodes=5, seed=33)
    d = evaluate_random_policy(env, TOY_SCENARIO, episodes=5, seed=33)
    assert c == d


def test_run_episodes_validation():
    env = toy_env()
    assert run_episodes(random_policy(np.random.default_rng(0)), env,
                        TOY_SCENARIO, episodes=0, seed=0) == []
    with pytest.raises(ValueError):
        run_episodes(random_policy(np.random.default_rng(0)), env,
                     TOY_SCENARIO, episodes=-1, seed=0)


# --- grid search ----------------------------------------------------------------

def test_grid_cells_count():
    cells = grid_cells()
    assert len(cells) == len(DEFAULT_LOCAL_SIZES) * len(DEFAULT_GLOBAL_SCALINGS) + 1
    assert cells[-1] == (0, 1)
    assert len(set(cells)) == len(cells)
    small = grid_cells((5,), (2, 3))
    assert small == [(5, 2), (5, 3), (0, 1)]


def test_grid_search_rows_and_csv(tmp_path):
    env = toy_env()
    csv_path = tmp_path / "grid.csv"
    rows = grid_search(env, TOY_SCENARIO, local_sizes=(3, 5),
                       global_scalings=(3,), repeats=2, steps=20,
                       eval_episodes=2, seed=0, net_config=TOY_NET,
                       train_config=TrainConfig(total_steps=20, batch_size=4,
                                                replay_capacity=64),
                       csv_path=csv_path)
    assert len(rows) == 2 * 1 * 2 + 2
    for row in rows:
        assert set(row) == set(GRID_COLUMNS)
        assert row["status"] == "ok"
        assert isinstance(row["flatten_size"], int)
        assert row["steps_per_second"] > 0
    text = csv_path.read_text()
    lines = text.splitlines()
    assert lines[0] == ",".join(GRID_COLUMNS)
    assert len(lines) == len(rows) + 1


def test_grid_search_marks_infeasible_cells():
    env = toy_env()
    rows = grid_search(env, TOY_SCENARIO, local_sizes=(3,),
                       global_scalings=(7,), repeats=1, steps=10,
                       eval_episodes=1, net_config=TOY_NET,
                       train_config=TrainConfig(total_steps=10, batch_size=4,
                                                replay_capacity=32))
    # centered 9 // 7 = 1 shrinks below 1 through the conv stack
    infeasible = [r for r in rows if (r["l"], r["g"]) == (3, 7)]
    assert infeasible[0]["status"] == "infeasible"
    assert infeasible[0]["flatten_size"] == ""
    assert infeasible[0]["mean_cral"] == ""
    ok = [r for r in rows if (r["l"], r["g"]) == (0, 1)]
    assert ok[0]["status"] == "ok"
    with pytest.raises(ValueError):
        grid_search(env, TOY_SCENARIO, repeats=0)


def test_grid_search_workers_match_serial():
    env = toy_env()
    kwargs = dict(local_sizes=(3,), global_scalings=(3,), repeats=2, steps=15,
                  eval_episodes=2, seed=4, net_config=TOY_NET,
                  train_config=TrainConfig(total_steps=15, batch_size=4,
                                           replay_capacity=32))
    serial = grid_search(env, TOY_SCENARIO, workers=1, **kwargs)
    threaded = grid_search(env, TOY_SCENARIO, workers=2, **kwargs)
    stable = [c for c in GRID_COLUMNS if c not in ("steps_per_second",
                                                   "wall_clock")]
    for a, b in zip(serial, threaded):
        for col in stable:
            assert a[col] == b[col], col


def test_format_grid_rows_empty_fields():
    rows = [{"l": 3, "g": 7, "repeat": 0, "flatten_size": "", "mean_cral": "",
             "steps_per_second": "", "wall_clock": "", "status": "infeasible"}]
    text = format_grid_rows(rows)
    assert text.splitlines()[1] == "3,7,0,,,,,infeasible"


# --- benchmark -------------------------------------------------------------------

def test_speedup_identical_specs_near_one():
    env = toy_env()
    ratio = speedup_benchmark(SPEC, SPEC, env, TOY_SCENARIO, steps=300,
                              warmup=30, batch_size=4, fill_transitions=32,
                              net_config=TOY_NET)
    assert abs(ratio - 1.0) <= 0.1


def test_speedup_smaller_global_map_is_faster():
    env = toy_env()
    small = ObservationSpec(local_size=5, global_scaling=3)  # 3x3 global
    large = ObservationSpec(local_size=5, global_scaling=1)  # 9x9 global
    ratio = speedup_benchmark(small, large, env, TOY_SCENARIO, steps=200,
                              warmup=20, batch_size=4, fill_transitions=32,
                              net_config=TOY_NET)
    assert ratio > 1.0


def test_speedup_validation():
    env = toy_env()
    with pytest.raises(ValueError):
        speedup_benchmark(SPEC, SPEC, env, TOY_SCENARIO, steps=0)
