"""Monte Carlo evaluation, the (l, g) grid search, and throughput benchmarks.

Evaluation runs greedy-policy episodes on freshly drawn scenarios, reports
per-episode coverage metrics, and can export trajectories as JSON lines: a
single header record with map/mission context followed by one record per
step. The grid search trains one agent per (local size, global scaling,
repeat) triple plus the disabled configuration and tabulates CRAL against
flatten size. The speedup benchmark times gradient steps for two observation
specs on identical scenarios.
"""

from __future__ import annotations

import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .channel import ChannelModel, ChannelParams
from .mapproc import ObservationSpec, assemble_observation, flatten_size
from .network import ACTION_COUNT, NetworkConfig, QNetwork, argmax_policy, init_params
from .scenarios import ScenarioConfig, new_episode
from .training import Adam, Experience, ReplayMemory, TrainConfig, train, train_step
from .world import (EnvironmentMap, EpisodeState, Mission, RewardParams,
                    mission_state, step)

EVAL_COLUMNS = ("episode", "cr", "cral", "landed", "steps_used", "budget")
GRID_COLUMNS = ("l", "g", "repeat", "flatten_size", "mean_cral",
                "steps_per_second", "wall_clock", "status")
DEFAULT_LOCAL_SIZES = (9, 17, 25, 33)
DEFAULT_GLOBAL_SCALINGS = (2, 3, 5, 7)


@dataclass(frozen=True)
class EpisodeMetrics:
    cr: float
    cral: float
    landed: bool
    steps_used: int
    budget: int


def episode_metrics(state: EpisodeState) -> EpisodeMetrics:
    summary = mission_state(state)
    if summary.initial_target > 0:
        cr = (summary.initial_target - summary.remaining_target) / summary.initial_target
    else:
        cr = 0.0
    return EpisodeMetrics(cr=cr, cral=cr if summary.landed else 0.0,
                          landed=summary.landed, steps_used=summary.steps_used,
                          budget=state.budget)


def _comm_device(before, after) -> int | None:
    for i, (b, a) in enumerate(zip(before, after)):
        if a.data_remaining < b.data_remaining:
            return i
    return None


def rollout(policy, state: EpisodeState, channel=None,
            rewards: RewardParams = RewardParams(), record: bool = False):
    """Run one episode under ``policy(observation_state) -> action``.

    Returns (metrics, final state, step records or None). Step records are
    JSON-ready dicts, one per step, positions and battery post-action.
    """
    records = [] if record else None
    t = 0
    while not state.terminal:
        action = policy(state)
        prev_devices = state.devices
        state, reward, _ = step(state, action, channel=channel, rewards=rewards)
        if records is not None:
            rec = {"t": t, "position": list(state.position), "action": int(action),
                   "reward": reward, "battery": state.battery,
                   "target_sum": state.target.total()}
            if state.target.mission is Mission.DH:
                rec["comm"] = _comm_device(prev_devices, state.devices)
            records.append(rec)
        t += 1
    return episode_metrics(state), state, records


def greedy_policy(network: QNetwork):
    spec = network.spec

    def policy(state: EpisodeState) -> int:
        return argmax_policy(network.forward(assemble_observation(state, spec)))

    return policy


def random_policy(rng: np.random.Generator):
    def policy(state: EpisodeState) -> int:
        return int(rng.integers(ACTION_COUNT))

    return policy


def trajectory_header(env: EnvironmentMap, initial: EpisodeState,
                      final: EpisodeState, metrics: EpisodeMetrics) -> dict:
    """First JSONL record: everything a renderer needs besides the steps."""
    head = {
        "type": "header",
        "map": env.name,
        "mission": initial.target.mission.value,
        "size": env.size,
        "start": list(initial.position),
        "budget": initial.budget,
        "steps_used": metrics.steps_used,
        "cr": metrics.cr,
        "landed": metrics.landed,
    }
    if initial.target.mission is Mission.CPP:
        head["target_cells"] = [[int(r), int(c)]
                                for r, c in np.argwhere(initial.target.values > 0)]
        head["uncovered_cells"] = [[int(r), int(c)]
                                   for r, c in np.argwhere(final.target.values > 0)]
    else:
        head["devices"] = [
            {"position": list(d0.position), "data_initial": d0.data_initial,
             "data_final": d1.data_remaining, "color_id": d0.color_id}
            for d0, d1 in zip(initial.devices, final.devices)]
    return head


def export_trajectory(path, header: dict, records: list[dict]):
    with open(path, "w", newline="") as f:
        f.write(json.dumps(header, sort_keys=True) + "\n")
        for rec in records:
            f.write(json.dumps(rec, sort_keys=True) + "\n")


def format_eval_rows(metrics: list[EpisodeMetrics]) -> str:
    lines = [",".join(EVAL_COLUMNS)]
    for i, m in enumerate(metrics, start=1):
        lines.append(f"{i},{m.cr!r},{m.cral!r},{int(m.landed)},{m.steps_used},{m.budget}")
    return "\n".join(lines) + "\n"


def summarize(metrics: list[EpisodeMetrics], mission: Mission, map_name: str) -> dict:
    n = len(metrics)
    return {
        "mission": mission.value,
        "map": map_name,
        "episodes": n,
        "mean_cr": float(np.mean([m.cr for m in metrics])) if n else 0.0,
        "mean_cral": float(np.mean([m.cral for m in metrics])) if n else 0.0,
        "landed_pct": 100.0 * sum(m.landed for m in metrics) / n if n else 0.0,
    }


def write_summary(path, summary: dict):
    with open(path, "w", newline="") as f:
        f.write(json.dumps(summary, sort_keys=True, indent=2) + "\n")


def _episode_channel(scenario_config: ScenarioConfig, env: EnvironmentMap,
                     channel_params, rng) -> ChannelModel | None:
    if scenario_config.mission is not Mission.DH:
        return None
    return ChannelModel(channel_params or ChannelParams(), env, rng)


def run_episodes(policy, env: EnvironmentMap, scenario_config: ScenarioConfig,
                 episodes: int, seed: int, channel_params=None,
                 rewards: RewardParams = RewardParams(),
                 trajectory_dir=None) -> list[EpisodeMetrics]:
    """Seeded scenario draws, one independent RNG pair per episode."""
    if episodes < 0:
        raise ValueError("episodes must be >= 0")
    children = np.random.SeedSequence(seed).spawn(episodes)
    all_metrics = []
    for i, child in enumerate(children, start=1):
        scen_rng, chan_rng = (np.random.default_rng(s) for s in child.spawn(2))
        state = new_episode(env, scenario_config, scen_rng)
        initial = state
        channel = _episode_channel(scenario_config, env, channel_params, chan_rng)
        metrics, final, records = rollout(policy, state, channel=channel,
                                          rewards=rewards,
                                          record=trajectory_dir is not None)
        all_metrics.append(metrics)
        if trajectory_dir is not None:
            header = trajectory_header(env, initial, final, metrics)
            export_trajectory(f"{trajectory_dir}/trajectory_{i:05d}.jsonl",
                              header, records)
    return all_metrics


def evaluate(network: QNetwork, env: EnvironmentMap,
             scenario_config: ScenarioConfig, episodes: int, seed: int,
             channel_params=None, rewards: RewardParams = RewardParams(),
             csv_path=None, summary_path=None, trajectory_dir=None) -> dict:
    """Greedy evaluation over Monte Carlo scenarios; returns the summary dict.

    Optionally writes per-episode metrics CSV, a JSON summary, and one
    trajectory JSONL file per episode.
    """
    metrics = run_episodes(greedy_policy(network), env, scenario_config,
                           episodes, seed, channel_params=channel_params,
                           rewards=rewards, trajectory_dir=trajectory_dir)
    if csv_path is not None:
        with open(csv_path, "w", newline="") as f:
            f.write(format_eval_rows(metrics))
    summary = summarize(metrics, scenario_config.mission, env.name)
    if summary_path is not None:
        write_summary(summary_path, summary)
    return summary


def evaluate_random_policy(env: EnvironmentMap, scenario_config: ScenarioConfig,
                           episodes: int, seed: int, channel_params=None,
                           rewards: RewardParams = RewardParams()) -> dict:
    """Uniform-random-action baseline over the same scenario distribution."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, 1]))
    metrics = run_episodes(random_policy(rng), env, scenario_config, episodes,
                           seed, channel_params=channel_params, rewards=rewards)
    return summarize(metrics, scenario_config.mission, env.name)


def grid_cells(local_sizes=DEFAULT_LOCAL_SIZES,
               global_scalings=DEFAULT_GLOBAL_SCALINGS) -> list[tuple[int, int]]:
    """All (l, g) combinations plus the disabled configuration (0, 1)."""
    cells = [(l, g) for l in local_sizes for g in global_scalings]
    cells.append((0, 1))
    return cells


def _grid_run(env, scenario_config, l, g, repeat, steps, eval_episodes, seed,
              net_config, train_config, channel_params, rewards) -> dict:
    row = {"l": l, "g": g, "repeat": repeat, "flatten_size": "",
           "mean_cral": "", "steps_per_second": "", "wall_clock": "",
           "status": "ok"}
    try:
        spec = ObservationSpec(local_size=l, global_scaling=g)
        row["flatten_size"] = flatten_size(
            spec, env.size, n_kernels=net_config.n_kernels,
            n_conv_layers=net_config.n_conv_layers,
            kernel_size=net_config.kernel_size)
    except ValueError:
        row["status"] = "infeasible"
        return row
    seeds = np.random.SeedSequence([seed, l, g, repeat]).generate_state(2)
    config = replace(train_config, total_steps=steps)
    t0 = time.perf_counter()
    result = train(env, scenario_config, spec, net_config, config,
                   int(seeds[0]), rewards=rewards, channel_params=channel_params)
    wall = time.perf_counter() - t0
    summary = evaluate(result.network, env, scenario_config, eval_episodes,
                       int(seeds[1]), channel_params=channel_params,
                       rewards=rewards)
    row["mean_cral"] = summary["mean_cral"]
    row["steps_per_second"] = result.steps / wall if result.steps else 0.0
    row["wall_clock"] = wall
    return row


def format_grid_rows(rows: list[dict]) -> str:
    lines = [",".join(GRID_COLUMNS)]
    for row in rows:
        parts = []
        for col in GRID_COLUMNS:
            value = row[col]
            parts.append(repr(value) if isinstance(value, float) else str(value))
        lines.append(",".join(parts))
    return "\n".join(lines) + "\n"


def grid_search(env: EnvironmentMap, scenario_config: ScenarioConfig,
                local_sizes=DEFAULT_LOCAL_SIZES,
                global_scalings=DEFAULT_GLOBAL_SCALINGS,
                repeats: int = 3, steps: int = 500_000,
                eval_episodes: int = 200, seed: int = 0,
                net_config: NetworkConfig | None = None,
                train_config: TrainConfig | None = None,
                channel_params=None, rewards: RewardParams = RewardParams(),
                csv_path=None, workers: int = 1) -> list[dict]:
    """Train and evaluate one agent per (l, g, repeat) plus disabled cells.

    Row count is len(local_sizes) * len(global_scalings) * repeats + repeats.
    Infeasible cells (conv output would be empty) become status=infeasible
    rows. Per-cell seeds derive from (seed, l, g, repeat), so results do not
    depend on execution order; workers > 1 runs cells in threads.
    """
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    net_config = net_config or NetworkConfig()
    train_config = train_config or TrainConfig(total_steps=steps)
    tasks = [(l, g, r) for (l, g) in grid_cells(local_sizes, global_scalings)
             for r in range(repeats)]

    def run(task):
        l, g, r = task
        return _grid_run(env, scenario_config, l, g, r, steps, eval_episodes,
                         seed, net_config, train_config, channel_params, rewards)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(run, tasks))
    else:
        rows = [run(t) for t in tasks]
    if csv_path is not None:
        with open(csv_path, "w", newline="") as f:
            f.write(format_grid_rows(rows))
    return rows


def _random_transitions(env: EnvironmentMap, scenario_config: ScenarioConfig,
                        count: int, seed: int, channel_params,
                        rewards: RewardParams) -> list[tuple]:
    """Shared pool of (state, action, reward, next state, terminal) tuples."""
    streams = np.random.SeedSequence([seed, 2]).spawn(3)
    scen_rng, act_rng, chan_rng = (np.random.default_rng(s) for s in streams)
    transitions = []
    while len(transitions) < count:
        state = new_episode(env, scenario_config, scen_rng)
        channel = _episode_channel(scenario_config, env, channel_params, chan_rng)
        while not state.terminal and len(transitions) < count:
            action = int(act_rng.integers(ACTION_COUNT))
            nxt, reward, terminal = step(state, action, channel=channel,
                                         rewards=rewards)
            transitions.append((state, action, reward, nxt, terminal))
            state = nxt
    return transitions


class _StepTimer:
    """Owns one spec's networks and replay memory; times gradient steps."""

    def __init__(self, spec: ObservationSpec, env: EnvironmentMap,
                 transitions: list[tuple], batch_size: int, seed: int,
                 net_config: NetworkConfig):
        self.rng = np.random.default_rng(np.random.SeedSequence([seed, 3]))
        self.online = QNetwork(net_config, spec, env.size,
                               params=init_params(net_config, spec, env.size,
                                                  self.rng))
        self.target = self.online.clone()
        self.config = TrainConfig(total_steps=1, batch_size=batch_size)
        self.optimizer = Adam(self.online.params, self.config.learning_rate)
        self.memory = ReplayMemory(len(transitions))
        for state, action, reward, nxt, terminal in transitions:
            self.memory.add(Experience(assemble_observation(state, spec),
                                       action, reward,
                                       assemble_observation(nxt, spec),
                                       terminal))

    def run(self, steps: int) -> float:
        t0 = time.perf_counter()
        for _ in range(steps):
            train_step(self.memory, self.online, self.target, self.optimizer,
                       self.config, self.rng)
        return time.perf_counter() - t0


def speedup_benchmark(spec_a: ObservationSpec, spec_b: ObservationSpec,
                      env: EnvironmentMap, scenario_config: ScenarioConfig,
                      steps: int = 1000, warmup: int = 20,
                      batch_size: int = 16, fill_transitions: int = 256,
                      chunks: int = 10, seed: int = 0,
                      net_config: NetworkConfig | None = None,
                      channel_params=None,
                      rewards: RewardParams = RewardParams()) -> float:
    """Gradient-step throughput of spec A relative to baseline spec B.

    Both specs train on observations assembled from the same transition pool,
    so only the observation geometry differs. After warm-up, the two specs
    are timed in alternating chunks (so machine-load drift hits both), and
    each spec's rate is the median over its chunks. Returns (steps/s of A)
    divided by (steps/s of B): > 1 means A trains faster.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    chunks = max(1, min(chunks, steps))
    net_config = net_config or NetworkConfig()
    transitions = _random_transitions(env, scenario_config,
                                      max(fill_transitions, batch_size), seed,
                                      channel_params, rewards)
    bench_a = _StepTimer(spec_a, env, transitions, batch_size, seed, net_config)
    bench_b = _StepTimer(spec_b, env, transitions, batch_size, seed, net_config)
    bench_a.run(warmup)
    bench_b.run(warmup)
    chunk_steps = max(1, steps // chunks)
    times_a, times_b = [], []
    for _ in range(chunks):
        times_a.append(bench_a.run(chunk_steps))
        times_b.append(bench_b.run(chunk_steps))
    rate_a = chunk_steps / float(np.median(times_a))
    rate_b = chunk_steps / float(np.median(times_b))
    return rate_a / rate_b
