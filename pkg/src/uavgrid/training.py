"""Double-DQN training: replay memory, targets, optimizer, and the step loop.

The replay buffer keeps fixed-capacity ring arrays of observation stacks and
evicts FIFO. Batches are drawn uniformly with replacement, except that the
most recent transition is always included. Targets bootstrap with the online
network selecting the action and the target network valuing it; terminal
transitions never bootstrap.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .mapproc import Observation, ObservationSpec, assemble_observation
from .network import (ACTION_COUNT, NetworkConfig, QNetwork, init_params,
                      save_checkpoint, softmax_policy)
from .world import EpisodeState, Mission, RewardParams, mission_state, step

LOG_COLUMNS = ("step", "episode", "reward_sum", "cr", "cral", "landed",
               "loss_mean", "temperature")


@dataclass(frozen=True)
class TrainConfig:
    total_steps: int
    gamma: float = 0.95
    tau: float = 0.005
    batch_size: int = 128
    replay_capacity: int = 50_000
    learning_rate: float = 3e-4
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    temperature_start: float = 0.1
    temperature_end: float = 0.01
    temperature_decay_steps: int | None = None  # None: half of total_steps
    train_every: int = 1
    checkpoint_every: int | None = None

    def __post_init__(self):
        if self.total_steps < 0:
            raise ValueError("total_steps must be >= 0")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError(f"gamma must lie in [0, 1], got {self.gamma}")
        if not 0.0 < self.tau <= 1.0:
            raise ValueError(f"tau must lie in (0, 1], got {self.tau}")
        if self.batch_size < 1 or self.replay_capacity < 1:
            raise ValueError("batch_size and replay_capacity must be positive")
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be non-negative")
        if self.temperature_start <= 0 or self.temperature_end <= 0:
            raise ValueError("temperatures must be positive")
        if self.train_every < 1:
            raise ValueError("train_every must be >= 1")

    def temperature_at(self, step_index: int) -> float:
        """Log-linear anneal from start to end over the decay window."""
        decay = self.temperature_decay_steps
        if decay is None:
            decay = self.total_steps // 2
        if decay <= 0:
            return self.temperature_end
        frac = min(step_index, decay) / decay
        return self.temperature_start * (self.temperature_end /
                                         self.temperature_start) ** frac

    def to_dict(self) -> dict:
        return {
            "total_steps": self.total_steps, "gamma": self.gamma, "tau": self.tau,
            "batch_size": self.batch_size, "replay_capacity": self.replay_capacity,
            "learning_rate": self.learning_rate,
            "adam_beta1": self.adam_beta1, "adam_beta2": self.adam_beta2,
            "temperature_start": self.temperature_start,
            "temperature_end": self.temperature_end,
            "temperature_decay_steps": self.temperature_decay_steps,
            "train_every": self.train_every,
            "checkpoint_every": self.checkpoint_every,
        }


@dataclass
class Experience:
    """One transition in compressed observation form."""

    observation: Observation
    action: int
    reward: float
    next_observation: Observation
    terminal: bool


@dataclass
class Batch:
    local: np.ndarray | None
    global_: np.ndarray
    times: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_local: np.ndarray | None
    next_global: np.ndarray
    next_times: np.ndarray
    terminals: np.ndarray

    def __len__(self) -> int:
        return len(self.actions)


class ReplayMemory:
    """Fixed-capacity FIFO store of transitions as ring arrays."""

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self.size = 0
        self._next = 0
        self.latest: Experience | None = None
        self._arrays: dict[str, np.ndarray] | None = None

    def __len__(self) -> int:
        return self.size

    def _allocate(self, exp: Experience):
        arrays = {}
        local = exp.observation.local_stack()
        if local is not None:
            arrays["local"] = np.empty((self.capacity,) + local.shape, dtype=np.float32)
            arrays["next_local"] = np.empty_like(arrays["local"])
        g = exp.observation.global_stack()
        arrays["global"] = np.empty((self.capacity,) + g.shape, dtype=np.float32)
        arrays["next_global"] = np.empty_like(arrays["global"])
        arrays["times"] = np.empty(self.capacity, dtype=np.float32)
        arrays["next_times"] = np.empty(self.capacity, dtype=np.float32)
        arrays["actions"] = np.empty(self.capacity, dtype=np.int64)
        arrays["rewards"] = np.empty(self.capacity, dtype=np.float32)
        arrays["terminals"] = np.empty(self.capacity, dtype=bool)
        self._arrays = arrays

    def add(self, exp: Experience):
        if self._arrays is None:
            self._allocate(exp)
        a = self._arrays
        i = self._next
        local = exp.observation.local_stack()
        if ("local" in a) != (local is not None):
            raise ValueError("transition local-map presence mismatches the buffer")
        if local is not None:
            a["local"][i] = local
            a["next_local"][i] = exp.next_observation.local_stack()
        a["global"][i] = exp.observation.global_stack()
        a["next_global"][i] = exp.next_observation.global_stack()
        a["times"][i] = exp.observation.flying_time
        a["next_times"][i] = exp.next_observation.flying_time
        a["actions"][i] = exp.action
        a["rewards"][i] = exp.reward
        a["terminals"][i] = exp.terminal
        self._next = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)
        self.latest = exp

    def gather(self, indices: np.ndarray) -> Batch:
        a = self._arrays
        return Batch(
            local=a["local"][indices] if "local" in a else None,
            global_=a["global"][indices],
            times=a["times"][indices],
            actions=a["actions"][indices],
            rewards=a["rewards"][indices],
            next_local=a["next_local"][indices] if "local" in a else None,
            next_global=a["next_global"][indices],
            next_times=a["next_times"][indices],
            terminals=a["terminals"][indices],
        )


def _append_experience(batch: Batch, exp: Experience) -> Batch:
    local = exp.observation.local_stack()

    def cat(stack, extra):
        return np.concatenate([stack, np.asarray(extra)[None].astype(stack.dtype)])

    return Batch(
        local=cat(batch.local, local) if batch.local is not None else None,
        global_=cat(batch.global_, exp.observation.global_stack()),
        times=cat(batch.times, exp.observation.flying_time),
        actions=cat(batch.actions, exp.action),
        rewards=cat(batch.rewards, exp.reward),
        next_local=(cat(batch.next_local, exp.next_observation.local_stack())
                    if batch.next_local is not None else None),
        next_global=cat(batch.next_global, exp.next_observation.global_stack()),
        next_times=cat(batch.next_times, exp.next_observation.flying_time),
        terminals=cat(batch.terminals, exp.terminal),
    )


def replay_sample(memory: ReplayMemory, batch_size: int, latest: Experience,
                  rng: np.random.Generator) -> Batch:
    """batch_size - 1 uniform draws with replacement, plus always the latest."""
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    if len(memory) == 0:
        raise ValueError("cannot sample from an empty memory")
    indices = rng.integers(0, len(memory), size=batch_size - 1)
    return _append_experience(memory.gather(indices), latest)


def double_q_targets(rewards: np.ndarray, terminals: np.ndarray,
                     q_next_online: np.ndarray, q_next_target: np.ndarray,
                     gamma: float) -> np.ndarray:
    """One-step targets: online net picks a', target net values it."""
    selected = np.argmax(q_next_online, axis=1)
    bootstrap = q_next_target[np.arange(len(selected)), selected]
    return rewards + gamma * np.where(terminals, 0.0, bootstrap)


def td_target(batch: Batch, online: QNetwork, target: QNetwork,
              gamma: float) -> np.ndarray:
    q_next_online, _ = online.forward_batch(batch.next_local, batch.next_global,
                                            batch.next_times)
    q_next_target, _ = target.forward_batch(batch.next_local, batch.next_global,
                                            batch.next_times)
    return double_q_targets(batch.rewards, batch.terminals,
                            q_next_online, q_next_target, gamma)


class Adam:
    """Adaptive moment estimation over a named parameter dict, in place."""

    def __init__(self, params: dict[str, np.ndarray], learning_rate: float = 3e-4,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}

    def apply(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]):
        self.t += 1
        scale = self.learning_rate * math.sqrt(1.0 - self.beta2 ** self.t) / (
            1.0 - self.beta1 ** self.t)
        for name, p in params.items():
            g = grads[name]
            m = self.m[name]
            v = self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * np.square(g)
            p -= scale * m / (np.sqrt(v) + self.eps)


def soft_update(target_params: dict[str, np.ndarray],
                online_params: dict[str, np.ndarray], tau: float):
    """In-place blend of the target toward the online parameters."""
    if not 0.0 < tau <= 1.0:
        raise ValueError(f"tau must lie in (0, 1], got {tau}")
    for name, p in target_params.items():
        target_params[name] = (1.0 - tau) * p + tau * online_params[name]


def batch_loss(online: QNetwork, batch: Batch, targets: np.ndarray,
               need_grads: bool = True):
    """Mean squared TD error and, optionally, its parameter gradients."""
    q, cache = online.forward_batch(batch.local, batch.global_, batch.times,
                                    need_cache=need_grads)
    n = len(batch)
    picked = q[np.arange(n), batch.actions]
    err = picked - np.asarray(targets, dtype=picked.dtype)
    loss = float(np.mean(np.square(err)))
    if not need_grads:
        return loss, None
    dq = np.zeros_like(q)
    dq[np.arange(n), batch.actions] = 2.0 * err / n
    return loss, online.backward(cache, dq)


def train_step(memory: ReplayMemory, online: QNetwork, target: QNetwork,
               optimizer: Adam, config: TrainConfig, rng: np.random.Generator,
               latest: Experience | None = None) -> float:
    """One gradient step on a replay batch, then a soft target update."""
    if latest is None:
        latest = memory.latest
    if latest is None:
        raise ValueError("cannot train from an empty memory")
    batch = replay_sample(memory, config.batch_size, latest, rng)
    targets = td_target(batch, online, target, config.gamma)
    loss, grads = batch_loss(online, batch, targets)
    if not math.isfinite(loss):
        raise RuntimeError(
            f"non-finite loss {loss}: reward range "
            f"[{batch.rewards.min()}, {batch.rewards.max()}], "
            f"target range [{np.min(targets)}, {np.max(targets)}]")
    optimizer.apply(online.params, grads)
    soft_update(target.params, online.params, config.tau)
    return loss


@dataclass
class TrainResult:
    network: QNetwork
    target_network: QNetwork
    rows: list[dict]
    steps: int
    episodes: int


def format_log_rows(rows: list[dict]) -> str:
    """Stable CSV text for training logs; floats via repr for reproducibility."""
    lines = [",".join(LOG_COLUMNS)]
    for row in rows:
        parts = []
        for col in LOG_COLUMNS:
            value = row[col]
            if isinstance(value, bool):
                parts.append(str(int(value)))
            elif isinstance(value, float):
                parts.append(repr(value))
            else:
                parts.append(str(value))
        lines.append(",".join(parts))
    return "\n".join(lines) + "\n"


def train(env, scenario_config, obs_spec: ObservationSpec,
          net_config: NetworkConfig, config: TrainConfig, seed: int,
          rewards: RewardParams = RewardParams(),
          channel_params=None,
          log_path=None, checkpoint_path=None,
          checkpoint_extra: dict | None = None) -> TrainResult:
    """Run the training loop for config.total_steps environment steps.

    All randomness flows from ``seed`` through separate child streams for
    initialization, scenario draws, the policy, replay sampling, and the
    radio channel, so a fixed seed reproduces the log byte for byte.
    Episodes cut short by the step budget are not logged.
    """
    from .channel import ChannelModel, ChannelParams
    from .scenarios import new_episode

    streams = np.random.SeedSequence(seed).spawn(5)
    init_rng, scenario_rng, policy_rng, replay_rng, channel_rng = (
        np.random.default_rng(s) for s in streams)

    online = QNetwork(net_config, obs_spec, env.size,
                      params=init_params(net_config, obs_spec, env.size, init_rng))
    target = online.clone()
    optimizer = Adam(online.params, config.learning_rate,
                     config.adam_beta1, config.adam_beta2)
    memory = ReplayMemory(config.replay_capacity)
    channel = None
    if scenario_config.mission is Mission.DH:
        channel = ChannelModel(channel_params or ChannelParams(), env, channel_rng)

    rows: list[dict] = []
    step_count = 0
    episode = 0
    while step_count < config.total_steps:
        episode += 1
        state = new_episode(env, scenario_config, scenario_rng)
        obs = assemble_observation(state, obs_spec)
        reward_sum = 0.0
        losses: list[float] = []
        completed = False
        while True:
            temperature = config.temperature_at(step_count)
            probs = softmax_policy(online.forward(obs), temperature)
            action = int(policy_rng.choice(ACTION_COUNT, p=probs))
            state, reward, terminal = step(state, action, channel=channel,
                                           rewards=rewards)
            next_obs = assemble_observation(state, obs_spec)
            memory.add(Experience(obs, action, reward, next_obs, terminal))
            obs = next_obs
            reward_sum += reward
            step_count += 1
            if len(memory) >= config.batch_size and \
                    step_count % config.train_every == 0:
                losses.append(train_step(memory, online, target, optimizer,
                                         config, replay_rng))
            if checkpoint_path is not None and config.checkpoint_every and \
                    step_count % config.checkpoint_every == 0:
                save_checkpoint(checkpoint_path, online,
                                _checkpoint_meta(checkpoint_extra, config,
                                                 step_count, episode))
            if terminal:
                completed = True
                break
            if step_count >= config.total_steps:
                break
        if completed:
            summary = mission_state(state)
            cr = ((summary.initial_target - summary.remaining_target)
                  / summary.initial_target) if summary.initial_target > 0 else 0.0
            cral = cr if summary.landed else 0.0
            rows.append({
                "step": step_count,
                "episode": episode,
                "reward_sum": reward_sum,
                "cr": cr,
                "cral": cral,
                "landed": summary.landed,
                "loss_mean": float(np.mean(losses)) if losses else float("nan"),
                "temperature": config.temperature_at(step_count),
            })

    if log_path is not None:
        with open(log_path, "w", newline="") as f:
            f.write(format_log_rows(rows))
    if checkpoint_path is not None:
        save_checkpoint(checkpoint_path, online,
                        _checkpoint_meta(checkpoint_extra, config,
                                         step_count, episode))
    return TrainResult(network=online, target_network=target, rows=rows,
                       steps=step_count, episodes=len(rows))


def _checkpoint_meta(extra: dict | None, config: TrainConfig,
                     step_count: int, episode: int) -> dict:
    meta = dict(extra or {})
    meta.update({"train_config": config.to_dict(), "step": step_count,
                 "episode": episode})
    return meta
