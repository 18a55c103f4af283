"""Run configuration: one JSON file aggregating every knob, plus overrides.

The JSON mirrors the dataclasses section by section; unknown keys are
rejected so typos fail loudly. Command-line overrides use dotted paths
(``train.total_steps=1000``) with JSON-parsed values.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields

from .channel import ChannelParams
from .mapproc import ObservationSpec, flatten_size
from .network import NetworkConfig
from .scenarios import ScenarioConfig
from .training import TrainConfig
from .world import Mission, RewardParams


class ConfigError(Exception):
    pass


@dataclass(frozen=True)
class EvalConfig:
    episodes: int = 200
    export_trajectories: bool = False

    def __post_init__(self):
        if self.episodes < 0:
            raise ValueError("episodes must be >= 0")


@dataclass(frozen=True)
class RunConfig:
    mission: Mission = Mission.CPP
    map_name: str = "manhattan32"
    seed: int = 0
    output_dir: str = "runs/run"
    observation: ObservationSpec = field(default_factory=ObservationSpec)
    network: NetworkConfig = field(default_factory=NetworkConfig)
    train: TrainConfig = field(default_factory=lambda: TrainConfig(total_steps=500_000))
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    channel: ChannelParams = field(default_factory=ChannelParams)
    rewards: RewardParams = field(default_factory=RewardParams)
    eval: EvalConfig = field(default_factory=EvalConfig)


_SECTIONS = {
    "observation": ObservationSpec,
    "network": NetworkConfig,
    "train": TrainConfig,
    "scenario": ScenarioConfig,
    "channel": ChannelParams,
    "rewards": RewardParams,
    "eval": EvalConfig,
}
_SCALARS = ("mission", "map", "seed", "output_dir")


def _build_section(cls, data: dict, section: str):
    """Construct a config dataclass from JSON data, lists becoming tuples."""
    allowed = {f.name for f in fields(cls)}
    unknown = set(data) - allowed
    if unknown:
        raise ConfigError(f"unknown key(s) in '{section}': {sorted(unknown)}")
    kwargs = {k: tuple(v) if isinstance(v, list) else v for k, v in data.items()}
    try:
        return cls(**kwargs)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"invalid '{section}' section: {exc}") from exc


def config_from_dict(data: dict) -> RunConfig:
    unknown = set(data) - set(_SCALARS) - set(_SECTIONS)
    if unknown:
        raise ConfigError(f"unknown config key(s): {sorted(unknown)}")
    try:
        mission = Mission(data.get("mission", "cpp"))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    sections = {}
    for name, cls in _SECTIONS.items():
        body = data.get(name, {})
        if not isinstance(body, dict):
            raise ConfigError(f"'{name}' must be an object")
        if name == "scenario":
            if "mission" in body:
                raise ConfigError("set mission at the top level, not in 'scenario'")
            body = {"mission": mission, **body}
        if name == "train" and "total_steps" not in body:
            body = {"total_steps": 500_000, **body}
        sections[name] = _build_section(cls, body, name)
    seed = data.get("seed", 0)
    if not isinstance(seed, int):
        raise ConfigError(f"seed must be an integer, got {seed!r}")
    return RunConfig(
        mission=mission,
        map_name=data.get("map", "manhattan32"),
        seed=seed,
        output_dir=data.get("output_dir", "runs/run"),
        **sections,
    )


def config_to_dict(config: RunConfig) -> dict:
    data = {
        "mission": config.mission.value,
        "map": config.map_name,
        "seed": config.seed,
        "output_dir": config.output_dir,
    }
    for name in _SECTIONS:
        body = asdict(getattr(config, name))
        body.pop("mission", None)
        data[name] = {k: list(v) if isinstance(v, tuple) else v
                      for k, v in body.items()}
    return data


def apply_overrides(data: dict, overrides) -> dict:
    """Apply key=value items, dotted keys descending into sections."""
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        key, _, raw = item.partition("=")
        key = key.strip()
        if not key:
            raise ConfigError(f"override {item!r} has an empty key")
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        node = data
        parts = key.split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ConfigError(f"cannot descend into non-object at {part!r}")
        node[parts[-1]] = value
    return data


def load_config(path, overrides=()) -> RunConfig:
    try:
        with open(path) as f:
            data = json.load(f)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    apply_overrides(data, overrides)
    return config_from_dict(data)


def validate_run(config: RunConfig, map_size: int):
    """Cross-section checks that need the loaded map."""
    try:
        flatten_size(config.observation, map_size,
                     n_kernels=config.network.n_kernels,
                     n_conv_layers=config.network.n_conv_layers,
                     kernel_size=config.network.kernel_size)
    except ValueError as exc:
        raise ConfigError(
            f"observation spec infeasible for map size {map_size}: {exc}") from exc
    if config.network.input_channels != 4:
        raise ConfigError("observation stacks carry 4 channels; "
                          f"network.input_channels is {config.network.input_channels}")
