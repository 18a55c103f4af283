"""Grid-world UAV path planning: simulator, DDQN training, and evaluation.

A UAV moves on a square grid with no-fly zones and obstacles, spending one
battery unit per step, and must finish its mission (covering target cells
with its camera, or harvesting data from IoT devices over a shadowed radio
link) before landing in a designated zone. Agents observe the map through a
centered global-local pipeline and are trained with a double deep Q-network
built on plain numpy.
"""

from .channel import (DEFAULT_REFERENCE_SNR_DB, ChannelModel, ChannelParams,
                      IoTDevice, communication_slot, line_of_sight, link_rate)
from .config import ConfigError, EvalConfig, RunConfig, load_config, validate_run
from .evaluation import (EpisodeMetrics, episode_metrics, evaluate,
                         evaluate_random_policy, grid_cells, grid_search,
                         rollout, speedup_benchmark)
from .geometry import line_clear, supercover_cells
from .mapproc import (Observation, ObservationSpec, assemble_observation,
                      center_map, centered_size, flatten_size, global_map,
                      local_map)
from .network import (ACTION_COUNT, CheckpointError, NetworkConfig, QNetwork,
                      argmax_policy, init_params, load_checkpoint,
                      parameter_count, param_shapes, save_checkpoint,
                      softmax_policy)
from .scenarios import (BUNDLED_MAPS, MapFormatError, ScenarioConfig,
                        generate_cpp_target, generate_dh_devices, load_map,
                        map_to_dict, new_episode, parse_map)
from .training import (Adam, Batch, Experience, ReplayMemory, TrainConfig,
                       TrainResult, double_q_targets, replay_sample,
                       soft_update, td_target, train, train_step)
from .world import (Action, EnvironmentMap, EpisodeState, Mission,
                    MissionSummary, RewardParams, TargetMap, field_of_view,
                    mission_state, step, update_target_cpp)

__version__ = "0.1.0"

__all__ = [
    "ACTION_COUNT", "Action", "Adam", "BUNDLED_MAPS", "Batch", "ChannelModel",
    "ChannelParams", "CheckpointError", "ConfigError",
    "DEFAULT_REFERENCE_SNR_DB", "EnvironmentMap", "EpisodeMetrics",
    "EpisodeState", "EvalConfig", "Experience", "IoTDevice", "MapFormatError",
    "Mission", "MissionSummary", "NetworkConfig", "Observation",
    "ObservationSpec", "QNetwork", "ReplayMemory", "RewardParams", "RunConfig",
    "ScenarioConfig", "TargetMap", "TrainConfig", "TrainResult",
    "argmax_policy", "assemble_observation", "center_map", "centered_size",
    "communication_slot", "double_q_targets", "episode_metrics", "evaluate",
    "evaluate_random_policy", "field_of_view", "flatten_size",
    "generate_cpp_target", "generate_dh_devices", "global_map", "grid_cells",
    "grid_search", "init_params", "line_clear", "line_of_sight", "link_rate",
    "load_checkpoint", "load_config", "load_map", "local_map", "map_to_dict",
    "mission_state", "new_episode", "param_shapes", "parameter_count",
    "parse_map", "replay_sample", "rollout", "save_checkpoint",
    "soft_update", "softmax_policy", "speedup_benchmark", "step", "td_target",
    "train", "train_step", "update_target_cpp", "validate_run",
]
