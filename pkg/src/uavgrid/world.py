"""Grid world: map layers, episode state, action dynamics and rewards.

The world is an M x M cell grid with three boolean layers (start/landing
zones, NFZ-union, obstacles). One UAV moves cell by cell under a safety
controller that vetoes transitions into blocked cells, spending one unit of
battery per action. The mission goal lives in a single real-valued target
layer: remaining coverage cells (CPP) or remaining device data mapped to
device cells (DH).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import numpy as np

from .geometry import line_clear

if TYPE_CHECKING:
    from .channel import ChannelModel, IoTDevice

FOV_SIZE = 5  # side length of the camera footprint, cells


class Mission(enum.Enum):
    CPP = "cpp"
    DH = "dh"


class Action(enum.IntEnum):
    """Index order is fixed: Q-value vectors are aligned to it."""

    NORTH = 0
    EAST = 1
    SOUTH = 2
    WEST = 3
    HOVER = 4
    LAND = 5


# (row, col) deltas; north decreases the row index
MOVE_DELTAS = {
    Action.NORTH: (-1, 0),
    Action.EAST: (0, 1),
    Action.SOUTH: (1, 0),
    Action.WEST: (0, -1),
    Action.HOVER: (0, 0),
}


@dataclass(frozen=True)
class RewardParams:
    """Reward components; collection positive, everything else a penalty."""

    r_c_scale: float = 0.4
    r_sc: float = -1.0
    r_mov: float = -0.2
    r_crash: float = -5.0

    def __post_init__(self):
        if self.r_c_scale <= 0:
            raise ValueError("r_c_scale must be positive")
        if self.r_sc >= 0 or self.r_mov >= 0 or self.r_crash >= 0:
            raise ValueError("r_sc, r_mov and r_crash must be negative")


class EnvironmentMap:
    """Static map tensor: layer 0 start/landing, 1 NFZ-union, 2 obstacles."""

    def __init__(self, layers: np.ndarray, cell_size: float = 10.0, name: str = ""):
        layers = np.asarray(layers, dtype=bool)
        if layers.ndim != 3 or layers.shape[2] != 3 or layers.shape[0] != layers.shape[1]:
            raise ValueError(f"layers must be MxMx3, got {layers.shape}")
        if layers.shape[0] < 1:
            raise ValueError("map must have at least one cell")
        if np.any(layers[:, :, 2] & ~layers[:, :, 1]):
            raise ValueError("every obstacle cell must also be in the NFZ-union layer")
        if np.any(layers[:, :, 0] & layers[:, :, 1]):
            raise ValueError("start/landing cells may not be NFZ or obstacle")
        self.layers = layers
        self.cell_size = float(cell_size)
        self.name = name

    @property
    def size(self) -> int:
        return self.layers.shape[0]

    @property
    def landing(self) -> np.ndarray:
        return self.layers[:, :, 0]

    @property
    def blocked(self) -> np.ndarray:
        """NFZ-union layer: cells the UAV may not occupy."""
        return self.layers[:, :, 1]

    @property
    def obstacles(self) -> np.ndarray:
        return self.layers[:, :, 2]

    def on_map(self, position: tuple[int, int]) -> bool:
        r, c = position
        return 0 <= r < self.size and 0 <= c < self.size


@dataclass
class TargetMap:
    """Unified mission-target layer; cell values only ever decrease."""

    values: np.ndarray
    mission: Mission

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if np.any(self.values < 0):
            raise ValueError("target values must be non-negative")

    def total(self) -> float:
        return float(self.values.sum())

    def copy(self) -> "TargetMap":
        return TargetMap(self.values.copy(), self.mission)


@dataclass
class EpisodeState:
    env: EnvironmentMap
    target: TargetMap
    position: tuple[int, int]
    battery: int
    budget: int
    landed: bool = False
    crashed: bool = False
    devices: "list[IoTDevice]" = field(default_factory=list)
    initial_target: float = 0.0
    steps_used: int = 0

    def __post_init__(self):
        if self.initial_target == 0.0:
            self.initial_target = self.target.total()

    @property
    def terminal(self) -> bool:
        return self.landed or self.crashed


@dataclass(frozen=True)
class MissionSummary:
    remaining_target: float
    initial_target: float
    landed: bool
    crashed: bool
    steps_used: int


def mission_state(state: EpisodeState) -> MissionSummary:
    return MissionSummary(
        remaining_target=state.target.total(),
        initial_target=state.initial_target,
        landed=state.landed,
        crashed=state.crashed,
        steps_used=state.steps_used,
    )


def field_of_view(env: EnvironmentMap, position: tuple[int, int]) -> np.ndarray:
    """Boolean MxM mask of cells the camera sees from ``position``.

    A cell is visible when it lies in the FOV_SIZE x FOV_SIZE square around
    the UAV, is on the map, is not itself an obstacle, and the straight line
    from the UAV cell does not pass through an obstacle cell. Obstacles
    therefore cast shadows inside the square: no seeing around corners.
    """
    if not env.on_map(position):
        raise ValueError(f"position {position} outside map")
    m = env.size
    view = np.zeros((m, m), dtype=bool)
    half = FOV_SIZE // 2
    r0, c0 = position
    obstacles = env.obstacles
    for r in range(max(0, r0 - half), min(m, r0 + half + 1)):
        for c in range(max(0, c0 - half), min(m, c0 + half + 1)):
            if obstacles[r, c]:
                continue
            if line_clear(obstacles, (r0, c0), (r, c)):
                view[r, c] = True
    return view


def update_target_cpp(target: TargetMap, view: np.ndarray) -> tuple[TargetMap, int]:
    """Clear viewed cells from a coverage target; returns the cleared count."""
    if target.mission is not Mission.CPP:
        raise ValueError("update_target_cpp requires a CPP target")
    if view.shape != target.values.shape:
        raise ValueError(f"view shape {view.shape} != target shape {target.values.shape}")
    remaining = target.values.astype(bool)
    cleared = int(np.count_nonzero(remaining & view))
    new_values = (remaining & ~view).astype(float)
    return TargetMap(new_values, Mission.CPP), cleared


def step(state: EpisodeState, action: Action,
         channel: "ChannelModel | None" = None,
         rewards: RewardParams = RewardParams()) -> tuple[EpisodeState, float, bool]:
    """Advance the episode by one action.

    Movement into blocked or off-map cells, and landing outside a landing
    zone, are vetoed by the safety controller: the position is kept and the
    veto penalty applies. A successful land ends the episode with no further
    reward terms; exhausting the battery anywhere else is a crash. The
    movement penalty applies on every step that does not end the episode.
    """
    if state.terminal:
        raise ValueError("cannot step a terminal episode")
    if state.battery <= 0:
        raise ValueError("cannot step with an empty battery")
    action = Action(action)

    reward = 0.0
    position = state.position
    landed = False

    if action == Action.LAND:
        if state.env.landing[position]:
            landed = True
        else:
            reward += rewards.r_sc
    else:
        dr, dc = MOVE_DELTAS[action]
        candidate = (position[0] + dr, position[1] + dc)
        if candidate != position:
            if state.env.on_map(candidate) and not state.env.blocked[candidate]:
                position = candidate
            else:
                reward += rewards.r_sc

    battery = state.battery - 1
    target = state.target
    devices = state.devices

    if landed:
        crashed = False
    else:
        if target.mission is Mission.CPP:
            view = field_of_view(state.env, position)
            target, cleared = update_target_cpp(target, view)
            reward += rewards.r_c_scale * cleared
        else:
            if channel is None:
                raise ValueError("DH mission requires a channel model")
            devices = [d.copy() for d in devices]
            _, collected = channel.communication_slot(devices, position)
            values = target.values.copy()
            for dev in devices:
                values[dev.position] = dev.data_remaining
            target = TargetMap(values, Mission.DH)
            reward += rewards.r_c_scale * collected
        crashed = battery <= 0
        if crashed:
            reward += rewards.r_crash
        else:
            reward += rewards.r_mov

    new_state = EpisodeState(
        env=state.env,
        target=target,
        position=position,
        battery=battery,
        budget=state.budget,
        landed=landed,
        crashed=crashed,
        devices=devices,
        initial_target=state.initial_target,
        steps_used=state.steps_used + 1,
    )
    return new_state, reward, new_state.terminal
