"""Map loading and randomized mission generation.

Maps are JSON grids of single-character cell codes. Missions are drawn per
episode: CPP targets as a union of random rectangles and ellipses rejected
until they cover the requested fraction of non-obstacle area, DH devices
uniformly over eligible cells with uniform data loads.
"""

from __future__ import annotations

import importlib.resources
import json
from dataclasses import dataclass

import numpy as np

from .channel import IoTDevice
from .world import EnvironmentMap, EpisodeState, Mission, TargetMap

CELL_CODES = {".": (0, 0, 0), "L": (1, 0, 0), "N": (0, 1, 0), "#": (0, 1, 1)}
BUNDLED_MAPS = ("manhattan32", "urban50")


class MapFormatError(ValueError):
    pass


@dataclass(frozen=True)
class ScenarioConfig:
    mission: Mission = Mission.CPP
    movement_budget_range: tuple[int, int] = (50, 150)
    cpp_shape_count_range: tuple[int, int] = (3, 8)
    cpp_coverage_fraction_range: tuple[float, float] = (0.2, 0.5)
    dh_device_count_range: tuple[int, int] = (3, 10)
    dh_data_range: tuple[float, float] = (5.0, 20.0)

    def __post_init__(self):
        for name in ("movement_budget_range", "cpp_shape_count_range",
                     "dh_device_count_range"):
            lo, hi = getattr(self, name)
            if lo > hi or lo < 1:
                raise ValueError(f"{name} must be a non-empty positive range, got {lo}..{hi}")
        lo, hi = self.cpp_coverage_fraction_range
        if not (0 < lo <= hi < 1):
            raise ValueError(f"coverage fraction range must lie inside (0,1), got {lo}..{hi}")
        lo, hi = self.dh_data_range
        if not (0 < lo <= hi):
            raise ValueError(f"dh_data_range must be positive, got {lo}..{hi}")


def parse_map(data: dict, name: str = "") -> EnvironmentMap:
    grid = data.get("grid")
    if not isinstance(grid, list) or not grid:
        raise MapFormatError("map JSON needs a non-empty 'grid' array")
    size = data.get("size", len(grid))
    if len(grid) != size or any(len(row) != size for row in grid):
        raise MapFormatError(f"grid must be square with side {size}")
    layers = np.zeros((size, size, 3), dtype=bool)
    for r, row in enumerate(grid):
        for c, code in enumerate(row):
            if code not in CELL_CODES:
                raise MapFormatError(f"unknown cell code {code!r} at ({r}, {c})")
            layers[r, c] = CELL_CODES[code]
    if not layers[:, :, 0].any():
        raise MapFormatError("map has no start/landing cell")
    try:
        return EnvironmentMap(layers, cell_size=float(data.get("cell_size_m", 10.0)),
                              name=data.get("name", name))
    except ValueError as exc:
        raise MapFormatError(str(exc)) from exc


def load_map(path_or_name: str) -> EnvironmentMap:
    """Load a map JSON from a path, or one of the bundled maps by name."""
    if path_or_name in BUNDLED_MAPS:
        resource = importlib.resources.files("uavgrid") / "maps" / f"{path_or_name}.json"
        data = json.loads(resource.read_text())
        return parse_map(data, name=path_or_name)
    with open(path_or_name) as f:
        data = json.load(f)
    return parse_map(data, name=str(path_or_name))


def map_to_dict(env: EnvironmentMap) -> dict:
    """Inverse of parse_map, for exporting bundled maps."""
    rows = []
    for r in range(env.size):
        row = []
        for c in range(env.size):
            if env.obstacles[r, c]:
                row.append("#")
            elif env.blocked[r, c]:
                row.append("N")
            elif env.landing[r, c]:
                row.append("L")
            else:
                row.append(".")
        rows.append(row)
    return {"name": env.name, "size": env.size, "cell_size_m": env.cell_size, "grid": rows}


def _stamp_rectangle(mask: np.ndarray, rng: np.random.Generator):
    m = mask.shape[0]
    max_side = max(2, int(round(m * 0.5)))
    min_side = max(1, int(round(m * 0.15)))
    h = int(rng.integers(min_side, max_side + 1))
    w = int(rng.integers(min_side, max_side + 1))
    r = int(rng.integers(0, m - h + 1)) if m > h else 0
    c = int(rng.integers(0, m - w + 1)) if m > w else 0
    mask[r:r + h, c:c + w] = True


def _stamp_ellipse(mask: np.ndarray, rng: np.random.Generator):
    m = mask.shape[0]
    max_half = max(1.0, m * 0.25)
    min_half = max(0.5, m * 0.08)
    a = rng.uniform(min_half, max_half)
    b = rng.uniform(min_half, max_half)
    cy = rng.uniform(0, m - 1)
    cx = rng.uniform(0, m - 1)
    rr, cc = np.mgrid[0:m, 0:m]
    mask |= ((rr - cy) / a) ** 2 + ((cc - cx) / b) ** 2 <= 1.0


def generate_cpp_target(env: EnvironmentMap, config: ScenarioConfig,
                        rng: np.random.Generator, max_attempts: int = 1000) -> TargetMap:
    """Random coverage target: overlaid shapes, rejected wholesale until the
    covered fraction of non-obstacle area falls inside the configured range."""
    if config.mission is not Mission.CPP:
        raise ValueError("generate_cpp_target requires a CPP scenario")
    available = ~env.obstacles
    available_count = int(available.sum())
    lo, hi = config.cpp_coverage_fraction_range
    for _ in range(max_attempts):
        mask = np.zeros((env.size, env.size), dtype=bool)
        n_shapes = int(rng.integers(config.cpp_shape_count_range[0],
                                    config.cpp_shape_count_range[1] + 1))
        for _ in range(n_shapes):
            if rng.random() < 0.5:
                _stamp_rectangle(mask, rng)
            else:
                _stamp_ellipse(mask, rng)
        mask &= available
        fraction = mask.sum() / available_count
        if lo <= fraction <= hi:
            return TargetMap(mask.astype(float), Mission.CPP)
    raise RuntimeError(
        f"no target hit coverage fraction [{lo}, {hi}] in {max_attempts} attempts")


DEVICE_COLOR_COUNT = 10


def generate_dh_devices(env: EnvironmentMap, config: ScenarioConfig,
                        rng: np.random.Generator) -> list[IoTDevice]:
    """Devices on distinct cells that are neither obstacles nor landing zones."""
    if config.mission is not Mission.DH:
        raise ValueError("generate_dh_devices requires a DH scenario")
    eligible = ~env.obstacles & ~env.landing
    cells = np.argwhere(eligible)
    count = int(rng.integers(config.dh_device_count_range[0],
                             config.dh_device_count_range[1] + 1))
    if count > len(cells):
        raise ValueError(f"{count} devices requested but only {len(cells)} eligible cells")
    chosen = rng.choice(len(cells), size=count, replace=False)
    devices = []
    for i, cell_idx in enumerate(chosen):
        data = float(rng.uniform(config.dh_data_range[0], config.dh_data_range[1]))
        r, c = cells[cell_idx]
        devices.append(IoTDevice(position=(int(r), int(c)), data_initial=data,
                                 data_remaining=data, color_id=i % DEVICE_COLOR_COUNT))
    return devices


def devices_target(env: EnvironmentMap, devices: list[IoTDevice]) -> TargetMap:
    values = np.zeros((env.size, env.size), dtype=float)
    for dev in devices:
        values[dev.position] = dev.data_remaining
    return TargetMap(values, Mission.DH)


def new_episode(env: EnvironmentMap, config: ScenarioConfig,
                rng: np.random.Generator) -> EpisodeState:
    """Fresh episode: uniform start cell, uniform movement budget, and a
    mission target drawn from the scenario distribution."""
    budget = int(rng.integers(config.movement_budget_range[0],
                              config.movement_budget_range[1] + 1))
    landing_cells = np.argwhere(env.landing)
    start = landing_cells[int(rng.integers(0, len(landing_cells)))]
    if config.mission is Mission.CPP:
        target = generate_cpp_target(env, config, rng)
        devices = []
    else:
        devices = generate_dh_devices(env, config, rng)
        target = devices_target(env, devices)
    return EpisodeState(
        env=env,
        target=target,
        position=(int(start[0]), int(start[1])),
        battery=budget,
        budget=budget,
        devices=devices,
    )
