"""Air-to-ground radio link for the data-harvesting mission.

Log-distance path loss with Gaussian shadow fading. Whether the UAV-device
segment is obstructed by buildings selects between the LoS and NLoS
exponent/shadowing pairs. Each step the UAV talks to exactly one device:
the one with data left and the highest achievable rate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .geometry import line_clear
from .world import EnvironmentMap

# default reference SNR puts an unshadowed LoS link at 50 m at ~1 data unit/step
DEFAULT_REFERENCE_SNR_DB = 38.57


@dataclass
class IoTDevice:
    position: tuple[int, int]
    data_initial: float
    data_remaining: float
    color_id: int = 0

    def __post_init__(self):
        if self.data_initial <= 0:
            raise ValueError("data_initial must be positive")
        if not 0 <= self.data_remaining <= self.data_initial:
            raise ValueError("data_remaining must lie in [0, data_initial]")

    def copy(self) -> "IoTDevice":
        return replace(self)


@dataclass(frozen=True)
class ChannelParams:
    uav_altitude_m: float = 10.0
    plos_exponent: float = 2.27
    pnlos_exponent: float = 3.64
    shadowing_sigma_los_db: float = 2.0
    shadowing_sigma_nlos_db: float = 5.0
    reference_snr_db: float = DEFAULT_REFERENCE_SNR_DB
    rate_model: str = "shannon_normalized"
    slot_time: float = 1.0

    def __post_init__(self):
        if self.plos_exponent <= 0 or self.pnlos_exponent <= 0:
            raise ValueError("path loss exponents must be positive")
        if self.shadowing_sigma_los_db < 0 or self.shadowing_sigma_nlos_db < 0:
            raise ValueError("shadowing sigmas must be non-negative")
        if self.rate_model != "shannon_normalized":
            raise ValueError(f"unknown rate model {self.rate_model!r}")
        for name in ("uav_altitude_m", "reference_snr_db", "slot_time"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")


def line_of_sight(env: EnvironmentMap, uav_pos: tuple[int, int],
                  device_pos: tuple[int, int]) -> bool:
    """True when no obstacle cell obstructs the UAV-device segment."""
    if not env.on_map(uav_pos) or not env.on_map(device_pos):
        raise ValueError("positions must be on the map")
    return line_clear(env.obstacles, uav_pos, device_pos)


def link_rate(params: ChannelParams, env: EnvironmentMap, uav_pos: tuple[int, int],
              device_pos: tuple[int, int], rng: np.random.Generator) -> float:
    """Achievable data units per step for one UAV-device pair.

    Distance is 3-D: UAV at altitude over its cell center, device at ground
    level. SNR in dB is reference - 10*alpha*log10(d) plus a fresh Gaussian
    shadowing draw; the LoS test picks the exponent/sigma pair.
    """
    dr = (uav_pos[0] - device_pos[0]) * env.cell_size
    dc = (uav_pos[1] - device_pos[1]) * env.cell_size
    dist = math.sqrt(dr * dr + dc * dc + params.uav_altitude_m ** 2)
    if line_of_sight(env, uav_pos, device_pos):
        alpha, sigma = params.plos_exponent, params.shadowing_sigma_los_db
    else:
        alpha, sigma = params.pnlos_exponent, params.shadowing_sigma_nlos_db
    snr_db = params.reference_snr_db - 10.0 * alpha * math.log10(dist)
    if sigma > 0:
        snr_db += rng.normal(0.0, sigma)
    return params.slot_time * math.log2(1.0 + 10.0 ** (snr_db / 10.0))


def communication_slot(devices: list[IoTDevice], env: EnvironmentMap,
                       uav_pos: tuple[int, int], params: ChannelParams,
                       rng: np.random.Generator) -> tuple[int | None, float]:
    """Serve the best device for one slot, decrementing its data in place.

    Rates are evaluated for every device with data remaining (one shadowing
    draw each, in device order, so the stream is reproducible); the
    highest-rate device wins, ties broken by lowest index. Returns the chosen
    index and the amount collected, or (None, 0.0) when nothing is left.
    """
    best_idx = None
    best_rate = -math.inf
    for idx, dev in enumerate(devices):
        if dev.data_remaining <= 0:
            continue
        rate = link_rate(params, env, uav_pos, dev.position, rng)
        if rate > best_rate:
            best_idx, best_rate = idx, rate
    if best_idx is None:
        return None, 0.0
    dev = devices[best_idx]
    collected = min(best_rate, dev.data_remaining)
    dev.data_remaining -= collected
    return best_idx, collected


class ChannelModel:
    """Parameters, map and RNG stream bundled for use inside the step loop."""

    def __init__(self, params: ChannelParams, env: EnvironmentMap,
                 rng: np.random.Generator):
        self.params = params
        self.env = env
        self.rng = rng

    def line_of_sight(self, uav_pos, device_pos) -> bool:
        return line_of_sight(self.env, uav_pos, device_pos)

    def link_rate(self, uav_pos, device_pos) -> float:
        return link_rate(self.params, self.env, uav_pos, device_pos, self.rng)

    def communication_slot(self, devices: list[IoTDevice], uav_pos) -> tuple[int | None, float]:
        return communication_slot(devices, self.env, uav_pos, self.params, self.rng)
