"""Observation pipeline: map centering, local crop, global pooling.

Large grids are made digestible for the Q-network by re-expressing the map
relative to the agent: the full map is embedded into a (2M-1)x(2M-1) frame
whose center cell is always the agent's own cell, then split into an
uncompressed local crop of the agent's surroundings and an average-pooled
global view of everything. Out-of-map cells are padded so that the world
boundary looks like a no-fly obstacle ring.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# padding for the three environment layers: not a landing zone, NFZ, obstacle
ENV_PAD = (0.0, 1.0, 1.0)
TARGET_PAD = 0.0


@dataclass(frozen=True)
class ObservationSpec:
    """Map-processing knobs: local crop size and global pooling factor.

    ``local_size`` must be odd so the crop is symmetric about the agent;
    local_size == 0 together with global_scaling == 1 disables global-local
    processing (the network then sees one full centered map).
    """

    local_size: int = 17
    global_scaling: int = 3

    def __post_init__(self):
        if self.local_size < 0:
            raise ValueError(f"local_size must be >= 0, got {self.local_size}")
        if self.local_size > 0 and self.local_size % 2 == 0:
            raise ValueError(f"local_size must be odd or 0, got {self.local_size}")
        if self.global_scaling < 1:
            raise ValueError(f"global_scaling must be >= 1, got {self.global_scaling}")

    @property
    def disabled(self) -> bool:
        return self.local_size == 0


@dataclass
class Observation:
    """Agent input: local and global map stacks plus remaining flying time.

    Environment components have 3 channels (landing, NFZ-union, obstacle),
    target components 1. With processing disabled the local components are
    None and the global components hold the full centered map.
    """

    local_env: np.ndarray | None
    local_target: np.ndarray | None
    global_env: np.ndarray
    global_target: np.ndarray
    flying_time: int

    def local_stack(self) -> np.ndarray | None:
        if self.local_env is None:
            return None
        return np.concatenate([self.local_env, self.local_target[:, :, None]], axis=2)

    def global_stack(self) -> np.ndarray:
        return np.concatenate([self.global_env, self.global_target[:, :, None]], axis=2)


def centered_size(map_size: int) -> int:
    return 2 * map_size - 1


def center_map(layers: np.ndarray, position: tuple[int, int], pad: np.ndarray) -> np.ndarray:
    """Embed an MxMxn map into a (2M-1)x(2M-1)xn frame centered on ``position``.

    Cell (M-1, M-1) of the output is the source cell at ``position``; cells
    falling outside the source map take the per-channel ``pad`` vector.
    """
    m = layers.shape[0]
    if layers.shape[1] != m or layers.ndim != 3:
        raise ValueError(f"expected square MxMxn map, got shape {layers.shape}")
    p0, p1 = position
    if not (0 <= p0 < m and 0 <= p1 < m):
        raise ValueError(f"position {position} outside {m}x{m} map")
    mc = centered_size(m)
    pad = np.asarray(pad, dtype=layers.dtype)
    out = np.empty((mc, mc, layers.shape[2]), dtype=layers.dtype)
    out[:, :] = pad
    out[m - 1 - p0:mc - p0, m - 1 - p1:mc - p1] = layers
    return out


def local_map(centered: np.ndarray, local_size: int) -> np.ndarray:
    """Central crop of ``local_size`` x ``local_size`` from a centered map."""
    mc = centered.shape[0]
    if not 1 <= local_size <= mc:
        raise ValueError(f"local_size {local_size} not in [1, {mc}]")
    m = (mc + 1) // 2
    off = m - (local_size + 1) // 2
    return centered[off:off + local_size, off:off + local_size]


def global_map(centered: np.ndarray, scaling: int) -> np.ndarray:
    """Average-pool a centered map with cell size ``scaling``.

    Trailing rows/columns that do not fill a complete pooling cell are
    dropped (floor semantics)."""
    if scaling < 1:
        raise ValueError(f"scaling must be >= 1, got {scaling}")
    if scaling == 1:
        return centered
    mc = centered.shape[0]
    out_size = mc // scaling
    trimmed = centered[:out_size * scaling, :out_size * scaling]
    blocks = trimmed.reshape(out_size, scaling, out_size, scaling, centered.shape[2])
    return blocks.sum(axis=(1, 3)) / (scaling * scaling)


def flatten_size(spec: ObservationSpec, map_size: int, n_kernels: int = 16,
                 n_conv_layers: int = 2, kernel_size: int = 5) -> int:
    """Length of the flattened conv output concatenated with the time scalar.

    Each valid convolution with an odd kernel shrinks both spatial dimensions
    by kernel_size - 1. With local_size == 0 only the global branch exists.
    Raises ValueError when a branch would shrink to a non-positive size.
    """
    shrink = 2 * n_conv_layers * (kernel_size // 2)
    mc = centered_size(map_size)
    global_side = mc // spec.global_scaling - shrink
    if global_side <= 0:
        raise ValueError(
            f"global branch infeasible: pooled side {mc // spec.global_scaling} "
            f"shrinks to {global_side} after {n_conv_layers} conv layers")
    total = global_side * global_side
    if spec.local_size > 0:
        if spec.local_size > mc:
            raise ValueError(f"local_size {spec.local_size} exceeds centered size {mc}")
        local_side = spec.local_size - shrink
        if local_side <= 0:
            raise ValueError(
                f"local branch infeasible: size {spec.local_size} shrinks to "
                f"{local_side} after {n_conv_layers} conv layers")
        total += local_side * local_side
    return n_kernels * total + 1


def assemble_observation(state, spec: ObservationSpec) -> Observation:
    """Build the agent observation from an episode state.

    Environment layers are centered with the NFZ/obstacle padding, the
    target layer with zero padding; both are then cropped (local) and pooled
    (global). Components are float32, the network's working precision.
    """
    env_layers = state.env.layers.astype(np.float32)
    target = state.target.values.astype(np.float32)[:, :, None]
    pos = state.position

    cent_env = center_map(env_layers, pos, np.array(ENV_PAD, dtype=np.float32))
    cent_tgt = center_map(target, pos, np.array([TARGET_PAD], dtype=np.float32))

    if spec.disabled:
        local_env = local_tgt = None
    else:
        local_env = local_map(cent_env, spec.local_size)
        local_tgt = local_map(cent_tgt, spec.local_size)[:, :, 0]

    glob_env = global_map(cent_env, spec.global_scaling)
    glob_tgt = global_map(cent_tgt, spec.global_scaling)[:, :, 0]
    return Observation(
        local_env=local_env,
        local_target=local_tgt,
        global_env=glob_env,
        global_target=glob_tgt,
        flying_time=state.battery,
    )
