"""Two-branch convolutional Q-network with hand-written gradients.

The local and global observation stacks each pass through a chain of valid
(unpadded, stride-1) convolutions with ReLU, are flattened, concatenated
together with the normalized remaining flying time, and fed through dense
ReLU layers into a linear 6-way output: the Q-values. Forward and backward
passes are plain numpy; the backward pass produces exact analytic gradients
for every parameter.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .mapproc import ObservationSpec, Observation, centered_size

ACTION_COUNT = 6


class CheckpointError(Exception):
    pass


@dataclass(frozen=True)
class NetworkConfig:
    n_conv_layers: int = 2
    n_kernels: int = 16
    kernel_size: int = 5
    hidden_sizes: tuple[int, ...] = (256, 256, 256)
    input_channels: int = 4
    time_scale: float = 150.0
    dtype: str = "float32"

    def __post_init__(self):
        object.__setattr__(self, "hidden_sizes", tuple(self.hidden_sizes))
        if self.n_conv_layers < 1:
            raise ValueError("need at least one conv layer")
        if self.kernel_size < 1 or self.kernel_size % 2 == 0:
            raise ValueError("kernel_size must be odd and positive")
        if not self.hidden_sizes:
            raise ValueError("hidden_sizes must be non-empty")
        if self.input_channels < 1:
            raise ValueError("input_channels must be positive")
        if self.time_scale <= 0:
            raise ValueError("time_scale must be positive")
        if self.dtype not in ("float32", "float64"):
            raise ValueError(f"unsupported dtype {self.dtype!r}")

    def to_dict(self) -> dict:
        return {
            "n_conv_layers": self.n_conv_layers,
            "n_kernels": self.n_kernels,
            "kernel_size": self.kernel_size,
            "hidden_sizes": list(self.hidden_sizes),
            "input_channels": self.input_channels,
            "time_scale": self.time_scale,
            "dtype": self.dtype,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "NetworkConfig":
        return cls(**{**data, "hidden_sizes": tuple(data["hidden_sizes"])})


def _branch_sides(spec: ObservationSpec, map_size: int, config: NetworkConfig) -> dict[str, int]:
    """Input side length per conv branch; empty local branch when disabled."""
    sides = {}
    if spec.local_size > 0:
        sides["local"] = spec.local_size
    sides["global"] = centered_size(map_size) // spec.global_scaling
    return sides


def _conv_out_side(side: int, config: NetworkConfig) -> int:
    out = side - config.n_conv_layers * (config.kernel_size - 1)
    if out <= 0:
        raise ValueError(
            f"infeasible configuration: branch side {side} shrinks to {out} "
            f"after {config.n_conv_layers} valid conv layers of size {config.kernel_size}")
    return out


def param_shapes(config: NetworkConfig, spec: ObservationSpec, map_size: int) -> dict[str, tuple[int, ...]]:
    """Named shape of every trainable array, in a stable order."""
    shapes: dict[str, tuple[int, ...]] = {}
    sides = _branch_sides(spec, map_size, config)
    flat_total = 1  # the flying-time scalar
    for branch, side in sides.items():
        c_in = config.input_channels
        for i in range(config.n_conv_layers):
            shapes[f"{branch}.conv{i}.w"] = (config.kernel_size, config.kernel_size,
                                             c_in, config.n_kernels)
            shapes[f"{branch}.conv{i}.b"] = (config.n_kernels,)
            c_in = config.n_kernels
        out_side = _conv_out_side(side, config)
        flat_total += config.n_kernels * out_side * out_side
    in_dim = flat_total
    for i, width in enumerate(config.hidden_sizes):
        shapes[f"dense{i}.w"] = (in_dim, width)
        shapes[f"dense{i}.b"] = (width,)
        in_dim = width
    shapes["out.w"] = (in_dim, ACTION_COUNT)
    shapes["out.b"] = (ACTION_COUNT,)
    return shapes


def parameter_count(config: NetworkConfig, spec: ObservationSpec, map_size: int) -> int:
    """Exact number of trainable scalars (weights and biases)."""
    return sum(int(np.prod(s)) for s in param_shapes(config, spec, map_size).values())


def init_params(config: NetworkConfig, spec: ObservationSpec, map_size: int,
                rng: np.random.Generator) -> dict[str, np.ndarray]:
    """Fan-in-scaled uniform weights, zero biases."""
    dtype = np.dtype(config.dtype)
    params = {}
    for name, shape in param_shapes(config, spec, map_size).items():
        if name.endswith(".b"):
            params[name] = np.zeros(shape, dtype=dtype)
        else:
            fan_in = int(np.prod(shape[:-1]))
            limit = 1.0 / np.sqrt(fan_in)
            params[name] = rng.uniform(-limit, limit, size=shape).astype(dtype)
    return params


def _conv_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    n, h, wd, c_in = x.shape
    kh, kw, _, c_out = w.shape
    ho, wo = h - kh + 1, wd - kw + 1
    y = np.empty((n, ho, wo, c_out), dtype=x.dtype)
    y[:] = b
    y_flat = y.reshape(-1, c_out)
    for u in range(kh):
        for v in range(kw):
            patch = x[:, u:u + ho, v:v + wo, :].reshape(-1, c_in)
            y_flat += patch @ w[u, v]
    return y


def _conv_backward(x: np.ndarray, w: np.ndarray, dy: np.ndarray):
    n, h, wd, c_in = x.shape
    kh, kw, _, c_out = w.shape
    ho, wo = dy.shape[1], dy.shape[2]
    dy_flat = dy.reshape(-1, c_out)
    dw = np.empty_like(w)
    db = dy.sum(axis=(0, 1, 2))
    dx = np.zeros_like(x)
    for u in range(kh):
        for v in range(kw):
            patch = x[:, u:u + ho, v:v + wo, :].reshape(-1, c_in)
            dw[u, v] = patch.T @ dy_flat
            dx[:, u:u + ho, v:v + wo, :] += (dy_flat @ w[u, v].T).reshape(n, ho, wo, c_in)
    return dx, dw, db


class QNetwork:
    """Parameter container plus forward/backward over batched observations."""

    def __init__(self, config: NetworkConfig, spec: ObservationSpec, map_size: int,
                 params: dict[str, np.ndarray] | None = None,
                 rng: np.random.Generator | None = None):
        self.config = config
        self.spec = spec
        self.map_size = map_size
        self.shapes = param_shapes(config, spec, map_size)
        self.branch_sides = _branch_sides(spec, map_size, config)
        self.flatten_total = 1 + sum(
            config.n_kernels * _conv_out_side(s, config) ** 2
            for s in self.branch_sides.values())
        if params is None:
            if rng is None:
                rng = np.random.default_rng(0)
            params = init_params(config, spec, map_size, rng)
        self._validate_params(params)
        self.params = params

    def _validate_params(self, params: dict[str, np.ndarray]):
        if set(params) != set(self.shapes):
            missing = set(self.shapes) - set(params)
            extra = set(params) - set(self.shapes)
            raise ValueError(f"parameter names mismatch: missing={sorted(missing)} "
                             f"extra={sorted(extra)}")
        for name, shape in self.shapes.items():
            if tuple(params[name].shape) != shape:
                raise ValueError(f"{name}: expected shape {shape}, got {params[name].shape}")

    @property
    def dtype(self) -> np.dtype:
        return np.dtype(self.config.dtype)

    def clone(self) -> "QNetwork":
        params = {k: v.copy() for k, v in self.params.items()}
        return QNetwork(self.config, self.spec, self.map_size, params=params)

    def _check_branch_input(self, name: str, x: np.ndarray):
        side = self.branch_sides[name]
        expected = (side, side, self.config.input_channels)
        if tuple(x.shape[1:]) != expected:
            raise ValueError(f"{name} input shape {x.shape[1:]} != expected {expected}")

    def forward_batch(self, local: np.ndarray | None, global_: np.ndarray,
                      times: np.ndarray, need_cache: bool = False):
        """Q-values (N, 6) for stacked observation batches.

        ``local`` is None iff global-local processing is disabled. Returns
        (q, cache); cache is None unless requested and feeds backward().
        """
        dtype = self.dtype
        inputs = {}
        if "local" in self.branch_sides:
            if local is None:
                raise ValueError("network expects a local branch input")
            inputs["local"] = np.ascontiguousarray(local, dtype=dtype)
        elif local is not None:
            raise ValueError("network has no local branch")
        inputs["global"] = np.ascontiguousarray(global_, dtype=dtype)
        for name, x in inputs.items():
            self._check_branch_input(name, x)

        n = inputs["global"].shape[0]
        cache = {"conv": {}, "dense": []} if need_cache else None
        flats = []
        for name, x in inputs.items():
            layers = []
            for i in range(self.config.n_conv_layers):
                w = self.params[f"{name}.conv{i}.w"]
                b = self.params[f"{name}.conv{i}.b"]
                y = _conv_forward(x, w, b)
                np.maximum(y, 0.0, out=y)
                layers.append((x, y))
                x = y
            if need_cache:
                cache["conv"][name] = layers
            flats.append(x.reshape(n, -1))
        times = np.asarray(times, dtype=dtype).reshape(n, 1)
        h = np.concatenate(flats + [times / dtype.type(self.config.time_scale)], axis=1)
        if h.shape[1] != self.flatten_total:
            raise ValueError(f"flatten length {h.shape[1]} != expected {self.flatten_total}")

        for i in range(len(self.config.hidden_sizes)):
            z = h @ self.params[f"dense{i}.w"] + self.params[f"dense{i}.b"]
            np.maximum(z, 0.0, out=z)
            if need_cache:
                cache["dense"].append((h, z))
            h = z
        if need_cache:
            cache["last_hidden"] = h
        q = h @ self.params["out.w"] + self.params["out.b"]
        return q, cache

    def forward(self, obs: Observation) -> np.ndarray:
        """Q-values (6,) for a single observation."""
        local = obs.local_stack()
        if local is not None:
            local = local[None]
        q, _ = self.forward_batch(local, obs.global_stack()[None],
                                  np.array([obs.flying_time]), need_cache=False)
        return q[0]

    def backward(self, cache: dict, dq: np.ndarray) -> dict[str, np.ndarray]:
        """Gradients of a scalar loss wrt every parameter, given dL/dQ."""
        grads = {}
        h = cache["last_hidden"]
        dq = np.asarray(dq, dtype=self.dtype)
        grads["out.w"] = h.T @ dq
        grads["out.b"] = dq.sum(axis=0)
        dh = dq @ self.params["out.w"].T
        for i in reversed(range(len(self.config.hidden_sizes))):
            h_in, z = cache["dense"][i]
            dz = dh * (z > 0)
            grads[f"dense{i}.w"] = h_in.T @ dz
            grads[f"dense{i}.b"] = dz.sum(axis=0)
            dh = dz @ self.params[f"dense{i}.w"].T

        # split the concatenated flatten gradient back into branches
        offset = 0
        n = dh.shape[0]
        for name in self.branch_sides:
            layers = cache["conv"][name]
            last_out = layers[-1][1]
            width = last_out[0].size
            dy = dh[:, offset:offset + width].reshape(last_out.shape)
            offset += width
            for i in reversed(range(self.config.n_conv_layers)):
                x_in, y_out = layers[i]
                dy = dy * (y_out > 0)
                dx, dw, db = _conv_backward(x_in, self.params[f"{name}.conv{i}.w"], dy)
                grads[f"{name}.conv{i}.w"] = dw
                grads[f"{name}.conv{i}.b"] = db
                dy = dx
        # the remaining column is the flying-time input: no parameters there
        return grads


def softmax_policy(q_values: np.ndarray, temperature: float) -> np.ndarray:
    """Action distribution from Q-values at the given temperature."""
    q = np.asarray(q_values, dtype=np.float64)
    if not np.all(np.isfinite(q)):
        raise ValueError("Q-values must be finite")
    if temperature <= 0:
        raise ValueError("temperature must be positive")
    z = q / temperature
    z -= z.max()
    p = np.exp(z)
    return p / p.sum()


def argmax_policy(q_values: np.ndarray) -> int:
    """Greedy action; ties broken toward the lowest index."""
    q = np.asarray(q_values)
    if not np.all(np.isfinite(q)):
        raise ValueError("Q-values must be finite")
    return int(np.argmax(q))


CHECKPOINT_VERSION = 1


def save_checkpoint(path, network: QNetwork, extra: dict | None = None):
    meta = {
        "format_version": CHECKPOINT_VERSION,
        "map_size": network.map_size,
        "config": network.config.to_dict(),
        "spec": {"local_size": network.spec.local_size,
                 "global_scaling": network.spec.global_scaling},
    }
    if extra:
        meta["extra"] = extra
    arrays = {f"param:{k}": v for k, v in network.params.items()}
    with open(path, "wb") as f:
        np.savez(f, __meta__=np.array(json.dumps(meta, sort_keys=True)), **arrays)


def load_checkpoint(path) -> QNetwork:
    """Rebuild a network from a checkpoint, validating every array shape."""
    try:
        with np.load(path) as data:
            meta = json.loads(str(data["__meta__"][()]))
            params = {k[len("param:"):]: data[k]
                      for k in data.files if k.startswith("param:")}
    except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"unreadable checkpoint {path}: {exc}") from exc
    if meta.get("format_version") != CHECKPOINT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {meta.get('format_version')}")
    try:
        config = NetworkConfig.from_dict(meta["config"])
        spec = ObservationSpec(**meta["spec"])
        map_size = int(meta["map_size"])
    except (KeyError, TypeError, ValueError) as exc:
        raise CheckpointError(f"invalid checkpoint metadata: {exc}") from exc
    try:
        return QNetwork(config, spec, map_size, params=params)
    except ValueError as exc:
        raise CheckpointError(f"checkpoint parameters inconsistent: {exc}") from exc


def load_checkpoint_meta(path) -> dict:
    """Checkpoint metadata only (config, spec, map size, extras)."""
    try:
        with np.load(path) as data:
            return json.loads(str(data["__meta__"][()]))
    except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"unreadable checkpoint {path}: {exc}") from exc
