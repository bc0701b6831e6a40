"""Stochastic policy + value network over grid observations, NumPy end to end.

Architecture: a stack of 3x3 same-padded conv layers (tanh), a flatten, a
stack of dense tanh layers, then two linear heads: action logits (softmax
over the 6 actions) and a scalar state value. Reverse-mode gradients are
implemented by hand and are exact for the unclamped softmax path.

Probabilities are floored at PROB_FLOOR before any log so that collapsed
policies cannot produce infinities in entropy or importance ratios.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

PROB_FLOOR = 1e-8

_MAGIC = b"CPN1"
_VERSION = 1


class ShapeMismatch(ValueError):
    """Observation or parameter shape does not match the NetSpec manifest."""


@dataclass(frozen=True)
class NetSpec:
    in_channels: int
    height: int
    width: int
    conv_layers: int = 3
    conv_filters: int = 25
    hidden_layers: int = 3
    hidden_size: int = 64
    action_count: int = 6

    def __post_init__(self):
        for name in ("in_channels", "height", "width", "conv_layers",
                     "conv_filters", "hidden_layers", "hidden_size"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.action_count != 6:
            raise ValueError("action_count must be 6")

    @property
    def obs_shape(self) -> tuple[int, int, int]:
        return (self.in_channels, self.height, self.width)

    def manifest(self) -> list[tuple[str, tuple[int, ...]]]:
        """Ordered (name, shape) segments of the flat parameter vector."""
        segs = []
        c_in = self.in_channels
        for i in range(self.conv_layers):
            segs.append((f"conv{i}.w", (self.conv_filters, c_in, 3, 3)))
            segs.append((f"conv{i}.b", (self.conv_filters,)))
            c_in = self.conv_filters
        d_in = self.conv_filters * self.height * self.width
        for i in range(self.hidden_layers):
            segs.append((f"fc{i}.w", (d_in, self.hidden_size)))
            segs.append((f"fc{i}.b", (self.hidden_size,)))
            d_in = self.hidden_size
        segs.append(("policy.w", (d_in, self.action_count)))
        segs.append(("policy.b", (self.action_count,)))
        segs.append(("value.w", (d_in, 1)))
        segs.append(("value.b", (1,)))
        return segs

    def num_params(self) -> int:
        return sum(int(np.prod(shape)) for _, shape in self.manifest())


@dataclass(frozen=True)
class PolicyParams:
    spec: NetSpec
    data: np.ndarray  # flat float64, length spec.num_params()

    def __post_init__(self):
        if self.data.shape != (self.spec.num_params(),):
            raise ShapeMismatch(
                f"parameter vector has length {self.data.shape}, "
                f"manifest total is {self.spec.num_params()}"
            )
        if not np.all(np.isfinite(self.data)):
            raise ValueError("parameters must be finite")
        self.data.setflags(write=False)  # snapshots are immutable

    def views(self) -> dict[str, np.ndarray]:
        out = {}
        offset = 0
        for name, shape in self.spec.manifest():
            size = int(np.prod(shape))
            out[name] = self.data[offset : offset + size].reshape(shape)
            offset += size
        return out


@dataclass(frozen=True)
class PolicyOutput:
    action_probs: np.ndarray  # (6,), floored, sums to 1
    log_probs: np.ndarray     # (6,)
    value: float


def _orthogonal(rng: np.random.Generator, shape: tuple[int, int], gain: float) -> np.ndarray:
    a = rng.standard_normal(shape if shape[0] >= shape[1] else shape[::-1])
    q, r = np.linalg.qr(a)
    q *= np.sign(np.diag(r))
    if shape[0] < shape[1]:
        q = q.T
    return gain * q[: shape[0], : shape[1]]


def init_params(spec: NetSpec, seed: int) -> PolicyParams:
    """Seeded orthogonal-style init; small policy head keeps early play near uniform."""
    rng = np.random.default_rng(seed)
    chunks = []
    for name, shape in spec.manifest():
        if name.endswith(".b"):
            chunks.append(np.zeros(int(np.prod(shape))))
            continue
        # near-zero heads: play starts uniform and early advantages track the
        # rewards rather than untrained-value noise
        if name.startswith(("policy", "value")):
            gain = 0.01
        else:
            gain = np.sqrt(2.0)
        flat_shape = (shape[0], int(np.prod(shape[1:])))
        if name.startswith("conv"):
            w = _orthogonal(rng, flat_shape, gain)
        else:
            w = _orthogonal(rng, shape, gain)
        chunks.append(w.reshape(-1))
    return PolicyParams(spec=spec, data=np.concatenate(chunks))


def _floor_probs(probs: np.ndarray) -> np.ndarray:
    if probs.min() >= PROB_FLOOR:
        return probs
    clamped = np.maximum(probs, PROB_FLOOR)
    return clamped / clamped.sum(axis=-1, keepdims=True)


_COL_INDEX_CACHE: dict[tuple[int, int], np.ndarray] = {}


def _col_indices(h: int, wd: int) -> np.ndarray:
    """(H*W, 9) flat indices into the zero-padded (H+2, W+2) image."""
    key = (h, wd)
    if key not in _COL_INDEX_CACHE:
        rows = np.repeat(np.arange(h), wd)
        cols = np.tile(np.arange(wd), h)
        idx = np.empty((h * wd, 9), dtype=np.intp)
        for k, (ki, kj) in enumerate((a, b) for a in range(3) for b in range(3)):
            idx[:, k] = (rows + ki) * (wd + 2) + (cols + kj)
        _COL_INDEX_CACHE[key] = idx
    return _COL_INDEX_CACHE[key]


def _conv_forward(x, w, b):
    batch, c, h, wd = x.shape
    f = w.shape[0]
    padded = np.zeros((batch, c, h + 2, wd + 2))
    padded[:, :, 1 : h + 1, 1 : wd + 1] = x
    flat = padded.reshape(batch, c, -1)
    idx = _col_indices(h, wd)
    cols = flat[:, :, idx]  # (B, C, P, 9)
    cols = cols.swapaxes(1, 2).reshape(batch * h * wd, c * 9)
    z = cols @ w.reshape(f, -1).T + b
    return z.reshape(batch, h, wd, f).transpose(0, 3, 1, 2), cols


def _conv_backward(dz, cols, w, x_shape):
    batch, c, h, wd = x_shape
    f = w.shape[0]
    dz_flat = dz.transpose(0, 2, 3, 1).reshape(batch * h * wd, f)
    dw = (dz_flat.T @ cols).reshape(w.shape)
    db = dz_flat.sum(axis=0)
    dcols = (dz_flat @ w.reshape(f, -1)).reshape(batch, h * wd, c, 9).swapaxes(1, 2)
    dflat = np.zeros((batch, c, (h + 2) * (wd + 2)))
    idx = _col_indices(h, wd)
    for k in range(9):  # per offset the pixel indices are unique, so += is safe
        dflat[:, :, idx[:, k]] += dcols[:, :, :, k]
    dpadded = dflat.reshape(batch, c, h + 2, wd + 2)
    return dw, db, dpadded[:, :, 1 : h + 1, 1 : wd + 1]


def forward_batch(params: PolicyParams, obs: np.ndarray):
    """Batched forward pass. Returns (probs, log_probs, values, cache)."""
    spec = params.spec
    if obs.ndim != 4 or obs.shape[1:] != spec.obs_shape:
        raise ShapeMismatch(f"obs batch shape {obs.shape} != (B, {spec.obs_shape})")
    v = params.views()
    cache = {"obs": obs, "convs": [], "fcs": []}

    x = obs
    for i in range(spec.conv_layers):
        z, cols = _conv_forward(x, v[f"conv{i}.w"], v[f"conv{i}.b"])
        a = np.tanh(z)
        cache["convs"].append((x.shape, cols, a))
        x = a
    h = x.reshape(obs.shape[0], -1)
    cache["flat_in"] = h
    for i in range(spec.hidden_layers):
        a = np.tanh(h @ v[f"fc{i}.w"] + v[f"fc{i}.b"])
        cache["fcs"].append((h, a))
        h = a
    cache["head_in"] = h
    logits = h @ v["policy.w"] + v["policy.b"]
    values = (h @ v["value.w"] + v["value.b"])[:, 0]

    shifted = logits - logits.max(axis=1, keepdims=True)
    expv = np.exp(shifted)
    probs = expv / expv.sum(axis=1, keepdims=True)
    probs = _floor_probs(probs)
    cache["probs"] = probs
    return probs, np.log(probs), values, cache


def backward_batch(params: PolicyParams, cache, dprobs: np.ndarray, dvalues: np.ndarray):
    """Accumulate dLoss/dtheta for a batch given gradients at (probs, value).

    Exact reverse of forward_batch up to the probability floor, which is
    inactive anywhere the softmax output stays above PROB_FLOOR.
    """
    spec = params.spec
    v = params.views()
    probs = cache["probs"]
    dlogits = probs * (dprobs - (dprobs * probs).sum(axis=1, keepdims=True))

    grads: dict[str, np.ndarray] = {}
    h = cache["head_in"]
    grads["policy.w"] = h.T @ dlogits
    grads["policy.b"] = dlogits.sum(axis=0)
    grads["value.w"] = (h.T @ dvalues[:, None])
    grads["value.b"] = np.array([dvalues.sum()])
    dh = dlogits @ v["policy.w"].T + dvalues[:, None] * v["value.w"][:, 0]

    for i in reversed(range(spec.hidden_layers)):
        inp, act = cache["fcs"][i]
        dz = dh * (1.0 - act * act)
        grads[f"fc{i}.w"] = inp.T @ dz
        grads[f"fc{i}.b"] = dz.sum(axis=0)
        dh = dz @ v[f"fc{i}.w"].T

    dx = dh.reshape(cache["convs"][-1][2].shape)
    for i in reversed(range(spec.conv_layers)):
        x_shape, cols, act = cache["convs"][i]
        dz = dx * (1.0 - act * act)
        dw, db, dx = _conv_backward(dz, cols, v[f"conv{i}.w"], x_shape)
        grads[f"conv{i}.w"] = dw
        grads[f"conv{i}.b"] = db

    flat = np.empty_like(params.data)
    offset = 0
    for name, shape in spec.manifest():
        size = int(np.prod(shape))
        g = grads[name]
        if not np.all(np.isfinite(g)):
            raise FloatingPointError(f"non-finite gradient in layer {name}")
        flat[offset : offset + size] = g.reshape(-1)
        offset += size
    return flat


def forward(params: PolicyParams, obs: np.ndarray) -> PolicyOutput:
    """Single-observation forward pass."""
    if obs.shape != params.spec.obs_shape:
        raise ShapeMismatch(f"obs shape {obs.shape} != {params.spec.obs_shape}")
    probs, logps, values, _ = forward_batch(params, obs[None])
    return PolicyOutput(action_probs=probs[0], log_probs=logps[0], value=float(values[0]))


def backward(params: PolicyParams, obs: np.ndarray, loss_grads) -> np.ndarray:
    """dLoss/dtheta for one observation; loss_grads = (dL/dprobs, dL/dvalue)."""
    dprobs, dvalue = loss_grads
    _, _, _, cache = forward_batch(params, obs[None])
    return backward_batch(params, cache, np.asarray(dprobs)[None], np.array([dvalue], dtype=float))


def sample_action(output: PolicyOutput, rng: np.random.Generator) -> tuple[int, float]:
    """Draw one action from the categorical over the 6 actions."""
    u = rng.random()
    cum = np.cumsum(output.action_probs)
    action = int(np.searchsorted(cum, u * cum[-1], side="right"))
    action = min(action, len(output.action_probs) - 1)
    return action, float(output.log_probs[action])


def sample_actions(probs: np.ndarray, rngs) -> np.ndarray:
    """Row-wise categorical draws, one seeded generator per row."""
    cum = np.cumsum(probs, axis=1)
    out = np.empty(probs.shape[0], dtype=np.int64)
    for i, rng in enumerate(rngs):
        a = int(np.searchsorted(cum[i], rng.random() * cum[i, -1], side="right"))
        out[i] = min(a, probs.shape[1] - 1)
    return out


def entropy(output: PolicyOutput) -> float:
    return float(-(output.action_probs * output.log_probs).sum())


def entropy_batch(probs: np.ndarray) -> np.ndarray:
    return -(probs * np.log(np.maximum(probs, PROB_FLOOR))).sum(axis=-1)


# ---------------------------------------------------------------------------
# checkpoints: header (magic, version, NetSpec manifest) + flat little-endian
# float64 parameter block
# ---------------------------------------------------------------------------

_HEADER = struct.Struct("<4sI8IQ")


def save_params(params: PolicyParams, path) -> None:
    spec = params.spec
    header = _HEADER.pack(
        _MAGIC,
        _VERSION,
        spec.in_channels,
        spec.height,
        spec.width,
        spec.conv_layers,
        spec.conv_filters,
        spec.hidden_layers,
        spec.hidden_size,
        spec.action_count,
        spec.num_params(),
    )
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    with open(p, "wb") as fh:
        fh.write(header)
        fh.write(params.data.astype("<f8").tobytes())


def load_params(path) -> PolicyParams:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size or raw[:4] != _MAGIC:
        raise ValueError(f"{path}: not a policy checkpoint")
    (_, version, c, h, w, cl, cf, hl, hs, ac, count) = _HEADER.unpack(raw[: _HEADER.size])
    if version != _VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {version}")
    spec = NetSpec(
        in_channels=c, height=h, width=w, conv_layers=cl, conv_filters=cf,
        hidden_layers=hl, hidden_size=hs, action_count=ac,
    )
    data = np.frombuffer(raw[_HEADER.size :], dtype="<f8").astype(np.float64)
    if data.shape[0] != count or count != spec.num_params():
        raise ValueError(f"{path}: parameter block has {data.shape[0]} values, expected {count}")
    return PolicyParams(spec=spec, data=data)
