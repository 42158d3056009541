# net.py
"""The feed-forward marginaliser and its training loop.

Architecture: shared ReLU trunk -> embedding layer (whose activation is the
reusable evidence representation) -> one ReLU head per depth type, weights
shared by every node of that type -> one linear output row per node ->
sigmoid. Dropout, when enabled, acts on the deepest hidden activation of
each head pathway with train-time inverted scaling, so eval mode needs no
correction and is a pure function.

All arithmetic is float64 and everything is deterministic given the seed;
gradients are exact analytic derivatives of the clamped cross-entropy and
are checked against central finite differences in the test suite.
"""
from __future__ import annotations

import io
import json
import struct
from dataclasses import dataclass, field, replace

import numpy as np

from .bn import BayesNet
from .encoding import mask_samples
from .kernels import ancestral_batch

BCE_CLAMP = 1e-7
LOSS_EMA = 0.05

MAGIC = b"MGNCKPT1"
CKPT_VERSION = 1


class CheckpointError(RuntimeError):
    pass


def make_rng(seed: int) -> np.random.Generator:
    """Counter-based generator used across the package for reproducibility."""
    return np.random.Generator(np.random.Philox(seed))


@dataclass(frozen=True)
class AdamHyper:
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8


@dataclass(frozen=True)
class NetConfig:
    n_nodes: int
    embedding_dim: int = 128
    trunk_hidden: tuple[int, ...] = (256,)
    head_hidden: tuple[int, ...] = (64,)
    type_cap: int = 3
    dropout_rate: float = 0.0
    adam: AdamHyper = field(default_factory=AdamHyper)
    batch_size: int = 256
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "trunk_hidden", tuple(int(w) for w in self.trunk_hidden))
        object.__setattr__(self, "head_hidden", tuple(int(w) for w in self.head_hidden))

    def check(self) -> None:
        if self.n_nodes < 1:
            raise ValueError("n_nodes must be >= 1")
        if self.embedding_dim < 1:
            raise ValueError("embedding_dim must be >= 1")
        if any(w < 1 for w in self.trunk_hidden) or any(w < 1 for w in self.head_hidden):
            raise ValueError("hidden layer widths must be >= 1")
        if not 1 <= self.type_cap:
            raise ValueError("type_cap must be >= 1")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError("dropout_rate must be in [0, 1)")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")

    @property
    def head_out_dim(self) -> int:
        return self.head_hidden[-1] if self.head_hidden else self.embedding_dim

    def to_dict(self) -> dict:
        return {
            "n_nodes": self.n_nodes,
            "embedding_dim": self.embedding_dim,
            "trunk_hidden": list(self.trunk_hidden),
            "head_hidden": list(self.head_hidden),
            "type_cap": self.type_cap,
            "dropout_rate": self.dropout_rate,
            "adam": [self.adam.learning_rate, self.adam.beta1, self.adam.beta2, self.adam.epsilon],
            "batch_size": self.batch_size,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NetConfig":
        d = dict(d)
        adam = d.pop("adam", None)
        cfg = cls(
            n_nodes=int(d["n_nodes"]),
            embedding_dim=int(d.get("embedding_dim", 128)),
            trunk_hidden=tuple(d.get("trunk_hidden", (256,))),
            head_hidden=tuple(d.get("head_hidden", (64,))),
            type_cap=int(d.get("type_cap", 3)),
            dropout_rate=float(d.get("dropout_rate", 0.0)),
            adam=AdamHyper(*adam) if adam is not None else AdamHyper(),
            batch_size=int(d.get("batch_size", 256)),
            seed=int(d.get("seed", 0)),
        )
        cfg.check()
        return cfg


def _param_shapes(config: NetConfig) -> list[tuple[str, tuple[int, ...]]]:
    """Parameter names and shapes in declared (checkpoint) order."""
    shapes: list[tuple[str, tuple[int, ...]]] = []
    width = 2 * config.n_nodes
    for l, w in enumerate(config.trunk_hidden):
        shapes.append((f"trunk{l}.W", (width, w)))
        shapes.append((f"trunk{l}.b", (w,)))
        width = w
    shapes.append(("embed.W", (width, config.embedding_dim)))
    shapes.append(("embed.b", (config.embedding_dim,)))
    for t in range(1, config.type_cap + 1):
        width = config.embedding_dim
        for l, w in enumerate(config.head_hidden):
            shapes.append((f"head{t}.{l}.W", (width, w)))
            shapes.append((f"head{t}.{l}.b", (w,)))
            width = w
    shapes.append(("out.W", (config.n_nodes, config.head_out_dim)))
    shapes.append(("out.b", (config.n_nodes,)))
    return shapes


@dataclass
class NetParams:
    config: NetConfig
    node_types: np.ndarray            # int64 (n,), effective head per node
    arrays: dict[str, np.ndarray]
    step: int = 0

    def copy(self) -> "NetParams":
        return NetParams(self.config, self.node_types.copy(),
                         {k: v.copy() for k, v in self.arrays.items()}, self.step)


def effective_types(net: BayesNet, type_cap: int) -> np.ndarray:
    return np.minimum(np.asarray([nd.depth_type for nd in net.nodes], dtype=np.int64), type_cap)


def init(config: NetConfig, node_types: np.ndarray | None = None) -> NetParams:
    """Fan-in-scaled uniform init, U(-1/sqrt(fan_in), 1/sqrt(fan_in)); zero
    biases; deterministic given config.seed."""
    config.check()
    if node_types is None:
        node_types = np.ones(config.n_nodes, dtype=np.int64)
    node_types = np.asarray(node_types, dtype=np.int64)
    if node_types.shape != (config.n_nodes,):
        raise ValueError("node_types length must equal n_nodes")
    if node_types.min() < 1 or node_types.max() > config.type_cap:
        raise ValueError("node types must lie in [1, type_cap]")
    rng = make_rng(config.seed)
    arrays: dict[str, np.ndarray] = {}
    for name, shape in _param_shapes(config):
        if name.endswith(".b"):
            arrays[name] = np.zeros(shape, dtype=np.float64)
        else:
            fan_in = shape[0] if not name.startswith("out.") else shape[1]
            bound = 1.0 / np.sqrt(fan_in)
            arrays[name] = rng.uniform(-bound, bound, size=shape)
    return NetParams(config, node_types, arrays)


@dataclass
class ForwardTrace:
    x: np.ndarray
    trunk_pre: list
    trunk_post: list
    embed_pre: np.ndarray
    embed_post: np.ndarray
    head_pre: dict
    head_post: dict
    drop_mask: dict
    head_final: dict       # per type, post-dropout input to the output rows
    logits: np.ndarray
    probs: np.ndarray
    mode: str


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def forward(params: NetParams, x: np.ndarray, mode: str = "eval",
            rng: np.random.Generator | None = None) -> ForwardTrace:
    """One pass; accepts a single encoding or a (batch, 2n) matrix.

    Eval mode is deterministic (dropout off, no rescaling needed thanks to
    inverted-scaling at train time); train mode needs an rng iff
    dropout_rate > 0.
    """
    cfg = params.config
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if x.shape[1] != 2 * cfg.n_nodes:
        raise ValueError(f"input width {x.shape[1]} != 2*n_nodes = {2 * cfg.n_nodes}")
    if mode not in ("train", "eval"):
        raise ValueError(f"unknown mode {mode!r}")
    dropping = mode == "train" and cfg.dropout_rate > 0.0
    if dropping and rng is None:
        raise ValueError("train-mode forward with dropout needs an rng")

    a = params.arrays
    act = x
    trunk_pre, trunk_post = [], []
    for l in range(len(cfg.trunk_hidden)):
        z = act @ a[f"trunk{l}.W"] + a[f"trunk{l}.b"]
        act = np.maximum(z, 0.0)
        trunk_pre.append(z)
        trunk_post.append(act)
    embed_pre = act @ a["embed.W"] + a["embed.b"]
    embed_post = np.maximum(embed_pre, 0.0)

    logits = np.empty((x.shape[0], cfg.n_nodes), dtype=np.float64)
    head_pre: dict = {}
    head_post: dict = {}
    drop_mask: dict = {}
    head_final: dict = {}
    for t in np.unique(params.node_types):
        t = int(t)
        h = embed_post
        pres, posts = [], []
        for l in range(len(cfg.head_hidden)):
            z = h @ a[f"head{t}.{l}.W"] + a[f"head{t}.{l}.b"]
            h = np.maximum(z, 0.0)
            pres.append(z)
            posts.append(h)
        if dropping:
            mask = (rng.random(h.shape) >= cfg.dropout_rate) / (1.0 - cfg.dropout_rate)
            h = h * mask
            drop_mask[t] = mask
        else:
            drop_mask[t] = None
        head_pre[t] = pres
        head_post[t] = posts
        head_final[t] = h
        idx = np.flatnonzero(params.node_types == t)
        logits[:, idx] = h @ a["out.W"][idx].T + a["out.b"][idx]
    probs = _sigmoid(logits)
    return ForwardTrace(x, trunk_pre, trunk_post, embed_pre, embed_post,
                        head_pre, head_post, drop_mask, head_final,
                        logits, probs, mode)


def bce_loss(probs: np.ndarray, target: np.ndarray) -> float:
    """Mean multi-label binary cross entropy, probabilities clamped to
    [1e-7, 1 - 1e-7] before the logs."""
    p = np.clip(probs, BCE_CLAMP, 1.0 - BCE_CLAMP)
    t = np.asarray(target, dtype=np.float64)
    return float(np.mean(-(t * np.log(p) + (1.0 - t) * np.log1p(-p))))


def backward(params: NetParams, trace: ForwardTrace, target: np.ndarray) -> dict[str, np.ndarray]:
    """Exact gradients of bce_loss(trace.probs, target) w.r.t. every array.

    Head gradients accumulate over every node of the head's type; entries
    pushed outside the BCE clamp contribute zero, matching the clamped loss.
    """
    cfg = params.config
    a = params.arrays
    t_arr = np.atleast_2d(np.asarray(target, dtype=np.float64))
    p = trace.probs
    count = p.size
    inside = (p >= BCE_CLAMP) & (p <= 1.0 - BCE_CLAMP)
    dlogit = np.where(inside, p - t_arr, 0.0) / count

    grads = {name: np.zeros(arr.shape, dtype=np.float64) for name, arr in a.items()}
    d_embed = np.zeros_like(trace.embed_post)
    for t in np.unique(params.node_types):
        t = int(t)
        idx = np.flatnonzero(params.node_types == t)
        g = dlogit[:, idx]
        h = trace.head_final[t]
        grads["out.W"][idx] = g.T @ h
        grads["out.b"][idx] = g.sum(axis=0)
        dh = g @ a["out.W"][idx]
        if trace.drop_mask[t] is not None:
            dh = dh * trace.drop_mask[t]
        for l in range(len(cfg.head_hidden) - 1, -1, -1):
            dz = dh * (trace.head_pre[t][l] > 0.0)
            prev = trace.head_post[t][l - 1] if l > 0 else trace.embed_post
            grads[f"head{t}.{l}.W"] = prev.T @ dz
            grads[f"head{t}.{l}.b"] = dz.sum(axis=0)
            dh = dz @ a[f"head{t}.{l}.W"].T
        d_embed += dh

    dz = d_embed * (trace.embed_pre > 0.0)
    prev = trace.trunk_post[-1] if cfg.trunk_hidden else trace.x
    grads["embed.W"] = prev.T @ dz
    grads["embed.b"] = dz.sum(axis=0)
    dact = dz @ a["embed.W"].T
    for l in range(len(cfg.trunk_hidden) - 1, -1, -1):
        dz = dact * (trace.trunk_pre[l] > 0.0)
        prev = trace.trunk_post[l - 1] if l > 0 else trace.x
        grads[f"trunk{l}.W"] = prev.T @ dz
        grads[f"trunk{l}.b"] = dz.sum(axis=0)
        dact = dz @ a[f"trunk{l}.W"].T
    return grads


@dataclass
class AdamState:
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    t: int = 0


def init_adam(params: NetParams) -> AdamState:
    return AdamState(
        m={k: np.zeros_like(v) for k, v in params.arrays.items()},
        v={k: np.zeros_like(v) for k, v in params.arrays.items()},
    )


def adam_step(params: NetParams, grads: dict[str, np.ndarray],
              state: AdamState, hyper: AdamHyper) -> None:
    """Standard bias-corrected Adam update, in place."""
    for name in params.arrays:
        # reject before touching any state, so a failed step leaves the
        # parameters and moments exactly as they were
        if not np.all(np.isfinite(grads[name])):
            raise FloatingPointError(f"non-finite gradient for {name}")
    state.t += 1
    c1 = 1.0 - hyper.beta1 ** state.t
    c2 = 1.0 - hyper.beta2 ** state.t
    for name, arr in params.arrays.items():
        g = grads[name]
        m = state.m[name]
        v = state.v[name]
        m *= hyper.beta1
        m += (1.0 - hyper.beta1) * g
        v *= hyper.beta2
        v += (1.0 - hyper.beta2) * g * g
        arr -= hyper.learning_rate * (m / c1) / (np.sqrt(v / c2) + hyper.epsilon)
        if not np.all(np.isfinite(arr)):
            raise FloatingPointError(f"non-finite values in {name} after update")


@dataclass
class TrainResult:
    params: NetParams
    losses: np.ndarray     # raw per-step loss
    smoothed: np.ndarray   # exponential moving average, alpha = LOSS_EMA


def smooth_losses(losses: np.ndarray, alpha: float = LOSS_EMA) -> np.ndarray:
    out = np.empty_like(losses)
    acc = 0.0
    for i, x in enumerate(losses):
        acc = x if i == 0 else (1.0 - alpha) * acc + alpha * x
        out[i] = acc
    return out


def train_stream(net: BayesNet, config: NetConfig, steps: int,
                 rng: np.random.Generator | None = None) -> TrainResult:
    """Train on a stream of freshly sampled, masked batches.

    Per step: ancestral-sample a batch, mask each sample independently,
    encode, forward, cross-entropy, backprop, Adam. Nothing is persisted
    between steps except the parameters, and the whole run is deterministic
    given the seed.
    """
    c = net.compiled
    if rng is None:
        rng = make_rng(config.seed)
    types = effective_types(net, config.type_cap)
    params = init(config, types)
    state = init_adam(params)
    losses = np.zeros(steps, dtype=np.float64)
    for s in range(steps):
        u = rng.random((config.batch_size, net.n))
        samples = ancestral_batch(c.parent_flat, c.parent_off, c.cpt_flat, c.cpt_off, u)
        enc = mask_samples(samples, rng)
        trace = forward(params, enc, mode="train",
                        rng=rng if config.dropout_rate > 0.0 else None)
        targets = samples.astype(np.float64)
        losses[s] = bce_loss(trace.probs, targets)
        grads = backward(params, trace, targets)
        adam_step(params, grads, state, config.adam)
        params.step += 1
    return TrainResult(params, losses, smooth_losses(losses))


def extract_embedding(params: NetParams, x: np.ndarray) -> np.ndarray:
    """Embedding-layer activation for one encoding, eval semantics."""
    return forward(params, x, mode="eval").embed_post[0]


def predict_marginals(params: NetParams, enc: np.ndarray) -> np.ndarray:
    """Eval-mode output probabilities for a batch of encodings."""
    return forward(params, enc, mode="eval").probs


# ---------------------------------------------------------------------------
# Checkpoints: magic, version, JSON header, then raw little-endian float64
# arrays in declared parameter order.
# ---------------------------------------------------------------------------

def save_params(params: NetParams, path) -> None:
    header = json.dumps({
        "config": params.config.to_dict(),
        "node_types": params.node_types.tolist(),
        "step": params.step,
    }, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", CKPT_VERSION, len(header)))
        fh.write(header)
        for name, _ in _param_shapes(params.config):
            fh.write(np.ascontiguousarray(params.arrays[name], dtype="<f8").tobytes())


def load_params(path) -> NetParams:
    with open(path, "rb") as fh:
        blob = fh.read()
    buf = io.BytesIO(blob)
    magic = buf.read(len(MAGIC))
    if magic != MAGIC:
        raise CheckpointError("not a checkpoint file (bad magic)")
    head = buf.read(8)
    if len(head) != 8:
        raise CheckpointError("corrupt checkpoint: truncated header")
    version, hlen = struct.unpack("<II", head)
    if version != CKPT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    raw = buf.read(hlen)
    if len(raw) != hlen:
        raise CheckpointError("corrupt checkpoint: truncated header block")
    try:
        meta = json.loads(raw.decode("utf-8"))
        config = NetConfig.from_dict(meta["config"])
        node_types = np.asarray(meta["node_types"], dtype=np.int64)
        step = int(meta["step"])
    except (ValueError, KeyError, TypeError) as exc:
        raise CheckpointError(f"corrupt checkpoint header: {exc}") from exc
    arrays: dict[str, np.ndarray] = {}
    for name, shape in _param_shapes(config):
        nbytes = int(np.prod(shape)) * 8
        chunk = buf.read(nbytes)
        if len(chunk) != nbytes:
            raise CheckpointError(f"corrupt checkpoint: truncated array {name}")
        arrays[name] = np.frombuffer(chunk, dtype="<f8").astype(np.float64).reshape(shape)
    if buf.read(1):
        raise CheckpointError("corrupt checkpoint: trailing bytes")
    if node_types.shape != (config.n_nodes,):
        raise CheckpointError("corrupt checkpoint: node_types length mismatch")
    return NetParams(config, node_types, arrays, step)


def check_compatible(params: NetParams, net: BayesNet) -> None:
    """Raise when a checkpoint does not match the network it is used with."""
    if params.config.n_nodes != net.n:
        raise CheckpointError(
            f"checkpoint is for {params.config.n_nodes} nodes, network has {net.n}")
    types = effective_types(net, params.config.type_cap)
    if not np.array_equal(types, params.node_types):
        raise CheckpointError("checkpoint node types do not match the network")
