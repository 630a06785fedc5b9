"""Graph neural networks with hand-written forward and backward passes.

Three layer families (GCN, GraphSage mean-aggregator, single-head GAT) run
over the leaf -> root edges of a claim graph, so aggregation at a node pulls
from its children and information flows toward the root.  The graph-level
readout averages the root and target rows, optionally concatenates an
external feature vector, and a one-hidden-layer MLP emits a scalar logit.

Everything is float64 numpy with explicit gradients; training uses Adam over
seeded-shuffle mini-batches and is bit-deterministic for a fixed config.
"""

from __future__ import annotations

import json
import struct
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .embed import EmbeddedGraph
from .errors import EmptyInput, NonFiniteLoss, ShapeMismatch
from .graph import FlanGraph

ARCHS = ("gcn", "graphsage", "gat")

_LEAKY_SLOPE = 0.2
_ADAM_BETA1 = 0.9
_ADAM_BETA2 = 0.999
_ADAM_EPS = 1e-8

CHECKPOINT_MAGIC = b"FLANCKPT"


@dataclass(frozen=True)
class ModelConfig:
    input_dim: int
    arch: str = "graphsage"
    num_layers: int = 2
    hidden_dim: int = 128
    feature_dim: int = 0
    learning_rate: float = 5e-3
    batch_size: int = 256
    epochs: int = 20
    seed: int = 0
    add_self_loops: bool = True
    add_reverse_edges: bool = False
    positive_class_weight: float = 1.0
    targets_only: bool = False

    def __post_init__(self):
        if self.arch not in ARCHS:
            raise ValueError(f"arch must be one of {ARCHS}, got {self.arch!r}")
        if not 1 <= self.num_layers <= 8:
            raise ValueError("num_layers must be in 1..8")
        for name in ("input_dim", "hidden_dim", "batch_size"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.feature_dim < 0 or self.epochs < 0:
            raise ValueError("feature_dim and epochs must be non-negative")
        if self.learning_rate <= 0 or self.positive_class_weight <= 0:
            raise ValueError("learning_rate and positive_class_weight must be positive")

    def layer_dims(self) -> list[tuple[int, int]]:
        dims = [self.input_dim] + [self.hidden_dim] * self.num_layers
        return list(zip(dims[:-1], dims[1:]))


@dataclass
class TrainReport:
    seed: int
    epoch_losses: list[float] = field(default_factory=list)
    val_auc: float | None = None
    val_macro_f1: float | None = None
    wall_seconds: float = 0.0

    def to_dict(self, include_timing: bool = False) -> dict:
        d = {
            "seed": self.seed,
            "epoch_losses": self.epoch_losses,
            "val_auc": self.val_auc,
            "val_macro_f1": self.val_macro_f1,
        }
        if include_timing:
            d["wall_seconds"] = self.wall_seconds
        return d


def _glorot(rng: np.random.Generator, fan_in: int, fan_out: int, shape) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


def param_names(config: ModelConfig) -> list[str]:
    names: list[str] = []
    for layer in range(config.num_layers):
        if config.arch == "gcn":
            names += [f"gcn.W.{layer}", f"gcn.b.{layer}"]
        elif config.arch == "graphsage":
            names += [f"sage.Wself.{layer}", f"sage.Wneigh.{layer}", f"sage.b.{layer}"]
        else:
            names += [f"gat.W.{layer}", f"gat.a.{layer}", f"gat.b.{layer}"]
    names += ["mlp.W1", "mlp.b1", "mlp.W2", "mlp.b2"]
    return names


def init_params(config: ModelConfig, rng: np.random.Generator | None = None) -> dict[str, np.ndarray]:
    """Glorot-uniform weights, zero biases, drawn in a fixed order."""
    if rng is None:
        rng = np.random.default_rng(config.seed)
    params: dict[str, np.ndarray] = {}
    for layer, (din, dout) in enumerate(config.layer_dims()):
        if config.arch == "gcn":
            params[f"gcn.W.{layer}"] = _glorot(rng, din, dout, (din, dout))
            params[f"gcn.b.{layer}"] = np.zeros(dout)
        elif config.arch == "graphsage":
            params[f"sage.Wself.{layer}"] = _glorot(rng, din, dout, (din, dout))
            params[f"sage.Wneigh.{layer}"] = _glorot(rng, din, dout, (din, dout))
            params[f"sage.b.{layer}"] = np.zeros(dout)
        else:
            params[f"gat.W.{layer}"] = _glorot(rng, din, dout, (din, dout))
            params[f"gat.a.{layer}"] = _glorot(rng, 2 * dout, 1, (2 * dout,))
            params[f"gat.b.{layer}"] = np.zeros(dout)
    mlp_in = config.hidden_dim + config.feature_dim
    params["mlp.W1"] = _glorot(rng, mlp_in, config.hidden_dim, (mlp_in, config.hidden_dim))
    params["mlp.b1"] = np.zeros(config.hidden_dim)
    params["mlp.W2"] = _glorot(rng, config.hidden_dim, 1, (config.hidden_dim, 1))
    params["mlp.b2"] = np.zeros(1)
    return params


# ---------------------------------------------------------------------------
# message-passing structure


def effective_edges(
    edges: Sequence[tuple[int, int]], add_reverse: bool
) -> list[tuple[int, int]]:
    out = [(int(a), int(b)) for a, b in edges]
    if add_reverse:
        out += [(b, a) for a, b in edges]
    return out


@dataclass
class _Prop:
    """Precomputed per-graph message routing for one configuration."""

    n: int
    src: np.ndarray  # message sources
    dst: np.ndarray  # message destinations
    coef: np.ndarray  # per-message weight (gcn normalization / sage mean)
    gat_nbrs: list[np.ndarray] | None = None  # in-neighbors incl. self, per node


def _build_prop(n: int, edges: Sequence[tuple[int, int]], config: ModelConfig) -> _Prop:
    eff = effective_edges(edges, config.add_reverse_edges)
    if config.arch == "gcn":
        pairs = list(eff)
        if config.add_self_loops:
            pairs += [(i, i) for i in range(n)]
        src = np.array([p[0] for p in pairs], dtype=np.intp)
        dst = np.array([p[1] for p in pairs], dtype=np.intp)
        indeg = np.zeros(n)
        np.add.at(indeg, dst, 1.0)
        if config.add_reverse_edges:
            # Symmetric adjacency: D^{-1/2} A D^{-1/2}.
            d = np.where(indeg > 0, indeg, 1.0)
            coef = 1.0 / np.sqrt(d[src] * d[dst])
        else:
            # Directed leaf->root flow: rows normalized by in-degree.
            d = np.where(indeg > 0, indeg, 1.0)
            coef = 1.0 / d[dst]
        return _Prop(n=n, src=src, dst=dst, coef=coef)
    if config.arch == "graphsage":
        src = np.array([p[0] for p in eff], dtype=np.intp)
        dst = np.array([p[1] for p in eff], dtype=np.intp)
        indeg = np.zeros(n)
        np.add.at(indeg, dst, 1.0)
        d = np.where(indeg > 0, indeg, 1.0)
        coef = 1.0 / d[dst] if len(dst) else np.zeros(0)
        return _Prop(n=n, src=src, dst=dst, coef=coef)
    # GAT: per-node in-neighborhoods, self always included.
    nbrs: list[list[int]] = [[v] for v in range(n)]
    for u, v in eff:
        nbrs[v].append(u)
    gat = [np.array(sorted(set(lst)), dtype=np.intp) for lst in nbrs]
    empty = np.zeros(0, dtype=np.intp)
    return _Prop(n=n, src=empty, dst=empty, coef=np.zeros(0), gat_nbrs=gat)


def _aggregate(prop: _Prop, h: np.ndarray) -> np.ndarray:
    agg = np.zeros_like(h)
    if len(prop.src):
        np.add.at(agg, prop.dst, h[prop.src] * prop.coef[:, None])
    return agg


def _aggregate_t(prop: _Prop, g: np.ndarray) -> np.ndarray:
    back = np.zeros_like(g)
    if len(prop.src):
        np.add.at(back, prop.src, g[prop.dst] * prop.coef[:, None])
    return back


# ---------------------------------------------------------------------------
# layer forward/backward


def _linear_layer_forward(h, prop, config, params, layer):
    if config.arch == "gcn":
        W = params[f"gcn.W.{layer}"]
        b = params[f"gcn.b.{layer}"]
        agg = _aggregate(prop, h)
        z = agg @ W + b
        out = np.maximum(z, 0.0)
        return out, {"h": h, "agg": agg, "z": z}
    W_self = params[f"sage.Wself.{layer}"]
    W_neigh = params[f"sage.Wneigh.{layer}"]
    b = params[f"sage.b.{layer}"]
    neigh = _aggregate(prop, h)
    z = h @ W_self + neigh @ W_neigh + b
    out = np.maximum(z, 0.0)
    return out, {"h": h, "neigh": neigh, "z": z}


def _linear_layer_backward(dout, cache, prop, config, params, layer, grads):
    dz = dout * (cache["z"] > 0)
    if config.arch == "gcn":
        W = params[f"gcn.W.{layer}"]
        grads[f"gcn.W.{layer}"] += cache["agg"].T @ dz
        grads[f"gcn.b.{layer}"] += dz.sum(axis=0)
        dagg = dz @ W.T
        return _aggregate_t(prop, dagg)
    W_self = params[f"sage.Wself.{layer}"]
    W_neigh = params[f"sage.Wneigh.{layer}"]
    grads[f"sage.Wself.{layer}"] += cache["h"].T @ dz
    grads[f"sage.Wneigh.{layer}"] += cache["neigh"].T @ dz
    grads[f"sage.b.{layer}"] += dz.sum(axis=0)
    return dz @ W_self.T + _aggregate_t(prop, dz @ W_neigh.T)


def _gat_layer_forward(h, prop, config, params, layer):
    W = params[f"gat.W.{layer}"]
    a = params[f"gat.a.{layer}"]
    b = params[f"gat.b.{layer}"]
    dout = W.shape[1]
    a_l, a_r = a[:dout], a[dout:]
    z = h @ W
    o = np.zeros((prop.n, dout))
    per_node = []
    for v in range(prop.n):
        nbrs = prop.gat_nbrs[v]
        s = z[nbrs] @ a_l + z[v] @ a_r
        e = np.where(s > 0, s, _LEAKY_SLOPE * s)
        e = e - e.max()
        alpha = np.exp(e)
        alpha /= alpha.sum()
        o[v] = alpha @ z[nbrs]
        per_node.append((nbrs, s, alpha))
    zb = o + b
    out = np.maximum(zb, 0.0)
    return out, {"h": h, "z": z, "per_node": per_node, "zb": zb}


def _gat_layer_backward(dout_grad, cache, prop, config, params, layer, grads):
    W = params[f"gat.W.{layer}"]
    a = params[f"gat.a.{layer}"]
    d = W.shape[1]
    a_l, a_r = a[:d], a[d:]
    z = cache["z"]
    dzb = dout_grad * (cache["zb"] > 0)
    dz = np.zeros_like(z)
    da = np.zeros_like(a)
    for v in range(prop.n):
        nbrs, s, alpha = cache["per_node"][v]
        zS = z[nbrs]
        do = dzb[v]
        dalpha = zS @ do
        dz[nbrs] += alpha[:, None] * do[None, :]
        de = alpha * (dalpha - float(alpha @ dalpha))
        ds = de * np.where(s > 0, 1.0, _LEAKY_SLOPE)
        da[:d] += ds @ zS
        da[d:] += ds.sum() * z[v]
        dz[nbrs] += ds[:, None] * a_l[None, :]
        dz[v] += ds.sum() * a_r
    grads[f"gat.W.{layer}"] += cache["h"].T @ dz
    grads[f"gat.a.{layer}"] += da
    grads[f"gat.b.{layer}"] += dzb.sum(axis=0)
    return dz @ W.T


# ---------------------------------------------------------------------------
# public single-layer ops (forward only), handy for oracle comparisons


def _single_layer_config(arch: str, din: int, dout: int, self_loops: bool, reverse: bool) -> ModelConfig:
    return ModelConfig(
        input_dim=din,
        arch=arch,
        num_layers=1,
        hidden_dim=dout,
        add_self_loops=self_loops,
        add_reverse_edges=reverse,
    )


def gcn_layer(features, edges, weights, bias, self_loops=True, reverse_edges=False):
    """ReLU(normalized-adjacency @ features @ W + b)."""
    features = np.asarray(features, dtype=np.float64)
    cfg = _single_layer_config("gcn", features.shape[1], weights.shape[1], self_loops, reverse_edges)
    _check_dims(features, weights, bias)
    prop = _build_prop(features.shape[0], edges, cfg)
    out, _ = _linear_layer_forward(features, prop, cfg, {"gcn.W.0": weights, "gcn.b.0": bias}, 0)
    return out


def sage_layer(features, edges, w_self, w_neigh, bias, reverse_edges=False):
    """ReLU(h @ W_self + mean-of-in-neighbors @ W_neigh + b)."""
    features = np.asarray(features, dtype=np.float64)
    cfg = _single_layer_config("graphsage", features.shape[1], w_self.shape[1], False, reverse_edges)
    _check_dims(features, w_self, bias)
    _check_dims(features, w_neigh, bias)
    prop = _build_prop(features.shape[0], edges, cfg)
    params = {"sage.Wself.0": w_self, "sage.Wneigh.0": w_neigh, "sage.b.0": bias}
    out, _ = _linear_layer_forward(features, prop, cfg, params, 0)
    return out


def gat_layer(features, edges, weights, attention_vec, bias, reverse_edges=False):
    """Single-head attention over in-neighborhoods (self-loop always present)."""
    features = np.asarray(features, dtype=np.float64)
    cfg = _single_layer_config("gat", features.shape[1], weights.shape[1], True, reverse_edges)
    _check_dims(features, weights, bias)
    if attention_vec.shape != (2 * weights.shape[1],):
        raise ShapeMismatch(
            f"attention vector must have shape ({2 * weights.shape[1]},), got {attention_vec.shape}"
        )
    prop = _build_prop(features.shape[0], edges, cfg)
    params = {"gat.W.0": weights, "gat.a.0": attention_vec, "gat.b.0": bias}
    out, _ = _gat_layer_forward(features, prop, cfg, params, 0)
    return out


def _check_dims(features, weights, bias):
    if features.ndim != 2 or weights.ndim != 2 or features.shape[1] != weights.shape[0]:
        raise ShapeMismatch(
            f"features {features.shape} incompatible with weights {weights.shape}"
        )
    if bias.shape != (weights.shape[1],):
        raise ShapeMismatch(f"bias shape {bias.shape} != ({weights.shape[1]},)")


# ---------------------------------------------------------------------------
# full model


def readout(embedded_after_gnn: np.ndarray, graph: FlanGraph, targets_only: bool = False) -> np.ndarray:
    """Mean over {root} union {targets} (targets alone with ``targets_only``)."""
    if embedded_after_gnn.shape[0] != len(graph.nodes):
        raise ShapeMismatch("readout row count differs from node count")
    rows = {node.node_id for node in graph.targets}
    if not targets_only:
        rows.add(graph.root.node_id)
    idx = sorted(rows)
    return embedded_after_gnn[idx].mean(axis=0)


def forward(
    embedded: EmbeddedGraph,
    feature_vec: np.ndarray | None,
    params: dict[str, np.ndarray],
    config: ModelConfig,
    prop: _Prop | None = None,
):
    """Run the full model on one graph; returns (logit, cache)."""
    h = embedded.features
    if h.shape[1] != config.input_dim:
        raise ShapeMismatch(f"features dim {h.shape[1]} != input_dim {config.input_dim}")
    if config.feature_dim == 0:
        feat = np.zeros(0)
    else:
        if feature_vec is None or len(feature_vec) != config.feature_dim:
            raise ShapeMismatch(
                f"feature vector of length {config.feature_dim} required"
            )
        feat = np.asarray(feature_vec, dtype=np.float64)
    if prop is None:
        prop = _build_prop(len(embedded.graph.nodes), embedded.graph.edges, config)

    layer_caches = []
    for layer in range(config.num_layers):
        if config.arch == "gat":
            h, cache = _gat_layer_forward(h, prop, config, params, layer)
        else:
            h, cache = _linear_layer_forward(h, prop, config, params, layer)
        layer_caches.append(cache)

    r = readout(h, embedded.graph, config.targets_only)
    x = np.concatenate([r, feat])
    pre1 = x @ params["mlp.W1"] + params["mlp.b1"]
    h1 = np.maximum(pre1, 0.0)
    logit = float((h1 @ params["mlp.W2"])[0] + params["mlp.b2"][0])
    cache = {
        "prop": prop,
        "layers": layer_caches,
        "x": x,
        "pre1": pre1,
        "h1": h1,
        "graph": embedded.graph,
    }
    return logit, cache


def backward(cache, dlogit: float, params: dict[str, np.ndarray], config: ModelConfig):
    """Gradients of dlogit * logit with respect to every parameter."""
    grads = {name: np.zeros_like(value) for name, value in params.items()}
    h1 = cache["h1"]
    x = cache["x"]
    grads["mlp.W2"] += np.outer(h1, [dlogit])
    grads["mlp.b2"] += np.array([dlogit])
    dh1 = params["mlp.W2"][:, 0] * dlogit
    dpre1 = dh1 * (cache["pre1"] > 0)
    grads["mlp.W1"] += np.outer(x, dpre1)
    grads["mlp.b1"] += dpre1
    dx = params["mlp.W1"] @ dpre1

    graph = cache["graph"]
    dr = dx[: config.hidden_dim]
    rows = {node.node_id for node in graph.targets}
    if not config.targets_only:
        rows.add(graph.root.node_id)
    idx = sorted(rows)
    dh = np.zeros((len(graph.nodes), config.hidden_dim))
    dh[idx] = dr / len(idx)

    prop = cache["prop"]
    for layer in reversed(range(config.num_layers)):
        layer_cache = cache["layers"][layer]
        if config.arch == "gat":
            dh = _gat_layer_backward(dh, layer_cache, prop, config, params, layer, grads)
        else:
            dh = _linear_layer_backward(dh, layer_cache, prop, config, params, layer, grads)
    return grads


def _sigmoid(z: float) -> float:
    if z >= 0:
        return 1.0 / (1.0 + np.exp(-z))
    e = np.exp(z)
    return e / (1.0 + e)


def _softplus(z: float) -> float:
    return float(np.log1p(np.exp(-abs(z))) + max(z, 0.0))


def bce_loss(logit: float, label: int, pos_weight: float = 1.0) -> tuple[float, float]:
    """Binary cross-entropy on a logit; returns (loss, dloss/dlogit)."""
    y = float(label)
    loss = pos_weight * y * _softplus(-logit) + (1.0 - y) * _softplus(logit)
    sig = _sigmoid(logit)
    dlogit = pos_weight * y * (sig - 1.0) + (1.0 - y) * sig
    return loss, dlogit


# ---------------------------------------------------------------------------
# training


TrainExample = tuple[EmbeddedGraph, np.ndarray | None, int]


def train(
    dataset: Sequence[TrainExample],
    config: ModelConfig,
    valid: Sequence[TrainExample] | None = None,
) -> tuple[dict[str, np.ndarray], TrainReport]:
    """Adam training over seeded-shuffle mini-batches of whole graphs."""
    if not dataset:
        raise EmptyInput("training set is empty")
    for _, _, label in dataset:
        if label not in (0, 1):
            raise EmptyInput("training requires 0/1 labels on every example")

    start = time.perf_counter()
    rng = np.random.default_rng(config.seed)
    params = init_params(config, rng)
    props = [
        _build_prop(len(ex[0].graph.nodes), ex[0].graph.edges, config) for ex in dataset
    ]
    m = {k: np.zeros_like(v) for k, v in params.items()}
    v = {k: np.zeros_like(p) for k, p in params.items()}
    step = 0
    report = TrainReport(seed=config.seed)

    for epoch in range(config.epochs):
        order = rng.permutation(len(dataset))
        epoch_loss = 0.0
        for lo in range(0, len(order), config.batch_size):
            batch = order[lo: lo + config.batch_size]
            grads = {k: np.zeros_like(p) for k, p in params.items()}
            batch_loss = 0.0
            for i in batch:
                embedded, feat, label = dataset[i]
                logit, cache = forward(embedded, feat, params, config, props[i])
                loss, dlogit = bce_loss(logit, label, config.positive_class_weight)
                if not np.isfinite(loss):
                    raise NonFiniteLoss(
                        f"epoch {epoch}, example {int(i)}: loss={loss}, logit={logit}"
                    )
                batch_loss += loss
                g = backward(cache, dlogit, params, config)
                for name in grads:
                    grads[name] += g[name]
            scale = 1.0 / len(batch)
            step += 1
            for name in params:
                grad = grads[name] * scale
                m[name] = _ADAM_BETA1 * m[name] + (1 - _ADAM_BETA1) * grad
                v[name] = _ADAM_BETA2 * v[name] + (1 - _ADAM_BETA2) * grad * grad
                mhat = m[name] / (1 - _ADAM_BETA1 ** step)
                vhat = v[name] / (1 - _ADAM_BETA2 ** step)
                params[name] -= config.learning_rate * mhat / (np.sqrt(vhat) + _ADAM_EPS)
            epoch_loss += batch_loss
        report.epoch_losses.append(epoch_loss / len(dataset))

    if valid:
        from .metrics import macro_f1, roc_auc

        scores = predict(params, config, [ex[0] for ex in valid], [ex[1] for ex in valid])
        labels = [ex[2] for ex in valid]
        report.val_auc = roc_auc(scores, labels)
        report.val_macro_f1 = macro_f1(scores, labels)
    report.wall_seconds = time.perf_counter() - start
    return params, report


def predict(
    params: dict[str, np.ndarray],
    config: ModelConfig,
    graphs: Sequence[EmbeddedGraph],
    feature_vecs: Sequence[np.ndarray | None] | None = None,
) -> list[float]:
    """Per-graph approval probabilities, order preserved."""
    if feature_vecs is None:
        feature_vecs = [None] * len(graphs)
    if len(feature_vecs) != len(graphs):
        raise ShapeMismatch("graphs and feature vectors differ in length")
    out = []
    for embedded, feat in zip(graphs, feature_vecs):
        logit, _ = forward(embedded, feat, params, config)
        out.append(_sigmoid(logit))
    return out


# ---------------------------------------------------------------------------
# checkpoint io: JSON header, then all parameters as little-endian f32


def save_checkpoint(path: str | Path, params: dict[str, np.ndarray], config: ModelConfig) -> None:
    names = param_names(config)
    header = {
        "config": asdict(config),
        "params": [{"name": n, "shape": list(params[n].shape)} for n in names],
    }
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        for name in names:
            fh.write(np.asarray(params[name], dtype="<f4").tobytes())


def load_checkpoint(path: str | Path) -> tuple[dict[str, np.ndarray], ModelConfig]:
    raw = Path(path).read_bytes()
    if not raw.startswith(CHECKPOINT_MAGIC):
        raise ShapeMismatch(f"{path}: not a checkpoint file")
    (hlen,) = struct.unpack_from("<I", raw, len(CHECKPOINT_MAGIC))
    start = len(CHECKPOINT_MAGIC) + 4
    header = json.loads(raw[start: start + hlen].decode("utf-8"))
    config = ModelConfig(**header["config"])
    params: dict[str, np.ndarray] = {}
    offset = start + hlen
    for spec in header["params"]:
        shape = tuple(spec["shape"])
        count = int(np.prod(shape)) if shape else 1
        vec = np.frombuffer(raw, dtype="<f4", count=count, offset=offset)
        params[spec["name"]] = vec.astype(np.float64).reshape(shape)
        offset += 4 * count
    if offset != len(raw):
        raise ShapeMismatch(f"{path}: trailing bytes after parameter payload")
    return params, config
