"""GCN, MeanGNN(+), SumGNN(+) and single-head GAT layers, pooling and forward passes.

Feature matrices are (d, n) arrays: column v is the embedding of node v.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .numerics import Classifier, Nonlinearity, classify, mlp_logit
from .rng import RngState
from .sampling import Graph

ARCHS = ("gcn", "mean", "mean_plus", "sum", "sum_plus", "gat")
POOLINGS = ("mean", "sum", "max")
DEFAULT_GAT_SLOPE = 0.2

# which preactivation blocks each architecture carries besides W_n and b
_HAS_SELF = {"sum", "sum_plus"}
_HAS_READOUT = {"mean_plus", "sum_plus"}


@dataclass
class Layer:
    W_n: np.ndarray
    b: np.ndarray
    W_s: np.ndarray | None = None
    W_r: np.ndarray | None = None
    a: np.ndarray | None = None
    slope: float = DEFAULT_GAT_SLOPE

    def __post_init__(self):
        self.W_n = np.atleast_2d(np.asarray(self.W_n, dtype=np.float64))
        self.b = np.asarray(self.b, dtype=np.float64).reshape(-1)
        out_dim, in_dim = self.W_n.shape
        if self.b.shape != (out_dim,):
            raise ValueError(f"bias has shape {self.b.shape}, expected ({out_dim},)")
        for name in ("W_s", "W_r"):
            w = getattr(self, name)
            if w is not None:
                w = np.atleast_2d(np.asarray(w, dtype=np.float64))
                if w.shape != self.W_n.shape:
                    raise ValueError(f"{name} has shape {w.shape}, expected {self.W_n.shape}")
                setattr(self, name, w)
        if self.a is not None:
            self.a = np.asarray(self.a, dtype=np.float64).reshape(-1)
            if self.a.shape != (2 * out_dim,):
                raise ValueError(f"attention vector has shape {self.a.shape}, expected ({2 * out_dim},)")

    def __eq__(self, other):
        if not isinstance(other, Layer):
            return NotImplemented

        def same(x, y):
            return (x is None and y is None) or (x is not None and y is not None and np.array_equal(x, y))

        return all(same(getattr(self, k), getattr(other, k)) for k in ("W_n", "b", "W_s", "W_r", "a")) and (
            self.slope == other.slope
        )

    @property
    def in_dim(self) -> int:
        return self.W_n.shape[1]

    @property
    def out_dim(self) -> int:
        return self.W_n.shape[0]

    def readout_or_zero(self) -> np.ndarray:
        return self.W_r if self.W_r is not None else np.zeros_like(self.W_n)

    def self_or_zero(self) -> np.ndarray:
        return self.W_s if self.W_s is not None else np.zeros_like(self.W_n)


@dataclass
class Model:
    arch: str
    layers: list[Layer]
    sigma: Nonlinearity = field(default_factory=Nonlinearity)
    pooling: str = "mean"
    input_dim: int | None = None

    def __post_init__(self):
        if self.layers:
            if self.input_dim is None:
                self.input_dim = self.layers[0].in_dim
            elif self.input_dim != self.layers[0].in_dim:
                raise ValueError(f"input_dim {self.input_dim} disagrees with first layer ({self.layers[0].in_dim})")
        elif self.input_dim is None:
            raise ValueError("a model without layers needs input_dim")
        if self.arch not in ARCHS:
            raise ValueError(f"unknown architecture {self.arch!r}; expected one of {ARCHS}")
        if self.pooling not in POOLINGS:
            raise ValueError(f"unknown pooling {self.pooling!r}; expected one of {POOLINGS}")
        for t, L in enumerate(self.layers, start=1):
            if t > 1 and L.in_dim != self.layers[t - 2].out_dim:
                raise ValueError(f"layer {t} input dim {L.in_dim} does not chain with {self.layers[t - 2].out_dim}")
            wants_self = self.arch in _HAS_SELF
            wants_readout = self.arch in _HAS_READOUT
            if (L.W_s is not None) != wants_self:
                raise ValueError(f"layer {t}: {self.arch} layers {'need' if wants_self else 'take no'} W_s")
            if (L.W_r is not None) != wants_readout:
                raise ValueError(f"layer {t}: {self.arch} layers {'need' if wants_readout else 'take no'} W_r")
            if (L.a is not None) != (self.arch == "gat"):
                raise ValueError(f"layer {t}: attention vector is only valid for gat")

    @property
    def T(self) -> int:
        return len(self.layers)

    @property
    def dims(self) -> list[int]:
        return [self.input_dim] + [L.out_dim for L in self.layers]


def init_model(arch, dims, sigma=None, pooling="mean", init_range=(-1.0, 1.0), rng: RngState | None = None,
               gat_slope=DEFAULT_GAT_SLOPE) -> Model:
    """Random model with every weight and bias entry i.i.d. U(lo, hi).

    Blocks are drawn per layer in the order W_n, b, W_s, W_r, a, so models of
    different architectures built from equal streams share the blocks they
    have in common (e.g. a GCN and a MeanGNN get identical W_n and b).
    """
    dims = [int(d) for d in dims]
    if not dims:
        raise ValueError("dims must contain at least d(0)")
    if any(d < 1 for d in dims):
        raise ValueError("all layer dimensions must be >= 1")
    lo, hi = init_range
    if not lo < hi:
        raise ValueError("init_range must satisfy lo < hi")
    if rng is None:
        raise ValueError("init_model needs an RngState")
    sigma = sigma if sigma is not None else Nonlinearity()
    if isinstance(sigma, str):
        sigma = Nonlinearity(sigma)
    layers = []
    for d_in, d_out in zip(dims[:-1], dims[1:]):
        W_n = rng.uniform((d_out, d_in), lo, hi)
        b = rng.uniform(d_out, lo, hi)
        W_s = rng.uniform((d_out, d_in), lo, hi) if arch in _HAS_SELF else None
        W_r = rng.uniform((d_out, d_in), lo, hi) if arch in _HAS_READOUT else None
        a = rng.uniform(2 * d_out, lo, hi) if arch == "gat" else None
        layers.append(Layer(W_n, b, W_s, W_r, a, gat_slope))
    return Model(arch, layers, sigma, pooling, dims[0])


# ---------------------------------------------------------------------------
# layers


def _family(arch: str) -> str:
    return {"mean_plus": "mean", "sum_plus": "sum"}.get(arch, arch)


def _propagate(family: str, g: Graph, X: np.ndarray) -> np.ndarray:
    """Neighbourhood aggregate of every row of X; linear in X, so rows may be stacked."""
    if family == "gcn":
        scale = 1.0 / np.sqrt(g.degrees + 1.0)
        Xs = X * scale
        return (g.neighbor_sum(Xs) + Xs) * scale
    if family == "mean":
        return (g.neighbor_sum(X) + X) / (g.degrees + 1.0)
    if family == "sum":
        return g.neighbor_sum(X)
    raise ValueError(f"no linear aggregator for {family!r}")


def _combine(family: str, L: Layer, X: np.ndarray, agg: np.ndarray, sigma: Nonlinearity, with_readout: bool):
    y = L.W_n @ agg + L.b[:, None]
    if family == "sum":
        y += L.W_s @ X
    if with_readout:
        total = X.sum(axis=1)
        if family == "mean":
            total = total / X.shape[1]
        y += (L.W_r @ total)[:, None]
    return sigma(y)


def _check_input(L: Layer, g: Graph, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape != (L.in_dim, g.n):
        raise ValueError(f"dimension mismatch: layer expects ({L.in_dim}, {g.n}), got {X.shape}")
    return X


def layer_gcn(L: Layer, g: Graph, X: np.ndarray, sigma: Nonlinearity) -> np.ndarray:
    """Symmetric-normalised self-loop convolution with deg+ = degree + 1."""
    X = _check_input(L, g, X)
    return _combine("gcn", L, X, _propagate("gcn", g, X), sigma, False)


def _resolve_readout(L: Layer, with_readout):
    if with_readout is None:
        return L.W_r is not None
    if with_readout and L.W_r is None:
        raise ValueError("with_readout requested but the layer has no W_r block")
    return bool(with_readout)


def layer_mean(L: Layer, g: Graph, X: np.ndarray, sigma: Nonlinearity, with_readout=None) -> np.ndarray:
    X = _check_input(L, g, X)
    return _combine("mean", L, X, _propagate("mean", g, X), sigma, _resolve_readout(L, with_readout))


def layer_sum(L: Layer, g: Graph, X: np.ndarray, sigma: Nonlinearity, with_readout=None) -> np.ndarray:
    X = _check_input(L, g, X)
    if L.W_s is None:
        raise ValueError("sum layers need a W_s block")
    return _combine("sum", L, X, _propagate("sum", g, X), sigma, _resolve_readout(L, with_readout))


def layer_gat(L: Layer, g: Graph, X: np.ndarray, sigma: Nonlinearity) -> np.ndarray:
    """Single-head attention over N+(v) with a shared projection W_n."""
    X = _check_input(L, g, X)
    if L.a is None:
        raise ValueError("gat layers need an attention vector")
    H = L.W_n @ X
    d = L.out_dim
    src = L.a[:d] @ H
    dst = L.a[d:] @ H
    Y = np.empty_like(H)
    step = g.block_rows()
    for s in range(0, g.n, step):
        rows = np.arange(s, min(s + step, g.n))
        mask = np.unpackbits(g.bits[rows], axis=1, count=g.n).astype(bool)
        mask[np.arange(rows.size), rows] = True
        e = src[rows, None] + dst[None, :]
        e = np.where(e > 0, e, L.slope * e)
        e = np.where(mask, e, -np.inf)
        e -= e.max(axis=1, keepdims=True)
        w = np.exp(e)
        w /= w.sum(axis=1, keepdims=True)
        Y[:, rows] = H @ w.T
    return sigma(Y + L.b[:, None])


def apply_layer(m: Model, L: Layer, g: Graph, X: np.ndarray) -> np.ndarray:
    if m.arch == "gcn":
        return layer_gcn(L, g, X, m.sigma)
    if m.arch in ("mean", "mean_plus"):
        return layer_mean(L, g, X, m.sigma)
    if m.arch in ("sum", "sum_plus"):
        return layer_sum(L, g, X, m.sigma)
    return layer_gat(L, g, X, m.sigma)


def pool(kind: str, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] == 0:
        raise ValueError("pooling needs at least one node")
    if kind == "mean":
        return X.mean(axis=1)
    if kind == "sum":
        return X.sum(axis=1)
    if kind == "max":
        return X.max(axis=1)
    raise ValueError(f"unknown pooling {kind!r}")


@dataclass
class ForwardTrace:
    embeddings: list[np.ndarray]
    pooled: np.ndarray
    bit: int | None = None
    logit: float | None = None


def forward(m: Model, g: Graph, X0: np.ndarray, c: Classifier | None = None, capture: bool = True) -> ForwardTrace:
    """Run all layers, pool, and optionally classify.

    With ``capture=False`` only the final embedding matrix is kept.
    """
    X = np.asarray(X0, dtype=np.float64)
    if X.ndim != 2 or X.shape != (m.dims[0], g.n):
        raise ValueError(f"dimension mismatch: model expects ({m.dims[0]}, {g.n}) features, got {X.shape}")
    embeddings = [X]
    for L in m.layers:
        X = apply_layer(m, L, g, X)
        if capture:
            embeddings.append(X)
        else:
            embeddings = [X]
    pooled = pool(m.pooling, X)
    trace = ForwardTrace(embeddings, pooled)
    if c is not None:
        trace.logit = mlp_logit(c, pooled)
        trace.bit = classify(c, pooled)
    return trace


def forward_many(models: list[Model], g: Graph, X0: np.ndarray, classifiers: list[Classifier]) -> list[int]:
    """Classification bits of several models on one (graph, features) sample.

    Matches calling ``forward`` per model, but aggregations of models sharing
    an aggregator are stacked into one pass over the adjacency, and the first
    layer aggregates X0 only once.
    """
    X0 = np.asarray(X0, dtype=np.float64)
    current = [X0] * len(models)
    depth = max((mm.T for mm in models), default=0)
    for t in range(depth):
        active = [i for i, mm in enumerate(models) if mm.T > t]
        by_family: dict[str, list[int]] = {}
        for i in active:
            if models[i].arch == "gat":
                current[i] = layer_gat(models[i].layers[t], g, current[i], models[i].sigma)
            else:
                by_family.setdefault(_family(models[i].arch), []).append(i)
        for family, idx in by_family.items():
            inputs: list[np.ndarray] = []
            slot: dict[int, int] = {}
            for i in idx:
                if id(current[i]) not in slot:
                    slot[id(current[i])] = len(inputs)
                    inputs.append(current[i])
            offsets = np.cumsum([0] + [x.shape[0] for x in inputs])
            agg = _propagate(family, g, np.vstack(inputs))
            nxt = {}
            for i in idx:
                k = slot[id(current[i])]
                L = models[i].layers[t]
                X = _check_input(L, g, current[i])
                nxt[i] = _combine(family, L, X, agg[offsets[k] : offsets[k + 1]], models[i].sigma, L.W_r is not None)
            for i, X in nxt.items():
                current[i] = X
    return [classify(c, pool(mm.pooling, X)) for mm, c, X in zip(models, classifiers, current)]


# ---------------------------------------------------------------------------
# model files


def model_to_json(m: Model, classifier: Classifier | None = None) -> dict:
    layers = []
    for L in m.layers:
        entry = {}
        if L.W_s is not None:
            entry["W_s"] = L.W_s.tolist()
        entry["W_n"] = L.W_n.tolist()
        if L.W_r is not None:
            entry["W_r"] = L.W_r.tolist()
        entry["b"] = L.b.tolist()
        if L.a is not None:
            entry["a"] = L.a.tolist()
            entry["slope"] = L.slope
        layers.append(entry)
    obj = {"arch": m.arch, "dims": m.dims, "sigma": m.sigma.to_json(), "pooling": m.pooling, "layers": layers}
    if classifier is not None:
        obj["classifier"] = classifier.to_json()
    return obj


_MODEL_KEYS = {"arch", "dims", "sigma", "pooling", "layers", "classifier"}
_LAYER_KEYS = {"W_s", "W_n", "W_r", "b", "a", "slope"}


def model_from_json(obj: dict) -> tuple[Model, Classifier | None]:
    extra = set(obj) - _MODEL_KEYS
    if extra:
        raise ValueError(f"unknown model keys {sorted(extra)}")
    layers = []
    for t, entry in enumerate(obj["layers"], start=1):
        bad = set(entry) - _LAYER_KEYS
        if bad:
            raise ValueError(f"layers[{t - 1}]: unknown keys {sorted(bad)}")
        layers.append(
            Layer(entry["W_n"], entry["b"], entry.get("W_s"), entry.get("W_r"), entry.get("a"),
                  float(entry.get("slope", DEFAULT_GAT_SLOPE)))
        )
    m = Model(obj["arch"], layers, Nonlinearity.from_json(obj.get("sigma", "clipped_identity")),
              obj.get("pooling", "mean"), int(obj["dims"][0]))
    if [int(d) for d in obj["dims"]] != m.dims:
        raise ValueError(f"dims {obj['dims']} disagree with layer shapes {m.dims}")
    c = Classifier.from_json(obj["classifier"]) if "classifier" in obj else None
    if c is not None and c.input_dim != m.dims[-1]:
        raise ValueError("classifier input dimension does not match d(T)")
    return m, c


def dumps_model(m: Model, classifier: Classifier | None = None) -> str:
    return json.dumps(model_to_json(m, classifier), indent=1) + "\n"


def save_model(path, m: Model, classifier: Classifier | None = None) -> None:
    Path(path).write_text(dumps_model(m, classifier))


def load_model(path) -> tuple[Model, Classifier | None]:
    return model_from_json(json.loads(Path(path).read_text()))
