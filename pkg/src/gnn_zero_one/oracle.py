"""Asymptotic output of a model computed from its weights alone.

GCN and MeanGNN(+) embeddings concentrate around the mean recurrence
``mu_t = sigma(W mu_{t-1} + b)``; SumGNN(+) embeddings saturate at the corner
``z_t`` given by the signs of ``(r W_n + W_r) z_{t-1}``.  This module computes
both sequences, the conditions under which they govern the limit, the
predicted class, and the node-count threshold construction built on a
SumGNN+ with global readout.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .models import Layer, Model
from .numerics import Classifier, Nonlinearity, classify, margin

DEFAULT_TOL = 1e-9
MAX_CORNER_WIDTH = 20


@dataclass
class LimitTrace:
    kind: str  # "mu_sequence" or "z_sequence"
    vectors: list[np.ndarray]
    margins: list[float] = field(default_factory=list)
    verdict: str = "ok"  # "ok", "splitting" or "not_saturating"
    locus: tuple[int, int] | None = None

    @property
    def final(self) -> np.ndarray:
        return self.vectors[-1]

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "vectors": [v.tolist() for v in self.vectors],
            "margins": list(self.margins),
            "verdict": self.verdict,
            "locus": list(self.locus) if self.locus is not None else None,
        }


@dataclass
class Prediction:
    label: int | None  # None means undetermined
    margin: float = 0.0
    reason: str = ""
    trace: LimitTrace | None = None

    @property
    def determined(self) -> bool:
        return self.label is not None

    def label_text(self) -> str:
        return "undetermined" if self.label is None else str(self.label)

    def to_json(self) -> dict:
        return {
            "class": self.label_text(),
            "margin": self.margin,
            "reason": self.reason,
            "trace": self.trace.to_json() if self.trace is not None else None,
        }


def _as_mu(m: Model, mu) -> np.ndarray:
    mu = np.asarray(mu, dtype=np.float64).reshape(-1)
    if mu.shape != (m.dims[0],):
        raise ValueError(f"mean vector has length {mu.size}, model expects {m.dims[0]}")
    return mu


def limit_gcn(m: Model, mu) -> LimitTrace:
    if m.arch != "gcn":
        raise ValueError(f"limit_gcn needs a gcn model, got {m.arch}")
    vectors = [_as_mu(m, mu)]
    for L in m.layers:
        vectors.append(m.sigma(L.W_n @ vectors[-1] + L.b))
    return LimitTrace("mu_sequence", vectors)


def limit_mean(m: Model, mu) -> LimitTrace:
    """Mean recurrence with the readout folded in: sigma((W_n + W_r) mu + b)."""
    if m.arch not in ("mean", "mean_plus"):
        raise ValueError(f"limit_mean needs a mean or mean_plus model, got {m.arch}")
    vectors = [_as_mu(m, mu)]
    for L in m.layers:
        vectors.append(m.sigma((L.W_n + L.readout_or_zero()) @ vectors[-1] + L.b))
    return LimitTrace("mu_sequence", vectors)


def _sign_matrix(L: Layer, r: float) -> np.ndarray:
    return r * L.W_n + L.readout_or_zero()


def limit_sum(m: Model, r: float, mu, tol: float = DEFAULT_TOL) -> LimitTrace:
    """Saturation corners z_1..z_T; stops at the first component with |q_i| <= tol."""
    if m.arch not in ("sum", "sum_plus"):
        raise ValueError(f"limit_sum needs a sum or sum_plus model, got {m.arch}")
    if not m.sigma.eventually_constant:
        raise ValueError(f"saturation oracle undefined: {m.sigma.kind} is not eventually constant")
    lo, hi = m.sigma.saturation_values
    trace = LimitTrace("z_sequence", [_as_mu(m, mu)])
    for t, L in enumerate(m.layers, start=1):
        q = _sign_matrix(L, r) @ trace.vectors[-1]
        trace.margins.append(float(np.min(np.abs(q))))
        flat = np.flatnonzero(np.abs(q) <= tol)
        if flat.size:
            trace.verdict = "not_saturating"
            trace.locus = (t, int(flat[0]))
            return trace
        trace.vectors.append(np.where(q > 0, hi, lo))
    return trace


def check_non_splitting(c: Classifier, trace: LimitTrace, tol: float = DEFAULT_TOL) -> tuple[bool, float]:
    if trace.kind != "mu_sequence":
        raise ValueError("non-splitting is defined on a mu_sequence trace")
    mg = margin(c, trace.final)
    return mg > tol, mg


def check_sync_saturating(m: Model, r: float, mu, tol: float = DEFAULT_TOL, mode: str = "trajectory"):
    """Return (saturating, worst |q| seen, (layer, component) of the worst one).

    ``trajectory`` checks only the realised corners z_0..z_{T-1}; ``exhaustive``
    checks every corner of {sigma_-inf, sigma_inf}^d(t-1) for layers t >= 2.
    """
    if not m.sigma.eventually_constant:
        raise ValueError(f"saturation oracle undefined: {m.sigma.kind} is not eventually constant")
    if mode not in ("trajectory", "exhaustive"):
        raise ValueError(f"unknown mode {mode!r}")
    mu = _as_mu(m, mu)
    if mode == "trajectory":
        trace = limit_sum(m, r, mu, tol)
        worst, locus = np.inf, None
        for t, L in enumerate(m.layers[: len(trace.vectors)], start=1):
            q = np.abs(_sign_matrix(L, r) @ trace.vectors[t - 1])
            i = int(np.argmin(q))
            if q[i] < worst:
                worst, locus = float(q[i]), (t, i)
        return trace.verdict == "ok", worst, locus

    for t, L in enumerate(m.layers[1:], start=2):
        if L.in_dim > MAX_CORNER_WIDTH:
            raise ValueError(f"corner enumeration too large: d({t - 1}) = {L.in_dim} > {MAX_CORNER_WIDTH}")
    lo, hi = m.sigma.saturation_values
    worst, locus = np.inf, None
    for t, L in enumerate(m.layers, start=1):
        Q = _sign_matrix(L, r)
        if t == 1:
            chunks = [mu[None, :]]
        else:
            corners = itertools.product((lo, hi), repeat=L.in_dim)
            chunks = _batched(corners, 4096)
        for Z in chunks:
            q = np.abs(np.asarray(Z, dtype=np.float64) @ Q.T)
            j, i = np.unravel_index(int(np.argmin(q)), q.shape)
            if q[j, i] < worst:
                worst, locus = float(q[j, i]), (t, int(i))
    return worst > tol, worst, locus


def _batched(iterable, size):
    it = iter(iterable)
    while True:
        chunk = list(itertools.islice(it, size))
        if not chunk:
            return
        yield chunk


def predict_class(m: Model, c: Classifier, r: float | None, mu, tol: float = DEFAULT_TOL) -> Prediction:
    """Asymptotic class of ``c`` applied to the pooled output of ``m``.

    ``r`` is the fixed ER edge probability, or None when the graph model has no
    fixed r (sparse ER, Barabasi-Albert); the saturation oracle then has nothing
    to work with.
    """
    if m.arch == "gat":
        return Prediction(None, 0.0, "no limit oracle for attention models")
    if m.pooling == "sum":
        return Prediction(None, 0.0, "sum pooling grows with n and has no finite limit")
    if c.input_dim != m.dims[-1]:
        raise ValueError("classifier input dimension does not match d(T)")
    if m.arch in ("gcn", "mean", "mean_plus"):
        if r is not None and r <= 0:
            return Prediction(None, 0.0, "edge probability 0: neighbourhoods never grow")
        trace = limit_gcn(m, mu) if m.arch == "gcn" else limit_mean(m, mu)
        ok, mg = check_non_splitting(c, trace, tol)
        trace.margins = [mg]
        if not ok:
            trace.verdict = "splitting"
            return Prediction(None, mg, "splitting: limit vector lies on the decision boundary", trace)
        return Prediction(classify(c, trace.final), mg, "", trace)

    if r is None:
        return Prediction(None, 0.0, "saturation oracle needs a fixed edge probability")
    if not m.sigma.eventually_constant:
        return Prediction(None, 0.0, f"saturation oracle undefined for {m.sigma.kind}")
    trace = limit_sum(m, r, mu, tol)
    if trace.verdict != "ok":
        t, i = trace.locus
        return Prediction(None, 0.0, f"not_saturating at layer {t} component {i}", trace)
    mg = margin(c, trace.final)
    if mg <= tol:
        trace.verdict = "splitting"
        return Prediction(None, mg, "splitting: saturated corner lies on the decision boundary", trace)
    return Prediction(classify(c, trace.final), mg, "", trace)


# ---------------------------------------------------------------------------
# node-count threshold construction


def threshold_gadget(base: Model, N: int) -> Model:
    """Extend a SumGNN+ with a component 0 that reads +1 iff n > N.

    Layer 1 sets component 0 to 1 through its bias.  Layer 2 reads it out over
    all nodes with weight 2 and bias -(2N + 1), giving 2n - 2N - 1, which the
    clipped identity maps to +1 for n > N and -1 for n <= N.  Later layers copy
    it forward through W_s.  No base component reads component 0, so for
    n <= N the base components evolve exactly as in ``base``; pair the result
    with ``gadget_classifier`` to force class 1 once the flag is up.
    """
    if base.arch != "sum_plus":
        raise ValueError("threshold gadget needs a sum_plus base model")
    if base.sigma.kind != "clipped_identity":
        raise ValueError("threshold gadget needs the clipped identity non-linearity")
    if base.T < 3:
        raise ValueError("threshold gadget needs at least three layers")
    if int(N) != N or N < 0:
        raise ValueError("N must be a non-negative integer")
    layers = []
    for t, L in enumerate(base.layers, start=1):
        blocks = {}
        for name in ("W_s", "W_n", "W_r"):
            W = np.zeros((L.out_dim + 1, L.in_dim + 1))
            W[1:, 1:] = getattr(L, name)
            blocks[name] = W
        b = np.concatenate([[0.0], L.b])
        if t == 1:
            b[0] = 1.0
        elif t == 2:
            blocks["W_r"][0, 0] = 2.0
            b[0] = -(2.0 * N + 1.0)
        else:
            blocks["W_s"][0, 0] = 1.0
        layers.append(Layer(blocks["W_n"], b, blocks["W_s"], blocks["W_r"]))
    return Model("sum_plus", layers, Nonlinearity("clipped_identity"), base.pooling, base.dims[0] + 1)


def gadget_classifier(base: Classifier, gain: float = 10.0) -> Classifier:
    """Head for ``threshold_gadget`` output: base head plus a gate on component 0.

    The gate unit computes tanh(gain * (x_0 + 1)), exactly 0 when the flag is
    -1 and 1 when it is +1; its output weight exceeds the largest magnitude the
    base logit can reach, so a raised flag always yields class 1.
    """
    h, d = base.W1.shape
    W1 = np.zeros((h + 1, d + 1))
    W1[0, 0] = gain
    W1[1:, 1:] = base.W1
    b1 = np.concatenate([[gain], base.b1])
    boost = float(np.abs(base.W2).sum() + abs(base.b2) + 1.0)
    W2 = np.concatenate([[boost], base.W2])
    return Classifier(W1, b1, W2, base.b2)
