"""Non-linearities and the random-MLP classifier head."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .rng import RngState

KINDS = ("clipped_identity", "relu", "clipped_relu", "tanh", "sigmoid", "identity")


@dataclass(frozen=True)
class Nonlinearity:
    kind: str = "clipped_identity"
    cap: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown non-linearity {self.kind!r}; expected one of {KINDS}")
        if self.kind == "clipped_relu" and not self.cap > 0:
            raise ValueError("clipped_relu cap must be positive")

    def __call__(self, x):
        return apply_nonlinearity(self, x)

    @property
    def eventually_constant(self) -> bool:
        return self.kind in ("clipped_identity", "clipped_relu")

    @property
    def saturation_values(self) -> tuple[float, float]:
        """(sigma_-inf, sigma_inf) for eventually constant kinds."""
        if self.kind == "clipped_identity":
            return -1.0, 1.0
        if self.kind == "clipped_relu":
            return 0.0, float(self.cap)
        raise ValueError(f"{self.kind} is not eventually constant")

    @property
    def lipschitz(self) -> float:
        return 1.0

    def to_json(self):
        if self.kind == "clipped_relu":
            return {"kind": self.kind, "cap": self.cap}
        return self.kind

    @classmethod
    def from_json(cls, value) -> Nonlinearity:
        if isinstance(value, str):
            return cls(value)
        if isinstance(value, dict):
            extra = set(value) - {"kind", "cap"}
            if extra:
                raise ValueError(f"unknown non-linearity keys {sorted(extra)}")
            return cls(value["kind"], float(value.get("cap", 1.0)))
        raise ValueError(f"cannot parse non-linearity from {value!r}")


def apply_nonlinearity(kind: Nonlinearity, x):
    """Elementwise non-linearity; scalars in, scalars out."""
    k = kind.kind
    if k == "clipped_identity":
        out = np.clip(x, -1.0, 1.0)
    elif k == "relu":
        out = np.maximum(x, 0.0)
    elif k == "clipped_relu":
        out = np.clip(x, 0.0, kind.cap)
    elif k == "tanh":
        out = np.tanh(x)
    elif k == "sigmoid":
        out = sigmoid(x)
    else:
        out = np.asarray(x, dtype=np.float64) + 0.0
    return float(out) if np.ndim(out) == 0 else out


def sigmoid(x):
    # 0.5 * (1 + tanh(x/2)) avoids overflow in exp for large |x|
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(x, dtype=np.float64)))


@dataclass
class Classifier:
    """Two-layer MLP ``W2 . tanh(W1 v + b1) + b2`` followed by a sigmoid."""

    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: float

    def __post_init__(self):
        self.W1 = np.atleast_2d(np.asarray(self.W1, dtype=np.float64))
        self.b1 = np.asarray(self.b1, dtype=np.float64).reshape(-1)
        self.W2 = np.asarray(self.W2, dtype=np.float64).reshape(-1)
        self.b2 = float(self.b2)
        h = self.W1.shape[0]
        if self.b1.shape != (h,) or self.W2.shape != (h,):
            raise ValueError(f"classifier shapes inconsistent: W1 {self.W1.shape}, b1 {self.b1.shape}, W2 {self.W2.shape}")

    @property
    def input_dim(self) -> int:
        return self.W1.shape[1]

    @property
    def hidden(self) -> int:
        return self.W1.shape[0]

    def to_json(self) -> dict:
        return {"W1": self.W1.tolist(), "b1": self.b1.tolist(), "W2": self.W2.tolist(), "b2": self.b2}

    @classmethod
    def from_json(cls, obj: dict) -> Classifier:
        extra = set(obj) - {"W1", "b1", "W2", "b2"}
        if extra:
            raise ValueError(f"unknown classifier keys {sorted(extra)}")
        return cls(obj["W1"], obj["b1"], obj["W2"], obj["b2"])

    def __eq__(self, other):
        if not isinstance(other, Classifier):
            return NotImplemented
        return (
            np.array_equal(self.W1, other.W1)
            and np.array_equal(self.b1, other.b1)
            and np.array_equal(self.W2, other.W2)
            and self.b2 == other.b2
        )


def init_classifier(d: int, rng: RngState, hidden: int | None = None, init_range=(-1.0, 1.0)) -> Classifier:
    """Random head with every weight drawn from U(lo, hi); hidden width defaults to d."""
    h = d if hidden is None else hidden
    if d < 1 or h < 1:
        raise ValueError("classifier dimensions must be >= 1")
    lo, hi = init_range
    W1 = rng.uniform((h, d), lo, hi)
    b1 = rng.uniform(h, lo, hi)
    W2 = rng.uniform(h, lo, hi)
    b2 = float(rng.uniform(1, lo, hi)[0])
    return Classifier(W1, b1, W2, b2)


def mlp_logit(c: Classifier, v):
    """Logit for a d(T) vector, or a vector of logits for a (d(T), k) matrix."""
    v = np.asarray(v, dtype=np.float64)
    if v.shape[0] != c.input_dim:
        raise ValueError(f"dimension mismatch: classifier expects {c.input_dim}, got {v.shape[0]}")
    if v.ndim == 1:
        return float(c.W2 @ np.tanh(c.W1 @ v + c.b1) + c.b2)
    return c.W2 @ np.tanh(c.W1 @ v + c.b1[:, None]) + c.b2


def classify(c: Classifier, v):
    """1 iff sigmoid(logit) > 0.5, i.e. iff the logit is strictly positive."""
    logit = mlp_logit(c, v)
    if np.ndim(logit) == 0:
        return int(logit > 0)
    return (logit > 0).astype(np.int64)


def margin(c: Classifier, v):
    """Distance of the sigmoid output from the 0.5 decision threshold."""
    m = 0.5 * np.abs(np.tanh(0.5 * mlp_logit(c, v)))
    return float(m) if np.ndim(m) == 0 else m
