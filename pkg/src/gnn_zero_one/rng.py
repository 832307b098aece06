"""Counter-based splittable generator.

Output ``i`` of a stream is ``mix64(key + (i + 1) * gamma)``, the SplitMix64
construction with a per-stream odd increment.  Because every output is a pure
function of ``(key, gamma, i)``, bulk draws can be produced out of order (the
ER sampler relies on this) and sub-streams never share state.

Constants:

* ``GOLDEN = 0x9E3779B97F4A7C15`` (2**64 / golden ratio, SplitMix64 default)
* mixer multipliers ``0xBF58476D1CE4E5B9`` and ``0x94D049BB133111EB``
  (Stafford's variant 13 finalizer)
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB
_INV53 = 1.0 / (1 << 53)


def mix64(z: int) -> int:
    z &= MASK64
    z = ((z ^ (z >> 30)) * _M1) & MASK64
    z = ((z ^ (z >> 27)) * _M2) & MASK64
    return z ^ (z >> 31)


def _mix_array(z: np.ndarray) -> np.ndarray:
    # uint64 array arithmetic wraps modulo 2**64
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_M1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_M2)
    return z ^ (z >> np.uint64(31))


def hash_key(values) -> int:
    """64-bit hash of a tuple of non-negative integers (order-sensitive)."""
    h = mix64(len(values) * GOLDEN + 0x632BE59BD9B4E019)
    for v in values:
        if v < 0:
            raise ValueError(f"task key entries must be non-negative, got {v}")
        h = mix64(h ^ mix64((v + GOLDEN) & MASK64))
    return h


class RngState:
    """One stream of the generator, identified by ``(seed, stream)``.

    Draw methods advance an internal counter, so two states built from the
    same pair yield the same outputs in the same order.
    """

    __slots__ = ("seed", "stream", "key", "gamma", "counter")

    def __init__(self, seed: int, stream: int = 0):
        if not (0 <= seed <= MASK64 and 0 <= stream <= MASK64):
            raise ValueError("seed and stream must be 64-bit unsigned integers")
        self.seed = seed
        self.stream = stream
        self.key = mix64(seed ^ mix64(stream ^ 0xD1B54A32D192ED03))
        self.gamma = mix64((stream + GOLDEN) & MASK64) | 1
        self.counter = 0

    def __repr__(self) -> str:
        return f"RngState(seed={self.seed}, stream={self.stream:#018x}, counter={self.counter})"

    def __eq__(self, other) -> bool:
        if not isinstance(other, RngState):
            return NotImplemented
        return (self.seed, self.stream, self.counter) == (other.seed, other.stream, other.counter)

    def __hash__(self):
        return hash((self.seed, self.stream, self.counter))

    def copy(self) -> RngState:
        out = RngState(self.seed, self.stream)
        out.counter = self.counter
        return out

    def reserve(self, count: int) -> int:
        """Claim ``count`` counters and return the first one."""
        start = self.counter
        self.counter += count
        return start

    def u64(self, size: int) -> np.ndarray:
        start = self.reserve(size)
        idx = np.arange(start + 1, start + 1 + size, dtype=np.uint64)
        return _mix_array(np.uint64(self.key) + idx * np.uint64(self.gamma))

    def next_u64(self) -> int:
        start = self.reserve(1)
        return mix64(self.key + (start + 1) * self.gamma)

    def uniform(self, size, lo: float = 0.0, hi: float = 1.0) -> np.ndarray:
        """Uniform draws on the open interval (lo, hi)."""
        shape = (size,) if np.isscalar(size) else tuple(size)
        count = int(np.prod(shape, dtype=np.int64))
        u = ((self.u64(count) >> np.uint64(11)).astype(np.float64) + 0.5) * _INV53
        return (lo + (hi - lo) * u).reshape(shape)

    def normal(self, size, mean: float = 0.0, stddev: float = 1.0) -> np.ndarray:
        """Gaussian draws via Box-Muller; uses two counters per value."""
        shape = (size,) if np.isscalar(size) else tuple(size)
        count = int(np.prod(shape, dtype=np.int64))
        u = self.uniform(2 * count).reshape(2, count)
        z = np.sqrt(-2.0 * np.log(u[0])) * np.cos(2.0 * np.pi * u[1])
        return (mean + stddev * z).reshape(shape)

    def randbelow(self, bound: int) -> int:
        """Integer in [0, bound) by multiply-shift on 53 random bits."""
        if bound <= 0:
            raise ValueError("bound must be positive")
        return ((self.next_u64() >> 11) * bound) >> 53


def derive_rng(master_seed: int, task_key=()) -> RngState:
    """Independent stream for one task, keyed by a tuple of small integers."""
    return RngState(master_seed & MASK64, hash_key(tuple(task_key)))
