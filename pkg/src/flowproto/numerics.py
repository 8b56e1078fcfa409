"""Numeric core: stable reductions, a portable seeded RNG, Adam, finite differences.

Everything here is 64-bit and deterministic. The RNG is a counter-based
SplitMix64 stream (output k = mix64(base + (k+1) * golden)), so identical
seeds give byte-identical draw sequences on every platform, independent of
how many values each call requests.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, replace

import numpy as np

from .errors import ContractViolation

Array = np.ndarray

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_U53 = float(2.0**-53)


def logsumexp(v: Array) -> float:
    """log(sum(exp(v))) via max-shift; safe for entries up to +-1e300."""
    v = np.asarray(v, dtype=np.float64)
    if v.size == 0:
        raise ValueError("logsumexp of an empty vector")
    m = np.max(v)
    return float(m + np.log(np.sum(np.exp(v - m))))


def softmax(v: Array) -> Array:
    """Shift-invariant softmax; output is positive and sums to 1."""
    v = np.asarray(v, dtype=np.float64)
    if v.size == 0:
        raise ValueError("softmax of an empty vector")
    e = np.exp(v - np.max(v))
    return e / np.sum(e)


def log_softmax(v: Array) -> Array:
    v = np.asarray(v, dtype=np.float64)
    if v.size == 0:
        raise ValueError("log_softmax of an empty vector")
    m = np.max(v)
    shifted = v - m
    return shifted - np.log(np.sum(np.exp(shifted)))


def finite_diff_grad(f, x: Array, h: float = 1e-5) -> Array:
    """Central-difference gradient of a scalar function, one coordinate at a time."""
    if h <= 0:
        raise ValueError("finite_diff_grad requires h > 0")
    x = np.asarray(x, dtype=np.float64)
    grad = np.empty_like(x)
    for i in range(x.size):
        xp = x.copy()
        xm = x.copy()
        xp.flat[i] += h
        xm.flat[i] -= h
        grad.flat[i] = (f(xp) - f(xm)) / (2.0 * h)
    return grad


# --------------------------------------------------------------------------
# Seeded deterministic RNG


def _mix64(x: Array) -> Array:
    x = x.astype(np.uint64, copy=True)
    x ^= x >> np.uint64(30)
    x *= _MIX1
    x ^= x >> np.uint64(27)
    x *= _MIX2
    x ^= x >> np.uint64(31)
    return x


def derive_seed(seed: int, *parts: int | str) -> int:
    """Stable sub-seed from a base seed and a label path (for parallel streams)."""
    h = hashlib.blake2b(digest_size=8)
    h.update(int(seed).to_bytes(8, "little", signed=False))
    for p in parts:
        if isinstance(p, str):
            h.update(b"s" + p.encode("utf-8") + b"\x00")
        else:
            h.update(b"i" + int(p).to_bytes(8, "little", signed=True))
    return int.from_bytes(h.digest(), "little")


@dataclass
class RngState:
    """Seed plus draw counter; equal states continue identical streams."""

    seed: int
    counter: int = 0


class Rng:
    """Counter-based SplitMix64 generator with uniform/normal/index draws.

    The raw stream is ``mix64(mix64(seed) + k * golden)`` for k = 1, 2, ...
    Normals come from Box-Muller on uniform pairs (the second value of the
    final pair is discarded rather than cached, so the stream position is a
    pure function of the call sequence).
    """

    def __init__(self, seed: int, counter: int = 0):
        self._base = _mix64(np.array([seed % (1 << 64)], dtype=np.uint64))[0]
        self._seed = int(seed) % (1 << 64)
        self._counter = int(counter)

    @property
    def state(self) -> RngState:
        return RngState(seed=self._seed, counter=self._counter)

    @classmethod
    def from_state(cls, state: RngState) -> "Rng":
        return cls(state.seed, state.counter)

    def derive(self, *parts: int | str) -> "Rng":
        return Rng(derive_seed(self._seed, *parts))

    def _raw(self, n: int) -> Array:
        ks = self._counter + np.arange(1, n + 1, dtype=np.uint64)
        self._counter += n
        return _mix64(self._base + ks * _GOLDEN)

    def uniform(self, n: int | None = None) -> float | Array:
        """Uniform draws in [0, 1)."""
        out = (self._raw(1 if n is None else n) >> np.uint64(11)).astype(np.float64) * _U53
        return float(out[0]) if n is None else out

    def normal(self, n: int | None = None) -> float | Array:
        """Standard-normal draws via Box-Muller."""
        count = 1 if n is None else int(n)
        pairs = (count + 1) // 2
        if pairs == 0:
            return np.empty(0, dtype=np.float64)
        u1 = ((self._raw(pairs) >> np.uint64(11)).astype(np.float64) + 1.0) * _U53  # (0, 1]
        u2 = (self._raw(pairs) >> np.uint64(11)).astype(np.float64) * _U53
        r = np.sqrt(-2.0 * np.log(u1))
        theta = (2.0 * np.pi) * u2
        out = np.empty(2 * pairs, dtype=np.float64)
        out[0::2] = r * np.cos(theta)
        out[1::2] = r * np.sin(theta)
        return float(out[0]) if n is None else out[:count]

    def normal_matrix(self, rows: int, cols: int) -> Array:
        return self.normal(rows * cols).reshape(rows, cols)

    def randbelow(self, n: int) -> int:
        """Uniform integer in [0, n). Modulo bias is ~n/2**64, negligible here."""
        if n <= 0:
            raise ValueError("randbelow requires n >= 1")
        return int(self._raw(1)[0] % np.uint64(n))

    def shuffle(self, items) -> list:
        """Fisher-Yates; returns a new list, input untouched."""
        out = list(items)
        for i in range(len(out) - 1, 0, -1):
            j = self.randbelow(i + 1)
            out[i], out[j] = out[j], out[i]
        return out

    def choose_without_replacement(self, n: int, k: int) -> Array:
        """k distinct indices from range(n), in draw order (partial Fisher-Yates)."""
        if k > n:
            raise ValueError(f"cannot choose {k} items from {n} without replacement")
        if k < 0:
            raise ValueError("k must be >= 0")
        idx = np.arange(n, dtype=np.int64)
        for i in range(k):
            j = i + self.randbelow(n - i)
            idx[i], idx[j] = idx[j], idx[i]
        return idx[:k].copy()


# --------------------------------------------------------------------------
# Adam with decoupled weight decay


@dataclass
class AdamState:
    """Optimizer state; accumulators are shaped like the parameter vector."""

    m: Array
    v: Array
    step: int = 0
    lr: float = 5e-4
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    weight_decay: float = 5e-5


def adam_init(
    n_params: int,
    lr: float = 5e-4,
    beta1: float = 0.9,
    beta2: float = 0.999,
    epsilon: float = 1e-8,
    weight_decay: float = 5e-5,
) -> AdamState:
    return AdamState(
        m=np.zeros(n_params, dtype=np.float64),
        v=np.zeros(n_params, dtype=np.float64),
        lr=lr,
        beta1=beta1,
        beta2=beta2,
        epsilon=epsilon,
        weight_decay=weight_decay,
    )


def adam_step(params: Array, grads: Array, state: AdamState) -> tuple[Array, AdamState]:
    """One bias-corrected Adam update; weight decay is decoupled (applied to the
    parameters directly, outside the moment accumulators)."""
    params = np.asarray(params, dtype=np.float64)
    grads = np.asarray(grads, dtype=np.float64)
    if params.shape != grads.shape or params.shape != state.m.shape:
        raise ContractViolation(
            f"adam_step shape mismatch: params {params.shape}, grads {grads.shape}, state {state.m.shape}"
        )
    t = state.step + 1
    m = state.beta1 * state.m + (1.0 - state.beta1) * grads
    v = state.beta2 * state.v + (1.0 - state.beta2) * grads * grads
    m_hat = m / (1.0 - state.beta1**t)
    v_hat = v / (1.0 - state.beta2**t)
    out = params * (1.0 - state.lr * state.weight_decay)
    out = out - state.lr * m_hat / (np.sqrt(v_hat) + state.epsilon)
    return out, replace(state, m=m, v=v, step=t)
