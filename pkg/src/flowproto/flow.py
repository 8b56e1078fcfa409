"""Invertible flow on d-dimensional vectors with exact log-density and analytic gradients.

Layers are stored in data-to-latent order: ``inverse`` walks the list front to
back (x -> z), ``forward`` walks it back to front (z -> x). Every layer knows
how to pull a cotangent and the generative-weight scalar back through its
inverse map, so the model can return d/dtheta and d/dx of

    G = grad_wrt_logprob * log_prob(x) + <grad_wrt_z, f_inv(x)>

without an autodiff tape. The flattened parameter vector concatenates layers
in stack order; within a layer, fields in declaration order, matrices
row-major (this order is load-bearing for checkpoints and gradient checks).
"""

from __future__ import annotations

import json
import math
import struct
import zlib
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractViolation, NumericError, ParseError, VersionError
from .numerics import Array, Rng

LOG_2PI = math.log(2.0 * math.pi)

CHECKPOINT_MAGIC = b"FPRO"
CHECKPOINT_VERSION = 1

_TAG_ACTNORM = 1
_TAG_INVLINEAR = 2
_TAG_COUPLING = 3
_TAG_STANDARDIZER = 4


def _as_batch(x: Array, dim: int) -> tuple[Array, bool]:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        if x.shape[0] != dim:
            raise ContractViolation(f"expected vector of dimension {dim}, got {x.shape[0]}")
        return x.reshape(1, dim), True
    if x.ndim != 2 or x.shape[1] != dim:
        raise ContractViolation(f"expected (n, {dim}) batch, got shape {x.shape}")
    return x, False


class Standardizer:
    """Fixed per-dimension affine applied before the trainable stack.

    Inverse direction: v = (u - mean) / sigma. Carries no trainable
    parameters; its constant log-det is part of log_prob.
    """

    tag = _TAG_STANDARDIZER

    def __init__(self, mean: Array, sigma: Array):
        self.mean = np.asarray(mean, dtype=np.float64).copy()
        sigma = np.asarray(sigma, dtype=np.float64)
        if np.any(sigma <= 0):
            raise ContractViolation("standardizer sigma must be positive")
        self.log_sigma = np.log(sigma)

    @classmethod
    def fit(cls, features: Array, floor: float = 1e-6) -> "Standardizer":
        features = np.asarray(features, dtype=np.float64)
        mean = features.mean(axis=0)
        var = np.maximum(features.var(axis=0), floor)
        return cls(mean, np.sqrt(var))

    @property
    def n_params(self) -> int:
        return 0

    def get_params(self) -> Array:
        return np.empty(0)

    def set_params(self, vec: Array) -> None:
        pass

    def forward(self, z: Array) -> Array:
        return z * np.exp(self.log_sigma) + self.mean

    def inverse(self, x: Array) -> tuple[Array, float, tuple]:
        z = (x - self.mean) * np.exp(-self.log_sigma)
        return z, -float(self.log_sigma.sum()), ()

    def backward(self, cache: tuple, c_out: Array, gl: Array) -> tuple[Array, Array]:
        return c_out * np.exp(-self.log_sigma), np.empty(0)

    def fields(self) -> list[Array]:
        return [self.mean, self.log_sigma]

    @classmethod
    def from_fields(cls, dim: int, fields: list[Array]) -> "Standardizer":
        mean, log_sigma = fields
        obj = cls.__new__(cls)
        obj.mean = mean
        obj.log_sigma = log_sigma
        return obj


class ActNorm:
    """Per-dimension affine with data-dependent initialization.

    Forward: x = z * exp(log_scale) + bias. The scale is stored in log form,
    so it is positive by construction.
    """

    tag = _TAG_ACTNORM

    def __init__(self, dim: int):
        self.log_scale = np.zeros(dim)
        self.bias = np.zeros(dim)
        self.initialized = False

    @property
    def n_params(self) -> int:
        return 2 * self.log_scale.size

    def get_params(self) -> Array:
        return np.concatenate([self.log_scale, self.bias])

    def set_params(self, vec: Array) -> None:
        d = self.log_scale.size
        self.log_scale = vec[:d].copy()
        self.bias = vec[d:].copy()

    def forward(self, z: Array) -> Array:
        return z * np.exp(self.log_scale) + self.bias

    def inverse(self, x: Array) -> tuple[Array, float, tuple]:
        z = (x - self.bias) * np.exp(-self.log_scale)
        return z, -float(self.log_scale.sum()), (z,)

    def backward(self, cache: tuple, c_out: Array, gl: Array) -> tuple[Array, Array]:
        (v,) = cache
        c_in = c_out * np.exp(-self.log_scale)
        g_bias = -c_in.sum(axis=0)
        g_log_scale = -(c_out * v).sum(axis=0) - float(gl.sum())
        return c_in, np.concatenate([g_log_scale, g_bias])

    def init_from_activations(self, a: Array, floor: float = 1e-6) -> None:
        var = np.maximum(a.var(axis=0), floor)
        self.bias = a.mean(axis=0)
        self.log_scale = 0.5 * np.log(var)
        self.initialized = True

    def fields(self) -> list[Array]:
        return [np.array([1.0 if self.initialized else 0.0]), self.log_scale, self.bias]

    @classmethod
    def from_fields(cls, dim: int, fields: list[Array]) -> "ActNorm":
        flag, log_scale, bias = fields
        obj = cls(dim)
        obj.log_scale = log_scale
        obj.bias = bias
        obj.initialized = bool(flag[0])
        return obj


class InvLinear:
    """Dense invertible map W = P L U with a fixed permutation P.

    L is unit lower triangular (free strictly-lower entries), U upper
    triangular with diagonal sign_i * exp(log_diag_i); magnitudes are positive
    by construction, so W is always invertible. On vector data this plays the
    role channel mixing plays in convolutional flows.
    """

    tag = _TAG_INVLINEAR

    def __init__(self, dim: int, perm: Array | None = None):
        self.dim = dim
        self.perm = np.arange(dim, dtype=np.int64) if perm is None else np.asarray(perm, dtype=np.int64)
        if sorted(self.perm.tolist()) != list(range(dim)):
            raise ContractViolation("perm must be a permutation of range(dim)")
        self.sign = np.ones(dim)
        self.lower = np.zeros((dim, dim))
        self.log_diag = np.zeros(dim)
        self.upper = np.zeros((dim, dim))
        self._lo_idx = np.tril_indices(dim, -1)
        self._up_idx = np.triu_indices(dim, 1)
        self._rebuild()

    def _rebuild(self) -> None:
        d = self.dim
        L = np.eye(d)
        L[self._lo_idx] = self.lower[self._lo_idx]
        U = np.zeros((d, d))
        U[self._up_idx] = self.upper[self._up_idx]
        U[np.diag_indices(d)] = self.sign * np.exp(self.log_diag)
        P = np.eye(d)[self.perm]
        self._L, self._U = L, U
        self._P = P
        self._W = P @ L @ U
        self._Winv = np.linalg.inv(self._W)

    @property
    def n_params(self) -> int:
        d = self.dim
        return d * (d - 1) // 2 + d + d * (d - 1) // 2

    def get_params(self) -> Array:
        return np.concatenate([self.lower[self._lo_idx], self.log_diag, self.upper[self._up_idx]])

    def set_params(self, vec: Array) -> None:
        d = self.dim
        k = d * (d - 1) // 2
        self.lower[self._lo_idx] = vec[:k]
        self.log_diag = vec[k : k + d].copy()
        self.upper[self._up_idx] = vec[k + d :]
        self._rebuild()

    def forward(self, z: Array) -> Array:
        return z @ self._W.T

    def inverse(self, x: Array) -> tuple[Array, float, tuple]:
        z = x @ self._Winv.T
        return z, -float(self.log_diag.sum()), (z,)

    def backward(self, cache: tuple, c_out: Array, gl: Array) -> tuple[Array, Array]:
        (v,) = cache
        c_in = c_out @ self._Winv
        g_w = -(c_in.T @ v)
        ptg = self._P.T @ g_w
        g_lower = (ptg @ self._U.T)[self._lo_idx]
        g_u = self._L.T @ ptg
        g_upper = g_u[self._up_idx]
        g_log_diag = np.diag(g_u) * np.diag(self._U) - float(gl.sum())
        return c_in, np.concatenate([g_lower, g_log_diag, g_upper])

    def fields(self) -> list[Array]:
        return [
            self.perm.astype(np.float64),
            self.sign,
            self.lower.ravel(),
            self.log_diag,
            self.upper.ravel(),
        ]

    @classmethod
    def from_fields(cls, dim: int, fields: list[Array]) -> "InvLinear":
        perm, sign, lower, log_diag, upper = fields
        obj = cls(dim, perm=perm.astype(np.int64))
        obj.sign = sign
        obj.lower = lower.reshape(dim, dim)
        obj.log_diag = log_diag
        obj.upper = upper.reshape(dim, dim)
        obj._rebuild()
        return obj


class AffineCoupling:
    """Affine coupling: pass half the coordinates, scale-and-shift the rest.

    The conditioner is a two-hidden-layer tanh MLP whose output splits into a
    scale head and a shift head. The scale is clamped to (-gamma, gamma) via
    s = gamma * tanh(s_raw), which keeps round trips well conditioned. Parity
    selects which half passes through: 0 passes the leading floor(d/2)
    coordinates, 1 the trailing floor(d/2).
    """

    tag = _TAG_COUPLING

    def __init__(self, dim: int, hidden: int, parity: int, gamma: float = 2.0):
        self.dim = dim
        self.hidden = hidden
        self.parity = int(parity) % 2
        self.gamma = float(gamma)
        m = dim // 2
        nt = dim - m
        self.n_pass, self.n_trans = m, nt
        if self.parity == 0:
            self.pass_sl, self.trans_sl = slice(0, m), slice(m, dim)
        else:
            self.pass_sl, self.trans_sl = slice(nt, dim), slice(0, nt)
        self.w1 = np.zeros((m, hidden))
        self.b1 = np.zeros(hidden)
        self.w2 = np.zeros((hidden, hidden))
        self.b2 = np.zeros(hidden)
        self.w3 = np.zeros((hidden, 2 * nt))
        self.b3 = np.zeros(2 * nt)

    def init_weights(self, rng: Rng) -> None:
        # hidden layers small random, output head zero: the layer starts as the identity
        m, h = self.n_pass, self.hidden
        self.w1 = rng.normal_matrix(m, h) / math.sqrt(max(m, 1))
        self.w2 = rng.normal_matrix(h, h) / math.sqrt(h)
        self.w3[:] = 0.0
        self.b3[:] = 0.0

    @property
    def n_params(self) -> int:
        return self.w1.size + self.b1.size + self.w2.size + self.b2.size + self.w3.size + self.b3.size

    def get_params(self) -> Array:
        return np.concatenate(
            [self.w1.ravel(), self.b1, self.w2.ravel(), self.b2, self.w3.ravel(), self.b3]
        )

    def set_params(self, vec: Array) -> None:
        shapes = [self.w1.shape, self.b1.shape, self.w2.shape, self.b2.shape, self.w3.shape, self.b3.shape]
        arrays = []
        off = 0
        for shape in shapes:
            size = int(np.prod(shape))
            arrays.append(vec[off : off + size].reshape(shape).copy())
            off += size
        self.w1, self.b1, self.w2, self.b2, self.w3, self.b3 = arrays

    def _conditioner(self, p: Array) -> tuple[Array, Array, Array, Array, Array]:
        h1 = np.tanh(p @ self.w1 + self.b1)
        h2 = np.tanh(h1 @ self.w2 + self.b2)
        out = h2 @ self.w3 + self.b3
        s_raw = out[:, : self.n_trans]
        t = out[:, self.n_trans :]
        return h1, h2, s_raw, t, np.tanh(s_raw)

    def forward(self, z: Array) -> Array:
        p = z[:, self.pass_sl]
        _, _, _, t, th = self._conditioner(p)
        s = self.gamma * th
        x = z.copy()
        x[:, self.trans_sl] = z[:, self.trans_sl] * np.exp(s) + t
        return x

    def inverse(self, x: Array) -> tuple[Array, Array, tuple]:
        p = x[:, self.pass_sl]
        h1, h2, _, t, th = self._conditioner(p)
        s = self.gamma * th
        e = np.exp(-s)
        v_trans = (x[:, self.trans_sl] - t) * e
        z = x.copy()
        z[:, self.trans_sl] = v_trans
        ldj = -s.sum(axis=1)
        return z, ldj, (p, h1, h2, th, e, v_trans)

    def backward(self, cache: tuple, c_out: Array, gl: Array) -> tuple[Array, Array]:
        p, h1, h2, th, e, v_trans = cache
        c_vtrans = c_out[:, self.trans_sl]
        c_utrans = c_vtrans * e
        g_t = -c_utrans
        g_s = -(c_vtrans * v_trans) - gl[:, None]
        g_sraw = g_s * (self.gamma * (1.0 - th * th))
        g_out = np.concatenate([g_sraw, g_t], axis=1)

        g_w3 = h2.T @ g_out
        g_b3 = g_out.sum(axis=0)
        g_h2 = g_out @ self.w3.T
        g_a2 = g_h2 * (1.0 - h2 * h2)
        g_w2 = h1.T @ g_a2
        g_b2 = g_a2.sum(axis=0)
        g_h1 = g_a2 @ self.w2.T
        g_a1 = g_h1 * (1.0 - h1 * h1)
        g_w1 = p.T @ g_a1
        g_b1 = g_a1.sum(axis=0)
        g_p = g_a1 @ self.w1.T

        c_in = np.empty_like(c_out)
        c_in[:, self.trans_sl] = c_utrans
        c_in[:, self.pass_sl] = c_out[:, self.pass_sl] + g_p
        grad = np.concatenate(
            [g_w1.ravel(), g_b1, g_w2.ravel(), g_b2, g_w3.ravel(), g_b3]
        )
        return c_in, grad

    def fields(self) -> list[Array]:
        return [
            np.array([float(self.parity)]),
            np.array([self.gamma]),
            self.w1.ravel(),
            self.b1,
            self.w2.ravel(),
            self.b2,
            self.w3.ravel(),
            self.b3,
        ]

    @classmethod
    def from_fields(cls, dim: int, fields: list[Array]) -> "AffineCoupling":
        parity, gamma, w1, b1, w2, b2, w3, b3 = fields
        hidden = b1.size
        obj = cls(dim, hidden, int(parity[0]), gamma=float(gamma[0]))
        obj.w1 = w1.reshape(dim // 2, hidden)
        obj.b1 = b1
        obj.w2 = w2.reshape(hidden, hidden)
        obj.b2 = b2
        obj.w3 = w3.reshape(hidden, 2 * obj.n_trans)
        obj.b3 = b3
        return obj


_LAYER_TYPES = {cls.tag: cls for cls in (ActNorm, InvLinear, AffineCoupling, Standardizer)}


@dataclass
class FlowCache:
    """Caller-owned activations from one inverse pass; consumed by backward."""

    version: int
    n: int
    z: Array
    layer_caches: list
    log_det_inv: Array


class FlowModel:
    """Stack of invertible layers with a standard-normal latent prior."""

    def __init__(self, dim: int, layers: list, meta: dict | None = None):
        self.dim = dim
        self.layers = layers
        self.meta = dict(meta or {})
        self._version = 0
        self._offsets = self._compute_offsets()

    def _compute_offsets(self) -> list[int]:
        offsets = [0]
        for layer in self.layers:
            offsets.append(offsets[-1] + layer.n_params)
        return offsets

    @property
    def n_params(self) -> int:
        return self._offsets[-1]

    @property
    def version(self) -> int:
        return self._version

    @property
    def actnorm_initialized(self) -> bool:
        norms = [l for l in self.layers if isinstance(l, ActNorm)]
        return bool(norms) and all(l.initialized for l in norms)

    def get_params(self) -> Array:
        if not self.layers:
            return np.empty(0)
        return np.concatenate([layer.get_params() for layer in self.layers])

    def set_params(self, vec: Array) -> None:
        vec = np.asarray(vec, dtype=np.float64)
        if vec.shape != (self.n_params,):
            raise ContractViolation(f"expected parameter vector of length {self.n_params}, got {vec.shape}")
        for layer, lo, hi in zip(self.layers, self._offsets[:-1], self._offsets[1:]):
            layer.set_params(vec[lo:hi])
        self._version += 1

    # -- transforms ---------------------------------------------------------

    def forward(self, z: Array) -> Array:
        z, single = _as_batch(z, self.dim)
        x = z
        for layer in reversed(self.layers):
            x = layer.forward(x)
        if not np.all(np.isfinite(x)):
            raise NumericError("non-finite output of generative pass")
        return x[0] if single else x

    def forward_with_logdet(self, z: Array) -> tuple[Array, Array]:
        """Generative pass plus log|det d forward / d z| per example."""
        z, single = _as_batch(z, self.dim)
        x = z
        ldj = np.zeros(x.shape[0])
        for layer in reversed(self.layers):
            zz, layer_ldj_inv, _ = layer.inverse(layer.forward(x))
            # recomputing the inverse ldj at the produced point gives the exact
            # negated forward contribution for these layer families
            ldj = ldj - layer_ldj_inv
            x = layer.forward(x)
        if not np.all(np.isfinite(x)):
            raise NumericError("non-finite output of generative pass")
        return (x[0], ldj[0]) if single else (x, ldj)

    def inverse(self, x: Array) -> tuple[Array, Array]:
        z, ldj, _ = self._inverse_impl(x, keep=False)
        return z, ldj

    def inverse_cached(self, x: Array) -> tuple[Array, Array, FlowCache]:
        z, ldj, caches = self._inverse_impl(x, keep=True)
        return z, ldj, FlowCache(version=self._version, n=z.shape[0], z=z, layer_caches=caches, log_det_inv=ldj)

    def _inverse_impl(self, x: Array, keep: bool):
        x, _ = _as_batch(x, self.dim)
        ldj = np.zeros(x.shape[0])
        caches = [] if keep else None
        a = x
        for i, layer in enumerate(self.layers):
            a, layer_ldj, cache = layer.inverse(a)
            if not np.all(np.isfinite(a)):
                raise NumericError("non-finite intermediate in inverse pass", layer=i)
            ldj = ldj + layer_ldj
            if keep:
                caches.append(cache)
        return a, ldj, caches

    def prior_logpdf(self, z: Array) -> Array:
        z = np.atleast_2d(np.asarray(z, dtype=np.float64))
        return -0.5 * ((z * z).sum(axis=1) + self.dim * LOG_2PI)

    def log_prob(self, x: Array) -> Array:
        """Exact log-density: prior in latent space plus accumulated inverse log-det."""
        x_arr, single = _as_batch(x, self.dim)
        z, ldj = self.inverse(x_arr)
        out = self.prior_logpdf(z) + ldj
        return float(out[0]) if single else out

    def sample(self, rng: Rng, n: int) -> Array:
        if n < 0:
            raise ContractViolation("sample count must be >= 0")
        z = rng.normal(n * self.dim).reshape(n, self.dim) if n else np.empty((0, self.dim))
        if n == 0:
            return z
        return self.forward(z)

    def backward(
        self,
        cache: FlowCache,
        grad_wrt_logprob: float | Array,
        grad_wrt_z: Array | None,
    ) -> tuple[Array, Array]:
        """Gradient of G = gl * log_prob(x) + <gz, f_inv(x)> w.r.t. theta and x.

        ``grad_wrt_logprob`` may be a scalar (same weight for every row) or a
        per-row vector; ``grad_wrt_z`` is an (n, d) cotangent or None.
        """
        if not isinstance(cache, FlowCache) or cache.layer_caches is None:
            raise ContractViolation("backward requires the cache from inverse_cached")
        if cache.version != self._version:
            raise ContractViolation("stale cache: model parameters changed since the inverse pass")
        n = cache.n
        gl = np.asarray(grad_wrt_logprob, dtype=np.float64)
        if gl.ndim == 0:
            gl = np.full(n, float(gl))
        if gl.shape != (n,):
            raise ContractViolation(f"grad_wrt_logprob must be scalar or shape ({n},)")
        if grad_wrt_z is None:
            c = np.zeros((n, self.dim))
        else:
            c = np.array(grad_wrt_z, dtype=np.float64, copy=True)
            if c.shape != (n, self.dim):
                raise ContractViolation(f"grad_wrt_z must have shape ({n}, {self.dim})")
        # prior term: d/dz of gl * logN(z) = -gl * z
        c = c - gl[:, None] * cache.z

        grads: list[Array | None] = [None] * len(self.layers)
        for i in range(len(self.layers) - 1, -1, -1):
            c, grads[i] = self.layers[i].backward(cache.layer_caches[i], c, gl)
        grad_theta = np.concatenate(grads) if grads else np.empty(0)
        return grad_theta, c

    def init_actnorm(self, batch: Array) -> "FlowModel":
        """Data-dependent act-norm init: inverse-direction activations get
        per-dimension mean 0 / variance 1 over the batch (variance floored)."""
        batch, _ = _as_batch(batch, self.dim)
        if batch.shape[0] == 0:
            raise ContractViolation("init_actnorm requires a nonempty batch")
        norms = [l for l in self.layers if isinstance(l, ActNorm)]
        if any(l.initialized for l in norms):
            raise ContractViolation("init_actnorm called twice")
        a = batch
        for layer in self.layers:
            if isinstance(layer, ActNorm):
                layer.init_from_activations(a)
            a, _, _ = layer.inverse(a)
        self._version += 1
        return self


def build_flow_model(
    dim: int,
    rng: Rng,
    *,
    blocks: int = 4,
    couplings_per_block: int = 4,
    hidden: int = 64,
    scale_clamp: float = 2.0,
    standardizer: Standardizer | None = None,
    permute: bool = True,
) -> FlowModel:
    """Default architecture: ``blocks`` repetitions of
    [ActNorm, InvLinear, Coupling * couplings_per_block], coupling parity
    alternating within each block. Couplings start as the identity."""
    if dim < 1:
        raise ContractViolation("dim must be >= 1")
    layers: list = []
    if standardizer is not None:
        layers.append(standardizer)
    for _ in range(blocks):
        layers.append(ActNorm(dim))
        perm = rng.choose_without_replacement(dim, dim) if permute else None
        layers.append(InvLinear(dim, perm=perm))
        for j in range(couplings_per_block):
            coupling = AffineCoupling(dim, hidden, parity=j % 2, gamma=scale_clamp)
            coupling.init_weights(rng)
            layers.append(coupling)
    meta = {
        "dim": dim,
        "blocks": blocks,
        "couplings_per_block": couplings_per_block,
        "hidden": hidden,
        "scale_clamp": scale_clamp,
        "standardized": standardizer is not None,
    }
    return FlowModel(dim, layers, meta=meta)


# ---------------------------------------------------------------------------
# Checkpoint format: little-endian binary, magic FPRO, trailing CRC32.


def save_checkpoint(model: FlowModel, path: str, extra_meta: dict | None = None) -> None:
    buf = bytearray()
    buf += CHECKPOINT_MAGIC
    buf += struct.pack("<III", CHECKPOINT_VERSION, model.dim, len(model.layers))
    for layer in model.layers:
        buf += struct.pack("<B", layer.tag)
        for fld in layer.fields():
            data = np.ascontiguousarray(fld, dtype="<f8")
            buf += struct.pack("<I", data.size)
            buf += data.tobytes()
    buf += struct.pack("<I", zlib.crc32(bytes(buf)) & 0xFFFFFFFF)
    with open(path, "wb") as fh:
        fh.write(bytes(buf))

    sidecar = dict(model.meta)
    sidecar.update(
        {
            "format": "FPRO",
            "format_version": CHECKPOINT_VERSION,
            "dim": model.dim,
            "layers": [type(l).__name__ for l in model.layers],
            "n_params": model.n_params,
        }
    )
    if extra_meta:
        sidecar.update(extra_meta)
    with open(path + ".json", "w", encoding="utf-8") as fh:
        json.dump(sidecar, fh, indent=2, sort_keys=True)
        fh.write("\n")


_FIELD_COUNTS = {_TAG_ACTNORM: 3, _TAG_INVLINEAR: 5, _TAG_COUPLING: 8, _TAG_STANDARDIZER: 2}


class _Reader:
    def __init__(self, blob: bytes):
        self.blob = blob
        self.pos = 0

    def take(self, n: int, what: str) -> bytes:
        if self.pos + n > len(self.blob):
            raise ParseError(f"truncated checkpoint while reading {what}", offset=self.pos)
        out = self.blob[self.pos : self.pos + n]
        self.pos += n
        return out

    def u32(self, what: str) -> int:
        return struct.unpack("<I", self.take(4, what))[0]

    def u8(self, what: str) -> int:
        return struct.unpack("<B", self.take(1, what))[0]

    def f64s(self, count: int, what: str) -> Array:
        raw = self.take(8 * count, what)
        return np.frombuffer(raw, dtype="<f8").astype(np.float64)


def load_checkpoint(path: str) -> FlowModel:
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 4 + 12 + 4:
        raise ParseError("checkpoint too short", offset=len(blob))
    body, (crc_stored,) = blob[:-4], struct.unpack("<I", blob[-4:])
    if zlib.crc32(body) & 0xFFFFFFFF != crc_stored:
        raise ParseError("checkpoint CRC mismatch", offset=len(blob) - 4)
    r = _Reader(body)
    if r.take(4, "magic") != CHECKPOINT_MAGIC:
        raise ParseError("bad checkpoint magic", offset=0)
    version = r.u32("version")
    if version != CHECKPOINT_VERSION:
        raise VersionError(f"unsupported checkpoint version {version}", offset=4)
    dim = r.u32("dim")
    n_layers = r.u32("layer count")
    layers = []
    for i in range(n_layers):
        tag = r.u8(f"layer {i} tag")
        if tag not in _LAYER_TYPES:
            raise ParseError(f"unknown layer tag {tag}", offset=r.pos - 1)
        fields = []
        for j in range(_FIELD_COUNTS[tag]):
            count = r.u32(f"layer {i} field {j} length")
            fields.append(r.f64s(count, f"layer {i} field {j}"))
        layers.append(_LAYER_TYPES[tag].from_fields(dim, fields))
    if r.pos != len(body):
        raise ParseError("trailing bytes after last layer", offset=r.pos)
    return FlowModel(dim, layers)


def read_sidecar(path: str) -> dict:
    with open(path + ".json", "r", encoding="utf-8") as fh:
        return json.load(fh)
