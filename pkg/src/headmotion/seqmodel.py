"""Bidirectional GRU + linear head mapping acoustic frames to head pose.

The numeric core works on ``(T, B, D)`` float64 arrays so that several
noise samples, or several utterances of equal length, share one pass.  The
gate layout inside every ``W``/``U``/``b`` block is ``[reset, update,
candidate]``::

    r = sigmoid(W_r x + U_r h + b_r)
    u = sigmoid(W_u x + U_u h + b_u)
    c = tanh(W_c x + U_c (r * h) + b_c)
    h' = u * h + (1 - u) * c
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, List

import numpy as np
from scipy.special import expit

from .acoustic import FEATURE_DIM, FeatureSequence
from .motion import PoseSequence

DIRECTIONS = ("fwd", "bwd")
CHECKPOINT_VERSION = "v1"
NOISE_DIM = FEATURE_DIM

NoiseVector = np.ndarray


@dataclass(frozen=True)
class ModelConfig:
    num_layers: int = 2
    hidden_size: int = 64
    stochastic: bool = False
    feature_dim: int = FEATURE_DIM
    output_dim: int = 3
    bidirectional: bool = True

    def __post_init__(self):
        if self.num_layers < 1 or self.hidden_size < 1 or self.feature_dim < 1:
            raise ValueError("model dimensions must be positive")
        if self.output_dim != 3:
            raise ValueError("output_dim must be 3")
        if not self.bidirectional:
            raise ValueError("only bidirectional models are supported")

    @property
    def input_dim(self) -> int:
        return self.feature_dim * 2 if self.stochastic else self.feature_dim

    def param_shapes(self) -> Dict[str, tuple]:
        H = self.hidden_size
        shapes = {}
        for layer in range(self.num_layers):
            in_dim = self.input_dim if layer == 0 else 2 * H
            for d in DIRECTIONS:
                shapes[f"gru.{layer}.{d}.W"] = (3 * H, in_dim)
                shapes[f"gru.{layer}.{d}.U"] = (3 * H, H)
                shapes[f"gru.{layer}.{d}.b"] = (3 * H,)
        shapes["fc.W"] = (2 * H, self.output_dim)
        shapes["fc.b"] = (self.output_dim,)
        return shapes

    def num_params(self) -> int:
        return int(sum(np.prod(s) for s in self.param_shapes().values()))


@dataclass
class ModelParams:
    config: ModelConfig
    arrays: Dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        shapes = self.config.param_shapes()
        if set(shapes) != set(self.arrays):
            missing = sorted(set(shapes) - set(self.arrays))
            extra = sorted(set(self.arrays) - set(shapes))
            raise ValueError(f"parameter names mismatch (missing={missing}, unexpected={extra})")
        for name, shape in shapes.items():
            a = np.asarray(self.arrays[name], dtype=np.float64)
            if a.shape != shape:
                raise ValueError(f"{name}: expected shape {shape}, got {a.shape}")
            self.arrays[name] = a

    def __getitem__(self, name: str) -> np.ndarray:
        return self.arrays[name]

    def copy(self) -> "ModelParams":
        return ModelParams(self.config, {k: v.copy() for k, v in self.arrays.items()})

    def check_finite(self) -> None:
        for name, a in self.arrays.items():
            if not np.all(np.isfinite(a)):
                raise ValueError(f"non-finite values in parameter {name}")

    # --- checkpoint JSON ---

    def to_json(self) -> str:
        doc = {
            "version": CHECKPOINT_VERSION,
            "config": asdict(self.config),
            "params": {
                name: {"shape": list(a.shape), "data": a.ravel().tolist()}
                for name, a in sorted(self.arrays.items())
            },
        }
        return json.dumps(doc)

    @classmethod
    def from_json(cls, text: str) -> "ModelParams":
        doc = json.loads(text)
        if doc.get("version") != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {doc.get('version')!r}")
        config = ModelConfig(**doc["config"])
        arrays = {
            name: np.asarray(entry["data"], dtype=np.float64).reshape(entry["shape"])
            for name, entry in doc["params"].items()
        }
        return cls(config, arrays)

    def save(self, path) -> None:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(self.to_json())

    @classmethod
    def load(cls, path) -> "ModelParams":
        return cls.from_json(Path(path).read_text())


def init_params(config: ModelConfig, seed: int = 0) -> ModelParams:
    """Uniform(-1/sqrt(H), 1/sqrt(H)) for every weight and bias."""
    rng = np.random.default_rng(seed)
    bound = 1.0 / np.sqrt(config.hidden_size)
    arrays = {name: rng.uniform(-bound, bound, size=shape)
              for name, shape in config.param_shapes().items()}
    return ModelParams(config, arrays)


def zero_params(config: ModelConfig) -> ModelParams:
    return ModelParams(config, {n: np.zeros(s) for n, s in config.param_shapes().items()})


# --- numeric core ---

def _gru_direction(W, U, b, X, reverse):
    T, B, _ = X.shape
    H = U.shape[1]
    AX = X @ W.T + b
    U_ru, U_c = U[: 2 * H], U[2 * H:]
    dt = AX.dtype
    h = np.zeros((B, H), dtype=dt)
    out = np.empty((T, B, H), dtype=dt)
    hprev = np.empty((T, B, H), dtype=dt)
    R = np.empty((T, B, H), dtype=dt)
    Z = np.empty((T, B, H), dtype=dt)
    C = np.empty((T, B, H), dtype=dt)
    steps = range(T - 1, -1, -1) if reverse else range(T)
    for t in steps:
        a = AX[t]
        ru = expit(a[:, : 2 * H] + h @ U_ru.T)
        r, u = ru[:, :H], ru[:, H:]
        c = np.tanh(a[:, 2 * H:] + (r * h) @ U_c.T)
        hprev[t], R[t], Z[t], C[t] = h, r, u, c
        h = u * h + (1.0 - u) * c
        out[t] = h
    cache = (X, hprev, R, Z, C, reverse)
    return out, cache


def _gru_direction_backward(W, U, dout, cache):
    X, hprev, R, Z, C, reverse = cache
    T, B, H = dout.shape
    U_ru, U_c = U[: 2 * H], U[2 * H:]
    dAX = np.empty((T, B, 3 * H))
    dU = np.zeros_like(U)
    dh = np.zeros((B, H))
    steps = range(T) if reverse else range(T - 1, -1, -1)
    for t in steps:
        g = dout[t] + dh
        hp, r, u, c = hprev[t], R[t], Z[t], C[t]
        du = g * (hp - c)
        dcp = g * (1.0 - u) * (1.0 - c * c)
        dh = g * u
        rh = r * hp
        dU[2 * H:] += dcp.T @ rh
        drh = dcp @ U_c
        dh += drh * r
        dru = np.concatenate([drh * hp * r * (1.0 - r), du * u * (1.0 - u)], axis=1)
        dU[: 2 * H] += dru.T @ hp
        dh += dru @ U_ru
        dAX[t, :, : 2 * H] = dru
        dAX[t, :, 2 * H:] = dcp
    dW = np.einsum("tbk,tbi->ki", dAX, X)
    db = dAX.sum(axis=(0, 1))
    dX = dAX @ W
    return dW, dU, db, dX


def forward_array(p: ModelParams, X: np.ndarray, return_cache: bool = False):
    """Run the network on ``X`` of shape (T, D) or (T, B, D); returns (T[, B], 3)."""
    squeeze = X.ndim == 2
    X = np.asarray(X)
    if X.dtype not in (np.float64, np.longdouble):
        X = X.astype(np.float64)
    if squeeze:
        X = X[:, None, :]
    if X.shape[2] != p.config.input_dim:
        raise ValueError(f"input width {X.shape[2]} does not match model input_dim {p.config.input_dim}")
    caches = []
    layer_in = X
    for layer in range(p.config.num_layers):
        outs = []
        for d in DIRECTIONS:
            key = f"gru.{layer}.{d}"
            o, cache = _gru_direction(p[key + ".W"], p[key + ".U"], p[key + ".b"], layer_in, d == "bwd")
            outs.append(o)
            caches.append(cache)
        layer_in = np.concatenate(outs, axis=2)
    Y = layer_in @ p["fc.W"] + p["fc.b"]
    if squeeze:
        Y = Y[:, 0, :]
    if return_cache:
        return Y, (caches, layer_in, squeeze)
    return Y


def backward_array(p: ModelParams, dY: np.ndarray, cache) -> Dict[str, np.ndarray]:
    """Parameter gradients given dLoss/dY from :func:`forward_array`."""
    caches, top, squeeze = cache
    if squeeze:
        dY = dY[:, None, :]
    grads = {
        "fc.W": np.einsum("tbi,tbo->io", top, dY),
        "fc.b": dY.sum(axis=(0, 1)),
    }
    H = p.config.hidden_size
    dtop = dY @ p["fc.W"].T
    idx = len(caches)
    for layer in range(p.config.num_layers - 1, -1, -1):
        dX_total = None
        for j, d in reversed(list(enumerate(DIRECTIONS))):
            idx -= 1
            key = f"gru.{layer}.{d}"
            dW, dU, db, dX = _gru_direction_backward(
                p[key + ".W"], p[key + ".U"], dtop[:, :, j * H:(j + 1) * H], caches[idx])
            grads[key + ".W"], grads[key + ".U"], grads[key + ".b"] = dW, dU, db
            dX_total = dX if dX_total is None else dX_total + dX
        dtop = dX_total
    return grads


def stochastic_input(X: np.ndarray, z: np.ndarray) -> np.ndarray:
    """Broadcast one noise vector (D,) or a batch (B, D) over time and append it."""
    X = np.asarray(X, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    T = X.shape[0]
    if z.ndim == 1:
        return np.concatenate([X, np.broadcast_to(z, (T, z.size))], axis=-1)
    B = z.shape[0]
    if X.ndim == 2:
        X = np.broadcast_to(X[:, None, :], (T, B, X.shape[1]))
    return np.concatenate([X, np.broadcast_to(z[None], (T, B, z.shape[1]))], axis=-1)


# --- public operations ---

def forward_deterministic(p: ModelParams, x: FeatureSequence) -> PoseSequence:
    if p.config.stochastic:
        raise ValueError("model is stochastic; use forward_stochastic")
    if x.dim != p.config.feature_dim:
        raise ValueError(f"feature width {x.dim} does not match model feature_dim {p.config.feature_dim}")
    p.check_finite()
    return PoseSequence(forward_array(p, x.frames))


def sample_noise(rng_seed: int, dim: int = NOISE_DIM) -> NoiseVector:
    return np.random.default_rng(rng_seed).standard_normal(dim)


def forward_stochastic(p: ModelParams, x: FeatureSequence, z: NoiseVector) -> PoseSequence:
    if not p.config.stochastic:
        raise ValueError("model not stochastic")
    z = np.asarray(z, dtype=np.float64)
    if x.dim != p.config.feature_dim or z.shape != (p.config.feature_dim,):
        raise ValueError(f"expected features and noise of width {p.config.feature_dim}, "
                         f"got {x.dim} and {z.shape}")
    p.check_finite()
    return PoseSequence(forward_array(p, stochastic_input(x.frames, z)))


def derive_seed(seed: int, index: int) -> int:
    return int(np.random.SeedSequence([seed, index]).generate_state(1)[0])


def generate_k_samples(p: ModelParams, x: FeatureSequence, k: int = 10, seed: int = 0) -> List[PoseSequence]:
    if not p.config.stochastic:
        raise ValueError("model not stochastic")
    if k < 1:
        raise ValueError("k must be >= 1")
    if k == 1:
        return [forward_stochastic(p, x, sample_noise(derive_seed(seed, 0)))]
    if x.dim != p.config.feature_dim:
        raise ValueError(f"feature width {x.dim} does not match model feature_dim {p.config.feature_dim}")
    p.check_finite()
    Z = np.stack([sample_noise(derive_seed(seed, i)) for i in range(k)])
    Y = forward_array(p, stochastic_input(x.frames, Z))
    return [PoseSequence(Y[:, i, :]) for i in range(k)]
