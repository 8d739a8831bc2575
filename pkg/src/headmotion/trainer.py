"""L1 training of the GRU regressor with Adam and exact BPTT gradients."""

from __future__ import annotations

import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .motion import PoseSequence
from .seqmodel import (
    ModelConfig,
    ModelParams,
    NOISE_DIM,
    backward_array,
    forward_array,
    init_params,
    stochastic_input,
)

logger = logging.getLogger(__name__)

Grads = Dict[str, np.ndarray]

SWEEP_GRID = tuple((layers, hidden) for layers in (1, 2, 3) for hidden in (16, 32, 64))


class TrainingDiverged(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.001
    epochs: int = 50
    batch_size: int = 1
    seed: int = 0
    clip_norm: Optional[float] = None
    shuffle: bool = True
    grid: Tuple[Tuple[int, int], ...] = SWEEP_GRID

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        if self.epochs < 1:
            raise ValueError("epochs ≥ 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")


@dataclass
class AdamState:
    m: Dict[str, np.ndarray]
    v: Dict[str, np.ndarray]
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros_like(cls, p: ModelParams) -> "AdamState":
        return cls({k: np.zeros_like(a) for k, a in p.arrays.items()},
                   {k: np.zeros_like(a) for k, a in p.arrays.items()})


@dataclass
class TrainHistory:
    train_loss: List[float] = field(default_factory=list)
    val_loss: List[float] = field(default_factory=list)
    best_epoch: int = -1

    def to_csv(self) -> str:
        lines = ["epoch,train_loss,val_loss"]
        for i, (tr, va) in enumerate(zip(self.train_loss, self.val_loss)):
            lines.append(f"{i},{tr!r},{va!r}")
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class Example:
    """One utterance: (T, 128) features and (T, 3) target poses."""

    features: np.ndarray
    poses: np.ndarray

    def __post_init__(self):
        if self.features.shape[0] != self.poses.shape[0]:
            raise ValueError(f"feature/pose length mismatch: {self.features.shape[0]} vs {self.poses.shape[0]}")


def _as_array(s) -> np.ndarray:
    return s.frames if isinstance(s, PoseSequence) else np.asarray(s, dtype=np.float64)


def l1_loss(pred, target) -> float:
    pred, target = _as_array(pred), _as_array(target)
    if pred.shape != target.shape:
        raise ValueError(f"length mismatch: {pred.shape} vs {target.shape}")
    return float(np.mean(np.abs(pred - target)))


def loss_and_grads(p: ModelParams, X: np.ndarray, target: np.ndarray,
                   z: Optional[np.ndarray] = None) -> Tuple[float, Grads]:
    """Mean L1 loss and its exact gradient; sign(0) is taken as 0.

    ``X`` may be (T, D) or (T, B, D); ``z`` is (D,) or (B, D) for stochastic models.
    """
    if p.config.stochastic:
        if z is None:
            raise ValueError("stochastic model needs a noise vector")
        X = stochastic_input(X, z)
    elif z is not None:
        raise ValueError("deterministic model takes no noise vector")
    Y, cache = forward_array(p, X, return_cache=True)
    if Y.shape != target.shape:
        raise ValueError(f"prediction shape {Y.shape} does not match target {target.shape}")
    diff = Y - target
    loss = float(np.mean(np.abs(diff)))
    grads = backward_array(p, np.sign(diff) / diff.size, cache)
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise FloatingPointError(f"non-finite gradient for parameter {name}")
    return loss, grads


def backward(p: ModelParams, x, target, z=None) -> Grads:
    X = x.frames if hasattr(x, "frames") else np.asarray(x, dtype=np.float64)
    return loss_and_grads(p, X, _as_array(target), z)[1]


def adam_step(p: ModelParams, g: Grads, s: AdamState, lr: float) -> Tuple[ModelParams, AdamState]:
    """Bias-corrected Adam update; returns new params and state, inputs untouched."""
    step = s.step + 1
    b1, b2 = s.beta1, s.beta2
    m, v, new = {}, {}, {}
    for name, value in p.arrays.items():
        grad = g[name]
        m[name] = b1 * s.m[name] + (1 - b1) * grad
        v[name] = b2 * s.v[name] + (1 - b2) * grad * grad
        m_hat = m[name] / (1 - b1 ** step)
        v_hat = v[name] / (1 - b2 ** step)
        new[name] = value - lr * m_hat / (np.sqrt(v_hat) + s.eps)
    return ModelParams(p.config, new), AdamState(m, v, step, b1, b2, s.eps)


def clip_gradients(g: Grads, max_norm: float) -> Grads:
    norm = np.sqrt(sum(float(np.sum(a * a)) for a in g.values()))
    if norm <= max_norm:
        return g
    scale = max_norm / norm
    return {k: a * scale for k, a in g.items()}


def _batches(examples: Sequence[Example], order: np.ndarray, batch_size: int):
    """Group consecutive examples of equal length into (T, B, D) batches."""
    batch: List[Example] = []
    for i in order:
        ex = examples[i]
        if batch and (len(batch) == batch_size or batch[0].features.shape[0] != ex.features.shape[0]):
            yield batch
            batch = []
        batch.append(ex)
    if batch:
        yield batch


def _stack(batch: Sequence[Example]):
    if len(batch) == 1:
        return batch[0].features, batch[0].poses
    return (np.stack([e.features for e in batch], axis=1),
            np.stack([e.poses for e in batch], axis=1))


def evaluate_loss(p: ModelParams, examples: Sequence[Example], seed: int = 0) -> float:
    """Mean per-utterance L1; stochastic models use one fixed noise draw per utterance."""
    if not examples:
        return float("nan")
    rng = np.random.default_rng(seed)
    losses = []
    for ex in examples:
        X = ex.features
        if p.config.stochastic:
            X = stochastic_input(X, rng.standard_normal(NOISE_DIM))
        losses.append(l1_loss(forward_array(p, X), ex.poses))
    return float(np.mean(losses))


def train(config: TrainConfig, model_config: ModelConfig, train_data: Sequence[Example],
          val_data: Sequence[Example] = (), init: Optional[ModelParams] = None
          ) -> Tuple[ModelParams, TrainHistory]:
    """Per-utterance Adam over ``config.epochs`` epochs.

    Returns the parameters from the epoch with lowest validation loss (or
    training loss when no validation data is given).
    """
    if not train_data:
        raise ValueError("training set is empty")
    rng = np.random.default_rng(config.seed)
    params = init.copy() if init is not None else init_params(model_config, seed=int(rng.integers(2**31)))
    state = AdamState.zeros_like(params)
    history = TrainHistory()
    best, best_score = params.copy(), np.inf
    val_seed = int(rng.integers(2**31))
    for epoch in range(config.epochs):
        order = rng.permutation(len(train_data)) if config.shuffle else np.arange(len(train_data))
        losses, weights = [], []
        for batch in _batches(train_data, order, config.batch_size):
            X, Y = _stack(batch)
            z = None
            if model_config.stochastic:
                noise = rng.standard_normal((len(batch), NOISE_DIM))
                z = noise[0] if len(batch) == 1 else noise
            try:
                loss, grads = loss_and_grads(params, X, Y, z)
            except FloatingPointError as exc:
                raise TrainingDiverged(f"training diverged at epoch {epoch}: {exc}") from exc
            if not np.isfinite(loss):
                raise TrainingDiverged(f"training diverged at epoch {epoch}: loss is NaN")
            if config.clip_norm is not None:
                grads = clip_gradients(grads, config.clip_norm)
            params, state = adam_step(params, grads, state, config.learning_rate)
            losses.append(loss)
            weights.append(len(batch))
        train_loss = float(np.average(losses, weights=weights))
        val_loss = evaluate_loss(params, val_data, seed=val_seed) if val_data else float("nan")
        if not np.isfinite(train_loss):
            raise TrainingDiverged(f"training diverged at epoch {epoch}: loss is NaN")
        history.train_loss.append(train_loss)
        history.val_loss.append(val_loss)
        score = val_loss if val_data else train_loss
        if score < best_score:
            best, best_score, history.best_epoch = params.copy(), score, epoch
        logger.debug("epoch %d train=%.6f val=%.6f", epoch, train_loss, val_loss)
    return best, history


def _sweep_worker(args):
    config, layers, hidden, stochastic, train_data, val_data = args
    mc = ModelConfig(num_layers=layers, hidden_size=hidden, stochastic=stochastic)
    params, history = train(config, mc, train_data, val_data)
    return mc, params, history


def worker_count() -> int:
    raw = os.environ.get("HML_THREADS")
    if not raw:
        return 1
    try:
        return max(1, int(raw))
    except ValueError:
        raise ValueError(f"HML_THREADS must be an integer, got {raw!r}") from None


def hyperparameter_sweep(config: TrainConfig, train_data: Sequence[Example], val_data: Sequence[Example],
                         stochastic: bool = False):
    """Train every (layers, hidden) pair in ``config.grid``; pick minimum validation L1.

    Ties go to the configuration with fewer parameters.  Returns
    ``(best_config, best_params, results)`` where ``results`` lists
    ``(config, best_val_loss)`` for every grid point.
    """
    if not val_data:
        raise ValueError("hyperparameter sweep needs a validation set")
    jobs = [(config, layers, hidden, stochastic, train_data, val_data) for layers, hidden in config.grid]
    workers = min(worker_count(), len(jobs))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_sweep_worker, jobs))
    else:
        outcomes = [_sweep_worker(j) for j in jobs]
    results = []
    best = None
    for mc, params, history in outcomes:
        val = min(history.val_loss)
        results.append((mc, val))
        key = (val, mc.num_params())
        if best is None or key < best[0]:
            best = (key, mc, params)
    return best[1], best[2], results


def _relative_errors(ga: np.ndarray, gn: np.ndarray) -> np.ndarray:
    return np.abs(ga - gn) / np.maximum(1e-8, np.abs(ga) + np.abs(gn))


def gradient_check(model_config: ModelConfig, seed: int = 0, T: int = 10, h: float = 1e-5,
                   target_offset: float = 0.1) -> float:
    """Max relative error between BPTT and central finite differences over all parameters.

    Targets sit ``target_offset`` away from the initial prediction (random
    sign), so finite-difference probes do not straddle an L1 kink when the
    offset is large compared with ``h``.
    """
    if T > 20:
        raise ValueError("gradient check is meant for small instances (T <= 20)")
    rng = np.random.default_rng(seed)
    params = init_params(model_config, seed=int(rng.integers(2**31)))
    X = rng.standard_normal((T, model_config.feature_dim))
    z = rng.standard_normal(model_config.feature_dim) if model_config.stochastic else None
    full = stochastic_input(X, z) if z is not None else X
    pred = forward_array(params, full)
    target = pred + target_offset * rng.choice([-1.0, 1.0], size=pred.shape)

    _, grads = loss_and_grads(params, X, target, z)

    def abs_err(p):
        return np.abs(forward_array(p, full) - target)

    worst = 0.0
    for name, arr in params.arrays.items():
        numeric = np.empty_like(arr)
        flat = arr.reshape(-1)
        out = numeric.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            up = abs_err(params)
            flat[i] = orig - h
            down = abs_err(params)
            flat[i] = orig
            # difference before averaging: same quotient, less cancellation
            out[i] = np.mean(up - down) / (2 * h)
        worst = max(worst, float(_relative_errors(grads[name], numeric).max()))
    return worst
