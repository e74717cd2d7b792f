"""Dense autoencoder detector.

Encoder L -> 2d -> 2d -> d, decoder d -> 2d -> 2d -> L, ReLU after every
layer except the linear decoder output. Trained with mini-batch SGD and
decoupled weight decay on sliding windows; the per-window reconstruction
error is the anomaly score. Everything is plain numpy with hand-written
gradients so runs are bit-reproducible per seed.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import ScoreSeries, TimeSeries, expand_window_scores


class TrainingDiverged(RuntimeError):
    def __init__(self, trajectory):
        super().__init__(f"training diverged, loss trajectory: {trajectory}")
        self.trajectory = trajectory


@dataclass(frozen=True)
class AeConfig:
    window_length: int = 10
    stride: int = 10
    epochs: int = 20
    batch_size: int = 32
    latent_dim: int = 16
    learning_rate: float = 0.005
    weight_decay: float = 1e-5
    seed: int = 42

    def __post_init__(self):
        for name in ("window_length", "stride", "epochs", "batch_size",
                     "latent_dim"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.learning_rate <= 0 or self.weight_decay < 0:
            raise ValueError("invalid optimizer settings")


def layer_sizes(L: int, d: int) -> list[tuple[int, int]]:
    return [(L, 2 * d), (2 * d, 2 * d), (2 * d, d),
            (d, 2 * d), (2 * d, 2 * d), (2 * d, L)]


class AeModel:
    """Weights/biases of the dense autoencoder."""

    def __init__(self, window_length: int, latent_dim: int, seed: int):
        self.window_length = window_length
        self.latent_dim = latent_dim
        rng = np.random.default_rng(seed)
        self.weights = []
        self.biases = []
        for fan_in, fan_out in layer_sizes(window_length, latent_dim):
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            self.weights.append(rng.uniform(-limit, limit, (fan_in, fan_out)))
            self.biases.append(np.zeros(fan_out))

    def parameters(self):
        return self.weights + self.biases

    def n_parameters(self) -> int:
        return sum(p.size for p in self.parameters())


def forward_batch(model: AeModel, X: np.ndarray):
    """Forward pass for a batch of windows; returns output and layer caches."""
    acts = [X]
    h = X
    last = len(model.weights) - 1
    for i, (W, b) in enumerate(zip(model.weights, model.biases)):
        z = h @ W + b
        h = z if i == last else np.maximum(z, 0.0)
        acts.append(h)
    return h, acts


def forward(model: AeModel, window: np.ndarray):
    """Reconstruction and mean-squared-error loss for a single window."""
    window = np.asarray(window, dtype=float)
    out, _ = forward_batch(model, window[None, :])
    recon = out[0]
    if not np.all(np.isfinite(recon)):
        raise FloatingPointError("NaN/inf in forward pass")
    loss = float(np.mean((recon - window) ** 2))
    return recon, loss


def gradients(model: AeModel, X: np.ndarray):
    """Mean-squared-error loss and gradients for a batch of windows."""
    out, acts = forward_batch(model, X)
    B, L = X.shape
    loss = float(np.mean((out - X) ** 2))
    # d loss / d out for loss = mean over batch and window dims
    delta = 2.0 * (out - X) / (B * L)
    gW = [None] * len(model.weights)
    gb = [None] * len(model.biases)
    last = len(model.weights) - 1
    for i in range(last, -1, -1):
        gW[i] = acts[i].T @ delta
        gb[i] = delta.sum(axis=0)
        if i > 0:
            delta = (delta @ model.weights[i].T) * (acts[i] > 0)
    return loss, gW, gb


def series_windows(values: np.ndarray, L: int, stride: int) -> np.ndarray:
    n_windows = (len(values) - L) // stride + 1
    if n_windows < 1:
        raise ValueError("series shorter than the window length")
    return np.stack([values[k * stride:k * stride + L] for k in range(n_windows)])


def train(values: np.ndarray, cfg: AeConfig) -> tuple[AeModel, list[float]]:
    """Train on all sliding windows of a raw value array.

    Deliberately accepts values only (never segment labels) to keep the
    training stage unsupervised. Returns the model and per-epoch losses.
    """
    values = np.asarray(values, dtype=float)
    X = series_windows(values, cfg.window_length, cfg.stride)
    model = AeModel(cfg.window_length, cfg.latent_dim, cfg.seed)
    shuffle_rng = np.random.default_rng(cfg.seed + 1)
    trajectory: list[float] = []
    for _ in range(cfg.epochs):
        order = shuffle_rng.permutation(len(X))
        epoch_loss = 0.0
        n_batches = 0
        for lo in range(0, len(X), cfg.batch_size):
            batch = X[order[lo:lo + cfg.batch_size]]
            loss, gW, gb = gradients(model, batch)
            if not np.isfinite(loss) or loss > 1e6:
                raise TrainingDiverged(trajectory + [loss])
            for i in range(len(model.weights)):
                model.weights[i] -= cfg.learning_rate * gW[i]
                model.biases[i] -= cfg.learning_rate * gb[i]
                # decoupled weight decay
                model.weights[i] -= cfg.learning_rate * cfg.weight_decay * model.weights[i]
                model.biases[i] -= cfg.learning_rate * cfg.weight_decay * model.biases[i]
            epoch_loss += loss
            n_batches += 1
        trajectory.append(epoch_loss / n_batches)
    return model, trajectory


def score(model: AeModel, series: TimeSeries, cfg: AeConfig) -> ScoreSeries:
    """Per-window reconstruction loss expanded to per-timestamp scores."""
    X = series_windows(series.values, cfg.window_length, cfg.stride)
    out, _ = forward_batch(model, X)
    losses = np.mean((out - X) ** 2, axis=1)
    return expand_window_scores(losses, cfg.window_length, cfg.stride,
                                len(series), "ae")


def dump_model(model: AeModel, path: str):
    """Write parameters as named flat arrays, one block per parameter."""
    with open(path, "w") as fh:
        fh.write(f"# window_length={model.window_length} "
                 f"latent_dim={model.latent_dim}\n")
        for i, (W, b) in enumerate(zip(model.weights, model.biases)):
            fh.write(f"W{i} {W.shape[0]} {W.shape[1]} "
                     + " ".join(repr(v) for v in W.ravel()) + "\n")
            fh.write(f"b{i} {b.shape[0]} "
                     + " ".join(repr(v) for v in b) + "\n")
