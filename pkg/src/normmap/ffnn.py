"""Single-hidden-layer feedforward regressor trained with Adam on MSE.

Architecture: d inputs -> k hidden units (tanh, or identity for the
reduced-rank-regression mode) -> m linear outputs. Loss is the mean of
squared errors over all batch cells. Everything is double precision and
seeded: Glorot-uniform weights, zero biases, per-epoch shuffling from
one generator, so identical configs give bit-identical models on one
platform. No regularization of any kind is applied; overfitting with
large k is deliberate, observable behavior.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from ._util import rng_for
from .errors import DimensionMismatch, NonFiniteLoss

ACTIVATIONS = ("tanh", "identity")


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 50
    learning_rate: float = 1e-4
    batch_size: int = 32
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    shuffle: bool = True

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")


@dataclass(frozen=True)
class FfnnModel:
    W1: np.ndarray  # (k, d)
    b1: np.ndarray  # (k,)
    W2: np.ndarray  # (m, k)
    b2: np.ndarray  # (m,)
    activation: str = "tanh"
    train_log: tuple[float, ...] = ()

    def __post_init__(self):
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        k, d = self.W1.shape
        m, k2 = self.W2.shape
        if k2 != k or self.b1.shape != (k,) or self.b2.shape != (m,):
            raise DimensionMismatch("inconsistent parameter shapes")
        for arr in (self.W1, self.b1, self.W2, self.b2):
            if not np.all(np.isfinite(arr)):
                raise ValueError("non-finite parameters")

    @property
    def dims(self) -> tuple[int, int, int]:
        k, d = self.W1.shape
        return d, k, self.W2.shape[0]

    @property
    def parameter_count(self) -> int:
        d, k, m = self.dims
        return k * (d + 1) + m * (k + 1)


def init_ffnn(d: int, k: int, m: int, seed: int = 0,
              activation: str = "tanh") -> FfnnModel:
    """Glorot-uniform weights, zero biases, fully determined by seed."""
    if d < 1 or k < 1 or m < 1:
        raise ValueError(f"dimensions must be >= 1, got d={d} k={k} m={m}")
    rng = rng_for(seed, 7)
    lim1 = np.sqrt(6.0 / (d + k))
    lim2 = np.sqrt(6.0 / (k + m))
    return FfnnModel(
        W1=rng.uniform(-lim1, lim1, size=(k, d)),
        b1=np.zeros(k),
        W2=rng.uniform(-lim2, lim2, size=(m, k)),
        b2=np.zeros(m),
        activation=activation,
    )


def _dense(rows):
    return rows.toarray() if sp.issparse(rows) else np.asarray(rows, dtype=np.float64)


def _forward_arrays(params, activation, X):
    Z1 = _dense(X @ params["W1"].T) + params["b1"]
    H = np.tanh(Z1) if activation == "tanh" else Z1
    return H, H @ params["W2"].T + params["b2"]


def _forward(model: FfnnModel, X) -> tuple[np.ndarray, np.ndarray]:
    params = {"W1": model.W1, "b1": model.b1, "W2": model.W2, "b2": model.b2}
    return _forward_arrays(params, model.activation, X)


def _backward_arrays(params, activation, X, Y):
    """Loss and analytic gradients of the elementwise MSE on one batch.

    Overflow is not a hard error here: divergence surfaces as a
    non-finite loss, which the training loop reports as NonFiniteLoss.
    """
    Xd = _dense(X)
    Yd = _dense(Y)
    with np.errstate(over="ignore", invalid="ignore"):
        H, pred = _forward_arrays(params, activation, Xd)
        diff = pred - Yd
        loss = float(np.mean(diff**2))
        G = (2.0 / diff.size) * diff
        gW2 = G.T @ H
        gb2 = G.sum(axis=0)
        GH = G @ params["W2"]
        if activation == "tanh":
            GZ = GH * (1.0 - H**2)
        else:
            GZ = GH
        gW1 = GZ.T @ Xd
        gb1 = GZ.sum(axis=0)
    return loss, {"W1": gW1, "b1": gb1, "W2": gW2, "b2": gb2}


def _forward_backward(model: FfnnModel, X, Y):
    params = {"W1": model.W1, "b1": model.b1, "W2": model.W2, "b2": model.b2}
    return _backward_arrays(params, model.activation, X, Y)


def train_ffnn(model: FfnnModel, X, Y, cfg: TrainConfig) -> FfnnModel:
    """Run seeded mini-batch Adam; returns a new model, input untouched."""
    n = X.shape[0]
    d, k, m = model.dims
    if X.shape[1] != d:
        raise DimensionMismatch(f"X has {X.shape[1]} columns, model expects {d}")
    if Y.shape != (n, m):
        raise DimensionMismatch(f"Y has shape {Y.shape}, expected ({n}, {m})")
    if cfg.batch_size > n:
        raise ValueError(f"batch_size {cfg.batch_size} exceeds n={n}")

    params = {"W1": model.W1.copy(), "b1": model.b1.copy(),
              "W2": model.W2.copy(), "b2": model.b2.copy()}
    moment1 = {name: np.zeros_like(p) for name, p in params.items()}
    moment2 = {name: np.zeros_like(p) for name, p in params.items()}
    rng = rng_for(cfg.seed, 11)
    step = 0
    epoch_losses = []
    for epoch in range(cfg.epochs):
        order = rng.permutation(n) if cfg.shuffle else np.arange(n)
        batch_losses = []
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            loss, grads = _backward_arrays(params, model.activation,
                                           X[idx], Y[idx])
            if not np.isfinite(loss):
                raise NonFiniteLoss("training diverged", epoch=epoch)
            batch_losses.append(loss)
            step += 1
            bias1 = 1.0 - cfg.beta1**step
            bias2 = 1.0 - cfg.beta2**step
            for name, g in grads.items():
                m1 = moment1[name]
                m2 = moment2[name]
                m1 *= cfg.beta1
                m1 += (1.0 - cfg.beta1) * g
                m2 *= cfg.beta2
                m2 += (1.0 - cfg.beta2) * g**2
                params[name] -= (cfg.learning_rate
                                 * (m1 / bias1)
                                 / (np.sqrt(m2 / bias2) + cfg.eps))
        epoch_losses.append(float(np.mean(batch_losses)))
    return FfnnModel(
        W1=params["W1"], b1=params["b1"], W2=params["W2"], b2=params["b2"],
        activation=model.activation,
        train_log=model.train_log + tuple(epoch_losses),
    )


def predict_ffnn(model: FfnnModel, X_new) -> np.ndarray:
    """Row-wise W2 act(W1 x + b1) + b2."""
    d = model.dims[0]
    if X_new.shape[1] != d:
        raise DimensionMismatch(
            f"X_new has {X_new.shape[1]} columns, model expects {d}"
        )
    _, pred = _forward(model, X_new)
    return pred


def gradient_check(model: FfnnModel, X, Y, probe_count: int = 100,
                   h: float = 1e-5, seed: int = 0) -> float:
    """Max relative error of analytic vs central-difference gradients.

    Intended for small shapes (around 20x10 and below); probes
    `probe_count` randomly chosen parameter coordinates.
    """
    _, grads = _forward_backward(model, X, Y)
    names = ("W1", "b1", "W2", "b2")
    arrays = {n: getattr(model, n).copy() for n in names}
    sizes = np.array([arrays[n].size for n in names])
    total = int(sizes.sum())
    rng = rng_for(seed, 13)
    chosen = rng.choice(total, size=min(probe_count, total), replace=False)
    offsets = np.cumsum(sizes) - sizes

    Xd = _dense(X)
    Yd = _dense(Y)

    def loss_at(params):
        _, pred = _forward_arrays(params, model.activation, Xd)
        return float(np.mean((pred - Yd)**2))

    worst = 0.0
    for flat_index in chosen:
        which = int(np.searchsorted(offsets + sizes, flat_index, side="right"))
        name = names[which]
        local = int(flat_index - offsets[which])
        coords = np.unravel_index(local, arrays[name].shape)
        original = arrays[name][coords]
        arrays[name][coords] = original + h
        up = loss_at(arrays)
        arrays[name][coords] = original - h
        down = loss_at(arrays)
        arrays[name][coords] = original
        numeric = (up - down) / (2.0 * h)
        analytic = grads[name][coords]
        denom = max(abs(analytic), abs(numeric), 1e-6)
        worst = max(worst, abs(analytic - numeric) / denom)
    return worst


def save_ffnn_model(model: FfnnModel, path) -> None:
    np.savez(
        path,
        format="normmap-ffnn-v1",
        W1=model.W1, b1=model.b1, W2=model.W2, b2=model.b2,
        activation=model.activation,
        train_log=np.array(model.train_log, dtype=np.float64),
    )


def load_ffnn_model(path) -> FfnnModel:
    with np.load(path) as data:
        if str(data["format"]) != "normmap-ffnn-v1":
            raise ValueError(f"not an FFNN model file: {path}")
        return FfnnModel(
            W1=data["W1"], b1=data["b1"], W2=data["W2"], b2=data["b2"],
            activation=str(data["activation"]),
            train_log=tuple(float(x) for x in data["train_log"]),
        )
