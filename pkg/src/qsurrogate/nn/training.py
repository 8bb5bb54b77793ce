"""Loss, Adam, and the early-stopping training loop."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field

import numpy as np

from ..errors import TrainingDivergedError
from ..seeding import stream
from .model import Architecture, HybridModel


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps_adam: float = 1e-8
    l2: float = 1e-5
    batch_size: int = 32
    max_epochs: int = 500
    patience: int = 20
    min_delta: float = 1e-7
    val_fraction: float = 0.2
    seed: int = 0

    def __post_init__(self):
        if min(self.learning_rate, self.eps_adam, self.batch_size, self.max_epochs, self.patience) <= 0:
            raise ValueError("learning rate, eps_adam, batch size, max epochs and patience must be positive")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ValueError("Adam betas must lie in [0, 1)")
        if self.l2 < 0 or self.min_delta < 0:
            raise ValueError("l2 and min_delta must be non-negative")
        if not 0 < self.val_fraction <= 0.5:
            raise ValueError("validation fraction must lie in (0, 0.5]")

    def config_hash(self) -> str:
        return hashlib.sha256(json.dumps(asdict(self), sort_keys=True).encode()).hexdigest()[:16]


def mse_loss(pred: np.ndarray, target: np.ndarray) -> float:
    """Mean over samples of the squared Euclidean error."""
    pred, target = np.atleast_2d(pred), np.atleast_2d(target)
    if pred.shape != target.shape:
        raise ValueError(f"prediction {pred.shape} and target {target.shape} differ in shape")
    if pred.shape[0] == 0:
        raise ValueError("empty batch")
    return float(np.sum((pred - target) ** 2) / pred.shape[0])


def l2_penalty(model: HybridModel, lam: float) -> float:
    return lam * sum(float(np.sum(p * p)) for (_, p), d in zip(model.parameters(), model.decayed()) if d)


def loss_and_grads(model: HybridModel, F: np.ndarray, Y: np.ndarray, lam: float) -> tuple[float, list[np.ndarray]]:
    """Total loss (data + L2) on features ``F`` / standardized targets ``Y``, and its gradients."""
    pred = model.forward(F)
    loss = mse_loss(pred, Y) + l2_penalty(model, lam)
    model.backward(2.0 * (pred - Y) / Y.shape[0])
    grads = [
        g + 2.0 * lam * p if d else g
        for g, (_, p), d in zip(model.gradients(), model.parameters(), model.decayed())
    ]
    return loss, grads


@dataclass
class AdamState:
    m: list[np.ndarray]
    v: list[np.ndarray]
    step: int = 0

    @classmethod
    def zeros_like(cls, params: list[np.ndarray]) -> "AdamState":
        return cls([np.zeros_like(p) for p in params], [np.zeros_like(p) for p in params])


def adam_step(params: list[np.ndarray], grads: list[np.ndarray], state: AdamState, cfg: TrainConfig) -> None:
    """One bias-corrected Adam update, applied to ``params`` in place."""
    state.step += 1
    t = state.step
    c1 = 1.0 - cfg.beta1**t
    c2 = 1.0 - cfg.beta2**t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= cfg.beta1
        m += (1.0 - cfg.beta1) * g
        v *= cfg.beta2
        v += (1.0 - cfg.beta2) * g * g
        p -= cfg.learning_rate * (m / c1) / (np.sqrt(v / c2) + cfg.eps_adam)


@dataclass
class History:
    train_loss: list[float] = field(default_factory=list)
    val_loss: list[float] = field(default_factory=list)
    best_epoch: int = -1
    stopped_epoch: int = -1

    @property
    def best_val_loss(self) -> float:
        return self.val_loss[self.best_epoch]


class EarlyStopping:
    """Tracks the best validation loss; ``update`` returns True when training should stop."""

    def __init__(self, patience: int, min_delta: float = 0.0):
        self.patience = patience
        self.min_delta = min_delta
        self.best = np.inf
        self.best_epoch = -1
        self.epoch = -1

    def update(self, val: float) -> bool:
        self.epoch += 1
        if val < self.best - self.min_delta:
            self.best, self.best_epoch = val, self.epoch
            return False
        return self.epoch - self.best_epoch >= self.patience

    @property
    def improved(self) -> bool:
        return self.best_epoch == self.epoch


def split_indices(n: int, val_fraction: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Seeded shuffle into (train, validation) index arrays."""
    n_val = max(1, int(round(n * val_fraction)))
    if n - n_val < 1:
        raise ValueError("dataset too small to split")
    perm = stream(seed, "split").permutation(n)
    return np.sort(perm[n_val:]), np.sort(perm[:n_val])


def train(
    arch: Architecture,
    X: np.ndarray,
    Y: np.ndarray,
    cfg: TrainConfig = TrainConfig(),
    validation: tuple[np.ndarray, np.ndarray] | None = None,
    log=None,
) -> tuple[HybridModel, History]:
    """Train ``arch`` on raw sensors ``X`` and raw displacements ``Y``.

    Without an explicit ``validation`` pair the data is split by a seeded
    shuffle. Returns the model restored to its best-validation parameters.
    """
    X, Y = np.asarray(X, dtype=float), np.asarray(Y, dtype=float)
    if X.shape[0] != Y.shape[0] or X.shape[0] < 2:
        raise ValueError("need matching, non-trivial X and Y")
    if validation is None:
        tr, va = split_indices(X.shape[0], cfg.val_fraction, cfg.seed)
        X_tr, Y_tr, X_va, Y_va = X[tr], Y[tr], X[va], Y[va]
    else:
        X_tr, Y_tr = X, Y
        X_va, Y_va = (np.asarray(a, dtype=float) for a in validation)

    model = HybridModel.initialize(arch, stream(cfg.seed, "init"))
    model.fit_preprocessing(X_tr, Y_tr)
    F_tr, F_va = model.featurize(X_tr), model.featurize(X_va)
    T_tr, T_va = model.y_scaler.transform(Y_tr), model.y_scaler.transform(Y_va)

    params = [p for _, p in model.parameters()]
    state = AdamState.zeros_like(params)
    batch_rng = stream(cfg.seed, "batching")
    hist = History()
    best = model.get_state()
    stopper = EarlyStopping(cfg.patience, cfg.min_delta)
    last_finite = None
    n = F_tr.shape[0]
    for epoch in range(cfg.max_epochs):
        order = batch_rng.permutation(n)
        total = 0.0
        for start in range(0, n, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            loss, grads = loss_and_grads(model, F_tr[idx], T_tr[idx], cfg.l2)
            if not np.isfinite(loss) or not all(np.all(np.isfinite(g)) for g in grads):
                raise TrainingDivergedError(epoch, last_finite)
            adam_step(params, grads, state, cfg)
            total += loss * len(idx)
        val = mse_loss(model.forward(F_va), T_va)
        if not np.isfinite(val):
            raise TrainingDivergedError(epoch, last_finite)
        last_finite = epoch
        hist.train_loss.append(total / n)
        hist.val_loss.append(val)
        if log is not None:
            log(epoch, total / n, val)
        stop = stopper.update(val)
        if stopper.improved:
            hist.best_epoch = epoch
            best = model.get_state()
        if stop:
            break
    hist.stopped_epoch = len(hist.val_loss) - 1
    model.set_state(best)
    return model, hist
