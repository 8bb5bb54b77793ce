"""Pooled regression metrics."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np


@dataclass(frozen=True)
class MetricsReport:
    mse: float
    rmse: float
    r2: float
    nrmse_range: float
    nrmse_std: float

    def as_dict(self) -> dict[str, float]:
        return asdict(self)


def evaluate_arrays(pred: np.ndarray, target: np.ndarray) -> MetricsReport:
    """Metrics pooled over every sample and output dimension."""
    pred, target = np.asarray(pred, dtype=float), np.asarray(target, dtype=float)
    if pred.shape != target.shape:
        raise ValueError(f"prediction {pred.shape} and target {target.shape} differ in shape")
    if target.size == 0:
        raise ValueError("empty test set")
    resid = pred - target
    mse = float(np.mean(resid**2))
    rmse = float(np.sqrt(mse))
    ss_tot = float(np.sum((target - target.mean()) ** 2))
    if ss_tot == 0.0:
        raise ValueError("targets have zero variance; r2 is undefined")
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot
    return MetricsReport(mse, rmse, r2, rmse / float(np.ptp(target)), rmse / float(np.std(target)))


def evaluate(model, X: np.ndarray, Y: np.ndarray, space: str = "standardized") -> MetricsReport:
    """Evaluate on raw inputs/targets; ``space`` picks standardized or raw displacement units."""
    pred = model.predict(X)
    if space == "raw":
        return evaluate_arrays(pred, Y)
    if space != "standardized":
        raise ValueError("space must be 'standardized' or 'raw'")
    return evaluate_arrays(model.y_scaler.transform(pred), model.y_scaler.transform(Y))
