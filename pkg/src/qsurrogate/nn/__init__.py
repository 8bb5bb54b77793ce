from .layers import Dense, QuantumLayer
from .metrics import MetricsReport, evaluate, evaluate_arrays
from .model import (
    TABLE_NAMES, VARIANTS, Architecture, EmbedConfig, HybridModel, PolySPDFeatures, QuantumConfig,
    StandardFeatures, build_variant, hc_qubits,
)
from .training import (
    AdamState, EarlyStopping, History, TrainConfig, adam_step, l2_penalty, loss_and_grads, mse_loss, split_indices, train,
)
from . import checkpoint

__all__ = [
    "Dense", "QuantumLayer", "MetricsReport", "evaluate", "evaluate_arrays", "TABLE_NAMES", "VARIANTS",
    "Architecture", "EmbedConfig", "HybridModel", "PolySPDFeatures", "QuantumConfig", "StandardFeatures",
    "build_variant", "hc_qubits", "AdamState", "EarlyStopping", "History", "TrainConfig", "adam_step", "l2_penalty",
    "loss_and_grads", "mse_loss", "split_indices", "train", "checkpoint",
]
