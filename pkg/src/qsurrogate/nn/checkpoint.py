"""Checkpoint files: one ``.npz`` with a JSON metadata record and float64 arrays."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from ..embedding import Standardizer
from ..errors import DataError
from .model import Architecture, HybridModel, make_featurizer
from .layers import Dense, QuantumLayer
from .. import qsim

FORMAT = "qsurrogate-checkpoint/1"


def save(model: HybridModel, path: str | Path, extra: dict | None = None) -> None:
    meta = {"format": FORMAT, "architecture": model.arch.to_dict(), **(extra or {})}
    arrays = {f"param.{name}": p for name, p in model.parameters()}
    for key, a in model.featurizer.arrays().items():
        arrays[f"feat.{key}"] = a
    for key, sc in (("x", model.x_scaler), ("y", model.y_scaler)):
        if sc is not None:
            arrays[f"{key}_mean"], arrays[f"{key}_std"] = sc.mean, sc.std
    arrays["meta"] = np.array(json.dumps(meta, sort_keys=True))
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)


def load(path: str | Path) -> tuple[HybridModel, dict]:
    path = Path(path)
    if not path.exists():
        raise DataError(f"checkpoint not found: {path}")
    try:
        z = np.load(path, allow_pickle=False)
    except (OSError, ValueError) as exc:
        raise DataError(f"{path}: not a checkpoint file") from exc
    with z:
        if "meta" not in z:
            raise DataError(f"{path}: missing metadata")
        meta = json.loads(str(z["meta"]))
        if meta.get("format") != FORMAT:
            raise DataError(f"{path}: unsupported checkpoint format {meta.get('format')!r}")
        arch = Architecture.from_dict(meta["architecture"])
        layers = []
        for i, b in enumerate(arch.blocks):
            if b["type"] == "dense":
                layers.append(Dense(z[f"param.{i}.W"], z[f"param.{i}.b"], b["activation"]))
            else:
                circuit = qsim.CircuitParams(z[f"param.{i}.theta"], tuple(b["axes"]), b["topology"])
                layers.append(QuantumLayer(circuit, b["encoding"], b["input_scale"], b["input_grad"]))
        featurizer = make_featurizer(arch.featurizer)
        featurizer.load_arrays({k[5:]: z[k] for k in z.files if k.startswith("feat.")})
        scalers = [
            Standardizer(z[f"{k}_mean"], z[f"{k}_std"]) if f"{k}_mean" in z else None for k in ("x", "y")
        ]
    return HybridModel(arch, layers, featurizer, *scalers), meta
