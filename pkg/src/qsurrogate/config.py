"""Experiment configuration: a YAML file validated against a strict schema."""

from __future__ import annotations

from pathlib import Path
from typing import Literal, Optional

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .embedding import TERM_MODES, PolyConfig
from .errors import ConfigError
from .femgen import FrameConfig, LoadConfig, Section
from .nn import VARIANTS, EmbedConfig, QuantumConfig, TrainConfig, hc_qubits
from .qsim import AXES, MAX_QUBITS, TOPOLOGIES


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class FemgenSection(_Strict):
    n_bays: int = Field(10, ge=1)
    length: float = Field(23.65, gt=0)
    width: float = Field(3.6, gt=0)
    height: float = Field(2.6, gt=0)
    chord_outer: float = Field(0.25, gt=0)
    chord_wall: float = Field(0.012, gt=0)
    web_outer: float = Field(0.15, gt=0)
    web_wall: float = Field(0.008, gt=0)
    youngs_modulus: float = Field(200e9, gt=0)
    poisson: float = Field(0.3, gt=-1, lt=0.5)
    samples: int = Field(10_000, ge=1)
    noise_sigma: float = Field(0.0, ge=0)
    material_min: float = Field(1.2, ge=0)
    material_max: float = Field(6.5, ge=0)
    wind_max: float = Field(54.0, ge=0)
    wind_material_cutoff: float = Field(19.0, ge=0)
    format: Literal["csv", "npz"] = "csv"

    def frame(self) -> FrameConfig:
        E, nu = self.youngs_modulus, self.poisson
        return FrameConfig(
            self.n_bays, self.length, self.width, self.height,
            Section.hollow_square(self.chord_outer, self.chord_wall, E, nu),
            Section.hollow_square(self.web_outer, self.web_wall, E, nu),
        )

    def loads(self) -> LoadConfig:
        return LoadConfig(self.material_min, self.material_max, self.wind_max, self.wind_material_cutoff)


class EmbeddingSection(_Strict):
    degree: Literal[1, 2, 3] = 2
    include_bias: bool = False
    terms: Literal[TERM_MODES] = "all_up_to_degree"
    epsilon: float = Field(1e-6, gt=0)
    reduce_k: Optional[int] = Field(None, ge=1)

    def build(self) -> EmbedConfig:
        return EmbedConfig(self.degree, self.include_bias, self.terms, self.epsilon, self.reduce_k)


class QuantumSection(_Strict):
    n_layers: int = Field(10, ge=1)
    axes: tuple[Literal[AXES], ...] = ("Y",)
    topology: Literal[TOPOLOGIES] = "ring"
    angle_scale: float = 1.0
    diag_qubits: int = Field(7, ge=1, le=MAX_QUBITS)
    cq_qubits: int = Field(8, ge=1, le=MAX_QUBITS)
    hc_encoding: Literal["amplitude", "angle"] = "amplitude"

    def build(self) -> QuantumConfig:
        return QuantumConfig(self.n_layers, tuple(self.axes), self.topology, self.angle_scale,
                             self.diag_qubits, self.cq_qubits, self.hc_encoding)


class TrainSection(_Strict):
    learning_rate: float = Field(1e-3, gt=0)
    beta1: float = Field(0.9, ge=0, lt=1)
    beta2: float = Field(0.999, ge=0, lt=1)
    eps_adam: float = Field(1e-8, gt=0)
    l2: float = Field(1e-5, ge=0)
    batch_size: int = Field(32, ge=1)
    max_epochs: int = Field(500, ge=1)
    patience: int = Field(20, ge=1)
    min_delta: float = Field(1e-7, ge=0)
    val_fraction: float = Field(0.2, gt=0, le=0.5)

    def build(self, seed: int) -> TrainConfig:
        return TrainConfig(**self.model_dump(), seed=seed)


class NNSection(_Strict):
    variants: tuple[Literal[VARIANTS], ...] = VARIANTS
    hidden: tuple[int, int] = (64, 32)
    cluster_placement: Literal["last", "penultimate"] = "last"
    test_fraction: float = Field(0.2, gt=0, lt=1)
    train: TrainSection = TrainSection()


class ClusteringSection(_Strict):
    k_min: int = Field(2, ge=2, le=12)
    k_max: int = Field(12, ge=2, le=12)
    final_k: int = Field(7, ge=1)
    sweep_epochs: int = Field(50, ge=1)

    @model_validator(mode="after")
    def _range(self):
        if self.k_min > self.k_max:
            raise ValueError("k_min must not exceed k_max")
        return self


class PathsSection(_Strict):
    dataset: Optional[str] = None  # default: <out-dir>/dataset.<format>
    checkpoints: str = "checkpoints"
    reports: str = "reports"


class ExperimentConfig(_Strict):
    seed: int = Field(0, ge=0)
    femgen: FemgenSection = FemgenSection()
    embedding: EmbeddingSection = EmbeddingSection()
    quantum: QuantumSection = QuantumSection()
    nn: NNSection = NNSection()
    clustering: ClusteringSection = ClusteringSection()
    paths: PathsSection = PathsSection()

    @model_validator(mode="after")
    def _consistent(self):
        f = self.femgen
        if not 0 < 2 * f.chord_wall < f.chord_outer or not 0 < 2 * f.web_wall < f.web_outer:
            raise ValueError("section walls must satisfy 0 < 2*wall < outer")
        if f.material_min > f.material_max or f.wind_material_cutoff > f.wind_max:
            raise ValueError("load ranges are inconsistent")
        e = self.embedding
        d = PolyConfig(e.degree, e.include_bias, e.terms).expanded_dim(7)
        if e.reduce_k is not None:
            if e.reduce_k > d:
                raise ValueError(f"reduce_k={e.reduce_k} exceeds the expanded dimension {d}")
            d = e.reduce_k
        if "PolySPD_HC_Clustered" in self.nn.variants and hc_qubits(d) > MAX_QUBITS:
            raise ValueError(f"d'={d} needs {hc_qubits(d)} qubits; the simulator supports {MAX_QUBITS}")
        if "PolySPD_Clustered" in self.nn.variants and self.quantum.diag_qubits > d:
            raise ValueError(f"diag_qubits={self.quantum.diag_qubits} exceeds d'={d}")
        if min(self.nn.hidden) < 1:
            raise ValueError("hidden widths must be positive")
        return self

    def with_seed(self, seed: int | None) -> "ExperimentConfig":
        return self if seed is None else self.model_copy(update={"seed": seed})

    def train_config(self, epochs: int | None = None) -> TrainConfig:
        cfg = self.nn.train.build(self.seed)
        if epochs is not None:
            cfg = TrainConfig(**{**cfg.__dict__, "max_epochs": epochs})
        return cfg

    def effective_yaml(self) -> str:
        return yaml.safe_dump(self.model_dump(mode="json"), sort_keys=False)


def _format_error(exc: ValidationError) -> str:
    parts = []
    for err in exc.errors():
        loc = ".".join(str(x) for x in err["loc"]) or "<root>"
        parts.append(f"{loc}: {err['msg']}")
    return "; ".join(parts)


def parse_config(data: dict | None) -> ExperimentConfig:
    try:
        return ExperimentConfig.model_validate(data or {})
    except ValidationError as exc:
        raise ConfigError(f"invalid configuration: {_format_error(exc)}") from None


def load_config(path: str | Path | None) -> ExperimentConfig:
    if path is None:
        return ExperimentConfig()
    path = Path(path)
    try:
        data = yaml.safe_load(path.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"config {path} is not valid YAML: {exc}") from None
    if data is not None and not isinstance(data, dict):
        raise ConfigError(f"config {path} must be a mapping at top level")
    return parse_config(data)
