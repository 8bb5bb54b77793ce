"""Model architectures for the six compared variants, input featurizers, and the composed model."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .. import qsim
from ..embedding import (
    DEFAULT_EPSILON, PolyConfig, SpectralReducer, Standardizer, density_matrix, hs_vectorize,
    poly_expand,
)
from ..linalg import SpectralDecomposition
from .layers import Dense, QuantumLayer

VARIANTS = (
    "BaselineMLP",
    "QuantumClassical",
    "ClassicalQuantum",
    "ClusteredMLP",
    "PolySPD_Clustered",
    "PolySPD_HC_Clustered",
)

TABLE_NAMES = {
    "BaselineMLP": "Baseline classic MLP",
    "QuantumClassical": "Quantum-Classical MLP",
    "ClassicalQuantum": "Classical-Quantum MLP",
    "ClusteredMLP": "Classic MLP (Clustering enforced)",
    "PolySPD_Clustered": "QMLP (Poly-SPD + clustering)",
    "PolySPD_HC_Clustered": "QMLP (Poly-SPD + HC + clustering)",
}


@dataclass(frozen=True)
class EmbedConfig:
    degree: int = 2
    include_bias: bool = False
    terms: str = "all_up_to_degree"
    epsilon: float = DEFAULT_EPSILON
    reduce_k: int | None = None  # optional top-k spectral compression of the expanded features

    @property
    def poly(self) -> PolyConfig:
        return PolyConfig(self.degree, self.include_bias, self.terms)

    def feature_dim(self, n_inputs: int) -> int:
        d = self.poly.expanded_dim(n_inputs)
        if self.reduce_k is not None:
            if not 1 <= self.reduce_k <= d:
                raise ValueError(f"reduce_k must lie in [1, {d}]")
            return self.reduce_k
        return d


@dataclass(frozen=True)
class QuantumConfig:
    n_layers: int = 10
    axes: tuple[str, ...] = ("Y",)
    topology: str = "ring"
    angle_scale: float = 1.0  # radians per standardized sensor unit (angle-encoded variants)
    diag_qubits: int = 7  # qubits for the Poly-SPD diagonal angle encoding
    cq_qubits: int = 8  # qubits between the dense stages of ClassicalQuantum
    hc_encoding: str = "amplitude"  # or "angle": pi * leading amplitudes of vec(rho) as Ry angles


def hc_qubits(d: int) -> int:
    """Qubits needed to amplitude-load a vectorized d x d density matrix."""
    return max(1, math.ceil(math.log2(d * d)))


@dataclass
class Architecture:
    """Declarative description of a variant: featurizer + ordered block list."""

    tag: str
    n_inputs: int
    n_outputs: int
    featurizer: dict
    blocks: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "Architecture":
        return cls(d["tag"], int(d["n_inputs"]), int(d["n_outputs"]), dict(d["featurizer"]),
                   [dict(b) for b in d["blocks"]])

    def parameter_count(self) -> int:
        total = 0
        for b in self.blocks:
            if b["type"] == "dense":
                total += b["n_in"] * b["n_out"] + b["n_out"]
            else:
                total += b["n_layers"] * b["n_qubits"] * len(b["axes"])
        return total

    def dense_macs(self) -> int:
        return sum(b["n_in"] * b["n_out"] for b in self.blocks if b["type"] == "dense")

    def hidden_widths(self) -> list[int]:
        dense = [b for b in self.blocks if b["type"] == "dense"]
        return [b["n_out"] for b in dense[:-1]]


def _dense(n_in: int, n_out: int, activation: str = "relu") -> dict:
    return {"type": "dense", "n_in": n_in, "n_out": n_out, "activation": activation}


def _quantum(n: int, q: QuantumConfig, encoding: str, input_scale: float = 1.0, input_grad: bool = False) -> dict:
    if not 1 <= n <= qsim.MAX_QUBITS:
        raise ValueError(f"variant needs {n} qubits; the simulator supports 1..{qsim.MAX_QUBITS}")
    return {
        "type": "quantum", "n_qubits": n, "n_layers": q.n_layers, "axes": list(q.axes),
        "topology": q.topology, "encoding": encoding, "input_scale": input_scale,
        "input_grad": input_grad,
    }


def build_variant(
    tag: str,
    n_inputs: int = 7,
    n_outputs: int = 1017,
    cluster_k: int = 7,
    quantum: QuantumConfig = QuantumConfig(),
    embed: EmbedConfig = EmbedConfig(),
    hidden: tuple[int, int] = (64, 32),
    cluster_placement: str = "last",
) -> Architecture:
    """Architecture for one of :data:`VARIANTS`.

    Cluster-enforced variants replace one hidden width by ``cluster_k``:
    the last hidden layer by default, the first with
    ``cluster_placement="penultimate"``.
    """
    if tag not in VARIANTS:
        raise ValueError(f"unknown variant {tag!r}; expected one of {VARIANTS}")
    if min(n_inputs, n_outputs, cluster_k, *hidden) < 1:
        raise ValueError("all layer widths must be positive")
    if cluster_placement not in ("last", "penultimate"):
        raise ValueError("cluster_placement must be 'last' or 'penultimate'")
    h1, h2 = hidden
    if tag.endswith("Clustered") or tag == "ClusteredMLP":
        h1, h2 = (h1, cluster_k) if cluster_placement == "last" else (cluster_k, h2)
    std = {"type": "standardize"}

    def head(n_in: int) -> list[dict]:
        return [_dense(n_in, h1), _dense(h1, h2), _dense(h2, n_outputs, "identity")]

    if tag in ("BaselineMLP", "ClusteredMLP"):
        return Architecture(tag, n_inputs, n_outputs, std, head(n_inputs))
    if tag == "QuantumClassical":
        blocks = [_quantum(n_inputs, quantum, "angle", quantum.angle_scale)] + head(n_inputs)
        return Architecture(tag, n_inputs, n_outputs, std, blocks)
    if tag == "ClassicalQuantum":
        nq = quantum.cq_qubits
        blocks = [
            _dense(n_inputs, h1),
            _dense(h1, nq, "identity"),
            _quantum(nq, quantum, "angle", 1.0, input_grad=True),
            _dense(nq, n_outputs, "identity"),
        ]
        return Architecture(tag, n_inputs, n_outputs, std, blocks)

    d = embed.feature_dim(n_inputs)
    feat = {
        "type": "polyspd", "degree": embed.degree, "include_bias": embed.include_bias,
        "terms": embed.terms, "epsilon": embed.epsilon, "reduce_k": embed.reduce_k,
    }
    if tag == "PolySPD_Clustered":
        nq = quantum.diag_qubits
        if nq > d:
            raise ValueError(f"cannot angle-encode {nq} diagonal entries of a {d} x {d} density matrix")
        feat.update(mode="diagonal", n_angles=nq)
        blocks = [_quantum(nq, quantum, "angle", 1.0)] + head(nq)
    elif quantum.hc_encoding == "amplitude":
        nq = hc_qubits(d)
        feat.update(mode="hilbert_schmidt")
        blocks = [_quantum(nq, quantum, "amplitude")] + head(nq)
    elif quantum.hc_encoding == "angle":
        nq = hc_qubits(d)
        feat.update(mode="hilbert_schmidt", n_angles=nq)
        blocks = [_quantum(nq, quantum, "angle", 1.0)] + head(nq)
    else:
        raise ValueError("hc_encoding must be 'amplitude' or 'angle'")
    return Architecture(tag, n_inputs, n_outputs, feat, blocks)


class StandardFeatures:
    """Passes standardized sensors through unchanged."""

    def fit(self, X: np.ndarray) -> None:
        pass

    def transform(self, X: np.ndarray) -> np.ndarray:
        return np.asarray(X, dtype=float)

    def arrays(self) -> dict[str, np.ndarray]:
        return {}

    def load_arrays(self, arrays: dict[str, np.ndarray]) -> None:
        pass


class PolySPDFeatures:
    """Polynomial expansion -> regularized Gram -> sqrt -> density matrix per sample.

    ``mode="hilbert_schmidt"`` returns the normalized vectorized density
    matrix (amplitudes for state loading), or ``pi`` times its first
    ``n_angles`` entries when ``n_angles`` is set; ``mode="diagonal"``
    returns ``pi * diag(rho)[:n_angles]`` as rotation angles.
    """

    def __init__(self, cfg: dict):
        self.poly = PolyConfig(cfg["degree"], cfg["include_bias"], cfg["terms"])
        self.epsilon = float(cfg["epsilon"])
        self.reduce_k = cfg.get("reduce_k")
        self.mode = cfg["mode"]
        self.n_angles = cfg.get("n_angles")
        self.reducer: SpectralReducer | None = None

    def fit(self, X: np.ndarray) -> None:
        if self.reduce_k is not None:
            self.reducer = SpectralReducer.fit(poly_expand(X, self.poly), self.reduce_k, self.epsilon)

    def expand(self, X: np.ndarray) -> np.ndarray:
        Z = poly_expand(np.atleast_2d(X), self.poly)
        if self.reduce_k is not None:
            if self.reducer is None:
                raise RuntimeError("spectral reducer used before fit")
            Z = self.reducer.transform(Z)
        return Z

    def transform(self, X: np.ndarray) -> np.ndarray:
        rows = []
        for z in self.expand(X):
            rho = density_matrix(z, self.epsilon)
            if self.mode == "diagonal":
                rows.append(np.pi * np.diag(rho)[: self.n_angles])
            elif self.n_angles is None:
                rows.append(hs_vectorize(rho).amplitudes)
            else:
                rows.append(np.pi * hs_vectorize(rho).amplitudes[: self.n_angles])
        return np.array(rows)

    def arrays(self) -> dict[str, np.ndarray]:
        if self.reducer is None:
            return {}
        return {"reducer_eigenvalues": self.reducer.decomp.eigenvalues,
                "reducer_eigenvectors": self.reducer.decomp.eigenvectors}

    def load_arrays(self, arrays: dict[str, np.ndarray]) -> None:
        if "reducer_eigenvalues" in arrays:
            decomp = SpectralDecomposition(arrays["reducer_eigenvalues"], arrays["reducer_eigenvectors"])
            self.reducer = SpectralReducer(decomp, self.reduce_k)


def make_featurizer(cfg: dict):
    if cfg["type"] == "standardize":
        return StandardFeatures()
    if cfg["type"] == "polyspd":
        return PolySPDFeatures(cfg)
    raise ValueError(f"unknown featurizer {cfg['type']!r}")


def _make_block(b: dict, rng: np.random.Generator):
    if b["type"] == "dense":
        return Dense.init(rng, b["n_in"], b["n_out"], b["activation"])
    circuit = qsim.CircuitParams.random(rng, b["n_qubits"], b["n_layers"], b["axes"], b["topology"])
    return QuantumLayer(circuit, b["encoding"], b["input_scale"], b["input_grad"])


class HybridModel:
    """Featurizer followed by a stack of dense / quantum blocks.

    Inputs and targets are standardized with statistics fitted on the
    training split; :meth:`forward` and :meth:`backward` work in feature /
    standardized-target space, :meth:`predict` maps raw sensors to raw
    displacements.
    """

    def __init__(self, arch: Architecture, layers: list, featurizer=None,
                 x_scaler: Standardizer | None = None, y_scaler: Standardizer | None = None):
        self.arch = arch
        self.layers = layers
        self.featurizer = featurizer if featurizer is not None else make_featurizer(arch.featurizer)
        self.x_scaler = x_scaler
        self.y_scaler = y_scaler

    @classmethod
    def initialize(cls, arch: Architecture, rng: np.random.Generator) -> "HybridModel":
        return cls(arch, [_make_block(b, rng) for b in arch.blocks])

    @property
    def tag(self) -> str:
        return self.arch.tag

    def fit_preprocessing(self, X: np.ndarray, Y: np.ndarray) -> None:
        self.x_scaler = Standardizer.fit(X)
        self.y_scaler = Standardizer.fit(Y)
        self.featurizer.fit(self.x_scaler.transform(X))

    def featurize(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.arch.n_inputs:
            raise ValueError(f"{self.tag} expects {self.arch.n_inputs} inputs, got {X.shape[1]}")
        if self.x_scaler is not None:
            X = self.x_scaler.transform(X)
        return self.featurizer.transform(X)

    def forward(self, F: np.ndarray) -> np.ndarray:
        out = F
        for layer in self.layers:
            out = layer.forward(out)
        return out

    def backward(self, d_out: np.ndarray) -> None:
        g = d_out
        for i, layer in enumerate(reversed(self.layers)):
            g = layer.backward(g)
            if g is None and i != len(self.layers) - 1:
                raise RuntimeError("a non-leading quantum block must propagate input gradients")

    def predict(self, X: np.ndarray) -> np.ndarray:
        out = self.forward(self.featurize(X))
        return self.y_scaler.inverse(out) if self.y_scaler is not None else out

    def parameters(self) -> list[tuple[str, np.ndarray]]:
        return [(f"{i}.{k}", v) for i, layer in enumerate(self.layers) for k, v in layer.params.items()]

    def gradients(self) -> list[np.ndarray]:
        return [layer.grads[k] for layer in self.layers for k in layer.params]

    def decayed(self) -> list[bool]:
        """Which parameters carry the L2 penalty (dense weights only)."""
        return [k == "W" for layer in self.layers for k in layer.params]

    def get_state(self) -> list[np.ndarray]:
        return [p.copy() for _, p in self.parameters()]

    def set_state(self, state: list[np.ndarray]) -> None:
        for (_, p), s in zip(self.parameters(), state):
            p[...] = s

    def quantum_output_state(self, X: np.ndarray) -> np.ndarray:
        """Statevector leaving the first quantum block for the given raw input row(s)."""
        out = self.featurize(X)
        for layer in self.layers:
            if isinstance(layer, QuantumLayer):
                return layer.output_state(out)
            out = layer.forward(out)
        raise ValueError(f"{self.tag} has no quantum block")
