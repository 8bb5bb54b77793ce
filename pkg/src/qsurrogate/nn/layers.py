"""Trainable blocks: dense layers and the parameterized-circuit layer."""

from __future__ import annotations

import numpy as np

from .. import qsim

ACTIVATIONS = ("relu", "identity")


class Dense:
    """Affine map ``X @ W.T + b`` followed by ReLU or identity. ``W`` is ``(out, in)``."""

    kind = "dense"

    def __init__(self, W: np.ndarray, b: np.ndarray, activation: str = "relu"):
        if activation not in ACTIVATIONS:
            raise ValueError(f"activation must be one of {ACTIVATIONS}")
        self.W = np.asarray(W, dtype=float)
        self.b = np.asarray(b, dtype=float)
        if self.W.ndim != 2 or self.b.shape != (self.W.shape[0],):
            raise ValueError(f"inconsistent dense shapes W{self.W.shape} b{self.b.shape}")
        self.activation = activation
        self.grads: dict[str, np.ndarray] = {}
        self._x = None
        self._pre = None

    @classmethod
    def init(cls, rng: np.random.Generator, n_in: int, n_out: int, activation: str = "relu") -> "Dense":
        # He-uniform for ReLU, Glorot-uniform for linear heads.
        limit = np.sqrt(6.0 / n_in) if activation == "relu" else np.sqrt(6.0 / (n_in + n_out))
        return cls(rng.uniform(-limit, limit, size=(n_out, n_in)), np.zeros(n_out), activation)

    @property
    def n_in(self) -> int:
        return self.W.shape[1]

    @property
    def n_out(self) -> int:
        return self.W.shape[0]

    @property
    def params(self) -> dict[str, np.ndarray]:
        return {"W": self.W, "b": self.b}

    def forward(self, X: np.ndarray) -> np.ndarray:
        if X.shape[-1] != self.n_in:
            raise ValueError(f"dense layer expects width {self.n_in}, got {X.shape[-1]}")
        pre = X @ self.W.T + self.b
        self._x, self._pre = X, pre
        return np.maximum(pre, 0.0) if self.activation == "relu" else pre

    def backward(self, dY: np.ndarray) -> np.ndarray:
        d_pre = dY * (self._pre > 0) if self.activation == "relu" else dY
        self.grads = {"W": d_pre.T @ self._x, "b": d_pre.sum(axis=0)}
        return d_pre @ self.W

    def macs(self) -> int:
        return self.n_in * self.n_out


class QuantumLayer:
    """Prepare a state from each input row, run the ansatz, return per-qubit <Z>.

    ``encoding="angle"`` feeds ``input_scale * x_i`` to ``Ry`` on qubit ``i``
    (input width = n qubits); ``encoding="amplitude"`` loads the row as
    normalized amplitudes (width <= 2**n). Angle gradients come from the
    parameter-shift rule; input gradients are produced only for angle
    encoding with ``input_grad=True``.
    """

    kind = "quantum"

    def __init__(
        self,
        circuit: qsim.CircuitParams,
        encoding: str = "angle",
        input_scale: float = 1.0,
        input_grad: bool = False,
        observables: list[int] | None = None,
    ):
        if encoding not in ("angle", "amplitude"):
            raise ValueError(f"unknown encoding {encoding!r}")
        if input_grad and encoding != "angle":
            raise ValueError("input gradients are only available for angle encoding")
        self.circuit = circuit
        self.encoding = encoding
        self.input_scale = float(input_scale)
        self.input_grad = input_grad
        self.observables = None if observables is None else list(observables)
        self.grads: dict[str, np.ndarray] = {}
        self._states = None
        self._angles = None

    @property
    def n_qubits(self) -> int:
        return self.circuit.n_qubits

    @property
    def n_out(self) -> int:
        return self.n_qubits if self.observables is None else len(self.observables)

    @property
    def params(self) -> dict[str, np.ndarray]:
        return {"theta": self.circuit.angles}

    def prepare(self, X: np.ndarray) -> np.ndarray:
        n = self.n_qubits
        if self.encoding == "angle":
            if X.shape[-1] != n:
                raise ValueError(f"angle encoding expects {n} inputs, got {X.shape[-1]}")
            self._angles = self.input_scale * X
            return qsim.angle_embed(qsim.init_zero(n), self._angles)
        return qsim.amplitude_init(X, n)

    def forward(self, X: np.ndarray) -> np.ndarray:
        self._states = self.prepare(np.asarray(X, dtype=float))
        out = qsim.run_circuit(self._states, self.circuit)
        return qsim.measure_features(out, self.observables)

    def output_state(self, X: np.ndarray) -> np.ndarray:
        return qsim.run_circuit(self.prepare(np.asarray(X, dtype=float)), self.circuit)

    def backward(self, dY: np.ndarray) -> np.ndarray | None:
        self.grads = {
            "theta": qsim.param_shift_grad(self._states, self.circuit, dY, self.observables)
        }
        if not self.input_grad:
            return None
        g = qsim.param_shift_input_grad(self._angles, self.circuit, dY, self.observables)
        return self.input_scale * g

    def macs(self) -> int:
        return 0

    def two_qubit_gates(self) -> int:
        return self.circuit.n_layers * len(qsim.entangler_pairs(self.n_qubits, self.circuit.topology))
