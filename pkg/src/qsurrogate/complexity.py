"""Multiply-accumulate operation counts for the classical MLP and the embedded-quantum pipeline."""

from __future__ import annotations

from dataclasses import asdict, dataclass


@dataclass(frozen=True)
class ComplexityDims:
    d_in: int = 7
    h1: int = 64
    h2: int = 32
    d_out: int = 1017
    d_prime: int = 28  # expanded feature dimension
    n_layers: int = 10
    n_qubits: int = 10
    h3: int = 64  # first dense width after the quantum block

    def __post_init__(self):
        bad = [k for k, v in asdict(self).items() if v <= 0]
        if bad:
            raise ValueError(f"dimensions must be positive: {', '.join(bad)}")


@dataclass(frozen=True)
class ComplexityReport:
    dims: ComplexityDims
    classical_terms: tuple[int, int, int]
    qmlp_terms: tuple[int, int, int, int]

    @property
    def c_classical(self) -> int:
        return sum(self.classical_terms)

    @property
    def c_qmlp(self) -> int:
        return sum(self.qmlp_terms)

    @property
    def ratio(self) -> float:
        return self.c_qmlp / self.c_classical

    def text(self) -> str:
        d = self.dims
        a, b, c = self.classical_terms
        p, q, r, s = self.qmlp_terms
        return "\n".join([
            f"C_classical = {d.d_in}*{d.h1} + {d.h1}*{d.h2} + {d.h2}*{d.d_out}"
            f" = {a} + {b} + {c} = {self.c_classical} (~{self.c_classical:.1e})",
            f"C_QMLP      = {d.d_prime}^3 + {d.n_layers}*{d.n_qubits} + {d.n_qubits}*{d.h3} + {d.h3}*{d.d_out}"
            f" = {p} + {q} + {r} + {s} = {self.c_qmlp} (~{self.c_qmlp:.1e})",
            f"R = C_QMLP / C_classical = {self.ratio:.3f} (~{self.ratio:.1f})",
        ])


def complexity(dims: ComplexityDims = ComplexityDims()) -> ComplexityReport:
    d = dims
    return ComplexityReport(
        d,
        (d.d_in * d.h1, d.h1 * d.h2, d.h2 * d.d_out),
        (d.d_prime**3, d.n_layers * d.n_qubits, d.n_qubits * d.h3, d.h3 * d.d_out),
    )


def model_counts(arch) -> dict[str, int]:
    """Dense MACs, rotation-gate count and two-qubit-gate count of a built architecture."""
    from .qsim import entangler_pairs

    rotations = two_qubit = 0
    for b in arch.blocks:
        if b["type"] == "quantum":
            rotations += b["n_layers"] * b["n_qubits"] * len(b["axes"])
            two_qubit += b["n_layers"] * len(entangler_pairs(b["n_qubits"], b["topology"]))
    return {"dense_macs": arch.dense_macs(), "rotation_gates": rotations, "two_qubit_gates": two_qubit,
            "parameters": arch.parameter_count()}
