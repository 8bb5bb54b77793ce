"""Dense statevector simulator for layered rotation + CNOT circuits.

States are complex arrays of shape ``(..., 2**n)``; any leading axes are
batch axes and every routine broadcasts over them. Qubit 0 is the most
significant bit of the basis index, so ``|q0 q1 ... q_{n-1}>`` sits at index
``q0 * 2**(n-1) + ... + q_{n-1}``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

MAX_QUBITS = 14
AXES = ("X", "Y", "Z")
TOPOLOGIES = ("ring", "chain")
SHIFT = np.pi / 2


def n_qubits_of(state: np.ndarray) -> int:
    dim = state.shape[-1]
    n = dim.bit_length() - 1
    if dim != 1 << n or n < 1:
        raise ValueError(f"state dimension {dim} is not a power of two")
    return n


def _check_n(n: int) -> None:
    if not 1 <= n <= MAX_QUBITS:
        raise ValueError(f"qubit count must lie in [1, {MAX_QUBITS}], got {n}")


def init_zero(n: int) -> np.ndarray:
    _check_n(n)
    state = np.zeros(1 << n, dtype=complex)
    state[0] = 1.0
    return state


def amplitude_init(v: np.ndarray, n: int) -> np.ndarray:
    """Zero-pad real vector(s) ``v`` to ``2**n`` entries and normalize to unit norm."""
    _check_n(n)
    v = np.asarray(v, dtype=float)
    if v.shape[-1] > 1 << n:
        raise ValueError(f"{v.shape[-1]} amplitudes do not fit in {n} qubits")
    norm = np.linalg.norm(v, axis=-1, keepdims=True)
    if np.any(norm == 0):
        raise ValueError("cannot amplitude-encode a zero vector")
    state = np.zeros(v.shape[:-1] + (1 << n,), dtype=complex)
    state[..., : v.shape[-1]] = v / norm
    return state


def apply_rotation(state: np.ndarray, qubit: int, axis: str, theta) -> np.ndarray:
    """Apply ``exp(-i theta sigma_axis / 2)`` to ``qubit``.

    ``theta`` is a scalar or an array broadcastable against the state's batch axes.
    """
    n = n_qubits_of(state)
    if not 0 <= qubit < n:
        raise ValueError(f"qubit {qubit} out of range for {n} qubits")
    theta = np.asarray(theta, dtype=float)
    batch = state.shape[:-1]
    s = state.reshape(batch + (1 << qubit, 2, 1 << (n - qubit - 1)))
    a0 = s[..., :, 0, :]
    a1 = s[..., :, 1, :]
    half = theta[..., None, None] / 2
    c, sn = np.cos(half), np.sin(half)
    if axis == "Y":
        b0 = c * a0 - sn * a1
        b1 = sn * a0 + c * a1
    elif axis == "X":
        b0 = c * a0 - 1j * sn * a1
        b1 = -1j * sn * a0 + c * a1
    elif axis == "Z":
        phase = np.exp(-1j * half)
        b0 = phase * a0
        b1 = np.conj(phase) * a1
    else:
        raise ValueError(f"unknown rotation axis {axis!r}")
    out = np.stack(np.broadcast_arrays(b0, b1), axis=-2)
    return out.reshape(out.shape[:-3] + (1 << n,))


@lru_cache(maxsize=256)
def _cnot_permutation(n: int, pairs: tuple[tuple[int, int], ...]) -> np.ndarray:
    # Index map such that new_state = state[perm] applies the CNOTs in order.
    perm = np.arange(1 << n)
    for control, target in pairs:
        cbit = 1 << (n - 1 - control)
        tbit = 1 << (n - 1 - target)
        idx = np.arange(1 << n)
        single = np.where(idx & cbit, idx ^ tbit, idx)
        perm = perm[single]
    perm.setflags(write=False)
    return perm


def apply_cnot(state: np.ndarray, control: int, target: int) -> np.ndarray:
    n = n_qubits_of(state)
    if control == target or not (0 <= control < n and 0 <= target < n):
        raise ValueError(f"invalid CNOT qubits control={control} target={target} for n={n}")
    return state[..., _cnot_permutation(n, ((control, target),))]


def angle_embed(state: np.ndarray, angles: np.ndarray) -> np.ndarray:
    """Apply ``Ry(angles[..., i])`` to qubit ``i`` for every qubit."""
    n = n_qubits_of(state)
    angles = np.asarray(angles, dtype=float)
    if angles.shape[-1] != n:
        raise ValueError(f"expected {n} embedding angles, got {angles.shape[-1]}")
    for i in range(n):
        state = apply_rotation(state, i, "Y", angles[..., i])
    return state


def entangler_pairs(n: int, topology: str = "ring") -> tuple[tuple[int, int], ...]:
    if topology not in TOPOLOGIES:
        raise ValueError(f"unknown topology {topology!r}")
    if n == 1:
        return ()
    chain = tuple((i, i + 1) for i in range(n - 1))
    return chain + ((n - 1, 0),) if topology == "ring" else chain


@dataclass
class CircuitParams:
    """Trainable angles of an ``L``-layer ansatz, shape ``(..., L, n, R)``.

    ``axes[r]`` names the rotation applied with ``angles[..., l, i, r]``.
    Extra leading axes are batch axes (used for shifted evaluations).
    """

    angles: np.ndarray
    axes: tuple[str, ...] = ("Y",)
    topology: str = "ring"

    def __post_init__(self):
        self.angles = np.asarray(self.angles, dtype=float)
        self.axes = tuple(self.axes)
        if self.angles.ndim < 3:
            raise ValueError("angles must have shape (..., L, n, R)")
        if self.angles.shape[-3] < 1:
            raise ValueError("need at least one layer")
        if self.angles.shape[-1] != len(self.axes):
            raise ValueError(
                f"angles carry {self.angles.shape[-1]} rotations per qubit but axes={self.axes}"
            )
        if any(a not in AXES for a in self.axes):
            raise ValueError(f"rotation axes must be drawn from {AXES}")
        if self.topology not in TOPOLOGIES:
            raise ValueError(f"unknown topology {self.topology!r}")
        if not np.all(np.isfinite(self.angles)):
            raise ValueError("circuit angles must be finite")

    @property
    def n_layers(self) -> int:
        return self.angles.shape[-3]

    @property
    def n_qubits(self) -> int:
        return self.angles.shape[-2]

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.angles.shape[-3:]

    def with_angles(self, angles: np.ndarray) -> "CircuitParams":
        return CircuitParams(angles, self.axes, self.topology)

    @classmethod
    def random(
        cls, rng: np.random.Generator, n_qubits: int, n_layers: int,
        axes: Sequence[str] = ("Y",), topology: str = "ring",
    ) -> "CircuitParams":
        angles = rng.uniform(-np.pi, np.pi, size=(n_layers, n_qubits, len(axes)))
        return cls(angles, tuple(axes), topology)


def entangling_layer(
    state: np.ndarray, layer_angles: np.ndarray, axes: Sequence[str] = ("Y",), topology: str = "ring"
) -> np.ndarray:
    """One ansatz layer: per-qubit rotations, then the CNOT entangler."""
    n = n_qubits_of(state)
    layer_angles = np.asarray(layer_angles, dtype=float)
    if layer_angles.shape[-2:] != (n, len(axes)):
        raise ValueError(
            f"layer angles shape {layer_angles.shape[-2:]} does not match ({n}, {len(axes)})"
        )
    for i in range(n):
        for r, axis in enumerate(axes):
            state = apply_rotation(state, i, axis, layer_angles[..., i, r])
    pairs = entangler_pairs(n, topology)
    if pairs:
        state = state[..., _cnot_permutation(n, pairs)]
    return state


def run_circuit(state: np.ndarray, params: CircuitParams) -> np.ndarray:
    n = n_qubits_of(state)
    if params.n_qubits != n:
        raise ValueError(f"circuit has {params.n_qubits} qubits, state has {n}")
    for layer in range(params.n_layers):
        state = entangling_layer(state, params.angles[..., layer, :, :], params.axes, params.topology)
    return state


@lru_cache(maxsize=64)
def _z_signs(n: int, targets: tuple[int, ...]) -> np.ndarray:
    idx = np.arange(1 << n)[:, None]
    bits = (idx >> (n - 1 - np.array(targets))[None, :]) & 1
    signs = 1.0 - 2.0 * bits
    signs.setflags(write=False)
    return signs


def _targets(n: int, obs: Sequence[int] | None) -> tuple[int, ...]:
    if obs is None:
        return tuple(range(n))
    targets = tuple(int(q) for q in obs)
    if len(set(targets)) != len(targets) or any(not 0 <= q < n for q in targets):
        raise ValueError(f"observable targets {targets} must be distinct qubits in [0, {n})")
    return targets


def measure_features(
    state: np.ndarray,
    obs: Sequence[int] | None = None,
    shots: int | None = None,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Pauli-Z expectation value of each target qubit, shape ``(..., len(obs))``.

    Exact by default. With ``shots`` the estimate averages that many sampled
    computational-basis outcomes per state (requires ``rng``).
    """
    n = n_qubits_of(state)
    signs = _z_signs(n, _targets(n, obs))
    probs = np.abs(state) ** 2
    if shots is None:
        return probs @ signs
    if rng is None:
        raise ValueError("shot sampling needs a random generator")
    flat = probs.reshape(-1, probs.shape[-1])
    out = np.empty((flat.shape[0], signs.shape[1]))
    for b, p in enumerate(flat):
        counts = rng.multinomial(shots, p / p.sum())
        out[b] = counts @ signs / shots
    return out.reshape(probs.shape[:-1] + (signs.shape[1],))


def _shifted_angles(angles: np.ndarray) -> np.ndarray:
    # (2P, L, n, R): rows 2k / 2k+1 hold parameter k shifted by +/- pi/2.
    P = angles.size
    shifted = np.broadcast_to(angles, (2 * P,) + angles.shape).copy()
    flat = shifted.reshape(2 * P, P)
    k = np.arange(P)
    flat[2 * k, k] += SHIFT
    flat[2 * k + 1, k] -= SHIFT
    return shifted


def param_shift_grad(
    state: np.ndarray,
    params: CircuitParams,
    downstream_grad: np.ndarray,
    obs: Sequence[int] | None = None,
    chunk_amplitudes: int = 1 << 22,
) -> np.ndarray:
    """Gradient of ``sum(downstream_grad * <Z>)`` with respect to every circuit angle.

    ``state`` holds the prepared input state(s) ``(B, 2**n)`` (or a single
    state) and ``downstream_grad`` the matching ``(B, len(obs))`` cotangents.
    Each angle's derivative is ``(f(theta + pi/2) - f(theta - pi/2)) / 2``,
    exact for Pauli-generated rotations. All shifted circuits for a chunk of
    parameters are evaluated together on the whole batch. Returns an array
    shaped like ``params.angles``.
    """
    if params.angles.ndim != 3:
        raise ValueError("param_shift_grad expects unbatched circuit angles")
    state = np.atleast_2d(state)
    g = np.asarray(downstream_grad, dtype=float).reshape(state.shape[0], -1)
    P = params.angles.size
    per_shift = state.size
    step = max(1, chunk_amplitudes // max(per_shift, 1) // 2)
    shifted = _shifted_angles(params.angles)
    grad = np.empty(P)
    for start in range(0, P, step):
        stop = min(P, start + step)
        block = shifted[2 * start : 2 * stop][:, None]
        out = run_circuit(state[None], params.with_angles(block))
        f = measure_features(out, obs)
        value = np.einsum("sbo,bo->s", f, g)
        grad[start:stop] = 0.5 * (value[0::2] - value[1::2])
    return grad.reshape(params.angles.shape)


def param_shift_input_grad(
    angles_in: np.ndarray,
    params: CircuitParams,
    downstream_grad: np.ndarray,
    obs: Sequence[int] | None = None,
) -> np.ndarray:
    """Per-sample gradient with respect to the ``Ry`` angle-embedding inputs, shape ``(B, n)``."""
    angles_in = np.atleast_2d(np.asarray(angles_in, dtype=float))
    B, n = angles_in.shape
    g = np.asarray(downstream_grad, dtype=float).reshape(B, -1)
    shifted = np.broadcast_to(angles_in, (2 * n, B, n)).copy()
    for i in range(n):
        shifted[2 * i, :, i] += SHIFT
        shifted[2 * i + 1, :, i] -= SHIFT
    out = run_circuit(angle_embed(init_zero(n), shifted), params)
    f = measure_features(out, obs)
    value = np.einsum("sbo,bo->sb", f, g)
    return 0.5 * (value[0::2] - value[1::2]).T


def dump_state(state: np.ndarray) -> str:
    """Text listing ``index real imag`` for each amplitude of a single state."""
    state = np.asarray(state)
    if state.ndim != 1:
        raise ValueError("dump_state expects a single statevector")
    return "\n".join(f"{i} {a.real:.17g} {a.imag:.17g}" for i, a in enumerate(state))
