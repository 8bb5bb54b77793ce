"""Polynomial -> SPD -> density matrix -> Hilbert-Schmidt state embedding of sensor vectors."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .linalg import SpectralDecomposition, matrix_sqrt, sym_eig

DEFAULT_EPSILON = 1e-6
TERM_MODES = ("all_up_to_degree", "exact_degree_only")


@dataclass(frozen=True)
class PolyConfig:
    """Monomial set used by :func:`poly_expand`.

    ``terms="all_up_to_degree"`` keeps every monomial of total degree
    1..degree; ``"exact_degree_only"`` keeps only those of total degree
    ``degree`` (7 inputs at degree 2 give 28 features instead of 35).
    """

    degree: int = 2
    include_bias: bool = False
    terms: str = "all_up_to_degree"

    def __post_init__(self):
        if self.degree not in (1, 2, 3):
            raise ValueError(f"polynomial degree must be 1, 2 or 3, got {self.degree}")
        if self.terms not in TERM_MODES:
            raise ValueError(f"terms must be one of {TERM_MODES}, got {self.terms!r}")

    @property
    def degrees(self) -> range:
        if self.terms == "exact_degree_only":
            return range(self.degree, self.degree + 1)
        return range(1, self.degree + 1)

    def expanded_dim(self, m: int) -> int:
        return sum(math.comb(m + k - 1, k) for k in self.degrees) + int(self.include_bias)


@lru_cache(maxsize=64)
def _monomial_indices(m: int, degrees: tuple[int, ...]) -> tuple[np.ndarray, ...]:
    return tuple(
        np.array(list(itertools.combinations_with_replacement(range(m), k)), dtype=np.intp)
        for k in degrees
    )


def monomial_labels(m: int, cfg: PolyConfig) -> list[str]:
    labels = ["1"] if cfg.include_bias else []
    for k in cfg.degrees:
        for combo in itertools.combinations_with_replacement(range(m), k):
            labels.append("*".join(f"x{i + 1}" for i in combo))
    return labels


def poly_expand(x: np.ndarray, cfg: PolyConfig = PolyConfig()) -> np.ndarray:
    """Evaluate all monomials of ``x`` in graded-lexicographic order.

    Accepts a single vector ``(m,)`` or a batch ``(B, m)``. For ``x=[x1, x2]``
    at degree 2 without bias the result is ``[x1, x2, x1^2, x1*x2, x2^2]``.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim not in (1, 2) or x.shape[-1] == 0:
        raise ValueError(f"expected a non-empty vector or batch of vectors, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError("input has non-finite entries")
    m = x.shape[-1]
    parts = []
    if cfg.include_bias:
        parts.append(np.ones(x.shape[:-1] + (1,)))
    for idx in _monomial_indices(m, tuple(cfg.degrees)):
        parts.append(np.prod(x[..., idx], axis=-1))
    return np.concatenate(parts, axis=-1)


def gram(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    if z.ndim != 1:
        raise ValueError("gram expects a single feature vector")
    if not np.all(np.isfinite(z)):
        raise ValueError("feature vector has non-finite entries")
    return np.outer(z, z)


def regularize(K: np.ndarray, epsilon: float = DEFAULT_EPSILON) -> np.ndarray:
    if not epsilon > 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    K = np.array(K, dtype=float)
    K[np.diag_indices_from(K)] += epsilon
    return K


def to_density(S: np.ndarray) -> np.ndarray:
    S = np.asarray(S, dtype=float)
    tr = np.trace(S)
    if not tr > 0:
        raise ValueError(f"matrix trace must be positive, got {tr}")
    return S / tr


@dataclass(frozen=True)
class EmbeddedState:
    amplitudes: np.ndarray
    purity: float


def hs_vectorize(rho: np.ndarray) -> EmbeddedState:
    """Column-major vectorization of ``rho`` scaled to unit norm by sqrt(Tr(rho^2))."""
    rho = np.asarray(rho, dtype=float)
    purity = float(np.trace(rho @ rho))
    v = rho.flatten(order="F") / math.sqrt(purity)
    return EmbeddedState(v, purity)


def spectral_project(z: np.ndarray, decomp: SpectralDecomposition, k: int) -> np.ndarray:
    """Coordinates of ``z`` (or a batch of them) on the ``k`` leading eigenvectors."""
    d = len(decomp)
    if not 1 <= k <= d:
        raise ValueError(f"k must lie in [1, {d}], got {k}")
    return np.asarray(z, dtype=float) @ decomp.eigenvectors[:, :k]


def density_matrix(
    z: np.ndarray, epsilon: float = DEFAULT_EPSILON
) -> np.ndarray:
    """Density matrix sqrt(z z^T + eps I) / Tr(...) of an already-expanded feature vector."""
    return to_density(matrix_sqrt(regularize(gram(z), epsilon)))


def embed(
    x: np.ndarray, cfg: PolyConfig = PolyConfig(), epsilon: float = DEFAULT_EPSILON
) -> EmbeddedState:
    """Full sensor-vector embedding: expand, Gram, regularize, sqrt, normalize, vectorize."""
    return hs_vectorize(density_matrix(poly_expand(x, cfg), epsilon))


class Standardizer:
    """Per-channel zero-mean / unit-variance scaling with statistics from a fit set.

    Channels whose spread is below ``min_std`` (e.g. displacements of fixed
    support nodes) are centered but not scaled.
    """

    def __init__(self, mean: np.ndarray, std: np.ndarray):
        self.mean = np.asarray(mean, dtype=float)
        self.std = np.asarray(std, dtype=float)

    @classmethod
    def fit(cls, X: np.ndarray, min_std: float = 1e-12) -> "Standardizer":
        X = np.asarray(X, dtype=float)
        mean = X.mean(axis=0)
        std = X.std(axis=0)
        std = np.where(std > min_std * max(1.0, float(np.max(std, initial=0.0))), std, 1.0)
        return cls(mean, std)

    def transform(self, X: np.ndarray) -> np.ndarray:
        return (np.asarray(X, dtype=float) - self.mean) / self.std

    def inverse(self, Z: np.ndarray) -> np.ndarray:
        return np.asarray(Z, dtype=float) * self.std + self.mean


class SpectralReducer:
    """Optional compression of expanded features onto the top eigenvectors of their second-moment matrix.

    Fitted on training features ``Z`` (rows), the SPD matrix is
    ``Z^T Z / N + eps I``; transform keeps the ``k`` leading coordinates.
    """

    def __init__(self, decomp: SpectralDecomposition, k: int):
        if not 1 <= k <= len(decomp):
            raise ValueError(f"k must lie in [1, {len(decomp)}], got {k}")
        self.decomp = decomp
        self.k = k

    @classmethod
    def fit(cls, Z: np.ndarray, k: int, epsilon: float = DEFAULT_EPSILON) -> "SpectralReducer":
        Z = np.asarray(Z, dtype=float)
        P = regularize(Z.T @ Z / Z.shape[0], epsilon)
        return cls(sym_eig(0.5 * (P + P.T)), k)

    def transform(self, Z: np.ndarray) -> np.ndarray:
        return spectral_project(Z, self.decomp, self.k)
