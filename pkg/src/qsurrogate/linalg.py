"""Symmetric eigendecomposition by cyclic Jacobi rotations, and the SPD square root."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import EigenConvergenceError

JACOBI_TOL = 1e-12
JACOBI_MAX_SWEEPS = 100


@dataclass(frozen=True)
class SpectralDecomposition:
    """Eigenpairs of a symmetric matrix, eigenvalues in descending order.

    Column ``i`` of ``eigenvectors`` belongs to ``eigenvalues[i]``.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    sweeps: int = 0

    def reconstruct(self) -> np.ndarray:
        V = self.eigenvectors
        return (V * self.eigenvalues) @ V.T

    def __len__(self) -> int:
        return self.eigenvalues.shape[0]


def check_symmetric(M: np.ndarray, rtol: float = 1e-12) -> np.ndarray:
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ValueError("matrix has non-finite entries")
    scale = np.max(np.abs(M)) if M.size else 0.0
    if np.max(np.abs(M - M.T), initial=0.0) > rtol * scale:
        raise ValueError("matrix is not symmetric")
    return M


def _off_norm(A: np.ndarray) -> float:
    # Direct sum over off-diagonal entries; ||A||^2 - ||diag||^2 cancels catastrophically.
    return float(np.linalg.norm(A - np.diag(np.diag(A))))


def _canonical_signs(V: np.ndarray) -> np.ndarray:
    idx = np.argmax(np.abs(V), axis=0)
    signs = np.sign(V[idx, np.arange(V.shape[1])])
    signs[signs == 0] = 1.0
    return V * signs


def sym_eig(
    M: np.ndarray, tol: float = JACOBI_TOL, max_sweeps: int = JACOBI_MAX_SWEEPS
) -> SpectralDecomposition:
    """Diagonalize a real symmetric matrix with cyclic Jacobi rotations.

    Sweeps run over the strict upper triangle in row order until the
    off-diagonal Frobenius norm drops below ``tol * ||M||_F``. Entries already
    below ``tol * ||M||_F / n`` are not rotated, which keeps rank-one-plus-
    diagonal inputs (the embedding's Gram matrices) to a single cheap sweep.

    Eigenvectors are sign-normalized so that each column's largest-magnitude
    component is positive (first index wins ties).

    Raises:
        EigenConvergenceError: if ``max_sweeps`` sweeps do not converge.
    """
    A = check_symmetric(M).copy()
    n = A.shape[0]
    V = np.eye(n)
    scale = float(np.linalg.norm(A))
    threshold = tol * scale
    skip = threshold / max(n, 1)

    sweeps = 0
    off = _off_norm(A)
    while off > threshold:
        if sweeps == max_sweeps:
            raise EigenConvergenceError(off, sweeps)
        for p in range(n - 1):
            q = p
            while True:
                big = np.flatnonzero(np.abs(A[p, q + 1 :]) > skip)
                if big.size == 0:
                    break
                q = q + 1 + int(big[0])
                apq = A[p, q]
                theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c

                ap = A[:, p].copy()
                aq = A[:, q].copy()
                A[:, p] = c * ap - s * aq
                A[:, q] = s * ap + c * aq
                ap = A[p, :].copy()
                aq = A[q, :].copy()
                A[p, :] = c * ap - s * aq
                A[q, :] = s * ap + c * aq
                A[p, q] = A[q, p] = 0.0

                vp = V[:, p].copy()
                vq = V[:, q].copy()
                V[:, p] = c * vp - s * vq
                V[:, q] = s * vp + c * vq
        sweeps += 1
        off = _off_norm(A)

    w = np.diag(A).copy()
    order = np.argsort(-w, kind="stable")
    return SpectralDecomposition(w[order], _canonical_signs(V[:, order]), sweeps)


def matrix_sqrt(M: np.ndarray, decomp: SpectralDecomposition | None = None) -> np.ndarray:
    """Principal square root ``V diag(sqrt(lambda)) V^T`` of an SPD matrix.

    Eigenvalues that come out marginally negative from rounding are clamped
    to zero before the square root.
    """
    if decomp is None:
        decomp = sym_eig(M)
    V = decomp.eigenvectors
    root = np.sqrt(np.clip(decomp.eigenvalues, 0.0, None))
    S = (V * root) @ V.T
    return 0.5 * (S + S.T)
