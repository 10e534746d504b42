"""Lyapunov equation solver and the quadratic certificate it produces."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SolverError

_RESIDUAL_TOL = 1e-10


def solve_lyapunov(A: np.ndarray) -> np.ndarray:
    """Solve A^T P + P A = -I for symmetric P > 0.

    Assembled as a dense linear system in the n(n+1)/2 free entries of P.
    """
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    if A.shape != (n, n):
        raise ValueError(f"A must be square, got {A.shape}")
    eigs = np.linalg.eigvals(A)
    if eigs.real.max() >= -1e-12:
        raise SolverError(
            f"A must be Hurwitz; max real eigenvalue {eigs.real.max():.3e}")

    pairs = [(i, j) for i in range(n) for j in range(i, n)]
    index = {pair: k for k, pair in enumerate(pairs)}
    m = len(pairs)
    M = np.zeros((m, m))
    for col, (i, j) in enumerate(pairs):
        S = np.zeros((n, n))
        S[i, j] = 1.0
        S[j, i] = 1.0
        L = A.T @ S + S @ A
        for row, (k, l) in enumerate(pairs):
            M[row, col] = L[k, l]
    rhs = np.array([-1.0 if k == l else 0.0 for (k, l) in pairs])
    try:
        p = np.linalg.solve(M, rhs)
    except np.linalg.LinAlgError as exc:
        raise SolverError(f"Lyapunov system is singular: {exc}") from exc

    P = np.zeros((n, n))
    for (i, j), k in index.items():
        P[i, j] = p[k]
        P[j, i] = p[k]
    residual = np.linalg.norm(A.T @ P + P @ A + np.eye(n))
    if residual > _RESIDUAL_TOL:
        raise SolverError(f"Lyapunov residual {residual:.3e} exceeds "
                          f"{_RESIDUAL_TOL:.0e}")
    if np.linalg.eigvalsh(P).min() <= 0:
        raise SolverError("Lyapunov solution is not positive definite")
    return P


@dataclass(frozen=True, eq=False)
class LyapunovCertificate:
    """Q(e) = e^T P e / 2 with class-K-infinity envelopes.

    mu1(r) = lam_min(P) r^2 / 2, mu2(r) = lam_max(P) r^2 / 2, and the
    nominal decrease rate rho(r) = r^2 / 2 from A^T P + P A = -I.
    """

    P: np.ndarray
    lam_min: float
    lam_max: float

    @classmethod
    def from_system_matrix(cls, A: np.ndarray) -> "LyapunovCertificate":
        P = solve_lyapunov(A)
        evals = np.linalg.eigvalsh(P)
        return cls(P=P, lam_min=float(evals[0]), lam_max=float(evals[-1]))

    def value(self, e: np.ndarray) -> float:
        return 0.5 * float(e @ self.P @ e)

    def grad(self, e: np.ndarray) -> np.ndarray:
        return self.P @ e

    def mu1(self, r: float) -> float:
        return 0.5 * self.lam_min * r * r

    def mu2(self, r: float) -> float:
        return 0.5 * self.lam_max * r * r

    @staticmethod
    def rho(r: float) -> float:
        return 0.5 * r * r

    def mu1_inv(self, q: float) -> float:
        """Radius below which Q <= q is guaranteed: sqrt(2 q / lam_min)."""
        return np.sqrt(2.0 * q / self.lam_min)
