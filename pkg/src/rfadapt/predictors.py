"""Adaptive predictors: constant-metric observer construction, the
symplectic Hamiltonian estimator, and the sampled-measurement hybrid."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np

from .errors import ConfigError
from .kernels import FeatureBank
from .systems import HamiltonianSpec


@dataclass(frozen=True, eq=False)
class Predictor:
    """Observer x_hat' = Y alpha_p + Psi alpha_m - zeta (x_hat - x).

    The metric is the constant multiple metric_scale * I, for which the
    Riemannian energy is metric_scale |x_hat - x|^2 and geodesics are
    straight lines.
    """

    feature_fn: Callable[[np.ndarray], np.ndarray]
    zeta: float
    dim: int
    Y_fn: Optional[Callable[[np.ndarray, float], np.ndarray]] = None
    metric_scale: float = 1.0

    def energy(self, x_hat: np.ndarray, x: np.ndarray) -> float:
        e = x_hat - x
        return self.metric_scale * float(e @ e)

    def energy_grad(self, x_hat: np.ndarray, x: np.ndarray) -> np.ndarray:
        return 2.0 * self.metric_scale * (x_hat - x)

    def model(self, x_hat: np.ndarray, t: float, alpha_p: np.ndarray,
              alpha_m: np.ndarray) -> np.ndarray:
        out = self.feature_fn(x_hat) @ alpha_m
        if self.Y_fn is not None:
            out = out + self.Y_fn(x_hat, t) @ alpha_p
        return out

    def drift(self, x_hat: np.ndarray, x: np.ndarray, t: float,
              alpha_p: np.ndarray, alpha_m: np.ndarray) -> np.ndarray:
        return (self.model(x_hat, t, alpha_p, alpha_m)
                - self.zeta * (x_hat - x))

    def update_duals(self, x_hat: np.ndarray, x: np.ndarray, t: float,
                     slope: float) -> Tuple[np.ndarray, np.ndarray]:
        """Dual rates (-slope Y^T gradQ, -slope Psi^T gradQ)."""
        gradQ = self.energy_grad(x_hat, x)
        rate_m = -slope * (self.feature_fn(x_hat).T @ gradQ)
        if self.Y_fn is None:
            rate_p = np.zeros(0)
        else:
            rate_p = -slope * (self.Y_fn(x_hat, t).T @ gradQ)
        return rate_p, rate_m


def build_predictor(feature_fn: Callable[[np.ndarray], np.ndarray],
                    zeta: float, dim: int,
                    Y_fn: Optional[Callable] = None,
                    metric_scale: float = 1.0) -> Predictor:
    if not zeta > 0:
        raise ConfigError(f"feedback gain must be positive, got {zeta}")
    if not metric_scale > 0:
        raise ConfigError(f"metric scale must be positive, "
                          f"got {metric_scale}")
    return Predictor(feature_fn=feature_fn, zeta=zeta, dim=dim, Y_fn=Y_fn,
                     metric_scale=metric_scale)


# ---------------------------------------------------------------------------
# symplectic Hamiltonian estimator


def hamiltonian_features(bank: FeatureBank, x_hat: np.ndarray) -> np.ndarray:
    """Scalar features Psi_i(x_hat) = cos(w_i^T x_hat + b_i)."""
    return np.cos(bank.W @ x_hat + bank.b)


def hamiltonian_feature_grads(bank: FeatureBank,
                              x_hat: np.ndarray) -> np.ndarray:
    """(K, 2md) rows grad Psi_i = -w_i sin(w_i^T x_hat + b_i)."""
    return -np.sin(bank.W @ x_hat + bank.b)[:, None] * bank.W


def hamiltonian_estimate(bank: FeatureBank, weights: np.ndarray,
                         x_hat: np.ndarray) -> float:
    return float(weights @ hamiltonian_features(bank, x_hat))


def symplectic_predictor_rhs(spec: HamiltonianSpec, bank: FeatureBank,
                             weights: np.ndarray, x_hat: np.ndarray,
                             x: np.ndarray, gamma: float
                             ) -> Tuple[np.ndarray, np.ndarray]:
    """Predictor drift J grad H_hat + k (x - x_hat) and the weight rate
    -gamma ([grad_p Psi]^T q_err - [grad_q Psi]^T p_err)."""
    half = spec.m * spec.d
    s = np.sin(bank.W @ x_hat + bank.b)
    gradH = -bank.W.T @ (weights * s)
    drift = np.concatenate([gradH[half:], -gradH[:half]])
    drift += spec.k_gain * (x - x_hat)

    q_err = x_hat[:half] - x[:half]
    p_err = x_hat[half:] - x[half:]
    Wq, Wp = bank.W[:, :half], bank.W[:, half:]
    weight_rate = gamma * s * (Wp @ q_err - Wq @ p_err)
    return drift, weight_rate


def learned_hamiltonian_rhs(spec: HamiltonianSpec, bank: FeatureBank,
                            weights: np.ndarray,
                            x_hat: np.ndarray) -> np.ndarray:
    """Model vector field J grad H_hat alone (no feedback)."""
    half = spec.m * spec.d
    s = np.sin(bank.W @ x_hat + bank.b)
    gradH = -bank.W.T @ (weights * s)
    return np.concatenate([gradH[half:], -gradH[:half]])


# ---------------------------------------------------------------------------
# discrete measurements


@dataclass(frozen=True)
class DiscretePredictorSpec:
    """Per-measurement contraction beta in (0, 1), constant metric c I."""

    beta: float
    metric_scale: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.beta < 1.0:
            raise ValueError(f"beta must lie in (0, 1), got {self.beta}")

    def energy(self, x_hat: np.ndarray, x: np.ndarray) -> float:
        e = x_hat - x
        return self.metric_scale * float(e @ e)


def discrete_sampling_step(spec: DiscretePredictorSpec, x_hat_i: np.ndarray,
                           x_i: np.ndarray, x_next: np.ndarray,
                           flow: Callable[[np.ndarray, float], np.ndarray],
                           dt_i: float
                           ) -> Tuple[np.ndarray, Tuple[float, float]]:
    """Flow open loop over dt_i, then blend toward the new measurement.

    The update k(y, x) = x + sqrt(beta) (y - x) has constant Jacobian
    sqrt(beta) I, so F^T F = beta I holds with equality and k(x, x) = x.
    Returns the updated estimate with energies before and after.
    """
    E_i = spec.energy(x_hat_i, x_i)
    x_half = flow(x_hat_i, dt_i)
    x_hat_next = x_next + np.sqrt(spec.beta) * (x_half - x_next)
    return x_hat_next, (E_i, spec.energy(x_hat_next, x_next))
