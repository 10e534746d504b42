"""Feature-count and uniform-approximation bound calculators."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .kernels import FeatureBank, feature_matrix


@dataclass(frozen=True)
class BoundInputs:
    """Constants entering the random-feature approximation bounds.

    b_phi maps a failure probability to a high-probability bound on the
    feature-matrix norm; w_second_moment is E|w|^2 under the spectral
    measure and feature_second_moment is E|M(w)|^2.
    """

    B_h: float
    B_X: float
    n: int
    d1: int
    delta: float
    b_phi: Callable[[float], float]
    w_second_moment: float
    feature_second_moment: float
    beta: float = 1.0
    L: float = 1.0
    mu: float = 1.0
    B_ge: float = 1.0
    B_gradQ: float = 1.0
    C_h: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.delta < 1.0:
            raise ValueError(f"delta must lie in (0, 1), got {self.delta}")
        for name in ("B_h", "B_X", "w_second_moment", "feature_second_moment",
                     "beta", "L", "mu", "B_ge", "B_gradQ", "C_h"):
            value = getattr(self, name)
            if name == "B_X" and value == 0.0:
                continue  # scalar-feature edge case B_X sqrt(n) = 0
            if not value > 0:
                raise ValueError(f"{name} must be positive, got {value}")


def constant_b_phi(value: float) -> Callable[[float], float]:
    """Decomposable case: the feature norm is |B| regardless of delta."""
    return lambda _delta: value


def gaussian_b_phi(n: int, sigma_w: float) -> Callable[[float], float]:
    """sqrt(n) + 2 sigma_w sqrt(log(1/delta)) for Gaussian spectral draws."""
    def b_phi(delta: float) -> float:
        if not 0.0 < delta < 1.0:
            raise ValueError(f"delta must lie in (0, 1), got {delta}")
        return math.sqrt(n) + 2.0 * sigma_w * math.sqrt(math.log(1.0 / delta))
    return b_phi


def required_features(inputs: BoundInputs, eps: float) -> int:
    """Smallest feature count guaranteeing a tracking tolerance eps.

    Evaluates 4/(beta^2 eps^2) (L/mu)^2 B_ge^2 B_gradQ^2 C^2
    (B_X sqrt(n) + sqrt(d1))^2 and rounds up.
    """
    if not eps > 0:
        raise ValueError(f"tolerance must be positive, got {eps}")
    geom = inputs.B_X * math.sqrt(inputs.n) + math.sqrt(inputs.d1)
    raw = (4.0 / (inputs.beta ** 2 * eps ** 2)
           * (inputs.L / inputs.mu) ** 2
           * inputs.B_ge ** 2 * inputs.B_gradQ ** 2
           * inputs.C_h ** 2 * geom ** 2)
    return int(math.ceil(raw))


def approximation_bound(inputs: BoundInputs, K: int) -> float:
    """High-probability sup-norm error of the best K-feature approximation.

    (B_h / sqrt(K)) [ 2 B_phi(delta/2K) (2 B_X sqrt(E|w|^2) + 2 sqrt(d1)
    + sqrt(log(2/delta))) + sqrt((delta/2) E|M(w)|^2) ].
    """
    if K < 1:
        raise ValueError(f"feature count must be >= 1, got {K}")
    delta = inputs.delta
    rad = 2.0 * inputs.b_phi(delta / (2.0 * K)) * (
        2.0 * inputs.B_X * math.sqrt(inputs.w_second_moment)
        + 2.0 * math.sqrt(inputs.d1)
        + math.sqrt(math.log(2.0 / delta)))
    tail = math.sqrt(0.5 * delta * inputs.feature_second_moment)
    return inputs.B_h / math.sqrt(K) * (rad + tail)


def empirical_sup_error(bank: FeatureBank, weights: np.ndarray,
                        target: Callable[[np.ndarray], np.ndarray],
                        grid: Sequence[np.ndarray]) -> float:
    """max over the grid of |Psi(x) weights - target(x)|_2."""
    grid = list(grid)
    if not grid:
        raise ValueError("grid must be nonempty")
    weights = np.asarray(weights, dtype=float)
    worst = 0.0
    for x in grid:
        resid = feature_matrix(bank, x) @ weights - np.asarray(target(x),
                                                               dtype=float)
        worst = max(worst, float(np.linalg.norm(resid)))
    return worst


def fit_feature_weights(bank: FeatureBank,
                        target: Callable[[np.ndarray], np.ndarray],
                        grid: Sequence[np.ndarray],
                        rcond: float = None) -> np.ndarray:
    """Least-squares weights matching the target on the grid."""
    grid = list(grid)
    if not grid:
        raise ValueError("grid must be nonempty")
    rows = np.vstack([feature_matrix(bank, x) for x in grid])
    rhs = np.concatenate([np.asarray(target(x), dtype=float) for x in grid])
    weights, *_ = np.linalg.lstsq(rows, rhs, rcond=rcond)
    return weights
