"""Benchmark dynamical systems: the stable LTI and quartic-unstable
tracking problems, and the point-mass Hamiltonian."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Tuple

import numpy as np
from scipy.special import erf

from .errors import SingularityError

ROOT2_PI = np.sqrt(2.0) * np.pi

DISTANCE_FLOOR = 1e-3


def default_system_matrix(n: int = 5, seed: int = 0,
                          shift: float = 2.0) -> np.ndarray:
    """A = R - shift * I with R a seeded random matrix scaled to unit norm.

    Hurwitz is guaranteed for shift > 1 and validated downstream for
    smaller shifts (the weakly damped variant used by the quartic
    benchmark relies on the seed keeping the spectrum in the left
    half-plane).
    """
    rng = np.random.default_rng(seed)
    R = rng.standard_normal((n, n))
    R /= np.linalg.norm(R, ord=2)
    return R - shift * np.eye(n)


@dataclass(frozen=True, eq=False)
class ControlBenchmark:
    """Matched-uncertainty tracking benchmark with g = I and e = x - x_d."""

    variant: str  # "lti-stable" | "quartic-unstable"
    A: np.ndarray

    def __post_init__(self):
        if self.variant not in ("lti-stable", "quartic-unstable"):
            raise ValueError(f"unknown benchmark {self.variant!r}")
        if np.linalg.eigvals(self.A).real.max() >= 0:
            raise ValueError("benchmark matrix must be Hurwitz")

    @property
    def n(self) -> int:
        return self.A.shape[0]

    def x_d(self, t: float) -> np.ndarray:
        if self.variant == "lti-stable":
            return np.full(self.n, 1.5)
        phase = 2.0 * np.pi * t + np.cos(ROOT2_PI * t)
        return np.full(self.n, np.sin(phase))

    def x_d_dot(self, t: float) -> np.ndarray:
        if self.variant == "lti-stable":
            return np.zeros(self.n)
        phase = 2.0 * np.pi * t + np.cos(ROOT2_PI * t)
        rate = 2.0 * np.pi - ROOT2_PI * np.sin(ROOT2_PI * t)
        return np.full(self.n, np.cos(phase) * rate)

    def h(self, x: np.ndarray) -> np.ndarray:
        if self.variant == "lti-stable":
            return np.sin(x) * erf(x)
        return 0.25 * x ** 4


def control_rhs(benchmark: ControlBenchmark, x: np.ndarray, u: np.ndarray,
                t: float) -> np.ndarray:
    """Plant vector field, including the feedforward term for the
    time-varying desired trajectory."""
    drift = benchmark.A @ (x - benchmark.x_d(t)) - benchmark.h(x) + u
    if benchmark.variant == "quartic-unstable":
        drift = drift + benchmark.x_d_dot(t)
    return drift


# ---------------------------------------------------------------------------
# m-body Hamiltonian


@dataclass(frozen=True)
class HamiltonianSpec:
    """m equal point masses in d dimensions with a 1/r pair potential."""

    m: int
    d: int
    k_gain: float = 2.0
    sigma_w: float = 1.0

    def __post_init__(self):
        if self.m < 2:
            raise ValueError(f"need at least two bodies, got {self.m}")
        if not self.k_gain > 0:
            raise ValueError(f"measurement gain must be positive, "
                             f"got {self.k_gain}")

    @property
    def state_dim(self) -> int:
        return 2 * self.m * self.d


def _pair_distances(spec: HamiltonianSpec, q: np.ndarray):
    Q = q.reshape(spec.m, spec.d)
    diff = Q[:, None, :] - Q[None, :, :]
    dist = np.linalg.norm(diff, axis=2)
    iu = np.triu_indices(spec.m, k=1)
    return Q, diff, dist, iu


def hamiltonian(spec: HamiltonianSpec, q: np.ndarray, p: np.ndarray) -> float:
    """H = sum |p_i|^2 / 2 - sum_{i<j} 1 / |q_i - q_j|."""
    _, _, dist, iu = _pair_distances(spec, q)
    if dist[iu].min() < DISTANCE_FLOOR:
        raise SingularityError(
            f"pair distance {dist[iu].min():.3e} below floor "
            f"{DISTANCE_FLOOR:.0e}")
    return 0.5 * float(p @ p) - float(np.sum(1.0 / dist[iu]))


def hamiltonian_grads(spec: HamiltonianSpec, q: np.ndarray,
                      p: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """(dH/dq, dH/dp); dH/dq_i = sum_{j != i} (q_i - q_j) / |q_i - q_j|^3."""
    _, diff, dist, iu = _pair_distances(spec, q)
    if dist[iu].min() < DISTANCE_FLOOR:
        raise SingularityError(
            f"pair distance {dist[iu].min():.3e} below floor "
            f"{DISTANCE_FLOOR:.0e}")
    np.fill_diagonal(dist, 1.0)
    dq = (diff / dist[:, :, None] ** 3).sum(axis=1).ravel()
    return dq, p.copy()


def hamiltonian_rhs(spec: HamiltonianSpec, x: np.ndarray) -> np.ndarray:
    """Symplectic flow (dH/dp, -dH/dq) on stacked (q, p)."""
    half = spec.m * spec.d
    dq, dp = hamiltonian_grads(spec, x[:half], x[half:])
    return np.concatenate([dp, -dq])


def nbody_initial_state(spec: HamiltonianSpec, seed: int,
                        min_distance: float = 0.5, radius: float = 1.5,
                        max_tries: int = 1000) -> np.ndarray:
    """Seeded random configuration with zero net momentum.

    Positions are rejection-sampled to keep bodies at least min_distance
    apart; momenta are tangential to the center of mass with seeded
    magnitude jitter, scaled to virial balance (kinetic = half the
    potential depth) so the cluster is bound and avoids the radial
    plunges that drive pairs into the singularity floor.
    """
    rng = np.random.default_rng(seed)
    for _ in range(max_tries):
        Q = rng.uniform(-radius, radius, size=(spec.m, spec.d))
        Q -= Q.mean(axis=0)
        diff = Q[:, None, :] - Q[None, :, :]
        dist = np.linalg.norm(diff, axis=2)
        iu = np.triu_indices(spec.m, k=1)
        if dist[iu].min() < min_distance:
            continue
        potential_depth = float(np.sum(1.0 / dist[iu]))
        # tangent directions: random vector orthogonalized against the
        # center-of-mass radius of each body
        radii = Q / np.maximum(np.linalg.norm(Q, axis=1, keepdims=True),
                               1e-12)
        raw = rng.normal(size=(spec.m, spec.d))
        raw -= (raw * radii).sum(axis=1, keepdims=True) * radii
        norms = np.linalg.norm(raw, axis=1, keepdims=True)
        if norms.min() < 1e-9:
            continue
        tangents = raw / norms
        speeds = 1.0 + 0.1 * rng.normal(size=(spec.m, 1))
        P = tangents * speeds
        P -= P.mean(axis=0)
        kinetic = 0.5 * float(np.sum(P ** 2))
        P *= np.sqrt(0.5 * potential_depth / kinetic)
        q, p = Q.ravel(), P.ravel()
        if hamiltonian(spec, q, p) >= -0.05:
            continue
        return np.concatenate([q, p])
    raise RuntimeError("could not draw an admissible body configuration")
