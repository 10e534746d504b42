"""Operator-valued kernels and their random Fourier feature banks.

All translation-invariant variants share a Gaussian scalar base
k(r) = exp(-|r|^2 / (2 sigma^2)) whose spectral measure is
N(0, sigma^-2 I).  Feature blocks carry a sqrt(2) factor so that the
Monte-Carlo average (1/K) Psi(x) Psi(y)^T is an unbiased estimate of
K(x, y).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

ROOT2 = np.sqrt(2.0)

VARIANTS = ("decomposable", "curl-free", "divergence-free", "symplectic",
            "finite-feature")
_TRANSLATION_INVARIANT = ("decomposable", "curl-free", "divergence-free",
                          "symplectic")


@dataclass(frozen=True)
class ScalarKernelSpec:
    """Gaussian scalar kernel with bandwidth sigma (state-space units)."""

    sigma: float

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError(f"bandwidth must be positive, got {self.sigma}")


def canonical_symplectic_matrix(dim: int) -> np.ndarray:
    """J = [[0, I], [-I, 0]] for an even state dimension."""
    if dim % 2 != 0:
        raise ValueError(f"symplectic structure needs even dimension, got {dim}")
    half = dim // 2
    J = np.zeros((dim, dim))
    J[:half, half:] = np.eye(half)
    J[half:, :half] = -np.eye(half)
    return J


@dataclass(frozen=True, eq=False)
class OperatorKernelSpec:
    """Matrix-valued kernel on R^n with d-dimensional outputs.

    variant selects the closed form; d1 is the column count of a single
    feature block so a K-feature bank has m = K * d1 weight coordinates.
    """

    variant: str
    base: ScalarKernelSpec
    n: int
    d: int
    d1: int
    A: Optional[np.ndarray] = None
    B: Optional[np.ndarray] = None
    J: Optional[np.ndarray] = None
    phi: Optional[Callable[[np.ndarray], np.ndarray]] = None
    src_bank: Optional["FeatureBank"] = field(default=None, repr=False)

    @property
    def sigma(self) -> float:
        return self.base.sigma

    @property
    def translation_invariant(self) -> bool:
        return self.variant in _TRANSLATION_INVARIANT


def decomposable_kernel(sigma: float, n: int, d: int,
                        A: Optional[np.ndarray] = None) -> OperatorKernelSpec:
    """K(x, y) = A k(x - y) with A = B B^T symmetric PSD (default identity)."""
    if A is None:
        A = np.eye(d)
    A = np.asarray(A, dtype=float)
    if A.shape != (d, d):
        raise ValueError(f"A must be {d}x{d}, got {A.shape}")
    if not np.allclose(A, A.T, atol=1e-12):
        raise ValueError("A must be symmetric")
    evals, evecs = np.linalg.eigh(A)
    if evals.min() < -1e-10 * max(1.0, evals.max()):
        raise ValueError("A must be positive semidefinite")
    B = evecs * np.sqrt(np.clip(evals, 0.0, None))
    return OperatorKernelSpec("decomposable", ScalarKernelSpec(sigma), n, d,
                              d1=d, A=A, B=B)


def curl_free_kernel(sigma: float, n: int) -> OperatorKernelSpec:
    """K(x, y) = -hess k(x - y); fields x -> K(x, y)v are gradients."""
    return OperatorKernelSpec("curl-free", ScalarKernelSpec(sigma), n, n, d1=1)


def divergence_free_kernel(sigma: float, n: int) -> OperatorKernelSpec:
    """K(x, y) = (hess - I lap) k(x - y); fields are divergence-free."""
    return OperatorKernelSpec("divergence-free", ScalarKernelSpec(sigma), n, n,
                              d1=n)


def symplectic_kernel(sigma: float, dim: int,
                      J: Optional[np.ndarray] = None) -> OperatorKernelSpec:
    """K(x, y) = -J hess k(x - y) J^T, generating fields J grad H."""
    from .errors import ConfigError

    if dim % 2 != 0:
        raise ConfigError(f"symplectic kernel needs even dimension, got {dim}")
    if J is None:
        J = canonical_symplectic_matrix(dim)
    else:
        J = np.asarray(J, dtype=float)
        if J.shape != (dim, dim):
            raise ConfigError(f"J must be {dim}x{dim}, got {J.shape}")
        if not np.allclose(J.T @ J, np.eye(dim), atol=1e-10):
            raise ConfigError("J must be orthogonal (J^T J = I)")
        if not np.allclose(J.T, -J, atol=1e-10):
            raise ConfigError("J must be antisymmetric (J^T = -J)")
    return OperatorKernelSpec("symplectic", ScalarKernelSpec(sigma), dim, dim,
                              d1=1, J=J)


def finite_feature_kernel(phi: Callable[[np.ndarray], np.ndarray], n: int,
                          d: int, d1: int,
                          src_bank: Optional["FeatureBank"] = None
                          ) -> OperatorKernelSpec:
    """K(x, y) = phi(x) phi(y)^T for an explicit d x d1 feature function."""
    return OperatorKernelSpec("finite-feature", ScalarKernelSpec(1.0), n, d,
                              d1=d1, phi=phi, src_bank=src_bank)


def eval_scalar_kernel(spec: ScalarKernelSpec, x: np.ndarray,
                       y: np.ndarray) -> float:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise ValueError(f"dimension mismatch: {x.shape} vs {y.shape}")
    r = x - y
    return float(np.exp(-(r @ r) / (2.0 * spec.sigma ** 2)))


def _scaled_hessian_terms(spec: OperatorKernelSpec, r: np.ndarray):
    """Common pieces of hess k(r) = k(r) (r r^T / s^4 - I / s^2)."""
    s2 = spec.sigma ** 2
    kval = np.exp(-(r @ r) / (2.0 * s2))
    return kval, s2


def eval_operator_kernel(spec: OperatorKernelSpec, x: np.ndarray,
                         y: np.ndarray) -> np.ndarray:
    """Closed-form K(x, y); satisfies K(x, y) = K(y, x)^T."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != (spec.n,) or y.shape != (spec.n,):
        raise ValueError(f"inputs must be {spec.n}-vectors, "
                         f"got {x.shape} and {y.shape}")
    if spec.variant == "finite-feature":
        return spec.phi(x) @ spec.phi(y).T
    r = x - y
    kval, s2 = _scaled_hessian_terms(spec, r)
    if spec.variant == "decomposable":
        return spec.A * kval
    if spec.variant == "curl-free":
        return kval * (np.eye(spec.d) / s2 - np.outer(r, r) / s2 ** 2)
    if spec.variant == "divergence-free":
        rr = r @ r
        diag = (spec.n - 1) / s2 - rr / s2 ** 2
        return kval * (np.outer(r, r) / s2 ** 2 + diag * np.eye(spec.d))
    if spec.variant == "symplectic":
        Jr = spec.J @ r
        return kval * (np.eye(spec.d) / s2 - np.outer(Jr, Jr) / s2 ** 2)
    raise ValueError(f"unknown kernel variant {spec.variant!r}")


@dataclass(frozen=True)
class FeatureSample:
    """One spectral draw theta = (w, b) with b in [0, 2 pi)."""

    w: np.ndarray
    b: float

    def __post_init__(self):
        if not 0.0 <= self.b < 2.0 * np.pi:
            raise ValueError(f"phase must lie in [0, 2 pi), got {self.b}")


def sample_feature(spec: OperatorKernelSpec,
                   rng: np.random.Generator) -> FeatureSample:
    """Draw (w, b) from the Bochner factorization of the base kernel."""
    if not spec.translation_invariant:
        raise ValueError(
            f"variant {spec.variant!r} has no spectral measure to sample")
    w = rng.normal(0.0, 1.0 / spec.sigma, size=spec.n)
    b = rng.uniform(0.0, 2.0 * np.pi)
    return FeatureSample(w=w, b=b)


@dataclass(frozen=True, eq=False)
class FeatureBank:
    """K spectral samples for a translation-invariant operator kernel.

    Reconstructing a bank from (kernel, K, seed) is bit-for-bit
    reproducible; raw samples are never persisted.
    """

    kernel: OperatorKernelSpec
    seed: int
    W: np.ndarray  # (K, n)
    b: np.ndarray  # (K,)

    @classmethod
    def from_seed(cls, kernel: OperatorKernelSpec, K: int,
                  seed: int) -> "FeatureBank":
        if not kernel.translation_invariant:
            raise ValueError(
                f"variant {kernel.variant!r} has no spectral measure to sample")
        if K < 1:
            raise ValueError(f"feature count must be >= 1, got {K}")
        rng = np.random.default_rng(seed)
        W = rng.normal(0.0, 1.0 / kernel.sigma, size=(K, kernel.n))
        b = rng.uniform(0.0, 2.0 * np.pi, size=K)
        return cls(kernel=kernel, seed=seed, W=W, b=b)

    @property
    def K(self) -> int:
        return self.W.shape[0]

    @property
    def m(self) -> int:
        """Total weight coordinates K * d1."""
        return self.K * self.kernel.d1

    @property
    def samples(self):
        return [FeatureSample(w=self.W[i], b=float(self.b[i]))
                for i in range(self.K)]


def _block_matrices(bank: FeatureBank) -> np.ndarray:
    """Per-feature matrices sqrt(2) M(w_i), shape (K, d, d1)."""
    spec = bank.kernel
    K = bank.K
    if spec.variant == "decomposable":
        return np.broadcast_to(ROOT2 * spec.B, (K, spec.d, spec.d1))
    if spec.variant == "curl-free":
        return ROOT2 * bank.W[:, :, None]
    if spec.variant == "symplectic":
        return ROOT2 * (bank.W @ spec.J.T)[:, :, None]
    if spec.variant == "divergence-free":
        norms = np.linalg.norm(bank.W, axis=1)
        outer = bank.W[:, :, None] * bank.W[:, None, :]
        M = norms[:, None, None] * np.eye(spec.d) - outer / norms[:, None, None]
        return ROOT2 * M
    raise ValueError(f"variant {spec.variant!r} has no feature blocks")


def feature_matrix(bank: FeatureBank, x: np.ndarray) -> np.ndarray:
    """Psi(x) = [Phi(x, theta_1), ..., Phi(x, theta_K)], shape (d, K*d1).

    Blocks are Phi(x, theta) = cos(w^T x + b) * sqrt(2) M(w); no 1/K
    scaling is applied (learned weights absorb it).
    """
    x = np.asarray(x, dtype=float)
    if x.shape != (bank.kernel.n,):
        raise ValueError(f"x must be a {bank.kernel.n}-vector, got {x.shape}")
    cosz = np.cos(bank.W @ x + bank.b)
    blocks = _block_matrices(bank) * cosz[:, None, None]
    return np.ascontiguousarray(
        np.moveaxis(blocks, 0, 1).reshape(bank.kernel.d, bank.m))


def bank_feature_map(bank: FeatureBank) -> Callable[[np.ndarray], np.ndarray]:
    """Explicit feature function x -> Psi(x) backed by a bank."""
    def phi(x: np.ndarray) -> np.ndarray:
        return feature_matrix(bank, x)
    return phi


def finite_feature_kernel_from_bank(bank: FeatureBank) -> OperatorKernelSpec:
    """Treat a bank's Psi as an explicit finite feature map, K = Psi Psi^T."""
    return finite_feature_kernel(bank_feature_map(bank), bank.kernel.n,
                                 bank.kernel.d, bank.m, src_bank=bank)


def feature_weight_products(bank: FeatureBank, X: np.ndarray,
                            C: np.ndarray) -> np.ndarray:
    """Rows Psi(X_i)^T C_i for a batch of points, shape (N, K*d1)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    C = np.atleast_2d(np.asarray(C, dtype=float))
    cosz = np.cos(X @ bank.W.T + bank.b)  # (N, K)
    proj = np.einsum('kdj,nd->nkj', _block_matrices(bank), C)  # (N, K, d1)
    return (proj * cosz[:, :, None]).reshape(X.shape[0], bank.m)


def kernel_sum(spec: OperatorKernelSpec, x: np.ndarray, X: np.ndarray,
               C: np.ndarray) -> np.ndarray:
    """Vectorized sum_i K(x, X_i) C_i over stored points (cost O(N))."""
    x = np.asarray(x, dtype=float)
    X = np.atleast_2d(np.asarray(X, dtype=float))
    C = np.atleast_2d(np.asarray(C, dtype=float))
    if X.shape[0] == 0:
        return np.zeros(spec.d)
    if spec.variant == "finite-feature":
        if spec.src_bank is not None:
            rows = feature_weight_products(spec.src_bank, X, C)
            return spec.phi(x) @ rows.sum(axis=0)
        acc = np.zeros(spec.d)
        for xi, ci in zip(X, C):
            acc += spec.phi(x) @ (spec.phi(xi).T @ ci)
        return acc
    R = x[None, :] - X  # (N, n)
    s2 = spec.sigma ** 2
    k = np.exp(-np.einsum('ij,ij->i', R, R) / (2.0 * s2))
    if spec.variant == "decomposable":
        return spec.A @ (k @ C)
    if spec.variant == "curl-free":
        rc = np.einsum('ij,ij->i', R, C)
        return (k @ C) / s2 - (R.T @ (k * rc)) / s2 ** 2
    if spec.variant == "symplectic":
        RJ = R @ spec.J.T  # rows (J r_i)^T
        rc = np.einsum('ij,ij->i', RJ, C)
        return (k @ C) / s2 - (RJ.T @ (k * rc)) / s2 ** 2
    if spec.variant == "divergence-free":
        rr = np.einsum('ij,ij->i', R, R)
        rc = np.einsum('ij,ij->i', R, C)
        diag = (spec.n - 1) / s2 - rr / s2 ** 2
        return R.T @ (k * rc) / s2 ** 2 + (k * diag) @ C
    raise ValueError(f"unknown kernel variant {spec.variant!r}")


def kernel_config_to_spec(cfg: dict) -> OperatorKernelSpec:
    """Build a kernel spec from the serializable JSON fields."""
    from .errors import ConfigError

    variant = cfg.get("variant", "decomposable")
    sigma = float(cfg.get("sigma", 1.0))
    n = int(cfg["n"])
    d = int(cfg.get("d", n))
    try:
        if variant == "decomposable":
            return decomposable_kernel(sigma, n, d)
        if variant == "curl-free":
            return curl_free_kernel(sigma, n)
        if variant == "divergence-free":
            return divergence_free_kernel(sigma, n)
        if variant == "symplectic":
            return symplectic_kernel(sigma, n)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    raise ConfigError(f"unknown kernel variant {variant!r}")


def kernel_spec_to_config(spec: OperatorKernelSpec, K: int = 0,
                          seed: int = 0) -> dict:
    """Serializable document (variant, sigma, n, d, d1, K, seed)."""
    if spec.variant == "finite-feature":
        raise ValueError("finite-feature kernels are not serializable")
    if spec.variant == "decomposable" and not np.array_equal(
            spec.A, np.eye(spec.d)):
        raise ValueError("only identity-factor decomposable kernels serialize")
    return {"variant": spec.variant, "sigma": spec.sigma, "n": spec.n,
            "d": spec.d, "d1": spec.d1, "K": K, "seed": seed}
