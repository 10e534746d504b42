"""Adaptation laws: dual-variable updates, the trajectory-tape input,
and the velocity-gradient rule for neural networks."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from .errors import SequencingError
from .kernels import OperatorKernelSpec, kernel_sum

_TIME_TOL = 1e-9


def parametric_update_duals(Y: Optional[np.ndarray], Psi: np.ndarray,
                            g_e: np.ndarray, gradQ: np.ndarray,
                            slope: float) -> Tuple[np.ndarray, np.ndarray]:
    """Dual rates (-slope Y^T g_e^T gradQ, -slope Psi^T g_e^T gradQ).

    slope is the deadzone derivative at the current Lyapunov value; the
    caller applies any learning-rate factor.
    """
    if slope < 0:
        raise ValueError(f"deadzone slope must be nonnegative, got {slope}")
    v = g_e.T @ gradQ
    rate_m = -slope * (Psi.T @ v)
    if Y is None:
        rate_p = np.zeros(0)
    else:
        rate_p = -slope * (Y.T @ v)
    return rate_p, rate_m


@dataclass
class TrajectoryTape:
    """Append-only history of (t, x, c) samples at fixed spacing dt.

    Backing arrays grow by doubling so appends stay O(1) amortized; the
    kernel sum over the tape is recomputed in full at every query, which
    is the linear-in-history cost this representation is meant to expose.
    """

    dt: float
    n: int
    d: int
    _len: int = 0
    _t: np.ndarray = field(default=None, repr=False)
    _X: np.ndarray = field(default=None, repr=False)
    _C: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"tape spacing must be positive, got {self.dt}")
        cap = 64
        self._t = np.empty(cap)
        self._X = np.empty((cap, self.n))
        self._C = np.empty((cap, self.d))

    def __len__(self) -> int:
        return self._len

    @property
    def times(self) -> np.ndarray:
        return self._t[:self._len]

    @property
    def states(self) -> np.ndarray:
        return self._X[:self._len]

    @property
    def coefficients(self) -> np.ndarray:
        return self._C[:self._len]

    def _grow(self):
        cap = 2 * self._t.shape[0]
        self._t = np.resize(self._t, cap)
        X = np.empty((cap, self.n))
        X[:self._len] = self._X[:self._len]
        self._X = X
        C = np.empty((cap, self.d))
        C[:self._len] = self._C[:self._len]
        self._C = C

    def append_raw(self, t: float, x: np.ndarray, c: np.ndarray):
        if self._len > 0:
            expected = self._t[self._len - 1] + self.dt
            if abs(t - expected) > _TIME_TOL:
                raise SequencingError(
                    f"tape expects t = {expected}, got {t}")
        if self._len == self._t.shape[0]:
            self._grow()
        self._t[self._len] = t
        self._X[self._len] = x
        self._C[self._len] = c
        self._len += 1


def tape_append(tape: TrajectoryTape, t: float, x: np.ndarray, gamma: float,
                g_e: np.ndarray, gradQ: np.ndarray):
    """Append (t, x, -gamma g_e^T gradQ)."""
    tape.append_raw(t, np.asarray(x, dtype=float),
                    -gamma * (g_e.T @ gradQ))


def nonparametric_input(tape: TrajectoryTape, kernel: OperatorKernelSpec,
                        x: np.ndarray) -> np.ndarray:
    """Riemann sum sum_i K(x, x_i) c_i dt over the full tape."""
    if len(tape) == 0:
        return np.zeros(kernel.d)
    return kernel_sum(kernel, x, tape.states, tape.coefficients) * tape.dt


# ---------------------------------------------------------------------------
# single hidden-layer network with swish activation


@dataclass
class NNParams:
    """Weights of a single hidden-layer swish network R^n -> R^d."""

    W: np.ndarray      # (width, n)
    b_hidden: np.ndarray  # (width,)
    V: np.ndarray      # (d, width)
    b_out: np.ndarray  # (d,)

    @property
    def width(self) -> int:
        return self.W.shape[0]

    @property
    def size(self) -> int:
        return self.W.size + self.b_hidden.size + self.V.size + self.b_out.size

    def flatten(self) -> np.ndarray:
        return np.concatenate([self.W.ravel(), self.b_hidden,
                               self.V.ravel(), self.b_out])

    @classmethod
    def unflatten(cls, vec: np.ndarray, n: int, d: int,
                  width: int) -> "NNParams":
        vec = np.asarray(vec, dtype=float)
        sizes = [width * n, width, d * width, d]
        if vec.size != sum(sizes):
            raise ValueError(f"expected {sum(sizes)} parameters, "
                             f"got {vec.size}")
        parts = np.split(vec, np.cumsum(sizes)[:-1])
        return cls(W=parts[0].reshape(width, n), b_hidden=parts[1],
                   V=parts[2].reshape(d, width), b_out=parts[3])

    @classmethod
    def init(cls, n: int, d: int, width: int,
             rng: np.random.Generator) -> "NNParams":
        """Hidden layer ~ N(0, 1/sqrt(fan_in)); output layer zero so the
        initial adaptive input vanishes."""
        scale = 1.0 / np.sqrt(n)
        return cls(W=rng.normal(0.0, scale, size=(width, n)),
                   b_hidden=rng.normal(0.0, scale, size=width),
                   V=np.zeros((d, width)), b_out=np.zeros(d))


def swish(z: np.ndarray) -> np.ndarray:
    return z / (1.0 + np.exp(-z))


def swish_prime(z: np.ndarray) -> np.ndarray:
    sig = 1.0 / (1.0 + np.exp(-z))
    return sig * (1.0 + z * (1.0 - sig))


def nn_forward(params: NNParams, x: np.ndarray) -> np.ndarray:
    return params.V @ swish(params.W @ x + params.b_hidden) + params.b_out


def nn_jacobian(params: NNParams, x: np.ndarray) -> np.ndarray:
    """d x P Jacobian with respect to the flattened parameters."""
    x = np.asarray(x, dtype=float)
    d = params.V.shape[0]
    z = params.W @ x + params.b_hidden
    s, sp = swish(z), swish_prime(z)
    dW = (params.V * sp)[:, :, None] * x[None, None, :]  # (d, width, n)
    db_h = params.V * sp                                  # (d, width)
    dV = np.zeros((d, d, params.width))
    dV[np.arange(d), np.arange(d), :] = s
    db_o = np.eye(d)
    return np.concatenate([dW.reshape(d, -1), db_h,
                           dV.reshape(d, -1), db_o], axis=1)


def nn_update_rhs(params: NNParams, x: np.ndarray, g_e: np.ndarray,
                  gradQ: np.ndarray, gamma: float) -> np.ndarray:
    """-gamma J^T g_e^T gradQ via direct backpropagation."""
    if not gamma > 0:
        raise ValueError(f"learning rate must be positive, got {gamma}")
    x = np.asarray(x, dtype=float)
    v = g_e.T @ gradQ
    if v.shape != (params.V.shape[0],):
        raise ValueError(f"error signal has dimension {v.shape}, "
                         f"expected ({params.V.shape[0]},)")
    z = params.W @ x + params.b_hidden
    s, sp = swish(z), swish_prime(z)
    hidden = (params.V.T @ v) * sp          # (width,)
    dW = np.outer(hidden, x)
    dV = np.outer(v, s)
    return -gamma * np.concatenate([dW.ravel(), hidden, dV.ravel(), v])
