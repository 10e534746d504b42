"""Mirror maps for dual-variable adaptation.

Updates integrate the dual variable and recover the primal estimate
through the inverse gradient map, which is exact for the Euclidean
potential and numerically stable for hypentropy.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import SaturationError

# |dual| beyond this overflows sinh in float64
_SINH_LIMIT = 710.0


@dataclass(frozen=True)
class MirrorMap:
    """variant: euclidean (identity) or hypentropy(beta)."""

    variant: str = "euclidean"
    beta: float = 1.0

    def __post_init__(self):
        if self.variant not in ("euclidean", "hypentropy"):
            raise ValueError(f"unknown mirror variant {self.variant!r}")
        if self.variant == "hypentropy" and not self.beta > 0:
            raise ValueError(f"hypentropy beta must be positive, "
                             f"got {self.beta}")


def mirror_dual(mmap: MirrorMap, primal: np.ndarray) -> np.ndarray:
    """grad psi: componentwise arcsinh(a / beta) for hypentropy."""
    primal = np.asarray(primal, dtype=float)
    if mmap.variant == "euclidean":
        return primal.copy()
    return np.arcsinh(primal / mmap.beta)


def mirror_primal(mmap: MirrorMap, dual: np.ndarray) -> np.ndarray:
    """(grad psi)^{-1}: componentwise beta * sinh for hypentropy."""
    dual = np.asarray(dual, dtype=float)
    if not np.all(np.isfinite(dual)):
        raise ValueError("dual variable must be finite")
    if mmap.variant == "euclidean":
        return dual.copy()
    if np.max(np.abs(dual), initial=0.0) > _SINH_LIMIT:
        raise SaturationError("hypentropy dual exceeds sinh exponent range")
    return mmap.beta * np.sinh(dual)


@dataclass
class AdaptState:
    """Dual coordinates of the physical and model weight estimates."""

    dual_p: np.ndarray
    dual_m: np.ndarray
    map_p: MirrorMap = field(default_factory=MirrorMap)
    map_m: MirrorMap = field(default_factory=MirrorMap)

    @classmethod
    def from_initial(cls, alpha_p0: np.ndarray, alpha_m0: np.ndarray,
                     map_p: MirrorMap = MirrorMap(),
                     map_m: MirrorMap = MirrorMap()) -> "AdaptState":
        return cls(dual_p=mirror_dual(map_p, alpha_p0),
                   dual_m=mirror_dual(map_m, alpha_m0),
                   map_p=map_p, map_m=map_m)

    @property
    def alpha_p(self) -> np.ndarray:
        return mirror_primal(self.map_p, self.dual_p)

    @property
    def alpha_m(self) -> np.ndarray:
        return mirror_primal(self.map_m, self.dual_m)
