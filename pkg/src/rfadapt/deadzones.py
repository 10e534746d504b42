"""Smooth deadzones gating adaptation below the approximation noise floor."""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class DeadzoneSpec:
    """variant: quadratic-hinge (delta, gamma_s), shifted-square (delta),
    or none (value q, slope 1, i.e. adaptation always active)."""

    variant: str = "none"
    delta: float = 0.0
    gamma_s: float = 0.0

    def __post_init__(self):
        if self.variant not in ("quadratic-hinge", "shifted-square", "none"):
            raise ValueError(f"unknown deadzone variant {self.variant!r}")
        if self.variant == "quadratic-hinge":
            if not (self.delta > 0 and self.gamma_s > 0):
                raise ValueError("quadratic-hinge needs delta > 0 and "
                                 "gamma_s > 0")
        if self.variant == "shifted-square" and not self.delta > 0:
            raise ValueError("shifted-square needs delta > 0")

    @property
    def threshold(self) -> float:
        return 0.0 if self.variant == "none" else self.delta


def deadzone_value(spec: DeadzoneSpec, q: float) -> float:
    if q < 0:
        raise ValueError(f"deadzone input must be nonnegative, got {q}")
    if spec.variant == "none":
        return q
    if spec.variant == "quadratic-hinge":
        d, g = spec.delta, spec.gamma_s
        if q <= d:
            return 0.0
        if q < d + 2.0 * g:
            return (q - d) ** 2 / (4.0 * g)
        return q - (d + g)
    # shifted-square: s_{sqrt(delta)}(sqrt(q))^2
    root = math.sqrt(q) - math.sqrt(spec.delta)
    return root * root if root > 0 else 0.0


def deadzone_slope(spec: DeadzoneSpec, q: float) -> float:
    """Derivative of deadzone_value; lies in [0, 1] for quadratic-hinge."""
    if q < 0:
        raise ValueError(f"deadzone input must be nonnegative, got {q}")
    if spec.variant == "none":
        return 1.0
    if spec.variant == "quadratic-hinge":
        d, g = spec.delta, spec.gamma_s
        if q <= d:
            return 0.0
        if q < d + 2.0 * g:
            return (q - d) / (2.0 * g)
        return 1.0
    if q <= spec.delta:
        return 0.0
    return 1.0 - math.sqrt(spec.delta / q)
