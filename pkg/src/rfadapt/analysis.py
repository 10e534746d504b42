"""Ensemble statistics, power-law fits, and flat-file output."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, List, Sequence, Tuple

import numpy as np
from scipy.stats import t as student_t

from .simulate import MetricsSeries

_FLOAT_FMT = "{:.17g}"

SERIES_HEADER = "t,tracking_error,input_norm,interp_error,lyapunov"
SWEEP_HEADER = "K,q20,q50,q80"

# exponents observed for the full-scale (60-dimensional, K up to ~20000)
# ten-body feature sweeps; documented targets, not desk-scale assertions
REFERENCE_PREDICTION_EXPONENT = 1.28
REFERENCE_INTERPOLATION_EXPONENT = 0.77


def quantiles(values: Sequence[float], q: float) -> float:
    """Linear-interpolation quantile: h = q (N - 1) on the sorted data."""
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise ValueError("quantile of an empty sequence")
    if not 0.0 <= q <= 1.0:
        raise ValueError(f"quantile level must lie in [0, 1], got {q}")
    data = np.sort(values)
    h = q * (data.size - 1)
    lo = int(math.floor(h))
    hi = min(lo + 1, data.size - 1)
    return float(data[lo] + (h - lo) * (data[hi] - data[lo]))


def final_window(series: MetricsSeries, frac: float = 0.1) -> np.ndarray:
    """Tracking-error samples over the last frac of the recorded horizon."""
    count = max(1, int(math.ceil(frac * len(series))))
    return series.tracking_error[-count:]


def final_window_median(series: MetricsSeries, frac: float = 0.1) -> float:
    return quantiles(final_window(series, frac), 0.5)


def initial_window_median(series: MetricsSeries, frac: float = 0.1) -> float:
    count = max(1, int(math.ceil(frac * len(series))))
    return quantiles(series.tracking_error[:count], 0.5)


@dataclass(frozen=True)
class PowerLawFit:
    """error ~ amplitude * K^(-exponent), with a symmetric 95% interval
    half-width on the exponent from the log-log regression."""

    exponent: float
    amplitude: float
    ci95: float


def fit_power_law(points: Sequence[Tuple[float, float]]) -> PowerLawFit:
    """Ordinary least squares on (log K, log error)."""
    points = list(points)
    if len(points) < 3:
        raise ValueError(f"need at least 3 points, got {len(points)}")
    K = np.array([p[0] for p in points], dtype=float)
    err = np.array([p[1] for p in points], dtype=float)
    if np.any(K <= 0) or np.any(err <= 0):
        raise ValueError("power-law fit needs positive K and error values")
    x = np.log(K)
    y = np.log(err)
    xbar = x.mean()
    sxx = float(np.sum((x - xbar) ** 2))
    slope = float(np.sum((x - xbar) * (y - y.mean())) / sxx)
    intercept = float(y.mean() - slope * xbar)
    resid = y - (intercept + slope * x)
    dof = len(points) - 2
    s2 = float(resid @ resid) / dof
    se = math.sqrt(s2 / sxx)
    ci95 = float(student_t.ppf(0.975, dof)) * se
    return PowerLawFit(exponent=-slope, amplitude=math.exp(intercept),
                       ci95=ci95)


@dataclass
class SweepResult:
    """Final-window error quantiles per feature count."""

    rows: List[Tuple[int, float, float, float]]

    def __post_init__(self):
        ks = [row[0] for row in self.rows]
        if ks != sorted(ks) or len(set(ks)) != len(ks):
            raise ValueError("sweep rows must have strictly increasing K")
        for _, q20, q50, q80 in self.rows:
            if not q20 <= q50 <= q80:
                raise ValueError("sweep quantiles must be ordered")

    def medians(self) -> List[Tuple[float, float]]:
        return [(float(k), q50) for k, _, q50, _ in self.rows]


def sweep_from_errors(per_k_errors: Iterable[Tuple[int, Sequence[float]]]
                      ) -> SweepResult:
    rows = []
    for K, errors in per_k_errors:
        rows.append((int(K), quantiles(errors, 0.2), quantiles(errors, 0.5),
                     quantiles(errors, 0.8)))
    return SweepResult(rows=rows)


# ---------------------------------------------------------------------------
# emission


def _fmt(x: float) -> str:
    return _FLOAT_FMT.format(float(x))


def emit_series(series: MetricsSeries, path) -> None:
    """CSV with 17-significant-digit floats; parse-back is bit-exact."""
    path = Path(path)
    try:
        with path.open("w") as fh:
            fh.write(SERIES_HEADER + "\n")
            for i in range(len(series)):
                fh.write(",".join(_fmt(col[i]) for col in (
                    series.t, series.tracking_error, series.input_norm,
                    series.interp_error, series.lyapunov)) + "\n")
    except OSError as exc:
        raise OSError(f"failed writing series to {path}: {exc}") from exc


def parse_series(path) -> MetricsSeries:
    path = Path(path)
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.size == 0:
        data = data.reshape(0, 5)
    return MetricsSeries(t=data[:, 0], tracking_error=data[:, 1],
                         input_norm=data[:, 2], interp_error=data[:, 3],
                         lyapunov=data[:, 4])


def emit_sweep(sweep: SweepResult, path) -> None:
    path = Path(path)
    try:
        with path.open("w") as fh:
            fh.write(SWEEP_HEADER + "\n")
            for K, q20, q50, q80 in sweep.rows:
                fh.write(f"{K},{_fmt(q20)},{_fmt(q50)},{_fmt(q80)}\n")
    except OSError as exc:
        raise OSError(f"failed writing sweep to {path}: {exc}") from exc


def parse_sweep(path) -> SweepResult:
    rows = []
    with Path(path).open() as fh:
        next(fh)
        for line in fh:
            if not line.strip():
                continue
            k, q20, q50, q80 = line.strip().split(",")
            rows.append((int(k), float(q20), float(q50), float(q80)))
    return SweepResult(rows=rows)


def write_manifest(path, config: dict, trial_seeds: Sequence[int],
                   series_list: Sequence[MetricsSeries],
                   extra: dict = None) -> None:
    """Run manifest: resolved config, per-trial seeds, divergence flags."""
    manifest = {
        "config": config,
        "trials": [
            {"seed": int(seed), "diverged": bool(s.diverged),
             "note": s.note, "samples": len(s)}
            for seed, s in zip(trial_seeds, series_list)
        ],
    }
    if extra:
        manifest.update(extra)
    with Path(path).open("w") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")
