"""Command-line entry point: one subcommand per experiment family plus
the bound and kernel-diagnostic calculators.

Exit codes: 0 success, 2 configuration error, 3 at least one trial was
divergence-flagged (series are still written).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import analysis, bounds
from .errors import ConfigError
from .kernels import (FeatureBank, eval_operator_kernel, feature_matrix,
                      kernel_config_to_spec)
from .simulate import SimConfig, derive_trial_seeds, run_prediction, run_trials

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DIVERGED = 3
EXIT_CHECK_FAILED = 1


def _load_config(path: str) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc


def _resolve(raw: dict, args, expected_system: str = None) -> SimConfig:
    if args.seed is not None:
        raw["seed"] = args.seed
    if args.trials is not None:
        raw["trials"] = args.trials
    cfg = SimConfig.from_dict(raw)
    if expected_system and cfg.system.get("name") not in expected_system:
        raise ConfigError(
            f"subcommand expects system in {expected_system}, "
            f"got {cfg.system.get('name')!r}")
    return cfg


def _emit_trials(cfg: SimConfig, out_dir: Path, extra: dict = None) -> int:
    out_dir.mkdir(parents=True, exist_ok=True)
    series_list = run_trials(cfg)
    seeds = derive_trial_seeds(cfg.seed, cfg.trials)
    for k, series in enumerate(series_list):
        analysis.emit_series(series, out_dir / f"trial_{k:03d}.csv")
    analysis.write_manifest(out_dir / "manifest.json", cfg.to_dict(), seeds,
                            series_list, extra=extra)
    if any(s.diverged for s in series_list):
        return EXIT_DIVERGED
    return EXIT_OK


def _cmd_control(args) -> int:
    cfg = _resolve(_load_config(args.config), args, ("lti", "quartic"))
    return _emit_trials(cfg, Path(args.out))


def _cmd_predict(args) -> int:
    cfg = _resolve(_load_config(args.config), args, ("predictor",))
    return _emit_trials(cfg, Path(args.out))


def _cmd_nbody(args) -> int:
    cfg = _resolve(_load_config(args.config), args, ("nbody",))
    return _emit_trials(cfg, Path(args.out))


def _cmd_sweep(args) -> int:
    raw = _load_config(args.config)
    sweep_cfg = raw.pop("sweep", None)
    if not sweep_cfg or "K_values" not in sweep_cfg:
        raise ConfigError("sweep-k requires a 'sweep' block with K_values")
    k_values = [int(k) for k in sweep_cfg["K_values"]]
    if k_values != sorted(k_values) or len(set(k_values)) != len(k_values):
        raise ConfigError("K_values must be strictly increasing")
    window = float(sweep_cfg.get("window", 0.1))
    cfg = _resolve(raw, args)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    any_diverged = False
    per_k = []
    for K in k_values:
        raw_k = cfg.to_dict()
        raw_k["kernel"]["K"] = K
        cfg_k = SimConfig.from_dict(raw_k)
        series_list = run_trials(cfg_k)
        any_diverged |= any(s.diverged for s in series_list)
        errors = [analysis.final_window_median(s, window)
                  for s in series_list]
        per_k.append((K, errors))
    sweep = analysis.sweep_from_errors(per_k)
    analysis.emit_sweep(sweep, out_dir / "sweep.csv")

    fit_report = None
    if len(k_values) >= 3:
        fit = analysis.fit_power_law(sweep.medians())
        fit_report = {"exponent": fit.exponent, "amplitude": fit.amplitude,
                      "ci95": fit.ci95}
        with (out_dir / "power_law.json").open("w") as fh:
            json.dump(fit_report, fh, indent=2)
            fh.write("\n")
    with (out_dir / "manifest.json").open("w") as fh:
        json.dump({"config": cfg.to_dict(), "K_values": k_values,
                   "fit": fit_report}, fh, indent=2)
        fh.write("\n")
    return EXIT_DIVERGED if any_diverged else EXIT_OK


def _b_phi_from_config(block: dict, n: int):
    kind = block.get("kind", "constant")
    if kind == "constant":
        return bounds.constant_b_phi(float(block.get("value", 1.0)))
    if kind == "gaussian":
        return bounds.gaussian_b_phi(n, float(block["sigma_w"]))
    raise ConfigError(f"unknown b_phi kind {kind!r}")


def _cmd_bound(args) -> int:
    raw = _load_config(args.config)
    block = raw.get("bound")
    if not block:
        raise ConfigError("bound requires a 'bound' block")
    try:
        inputs = bounds.BoundInputs(
            B_h=float(block.get("B_h", 1.0)),
            B_X=float(block.get("B_X", 1.0)),
            n=int(block["n"]), d1=int(block.get("d1", 1)),
            delta=float(block.get("delta", 0.01)),
            b_phi=_b_phi_from_config(block.get("b_phi", {}), int(block["n"])),
            w_second_moment=float(block.get("w_second_moment", block["n"])),
            feature_second_moment=float(
                block.get("feature_second_moment", 1.0)),
            beta=float(block.get("beta", 1.0)),
            L=float(block.get("L", 1.0)), mu=float(block.get("mu", 1.0)),
            B_ge=float(block.get("B_ge", 1.0)),
            B_gradQ=float(block.get("B_gradQ", 1.0)),
            C_h=float(block.get("C_h", 1.0)))
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"invalid bound inputs: {exc}") from exc
    report = {}
    if "eps" in block:
        report["required_K"] = bounds.required_features(
            inputs, float(block["eps"]))
    if "K_values" in block:
        report["approximation_bound"] = {
            str(int(K)): bounds.approximation_bound(inputs, int(K))
            for K in block["K_values"]}
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    with (out_dir / "bound.json").open("w") as fh:
        json.dump(report, fh, indent=2)
        fh.write("\n")
    print(json.dumps(report))
    return EXIT_OK


def _cmd_kernel_check(args) -> int:
    raw = _load_config(args.config)
    kernel_cfg = raw.get("kernel")
    if not kernel_cfg:
        raise ConfigError("kernel-check requires a 'kernel' block")
    spec = kernel_config_to_spec(kernel_cfg)
    K = int(kernel_cfg.get("K", 100000))
    seed = args.seed if args.seed is not None else int(
        kernel_cfg.get("seed", 0))
    pairs = int(raw.get("pairs", 10))
    rng = np.random.default_rng(seed)
    bank = FeatureBank.from_seed(spec, K, seed)

    sym_err = 0.0
    mc_ok = True
    worst_z = 0.0
    for _ in range(pairs):
        x = rng.uniform(-1.0, 1.0, spec.n)
        y = rng.uniform(-1.0, 1.0, spec.n)
        Kxy = eval_operator_kernel(spec, x, y)
        sym_err = max(sym_err, float(np.max(np.abs(
            Kxy - eval_operator_kernel(spec, y, x).T))))
        Px, Py = feature_matrix(bank, x), feature_matrix(bank, y)
        blocks = _mc_blocks(Px, Py, spec.d, K, spec.d1)
        mean = blocks.mean(axis=0)
        se = blocks.std(axis=0, ddof=1) / np.sqrt(K)
        z = np.abs(mean - Kxy) / np.maximum(se, 1e-300)
        worst_z = max(worst_z, float(z.max()))
        if np.any(np.abs(mean - Kxy) > 3.0 * se):
            mc_ok = False
    report = {"symmetry_max_abs": sym_err, "symmetry_ok": sym_err <= 1e-12,
              "mc_worst_z": worst_z, "mc_within_3se": mc_ok,
              "K": K, "pairs": pairs}
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    with (out_dir / "kernel_check.json").open("w") as fh:
        json.dump(report, fh, indent=2)
        fh.write("\n")
    print(json.dumps(report))
    return EXIT_OK if (report["symmetry_ok"] and mc_ok) else EXIT_CHECK_FAILED


def _mc_blocks(Px: np.ndarray, Py: np.ndarray, d: int, K: int,
               d1: int) -> np.ndarray:
    """Per-feature terms Phi(x, theta_i) Phi(y, theta_i)^T, shape (K, d, d)."""
    bx = Px.reshape(d, K, d1).transpose(1, 0, 2)
    by = Py.reshape(d, K, d1).transpose(1, 0, 2)
    return bx @ by.transpose(0, 2, 1)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rfadapt",
        description="Kernel and random-feature adaptive control experiments")
    sub = parser.add_subparsers(dest="command", required=True)
    handlers = {"control": _cmd_control, "predict": _cmd_predict,
                "nbody": _cmd_nbody, "sweep-k": _cmd_sweep,
                "bound": _cmd_bound, "kernel-check": _cmd_kernel_check}
    for name, handler in handlers.items():
        p = sub.add_parser(name)
        p.add_argument("--config", required=True)
        p.add_argument("--out", default="out")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--trials", type=int, default=None)
        p.set_defaults(handler=handler)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
