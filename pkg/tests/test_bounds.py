import math

import numpy as np
import pytest
from scipy.special import erf

from rfadapt.bounds import (BoundInputs, approximation_bound, constant_b_phi,
                            empirical_sup_error, fit_feature_weights,
                            gaussian_b_phi, required_features)
from rfadapt.kernels import FeatureBank, decomposable_kernel, feature_matrix


def unit_inputs(**overrides):
    base = dict(B_h=1.0, B_X=1.0, n=4, d1=1, delta=0.5,
                b_phi=constant_b_phi(1.0), w_second_moment=1.0,
                feature_second_moment=1.0)
    base.update(overrides)
    return BoundInputs(**base)


class TestRequiredFeatures:
    def test_unit_constants(self):
        # 400 * (2 + 1)^2 = 3600
        assert required_features(unit_inputs(), eps=0.1) == 3600

    def test_eps_scaling(self):
        # raw value quadruples exactly when eps halves
        k1 = required_features(unit_inputs(), eps=0.2)
        k2 = required_features(unit_inputs(), eps=0.1)
        assert k2 == 4 * k1

    def test_scalar_feature_edge(self):
        # B_X sqrt(n) = 0 with n = 0 leaves only sqrt(d1)
        inputs = unit_inputs(n=0, B_X=0.0)
        assert required_features(inputs, eps=1.0) == 4

    def test_nonpositive_eps_rejected(self):
        with pytest.raises(ValueError):
            required_features(unit_inputs(), eps=0.0)


class TestApproximationBound:
    def test_numeric_instance_dual_evaluation(self):
        # independent spreadsheet-style recomputation, all inputs one
        inputs = unit_inputs(delta=0.5)
        value = approximation_bound(inputs, K=1)
        by_hand = (1.0 / math.sqrt(1.0)) * (
            2.0 * 1.0 * (2.0 * 1.0 * math.sqrt(1.0) + 2.0 * math.sqrt(1.0)
                         + math.sqrt(math.log(2.0 / 0.5)))
            + math.sqrt(0.5 * 0.5 * 1.0))
        assert value == pytest.approx(by_hand, rel=1e-14)

    def test_quadrupling_K_halves_with_constant_b_phi(self):
        inputs = unit_inputs()
        b1 = approximation_bound(inputs, K=100)
        b4 = approximation_bound(inputs, K=400)
        assert b4 == pytest.approx(0.5 * b1, rel=1e-12)

    def test_strictly_decreasing_in_K(self):
        inputs = unit_inputs()
        values = [approximation_bound(inputs, K) for K in range(1, 400, 7)]
        assert all(a > b for a, b in zip(values, values[1:]))

    def test_gaussian_b_phi_grows_with_confidence(self):
        b_phi = gaussian_b_phi(4, sigma_w=10.0)
        assert b_phi(0.01) > b_phi(0.1) > math.sqrt(4)
        with pytest.raises(ValueError):
            b_phi(0.0)

    def test_invalid_delta_rejected(self):
        with pytest.raises(ValueError):
            unit_inputs(delta=1.5)
        with pytest.raises(ValueError):
            approximation_bound(unit_inputs(), K=0)


def _target(x):
    return np.sin(x) * erf(x)


class TestEmpiricalSupError:
    def test_zero_case(self):
        bank = FeatureBank.from_seed(decomposable_kernel(1.0, 2, 2), 8, 0)
        grid = [np.zeros(2), np.ones(2)]
        err = empirical_sup_error(bank, np.zeros(bank.m), lambda x: 0.0 * x,
                                  grid)
        assert err == 0.0

    def test_self_representation(self, rng):
        bank = FeatureBank.from_seed(decomposable_kernel(0.8, 2, 2), 16, 3)
        w_star = rng.normal(size=bank.m)
        target = lambda x: feature_matrix(bank, x) @ w_star
        grid = [rng.uniform(-1, 1, 2) for _ in range(20)]
        assert empirical_sup_error(bank, w_star, target, grid) <= 1e-12

    def test_empty_grid_rejected(self):
        bank = FeatureBank.from_seed(decomposable_kernel(1.0, 2, 2), 4, 0)
        with pytest.raises(ValueError):
            empirical_sup_error(bank, np.zeros(bank.m), _target, [])

    def test_least_squares_error_improves_with_K(self):
        # radius-2 fit grid dense relative to the bandwidth, so the
        # minimum-norm interpolant tracks the kernel solution and the
        # remaining error is the Monte-Carlo feature gap
        axis = np.linspace(-2.0, 2.0, 15)
        grid = [np.array([a, b]) for a in axis for b in axis]
        fine = np.linspace(-1.5, 1.5, 31)
        eval_grid = [np.array([a, b]) for a in fine for b in fine]
        errs = {}
        for K in (200, 800):
            bank = FeatureBank.from_seed(decomposable_kernel(0.6, 2, 2), K,
                                         seed=11)
            weights = fit_feature_weights(bank, _target, grid)
            errs[K] = empirical_sup_error(bank, weights, _target, eval_grid)
        assert errs[800] < errs[200]
