import numpy as np
import pytest

from rfadapt.adaptation import (NNParams, nn_forward, nn_jacobian,
                                nn_update_rhs, swish)


def reference_forward(params, x):
    """Straightforward loop reimplementation used as the oracle."""
    width = params.W.shape[0]
    hidden = np.zeros(width)
    for k in range(width):
        z = sum(params.W[k, j] * x[j] for j in range(x.size))
        z += params.b_hidden[k]
        hidden[k] = z / (1.0 + np.exp(-z))
    out = params.b_out.copy()
    for i in range(params.V.shape[0]):
        for k in range(width):
            out[i] += params.V[i, k] * hidden[k]
    return out


def random_params(n, d, width, rng):
    return NNParams(W=rng.normal(size=(width, n)),
                    b_hidden=rng.normal(size=width),
                    V=rng.normal(size=(d, width)),
                    b_out=rng.normal(size=d))


def test_zero_network_outputs_zero():
    params = NNParams(W=np.zeros((4, 3)), b_hidden=np.zeros(4),
                      V=np.zeros((2, 4)), b_out=np.zeros(2))
    assert not nn_forward(params, np.ones(3)).any()


def test_swish_at_origin_leaves_output_bias(rng):
    assert swish(np.array([0.0]))[0] == 0.0
    params = random_params(3, 2, 4, rng)
    params.b_hidden = -params.W @ np.ones(3)  # zero preactivation at x = 1
    np.testing.assert_allclose(nn_forward(params, np.ones(3)), params.b_out,
                               atol=1e-14)


def test_forward_matches_reference(rng):
    params = random_params(3, 2, 4, rng)
    x = rng.normal(size=3)
    np.testing.assert_allclose(nn_forward(params, x),
                               reference_forward(params, x), atol=1e-12)


def test_initialization_scheme():
    rng = np.random.default_rng(0)
    params = NNParams.init(5, 5, 32, rng)
    assert not params.V.any() and not params.b_out.any()
    assert not nn_forward(params, rng.normal(size=5)).any()
    assert params.W.std() == pytest.approx(1 / np.sqrt(5), rel=0.2)


def test_flatten_round_trip(rng):
    params = random_params(4, 3, 8, rng)
    vec = params.flatten()
    back = NNParams.unflatten(vec, 4, 3, 8)
    np.testing.assert_array_equal(back.flatten(), vec)
    with pytest.raises(ValueError):
        NNParams.unflatten(vec[:-1], 4, 3, 8)


@pytest.mark.parametrize("width", [4, 32])
def test_jacobian_matches_finite_differences(width, rng):
    n, d = 3, 3
    params = random_params(n, d, width, rng)
    x = rng.normal(size=n)
    J = nn_jacobian(params, x)
    vec = params.flatten()
    h = 1e-6
    for col in rng.choice(vec.size, size=min(40, vec.size), replace=False):
        vp, vm = vec.copy(), vec.copy()
        vp[col] += h
        vm[col] -= h
        fd = (nn_forward(NNParams.unflatten(vp, n, d, width), x)
              - nn_forward(NNParams.unflatten(vm, n, d, width), x)) / (2 * h)
        scale = max(1.0, np.abs(J[:, col]).max())
        np.testing.assert_allclose(J[:, col], fd, atol=1e-5 * scale)


def test_update_rhs_is_minus_gamma_jacobian_transpose(rng):
    n, d, width = 3, 3, 6
    params = random_params(n, d, width, rng)
    x = rng.normal(size=n)
    g_e = rng.normal(size=(d, d))
    gradQ = rng.normal(size=d)
    gamma = 10.0
    rate = nn_update_rhs(params, x, g_e, gradQ, gamma)
    expected = -gamma * nn_jacobian(params, x).T @ (g_e.T @ gradQ)
    np.testing.assert_allclose(rate, expected, atol=1e-12)


def test_zero_error_signal_freezes(rng):
    params = random_params(2, 2, 4, rng)
    rate = nn_update_rhs(params, rng.normal(size=2), np.eye(2), np.zeros(2),
                         10.0)
    assert not rate.any()


def test_nonpositive_gamma_rejected(rng):
    params = random_params(2, 2, 4, rng)
    with pytest.raises(ValueError):
        nn_update_rhs(params, np.zeros(2), np.eye(2), np.zeros(2), 0.0)
