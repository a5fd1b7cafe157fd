import numpy as np
import pytest

from lagsurv import (
    DegenerateKernelError,
    EvalMode,
    NetConfig,
    cumulative_effect,
    exposure_forward,
    init_params,
    lag_convolve,
    project_kernel,
)
from lagsurv.errors import DataError


def brute_force_field(kernel, f_values):
    """Naive triple loop over (subject, time, lag) with zero-padding."""
    n, horizon = f_values.shape
    out = np.zeros((n, horizon))
    for i in range(n):
        for t in range(horizon):
            for lag, w in enumerate(kernel):
                if t - lag >= 0:
                    out[i, t] += w * f_values[i, t - lag]
    return out


class TestExposureForward:
    def test_zero_input_is_anchored(self):
        params = init_params(NetConfig(hidden=(16, 16), lag=5, seed=9))
        assert exposure_forward(params, 0.0) == 0.0

    def test_anchoring_holds_for_many_seeds(self):
        for seed in range(20):
            params = init_params(NetConfig(hidden=(8, 4), lag=3, seed=seed))
            assert abs(exposure_forward(params, 0.0)) < 1e-9

    def test_zero_weights_give_identity(self):
        params = init_params(NetConfig(hidden=(8, 8), lag=2, seed=0))
        params = params.with_arrays(
            {name: np.zeros_like(arr) for name, arr in params.arrays.items() if name != "kernel"}
        )
        x = np.linspace(0, 1, 11)
        assert np.allclose(exposure_forward(params, x), x, atol=1e-15)

    def test_matches_manual_composition(self):
        # recompute g(0.5) and g(0) from the layer primitives by hand
        params = init_params(NetConfig(hidden=(5, 4), lag=2, seed=3))

        def g(x):
            a = np.array([[x]])
            for i in range(2):
                a = np.tanh(a @ params.arrays[f"dense{i}_w"].T + params.arrays[f"dense{i}_b"])
            return (a @ params.arrays["out_w"].T + params.arrays["out_b"])[0, 0]

        expected = g(0.5) - g(0.0) + 0.5
        assert exposure_forward(params, 0.5) == pytest.approx(expected, abs=1e-12)

    def test_nonfinite_input_rejected(self):
        params = init_params(NetConfig(hidden=(4,), lag=1, seed=0))
        with pytest.raises(DataError):
            exposure_forward(params, np.array([0.2, np.nan]))

    def test_out_of_range_warns_but_computes(self):
        params = init_params(NetConfig(hidden=(4,), lag=1, seed=0))
        with pytest.warns(UserWarning, match="extrapolat"):
            out = exposure_forward(params, np.array([1.5]))
        assert np.isfinite(out).all()

    def test_inference_mode_is_deterministic_with_dropout(self):
        params = init_params(NetConfig(hidden=(8, 8), lag=2, seed=4, dropout=0.5))
        x = np.linspace(0, 1, 7)
        a = exposure_forward(params, x, mode=EvalMode.INFERENCE)
        b = exposure_forward(params, x, mode=EvalMode.INFERENCE)
        assert np.array_equal(a, b)

    def test_training_mode_dropout_varies(self):
        params = init_params(NetConfig(hidden=(8, 8), lag=2, seed=4, dropout=0.5))
        x = np.linspace(0.1, 1, 7)
        rng = np.random.default_rng(0)
        a = exposure_forward(params, x, mode=EvalMode.TRAINING, rng=rng)
        b = exposure_forward(params, x, mode=EvalMode.TRAINING, rng=rng)
        assert not np.array_equal(a, b)


class TestLagConvolve:
    def test_identity_kernel(self):
        series = np.array([2.0, -1.0, 0.5, 3.0])
        kernel = np.array([1.0, 0.0, 0.0])
        assert np.array_equal(lag_convolve(kernel, series), series)

    def test_constant_signal_past_window(self):
        kernel = np.array([0.3, -0.2, 0.5])
        series = np.full(10, 4.0)
        out = lag_convolve(kernel, series)
        assert np.allclose(out[2:], 4.0 * kernel.sum())

    def test_hand_convolution(self):
        # out[0] = 0.6*1; out[1] = 0.6*2 + 0.8*1; out[2] = 0.6*3 + 0.8*2
        out = lag_convolve(np.array([0.6, 0.8]), np.array([1.0, 2.0, 3.0]))
        assert np.allclose(out, [0.6, 2.0, 3.4], atol=1e-15)

    def test_shift_sensitivity_checks_padding(self):
        # adding c to the series moves out[t > L] by exactly c * sum(kernel);
        # wrap-around or reflective padding would break this
        rng = np.random.default_rng(5)
        kernel = rng.normal(size=4)
        series = rng.normal(size=(3, 12))
        c = 0.7
        base = lag_convolve(kernel, series)
        shifted = lag_convolve(kernel, series + c)
        delta = shifted[:, 3:] - base[:, 3:]
        assert np.allclose(delta, c * kernel.sum(), atol=1e-12)

    def test_scale_invariance_of_composition(self):
        rng = np.random.default_rng(6)
        kernel = rng.normal(size=5)
        series = rng.normal(size=(4, 15))
        base = lag_convolve(kernel, series)
        for k in (-2.0, 0.5, 10.0):
            rescaled = lag_convolve(kernel / k, k * series)
            assert np.max(np.abs(rescaled - base)) < 1e-9

    def test_kernel_longer_than_series(self):
        out = lag_convolve(np.array([1.0, 2.0, 3.0, 4.0]), np.array([1.0, 1.0]))
        assert np.allclose(out, [1.0, 3.0])


class TestCumulativeEffect:
    def test_zero_panel_gives_zero_field(self):
        params = init_params(NetConfig(hidden=(8, 8), lag=4, seed=2))
        field = cumulative_effect(params, np.zeros((3, 9)))
        assert np.max(np.abs(field)) < 1e-12

    def test_identity_composition(self):
        params = init_params(NetConfig(hidden=(8, 8), lag=3, seed=2))
        zeroed = {
            name: np.zeros_like(arr) for name, arr in params.arrays.items() if name != "kernel"
        }
        delta = np.zeros(4)
        delta[0] = 1.0
        params = params.with_arrays({**zeroed, "kernel": delta})
        x = np.random.default_rng(0).random((2, 8))
        assert np.allclose(cumulative_effect(params, x), x, atol=1e-14)

    def test_matches_brute_force(self):
        params = init_params(NetConfig(hidden=(6, 5), lag=2, seed=8))
        x = np.random.default_rng(1).random((2, 5))
        f = exposure_forward(params, x)
        expected = brute_force_field(params.kernel, f)
        assert np.allclose(cumulative_effect(params, x), expected, atol=1e-12)

    def test_causality(self):
        # perturbing x[i][t0] may move h[i][t] only for t in [t0, t0+L]
        params = init_params(NetConfig(hidden=(6, 6), lag=3, seed=12))
        rng = np.random.default_rng(2)
        x = rng.random((1, 12))
        base = cumulative_effect(params, x)
        t0 = 4
        bumped = x.copy()
        bumped[0, t0] += 0.1
        moved = np.nonzero(np.abs(cumulative_effect(params, bumped) - base)[0] > 1e-13)[0]
        assert moved.size > 0
        assert moved.min() >= t0
        assert moved.max() <= t0 + 3


class TestProjectKernel:
    def test_three_four_five(self):
        assert np.allclose(project_kernel(np.array([3.0, 4.0])), [0.6, 0.8])

    def test_idempotent(self):
        rng = np.random.default_rng(3)
        for _ in range(10):
            w = rng.normal(size=6)
            once = project_kernel(w)
            assert np.max(np.abs(project_kernel(once) - once)) < 1e-12

    def test_sign_preserved(self):
        assert np.array_equal(project_kernel(np.array([-1.0, 0.0, 0.0])), [-1.0, 0.0, 0.0])

    def test_zero_vector_rejected(self):
        with pytest.raises(DegenerateKernelError):
            project_kernel(np.zeros(4))
