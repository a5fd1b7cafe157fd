"""Forward model: anchored exposure curve, causal lag convolution, hazards.

The pointwise exposure curve is ``f(x) = g(x) - g(0) + x``, where g is the
dense block; subtracting g at zero input pins f(0) = 0 (no exposure
contributes nothing), which also makes causal zero-padding of the
convolution exactly consistent with pre-observation history. The lag kernel
carries the remaining scale freedom and is kept at unit Euclidean norm by
``project_kernel``.
"""

from __future__ import annotations

import warnings

import numpy as np

from .data import as_panel_array
from .errors import DataError, DegenerateKernelError, NumericError
from .network import dense_forward
from .params import EvalMode, ParamSet, as_mode

KERNEL_NORM_TOL = 1e-9


def exposure_forward(params: ParamSet, x, mode=EvalMode.INFERENCE, rng=None) -> np.ndarray:
    """Apply f(x) = g(x) - g(0) + x elementwise.

    g(0) is always evaluated in inference mode, so in inference mode
    f(0) = 0 holds exactly (same forward computation subtracted from
    itself). Inputs outside [0, 1] are accepted with an extrapolation
    warning; non-finite inputs are rejected.
    """
    mode = as_mode(mode)
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DataError("exposure input contains non-finite values")
    if arr.size and (arr.min() < 0.0 or arr.max() > 1.0):
        warnings.warn("exposure input outside [0, 1]; the fitted curve extrapolates", stacklevel=2)
    flat = arr.reshape(-1)
    gx, _ = dense_forward(params, flat, mode, rng=rng)
    g0, _ = dense_forward(params, np.zeros(1), EvalMode.INFERENCE)
    f = gx - g0[0] + flat
    # pin f(0) = 0 exactly: g(0) - g(0) cancels analytically, but batched and
    # single-row BLAS paths may disagree in the last bit
    f[flat == 0.0] = 0.0
    return f.reshape(arr.shape) if arr.shape else float(f[0])


def lag_convolve(kernel: np.ndarray, f_series: np.ndarray) -> np.ndarray:
    """Causal convolution: out[t] = sum_l kernel[l] * f_series[t-l].

    Positions before the series start are treated as zero; there is no bias
    and no wrap-around. Accepts a (T,) series or an (N, T) stack.
    """
    kernel = np.asarray(kernel, dtype=float)
    series = np.asarray(f_series, dtype=float)
    single = series.ndim == 1
    s = series[None, :] if single else series
    horizon = s.shape[1]
    if horizon < 1:
        raise DataError("series must have length >= 1")
    out = np.zeros_like(s)
    for lag in range(min(kernel.shape[0], horizon)):
        out[:, lag:] += kernel[lag] * s[:, : horizon - lag]
    return out[0] if single else out


def conv_grad_kernel(dout: np.ndarray, f_series: np.ndarray, n_weights: int) -> np.ndarray:
    """Gradient of sum(dout * lag_convolve(kernel, f_series)) w.r.t. kernel."""
    grad = np.zeros(n_weights)
    horizon = f_series.shape[1]
    for lag in range(min(n_weights, horizon)):
        grad[lag] = np.sum(dout[:, lag:] * f_series[:, : horizon - lag])
    return grad


def conv_grad_series(dout: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """Gradient of sum(dout * lag_convolve(kernel, f_series)) w.r.t. the series."""
    grad = np.zeros_like(dout)
    horizon = dout.shape[1]
    for lag in range(min(kernel.shape[0], horizon)):
        grad[:, : horizon - lag] += kernel[lag] * dout[:, lag:]
    return grad


def cumulative_effect(params: ParamSet, panel, mode=EvalMode.INFERENCE, rng=None) -> np.ndarray:
    """Per-subject, per-time log-hazard: lag-convolved exposure effects.

    The baseline hazard is never materialized; the partial likelihood
    cancels it.
    """
    values = as_panel_array(panel)
    f = exposure_forward(params, values, mode=mode, rng=rng)
    field = lag_convolve(params.kernel, f)
    if not np.all(np.isfinite(field)):
        raise NumericError("log-hazard field contains non-finite values")
    return field


def project_kernel(kernel: np.ndarray) -> np.ndarray:
    """Rescale the kernel to unit Euclidean norm (idempotent, sign preserving)."""
    kernel = np.asarray(kernel, dtype=float)
    norm = float(np.linalg.norm(kernel))
    if not np.isfinite(norm) or norm < 1e-150:
        raise DegenerateKernelError("lag kernel is (numerically) the zero vector")
    return kernel / norm
