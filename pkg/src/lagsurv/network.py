"""Scalar dense block: hand-rolled forward and reverse passes.

The block maps a flat batch of scalars through ``affine -> (batch norm) ->
tanh -> (dropout)`` hidden layers and a linear scalar output. The reverse
pass returns exact gradients for every trainable array; it is verified
against central finite differences by the gradient contract tests.
"""

from __future__ import annotations

import numpy as np

from .params import EvalMode, ParamSet

BN_EPS = 1e-5
BN_MOMENTUM = 0.1


def dense_forward(params: ParamSet, xs: np.ndarray, mode: EvalMode, rng=None):
    """Evaluate the block on a flat batch ``xs`` of shape (M,).

    Returns ``(out, cache)`` with out shape (M,). The cache carries every
    intermediate needed for dense_backward plus, in training mode with batch
    norm enabled, the per-layer batch statistics so the trainer can update
    the running statistics.
    """
    cfg = params.config
    training = mode is EvalMode.TRAINING
    a = np.asarray(xs, dtype=float).reshape(-1, 1)
    layers = []
    for i in range(len(cfg.hidden)):
        w = params.arrays[f"dense{i}_w"]
        b = params.arrays[f"dense{i}_b"]
        z = a @ w.T + b
        layer = {"a_in": a, "z": z}
        u = z
        if cfg.batch_norm:
            gamma = params.arrays[f"bn{i}_gamma"]
            beta = params.arrays[f"bn{i}_beta"]
            if training:
                mu = z.mean(axis=0)
                var = z.var(axis=0)
                layer["batch_mean"] = mu
                layer["batch_var"] = var
            else:
                mu = params.stats[f"bn{i}_mean"]
                var = params.stats[f"bn{i}_var"]
            std = np.sqrt(var + BN_EPS)
            zhat = (z - mu) / std
            u = gamma * zhat + beta
            layer["zhat"] = zhat
            layer["std"] = std
        act = np.tanh(u)
        layer["act"] = act
        if training and cfg.dropout > 0.0:
            if rng is None:
                raise ValueError("training-mode dropout requires an rng")
            keep = rng.random(act.shape) >= cfg.dropout
            act = act * keep / (1.0 - cfg.dropout)
            layer["drop_keep"] = keep
        a = act
        layers.append(layer)
    out = (a @ params.arrays["out_w"].T + params.arrays["out_b"])[:, 0]
    cache = {"layers": layers, "a_last": a, "training": training}
    return out, cache


def dense_backward(params: ParamSet, cache: dict, dout: np.ndarray) -> dict:
    """Gradients of sum(dout * block_output) w.r.t. every trainable array."""
    cfg = params.config
    grads = {}
    dy = np.asarray(dout, dtype=float).reshape(-1, 1)
    grads["out_w"] = dy.T @ cache["a_last"]
    grads["out_b"] = dy.sum(axis=0)
    da = dy @ params.arrays["out_w"]
    for i in reversed(range(len(cfg.hidden))):
        layer = cache["layers"][i]
        if "drop_keep" in layer:
            da = da * layer["drop_keep"] / (1.0 - cfg.dropout)
        du = da * (1.0 - layer["act"] ** 2)
        if cfg.batch_norm:
            gamma = params.arrays[f"bn{i}_gamma"]
            zhat = layer["zhat"]
            grads[f"bn{i}_gamma"] = (du * zhat).sum(axis=0)
            grads[f"bn{i}_beta"] = du.sum(axis=0)
            dzhat = du * gamma
            if cache["training"]:
                # batch statistics are themselves functions of z
                dz = (
                    dzhat
                    - dzhat.mean(axis=0)
                    - zhat * (dzhat * zhat).mean(axis=0)
                ) / layer["std"]
            else:
                dz = dzhat / layer["std"]
        else:
            dz = du
        grads[f"dense{i}_w"] = dz.T @ layer["a_in"]
        grads[f"dense{i}_b"] = dz.sum(axis=0)
        da = dz @ params.arrays[f"dense{i}_w"]
    return grads


def merged_batch_stats(params: ParamSet, cache: dict) -> dict:
    """EMA update of running normalization statistics from a training cache."""
    cfg = params.config
    if not (cfg.batch_norm and cache["training"]):
        return dict(params.stats)
    updates = {}
    for i in range(len(cfg.hidden)):
        layer = cache["layers"][i]
        updates[f"bn{i}_mean"] = (
            (1.0 - BN_MOMENTUM) * params.stats[f"bn{i}_mean"] + BN_MOMENTUM * layer["batch_mean"]
        )
        updates[f"bn{i}_var"] = (
            (1.0 - BN_MOMENTUM) * params.stats[f"bn{i}_var"] + BN_MOMENTUM * layer["batch_var"]
        )
    return updates
