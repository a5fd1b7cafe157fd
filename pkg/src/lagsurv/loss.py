"""Event/risk masks, Efron-tied negative log partial likelihood, kernel penalty.

The survival part at each event time t compares the event subjects D(t)
against the at-risk set R(t) = {i : time_i >= t}:

    l = -(1/m) * sum_{t: d_t > 0} [ sum_{i in D(t)} h[i,t]
          - sum_{j=1..d_t} log( sum_{i in R(t)} e^{h[i,t]}
                                - (j-1)/d_t * sum_{i in D(t)} e^{h[i,t]} ) ]

with m the total event count. All exponentials are max-shifted within each
risk set; after shifting, the Efron log arguments are bounded below by
1/d_t, so the clamp floor exists only as a belt-and-braces guard (it warns
if it ever fires).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .data import SurvivalOutcomes
from .errors import DataError, NumericError

CLAMP_FLOOR = 1e-300


@dataclass(frozen=True)
class RiskMasks:
    """Boolean (N, T) masks: event[i,t] iff subject i events at t+1,
    risk[i,t] iff subject i is still observed at t+1."""

    event: np.ndarray
    risk: np.ndarray

    @property
    def events_per_time(self) -> np.ndarray:
        return self.event.sum(axis=0)

    @property
    def n_events(self) -> int:
        return int(self.event.sum())


@dataclass(frozen=True)
class LossValue:
    survival_part: float
    penalty_part: float
    total: float
    m: int


def build_masks(outcomes: SurvivalOutcomes, horizon: int) -> RiskMasks:
    """Masks from observed times and event indicators; times must lie in 1..T."""
    if np.any(outcomes.time > horizon):
        bad = int(outcomes.time.max())
        raise DataError(f"observed time {bad} outside horizon 1..{horizon}")
    ts = np.arange(1, horizon + 1)
    risk = outcomes.time[:, None] >= ts[None, :]
    event = np.zeros_like(risk)
    which = np.nonzero(outcomes.event == 1)[0]
    event[which, outcomes.time[which] - 1] = True
    return RiskMasks(event=event, risk=risk)


def _efron(field: np.ndarray, masks: RiskMasks, need_grad: bool):
    field = np.asarray(field, dtype=float)
    m = masks.n_events
    if m == 0:
        raise DataError("loss undefined: no events in the batch")
    d_t = masks.events_per_time
    total = 0.0
    grad = np.zeros_like(field) if need_grad else None
    clamped = 0
    for t in np.nonzero(d_t > 0)[0]:
        at_risk = masks.risk[:, t]
        in_event = masks.event[:, t]
        h_risk = field[at_risk, t]
        if not np.all(np.isfinite(h_risk)):
            raise NumericError(f"non-finite log-hazard inside the risk set at t={t + 1}")
        d = int(d_t[t])
        shift = h_risk.max()
        e_risk = np.exp(h_risk - shift)
        phi_risk = e_risk.sum()
        e_event = np.exp(field[in_event, t] - shift)
        phi_event = e_event.sum()
        alpha = np.arange(d) / d
        denom = phi_risk - alpha * phi_event
        low = denom < CLAMP_FLOOR
        if np.any(low):
            clamped += int(low.sum())
            denom = np.maximum(denom, CLAMP_FLOOR)
        total += field[in_event, t].sum() - (d * shift + np.log(denom).sum())
        if need_grad:
            inv = 1.0 / denom
            sum_inv = inv.sum()
            sum_alpha_inv = (alpha * inv).sum()
            col = np.zeros(field.shape[0])
            col[at_risk] = e_risk * (sum_inv / m)
            col[in_event] -= (1.0 + e_event * sum_alpha_inv) / m
            grad[:, t] += col
    loss = -total / m
    if clamped:
        warnings.warn(f"Efron log argument clamped {clamped} time(s)", stacklevel=3)
    return loss, grad, clamped


def efron_loss(field: np.ndarray, masks: RiskMasks) -> float:
    """Survival part of the loss (penalty-free), max-shifted for overflow safety."""
    loss, _, _ = _efron(field, masks, need_grad=False)
    return loss


def efron_loss_grad(field: np.ndarray, masks: RiskMasks):
    """(loss, d loss / d field, clamp count) in one pass."""
    return _efron(field, masks, need_grad=True)


def smoothness_penalty(kernel: np.ndarray, strength: float) -> float:
    """Curvature penalty on the lag kernel: scaled mean squared second
    difference, zero for kernels with fewer than three weights. Linear lag
    trends are free; only curvature is charged."""
    if strength < 0:
        raise DataError("penalty strength must be >= 0")
    kernel = np.asarray(kernel, dtype=float)
    if strength == 0.0 or kernel.shape[0] < 3:
        return 0.0
    second = kernel[2:] - 2.0 * kernel[1:-1] + kernel[:-2]
    return strength * float(np.sum(second**2)) / (kernel.shape[0] - 1)


def smoothness_penalty_grad(kernel: np.ndarray, strength: float) -> np.ndarray:
    kernel = np.asarray(kernel, dtype=float)
    grad = np.zeros_like(kernel)
    if strength == 0.0 or kernel.shape[0] < 3:
        return grad
    second = kernel[2:] - 2.0 * kernel[1:-1] + kernel[:-2]
    coeff = 2.0 * strength / (kernel.shape[0] - 1)
    grad[2:] += coeff * second
    grad[1:-1] -= 2.0 * coeff * second
    grad[:-2] += coeff * second
    return grad


def total_loss(field: np.ndarray, masks: RiskMasks, kernel: np.ndarray, strength: float) -> LossValue:
    """Survival part plus kernel penalty, reported separately so test-set
    losses stay comparable across penalty strengths."""
    survival = efron_loss(field, masks)
    penalty = smoothness_penalty(kernel, strength)
    return LossValue(
        survival_part=survival,
        penalty_part=penalty,
        total=survival + penalty,
        m=masks.n_events,
    )
