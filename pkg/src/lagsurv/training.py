"""Training loops: stratified splits, projected Adam, sweeps, CV, bootstrap.

Every optimizer step is followed by projecting the lag kernel back to unit
Euclidean norm, so both identifiability constraints (f(0) = 0 by
construction, ||w|| = 1 by projection) hold after every update. Runs are
fully determined by (seed, data, config); cross-fit jobs (CV folds,
bootstrap replicates) derive their randomness from (seed, job index) so
they can run concurrently with sequential-identical results.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field as dataclass_field, replace

import numpy as np
from joblib import Parallel, delayed

from .data import ExposurePanel, SurvivalOutcomes, as_panel_array
from .errors import ConfigError, DataError, DegenerateKernelError, NumericError
from .evaluation import c_index, default_x_grid, fitted_curves
from .gradients import loss_and_grads
from .loss import LossValue, build_masks, total_loss
from .model import cumulative_effect, project_kernel
from .params import EvalMode, NetConfig, ParamSet, init_params, uniform_kernel

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    max_epochs: int = 500
    batch_size: int | None = None  # None = full batch
    patience: int = 20
    lambdas: tuple = (0.0,)
    net: NetConfig = dataclass_field(default_factory=NetConfig)
    seed: int = 0
    cv_folds: int = 5
    val_fraction: float = 0.1
    time_bins: int = 5

    def __post_init__(self):
        object.__setattr__(self, "lambdas", tuple(float(v) for v in self.lambdas))
        if self.learning_rate <= 0:
            raise ConfigError("learning rate must be positive")
        if self.max_epochs < 1 or self.patience < 1:
            raise ConfigError("max_epochs and patience must be positive")
        if self.batch_size is not None and self.batch_size < 1:
            raise ConfigError("batch_size must be positive or None for full batch")
        if any(v < 0 for v in self.lambdas):
            raise ConfigError("penalty strengths must be >= 0")
        if self.cv_folds < 2:
            raise ConfigError("cv_folds must be >= 2")
        if not 0.0 <= self.val_fraction < 1.0:
            raise ConfigError("val_fraction must be in [0, 1)")
        if self.time_bins < 1:
            raise ConfigError("time_bins must be >= 1")


@dataclass(frozen=True)
class SplitPlan:
    train_idx: np.ndarray
    test_idx: np.ndarray
    strata: np.ndarray


def _stratum_labels(outcomes: SurvivalOutcomes, time_bins: int) -> np.ndarray:
    """Event state x quantile bin of observed time."""
    qs = np.quantile(outcomes.time, np.linspace(0, 1, time_bins + 1)[1:-1])
    bins = np.searchsorted(qs, outcomes.time, side="right")
    return bins + time_bins * outcomes.event


def stratified_split(
    outcomes: SurvivalOutcomes, ratio: float = 0.9, time_bins: int = 5, seed: int = 0
) -> SplitPlan:
    """Seeded train/test split preserving event-by-survival-time strata.

    Within each stratum, floor(ratio * n) subjects go to train; singleton
    strata go to train with a warning.
    """
    n = len(outcomes)
    if n < 10:
        raise DataError(f"need at least 10 subjects to split, got {n}")
    if not 0.0 < ratio < 1.0:
        raise ConfigError("split ratio must be in (0, 1)")
    strata = _stratum_labels(outcomes, time_bins)
    rng = np.random.default_rng(seed)
    train, test = [], []
    for label in np.unique(strata):
        members = np.nonzero(strata == label)[0]
        if members.shape[0] == 1:
            warnings.warn(f"stratum {label} has a single subject; assigned to train", stacklevel=2)
            train.append(members)
            continue
        perm = rng.permutation(members)
        n_train = int(np.floor(ratio * members.shape[0]))
        train.append(perm[:n_train])
        test.append(perm[n_train:])
    train_idx = np.sort(np.concatenate(train)) if train else np.empty(0, dtype=int)
    test_idx = np.sort(np.concatenate(test)) if test else np.empty(0, dtype=int)
    return SplitPlan(train_idx=train_idx, test_idx=test_idx, strata=strata)


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    train: LossValue
    val: LossValue | None


@dataclass(frozen=True)
class FitResult:
    params: ParamSet
    history: list
    best_epoch: int
    kernel_reinits: int
    stopped_epoch: int


def _adam_step(arrays, grads, state, lr, t):
    new = {}
    for name, arr in arrays.items():
        g = grads[name]
        m = state["m"][name] = ADAM_BETA1 * state["m"][name] + (1 - ADAM_BETA1) * g
        v = state["v"][name] = ADAM_BETA2 * state["v"][name] + (1 - ADAM_BETA2) * g * g
        m_hat = m / (1 - ADAM_BETA1**t)
        v_hat = v / (1 - ADAM_BETA2**t)
        new[name] = arr - lr * m_hat / (np.sqrt(v_hat) + ADAM_EPS)
    return new


def _eval_losses(params, values, masks, strength) -> LossValue:
    field = cumulative_effect(params, values, mode=EvalMode.INFERENCE)
    return total_loss(field, masks, params.kernel, strength)


def fit(
    config: TrainConfig,
    panel,
    outcomes: SurvivalOutcomes,
    strength: float = 0.0,
    val_panel=None,
    val_outcomes: SurvivalOutcomes | None = None,
    step_callback=None,
) -> FitResult:
    """Projected first-order optimization of the total loss.

    The kernel is re-projected after every parameter update (re-initialized
    to the normalized uniform vector if it degenerates). Early stopping
    watches the validation survival part with the configured patience and
    the best-validation parameters are returned, not the last epoch's. When
    no validation data is given, a stratified val_fraction slice of the
    input is carved out (or, with val_fraction = 0, the training survival
    part is monitored).
    """
    values = as_panel_array(panel)
    if len(outcomes) != values.shape[0]:
        raise DataError("panel and outcomes disagree on the number of subjects")
    seeds = np.random.SeedSequence(config.seed).spawn(3)

    if val_panel is None and config.val_fraction > 0.0:
        plan = stratified_split(
            outcomes,
            ratio=1.0 - config.val_fraction,
            time_bins=config.time_bins,
            seed=seeds[0],
        )
        val_values = values[plan.test_idx]
        val_out = outcomes.subset(plan.test_idx)
        values = values[plan.train_idx]
        outcomes = outcomes.subset(plan.train_idx)
    elif val_panel is not None:
        if val_outcomes is None:
            raise ConfigError("val_panel requires val_outcomes")
        val_values = as_panel_array(val_panel)
        val_out = val_outcomes
    else:
        val_values, val_out = None, None

    horizon = values.shape[1]
    n = values.shape[0]
    if outcomes.n_events < 1:
        raise DataError("training data has no events")
    full_masks = build_masks(outcomes, horizon)
    val_masks = build_masks(val_out, val_values.shape[1]) if val_out is not None else None

    params = init_params(config.net)
    state = {
        "m": {k: np.zeros_like(v) for k, v in params.arrays.items()},
        "v": {k: np.zeros_like(v) for k, v in params.arrays.items()},
    }
    batch_rng = np.random.default_rng(seeds[1])
    dropout_rng = np.random.default_rng(seeds[2])

    history: list = []
    best_monitor = np.inf
    best_params = params.copy()
    best_epoch = -1
    wait = 0
    reinits = 0
    step = 0

    for epoch in range(config.max_epochs):
        if config.batch_size is None or config.batch_size >= n:
            batches = [np.arange(n)]
        else:
            perm = batch_rng.permutation(n)
            batches = [
                perm[i : i + config.batch_size] for i in range(0, n, config.batch_size)
            ]
        batch_losses = []
        for batch in batches:
            batch_out = outcomes.subset(batch)
            if batch_out.n_events < 1:
                warnings.warn("skipping batch with no events", stacklevel=2)
                continue
            masks = full_masks if batch.shape[0] == n else build_masks(batch_out, horizon)
            lv, grads, info = loss_and_grads(
                params, values[batch], masks, strength, mode=EvalMode.TRAINING, rng=dropout_rng
            )
            if not np.isfinite(lv.total):
                raise NumericError(
                    f"non-finite training loss at epoch {epoch} (survival={lv.survival_part}, "
                    f"penalty={lv.penalty_part})"
                )
            batch_losses.append(lv)
            step += 1
            new_arrays = _adam_step(params.arrays, grads, state, config.learning_rate, step)
            try:
                new_arrays["kernel"] = project_kernel(new_arrays["kernel"])
            except DegenerateKernelError:
                new_arrays["kernel"] = uniform_kernel(config.net.lag)
                reinits += 1
            params = replace(params, arrays=new_arrays, stats=info["stats"])
            if step_callback is not None:
                step_callback(params)

        # training record: event-weighted mean of the epoch's batch losses
        # (avoids a second full forward pass per epoch)
        m_total = sum(lv.m for lv in batch_losses)
        surv = sum(lv.survival_part * lv.m for lv in batch_losses) / m_total
        pen = float(np.mean([lv.penalty_part for lv in batch_losses]))
        train_lv = LossValue(surv, pen, surv + pen, m_total)
        val_lv = _eval_losses(params, val_values, val_masks, strength) if val_masks is not None else None
        history.append(EpochRecord(epoch=epoch, train=train_lv, val=val_lv))
        monitor = val_lv.survival_part if val_lv is not None else train_lv.survival_part
        if not np.isfinite(monitor):
            raise NumericError(f"non-finite monitored loss at epoch {epoch}")
        if monitor < best_monitor:
            best_monitor = monitor
            best_params = params.copy()
            best_epoch = epoch
            wait = 0
        else:
            wait += 1
            if wait >= config.patience:
                break

    return FitResult(
        params=best_params,
        history=history,
        best_epoch=best_epoch,
        kernel_reinits=reinits,
        stopped_epoch=history[-1].epoch if history else -1,
    )


@dataclass(frozen=True)
class SweepRow:
    strength: float
    params: ParamSet
    test_loss: float
    test_c_index: float
    best_epoch: int


@dataclass(frozen=True)
class SweepResult:
    rows: list
    split: SplitPlan


def smoothness_sweep(config: TrainConfig, panel, outcomes: SurvivalOutcomes) -> SweepResult:
    """One fit per penalty strength on the same train/test split.

    Emits one row per strength with the penalty-free test loss and test
    concordance; selection among strengths is deliberately left to the
    caller.
    """
    if not config.lambdas:
        raise ConfigError("lambdas list must be nonempty")
    values = as_panel_array(panel)
    split = stratified_split(outcomes, ratio=0.9, time_bins=config.time_bins, seed=config.seed)
    train_values, train_out = values[split.train_idx], outcomes.subset(split.train_idx)
    test_values, test_out = values[split.test_idx], outcomes.subset(split.test_idx)
    test_masks = build_masks(test_out, test_values.shape[1])

    rows = []
    for strength in config.lambdas:
        result = fit(config, train_values, train_out, strength=strength)
        test_field = cumulative_effect(result.params, test_values, mode=EvalMode.INFERENCE)
        rows.append(
            SweepRow(
                strength=strength,
                params=result.params,
                test_loss=total_loss(test_field, test_masks, result.params.kernel, 0.0).survival_part,
                test_c_index=c_index(test_field, test_out),
                best_epoch=result.best_epoch,
            )
        )
    return SweepResult(rows=rows, split=split)


def _fold_assignments(outcomes: SurvivalOutcomes, folds: int, time_bins: int, seed: int) -> np.ndarray:
    """Stratified fold labels: round-robin within shuffled strata."""
    strata = _stratum_labels(outcomes, time_bins)
    rng = np.random.default_rng(seed)
    fold = np.empty(len(outcomes), dtype=int)
    offset = 0
    for label in np.unique(strata):
        members = np.nonzero(strata == label)[0]
        perm = rng.permutation(members)
        fold[perm] = (np.arange(members.shape[0]) + offset) % folds
        offset += members.shape[0]
    return fold


_CV_KEYS = {"learning_rate", "max_epochs", "batch_size", "patience", "hidden", "dropout", "batch_norm"}


def _apply_setting(config: TrainConfig, setting: dict) -> TrainConfig:
    unknown = set(setting) - _CV_KEYS
    if unknown:
        raise ConfigError(
            f"unknown or disallowed grid keys {sorted(unknown)} (penalty strength is swept, not tuned)"
        )
    net_keys = {k: v for k, v in setting.items() if k in {"hidden", "dropout", "batch_norm"}}
    train_keys = {k: v for k, v in setting.items() if k not in net_keys}
    net = replace(config.net, **{k: tuple(v) if k == "hidden" else v for k, v in net_keys.items()}) if net_keys else config.net
    return replace(config, net=net, **train_keys)


@dataclass(frozen=True)
class CvRow:
    setting: dict
    mean_val_loss: float
    folds_used: int


@dataclass(frozen=True)
class CvResult:
    best: dict
    table: list


def cross_validate(config: TrainConfig, grid, panel, outcomes: SurvivalOutcomes) -> CvResult:
    """K-fold selection over net/optimizer settings by mean validation
    survival loss; folds are stratified and fold fits are unpenalized."""
    grid = list(grid)
    if not grid:
        raise ConfigError("setting grid must be nonempty")
    values = as_panel_array(panel)
    folds = _fold_assignments(outcomes, config.cv_folds, config.time_bins, config.seed)

    table = []
    for setting in grid:
        cfg = _apply_setting(config, setting)
        fold_losses = []
        for k in range(config.cv_folds):
            val_mask = folds == k
            train_mask = ~val_mask
            val_out = outcomes.subset(val_mask)
            if val_out.n_events < 1 or outcomes.subset(train_mask).n_events < 1:
                warnings.warn(f"fold {k} has no events on one side; skipped", stacklevel=2)
                continue
            try:
                result = fit(
                    cfg,
                    values[train_mask],
                    outcomes.subset(train_mask),
                    strength=0.0,
                    val_panel=values[val_mask],
                    val_outcomes=val_out,
                )
            except NumericError:
                fold_losses.append(np.inf)
                continue
            best = min(rec.val.survival_part for rec in result.history if rec.val is not None)
            fold_losses.append(best)
        if not fold_losses:
            raise DataError("every fold was skipped for a grid setting; not enough events")
        table.append(
            CvRow(setting=setting, mean_val_loss=float(np.mean(fold_losses)), folds_used=len(fold_losses))
        )
    best_row = min(table, key=lambda row: row.mean_val_loss)
    return CvResult(best=best_row.setting, table=table)


@dataclass(frozen=True)
class CiBands:
    x_grid: np.ndarray
    f_point: np.ndarray
    f_lo: np.ndarray
    f_hi: np.ndarray
    l_grid: np.ndarray
    w_point: np.ndarray
    w_lo: np.ndarray
    w_hi: np.ndarray
    n_replicates: int
    n_failed: int


def _bootstrap_replicate(config, values, outcomes, strength, x_grid, l_grid, rep_seed):
    """One resample-with-replacement refit; returns (f curve, w curve) or None."""
    children = np.random.SeedSequence(rep_seed).spawn(2)
    rng = np.random.default_rng(children[0])
    idx = rng.integers(0, values.shape[0], size=values.shape[0])
    cfg = replace(config, seed=int(children[1].generate_state(1)[0]))
    try:
        result = fit(cfg, values[idx], outcomes.subset(idx), strength=strength)
        f_vals, w_vals = fitted_curves(result.params, x_grid, l_grid)
    except (NumericError, DataError):
        return None
    if not (np.all(np.isfinite(f_vals)) and np.all(np.isfinite(w_vals))):
        return None
    return f_vals, w_vals


def bootstrap_bands(
    config: TrainConfig,
    panel,
    outcomes: SurvivalOutcomes,
    b: int = 100,
    x_grid=None,
    l_grid=None,
    strength: float | None = None,
    n_jobs: int = 1,
) -> CiBands:
    """Subject-level resampling with full refits; 2.5/97.5 percentile bands
    for the exposure curve and the lag kernel.

    Replicate randomness derives from (seed, replicate index), so parallel
    execution is bit-identical to sequential. Replicates that fail
    numerically are excluded; more than 10% failures is an error.
    """
    if b < 2:
        raise ConfigError("need at least 2 bootstrap replicates")
    if strength is None:
        strength = config.lambdas[0]
    values = as_panel_array(panel)
    if x_grid is None:
        x_grid = default_x_grid()
    if l_grid is None:
        l_grid = np.arange(config.net.lag + 1)
    x_grid = np.asarray(x_grid, dtype=float)
    l_grid = np.asarray(l_grid, dtype=int)

    point = fit(config, values, outcomes, strength=strength)
    f_point, w_point = fitted_curves(point.params, x_grid, l_grid)

    rep_seeds = [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(config.seed).spawn(b)]
    runs = Parallel(n_jobs=n_jobs)(
        delayed(_bootstrap_replicate)(config, values, outcomes, strength, x_grid, l_grid, s)
        for s in rep_seeds
    )
    kept = [r for r in runs if r is not None]
    n_failed = b - len(kept)
    if n_failed > 0.1 * b:
        raise NumericError(f"{n_failed}/{b} bootstrap replicates failed")
    f_stack = np.stack([r[0] for r in kept])
    w_stack = np.stack([r[1] for r in kept])
    f_lo, f_hi = np.percentile(f_stack, [2.5, 97.5], axis=0)
    w_lo, w_hi = np.percentile(w_stack, [2.5, 97.5], axis=0)
    return CiBands(
        x_grid=x_grid,
        f_point=f_point,
        f_lo=f_lo,
        f_hi=f_hi,
        l_grid=l_grid,
        w_point=w_point,
        w_lo=w_lo,
        w_hi=w_hi,
        n_replicates=b,
        n_failed=n_failed,
    )
