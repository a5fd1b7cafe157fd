"""Parameter registry: named arrays, evaluation modes, init, persistence.

A ParamSet bundles every trainable array of the model (dense-block weights
and biases, the lag kernel) plus optional non-trainable normalization
statistics. ParamSets are treated as immutable: updates go through
``with_arrays``/``with_stats``, which return new instances, so concurrent
readers are always safe.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError, DataError

FORMAT_VERSION = 1


class EvalMode(enum.Enum):
    TRAINING = "training"
    INFERENCE = "inference"


def as_mode(mode) -> EvalMode:
    if isinstance(mode, EvalMode):
        return mode
    try:
        return EvalMode(mode)
    except ValueError:
        raise ConfigError(f"unknown evaluation mode {mode!r}") from None


@dataclass(frozen=True)
class NetConfig:
    """Dense-block topology plus the lag window and the init seed.

    ``hidden`` lists the hidden-layer widths of the scalar-in/scalar-out
    dense block; ``lag`` is the maximum delay L, so the kernel has L+1
    entries. Dropout and batch normalization are opt-in regularizers, off by
    default; inference mode disables dropout and uses running statistics.
    """

    hidden: tuple = (32, 32)
    lag: int = 20
    seed: int = 0
    dropout: float = 0.0
    batch_norm: bool = False

    def __post_init__(self):
        object.__setattr__(self, "hidden", tuple(int(w) for w in self.hidden))
        if len(self.hidden) == 0:
            raise ConfigError("at least one hidden layer width is required")
        if any(w < 1 for w in self.hidden):
            raise ConfigError(f"zero-width layer in {self.hidden}")
        if self.lag < 0:
            raise ConfigError("lag window must be >= 0")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError("dropout rate must be in [0, 1)")

    @property
    def layer_sizes(self) -> list:
        return [1, *self.hidden, 1]


@dataclass(frozen=True)
class ParamSet:
    config: NetConfig
    arrays: dict = field(default_factory=dict)
    stats: dict = field(default_factory=dict)

    @property
    def kernel(self) -> np.ndarray:
        return self.arrays["kernel"]

    def names(self) -> list:
        return list(self.arrays)

    def with_arrays(self, updates: dict) -> "ParamSet":
        new = dict(self.arrays)
        for name, arr in updates.items():
            if name not in new:
                raise ConfigError(f"unknown parameter {name!r}")
            if new[name].shape != np.shape(arr):
                raise ConfigError(
                    f"shape mismatch for {name!r}: {new[name].shape} vs {np.shape(arr)}"
                )
            new[name] = np.asarray(arr, dtype=float)
        return replace(self, arrays=new)

    def with_stats(self, updates: dict) -> "ParamSet":
        new = dict(self.stats)
        new.update({k: np.asarray(v, dtype=float) for k, v in updates.items()})
        return replace(self, stats=new)

    def copy(self) -> "ParamSet":
        return replace(
            self,
            arrays={k: v.copy() for k, v in self.arrays.items()},
            stats={k: v.copy() for k, v in self.stats.items()},
        )


def init_params(config: NetConfig) -> ParamSet:
    """Build a fresh ParamSet: fan-in-scaled symmetric dense init, zero
    biases, and a lag kernel starting at the normalized uniform vector (the
    least-informative unit-norm starting point). Pure function of config."""
    rng = np.random.default_rng(config.seed)
    sizes = config.layer_sizes
    arrays: dict = {}
    for i in range(len(config.hidden)):
        fan_in = sizes[i]
        bound = 1.0 / np.sqrt(fan_in)
        arrays[f"dense{i}_w"] = rng.uniform(-bound, bound, size=(sizes[i + 1], fan_in))
        arrays[f"dense{i}_b"] = np.zeros(sizes[i + 1])
        if config.batch_norm:
            arrays[f"bn{i}_gamma"] = np.ones(sizes[i + 1])
            arrays[f"bn{i}_beta"] = np.zeros(sizes[i + 1])
    fan_in = sizes[-2]
    bound = 1.0 / np.sqrt(fan_in)
    arrays["out_w"] = rng.uniform(-bound, bound, size=(1, fan_in))
    arrays["out_b"] = np.zeros(1)
    arrays["kernel"] = uniform_kernel(config.lag)

    stats = {}
    if config.batch_norm:
        for i, width in enumerate(config.hidden):
            stats[f"bn{i}_mean"] = np.zeros(width)
            stats[f"bn{i}_var"] = np.ones(width)
    return ParamSet(config=config, arrays=arrays, stats=stats)


def uniform_kernel(lag: int) -> np.ndarray:
    return np.full(lag + 1, 1.0 / np.sqrt(lag + 1))


def save_params(path, params: ParamSet, seed: int | None = None):
    """Persist a ParamSet as a single JSON document.

    Floats are written with Python's shortest round-trip repr, so a reload
    is bit-exact.
    """
    doc = {
        "format_version": FORMAT_VERSION,
        "seed": int(params.config.seed if seed is None else seed),
        "net_config": {
            "hidden": list(params.config.hidden),
            "lag": params.config.lag,
            "seed": params.config.seed,
            "dropout": params.config.dropout,
            "batch_norm": params.config.batch_norm,
        },
        "params": {
            name: {"shape": list(arr.shape), "data": [float(v) for v in arr.ravel()]}
            for name, arr in params.arrays.items()
        },
        "stats": {
            name: {"shape": list(arr.shape), "data": [float(v) for v in arr.ravel()]}
            for name, arr in params.stats.items()
        },
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def load_params(path) -> ParamSet:
    """Load a persisted ParamSet, validating names and shapes."""
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}: not a valid model document: {exc}") from None
    if doc.get("format_version") != FORMAT_VERSION:
        raise DataError(f"{path}: unsupported format version {doc.get('format_version')!r}")
    nc = doc["net_config"]
    config = NetConfig(
        hidden=tuple(nc["hidden"]),
        lag=int(nc["lag"]),
        seed=int(nc["seed"]),
        dropout=float(nc.get("dropout", 0.0)),
        batch_norm=bool(nc.get("batch_norm", False)),
    )
    expected = init_params(config)

    def unpack(section, reference):
        if set(section) != set(reference):
            raise DataError(
                f"{path}: parameter names {sorted(section)} do not match expected {sorted(reference)}"
            )
        out = {}
        for name, ref in reference.items():
            entry = section[name]
            arr = np.asarray(entry["data"], dtype=float).reshape(entry["shape"])
            if arr.shape != ref.shape:
                raise DataError(f"{path}: shape mismatch for {name!r}: {arr.shape} vs {ref.shape}")
            out[name] = arr
        return out

    arrays = unpack(doc["params"], expected.arrays)
    stats = unpack(doc.get("stats", {}), expected.stats)
    return ParamSet(config=config, arrays=arrays, stats=stats)
