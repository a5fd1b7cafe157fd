"""Panel/outcome containers and long-format CSV ingestion.

Exposure files are long format with header ``subject_id,t,exposure`` and one
row per subject-day; outcome files carry ``subject_id,time,event`` with one
row per subject. Time indices are 1-based and panels are rectangular: every
subject is zero-filled out to the common horizon, which is consistent with
"no exposure contributes nothing" in the model (the exposure curve is
anchored at zero).
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError

EXPOSURE_HEADER = ["subject_id", "t", "exposure"]
OUTCOME_HEADER = ["subject_id", "time", "event"]


@dataclass
class ExposurePanel:
    """Rectangular per-subject exposure histories, shape (N, T), t = 1..T."""

    values: np.ndarray
    subject_ids: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2:
            raise DataError("exposure panel must be 2-dimensional (subjects x time)")
        if not np.all(np.isfinite(self.values)):
            raise DataError("exposure panel contains non-finite values")
        if not self.subject_ids:
            self.subject_ids = [f"s{i:05d}" for i in range(self.values.shape[0])]
        if len(self.subject_ids) != self.values.shape[0]:
            raise DataError("subject_ids length does not match panel rows")

    @property
    def n_subjects(self) -> int:
        return self.values.shape[0]

    @property
    def horizon(self) -> int:
        return self.values.shape[1]


@dataclass
class SurvivalOutcomes:
    """Observed time index (1..T) and binary event indicator per subject."""

    time: np.ndarray
    event: np.ndarray

    def __post_init__(self):
        self.time = np.asarray(self.time, dtype=int)
        self.event = np.asarray(self.event, dtype=int)
        if self.time.shape != self.event.shape or self.time.ndim != 1:
            raise DataError("time and event must be equal-length 1-d arrays")
        if np.any(self.time < 1):
            raise DataError("observed times must be >= 1")
        if not np.all(np.isin(self.event, (0, 1))):
            raise DataError("event indicators must be 0 or 1")

    def __len__(self) -> int:
        return self.time.shape[0]

    @property
    def n_events(self) -> int:
        return int(self.event.sum())

    def subset(self, idx) -> "SurvivalOutcomes":
        return SurvivalOutcomes(self.time[idx], self.event[idx])


def as_panel_array(panel) -> np.ndarray:
    """Accept an ExposurePanel or a raw (N, T) array; return the array."""
    if isinstance(panel, ExposurePanel):
        return panel.values
    arr = np.asarray(panel, dtype=float)
    if arr.ndim == 1:
        arr = arr[None, :]
    return arr


def _parse_rows(path, header, caster):
    """Yield (line_no, parsed fields) for a CSV file with a fixed header."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            first = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        if [c.strip() for c in first] != header:
            raise DataError(f"{path}: expected header {','.join(header)!r}, got {','.join(first)!r}")
        for line_no, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise DataError(f"{path}:{line_no}: expected {len(header)} columns, got {len(row)}")
            try:
                yield line_no, caster(row)
            except ValueError as exc:
                raise DataError(f"{path}:{line_no}: parse error: {exc}") from None


def ingest(exposure_path, outcome_path, normalize: bool = True):
    """Assemble (ExposurePanel, SurvivalOutcomes, scale) from long-format CSVs.

    The horizon T is the maximum observed t across subjects; missing days are
    zero-filled (gaps inside a subject's observed range warn once per
    subject). With ``normalize`` the panel is divided by its global maximum
    and that scale is returned for the run manifest, else scale is 1.0.
    """
    seen: dict[tuple[str, int], int] = {}
    per_subject: dict[str, dict[int, float]] = {}
    order: list[str] = []
    for line_no, (sid, t, val) in _parse_rows(
        exposure_path, EXPOSURE_HEADER, lambda r: (r[0], int(r[1]), float(r[2]))
    ):
        if t < 1:
            raise DataError(f"{exposure_path}:{line_no}: time index {t} must be >= 1")
        if not np.isfinite(val):
            raise DataError(f"{exposure_path}:{line_no}: non-finite exposure value")
        key = (sid, t)
        if key in seen:
            raise DataError(
                f"{exposure_path}:{line_no}: duplicate (subject, t) = {key}, first seen at line {seen[key]}"
            )
        seen[key] = line_no
        if sid not in per_subject:
            per_subject[sid] = {}
            order.append(sid)
        per_subject[sid][t] = val
    if not order:
        raise DataError(f"{exposure_path}: no exposure records")

    horizon = max(max(days) for days in per_subject.values())
    values = np.zeros((len(order), horizon))
    for i, sid in enumerate(order):
        days = per_subject[sid]
        for t, val in days.items():
            values[i, t - 1] = val
        observed_max = max(days)
        missing = observed_max - len(days)
        if missing > 0:
            warnings.warn(
                f"subject {sid!r}: {missing} missing day(s) before t={observed_max} zero-filled",
                stacklevel=2,
            )

    out_time = {}
    out_event = {}
    for line_no, (sid, time, event) in _parse_rows(
        outcome_path, OUTCOME_HEADER, lambda r: (r[0], int(r[1]), int(r[2]))
    ):
        if sid in out_time:
            raise DataError(f"{outcome_path}:{line_no}: duplicate outcome for subject {sid!r}")
        if not 1 <= time <= horizon:
            raise DataError(
                f"{outcome_path}:{line_no}: time {time} outside panel horizon 1..{horizon}"
            )
        if event not in (0, 1):
            raise DataError(f"{outcome_path}:{line_no}: event must be 0 or 1, got {event}")
        out_time[sid] = time
        out_event[sid] = event

    missing_outcomes = [s for s in order if s not in out_time]
    extra_outcomes = [s for s in out_time if s not in per_subject]
    if missing_outcomes or extra_outcomes:
        raise DataError(
            "subject mismatch between exposure and outcome files: "
            f"missing outcomes for {missing_outcomes[:5]}, extra outcomes for {extra_outcomes[:5]}"
        )

    scale = 1.0
    if normalize:
        top = float(values.max())
        if top > 0:
            values = values / top
            scale = top
    else:
        if values.min() < 0 or values.max() > 1:
            warnings.warn(
                "exposures outside [0, 1] and normalize=False; the exposure curve will extrapolate",
                stacklevel=2,
            )

    panel = ExposurePanel(values, subject_ids=order)
    outcomes = SurvivalOutcomes(
        np.array([out_time[s] for s in order]), np.array([out_event[s] for s in order])
    )
    return panel, outcomes, scale


def write_exposures(path, panel: ExposurePanel):
    """Write a panel in long format with full round-trip float precision."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(EXPOSURE_HEADER)
        for i, sid in enumerate(panel.subject_ids):
            for t in range(panel.horizon):
                writer.writerow([sid, t + 1, "%.17g" % panel.values[i, t]])


def write_outcomes(path, panel: ExposurePanel, outcomes: SurvivalOutcomes):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(OUTCOME_HEADER)
        for sid, time, event in zip(panel.subject_ids, outcomes.time, outcomes.event):
            writer.writerow([sid, int(time), int(event)])
