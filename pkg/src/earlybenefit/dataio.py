"""Dataset loading, validation, and preprocessing.

Two on-disk formats are supported:

* UCR style: one instance per line, first field is the label, the remaining
  L fields are values of a single channel. Tab or comma delimited
  (auto-detected), decimal point, optional scientific notation.
* Multivariate JSON-lines: one record per line, each
  ``{"id": str, "label": int, "series": [[x1..xd], ...]}`` with rows of
  constant width d and per-record lengths that may differ. Missing values
  are spelled ``null``.

In memory a missing value is NaN; preprocessing (interpolation, trimming,
downsampling, normalization) removes all NaNs before modeling.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import DataFormatError, UnrecoverableInstanceError

TRAIN = "train"
TEST = "test"


@dataclass(frozen=True)
class SeriesInstance:
    """One labeled multivariate series: values has shape (length, dim)."""

    id: str
    label: int
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2 or values.shape[0] < 1:
            raise DataFormatError(
                f"instance {self.id!r}: values must be (L, d) with L >= 1, got {values.shape}")
        object.__setattr__(self, "values", values)

    @property
    def length(self) -> int:
        return self.values.shape[0]

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    def has_missing(self) -> bool:
        return bool(np.isnan(self.values).any())


@dataclass(frozen=True)
class LabeledDataset:
    instances: tuple
    num_classes: int
    dim: int
    role: str = TRAIN
    label_mapping: dict = field(default_factory=dict)  # original label -> class index

    def __post_init__(self):
        object.__setattr__(self, "instances", tuple(self.instances))
        if not self.instances:
            raise DataFormatError("dataset has no instances")
        if self.num_classes < 2:
            raise DataFormatError(f"need at least 2 classes, got {self.num_classes}")
        for inst in self.instances:
            if inst.dim != self.dim:
                raise DataFormatError(
                    f"instance {inst.id!r} has dim {inst.dim}, dataset dim is {self.dim}")
            if not 0 <= inst.label < self.num_classes:
                raise DataFormatError(
                    f"instance {inst.id!r} label {inst.label} outside 0..{self.num_classes - 1}")

    def __len__(self) -> int:
        return len(self.instances)

    def labels(self) -> np.ndarray:
        return np.array([inst.label for inst in self.instances], dtype=int)

    def max_length(self) -> int:
        return max(inst.length for inst in self.instances)


@dataclass(frozen=True)
class NormStats:
    """Per-channel train-split min/max, applied identically to every split."""

    mins: np.ndarray
    maxs: np.ndarray
    constant_channels: tuple = ()

    def __post_init__(self):
        mins = np.asarray(self.mins, dtype=float)
        maxs = np.asarray(self.maxs, dtype=float)
        if mins.shape != maxs.shape or np.any(maxs < mins):
            raise ValueError("invalid normalization stats")
        object.__setattr__(self, "mins", mins)
        object.__setattr__(self, "maxs", maxs)

    def to_dict(self) -> dict:
        return {"mins": self.mins.tolist(), "maxs": self.maxs.tolist(),
                "constant_channels": list(self.constant_channels)}

    @classmethod
    def from_dict(cls, d: dict) -> "NormStats":
        return cls(np.asarray(d["mins"], float), np.asarray(d["maxs"], float),
                   tuple(d.get("constant_channels", ())))


# ---------------------------------------------------------------------------
# loading / saving


def _remap_labels(raw_labels):
    uniq = sorted(set(raw_labels))
    mapping = {lab: idx for idx, lab in enumerate(uniq)}
    return mapping


def _parse_cell(cell: str, path, row: int):
    try:
        value = float(cell)
    except ValueError:
        raise DataFormatError(f"{path}: row {row}: non-numeric cell {cell!r}") from None
    if math.isinf(value):
        raise DataFormatError(f"{path}: row {row}: non-finite cell {cell!r}")
    return value  # NaN text is accepted as the missing marker


def load_ucr(path) -> LabeledDataset:
    """Load a single-channel fixed-length dataset in UCR layout."""
    path = Path(path)
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            delim = "\t" if "\t" in line else ","
            fields = [f for f in line.split(delim) if f != ""]
            if len(fields) < 2:
                raise DataFormatError(f"{path}: row {lineno}: need a label and at least one value")
            rows.append((lineno, fields))
    if not rows:
        raise DataFormatError(f"{path}: empty file")

    expected_len = len(rows[0][1]) - 1
    raw_labels = []
    series = []
    for lineno, fields in rows:
        if len(fields) - 1 != expected_len:
            raise DataFormatError(
                f"{path}: row {lineno}: {len(fields) - 1} values, expected {expected_len}")
        label_cell = fields[0]
        label = _parse_cell(label_cell, path, lineno)
        if math.isnan(label) or label != int(label):
            raise DataFormatError(f"{path}: row {lineno}: label {label_cell!r} is not an integer")
        raw_labels.append(int(label))
        series.append([_parse_cell(c, path, lineno) for c in fields[1:]])

    mapping = _remap_labels(raw_labels)
    if len(mapping) < 2:
        raise DataFormatError(f"{path}: only one class present")
    instances = [
        SeriesInstance(id=str(i), label=mapping[lab],
                       values=np.asarray(vals, dtype=float).reshape(-1, 1))
        for i, (lab, vals) in enumerate(zip(raw_labels, series))
    ]
    return LabeledDataset(instances=instances, num_classes=len(mapping), dim=1,
                          label_mapping=mapping)


def save_ucr(dataset: LabeledDataset, path, delimiter: str = ",") -> None:
    """Write a d=1 dataset back in UCR layout (class indices as labels)."""
    if dataset.dim != 1:
        raise DataFormatError("UCR layout holds single-channel data only")
    with open(path, "w", encoding="utf-8") as fh:
        for inst in dataset.instances:
            cells = [str(inst.label)] + [repr(float(v)) for v in inst.values[:, 0]]
            fh.write(delimiter.join(cells) + "\n")


def load_multivariate(path) -> LabeledDataset:
    """Load variable-length multivariate JSON-lines records."""
    path = Path(path)
    instances = []
    raw_labels = []
    dim = None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataFormatError(f"{path}: row {lineno}: invalid record: {exc}") from None
            try:
                rid, label, series = rec["id"], rec["label"], rec["series"]
            except (KeyError, TypeError):
                raise DataFormatError(
                    f"{path}: row {lineno}: record needs id, label, series fields") from None
            if not isinstance(label, int):
                raise DataFormatError(f"{path}: row {lineno}: label must be an integer")
            if not series:
                raise DataFormatError(f"{path}: row {lineno}: empty series")
            widths = {len(v) for v in series}
            if len(widths) != 1:
                raise DataFormatError(
                    f"{path}: row {lineno}: inconsistent vector widths {sorted(widths)}")
            width = widths.pop()
            if dim is None:
                dim = width
            elif width != dim:
                raise DataFormatError(
                    f"{path}: row {lineno}: dimension {width} != dataset dimension {dim}")
            values = np.array(
                [[math.nan if v is None else float(v) for v in row] for row in series],
                dtype=float)
            if np.isinf(values).any():
                raise DataFormatError(f"{path}: row {lineno}: non-finite value")
            raw_labels.append(label)
            instances.append((str(rid), label, values))
    if not instances:
        raise DataFormatError(f"{path}: empty file")
    mapping = _remap_labels(raw_labels)
    if len(mapping) < 2:
        raise DataFormatError(f"{path}: only one class present")
    built = [SeriesInstance(id=rid, label=mapping[lab], values=vals)
             for rid, lab, vals in instances]
    return LabeledDataset(instances=built, num_classes=len(mapping), dim=dim,
                          label_mapping=mapping)


def save_multivariate(dataset: LabeledDataset, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for inst in dataset.instances:
            series = [[None if math.isnan(v) else v for v in row] for row in inst.values.tolist()]
            rec = {"id": inst.id, "label": inst.label, "series": series}
            fh.write(json.dumps(rec) + "\n")


def load_auto(path) -> LabeledDataset:
    """Pick the loader from the first non-empty line."""
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                first = line.strip()
                break
        else:
            raise DataFormatError(f"{path}: empty file")
    if first.startswith("{"):
        return load_multivariate(path)
    return load_ucr(path)


# ---------------------------------------------------------------------------
# preprocessing


def interpolate_missing(inst: SeriesInstance) -> SeriesInstance:
    """Fill NaN gaps channel-wise: linear inside, nearest-value at the edges."""
    if not inst.has_missing():
        return inst
    values = inst.values.copy()
    for ch in range(inst.dim):
        col = values[:, ch]
        missing = np.isnan(col)
        if not missing.any():
            continue
        if missing.all():
            raise UnrecoverableInstanceError(
                f"instance {inst.id!r}: channel {ch} has no observed values")
        known = np.flatnonzero(~missing)
        col[missing] = np.interp(np.flatnonzero(missing), known, col[known])
    return replace(inst, values=values)


def trim_artifacts(inst: SeriesInstance, lead_sigma: float = 3.0,
                   trail_eps: float = 1e-9) -> SeriesInstance:
    """Drop leading spike artifacts and trailing dead signal.

    Leading: the maximal run of ticks where any channel exceeds that
    channel's mean + lead_sigma * std. The moments are taken over the ticks
    after the candidate run, so a huge spike cannot inflate the threshold
    that is supposed to catch it. Trailing: the maximal run where every
    channel is within trail_eps of zero. Interior values are never altered;
    raises if nothing would remain.
    """
    if inst.has_missing():
        raise UnrecoverableInstanceError(
            f"instance {inst.id!r}: interpolate missing values before trimming")
    values = inst.values

    start = 0
    while start < len(values) - 1:
        rest = values[start + 1:]
        ceiling = rest.mean(axis=0) + lead_sigma * rest.std(axis=0)
        if np.any(values[start] > ceiling):
            start += 1
        else:
            break
    stop = len(values)
    while stop > start and np.all(np.abs(values[stop - 1]) <= trail_eps):
        stop -= 1
    if stop <= start:
        raise UnrecoverableInstanceError(f"instance {inst.id!r}: trimming removed every tick")
    if start == 0 and stop == len(values):
        return inst
    return replace(inst, values=values[start:stop].copy())


def median_downsample(inst: SeriesInstance, window: int) -> SeriesInstance:
    """Replace consecutive windows by per-channel medians; output length ceil(L/window)."""
    if window < 1:
        raise ValueError(f"window must be >= 1, got {window}")
    if window == 1:
        return inst
    values = inst.values
    out = np.empty((math.ceil(len(values) / window), inst.dim), dtype=float)
    for i in range(out.shape[0]):
        out[i] = np.median(values[i * window:(i + 1) * window], axis=0)
    return replace(inst, values=out)


def fit_normalization(train: LabeledDataset) -> NormStats:
    """Per-channel min/max over the train split; constant channels are flagged."""
    stacked = np.concatenate([inst.values for inst in train.instances], axis=0)
    if np.isnan(stacked).any():
        raise ValueError("normalize after interpolation: missing values present")
    mins = stacked.min(axis=0)
    maxs = stacked.max(axis=0)
    constant = tuple(int(ch) for ch in np.flatnonzero(maxs == mins))
    if constant:
        warnings.warn(f"constant channels mapped to 0.0: {constant}", stacklevel=2)
    return NormStats(mins=mins, maxs=maxs, constant_channels=constant)


def apply_normalization(dataset: LabeledDataset, stats: NormStats) -> LabeledDataset:
    """Affinely map each channel to [0, 1] by train stats; out-of-range clamps."""
    span = stats.maxs - stats.mins
    safe = np.where(span == 0, 1.0, span)
    out = []
    for inst in dataset.instances:
        scaled = (inst.values - stats.mins) / safe
        scaled[:, span == 0] = 0.0
        np.clip(scaled, 0.0, 1.0, out=scaled)
        out.append(replace(inst, values=scaled))
    return replace(dataset, instances=tuple(out))


def fit_apply_normalize(train: LabeledDataset,
                        test: Optional[LabeledDataset] = None):
    """Fit [0,1] stats on the train split and apply to both splits."""
    stats = fit_normalization(train)
    train_n = apply_normalization(train, stats)
    test_n = apply_normalization(test, stats) if test is not None else None
    return train_n, test_n, stats


def find_ucr_dataset(name: str, data_dir=None):
    """Locate <name>_TRAIN/<name>_TEST files under data_dir or $UCR_DATA_DIR.

    Returns (train_path, test_path) or None. Accepts the archive's layout
    (a per-dataset folder) or a flat directory, with .tsv/.txt/.csv suffixes.
    """
    import os

    roots = []
    if data_dir is not None:
        roots.append(Path(data_dir))
    env = os.environ.get("UCR_DATA_DIR")
    if env:
        roots.append(Path(env))
    roots.append(Path(__file__).resolve().parents[2] / "data" / "ucr")
    for root in roots:
        for sub in (root / name, root):
            for suffix in (".tsv", ".txt", ".csv", ""):
                train = sub / f"{name}_TRAIN{suffix}"
                test = sub / f"{name}_TEST{suffix}"
                if train.exists() and test.exists():
                    return train, test
    return None
