"""Synthetic outcome-mode dataset generator.

Stands in for monitoring data that cannot be redistributed: variable-length
multivariate series with two outcomes. Unfavorable instances (class 1) carry
a linear upward drift on a random subset of channels on top of noise;
favorable instances (class 0) are stationary noise around the same baseline.
Fixed seeds give byte-identical output files.
"""

from __future__ import annotations

import json
from dataclasses import replace

import numpy as np

from .dataio import TEST, TRAIN, LabeledDataset, SeriesInstance, save_multivariate


def synth_outcome_dataset(n: int, dim: int, length_range, drift: float,
                          noise: float, seed: int):
    """Returns (dataset, meta). Classes alternate so counts stay balanced."""
    if n < 4:
        raise ValueError("need n >= 4")
    lo, hi = int(length_range[0]), int(length_range[1])
    if not 1 <= lo <= hi:
        raise ValueError(f"invalid length range [{lo}, {hi}]")
    if dim < 1 or drift < 0 or noise < 0:
        raise ValueError("dim must be >= 1, drift and noise must be >= 0")
    rng = np.random.default_rng(seed)
    baseline = 0.5
    instances = []
    drift_channels = {}
    for i in range(n):
        label = i % 2
        length = int(rng.integers(lo, hi + 1))
        values = baseline + rng.normal(0.0, noise, size=(length, dim))
        channels = []
        if label == 1:
            k = max(1, dim // 2)
            channels = sorted(int(c) for c in rng.choice(dim, size=k, replace=False))
            ramp = np.linspace(0.0, drift, length)
            values[:, channels] += ramp[:, None]
        drift_channels[str(i)] = channels
        instances.append(SeriesInstance(id=str(i), label=label, values=values))
    dataset = LabeledDataset(instances=instances, num_classes=2, dim=dim,
                             role=TRAIN, label_mapping={0: 0, 1: 1})
    meta = {"n": n, "dim": dim, "length_range": [lo, hi], "drift": drift,
            "noise": noise, "seed": seed, "default_class": 0,
            "unfavorable_class": 1, "drift_channels": drift_channels}
    return dataset, meta


def split_synth(dataset: LabeledDataset, test_frac: float, seed: int):
    """Stratified train/test split of a generated dataset."""
    if not 0.0 < test_frac < 1.0:
        raise ValueError("test_frac must be in (0, 1)")
    rng = np.random.default_rng(seed)
    labels = dataset.labels()
    train_idx, test_idx = [], []
    for c in range(dataset.num_classes):
        idx = rng.permutation(np.flatnonzero(labels == c))
        k = max(1, int(round(test_frac * len(idx))))
        test_idx.extend(idx[:k])
        train_idx.extend(idx[k:])
    train_idx.sort()
    test_idx.sort()
    pick = lambda ids, role: replace(
        dataset, instances=tuple(dataset.instances[i] for i in ids), role=role)
    return pick(train_idx, TRAIN), pick(test_idx, TEST)


def write_synth_files(out_prefix, n, dim, length_range, drift, noise, seed,
                      test_frac: float = 0.0):
    """Generate and write dataset files plus the ground-truth sidecar.

    Returns the list of paths written.
    """
    dataset, meta = synth_outcome_dataset(n, dim, length_range, drift, noise, seed)
    paths = []
    if test_frac > 0.0:
        train_ds, test_ds = split_synth(dataset, test_frac, seed)
        for ds, tag in ((train_ds, "train"), (test_ds, "test")):
            path = f"{out_prefix}_{tag}.jsonl"
            save_multivariate(ds, path)
            paths.append(path)
        meta["split"] = {"test_frac": test_frac,
                         "train_ids": [i.id for i in train_ds.instances],
                         "test_ids": [i.id for i in test_ds.instances]}
    else:
        path = f"{out_prefix}.jsonl"
        save_multivariate(dataset, path)
        paths.append(path)
    meta_path = f"{out_prefix}_meta.json"
    with open(meta_path, "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    paths.append(meta_path)
    return paths
