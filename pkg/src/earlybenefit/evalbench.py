"""Metrics, Pareto fronts, tolerance tables, and runtime benchmarks.

Tardiness of a record is its decision tick divided by the series length;
anything that never fired counts as 1.0. Precision/recall/F1 are reported
for one designated positive class (the unfavorable class in outcome mode).
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, replace as dc_replace
from typing import Optional, Sequence

import numpy as np

from .benefit import OUTCOME, BenefitSpec, DecisionRecord, total_benefit


@dataclass(frozen=True)
class EvalReport:
    precision: float
    recall: float
    f1: float
    accuracy: float
    tardiness: float
    total_benefit: float
    unclassified: int
    n: int

    FIELDS = ("precision", "recall", "f1", "accuracy", "tardiness",
              "total_benefit", "unclassified", "n")

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.FIELDS}


@dataclass(frozen=True)
class SweepPoint:
    config_id: str
    tardiness: float
    accuracy: float
    report: Optional[EvalReport] = None


def _normalize_records(decisions, spec: Optional[BenefitSpec]):
    """In outcome mode a never-fired record is a default-class prediction at L."""
    out = []
    for rec in decisions:
        if rec.predicted is None and spec is not None and spec.mode == OUTCOME:
            rec = dc_replace(rec, predicted=spec.default_class, tick=rec.length)
        out.append(rec)
    return out


def evaluate(decisions: Sequence[DecisionRecord], positive_class: int,
             spec: Optional[BenefitSpec] = None) -> EvalReport:
    """Confusion metrics, mean tardiness, and total benefit for one run."""
    if not decisions:
        raise ValueError("no decision records to evaluate")
    records = _normalize_records(decisions, spec)
    tp = fp = fn = correct = unclassified = 0
    tard = []
    for rec in records:
        tard.append((rec.tick / rec.length) if rec.predicted is not None else 1.0)
        if rec.predicted is None:
            unclassified += 1
        if rec.predicted == rec.truth:
            correct += 1
        if rec.predicted == positive_class:
            if rec.truth == positive_class:
                tp += 1
            else:
                fp += 1
        elif rec.truth == positive_class:
            fn += 1
    n = len(records)
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    benefit = total_benefit(spec, records) if spec is not None else 0.0
    return EvalReport(precision=precision, recall=recall, f1=f1,
                      accuracy=correct / n, tardiness=math.fsum(tard) / n,
                      total_benefit=benefit, unclassified=unclassified, n=n)


def pareto_front(points: Sequence[SweepPoint]) -> list[SweepPoint]:
    """Points not dominated under (lower tardiness, higher accuracy).

    Exact coordinate duplicates are kept once (first occurrence); output
    preserves input order.
    """
    if not points:
        raise ValueError("need at least one point")
    order = sorted(range(len(points)),
                   key=lambda i: (points[i].tardiness, -points[i].accuracy, i))
    best_acc = -np.inf
    keep = []
    for i in order:
        if points[i].accuracy > best_acc:
            keep.append(i)
            best_acc = points[i].accuracy
    keep.sort()
    return [points[i] for i in keep]


def accuracy_at_tolerance(points: Sequence[SweepPoint], tol: float) -> Optional[float]:
    """Best accuracy among points whose mean tardiness fits the tolerance."""
    if not 0.0 < tol <= 1.0:
        raise ValueError(f"tolerance must be in (0, 1], got {tol}")
    eligible = [p.accuracy for p in points if p.tardiness <= tol]
    return max(eligible) if eligible else None


# ---------------------------------------------------------------------------
# runtime benchmarks


def nested_fractions(dataset, fractions, seed: int = 0):
    """Nested, label-stratified subsets: every larger fraction contains the
    smaller ones."""
    from .dataio import LabeledDataset  # noqa: F401 (typing only)

    labels = dataset.labels()
    rng = np.random.default_rng(seed)
    per_class = {c: rng.permutation(np.flatnonzero(labels == c))
                 for c in range(dataset.num_classes)}
    subsets = []
    for frac in fractions:
        idx = []
        for c in sorted(per_class):
            k = max(2, int(np.ceil(frac * len(per_class[c]))))
            idx.extend(per_class[c][:k])
        idx.sort()
        subsets.append(dc_replace(dataset,
                                  instances=tuple(dataset.instances[i] for i in idx)))
    return subsets


def bench_training_scaling(dataset, fractions, spec: BenefitSpec, config,
                           seed: int = 0):
    """Wall time of training against the number of sequences.

    Returns (rows, r2) where rows are (fraction, n_sequences, seconds) and r2
    is the least-squares linear-fit quality of time vs n (None for a single
    fraction).
    """
    from .training import train_bundle

    fractions = sorted(fractions)
    rows = []
    for subset, frac in zip(nested_fractions(dataset, fractions, seed), fractions):
        t0 = time.perf_counter()
        train_bundle(subset, spec, config)
        rows.append((frac, len(subset), time.perf_counter() - t0))
    if len(rows) < 2:
        return rows, None
    ns = np.array([r[1] for r in rows], dtype=float)
    ts = np.array([r[2] for r in rows], dtype=float)
    r = np.corrcoef(ns, ts)[0, 1]
    return rows, float(r * r)


def bench_step_latency(bundle, policy, series, repeats: int = 5, warmup: int = 2):
    """Median wall time of observe() at every tick over `repeats` replays."""
    from .streamdecide import init_stream, observe

    series = np.asarray(series, dtype=np.float64)
    if series.ndim != 2 or series.shape[0] < 1:
        raise ValueError("series must be a non-empty (L, d) array")
    L = series.shape[0]
    times = np.empty((repeats, L))
    for rep in range(warmup + repeats):
        state = init_stream(bundle, policy)
        for t in range(L):
            t0 = time.perf_counter()
            observe(state, series[t])
            dt = time.perf_counter() - t0
            if rep >= warmup:
                times[rep - warmup, t] = dt
    return np.median(times, axis=0)
