"""Benefit payoff model.

A decision made at tick t on a series of length L is worth the savings from
earliness minus the misclassification cost: (L - t) * s - cost[truth, pred].
In outcome mode one class is the favorable "default state" whose prediction
is a no-op and carries zero benefit; only the remaining classes are actively
modeled. In type mode every class is active.

The savings function is the linear form (L - t) * s. Alternative savings
functions would plug in at `_savings`; only the linear form is supported.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigError

OUTCOME = "outcome"
TYPE = "type"


@dataclass(frozen=True)
class BenefitSpec:
    """Payoff definition: mode, per-tick savings s, and a CxC cost matrix.

    cost[l, c] is the cost of predicting c when the truth is l; the diagonal
    is zero. In outcome mode `default_class` names the favorable class that
    has no regressor and yields zero benefit whenever predicted.
    """

    mode: str
    s: float
    cost: np.ndarray
    default_class: Optional[int] = None

    def __post_init__(self):
        cost = np.asarray(self.cost, dtype=float)
        object.__setattr__(self, "cost", cost)
        if self.mode not in (OUTCOME, TYPE):
            raise ConfigError(f"unknown benefit mode {self.mode!r}")
        if not (self.s > 0):
            raise ConfigError(f"savings rate must be positive, got {self.s}")
        if cost.ndim != 2 or cost.shape[0] != cost.shape[1] or cost.shape[0] < 2:
            raise ConfigError(f"cost must be a CxC matrix with C >= 2, got shape {cost.shape}")
        if np.any(cost < 0):
            raise ConfigError("cost entries must be >= 0")
        if np.any(np.diag(cost) != 0):
            raise ConfigError("cost diagonal must be zero")
        if self.mode == OUTCOME:
            if self.default_class is None:
                raise ConfigError("outcome mode requires a default_class")
            if not 0 <= self.default_class < cost.shape[0]:
                raise ConfigError(f"default_class {self.default_class} out of range")
        elif self.default_class is not None:
            raise ConfigError("type mode has no default class")

    @property
    def num_classes(self) -> int:
        return self.cost.shape[0]

    def active_classes(self) -> list[int]:
        """Classes that carry a regressor (all but the default in outcome mode)."""
        if self.mode == OUTCOME:
            return [c for c in range(self.num_classes) if c != self.default_class]
        return list(range(self.num_classes))

    @classmethod
    def symmetric(cls, mode: str, num_classes: int, ms_ratio: float, s: float = 1.0,
                  default_class: Optional[int] = None) -> "BenefitSpec":
        """Spec with s and a single off-diagonal cost M = ms_ratio * s."""
        cost = np.full((num_classes, num_classes), ms_ratio * s, dtype=float)
        np.fill_diagonal(cost, 0.0)
        if mode == OUTCOME and default_class is None:
            default_class = 0
        return cls(mode=mode, s=s, cost=cost, default_class=default_class)

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "s": self.s,
            "cost": self.cost.tolist(),
            "default_class": self.default_class,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "BenefitSpec":
        return cls(mode=d["mode"], s=float(d["s"]), cost=np.asarray(d["cost"], dtype=float),
                   default_class=d.get("default_class"))

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "BenefitSpec":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def _savings(spec: BenefitSpec, t: int, L: int) -> float:
    return (L - t) * spec.s


def benefit_value(spec: BenefitSpec, truth: int, predicted: int, t: int, L: int) -> float:
    """Payoff of predicting `predicted` at tick t (1-based) when the truth is `truth`."""
    if not 1 <= t <= L:
        raise ValueError(f"tick t={t} outside 1..{L}")
    C = spec.num_classes
    if not (0 <= truth < C and 0 <= predicted < C):
        raise ValueError(f"class out of range for C={C}: truth={truth} predicted={predicted}")
    if spec.mode == OUTCOME and predicted == spec.default_class:
        return 0.0
    return _savings(spec, t, L) - float(spec.cost[truth, predicted])


def build_targets(spec: BenefitSpec, inst, model_class: int) -> np.ndarray:
    """Per-tick regression targets b_1..b_L for one (instance, model-class) pair.

    `inst` is anything with .label and .length (a SeriesInstance in practice).
    """
    if spec.mode == OUTCOME and model_class == spec.default_class:
        raise ValueError("the default class has no regressor")
    if model_class not in spec.active_classes():
        raise ValueError(f"class {model_class} is not actively modeled")
    length = inst.length
    ticks = np.arange(1, length + 1, dtype=float)
    return (length - ticks) * spec.s - float(spec.cost[inst.label, model_class])


@dataclass(frozen=True)
class DecisionRecord:
    """One decided (or undecided) test instance: what was predicted and when."""

    truth: int
    predicted: Optional[int]  # None = no decision fired
    tick: Optional[int]       # None only when predicted is None
    length: int
    instance_id: str = ""
    estimates: tuple = field(default=(), compare=False)


def total_benefit(spec: BenefitSpec, decisions: Sequence[DecisionRecord]) -> float:
    """Summed payoff over a set of decisions.

    Undecided records contribute zero: in outcome mode a non-prediction is a
    default-class prediction (worth zero by definition), in type mode an
    un-classified instance has no payoff assigned.
    """
    terms = [
        benefit_value(spec, rec.truth, rec.predicted, rec.tick, rec.length)
        for rec in decisions if rec.predicted is not None
    ]
    return math.fsum(terms)
