"""Online decision engine.

Feed observations one at a time; each active class's recurrence advances one
tick and re-estimates the benefit of predicting that class now. The decision
rule fires the moment an estimate turns positive (outcome mode) or positive
with a sufficient lead over the other classes (type mode). Once fired, the
decision is sealed: the engine keeps consuming the stream so attention
snapshots stay available, but the (class, tick) pair never changes.

Two attention modes are provided. `full` recomputes softmax attention over
all cached hidden states with the current cell state as query - faithful to
the trained model, O(t) work per tick. `last-state-only` skips attention and
feeds concat(h_t, c_t) straight into the combine layer - an approximation
with O(1) work per tick, which is what makes constant-time streaming
possible.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import neuralcore as nc
from .benefit import OUTCOME, TYPE, DecisionRecord
from .errors import ConfigError, StreamStateError

FULL = "full"
LAST_STATE_ONLY = "last-state-only"

UNDECIDED = "undecided"
DECIDED = "decided"
FINALIZED = "finalized"
UNCLASSIFIED = "unclassified"


@dataclass(frozen=True)
class DecisionPolicy:
    mode: str
    delta_abs: float = 0.0
    attention_mode: str = FULL

    def __post_init__(self):
        if self.mode not in (OUTCOME, TYPE):
            raise ConfigError(f"unknown policy mode {self.mode!r}")
        if self.delta_abs < 0:
            raise ConfigError("delta_abs must be >= 0")
        if self.attention_mode not in (FULL, LAST_STATE_ONLY):
            raise ConfigError(f"unknown attention mode {self.attention_mode!r}")

    def to_dict(self) -> dict:
        return {"mode": self.mode, "delta_abs": self.delta_abs,
                "attention_mode": self.attention_mode}

    @classmethod
    def from_dict(cls, d: dict) -> "DecisionPolicy":
        return cls(**d)


@dataclass(frozen=True)
class DecisionOutcome:
    status: str
    class_index: Optional[int] = None
    tick: Optional[int] = None
    estimates: dict = field(default_factory=dict)  # active class -> current b̂

    @property
    def is_decision(self) -> bool:
        return self.status in (DECIDED, FINALIZED)


class _KernelRunner:
    """Streaming state of one per-class regressor."""

    def __init__(self, params: nc.ModelParams, attention_mode: str):
        self.params = params
        self.attention_mode = attention_mode
        H = params.config.hidden_dim
        self.h = np.zeros(H)
        self.c = np.zeros(H)
        self.t = 0
        self._hist = np.zeros((64, H)) if attention_mode == FULL else None

    def advance(self, x: np.ndarray) -> None:
        K = nc.get_backend()
        p = self.params
        self.h, self.c, _ = K.step(p.W, p.U, p.b, x, self.h, self.c)
        self.t += 1
        if self._hist is not None:
            if self.t > self._hist.shape[0]:
                grown = np.zeros((2 * self._hist.shape[0], self._hist.shape[1]))
                grown[:self._hist.shape[0]] = self._hist
                self._hist = grown
            self._hist[self.t - 1] = self.h

    def estimate(self) -> float:
        K = nc.get_backend()
        p = self.params
        if self.attention_mode == FULL:
            bhat, self._alpha, _, _, _ = K.attn_head(
                self._hist[:self.t], self.c, p.Wa, p.w, p.w0, p.config.activation_id)
            return float(bhat)
        return float(K.last_state_head(self.h, self.c, p.Wa, p.w, p.w0,
                                       p.config.activation_id))

    def alpha(self) -> Optional[np.ndarray]:
        if self.attention_mode != FULL:
            return None
        return np.asarray(self._alpha).copy()


class StreamState:
    """Mutable per-stream state; exactly one owner mutates it."""

    def __init__(self, runners: dict, policy: DecisionPolicy, input_dim: int,
                 default_class: Optional[int] = None):
        self.runners = runners
        self.policy = policy
        self.input_dim = input_dim
        self.default_class = default_class
        self.t = 0
        self.decision = None          # (class, tick) once fired
        self.finalized_outcome = None

    @property
    def decided(self) -> bool:
        return self.decision is not None


def init_stream(bundle, policy: Optional[DecisionPolicy] = None) -> StreamState:
    """Fresh zeroed stream over a trained bundle."""
    if policy is None:
        policy = bundle.policy
    if policy.mode != bundle.spec.mode:
        raise ConfigError(
            f"policy mode {policy.mode!r} does not match bundle mode {bundle.spec.mode!r}")
    runners = {c: _KernelRunner(m.params, policy.attention_mode)
               for c, m in sorted(bundle.models.items())}
    return StreamState(runners=runners, policy=policy,
                       input_dim=bundle.model_config.input_dim,
                       default_class=bundle.spec.default_class)


def _apply_rule(policy: DecisionPolicy, estimates: dict) -> Optional[int]:
    """Class to fire now, or None. Ties in the argmax go to the lowest class;
    a lead of exactly delta_abs fires."""
    classes = sorted(estimates)
    if policy.mode == OUTCOME:
        positive = [c for c in classes if estimates[c] > 0.0]
        if not positive:
            return None
        return max(positive, key=lambda c: (estimates[c], -c))
    best = max(classes, key=lambda c: (estimates[c], -c))
    if estimates[best] <= 0.0:
        return None
    others = [estimates[c] for c in classes if c != best]
    runner_up = max(others) if others else -np.inf
    if estimates[best] - runner_up >= policy.delta_abs:
        return best
    return None


def observe(state: StreamState, x) -> DecisionOutcome:
    """Consume one observation, update every class recurrence, and apply the
    decision rule. A sealed decision is reported unchanged."""
    if state.finalized_outcome is not None:
        raise StreamStateError("stream already finalized")
    x = np.ascontiguousarray(x, dtype=np.float64).reshape(-1)
    if x.shape[0] != state.input_dim:
        raise ValueError(f"observation has dim {x.shape[0]}, expected {state.input_dim}")
    if not np.isfinite(x).all():
        raise ValueError("observation contains non-finite values")
    for runner in state.runners.values():
        runner.advance(x)
    state.t += 1
    estimates = {c: runner.estimate() for c, runner in state.runners.items()}
    if not state.decided:
        fired = _apply_rule(state.policy, estimates)
        if fired is not None:
            state.decision = (fired, state.t)
    if state.decided:
        cls, tick = state.decision
        return DecisionOutcome(status=DECIDED, class_index=cls, tick=tick,
                               estimates=estimates)
    return DecisionOutcome(status=UNDECIDED, estimates=estimates)


def finalize(state: StreamState, length: int) -> DecisionOutcome:
    """Close the stream after its declared length. An undecided outcome-mode
    stream becomes a default-class prediction at tick L; an undecided
    type-mode stream is registered un-classified."""
    if state.t != length:
        raise StreamStateError(
            f"finalize after {state.t} observations, declared length is {length}")
    if state.decided:
        cls, tick = state.decision
        outcome = DecisionOutcome(status=DECIDED, class_index=cls, tick=tick)
    elif state.policy.mode == OUTCOME:
        outcome = DecisionOutcome(status=FINALIZED, class_index=state.default_class,
                                  tick=length)
    else:
        outcome = DecisionOutcome(status=UNCLASSIFIED, tick=length)
    state.finalized_outcome = outcome
    return outcome


def attention_snapshot(state: StreamState) -> dict:
    """Current attention weights per class model (full mode only)."""
    if state.policy.attention_mode != FULL:
        raise ConfigError("attention snapshots need attention_mode='full'")
    if state.t < 1:
        raise StreamStateError("no observations consumed yet")
    return {c: runner.alpha() for c, runner in state.runners.items()}


def decide_dataset(bundle, dataset, policy: Optional[DecisionPolicy] = None,
                   apply_norm: bool = True, collect_estimates: bool = False,
                   attention_sink=None) -> list[DecisionRecord]:
    """Run the stream engine over every instance and collect decision records.

    `attention_sink`, when given, receives (instance_id, class, eval_tick,
    alpha_vector) rows at every tick - the explainability export.
    """
    if policy is None:
        policy = bundle.policy
    if apply_norm and bundle.norm_stats is not None:
        from .dataio import apply_normalization
        dataset = apply_normalization(dataset, bundle.norm_stats)
    records = []
    for inst in dataset.instances:
        state = init_stream(bundle, policy)
        trajectory = [] if collect_estimates else None
        for t in range(inst.length):
            outcome = observe(state, inst.values[t])
            if collect_estimates:
                trajectory.append(tuple(sorted(outcome.estimates.items())))
            if attention_sink is not None and policy.attention_mode == FULL:
                for c, alpha in attention_snapshot(state).items():
                    attention_sink(inst.id, c, t + 1, alpha)
        outcome = finalize(state, inst.length)
        predicted = outcome.class_index if outcome.status in (DECIDED, FINALIZED) else None
        records.append(DecisionRecord(
            truth=inst.label, predicted=predicted,
            tick=outcome.tick if predicted is not None else None,
            length=inst.length, instance_id=inst.id,
            estimates=tuple(trajectory) if collect_estimates else ()))
    return records
