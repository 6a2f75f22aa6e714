"""Prefix-sample construction, per-class regressor training, and grid sweeps.

Training samples pair every prefix X[1:t] of a series with the benefit target
for that tick, so one regressor learns the payoff surface of predicting its
class at any time. Each active class trains independently with its own
derived seed; an outcome-mode bundle holds one model, a type-mode bundle one
per class.
"""

from __future__ import annotations

import hashlib
import json
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import neuralcore as nc
from .benefit import OUTCOME, TYPE, BenefitSpec, build_targets
from .dataio import LabeledDataset, NormStats
from .errors import PersistenceError, TrainingError
from .streamdecide import DecisionPolicy, decide_dataset

BUNDLE_FORMAT_VERSION = 1


def derive_seed(*keys) -> int:
    """Deterministic child seed from a tuple of integer keys."""
    return int(np.random.SeedSequence([int(k) for k in keys]).generate_state(1)[0])


@dataclass(frozen=True)
class TrainConfig:
    hidden_dim: int = 16
    learning_rate: float = 0.01
    epochs: int = 100
    batch_size: int = 32
    stride: int = 1
    seed: int = 0
    patience: int = 10
    val_frac: float = 0.1
    attention_activation: str = "tanh"
    ms_ratio: Optional[float] = None     # bookkeeping for sweep manifests
    delta_frac: Optional[float] = None

    def __post_init__(self):
        if self.stride < 1:
            raise ValueError("stride must be >= 1")
        if self.batch_size < 1 or self.epochs < 1:
            raise ValueError("epochs and batch_size must be >= 1")

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in (
            "hidden_dim", "learning_rate", "epochs", "batch_size", "stride",
            "seed", "patience", "val_frac", "attention_activation",
            "ms_ratio", "delta_frac")}

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        return cls(**d)


class PrefixSampleSet(Sequence):
    """Prefix training samples over one dataset for one model class.

    Behaves as a sequence of (prefix, target) pairs; also exposes the packed
    arrays the kernels consume (Xcat/starts plus per-sample instance index,
    prefix length, and target).
    """

    def __init__(self, Xcat, starts, inst_of, tlen, targets, dim):
        self.Xcat = Xcat
        self.starts = starts
        self.inst_of = inst_of
        self.tlen = tlen
        self.targets = targets
        self.dim = dim

    def __len__(self) -> int:
        return len(self.targets)

    def __getitem__(self, k):
        if isinstance(k, slice):
            return [self[i] for i in range(*k.indices(len(self)))]
        j = self.inst_of[k]
        s0 = self.starts[j]
        return self.Xcat[s0:s0 + self.tlen[k]], float(self.targets[k])

    def all_indices(self) -> np.ndarray:
        return np.arange(len(self), dtype=np.int64)


def prefix_ticks(length: int, stride: int) -> list[int]:
    """Evaluation ticks 1, 1+stride, ... with the final tick always included."""
    ticks = list(range(1, length + 1, stride))
    if ticks[-1] != length:
        ticks.append(length)
    return ticks


def make_prefix_samples(dataset: LabeledDataset, spec: BenefitSpec,
                        model_class: int, stride: int = 1) -> PrefixSampleSet:
    if stride < 1:
        raise ValueError("stride must be >= 1")
    Xcat = np.ascontiguousarray(
        np.concatenate([inst.values for inst in dataset.instances], axis=0))
    lengths = [inst.length for inst in dataset.instances]
    starts = np.zeros(len(lengths), dtype=np.int64)
    np.cumsum(lengths[:-1], out=starts[1:])
    inst_of, tlen, targets = [], [], []
    for j, inst in enumerate(dataset.instances):
        values = build_targets(spec, inst, model_class)
        for t in prefix_ticks(inst.length, stride):
            inst_of.append(j)
            tlen.append(t)
            targets.append(values[t - 1])
    return PrefixSampleSet(
        Xcat=Xcat, starts=starts,
        inst_of=np.asarray(inst_of, dtype=np.int64),
        tlen=np.asarray(tlen, dtype=np.int64),
        targets=np.asarray(targets, dtype=np.float64),
        dim=dataset.dim)


def split_train_val(dataset: LabeledDataset, frac: float = 0.9, seed: int = 0):
    """Sequence-level stratified split; all prefixes of a series stay together.

    The train side gets floor(frac * n) instances (at least 1 on each side);
    validation slots are spread over the classes by largest remainder.
    """
    n = len(dataset)
    if n < 2:
        raise ValueError("need at least 2 instances to split")
    if not 0.0 < frac < 1.0:
        raise ValueError("frac must be in (0, 1)")
    rng = np.random.default_rng(seed)
    total_val = n - min(max(int(np.floor(frac * n)), 1), n - 1)
    labels = dataset.labels()
    by_class = {c: np.flatnonzero(labels == c) for c in range(dataset.num_classes)}

    if any(len(idx) < 2 for idx in by_class.values()):
        warnings.warn("a class has fewer than 2 instances; splitting unstratified",
                      stacklevel=2)
        idx = rng.permutation(n)
        val_idx = list(idx[:total_val])
        train_idx = list(idx[total_val:])
    else:
        quota = {c: total_val * len(idx) / n for c, idx in by_class.items()}
        take = {c: int(np.floor(q)) for c, q in quota.items()}
        leftovers = sorted(by_class, key=lambda c: (-(quota[c] - take[c]), c))
        for c in leftovers:
            if sum(take.values()) >= total_val:
                break
            if take[c] < len(by_class[c]) - 1:
                take[c] += 1
        train_idx, val_idx = [], []
        for c in sorted(by_class):
            idx = rng.permutation(by_class[c])
            k = min(take[c], len(idx) - 1)
            val_idx.extend(idx[:k])
            train_idx.extend(idx[k:])
    train_idx.sort()
    val_idx.sort()
    pick = lambda ids: replace(dataset, instances=tuple(dataset.instances[i] for i in ids))
    return pick(train_idx), pick(val_idx)


def _val_loss(params: nc.ModelParams, samples: PrefixSampleSet) -> float:
    K = nc.get_backend()
    preds = K.batch_predict(params.W, params.U, params.b, params.Wa, params.w,
                            params.w0, params.config.activation_id,
                            samples.Xcat, samples.starts, samples.inst_of,
                            samples.tlen, samples.all_indices())
    return float(np.mean((preds - samples.targets) ** 2))


def train_regressor(samples: PrefixSampleSet, val_samples: Optional[PrefixSampleSet],
                    config: TrainConfig):
    """Minibatch Adam on the prefix MSE; keeps the lowest-validation-loss weights.

    Returns (ModelParams, history) where history has per-epoch train/val loss.
    """
    if len(samples) == 0:
        raise ValueError("no training samples")
    K = nc.get_backend()
    model_cfg = nc.ModelConfig(input_dim=samples.dim, hidden_dim=config.hidden_dim,
                               attention_activation=config.attention_activation)
    params = nc.init_params(model_cfg, config.seed)
    state = nc.AdamState.create(model_cfg, lr=config.learning_rate)
    rng = np.random.default_rng(derive_seed(config.seed, 1))

    gp = nc.ModelParams(model_cfg, np.zeros(model_cfg.num_params))
    gw0 = gp.flat[-1:]
    act = model_cfg.activation_id

    history = {"train_loss": [], "val_loss": [], "best_epoch": None}
    best_flat = params.flat.copy()
    best_val = np.inf
    since_best = 0
    S = len(samples)

    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(S).astype(np.int64)
        total = 0.0
        for i in range(0, S, config.batch_size):
            sel = np.ascontiguousarray(order[i:i + config.batch_size])
            gp.flat.fill(0.0)
            batch_loss = K.batch_loss_grad(
                params.W, params.U, params.b, params.Wa, params.w, params.w0, act,
                samples.Xcat, samples.starts, samples.inst_of, samples.tlen,
                samples.targets, sel, gp.W, gp.U, gp.b, gp.Wa, gp.w, gw0)
            total += batch_loss * len(sel)
            params, state = nc.adam_step(params, gp.flat, state)
        train_loss = total / S
        if not np.isfinite(train_loss):
            raise TrainingError(f"training diverged (non-finite loss) at epoch {epoch}")
        val_loss = _val_loss(params, val_samples) if val_samples is not None and \
            len(val_samples) else train_loss
        history["train_loss"].append(train_loss)
        history["val_loss"].append(val_loss)
        if val_loss < best_val:
            best_val = val_loss
            best_flat = params.flat.copy()
            history["best_epoch"] = epoch
            since_best = 0
        else:
            since_best += 1
            if since_best >= config.patience:
                break
    return nc.ModelParams(model_cfg, best_flat), history


def resolve_delta_abs(spec: BenefitSpec, dataset: LabeledDataset,
                      delta_frac: float) -> float:
    """Absolute decision margin: delta_frac times the largest spread between
    per-class benefit targets over the training data.

    The per-tick spread of (L - t) * s - cost[l, c] across classes c does not
    depend on t, so it reduces to the cost-row spread of each present label.
    """
    active = spec.active_classes()
    spread = 0.0
    for label in np.unique(dataset.labels()):
        row = spec.cost[int(label), active]
        spread = max(spread, float(row.max() - row.min()))
    return delta_frac * spread


@dataclass
class TrainedBundle:
    """Everything needed to stream decisions: per-class models plus the payoff
    spec, the resolved decision policy, and the preprocessing stats."""

    models: dict                      # class index -> nc.RegressorModel
    spec: BenefitSpec
    policy: DecisionPolicy
    train_config: TrainConfig
    history: dict = field(default_factory=dict)   # class index -> loss history
    norm_stats: Optional[NormStats] = None
    label_mapping: dict = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        active = set(self.spec.active_classes())
        if set(self.models) != active:
            raise TrainingError(
                f"bundle must hold models for classes {sorted(active)}, "
                f"got {sorted(self.models)}")

    @property
    def model_config(self) -> nc.ModelConfig:
        return next(iter(self.models.values())).config


def train_bundle(dataset: LabeledDataset, spec: BenefitSpec, config: TrainConfig,
                 norm_stats: Optional[NormStats] = None) -> TrainedBundle:
    """Split, build prefix samples, and train one regressor per active class."""
    train_split, val_split = split_train_val(
        dataset, frac=1.0 - config.val_frac, seed=derive_seed(config.seed, 0))
    models, history = {}, {}
    for c in spec.active_classes():
        class_seed = derive_seed(config.seed, 1000 + c)
        class_cfg = replace(config, seed=class_seed)
        samples = make_prefix_samples(train_split, spec, c, config.stride)
        val_samples = make_prefix_samples(val_split, spec, c, config.stride)
        params, hist = train_regressor(samples, val_samples, class_cfg)
        models[c] = nc.RegressorModel(model_class=c, params=params, seed=class_seed)
        history[c] = hist
    delta_abs = 0.0
    if spec.mode == TYPE and config.delta_frac is not None:
        delta_abs = resolve_delta_abs(spec, train_split, config.delta_frac)
    policy = DecisionPolicy(mode=spec.mode, delta_abs=delta_abs)
    return TrainedBundle(models=models, spec=spec, policy=policy,
                         train_config=config, history=history,
                         norm_stats=norm_stats, label_mapping=dataset.label_mapping,
                         seed=config.seed)


# ---------------------------------------------------------------------------
# persistence


def _bundle_payload(bundle: TrainedBundle) -> dict:
    return {
        "spec": bundle.spec.to_dict(),
        "policy": bundle.policy.to_dict(),
        "train_config": bundle.train_config.to_dict(),
        "history": {str(c): h for c, h in sorted(bundle.history.items())},
        "norm_stats": bundle.norm_stats.to_dict() if bundle.norm_stats else None,
        "label_mapping": sorted((int(k), int(v)) for k, v in bundle.label_mapping.items()),
        "seed": bundle.seed,
        "models": {
            str(c): {
                "model_class": m.model_class,
                "config": m.config.to_dict(),
                "seed": m.seed,
                "flat": m.params.flat.tolist(),
            }
            for c, m in sorted(bundle.models.items())
        },
    }


def save_bundle(bundle: TrainedBundle, path) -> None:
    payload = _bundle_payload(bundle)
    body = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    checksum = hashlib.sha256(body.encode()).hexdigest()
    doc = {"format_version": BUNDLE_FORMAT_VERSION, "checksum": checksum,
           "payload": payload}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True)
        fh.write("\n")


def load_bundle(path) -> TrainedBundle:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise PersistenceError(f"cannot read bundle {path}: {exc}") from None
    if not isinstance(doc, dict) or "format_version" not in doc:
        raise PersistenceError(f"{path}: not a bundle file")
    version = doc["format_version"]
    if version != BUNDLE_FORMAT_VERSION:
        raise PersistenceError(
            f"{path}: format_version {version} unsupported (expected {BUNDLE_FORMAT_VERSION})")
    payload = doc.get("payload")
    body = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    if hashlib.sha256(body.encode()).hexdigest() != doc.get("checksum"):
        raise PersistenceError(f"{path}: checksum mismatch, file is corrupted")

    spec = BenefitSpec.from_dict(payload["spec"])
    models = {}
    for key, m in payload["models"].items():
        cfg = nc.ModelConfig.from_dict(m["config"])
        params = nc.ModelParams(cfg, np.asarray(m["flat"], dtype=np.float64))
        models[int(key)] = nc.RegressorModel(model_class=m["model_class"],
                                             params=params, seed=m["seed"])
    stats = payload.get("norm_stats")
    return TrainedBundle(
        models=models, spec=spec,
        policy=DecisionPolicy.from_dict(payload["policy"]),
        train_config=TrainConfig.from_dict(payload["train_config"]),
        history={int(c): h for c, h in payload["history"].items()},
        norm_stats=NormStats.from_dict(stats) if stats else None,
        label_mapping={k: v for k, v in payload["label_mapping"]},
        seed=payload["seed"])


# ---------------------------------------------------------------------------
# grid sweep


@dataclass(frozen=True)
class GridConfig:
    """Hyperparameter grids plus the fixed run settings shared by all points."""

    mode: str = OUTCOME
    s: float = 1.0
    ms_ratios: tuple = (1.0,)
    ms_ratio_factors: Optional[tuple] = None   # scaled by max series length
    hidden_dims: tuple = (16,)
    learning_rates: tuple = (0.01,)
    delta_fracs: Optional[tuple] = None        # type mode only
    default_class: Optional[int] = 0
    epochs: int = 100
    batch_size: int = 32
    stride: int = 1
    patience: int = 10
    val_frac: float = 0.1

    def resolved_ms_ratios(self, max_length: int) -> tuple:
        if self.ms_ratio_factors is not None:
            return tuple(f * max_length for f in self.ms_ratio_factors)
        return tuple(self.ms_ratios)

    @classmethod
    def from_dict(cls, d: dict) -> "GridConfig":
        d = dict(d)
        for key in ("ms_ratios", "ms_ratio_factors", "hidden_dims",
                    "learning_rates", "delta_fracs"):
            if d.get(key) is not None:
                d[key] = tuple(d[key])
        return cls(**d)


@dataclass
class GridResult:
    config: TrainConfig
    bundle: Optional[TrainedBundle]
    report: Optional[object]          # evalbench.EvalReport
    distance: float = float("inf")
    rank: int = -1
    is_best: bool = False
    error: Optional[str] = None


def _grid_points(dataset: LabeledDataset, grid: GridConfig, seed: int):
    ratios = grid.resolved_ms_ratios(dataset.max_length())
    deltas = grid.delta_fracs if (grid.mode == TYPE and grid.delta_fracs) else (None,)
    points = []
    for ms in ratios:
        for hd in grid.hidden_dims:
            for lr in grid.learning_rates:
                for df in deltas:
                    points.append(TrainConfig(
                        hidden_dim=hd, learning_rate=lr, epochs=grid.epochs,
                        batch_size=grid.batch_size, stride=grid.stride,
                        seed=derive_seed(seed, len(points)), patience=grid.patience,
                        val_frac=grid.val_frac, ms_ratio=ms, delta_frac=df))
    return points


def _eval_grid_point(dataset, grid, config):
    from .evalbench import evaluate

    spec = BenefitSpec.symmetric(grid.mode, dataset.num_classes, config.ms_ratio,
                                 s=grid.s, default_class=grid.default_class)
    bundle = train_bundle(dataset, spec, config)
    # score decisions on the same held-out split used for early stopping
    _, val_split = split_train_val(dataset, frac=1.0 - config.val_frac,
                                   seed=derive_seed(config.seed, 0))
    decisions = decide_dataset(bundle, val_split)
    positive = spec.active_classes()[0] if grid.mode == OUTCOME else 1
    report = evaluate(decisions, positive_class=positive, spec=spec)
    return bundle, report


def _run_grid_point(args):
    dataset, grid, config = args
    try:
        bundle, report = _eval_grid_point(dataset, grid, config)
        return GridResult(config=config, bundle=bundle, report=report)
    except Exception as exc:  # recorded per point, sweep continues
        return GridResult(config=config, bundle=None, report=None, error=str(exc))


def rank_grid_results(results: list[GridResult]) -> list[GridResult]:
    """Rank in place by Euclidean distance to (accuracy 1, tardiness 0); ties
    break toward lower tardiness, then lower M/s, then declaration order."""
    for res in results:
        if res.report is not None:
            res.distance = float(np.hypot(1.0 - res.report.accuracy,
                                          res.report.tardiness))
    order = sorted(
        range(len(results)),
        key=lambda i: (
            results[i].distance,
            results[i].report.tardiness if results[i].report else np.inf,
            results[i].config.ms_ratio if results[i].config.ms_ratio is not None else np.inf,
            i))
    for rank, i in enumerate(order):
        results[i].rank = rank
    if results and results[order[0]].report is not None:
        results[order[0]].is_best = True
    return results


def grid_search(dataset: LabeledDataset, grid: GridConfig, seed: int = 0,
                workers: int = 1) -> list[GridResult]:
    """Train every grid point and rank its validation report; see
    rank_grid_results for the ordering. Failures are recorded per point."""
    points = _grid_points(dataset, grid, seed)
    jobs = [(dataset, grid, cfg) for cfg in points]
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_grid_point, jobs))
    else:
        results = [_run_grid_point(job) for job in jobs]
    return rank_grid_results(results)
