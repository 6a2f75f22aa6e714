"""Command-line entry point.

Subcommands: preprocess, train, sweep, stream, evaluate, pareto, bench, synth.
Every run writes a manifest (resolved configuration, paths, seeds, version,
wall time) beside its primary output; with a fixed --seed, re-running a
command reproduces its non-timing outputs byte for byte.

Exit codes: 0 success, 1 runtime/numeric error, 2 usage error,
3 data-format error, 4 persistence error.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .benefit import OUTCOME, TYPE, BenefitSpec, DecisionRecord
from .dataio import (apply_normalization, fit_normalization, interpolate_missing,
                     load_auto, load_ucr, median_downsample, save_multivariate,
                     save_ucr, trim_artifacts)
from .errors import (ConfigError, DataFormatError, EarlyBenefitError,
                     PersistenceError)
from .evalbench import (EvalReport, SweepPoint, accuracy_at_tolerance,
                        bench_step_latency, bench_training_scaling, evaluate,
                        pareto_front)
from .streamdecide import FULL, DecisionPolicy, decide_dataset
from .training import (GridConfig, TrainConfig, TrainedBundle, derive_seed,
                       grid_search, load_bundle, save_bundle, train_bundle)

WORKERS_ENV = "EARLYBENEFIT_WORKERS"


class UsageError(EarlyBenefitError):
    pass


def _write_manifest(out_path, subcommand: str, args: argparse.Namespace,
                    inputs, outputs, wall_time: float) -> None:
    manifest = {
        "subcommand": subcommand,
        "config": {k: v for k, v in sorted(vars(args).items()) if k != "func"},
        "inputs": [str(p) for p in inputs],
        "outputs": [str(p) for p in outputs],
        "seed": getattr(args, "seed", None),
        "version": __version__,
        "wall_time_s": wall_time,
    }
    path = Path(str(out_path) + ".manifest.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")


def _load_benefit_spec(args, num_classes: int) -> BenefitSpec:
    if getattr(args, "benefit", None):
        return BenefitSpec.load(args.benefit)
    if getattr(args, "ms_ratio", None) is not None:
        default = args.default_class if args.mode == OUTCOME else None
        return BenefitSpec.symmetric(args.mode, num_classes, args.ms_ratio,
                                     default_class=default)
    raise UsageError("provide --benefit <file> or --ms-ratio <R>")


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


# ---------------------------------------------------------------------------
# subcommand implementations


def _cmd_preprocess(args, argv) -> int:
    dataset = load_auto(args.input)
    with open(args.input, encoding="utf-8") as fh:
        was_ucr = not fh.readline().lstrip().startswith("{")

    # honor the order the operations were given on the command line
    flag_order = []
    for flag, name in (("--interpolate", "interpolate"), ("--trim", "trim"),
                       ("--downsample", "downsample")):
        if flag in argv:
            flag_order.append((argv.index(flag), name))
    ops = [name for _, name in sorted(flag_order)]

    instances = list(dataset.instances)
    for op in ops:
        if op == "interpolate":
            instances = [interpolate_missing(inst) for inst in instances]
        elif op == "trim":
            lead_sigma, trail_eps = args.trim
            instances = [trim_artifacts(inst, lead_sigma, trail_eps)
                         for inst in instances]
        elif op == "downsample":
            instances = [median_downsample(inst, args.downsample)
                         for inst in instances]
    from dataclasses import replace
    dataset = replace(dataset, instances=tuple(instances))

    if args.normalize_with:
        ref = load_auto(args.normalize_with)
        ref_instances = list(ref.instances)
        for op in ops:  # the reference must undergo the same pipeline
            if op == "interpolate":
                ref_instances = [interpolate_missing(i) for i in ref_instances]
            elif op == "trim":
                ref_instances = [trim_artifacts(i, *args.trim) for i in ref_instances]
            elif op == "downsample":
                ref_instances = [median_downsample(i, args.downsample)
                                 for i in ref_instances]
        stats = fit_normalization(replace(ref, instances=tuple(ref_instances)))
        dataset = apply_normalization(dataset, stats)
        ops.append("normalize")

    lengths = {inst.length for inst in dataset.instances}
    if was_ucr and dataset.dim == 1 and len(lengths) == 1:
        save_ucr(dataset, args.out)
    else:
        save_multivariate(dataset, args.out)
    args.ops_applied = ops
    return 0


def _cmd_synth(args, argv) -> int:
    from .synth import write_synth_files

    lo, hi = args.len_range
    write_synth_files(args.out, args.n, args.dim, (lo, hi), args.drift,
                      args.noise, args.seed, test_frac=args.test_frac)
    return 0


def _train_config_from_args(args) -> TrainConfig:
    return TrainConfig(hidden_dim=args.hidden, learning_rate=args.lr,
                       epochs=args.epochs, batch_size=args.batch,
                       stride=args.stride, seed=args.seed, patience=args.patience,
                       val_frac=args.val_frac, ms_ratio=args.ms_ratio,
                       delta_frac=args.delta_frac)


def _cmd_train(args, argv) -> int:
    dataset = load_auto(args.data)
    spec = _load_benefit_spec(args, dataset.num_classes)
    stats = None
    if args.normalize:
        stats = fit_normalization(dataset)
        dataset = apply_normalization(dataset, stats)
    config = _train_config_from_args(args)
    bundle = train_bundle(dataset, spec, config, norm_stats=stats)
    save_bundle(bundle, args.out)
    return 0


SWEEP_COLUMNS = (("rank", "config_id", "ms_ratio", "hidden_dim", "learning_rate",
                  "delta_frac", "seed")
                 + tuple(f"val_{f}" for f in EvalReport.FIELDS)
                 + ("distance", "is_best", "error", "bundle"))


def _config_id(config: TrainConfig) -> str:
    delta = "-" if config.delta_frac is None else repr(config.delta_frac)
    return (f"ms{_fmt(config.ms_ratio)}_h{config.hidden_dim}"
            f"_lr{_fmt(config.learning_rate)}_d{delta}")


def _cmd_sweep(args, argv) -> int:
    dataset = load_auto(args.data)
    with open(args.grids, encoding="utf-8") as fh:
        grid = GridConfig.from_dict(json.load(fh))
    if args.normalize:
        stats = fit_normalization(dataset)
        dataset = apply_normalization(dataset, stats)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    results = grid_search(dataset, grid, seed=args.seed, workers=args.workers)

    rows = []
    for i, res in enumerate(results):
        bundle_path = ""
        if res.bundle is not None:
            bundle_path = f"point_{i:03d}.bundle.json"
            save_bundle(res.bundle, out_dir / bundle_path)
        row = {
            "rank": res.rank,
            "config_id": _config_id(res.config),
            "ms_ratio": _fmt(res.config.ms_ratio),
            "hidden_dim": res.config.hidden_dim,
            "learning_rate": _fmt(res.config.learning_rate),
            "delta_frac": _fmt(res.config.delta_frac),
            "seed": res.config.seed,
            "distance": _fmt(res.distance if res.report else None),
            "is_best": int(res.is_best),
            "error": res.error or "",
            "bundle": bundle_path,
        }
        for field in EvalReport.FIELDS:
            row[f"val_{field}"] = _fmt(getattr(res.report, field)) if res.report else ""
        rows.append(row)
    rows.sort(key=lambda r: r["rank"])
    manifest_csv = out_dir / "ranked_manifest.csv"
    with open(manifest_csv, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=SWEEP_COLUMNS)
        writer.writeheader()
        writer.writerows(rows)
    return 0


DECISION_COLUMNS = ("instance_id", "truth", "predicted", "tick", "length")


def write_decisions_csv(records, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(DECISION_COLUMNS)
        for rec in records:
            writer.writerow([rec.instance_id, rec.truth,
                             "" if rec.predicted is None else rec.predicted,
                             "" if rec.tick is None else rec.tick,
                             rec.length])


def read_decisions_csv(path) -> list:
    records = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = set(DECISION_COLUMNS) - set(reader.fieldnames or ())
        if missing:
            raise DataFormatError(f"{path}: missing columns {sorted(missing)}")
        for i, row in enumerate(reader, start=2):
            try:
                records.append(DecisionRecord(
                    truth=int(row["truth"]),
                    predicted=int(row["predicted"]) if row["predicted"] != "" else None,
                    tick=int(row["tick"]) if row["tick"] != "" else None,
                    length=int(row["length"]),
                    instance_id=row["instance_id"]))
            except ValueError as exc:
                raise DataFormatError(f"{path}: row {i}: {exc}") from None
    if not records:
        raise DataFormatError(f"{path}: no decision records")
    return records


def _cmd_stream(args, argv) -> int:
    bundle = load_bundle(args.bundle)
    dataset = load_auto(args.data)
    policy = bundle.policy
    if args.attention_mode:
        from dataclasses import replace
        policy = replace(policy, attention_mode=args.attention_mode)

    attention_rows = []
    sink = None
    if args.attention_export:
        def sink(inst_id, cls, tick, alpha):
            attention_rows.append([inst_id, cls, tick] + [repr(float(a)) for a in alpha])

    records = decide_dataset(bundle, dataset, policy=policy,
                             collect_estimates=args.trace, attention_sink=sink)
    write_decisions_csv(records, args.out)

    if args.attention_export:
        with open(args.attention_export, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["instance_id", "model_class", "eval_tick", "alpha..."])
            writer.writerows(attention_rows)
    if args.trace:
        trace_path = str(args.out) + ".trace.csv"
        with open(trace_path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["instance_id", "tick", "model_class", "estimate"])
            for rec in records:
                for tick, estimates in enumerate(rec.estimates, start=1):
                    for cls, value in estimates:
                        writer.writerow([rec.instance_id, tick, cls, repr(value)])
    return 0


def _cmd_evaluate(args, argv) -> int:
    records = read_decisions_csv(args.decisions)
    spec = BenefitSpec.load(args.benefit) if args.benefit else None
    positive = args.positive_class
    if positive is None:
        if spec is not None and spec.mode == OUTCOME:
            positive = spec.active_classes()[0]
        else:
            positive = 1
    report = evaluate(records, positive_class=positive, spec=spec)
    out = args.out or (str(args.decisions) + ".report.csv")
    args.out = out
    with open(out, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(EvalReport.FIELDS)
        writer.writerow([_fmt(v) for v in (report.precision, report.recall,
                                           report.f1, report.accuracy,
                                           report.tardiness, report.total_benefit,
                                           report.unclassified, report.n)])
    for name in EvalReport.FIELDS:
        print(f"{name}: {getattr(report, name)}")
    return 0


def _cmd_pareto(args, argv) -> int:
    points = []
    with open(args.points, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        fields = set(reader.fieldnames or ())
        tard_col = "tardiness" if "tardiness" in fields else "val_tardiness"
        acc_col = "accuracy" if "accuracy" in fields else "val_accuracy"
        if not {"config_id", tard_col, acc_col} <= fields:
            raise DataFormatError(
                f"{args.points}: need config_id plus tardiness/accuracy "
                f"(or val_-prefixed) columns")
        for row in reader:
            if row[tard_col] == "" or row[acc_col] == "":
                continue  # failed sweep points carry no metrics
            points.append(SweepPoint(config_id=row["config_id"],
                                     tardiness=float(row[tard_col]),
                                     accuracy=float(row[acc_col])))
    if not points:
        raise DataFormatError(f"{args.points}: no sweep points")
    front = {p.config_id for p in pareto_front(points)}
    with open(args.out, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["config_id", "tardiness", "accuracy", "on_front"])
        for p in points:
            writer.writerow([p.config_id, _fmt(p.tardiness), _fmt(p.accuracy),
                             int(p.config_id in front)])
    if args.tolerances:
        tol_path = args.tolerance_out or (str(args.out) + ".tolerance.csv")
        with open(tol_path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["tolerance", "best_accuracy"])
            for tol in args.tolerances:
                best = accuracy_at_tolerance(points, tol)
                writer.writerow([_fmt(tol), "-" if best is None else _fmt(best)])
    return 0


def _random_bundle(dim: int, hidden: int, seed: int) -> TrainedBundle:
    """Untrained bundle for latency benchmarking."""
    from . import neuralcore as nc

    cfg = nc.ModelConfig(input_dim=dim, hidden_dim=hidden)
    params = nc.init_params(cfg, seed)
    spec = BenefitSpec.symmetric(OUTCOME, 2, 1.0, default_class=0)
    model = nc.RegressorModel(model_class=1, params=params, seed=seed)
    return TrainedBundle(models={1: model}, spec=spec,
                         policy=DecisionPolicy(mode=OUTCOME),
                         train_config=TrainConfig(hidden_dim=hidden, seed=seed),
                         seed=seed)


def _cmd_bench(args, argv) -> int:
    if args.kind == "scaling":
        dataset = load_auto(args.data)
        spec = _load_benefit_spec(args, dataset.num_classes)
        config = _train_config_from_args(args)
        rows, r2 = bench_training_scaling(dataset, args.fractions, spec, config,
                                          seed=args.seed)
        with open(args.out, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["fraction", "n_sequences", "seconds"])
            for frac, n, seconds in rows:
                writer.writerow([_fmt(frac), n, _fmt(seconds)])
            writer.writerow(["r_squared", "", "-" if r2 is None else _fmt(r2)])
        print(f"linear-fit R^2: {r2}")
    elif args.kind == "latency":
        bundle = _random_bundle(args.dim, args.hidden, args.seed)
        from dataclasses import replace
        policy = replace(bundle.policy, attention_mode=args.attention_mode)
        rng = np.random.default_rng(args.seed)
        series = rng.uniform(0.0, 1.0, size=(args.ticks, args.dim))
        medians = bench_step_latency(bundle, policy, series, repeats=args.repeats)
        with open(args.out, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["tick", "median_seconds"])
            for t, m in enumerate(medians, start=1):
                writer.writerow([t, _fmt(float(m))])
        early = float(np.median(medians[5:15])) if args.ticks >= 15 else float(medians[0])
        late = float(np.median(medians[-10:]))
        print(f"median per-tick latency: early={early * 1e3:.4f} ms "
              f"late={late * 1e3:.4f} ms ratio={late / early:.2f}")
    elif args.kind == "backends":
        rows = _bench_backends(args)
        with open(args.out, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["backend", "op", "seconds", "samples_per_s"])
            writer.writerows(rows)
    else:
        raise UsageError(f"unknown bench kind {args.kind!r}")
    return 0


def _bench_backends(args):
    """Throughput of the hot kernels under each available backend."""
    from . import neuralcore as nc

    cfg = nc.ModelConfig(input_dim=args.dim, hidden_dim=args.hidden)
    params = nc.init_params(cfg, args.seed)
    rng = np.random.default_rng(args.seed)
    n, L = 24, 64
    Xcat = np.ascontiguousarray(rng.normal(size=(n * L, args.dim)))
    starts = np.arange(0, n * L, L, dtype=np.int64)
    inst_of = np.repeat(np.arange(n, dtype=np.int64), L)
    tlen = np.tile(np.arange(1, L + 1, dtype=np.int64), n)
    targets = rng.normal(size=n * L)
    sel = np.arange(n * L, dtype=np.int64)

    rows = []
    for name in ("python", "cython"):
        try:
            K = nc.load_backend(name)
        except ImportError:
            print(f"backend {name}: not available")
            continue
        gp = nc.ModelParams(cfg, np.zeros(cfg.num_params))
        gw0 = gp.flat[-1:]
        for op in ("train", "predict"):
            t0 = time.perf_counter()
            if op == "train":
                gp.flat.fill(0.0)
                K.batch_loss_grad(params.W, params.U, params.b, params.Wa,
                                  params.w, params.w0, 0, Xcat, starts, inst_of,
                                  tlen, targets, sel, gp.W, gp.U, gp.b, gp.Wa,
                                  gp.w, gw0)
            else:
                K.batch_predict(params.W, params.U, params.b, params.Wa,
                                params.w, params.w0, 0, Xcat, starts, inst_of,
                                tlen, sel)
            dt = time.perf_counter() - t0
            rate = len(sel) / dt
            rows.append([name, op, repr(dt), repr(rate)])
            print(f"{name:7s} {op:8s} {dt:8.3f}s  {rate:10.0f} samples/s")
    return rows


# ---------------------------------------------------------------------------
# argument parsing


def _float_pair(text: str):
    parts = text.split(",")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"expected two comma-separated values, got {text!r}")
    return float(parts[0]), float(parts[1])


def _int_pair(text: str):
    a, b = _float_pair(text)
    return int(a), int(b)


def _float_list(text: str):
    return [float(p) for p in text.split(",") if p != ""]


def _add_train_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--benefit", help="benefit spec JSON file")
    p.add_argument("--ms-ratio", type=float, help="symmetric cost M with s=1")
    p.add_argument("--mode", choices=(OUTCOME, TYPE), default=OUTCOME)
    p.add_argument("--default-class", type=int, default=0)
    p.add_argument("--hidden", type=int, default=16)
    p.add_argument("--lr", type=float, default=0.01)
    p.add_argument("--stride", type=int, default=1)
    p.add_argument("--epochs", type=int, default=100)
    p.add_argument("--batch", type=int, default=32)
    p.add_argument("--patience", type=int, default=10)
    p.add_argument("--val-frac", type=float, default=0.1)
    p.add_argument("--delta-frac", type=float, default=None)
    p.add_argument("--normalize", action="store_true",
                   help="fit [0,1] stats on this data and store them in the bundle")
    p.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="earlybenefit",
        description="Benefit-driven early classification of time series.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("preprocess", help="interpolate/trim/downsample/normalize")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--interpolate", action="store_true")
    p.add_argument("--trim", type=_float_pair, metavar="LEAD_SIGMA,TRAIL_EPS")
    p.add_argument("--downsample", type=int, metavar="W")
    p.add_argument("--normalize-with", metavar="TRAIN")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_preprocess)

    p = sub.add_parser("synth", help="generate a synthetic outcome dataset")
    p.add_argument("--out", required=True, help="output path prefix")
    p.add_argument("--n", type=int, default=200)
    p.add_argument("--dim", type=int, default=8)
    p.add_argument("--len-range", type=_int_pair, default=(24, 96))
    p.add_argument("--drift", type=float, default=0.5)
    p.add_argument("--noise", type=float, default=0.1)
    p.add_argument("--test-frac", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("train", help="train one bundle")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    _add_train_flags(p)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("sweep", help="train a hyperparameter grid")
    p.add_argument("--data", required=True)
    p.add_argument("--grids", required=True, help="grid config JSON")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--normalize", action="store_true")
    p.add_argument("--workers", type=int,
                   default=int(os.environ.get(WORKERS_ENV, "1")))
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("stream", help="replay test data through the decision engine")
    p.add_argument("--bundle", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True, help="decisions CSV")
    p.add_argument("--attention-export", metavar="CSV")
    p.add_argument("--attention-mode", choices=(FULL, "last-state-only"))
    p.add_argument("--trace", action="store_true",
                   help="also write per-tick benefit estimates")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_stream)

    p = sub.add_parser("evaluate", help="score a decisions CSV")
    p.add_argument("--decisions", required=True)
    p.add_argument("--benefit", help="benefit spec JSON file")
    p.add_argument("--positive-class", type=int)
    p.add_argument("--out")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("pareto", help="front membership and tolerance table")
    p.add_argument("--points", required=True,
                   help="CSV with config_id,tardiness,accuracy columns")
    p.add_argument("--out", required=True)
    p.add_argument("--tolerances", type=_float_list, metavar="0.5,0.75")
    p.add_argument("--tolerance-out")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_pareto)

    p = sub.add_parser("bench", help="runtime benchmarks")
    p.add_argument("--kind", choices=("scaling", "latency", "backends"),
                   required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--data")
    p.add_argument("--fractions", type=_float_list,
                   default=[0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0])
    p.add_argument("--dim", type=int, default=107)
    p.add_argument("--hidden", type=int, default=32)
    p.add_argument("--ticks", type=int, default=500)
    p.add_argument("--repeats", type=int, default=5)
    p.add_argument("--attention-mode", choices=(FULL, "last-state-only"),
                   default="last-state-only")
    p.add_argument("--benefit")
    p.add_argument("--ms-ratio", type=float, default=1.0)
    p.add_argument("--mode", choices=(OUTCOME, TYPE), default=OUTCOME)
    p.add_argument("--default-class", type=int, default=0)
    p.add_argument("--lr", type=float, default=0.01)
    p.add_argument("--stride", type=int, default=1)
    p.add_argument("--epochs", type=int, default=20)
    p.add_argument("--batch", type=int, default=32)
    p.add_argument("--patience", type=int, default=10)
    p.add_argument("--val-frac", type=float, default=0.1)
    p.add_argument("--delta-frac", type=float)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_bench)

    return parser


def dispatch(argv=None) -> int:
    """Parse argv, run the subcommand, and write the run manifest."""
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    t0 = time.perf_counter()
    try:
        code = args.func(args, argv)
    except UsageError as exc:
        print(f"error[usage]: {exc}", file=sys.stderr)
        return 2
    except PersistenceError as exc:
        print(f"error[persistence]: {exc}", file=sys.stderr)
        return 4
    except DataFormatError as exc:
        print(f"error[data-format]: {exc}", file=sys.stderr)
        return 3
    except FileNotFoundError as exc:
        print(f"error[data-format]: cannot read {exc.filename}", file=sys.stderr)
        return 3
    except (EarlyBenefitError, ValueError) as exc:
        category = "config" if isinstance(exc, ConfigError) else "runtime"
        print(f"error[{category}]: {exc}", file=sys.stderr)
        return 1
    wall = time.perf_counter() - t0
    if code == 0 and getattr(args, "out", None):
        _write_manifest(args.out, args.subcommand, args,
                        inputs=[p for p in (getattr(args, "data", None),
                                            getattr(args, "input", None),
                                            getattr(args, "bundle", None),
                                            getattr(args, "decisions", None),
                                            getattr(args, "points", None)) if p],
                        outputs=[args.out], wall_time=wall)
    return code


def main() -> None:
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
