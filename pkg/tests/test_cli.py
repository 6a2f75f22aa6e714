"""Command-line surface: subcommands, formats, exit codes, manifests."""

import csv
import json
from pathlib import Path

import numpy as np
import pytest

from earlybenefit.cli import dispatch

SURVIVAL, DEATH = 0, 1


def run(*argv):
    return dispatch(list(argv))


@pytest.fixture()
def synth_files(tmp_path):
    prefix = str(tmp_path / "toy")
    code = run("synth", "--out", prefix, "--n", "24", "--dim", "3",
               "--len-range", "8,16", "--drift", "1.0", "--noise", "0.05",
               "--test-frac", "0.25", "--seed", "5")
    assert code == 0
    return Path(prefix + "_train.jsonl"), Path(prefix + "_test.jsonl")


class TestSynth:
    def test_files_written_with_sidecar(self, tmp_path):
        prefix = str(tmp_path / "s")
        assert run("synth", "--out", prefix, "--n", "10", "--dim", "2",
                   "--len-range", "5,9", "--seed", "1") == 0
        assert (tmp_path / "s.jsonl").exists()
        meta = json.loads((tmp_path / "s_meta.json").read_text())
        assert meta["n"] == 10 and meta["unfavorable_class"] == 1

    def test_fixed_seed_reproduces_bytes(self, tmp_path):
        a, b = str(tmp_path / "a"), str(tmp_path / "b")
        for prefix in (a, b):
            assert run("synth", "--out", prefix, "--n", "12", "--dim", "2",
                       "--len-range", "4,8", "--seed", "9") == 0
        assert Path(a + ".jsonl").read_bytes() == Path(b + ".jsonl").read_bytes()

    def test_lengths_within_range(self, tmp_path):
        from earlybenefit.dataio import load_multivariate
        prefix = str(tmp_path / "r")
        assert run("synth", "--out", prefix, "--n", "30", "--dim", "4",
                   "--len-range", "6,11", "--seed", "3") == 0
        ds = load_multivariate(prefix + ".jsonl")
        assert all(6 <= i.length <= 11 for i in ds.instances)
        assert ds.dim == 4


class TestPreprocess:
    def test_pipeline_and_roundtrip(self, tmp_path):
        src = tmp_path / "in.jsonl"
        rows = [
            {"id": "a", "label": 0, "series": [[1.0], [None], [3.0], [0.0]]},
            {"id": "b", "label": 1, "series": [[2.0], [4.0], [6.0]]},
        ]
        src.write_text("\n".join(json.dumps(r) for r in rows) + "\n")
        out = tmp_path / "out.jsonl"
        assert run("preprocess", "--in", str(src), "--out", str(out),
                   "--interpolate") == 0
        from earlybenefit.dataio import load_multivariate
        ds = load_multivariate(out)
        assert not any(i.has_missing() for i in ds.instances)
        np.testing.assert_array_equal(ds.instances[0].values[:, 0], [1, 2, 3, 0])

    def test_normalize_with_train_stats(self, tmp_path):
        train = tmp_path / "train.csv"
        train.write_text("0,2.0,4.0\n1,6.0,2.0\n")
        test = tmp_path / "test.csv"
        test.write_text("0,8.0,0.0\n1,4.0,4.0\n")
        out = tmp_path / "norm.csv"
        assert run("preprocess", "--in", str(test), "--out", str(out),
                   "--normalize-with", str(train)) == 0
        from earlybenefit.dataio import load_ucr
        ds = load_ucr(out)
        np.testing.assert_allclose(ds.instances[0].values[:, 0], [1.0, 0.0])

    def test_ucr_stays_ucr_when_lengths_survive(self, tmp_path):
        src = tmp_path / "in.csv"
        src.write_text("0,1.0,2.0\n1,3.0,4.0\n")
        out = tmp_path / "out.csv"
        assert run("preprocess", "--in", str(src), "--out", str(out),
                   "--downsample", "1") == 0
        assert not out.read_text().startswith("{")


class TestTrainStreamEvaluate:
    def test_full_pipeline(self, tmp_path, synth_files):
        train, test = synth_files
        bundle = tmp_path / "model.bundle.json"
        assert run("train", "--data", str(train), "--ms-ratio", "20",
                   "--mode", "outcome", "--hidden", "4", "--lr", "0.02",
                   "--epochs", "4", "--stride", "2", "--seed", "3",
                   "--normalize", "--out", str(bundle)) == 0
        assert bundle.exists()
        assert Path(str(bundle) + ".manifest.json").exists()

        decisions = tmp_path / "decisions.csv"
        assert run("stream", "--bundle", str(bundle), "--data", str(test),
                   "--out", str(decisions), "--trace") == 0
        rows = list(csv.DictReader(open(decisions)))
        assert len(rows) == 6  # 24 * 0.25
        assert Path(str(decisions) + ".trace.csv").exists()

        spec_path = tmp_path / "benefit.json"
        from earlybenefit.benefit import BenefitSpec
        BenefitSpec.symmetric("outcome", 2, 20.0, default_class=0).save(spec_path)
        report = tmp_path / "report.csv"
        assert run("evaluate", "--decisions", str(decisions), "--benefit",
                   str(spec_path), "--out", str(report)) == 0
        row = next(csv.DictReader(open(report)))
        assert 0.0 <= float(row["accuracy"]) <= 1.0
        assert int(row["n"]) == 6

    def test_stream_determinism(self, tmp_path, synth_files):
        train, test = synth_files
        bundle = tmp_path / "m.json"
        assert run("train", "--data", str(train), "--ms-ratio", "10",
                   "--hidden", "4", "--epochs", "3", "--seed", "1",
                   "--out", str(bundle)) == 0
        d1, d2 = tmp_path / "d1.csv", tmp_path / "d2.csv"
        for out in (d1, d2):
            assert run("stream", "--bundle", str(bundle), "--data", str(test),
                       "--out", str(out)) == 0
        assert d1.read_bytes() == d2.read_bytes()

    def test_attention_export(self, tmp_path, synth_files):
        train, test = synth_files
        bundle = tmp_path / "m.json"
        assert run("train", "--data", str(train), "--ms-ratio", "10",
                   "--hidden", "4", "--epochs", "2", "--seed", "1",
                   "--out", str(bundle)) == 0
        attn = tmp_path / "attn.csv"
        assert run("stream", "--bundle", str(bundle), "--data", str(test),
                   "--out", str(tmp_path / "d.csv"),
                   "--attention-export", str(attn)) == 0
        lines = attn.read_text().strip().splitlines()
        first = lines[1].split(",")
        # instance, class, tick=1 -> a single weight column
        assert first[2] == "1" and len(first) == 4
        assert float(first[3]) == 1.0


class TestSweep:
    def test_grid_manifest_and_bundles(self, tmp_path, synth_files):
        train, _ = synth_files
        grids = tmp_path / "grids.json"
        grids.write_text(json.dumps({
            "mode": "outcome", "ms_ratios": [5.0, 20.0], "hidden_dims": [4],
            "learning_rates": [0.02], "epochs": 3, "stride": 2,
            "val_frac": 0.2}))
        out_dir = tmp_path / "sweep"
        assert run("sweep", "--data", str(train), "--grids", str(grids),
                   "--out", str(out_dir), "--seed", "2") == 0
        rows = list(csv.DictReader(open(out_dir / "ranked_manifest.csv")))
        assert len(rows) == 2
        assert rows[0]["rank"] == "0" and rows[0]["is_best"] == "1"
        assert all((out_dir / r["bundle"]).exists() for r in rows if r["bundle"])

    def test_sweep_manifest_feeds_pareto(self, tmp_path, synth_files):
        train, _ = synth_files
        grids = tmp_path / "grids.json"
        grids.write_text(json.dumps({
            "mode": "outcome", "ms_ratios": [5.0, 20.0], "hidden_dims": [4],
            "learning_rates": [0.02], "epochs": 3, "val_frac": 0.2}))
        out_dir = tmp_path / "sweep"
        assert run("sweep", "--data", str(train), "--grids", str(grids),
                   "--out", str(out_dir), "--seed", "2") == 0
        front = tmp_path / "front.csv"
        assert run("pareto", "--points", str(out_dir / "ranked_manifest.csv"),
                   "--out", str(front), "--tolerances", "0.5,1.0") == 0
        rows = list(csv.DictReader(open(front)))
        assert len(rows) == 2 and any(r["on_front"] == "1" for r in rows)

    def test_reloaded_bundle_reproduces_stored_val_report(self, tmp_path,
                                                          synth_files):
        train, _ = synth_files
        grids = tmp_path / "grids.json"
        grids.write_text(json.dumps({
            "mode": "outcome", "ms_ratios": [10.0], "hidden_dims": [4],
            "learning_rates": [0.02], "epochs": 3, "val_frac": 0.2}))
        out_dir = tmp_path / "sweep"
        assert run("sweep", "--data", str(train), "--grids", str(grids),
                   "--out", str(out_dir), "--seed", "6") == 0
        row = next(csv.DictReader(open(out_dir / "ranked_manifest.csv")))

        from earlybenefit.benefit import BenefitSpec
        from earlybenefit.dataio import load_multivariate
        from earlybenefit.evalbench import evaluate
        from earlybenefit.streamdecide import decide_dataset
        from earlybenefit.training import (derive_seed, load_bundle,
                                           split_train_val)

        bundle = load_bundle(out_dir / row["bundle"])
        dataset = load_multivariate(train)
        _, val_split = split_train_val(
            dataset, frac=1.0 - bundle.train_config.val_frac,
            seed=derive_seed(bundle.train_config.seed, 0))
        spec = BenefitSpec.symmetric("outcome", 2, bundle.train_config.ms_ratio,
                                     default_class=0)
        report = evaluate(decide_dataset(bundle, val_split),
                          positive_class=1, spec=spec)
        assert repr(report.accuracy) == row["val_accuracy"]
        assert repr(report.tardiness) == row["val_tardiness"]
        assert repr(report.total_benefit) == row["val_total_benefit"]
        assert str(report.n) == row["val_n"]

    def test_type_mode_sweep_with_delta_grid(self, tmp_path, synth_files):
        train, _ = synth_files
        grids = tmp_path / "grids.json"
        grids.write_text(json.dumps({
            "mode": "type", "default_class": None, "ms_ratios": [6.0],
            "hidden_dims": [4], "learning_rates": [0.02],
            "delta_fracs": [0.4, 0.7], "epochs": 2, "val_frac": 0.2}))
        out_dir = tmp_path / "tsweep"
        assert run("sweep", "--data", str(train), "--grids", str(grids),
                   "--out", str(out_dir), "--seed", "1") == 0
        rows = list(csv.DictReader(open(out_dir / "ranked_manifest.csv")))
        assert len(rows) == 2
        assert {r["delta_frac"] for r in rows} == {"0.4", "0.7"}

    def test_sweep_replay_identical(self, tmp_path, synth_files):
        train, _ = synth_files
        grids = tmp_path / "grids.json"
        grids.write_text(json.dumps({
            "mode": "outcome", "ms_ratios": [8.0], "hidden_dims": [4],
            "learning_rates": [0.02], "epochs": 2, "val_frac": 0.2}))
        outs = []
        for tag in ("s1", "s2"):
            out_dir = tmp_path / tag
            assert run("sweep", "--data", str(train), "--grids", str(grids),
                       "--out", str(out_dir), "--seed", "4") == 0
            outs.append((out_dir / "ranked_manifest.csv").read_bytes())
        assert outs[0] == outs[1]

    def test_parallel_sweep_matches_serial(self, tmp_path, synth_files):
        train, _ = synth_files
        grids = tmp_path / "grids.json"
        grids.write_text(json.dumps({
            "mode": "outcome", "ms_ratios": [5.0, 15.0], "hidden_dims": [4],
            "learning_rates": [0.02], "epochs": 2, "val_frac": 0.2}))
        outs = []
        for tag, workers in (("serial", "1"), ("parallel", "2")):
            out_dir = tmp_path / tag
            assert run("sweep", "--data", str(train), "--grids", str(grids),
                       "--out", str(out_dir), "--seed", "4",
                       "--workers", workers) == 0
            outs.append((out_dir / "ranked_manifest.csv").read_bytes())
        assert outs[0] == outs[1]


class TestPareto:
    def test_front_and_tolerance_table(self, tmp_path):
        points = tmp_path / "points.csv"
        with open(points, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["config_id", "tardiness", "accuracy"])
            writer.writerows([["a", 0.2, 0.90], ["b", 0.3, 0.85], ["c", 0.5, 0.95]])
        out = tmp_path / "front.csv"
        assert run("pareto", "--points", str(points), "--out", str(out),
                   "--tolerances", "0.25,0.5,0.1") == 0
        rows = {r["config_id"]: r["on_front"] for r in csv.DictReader(open(out))}
        assert rows == {"a": "1", "b": "0", "c": "1"}
        tol_rows = list(csv.DictReader(open(str(out) + ".tolerance.csv")))
        assert tol_rows[0]["best_accuracy"] == "0.9"
        assert tol_rows[1]["best_accuracy"] == "0.95"
        assert tol_rows[2]["best_accuracy"] == "-"


class TestBench:
    def test_backend_comparison_runs(self, tmp_path):
        out = tmp_path / "backends.csv"
        assert run("bench", "--kind", "backends", "--dim", "2", "--hidden", "4",
                   "--out", str(out)) == 0
        rows = list(csv.reader(open(out)))
        assert rows[0] == ["backend", "op", "seconds", "samples_per_s"]
        assert len(rows) >= 3

    def test_latency_bench_writes_per_tick_medians(self, tmp_path):
        out = tmp_path / "lat.csv"
        assert run("bench", "--kind", "latency", "--dim", "3", "--hidden", "4",
                   "--ticks", "20", "--repeats", "2", "--out", str(out)) == 0
        rows = list(csv.DictReader(open(out)))
        assert len(rows) == 20


class TestExitCodes:
    def test_unknown_flag_is_usage_error(self):
        assert run("evaluate", "--no-such-flag") == 2

    def test_unknown_subcommand_is_usage_error(self):
        assert run("frobnicate") == 2

    def test_missing_file_is_data_error(self, tmp_path):
        assert run("train", "--data", str(tmp_path / "nope.csv"),
                   "--ms-ratio", "1", "--out", str(tmp_path / "b.json")) == 3

    def test_corrupt_bundle_is_persistence_error(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{}")
        data = tmp_path / "d.jsonl"
        data.write_text(json.dumps({"id": "a", "label": 0, "series": [[1.0]]})
                        + "\n" + json.dumps({"id": "b", "label": 1,
                                             "series": [[2.0]]}) + "\n")
        assert run("stream", "--bundle", str(bad), "--data", str(data),
                   "--out", str(tmp_path / "o.csv")) == 4

    def test_bad_decision_csv_is_data_error(self, tmp_path):
        bad = tmp_path / "d.csv"
        bad.write_text("truth,predicted\n1,0\n")
        assert run("evaluate", "--decisions", str(bad)) == 3

    def test_missing_benefit_flags_is_usage_error(self, tmp_path, synth_files):
        train, _ = synth_files
        assert run("train", "--data", str(train),
                   "--out", str(tmp_path / "b.json")) == 2


class TestManifest:
    def test_manifest_written_beside_output(self, tmp_path, synth_files):
        train, _ = synth_files
        bundle = tmp_path / "m.json"
        assert run("train", "--data", str(train), "--ms-ratio", "5",
                   "--hidden", "4", "--epochs", "2", "--out", str(bundle)) == 0
        manifest = json.loads(Path(str(bundle) + ".manifest.json").read_text())
        assert manifest["subcommand"] == "train"
        assert manifest["seed"] == 0
        assert str(train) in manifest["inputs"]
        assert "wall_time_s" in manifest
