"""End-to-end dress rehearsal of the benchmark reproduction protocol.

The acceptance runs for the named UCR datasets need files this sandbox may
not have; this test drives the identical machinery over a generated
single-channel dataset in the archive's on-disk layout, so the protocol code
itself is known to work whenever the real files are supplied.
"""

import numpy as np

from earlybenefit.evalbench import bench_training_scaling
from test_acceptance import ucr_benchmark_protocol


def write_archive_layout(root, name, n_train=24, n_test=24, length=20, seed=0):
    rng = np.random.default_rng(seed)
    folder = root / name
    folder.mkdir(parents=True)
    for tag, n in (("TRAIN", n_train), ("TEST", n_test)):
        lines = []
        for i in range(n):
            label = i % 2
            values = rng.normal(0.0, 0.15, size=length)
            if label:
                values += np.linspace(0.0, 2.0, length)
            cells = [str(label)] + [f"{v:.6f}" for v in values]
            lines.append("\t".join(cells))
        (folder / f"{name}_{tag}.tsv").write_text("\n".join(lines) + "\n")
    return folder


class TestBenchmarkProtocol:
    def test_grid_select_and_test_scoring(self, tmp_path):
        write_archive_layout(tmp_path, "SynthBench", seed=3)
        report = ucr_benchmark_protocol(
            "SynthBench", seeds=(0,), acc_floor=0.75, tard_ceiling=0.9,
            data_dir=tmp_path,
            grid_kwargs=dict(ms_ratio_factors=(1.0, 2.0), epochs=25,
                             patience=25, stride=1, val_frac=0.2,
                             hidden_dims=(8,), learning_rates=(0.02,)))
        assert report is not None and report.n == 24
        # strongly drifting class-1 series vs flat noise: the selected grid
        # point must separate them well before the end of the series
        assert report.accuracy >= 0.75
        assert report.tardiness <= 0.9

    def test_training_scaling_bench_runs(self, tmp_path):
        from earlybenefit.benefit import BenefitSpec
        from earlybenefit.dataio import load_ucr
        from earlybenefit.training import TrainConfig

        folder = write_archive_layout(tmp_path, "ScaleBench", n_train=30,
                                      length=12, seed=4)
        ds = load_ucr(folder / "ScaleBench_TRAIN.tsv")
        spec = BenefitSpec.symmetric("outcome", 2, 12.0, default_class=0)
        config = TrainConfig(hidden_dim=4, learning_rate=0.02, epochs=3,
                             batch_size=16, stride=1, seed=0, patience=3)
        rows, r2 = bench_training_scaling(ds, [0.4, 0.7, 1.0], spec, config)
        assert len(rows) == 3
        ns = [r[1] for r in rows]
        assert ns == sorted(ns) and ns[-1] == 30
        assert r2 is None or 0.0 <= r2 <= 1.0
