import os
import subprocess
import sys

import numpy as np
import pytest

from hybridsvm.cli import (EXIT_IO, EXIT_OK, EXIT_SOLVER, EXIT_USAGE, main,
                           read_metrics)
from hybridsvm.data import (SyntheticSpec, generate_knowledge_synthetic,
                            write_knowledge, write_libsvm)


@pytest.fixture
def bench_dir(tmp_path):
    """Small knowledge benchmark written to disk."""
    spec = SyntheticSpec(n_train=50, n_test=80, n_features=400, block_len=10,
                         seed=3)
    train, test, ks = generate_knowledge_synthetic(spec)
    d = tmp_path / "bench"
    d.mkdir()
    write_libsvm(train, d / "train.libsvm")
    write_libsvm(test, d / "test.libsvm")
    write_knowledge(ks, d / "knowledge.txt")
    return d


def run_train(d, extra=(), mode="hipad-enk"):
    return main(["train", "--data", str(d / "train.libsvm"),
                 "--test-data", str(d / "test.libsvm"),
                 "--knowledge", str(d / "knowledge.txt"),
                 "--mode", mode, "--rho", "10", "--lambda1", "0.05",
                 "--max-iter", "800",
                 "--model-out", str(d / "model.txt"),
                 "--metrics-out", str(d / "metrics.txt"), *extra])


class TestGenerate:
    def test_writes_all_outputs(self, tmp_path):
        out = tmp_path / "gen"
        code = main(["generate", "--n-train", "20", "--n-test", "10",
                     "--features", "300", "--block-len", "20", "--seed", "5",
                     "--outdir", str(out)])
        assert code == EXIT_OK
        for name in ("train.libsvm", "test.libsvm", "knowledge.txt",
                     "metadata.txt"):
            assert (out / name).exists()

    def test_same_seed_byte_identical(self, tmp_path):
        args = ["generate", "--n-train", "15", "--n-test", "10", "--features",
                "250", "--block-len", "15", "--seed", "9"]
        main(args + ["--outdir", str(tmp_path / "a")])
        main(args + ["--outdir", str(tmp_path / "b")])
        for name in ("train.libsvm", "test.libsvm", "knowledge.txt",
                     "metadata.txt"):
            assert (tmp_path / "a" / name).read_bytes() == \
                (tmp_path / "b" / name).read_bytes()

    def test_preset_dimensions(self, tmp_path):
        out = tmp_path / "p"
        code = main(["generate", "--preset", "ksvm-s-10k", "--seed", "1",
                     "--outdir", str(out)])
        assert code == EXIT_OK
        meta = (out / "metadata.txt").read_text()
        assert "n_train=200" in meta and "n_test=400" in meta
        assert "n_features=10000" in meta and "block_len=50" in meta

    def test_requires_preset_or_sizes(self, tmp_path):
        assert main(["generate", "--outdir", str(tmp_path)]) == EXIT_USAGE


class TestTrain:
    def test_writes_model_and_metrics(self, bench_dir):
        assert run_train(bench_dir) == EXIT_OK
        metrics = read_metrics(bench_dir / "metrics.txt")
        assert 0.0 <= float(metrics["accuracy"]) <= 100.0
        assert int(metrics["support_size"]) > 0
        assert float(metrics["total_time"]) >= 0.0
        assert metrics["config.mode"] == "hipad-enk"
        assert metrics["config.rho"] == "10.0"

    def test_missing_data_exits_io_without_outputs(self, tmp_path):
        code = main(["train", "--data", str(tmp_path / "nope.libsvm"),
                     "--model-out", str(tmp_path / "model.txt")])
        assert code == EXIT_IO
        assert not (tmp_path / "model.txt").exists()

    def test_admm_only_mode_comparable(self, bench_dir):
        assert run_train(bench_dir) == EXIT_OK
        enk_acc = float(read_metrics(bench_dir / "metrics.txt")["accuracy"])
        assert run_train(bench_dir, mode="admm-only") == EXIT_OK
        admm_acc = float(read_metrics(bench_dir / "metrics.txt")["accuracy"])
        assert admm_acc <= enk_acc + 5.0  # typically lower or equal

    def test_hipad_enk_requires_knowledge(self, bench_dir):
        code = main(["train", "--data", str(bench_dir / "train.libsvm"),
                     "--mode", "hipad-enk",
                     "--model-out", str(bench_dir / "m.txt")])
        assert code == EXIT_USAGE

    def test_table_output_layout(self, bench_dir):
        assert run_train(bench_dir, extra=["--table-out",
                                           str(bench_dir / "table.tsv"),
                                           "--dataset-name", "bench"]) == EXIT_OK
        lines = (bench_dir / "table.tsv").read_text().strip().split("\n")
        assert lines[0] == "dataset\tmode\taccuracy\tsupport_size\tcpu_s"
        fields = lines[1].split("\t")
        assert fields[0] == "bench" and fields[1] == "hipad-enk"
        float(fields[2]); int(fields[3]); float(fields[4])

    def test_metrics_round_trip_losslessly(self, bench_dir):
        run_train(bench_dir)
        text = (bench_dir / "metrics.txt").read_text()
        parsed = read_metrics(bench_dir / "metrics.txt")
        rebuilt = "\n".join(f"{k}={v}" for k, v in parsed.items()) + "\n"
        assert rebuilt == text


class TestPredict:
    def test_training_data_reaches_full_accuracy(self, tmp_path, rng):
        from conftest import separable_data
        data = separable_data(rng, n_samples=30, n_features=6)
        write_libsvm(data, tmp_path / "train.libsvm")
        main(["train", "--data", str(tmp_path / "train.libsvm"),
              "--lambda1", "0.01", "--model-out", str(tmp_path / "model.txt")])
        code = main(["predict", "--model", str(tmp_path / "model.txt"),
                     "--data", str(tmp_path / "train.libsvm"),
                     "--output", str(tmp_path / "preds.txt")])
        assert code == EXIT_OK
        lines = (tmp_path / "preds.txt").read_text().strip().split("\n")
        assert len(lines) == 31
        assert lines[-1] == "accuracy=100.0"
        assert set(lines[:-1]) <= {"+1", "-1"}

    def test_unlabeled_data_labels_only(self, tmp_path):
        (tmp_path / "model.txt").write_text("-1.0\n")
        (tmp_path / "data.libsvm").write_text("1:0.5\n2:1.5\n")
        code = main(["predict", "--model", str(tmp_path / "model.txt"),
                     "--data", str(tmp_path / "data.libsvm"),
                     "--output", str(tmp_path / "preds.txt")])
        assert code == EXIT_OK
        assert (tmp_path / "preds.txt").read_text() == "-1\n-1\n"

    def test_features_beyond_model_ignored(self, tmp_path):
        (tmp_path / "model.txt").write_text("0.5\n0:1.0\n")
        (tmp_path / "narrow.libsvm").write_text("+1 1:1.0\n")
        (tmp_path / "wide.libsvm").write_text("+1 1:1.0 9:100.0\n")
        outs = []
        for name in ("narrow", "wide"):
            main(["predict", "--model", str(tmp_path / "model.txt"),
                  "--data", str(tmp_path / f"{name}.libsvm"),
                  "--output", str(tmp_path / f"{name}.out")])
            outs.append((tmp_path / f"{name}.out").read_text().split("\n")[0])
        assert outs[0] == outs[1] == "+1"


class TestCv:
    def test_deterministic_folds_and_best_selection(self, bench_dir, capsys):
        args = ["cv", "--data", str(bench_dir / "train.libsvm"),
                "--knowledge", str(bench_dir / "knowledge.txt"),
                "--mode", "hipad-enk", "--folds", "3", "--seed", "7",
                "--lambda1-grid", "0.05,0.2", "--rho-grid", "10",
                "--max-iter", "400"]
        assert main(args) == EXIT_OK
        first = capsys.readouterr().out
        assert main(args) == EXIT_OK
        assert capsys.readouterr().out == first
        grid_lines = [l for l in first.strip().split("\n")
                      if l.startswith("lambda1=")]
        best_line = [l for l in first.strip().split("\n")
                     if l.startswith("best")][0]
        accs = [float(l.split("mean_accuracy=")[1]) for l in grid_lines]
        best_acc = float(best_line.split("mean_accuracy=")[1])
        assert best_acc == pytest.approx(max(accs), abs=1e-9)

    def test_single_point_grid_retrains(self, bench_dir):
        code = main(["cv", "--data", str(bench_dir / "train.libsvm"),
                     "--folds", "2", "--seed", "1", "--lambda1-grid", "0.05",
                     "--max-iter", "300", "--retrain",
                     "--model-out", str(bench_dir / "cv_model.txt")])
        assert code == EXIT_OK
        assert (bench_dir / "cv_model.txt").exists()

    def test_fold_count_exceeding_samples_is_usage_error(self, bench_dir):
        code = main(["cv", "--data", str(bench_dir / "train.libsvm"),
                     "--folds", "999"])
        assert code == EXIT_USAGE

    def test_retrain_requires_model_out(self, bench_dir):
        code = main(["cv", "--data", str(bench_dir / "train.libsvm"),
                     "--folds", "2", "--retrain", "--max-iter", "100"])
        assert code == EXIT_USAGE


class TestExitCodes:
    def test_usage_error_from_argparse(self):
        with pytest.raises(SystemExit) as exc:
            main(["train"])  # missing required flags
        assert exc.value.code == EXIT_USAGE

    def test_solver_failure_exit(self, tmp_path):
        # duplicated knowledge rule -> rank-deficient Gram -> solver error
        (tmp_path / "train.libsvm").write_text("+1 1:1\n-1 1:-1\n")
        (tmp_path / "k.txt").write_text("2 2 0\n0:-1.0 -4.0\n0:-1.0 -4.0\n")
        code = main(["train", "--data", str(tmp_path / "train.libsvm"),
                     "--knowledge", str(tmp_path / "k.txt"),
                     "--mode", "hipad-enk",
                     "--model-out", str(tmp_path / "m.txt")])
        assert code == EXIT_SOLVER


def test_console_entry_point(tmp_path):
    result = subprocess.run([sys.executable, "-m", "hybridsvm.cli", "--help"],
                            capture_output=True, text=True)
    assert result.returncode == 0
    assert "train" in result.stdout and "generate" in result.stdout
