"""
Integration tests for the command-line interface.

Each test drives ``main(argv)`` against files under tmp_path and checks
exit codes, written artifacts and that failures leave nothing behind.
"""

import csv
import json

import numpy as np
import pytest

from lipbound.config import Settings
from lipbound.domain.models.network import DenseLayer, InputDims, Network
from lipbound.main import main
from lipbound.repositories.model_store import load_model, save_model


def read_rows(path):
    with open(path, newline="") as f:
        return list(csv.reader(f))


def identity_model(path, dims: InputDims):
    net = Network(
        input_dims=dims,
        layers=[DenseLayer(weights=np.eye(dims.size), bias=np.zeros(dims.size))],
    )
    return save_model(net, path)


SYNTHETIC = ["--dataset", "synthetic", "--synthetic-dims", "1x4x4", "--synthetic-n", "40"]


# ============================================================================
# train
# ============================================================================


class TestTrainCommand:
    """Test suite for `lipbound train`."""

    def train(self, out, *extra):
        argv = ["train", "--arch", "mlp-small", "--epochs", "2", "--batch", "8",
                "--out", str(out), *SYNTHETIC, *extra]
        return main(argv)

    def test_writes_model_log_and_manifest(self, tmp_path, capsys):
        """Test that a run writes the model, training log and manifest."""
        out = tmp_path / "small.lbn.json"
        assert self.train(out) == 0

        net = load_model(out)
        assert net.input_dims == InputDims(channels=1, height=4, width=4)
        assert net.output_size == 10

        rows = read_rows(tmp_path / "small.train.csv")
        assert rows[0] == ["epoch", "train_loss", "test_acc"]
        assert [row[0] for row in rows[1:]] == ["1", "2"]

        manifest = json.loads((tmp_path / "small.lbn.json.manifest.json").read_text())
        assert manifest["command"] == "train"
        assert manifest["seed"] == 0
        assert str(out) in manifest["artifacts"]
        assert manifest["config"]["arch"] == "mlp-small"
        assert "accuracy" in capsys.readouterr().out

    def test_rerun_is_bit_identical(self, tmp_path):
        """Test that the same seed writes byte-identical model files."""
        first, second = tmp_path / "a.lbn.json", tmp_path / "b.lbn.json"
        assert self.train(first, "--seed", "7") == 0
        assert self.train(second, "--seed", "7") == 0
        assert first.read_bytes() == second.read_bytes()

    def test_no_eval(self, tmp_path):
        """Test that --no-eval leaves the accuracy column empty."""
        out = tmp_path / "m.lbn.json"
        assert self.train(out, "--no-eval") == 0
        assert all(row[2] == "" for row in read_rows(tmp_path / "m.train.csv")[1:])

    def test_unknown_architecture(self, tmp_path):
        """Test that an unknown architecture exits 2 and writes nothing."""
        out = tmp_path / "m.lbn.json"
        assert main(["train", "--arch", "resnet", "--out", str(out), *SYNTHETIC]) == 2
        assert list(tmp_path.iterdir()) == []

    def test_missing_dataset_names_path(self, tmp_path, capsys):
        """Test that a missing MNIST file exits 3 and names the expected path."""
        out = tmp_path / "m.lbn.json"
        code = main(["train", "--out", str(out), "--data-root", str(tmp_path / "nowhere")])
        assert code == 3
        assert "train-images-idx3-ubyte" in capsys.readouterr().err
        assert not out.exists()


# ============================================================================
# bound
# ============================================================================


class TestBoundCommand:
    """Test suite for `lipbound bound`."""

    def test_report_with_gaps(self, tmp_path, dense_net, capsys):
        """Test the report file with tight and empirical gaps."""
        model = save_model(dense_net, tmp_path / "dense.lbn.json")
        out = tmp_path / "bound.json"
        code = main(["bound", str(model), "--tight", "2.0", "--empirical-max", "0.5",
                     "--out", str(out)])
        assert code == 0

        report = json.loads(out.read_text())
        assert [row["index"] for row in report["per_layer"]] == [0, 1, 2]
        assert report["excluded_layers"] == [3]
        assert report["gap_trivial_over_emp"] == pytest.approx(report["trivial"] / 0.5)
        assert report["gap_tight_over_emp"] == pytest.approx(4.0)
        assert (tmp_path / "bound.json.manifest.json").exists()
        assert "trivial / empirical:" in capsys.readouterr().out

    def test_without_gaps(self, tmp_path, dense_net):
        """Test that gap fields are null without an empirical maximum."""
        model = save_model(dense_net, tmp_path / "dense.lbn.json")
        out = tmp_path / "bound.json"
        assert main(["bound", str(model), "--out", str(out)]) == 0
        report = json.loads(out.read_text())
        assert report["gap_trivial_over_emp"] is None
        assert report["tight_external"] is None

    def test_fft_with_stride_exits_2(self, tmp_path, conv_net):
        """Test that the fft method on a strided conv exits 2."""
        model = save_model(conv_net, tmp_path / "cnn.lbn.json")
        out = tmp_path / "bound.json"
        assert main(["bound", str(model), "--conv-method", "fft", "--out", str(out)]) == 2
        assert not out.exists()

    def test_corrupted_model_exits_3(self, tmp_path, capsys):
        """Test that a corrupted model file exits 3 and names the file."""
        model = tmp_path / "broken.lbn.json"
        model.write_text('{"format_version": 1, "layers": [')
        out = tmp_path / "bound.json"
        assert main(["bound", str(model), "--out", str(out)]) == 3
        assert "broken.lbn.json" in capsys.readouterr().err
        assert not out.exists()

    def test_undecodable_model_exits_3(self, tmp_path, capsys):
        """Test that a model file with invalid UTF-8 exits 3."""
        model = tmp_path / "binary.lbn.json"
        model.write_bytes(b'{"format_version": 1, "input_dims": \xff\xfe}')
        out = tmp_path / "bound.json"
        assert main(["bound", str(model), "--out", str(out)]) == 3
        assert "binary.lbn.json" in capsys.readouterr().err
        assert not out.exists()

    def test_non_convergence_exits_4(self, tmp_path, rng, monkeypatch):
        """Test that a stalled power iteration exits 4 and writes nothing."""
        monkeypatch.setattr(
            "lipbound.cli.dependencies.settings", Settings(power_max_iters=1, power_tol=1e-15)
        )
        net = Network(
            input_dims=InputDims(channels=1, height=1, width=30),
            layers=[DenseLayer(weights=rng.normal(size=(30, 30)), bias=np.zeros(30))],
        )
        model = save_model(net, tmp_path / "m.lbn.json")
        out = tmp_path / "bound.json"
        assert main(["bound", str(model), "--out", str(out)]) == 4
        assert not out.exists()
        assert not (tmp_path / "bound.json.manifest.json").exists()

        assert main(["bound", str(model), "--force", "--out", str(out)]) == 0
        assert json.loads(out.read_text())["per_layer"][0]["converged"] is False


# ============================================================================
# empirical
# ============================================================================


class TestEmpiricalCommand:
    """Test suite for `lipbound empirical`."""

    DATA = ["--dataset", "synthetic", "--synthetic-dims", "1x2x2", "--synthetic-n", "4"]

    def test_identity_model(self, tmp_path, capsys):
        """Test that an identity model gives 2,1.0,1.0 with two batches of two."""
        model = identity_model(tmp_path / "id.lbn.json", InputDims(channels=1, height=2, width=2))
        out = tmp_path / "runs"
        code = main(["empirical", str(model), "--set-size", "2", "--bins", "5",
                     "--out", str(out), *self.DATA])
        assert code == 0

        assert read_rows(out / "convergence.csv") == [["N", "avg_emp", "max_emp"], ["2", "1.0", "1.0"]]
        histogram = read_rows(out / "N2" / "histogram.csv")
        assert histogram[0] == ["bin_lo", "bin_hi", "count"]
        assert len(histogram) == 6

        metadata = json.loads((out / "metadata.json").read_text())
        run = metadata["runs"][0]
        assert run["N"] == 2 and run["batches"] == 2
        assert sum(int(row[2]) for row in histogram[1:]) == (
            run["pairs_evaluated"] - run["skipped_identical"]
        )
        assert (tmp_path / "runs.manifest.json").exists()
        assert "2,1,1" in capsys.readouterr().out

    def test_several_set_sizes_with_bounds(self, tmp_path, dense_net):
        """Test one table row per N and bound series files."""
        model = save_model(dense_net, tmp_path / "dense.lbn.json")
        out = tmp_path / "runs"
        code = main(["empirical", str(model), "--set-size", "10,5", "--with-bounds",
                     "--tight", "3.0", "--out", str(out),
                     "--dataset", "synthetic", "--synthetic-n", "30"])
        assert code == 0

        rows = read_rows(out / "convergence.csv")
        assert [row[0] for row in rows[1:]] == ["5", "10"]
        series = read_rows(out / "N5" / "bounds_series.csv")
        assert series[0] == ["batch", "emp_max", "running_max", "trivial", "tight"]
        assert len(series) == 1 + 6
        assert all(float(row[2]) <= float(row[3]) for row in series[1:])
        assert json.loads((out / "metadata.json").read_text())["trivial"] > 0

    def test_set_size_above_dataset_exits_2(self, tmp_path):
        """Test that N larger than the dataset exits 2 and writes nothing."""
        model = identity_model(tmp_path / "id.lbn.json", InputDims(channels=1, height=2, width=2))
        out = tmp_path / "runs"
        code = main(["empirical", str(model), "--set-size", "5", "--out", str(out), *self.DATA])
        assert code == 2
        assert not (out / "convergence.csv").exists()

    def test_missing_set_size_exits_2(self, tmp_path):
        """Test that argparse usage errors exit 2."""
        model = identity_model(tmp_path / "id.lbn.json", InputDims(channels=1, height=2, width=2))
        assert main(["empirical", str(model), "--out", str(tmp_path / "runs")]) == 2


# ============================================================================
# convert
# ============================================================================


class TestConvertCommand:
    """Test suite for `lipbound convert`."""

    def test_check_passes(self, tmp_path, conv_net, capsys):
        """Test that the converted CNN is dense-only and equivalent."""
        model = save_model(conv_net, tmp_path / "cnn.lbn.json")
        out = tmp_path / "dense.lbn.json"
        assert main(["convert", str(model), "--check", "20", "--out", str(out)]) == 0

        converted = load_model(out)
        assert all(not hasattr(layer, "kernel") for layer in converted.layers)
        check = json.loads((tmp_path / "dense.check.json").read_text())
        assert check["inputs"] == 20
        assert check["max_deviation"] <= check["tolerance"]
        assert "max deviation" in capsys.readouterr().out

    def test_dense_only_copy(self, tmp_path, dense_net):
        """Test that a model without conv layers is copied unchanged."""
        model = save_model(dense_net, tmp_path / "in.lbn.json")
        out = tmp_path / "out.lbn.json"
        assert main(["convert", str(model), "--out", str(out)]) == 0
        assert load_model(out) == dense_net

    def test_deviation_exits_4(self, tmp_path, conv_net, monkeypatch):
        """Test that a deviation above tolerance exits 4 and writes nothing."""
        monkeypatch.setattr(
            "lipbound.cli.commands.convert.max_forward_deviation", lambda *args, **kwargs: 1.0
        )
        model = save_model(conv_net, tmp_path / "cnn.lbn.json")
        out = tmp_path / "dense.lbn.json"
        assert main(["convert", str(model), "--check", "5", "--out", str(out)]) == 4
        assert not out.exists()
        assert not (tmp_path / "dense.check.json").exists()


# ============================================================================
# spectrum
# ============================================================================


class TestSpectrumCommand:
    """Test suite for `lipbound spectrum`."""

    def test_writes_spectrum(self, tmp_path, conv_net):
        """Test rows over the padded grid and the norm comparison."""
        model = save_model(conv_net, tmp_path / "cnn.lbn.json")
        out = tmp_path / "spectrum.csv"
        assert main(["spectrum", str(model), "--layer", "0", "--out", str(out)]) == 0

        rows = read_rows(out)
        assert rows[0] == ["u", "v", "sigma_index", "sigma"]
        assert len(rows) - 1 == 8 * 8 * 2

        config = json.loads((tmp_path / "spectrum.csv.manifest.json").read_text())["config"]
        assert config["grid"] == [8, 8]
        assert max(float(row[3]) for row in rows[1:]) == pytest.approx(config["sigma_max_fft"])
        assert config["sigma_max_toeplitz"] <= config["sigma_max_fft"] * (1 + 1e-6)

    def test_not_a_conv_layer(self, tmp_path, conv_net):
        """Test that a non-conv index exits 2."""
        model = save_model(conv_net, tmp_path / "cnn.lbn.json")
        out = tmp_path / "spectrum.csv"
        assert main(["spectrum", str(model), "--layer", "1", "--out", str(out)]) == 2
        assert main(["spectrum", str(model), "--layer", "9", "--out", str(out)]) == 2
        assert not out.exists()

    def test_strided_layer_exits_2(self, tmp_path, conv_net):
        """Test that a strided conv layer has no circulant spectrum."""
        model = save_model(conv_net, tmp_path / "cnn.lbn.json")
        assert main(["spectrum", str(model), "--layer", "2", "--out",
                     str(tmp_path / "s.csv")]) == 2


# ============================================================================
# entry point
# ============================================================================


class TestEntryPoint:
    """Test suite for the top-level parser."""

    def test_version(self, capsys):
        """Test --version."""
        assert main(["--version"]) == 0
        assert "lipbound" in capsys.readouterr().out

    def test_missing_command(self):
        """Test that no subcommand is a usage error."""
        assert main([]) == 2
