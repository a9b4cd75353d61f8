import json
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from emdenoise.cli import EXIT_DATA, EXIT_NUMERIC, EXIT_OK, EXIT_USAGE, main
from emdenoise.signals import TimeSeries
from emdenoise.storage import read_json, read_signal_csv, write_signal_csv


def _run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture(scope="module")
def small_dataset(tmp_path_factory):
    """A 6-record dataset shared by the read-only CLI tests."""
    data = tmp_path_factory.mktemp("cli") / "data"
    assert _run("generate", "--out", data, "--records", 6, "--seed", 7) == EXIT_OK
    return data


@pytest.fixture(scope="module")
def trained_model(small_dataset, tmp_path_factory):
    out = tmp_path_factory.mktemp("cli") / "model"
    code = _run(
        "train",
        "--data",
        small_dataset,
        "--out",
        out,
        "--epochs",
        1,
        "--window-len",
        200,
        "--hop",
        100,
        "--seed",
        7,
    )
    assert code == EXIT_OK
    return out / "weights.json"


class TestGenerate:
    def test_writes_records_and_manifests(self, small_dataset):
        names = sorted(p.name for p in small_dataset.iterdir())
        assert "manifest.json" in names
        assert "run_manifest.json" in names
        assert sum(n.startswith("record_") for n in names) == 6

    def test_row_count_follows_duration(self, tmp_path):
        out = tmp_path / "d"
        assert (
            _run(
                "generate",
                "--out",
                out,
                "--records",
                2,
                "--duration",
                2.0,
                "--seed",
                1,
            )
            == EXIT_OK
        )
        lines = (out / "record_0000.csv").read_text().splitlines()
        # rate line + header + rate*duration samples
        assert len(lines) == 2 + 500

    def test_same_seed_bitwise_identical(self, tmp_path):
        blobs = []
        for name in ("a", "b"):
            out = tmp_path / name
            _run("generate", "--out", out, "--records", 3, "--seed", 5)
            blobs.append((out / "record_0002.csv").read_bytes())
        assert blobs[0] == blobs[1]

    def test_run_manifest_contents(self, small_dataset):
        manifest = read_json(small_dataset / "run_manifest.json")
        assert manifest["command"] == "generate"
        assert manifest["seeds"]["master_seed"] == 7
        assert manifest["tool_version"]
        assert manifest["duration_s"] >= 0.0


class TestTrain:
    def test_outputs_exist(self, trained_model):
        assert trained_model.exists()
        model_dir = trained_model.parent
        assert (model_dir / "history.csv").exists()
        assert (model_dir / "run_manifest.json").exists()

    def test_history_row_count_equals_epochs(self, trained_model):
        lines = (trained_model.parent / "history.csv").read_text().splitlines()
        assert lines[0] == "epoch,train_mse,train_mae,val_mse,val_mae"
        assert len(lines) == 1 + 1

    def test_epochs_zero_gives_initial_weights_and_empty_history(
        self, small_dataset, tmp_path
    ):
        from emdenoise.encoder import init_model, load_weights

        out = tmp_path / "m0"
        code = _run(
            "train",
            "--data",
            small_dataset,
            "--out",
            out,
            "--epochs",
            0,
            "--window-len",
            200,
            "--hop",
            200,
            "--seed",
            5,
        )
        assert code == EXIT_OK
        history = (out / "history.csv").read_text().splitlines()
        assert len(history) == 1
        params, config = load_weights(out / "weights.json")
        fresh = dict(init_model(config, seed=5).named_arrays())
        for name, arr in params.named_arrays():
            assert np.array_equal(arr, fresh[name])

    def test_rerun_same_seed_reproduces_val_mse(self, small_dataset, tmp_path):
        vals = []
        for name in ("r1", "r2"):
            out = tmp_path / name
            code = _run(
                "train",
                "--data",
                small_dataset,
                "--out",
                out,
                "--epochs",
                1,
                "--window-len",
                200,
                "--hop",
                100,
                "--seed",
                7,
            )
            assert code == EXIT_OK
            row = (out / "history.csv").read_text().splitlines()[1]
            vals.append(float(row.split(",")[3]))
        assert abs(vals[0] - vals[1]) <= 1e-12

    def test_missing_dataset_is_data_error(self, tmp_path):
        code = _run("train", "--data", tmp_path / "nope", "--out", tmp_path / "m")
        assert code == EXIT_DATA

    def test_diverging_loss_aborts_with_numeric_exit(
        self, small_dataset, tmp_path, capsys
    ):
        # an absurd learning rate overflows the forward pass on the second
        # batch; the run must stop with the numeric exit code, not save
        with np.errstate(all="ignore"):
            code = _run(
                "train",
                "--data",
                small_dataset,
                "--out",
                tmp_path / "m",
                "--epochs",
                1,
                "--window-len",
                200,
                "--hop",
                100,
                "--lr",
                1e155,
            )
        assert code == EXIT_NUMERIC
        assert "non-finite loss" in capsys.readouterr().err
        assert not (tmp_path / "m" / "weights.json").exists()


class TestDenoise:
    def test_record_input_roundtrip_shape(self, small_dataset, tmp_path):
        out = tmp_path / "den.csv"
        code = _run(
            "denoise",
            "--input",
            small_dataset / "record_0000.csv",
            "--out",
            out,
            "--method",
            "linear",
        )
        assert code == EXIT_OK
        denoised = read_signal_csv(out)
        assert len(denoised) == 1000
        assert denoised.rate_hz == 250.0

    def test_signal_input_accepted(self, tmp_path):
        rng = np.random.default_rng(0)
        sig = tmp_path / "sig.csv"
        write_signal_csv(TimeSeries(samples=rng.normal(size=400), rate_hz=100.0), sig)
        out = tmp_path / "den.csv"
        assert (
            _run("denoise", "--input", sig, "--out", out, "--window-len", 100) == EXIT_OK
        )
        assert len(read_signal_csv(out)) == 400

    def test_subtract_zero_removes_nothing(self, tmp_path):
        rng = np.random.default_rng(2)
        sig = tmp_path / "sig.csv"
        ts = TimeSeries(samples=rng.normal(size=300), rate_hz=100.0)
        write_signal_csv(ts, sig)
        out = tmp_path / "out.csv"
        code = _run(
            "denoise",
            "--input",
            sig,
            "--out",
            out,
            "--method",
            "spline",
            "--mode",
            "subtract",
            "--n-remove",
            0,
        )
        assert code == EXIT_OK
        back = read_signal_csv(out)
        scale = np.max(np.abs(ts.samples))
        assert np.max(np.abs(back.samples - ts.samples)) <= 1e-9 * scale

    def test_constant_signal_passes_through(self, tmp_path):
        sig = tmp_path / "flat.csv"
        write_signal_csv(TimeSeries(samples=np.full(300, 2.5), rate_hz=100.0), sig)
        out = tmp_path / "out.csv"
        code = _run(
            "denoise",
            "--input",
            sig,
            "--out",
            out,
            "--method",
            "linear",
            "--window-len",
            100,
            "--hop",
            100,
        )
        assert code == EXIT_OK
        assert np.array_equal(read_signal_csv(out).samples, np.full(300, 2.5))

    def test_learned_without_weights_is_usage_error(self, small_dataset, tmp_path):
        code = _run(
            "denoise",
            "--input",
            small_dataset / "record_0000.csv",
            "--out",
            tmp_path / "x.csv",
            "--method",
            "learned",
        )
        assert code == EXIT_USAGE

    def test_learned_subtract_is_usage_error(
        self, small_dataset, trained_model, tmp_path
    ):
        code = _run(
            "denoise",
            "--input",
            small_dataset / "record_0000.csv",
            "--out",
            tmp_path / "x.csv",
            "--method",
            "learned",
            "--weights",
            trained_model,
            "--mode",
            "subtract",
        )
        assert code == EXIT_USAGE

    def test_window_len_contradicting_weights_is_usage_error(
        self, small_dataset, trained_model, tmp_path
    ):
        code = _run(
            "denoise",
            "--input",
            small_dataset / "record_0000.csv",
            "--out",
            tmp_path / "x.csv",
            "--method",
            "learned",
            "--weights",
            trained_model,
            "--window-len",
            400,
        )
        assert code == EXIT_USAGE

    def test_learned_runs_with_weights(self, small_dataset, trained_model, tmp_path):
        out = tmp_path / "den.csv"
        code = _run(
            "denoise",
            "--input",
            small_dataset / "record_0000.csv",
            "--out",
            out,
            "--method",
            "learned",
            "--weights",
            trained_model,
        )
        assert code == EXIT_OK
        assert len(read_signal_csv(out)) == 1000

    def test_non_numeric_row_is_data_error(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("# rate_hz=250.0\nvalue\n1.0\nnope\n")
        code = _run("denoise", "--input", bad, "--out", tmp_path / "x.csv")
        assert code == EXIT_DATA


class TestEvaluate:
    def test_single_method_report(self, small_dataset, tmp_path):
        out = tmp_path / "report.json"
        code = _run(
            "evaluate",
            "--data",
            small_dataset,
            "--out",
            out,
            "--methods",
            "linear",
            "--window-len",
            200,
        )
        assert code == EXIT_OK
        report = read_json(out)
        assert set(report["methods"]) == {"linear"}
        assert "snr_db_mean" in report["baseline"]
        assert report["n_records"] == 1  # 20% of 6 records, rounded

    def test_learned_method_requires_weights(self, small_dataset, tmp_path):
        code = _run(
            "evaluate",
            "--data",
            small_dataset,
            "--out",
            tmp_path / "r.json",
            "--methods",
            "learned",
        )
        assert code == EXIT_USAGE

    def test_report_reread_matches(self, small_dataset, trained_model, tmp_path):
        out = tmp_path / "report.json"
        code = _run(
            "evaluate",
            "--data",
            small_dataset,
            "--out",
            out,
            "--weights",
            trained_model,
        )
        assert code == EXIT_OK
        report = read_json(out)
        assert set(report["methods"]) == {"linear", "cubic_spline", "learned"}
        assert json.loads(out.read_text()) == report


class TestPlot:
    def test_record_plot_four_series(self, small_dataset, tmp_path):
        out = tmp_path / "rec.svg"
        code = _run(
            "plot", "--input", small_dataset / "record_0000.csv", "--out", out
        )
        assert code == EXIT_OK
        root = ET.fromstring(out.read_text())
        polylines = root.findall("{http://www.w3.org/2000/svg}polyline")
        assert len(polylines) == 4

    def test_same_input_identical_bytes(self, small_dataset, tmp_path):
        outs = []
        for name in ("a.svg", "b.svg"):
            out = tmp_path / name
            assert (
                _run("plot", "--input", small_dataset / "record_0001.csv", "--out", out)
                == EXIT_OK
            )
            outs.append(out.read_bytes())
        assert outs[0] == outs[1]

    def test_denoised_overlay_adds_polyline(self, small_dataset, tmp_path):
        den = tmp_path / "den.csv"
        _run(
            "denoise",
            "--input",
            small_dataset / "record_0000.csv",
            "--out",
            den,
            "--method",
            "linear",
        )
        out = tmp_path / "rec.svg"
        code = _run(
            "plot",
            "--input",
            small_dataset / "record_0000.csv",
            "--out",
            out,
            "--denoised",
            den,
        )
        assert code == EXIT_OK
        root = ET.fromstring(out.read_text())
        assert len(root.findall("{http://www.w3.org/2000/svg}polyline")) == 5

    def test_length_mismatch_is_data_error(self, small_dataset, tmp_path):
        short = tmp_path / "short.csv"
        write_signal_csv(
            TimeSeries(samples=np.zeros(10) + np.arange(10), rate_hz=250.0), short
        )
        code = _run(
            "plot",
            "--input",
            small_dataset / "record_0000.csv",
            "--out",
            tmp_path / "x.svg",
            "--denoised",
            short,
        )
        assert code == EXIT_DATA


class TestEnvOverrides:
    def test_env_seed_applies(self, tmp_path, monkeypatch):
        monkeypatch.setenv("EMDENOISE_SEED", "9")
        out = tmp_path / "d"
        assert _run("generate", "--out", out, "--records", 2) == EXIT_OK
        manifest = read_json(out / "manifest.json")
        assert manifest["master_seed"] == 9

    def test_flag_beats_env(self, tmp_path, monkeypatch):
        monkeypatch.setenv("EMDENOISE_SEED", "9")
        out = tmp_path / "d"
        assert _run("generate", "--out", out, "--records", 2, "--seed", 3) == EXIT_OK
        manifest = read_json(out / "manifest.json")
        assert manifest["master_seed"] == 3

    def test_env_out_applies(self, tmp_path, monkeypatch):
        out = tmp_path / "from_env"
        monkeypatch.setenv("EMDENOISE_OUT", str(out))
        assert _run("generate", "--records", 2, "--seed", 1) == EXIT_OK
        assert (out / "manifest.json").exists()
