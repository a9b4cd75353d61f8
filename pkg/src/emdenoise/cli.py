"""Command-line interface: generate | train | denoise | evaluate | plot | pipeline.

Every command writes its outputs plus a small run-manifest JSON capturing the
command, the effective configuration, seeds, paths, tool version, and wall
time, so a run can be reproduced from its manifest alone. Run manifests are
the one output excluded from bitwise determinism (they record wall time).

Flags can also be supplied through environment variables with the
``EMDENOISE_`` prefix (``EMDENOISE_SEED``, ``EMDENOISE_THREADS``,
``EMDENOISE_OUT``); an explicit flag always wins over the environment.

Exit codes: 0 success, 2 usage error, 3 data or I/O error, 4 numeric failure.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
import time
from pathlib import Path

# exception types are dependency-free; everything numpy-backed imports lazily
from emdenoise.errors import DataFormatError, EmdenoiseError, NumericError

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4

ENV_PREFIX = "EMDENOISE_"
RUN_MANIFEST_NAME = "run_manifest.json"

# Deployment geometry for training and windowed denoising. The encoder's
# hidden trunk is fixed; only the attention window (= output width) varies.
DEFAULT_WINDOW_LEN = 200
DEFAULT_HOP = 50
_HIDDEN_TRUNK = (800, 400, 200, 100)


class UsageError(Exception):
    """A semantically invalid flag combination (maps to exit code 2)."""


def _env(name: str, fallback: str | None = None) -> str | None:
    return os.environ.get(ENV_PREFIX + name, fallback)


def _apply_threads(threads: int) -> None:
    """Pin BLAS/openmp pools before numpy is imported; 1 means bitwise runs."""
    if threads < 1:
        raise UsageError(f"--threads must be >= 1, got {threads}")
    for var in (
        "OMP_NUM_THREADS",
        "OPENBLAS_NUM_THREADS",
        "MKL_NUM_THREADS",
        "NUMEXPR_NUM_THREADS",
        "VECLIB_MAXIMUM_THREADS",
    ):
        os.environ[var] = str(threads)


def _tool_version() -> str:
    from emdenoise import __version__

    return __version__


def _write_run_manifest(
    path: Path,
    command: str,
    config: dict,
    seeds: dict,
    inputs: list[str],
    outputs: list[str],
    started: float,
) -> None:
    from emdenoise import storage

    manifest = {
        "kind": "emdenoise-run",
        "command": command,
        "config": config,
        "seeds": seeds,
        "inputs": inputs,
        "outputs": outputs,
        "tool_version": _tool_version(),
        "duration_s": time.monotonic() - started,
    }
    storage.write_json_atomic(manifest, path)


def _sidecar_manifest_path(out_file: Path) -> Path:
    return out_file.with_name(out_file.name + ".run.json")


# ---------------------------------------------------------------------------
# command bodies (shared by direct invocation and the pipeline command)


def do_generate(
    out_dir: Path,
    seed: int,
    records: int,
    rate: float,
    duration: float,
    pink: float,
    test_fraction: float,
) -> dict:
    from emdenoise import storage
    from emdenoise.synth import SynthConfig, build_dataset

    started = time.monotonic()
    cfg = SynthConfig(
        rate=rate, duration_s=duration, record_count=records, pink_amplitude=pink
    )
    dataset = build_dataset(cfg, seed)
    manifest = storage.write_dataset(
        dataset, cfg, seed, out_dir, test_fraction=test_fraction
    )
    _write_run_manifest(
        out_dir / RUN_MANIFEST_NAME,
        "generate",
        cfg.to_dict() | {"test_fraction": test_fraction},
        {"master_seed": seed, "split_seed": manifest["split"]["seed"]},
        [],
        [str(out_dir)],
        started,
    )
    logger.info("generated %d records into %s", records, out_dir)
    return manifest


def do_train(
    data_dir: Path,
    out_dir: Path,
    seed: int,
    window_len: int,
    hop: int,
    epochs: int,
    lr: float,
    batch_size: int,
) -> tuple[Path, list[dict]]:
    from emdenoise import storage
    from emdenoise.encoder import EncoderConfig, TrainConfig, save_weights, train
    from emdenoise.synth import make_training_pairs

    started = time.monotonic()
    records, manifest = storage.load_dataset(data_dir)
    train_records, test_records = storage.split_from_manifest(records, manifest)
    encoder_config = EncoderConfig(
        window_len=window_len, stack_units=_HIDDEN_TRUNK + (window_len,)
    )
    train_config = TrainConfig(
        lr=lr, batch_size=batch_size, epochs=epochs, seed=seed
    )
    train_pairs = [
        p for r in train_records for p in make_training_pairs(r, window_len, hop)
    ]
    val_pairs = [
        p for r in test_records for p in make_training_pairs(r, window_len, hop)
    ]
    logger.info(
        "training on %d pairs (validating on %d) for %d epochs",
        len(train_pairs),
        len(val_pairs),
        epochs,
    )
    params, history = train(train_pairs, val_pairs, encoder_config, train_config)

    out_dir.mkdir(parents=True, exist_ok=True)
    weights_path = out_dir / "weights.json"
    save_weights(weights_path, params, encoder_config)
    history_path = out_dir / "history.csv"
    _write_history_csv(history, history_path)
    _write_run_manifest(
        out_dir / RUN_MANIFEST_NAME,
        "train",
        {
            "encoder": encoder_config.to_dict(),
            "train": {
                "lr": lr,
                "batch_size": batch_size,
                "epochs": epochs,
                "window_len": window_len,
                "hop": hop,
            },
        },
        {"train_seed": seed, "dataset_master_seed": manifest["master_seed"]},
        [str(data_dir)],
        [str(weights_path), str(history_path)],
        started,
    )
    return weights_path, history


def _write_history_csv(history: list[dict], path: Path) -> None:
    columns = ["epoch", "train_mse", "train_mae", "val_mse", "val_mae"]
    lines = [",".join(columns)]
    for row in history:
        lines.append(",".join(repr(row[c]) if c in row else "" for c in columns))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _read_input_series(path: Path):
    """Load a signal CSV, or the contaminated column of a record CSV."""
    from emdenoise import storage

    with open(path, "r", encoding="utf-8") as fh:
        fh.readline()
        header = fh.readline().strip()
    if header == "clean,contaminated,mask":
        record = storage.read_record_csv(path)
        return record.contaminated, record
    return storage.read_signal_csv(path), None


def _make_kind(method: str, weights: Path | None, window_len: int | None):
    """Resolve a --method flag into an interpolator kind and geometry."""
    from emdenoise.emd import InterpolatorKind
    from emdenoise.encoder import LearnedInterpolator, load_weights

    if method == "linear":
        return InterpolatorKind.linear(), window_len or DEFAULT_WINDOW_LEN
    if method == "spline":
        return InterpolatorKind.cubic_spline(), window_len or DEFAULT_WINDOW_LEN
    if method == "learned":
        if weights is None:
            raise UsageError("--method learned requires --weights")
        params, config = load_weights(weights)
        if window_len is not None and window_len != config.window_len:
            raise UsageError(
                f"--window-len {window_len} contradicts the weights file "
                f"(trained at {config.window_len})"
            )
        model = LearnedInterpolator(params, config)
        return InterpolatorKind.learned(model), config.window_len
    raise UsageError(f"unknown method {method!r}")


def do_denoise(
    input_path: Path,
    out_path: Path,
    method: str,
    weights: Path | None,
    mode: str,
    window_len: int | None,
    hop: int,
    n_remove: int,
) -> None:
    from emdenoise import storage
    from emdenoise.emd import denoise_mean_envelope, denoise_subtract_imf

    started = time.monotonic()
    if mode == "subtract" and method == "learned":
        raise UsageError(
            "mode 'subtract' sifts iteratively, which the learned interpolator "
            "is not trained for; use mode 'mean-envelope' or a classical method"
        )
    ts, _ = _read_input_series(input_path)
    kind, window_len = _make_kind(method, weights, window_len)
    if mode == "mean-envelope":
        out = denoise_mean_envelope(ts, kind, window_len=window_len, hop=hop)
    elif mode == "subtract":
        out = denoise_subtract_imf(ts, kind, n_remove=n_remove)
    else:
        raise UsageError(f"unknown mode {mode!r}")
    out_path.parent.mkdir(parents=True, exist_ok=True)
    storage.write_signal_csv(out, out_path)
    _write_run_manifest(
        _sidecar_manifest_path(out_path),
        "denoise",
        {
            "method": method,
            "mode": mode,
            "window_len": window_len,
            "hop": hop,
            "n_remove": n_remove,
        },
        {},
        [str(input_path)] + ([str(weights)] if weights else []),
        [str(out_path)],
        started,
    )
    logger.info("denoised %s -> %s (%s, %s)", input_path, out_path, method, mode)


def do_evaluate(
    data_dir: Path,
    out_path: Path,
    method_names: list[str],
    weights: Path | None,
    window_len: int | None,
    hop: int,
    dataset_ref: str | None = None,
) -> dict:
    from emdenoise import storage
    from emdenoise.metrics import evaluate_methods, standard_methods

    started = time.monotonic()
    records, manifest = storage.load_dataset(data_dir)
    _, test_records = storage.split_from_manifest(records, manifest)
    kinds = []
    resolved_window = None
    for name in method_names:
        kind, kind_window = _make_kind(name, weights, window_len)
        if resolved_window is not None and kind_window != resolved_window:
            raise UsageError(
                f"methods disagree on window length ({kind_window} vs "
                f"{resolved_window}); pass --window-len explicitly"
            )
        resolved_window = kind_window
        kinds.append(kind)
    methods = standard_methods(kinds, window_len=resolved_window, hop=hop)
    report = evaluate_methods(
        test_records,
        methods,
        dataset_ref=dataset_ref if dataset_ref is not None else str(data_dir),
        config_echo={
            "window_len": resolved_window,
            "hop": hop,
            "methods": list(method_names),
            "master_seed": manifest["master_seed"],
        },
    )
    out_path.parent.mkdir(parents=True, exist_ok=True)
    doc = report.to_dict()
    storage.write_json_atomic(doc, out_path)
    _write_run_manifest(
        _sidecar_manifest_path(out_path),
        "evaluate",
        doc["config_echo"],
        {"dataset_master_seed": manifest["master_seed"]},
        [str(data_dir)] + ([str(weights)] if weights else []),
        [str(out_path)],
        started,
    )
    for name, entry in doc["methods"].items():
        logger.info(
            "%s: snr %.2f dB (baseline %.2f)",
            name,
            entry.get("snr_db_mean", float("nan")),
            doc["baseline"]["snr_db_mean"],
        )
    return doc


def do_plot(
    input_path: Path,
    out_path: Path,
    method: str,
    weights: Path | None,
    denoised_paths: list[Path],
) -> None:
    from emdenoise import storage
    from emdenoise.emd import compute_envelopes, mean_of_envelopes
    from emdenoise.plotting import plot_series

    started = time.monotonic()
    ts, _ = _read_input_series(input_path)
    kind, _ = _make_kind(method, weights, None)
    upper, lower = compute_envelopes(ts, kind)
    series = [
        ("original", ts.samples),
        ("upper envelope", upper.values),
        ("lower envelope", lower.values),
        ("mean envelope", mean_of_envelopes(upper, lower).values),
    ]
    for path in denoised_paths:
        extra = storage.read_signal_csv(path)
        if len(extra) != len(ts):
            raise DataFormatError(
                f"{path}: {len(extra)} rows, but {input_path} has {len(ts)}; "
                "overlaid series must share one length"
            )
        series.append((path.stem, extra.samples))
    svg = plot_series(series, ts.rate_hz, title=input_path.name)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    out_path.write_text(svg, encoding="utf-8")
    _write_run_manifest(
        _sidecar_manifest_path(out_path),
        "plot",
        {"method": method, "series": [label for label, _ in series]},
        {},
        [str(input_path)] + [str(p) for p in denoised_paths],
        [str(out_path)],
        started,
    )
    logger.info("wrote %s (%d series)", out_path, len(series))


def do_pipeline(out_dir: Path, seed: int) -> dict:
    """End-to-end run: generate, train, evaluate, plot, all under one root."""
    from emdenoise import storage

    started = time.monotonic()
    data_dir = out_dir / "data"
    model_dir = out_dir / "model"
    eval_path = out_dir / "eval" / "report.json"
    plot_path = out_dir / "plots" / "test_record.svg"

    manifest = do_generate(
        data_dir,
        seed,
        records=300,
        rate=250.0,
        duration=4.0,
        pink=1.0,
        test_fraction=0.2,
    )
    weights_path, _ = do_train(
        data_dir,
        model_dir,
        seed,
        window_len=DEFAULT_WINDOW_LEN,
        hop=DEFAULT_HOP,
        epochs=50,
        lr=1e-3,
        batch_size=16,
    )
    report = do_evaluate(
        data_dir,
        eval_path,
        ["linear", "spline", "learned"],
        weights_path,
        window_len=None,
        hop=DEFAULT_HOP,
        dataset_ref="data",
    )
    first_test_index = manifest["split"]["test"][0]
    record_path = data_dir / storage.record_file_name(first_test_index)
    do_plot(record_path, plot_path, "spline", None, [])
    _write_run_manifest(
        out_dir / RUN_MANIFEST_NAME,
        "pipeline",
        {"stages": ["generate", "train", "evaluate", "plot"]},
        {"master_seed": seed},
        [],
        [str(data_dir), str(model_dir), str(eval_path), str(plot_path)],
        started,
    )
    learned = report["methods"]["learned"]["snr_db_mean"]
    linear = report["methods"]["linear"]["snr_db_mean"]
    baseline = report["baseline"]["snr_db_mean"]
    logger.info(
        "pipeline done in %.0f s: learned %.2f dB, linear %.2f dB, baseline %.2f dB",
        time.monotonic() - started,
        learned,
        linear,
        baseline,
    )
    return report


# ---------------------------------------------------------------------------
# argparse wiring


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--seed",
        type=int,
        default=int(_env("SEED", "42")),
        help="master random seed (env EMDENOISE_SEED; default 42)",
    )
    parser.add_argument(
        "--threads",
        type=int,
        default=int(_env("THREADS", "1")),
        help="BLAS/openmp thread cap; 1 gives bitwise-reproducible runs "
        "(env EMDENOISE_THREADS; default 1)",
    )
    parser.add_argument(
        "--out",
        type=Path,
        default=_env("OUT"),
        help="output directory or file (env EMDENOISE_OUT; "
        "default depends on the command)",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="emdenoise",
        description="Envelope-based denoising of artifact-contaminated biosignals.",
        epilog="Environment overrides: EMDENOISE_SEED, EMDENOISE_THREADS, "
        "EMDENOISE_OUT (explicit flags win).",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a seeded synthetic dataset")
    _add_common(p)
    p.add_argument("--records", type=int, default=300, help="number of records")
    p.add_argument("--rate", type=float, default=250.0, help="sample rate in Hz")
    p.add_argument("--duration", type=float, default=4.0, help="record length in s")
    p.add_argument("--pink", type=float, default=1.0, help="pink-noise RMS amplitude")
    p.add_argument(
        "--test-fraction", type=float, default=0.2, help="held-out fraction"
    )
    p.set_defaults(func=_cmd_generate, default_out="dataset")

    p = sub.add_parser("train", help="train the envelope encoder on a dataset")
    _add_common(p)
    p.add_argument("--data", type=Path, required=True, help="dataset directory")
    p.add_argument("--window-len", type=int, default=DEFAULT_WINDOW_LEN)
    p.add_argument("--hop", type=int, default=DEFAULT_HOP)
    p.add_argument("--epochs", type=int, default=50)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--batch-size", type=int, default=16)
    p.set_defaults(func=_cmd_train, default_out="model")

    p = sub.add_parser("denoise", help="denoise one signal or record CSV")
    _add_common(p)
    p.add_argument("--input", type=Path, required=True, help="signal or record CSV")
    p.add_argument(
        "--method", choices=("linear", "spline", "learned"), default="spline"
    )
    p.add_argument("--weights", type=Path, help="weights file for --method learned")
    p.add_argument(
        "--mode", choices=("mean-envelope", "subtract"), default="mean-envelope"
    )
    p.add_argument(
        "--window-len",
        type=int,
        default=None,
        help=f"window length (default {DEFAULT_WINDOW_LEN}, or the weights file's)",
    )
    p.add_argument("--hop", type=int, default=DEFAULT_HOP)
    p.add_argument(
        "--n-remove", type=int, default=1, help="IMFs to drop in subtract mode"
    )
    p.set_defaults(func=_cmd_denoise, default_out="denoised.csv")

    p = sub.add_parser("evaluate", help="score methods on a dataset's test split")
    _add_common(p)
    p.add_argument("--data", type=Path, required=True, help="dataset directory")
    p.add_argument(
        "--methods",
        default=None,
        help="comma list of linear,spline,learned "
        "(default: linear,spline, plus learned when --weights is given)",
    )
    p.add_argument("--weights", type=Path, help="weights file for learned method")
    p.add_argument("--window-len", type=int, default=None)
    p.add_argument("--hop", type=int, default=DEFAULT_HOP)
    p.set_defaults(func=_cmd_evaluate, default_out="report.json")

    p = sub.add_parser("plot", help="render a record with envelopes as SVG")
    _add_common(p)
    p.add_argument("--input", type=Path, required=True, help="signal or record CSV")
    p.add_argument(
        "--method",
        choices=("linear", "spline", "learned"),
        default="spline",
        help="interpolator for the plotted envelopes",
    )
    p.add_argument("--weights", type=Path, help="weights file for --method learned")
    p.add_argument(
        "--denoised",
        type=Path,
        action="append",
        default=[],
        help="extra signal CSV to overlay (repeatable)",
    )
    p.set_defaults(func=_cmd_plot, default_out="plot.svg")

    p = sub.add_parser(
        "pipeline", help="generate, train, evaluate, and plot in one run"
    )
    _add_common(p)
    p.set_defaults(func=_cmd_pipeline, default_out="pipeline_out")

    return parser


def _resolve_out(args: argparse.Namespace) -> Path:
    return Path(args.out) if args.out is not None else Path(args.default_out)


def _cmd_generate(args: argparse.Namespace) -> None:
    do_generate(
        _resolve_out(args),
        args.seed,
        records=args.records,
        rate=args.rate,
        duration=args.duration,
        pink=args.pink,
        test_fraction=args.test_fraction,
    )


def _cmd_train(args: argparse.Namespace) -> None:
    do_train(
        args.data,
        _resolve_out(args),
        args.seed,
        window_len=args.window_len,
        hop=args.hop,
        epochs=args.epochs,
        lr=args.lr,
        batch_size=args.batch_size,
    )


def _cmd_denoise(args: argparse.Namespace) -> None:
    do_denoise(
        args.input,
        _resolve_out(args),
        method=args.method,
        weights=args.weights,
        mode=args.mode,
        window_len=args.window_len,
        hop=args.hop,
        n_remove=args.n_remove,
    )


def _cmd_evaluate(args: argparse.Namespace) -> None:
    if args.methods is not None:
        names = [m.strip() for m in args.methods.split(",") if m.strip()]
        if not names:
            raise UsageError("--methods parsed to an empty list")
    else:
        names = ["linear", "spline"] + (["learned"] if args.weights else [])
    do_evaluate(
        args.data,
        _resolve_out(args),
        names,
        args.weights,
        window_len=args.window_len,
        hop=args.hop,
    )


def _cmd_plot(args: argparse.Namespace) -> None:
    do_plot(
        args.input,
        _resolve_out(args),
        method=args.method,
        weights=args.weights,
        denoised_paths=args.denoised,
    )


def _cmd_pipeline(args: argparse.Namespace) -> None:
    do_pipeline(_resolve_out(args), args.seed)


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(
        level=logging.INFO, format="%(levelname)s %(name)s: %(message)s"
    )
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _apply_threads(args.threads)
        args.func(args)
        return EXIT_OK
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        # configs validate flag-derived values; bad values are usage errors
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except DataFormatError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except EmdenoiseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
