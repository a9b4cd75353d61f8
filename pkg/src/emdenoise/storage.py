"""File formats: signal/record CSVs, dataset manifests, and JSON reports.

Signal files are plain CSV with a rate header line so they stay diffable and
language-neutral. The first line is ``# rate_hz=<value>``, the second a column
header, then one sample per row. Single signals use the column ``value``;
dataset records use ``clean,contaminated,mask``. Floats are printed with
Python's shortest round-trip repr, so write -> read restores samples bitwise.

Dataset directories hold one CSV per record plus ``manifest.json`` recording
the generator config, per-record seeds, and the train/test split. The split
is fixed at generation time so every later command agrees on the held-out
records without re-deriving them.

All JSON is written atomically (temp file + rename) with sorted keys.
"""

from __future__ import annotations

import json
import logging
import os
import tempfile
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DataFormatError
from .signals import TimeSeries
from .synth import DatasetRecord, SynthConfig, split_indices

logger = logging.getLogger(__name__)

DATASET_MANIFEST_NAME = "manifest.json"
DATASET_MANIFEST_KIND = "emdenoise-dataset"
DATASET_MANIFEST_VERSION = 1

_RATE_PREFIX = "# rate_hz="


def _format_float(x: float) -> str:
    # repr of a Python float is the shortest string that round-trips, which
    # is what makes the CSV round trip bitwise.
    return repr(float(x))


def _parse_rate_line(line: str, path: Path) -> float:
    if not line.startswith(_RATE_PREFIX):
        raise DataFormatError(
            f"{path}: line 1 must start with {_RATE_PREFIX!r}, got {line[:40]!r}"
        )
    text = line[len(_RATE_PREFIX) :].strip()
    try:
        rate = float(text)
    except ValueError:
        raise DataFormatError(f"{path}: line 1 has non-numeric rate {text!r}") from None
    if not np.isfinite(rate) or rate <= 0:
        raise DataFormatError(f"{path}: rate must be finite and positive, got {rate}")
    return rate


def write_signal_csv(ts: TimeSeries, path: str | Path) -> None:
    """Write a single signal as a one-column CSV with a rate header."""
    path = Path(path)
    lines = [f"{_RATE_PREFIX}{_format_float(ts.rate_hz)}", "value"]
    lines.extend(_format_float(v) for v in ts.samples)
    path.write_text("\n".join(lines) + "\n")


def read_signal_csv(path: str | Path) -> TimeSeries:
    """Read a one-column signal CSV written by write_signal_csv."""
    path = Path(path)
    lines = path.read_text().splitlines()
    if len(lines) < 2:
        raise DataFormatError(f"{path}: file too short, expected rate header + column header")
    rate = _parse_rate_line(lines[0], path)
    if lines[1].strip() != "value":
        raise DataFormatError(f"{path}: line 2 must be the header 'value', got {lines[1]!r}")
    rows = [line for line in lines[2:] if line.strip()]
    if not rows:
        raise DataFormatError(f"{path}: no data rows")
    samples = np.empty(len(rows))
    for i, row in enumerate(rows):
        try:
            samples[i] = float(row)
        except ValueError:
            raise DataFormatError(f"{path}: line {i + 3}: non-numeric value {row!r}") from None
    return TimeSeries(samples, rate)


def write_record_csv(record: DatasetRecord, path: str | Path) -> None:
    """Write one dataset record as a three-column CSV with a rate header."""
    path = Path(path)
    lines = [f"{_RATE_PREFIX}{_format_float(record.clean.rate_hz)}", "clean,contaminated,mask"]
    for c, x, m in zip(record.clean.samples, record.contaminated.samples, record.artifact_mask):
        lines.append(f"{_format_float(c)},{_format_float(x)},{int(m)}")
    path.write_text("\n".join(lines) + "\n")


def read_record_csv(path: str | Path, seed: int = 0) -> DatasetRecord:
    """Read a record CSV. The seed is not stored in the CSV; pass the
    manifest's per-record seed to restore the full record identity."""
    path = Path(path)
    lines = path.read_text().splitlines()
    if len(lines) < 2:
        raise DataFormatError(f"{path}: file too short, expected rate header + column header")
    rate = _parse_rate_line(lines[0], path)
    if lines[1].strip() != "clean,contaminated,mask":
        raise DataFormatError(
            f"{path}: line 2 must be the header 'clean,contaminated,mask', got {lines[1]!r}"
        )
    rows = [line for line in lines[2:] if line.strip()]
    if not rows:
        raise DataFormatError(f"{path}: no data rows")
    clean = np.empty(len(rows))
    contaminated = np.empty(len(rows))
    mask = np.empty(len(rows), dtype=np.int64)
    for i, row in enumerate(rows):
        parts = row.split(",")
        if len(parts) != 3:
            raise DataFormatError(f"{path}: line {i + 3}: expected 3 columns, got {len(parts)}")
        try:
            clean[i] = float(parts[0])
            contaminated[i] = float(parts[1])
        except ValueError:
            raise DataFormatError(f"{path}: line {i + 3}: non-numeric value in {row!r}") from None
        if parts[2] not in ("0", "1"):
            raise DataFormatError(f"{path}: line {i + 3}: mask must be 0 or 1, got {parts[2]!r}")
        mask[i] = int(parts[2])
    return DatasetRecord(
        clean=TimeSeries(clean, rate),
        contaminated=TimeSeries(contaminated, rate),
        artifact_mask=mask,
        seed=seed,
    )


def write_json_atomic(obj: dict, path: str | Path) -> None:
    """Serialize to JSON with sorted keys; write via temp file + rename."""
    path = Path(path)
    text = json.dumps(obj, sort_keys=True, indent=2) + "\n"
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_json(path: str | Path) -> dict:
    path = Path(path)
    try:
        obj = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"{path}: invalid JSON: {exc}") from None
    if not isinstance(obj, dict):
        raise DataFormatError(f"{path}: expected a JSON object at top level")
    return obj


def record_file_name(index: int) -> str:
    return f"record_{index:04d}.csv"


def write_dataset(
    records: Sequence[DatasetRecord],
    cfg: SynthConfig,
    master_seed: int,
    out_dir: str | Path,
    test_fraction: float = 0.2,
    split_seed: int | None = None,
) -> dict:
    """Write record CSVs plus a manifest fixing config, seeds, and the split.

    Returns the manifest dict. The split seed defaults to the master seed so
    a dataset is fully determined by (cfg, master_seed, test_fraction).
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if split_seed is None:
        split_seed = master_seed
    train_idx, test_idx = split_indices(len(records), test_fraction, split_seed)
    entries = []
    for i, record in enumerate(records):
        name = record_file_name(i)
        write_record_csv(record, out_dir / name)
        entries.append({"file": name, "seed": int(record.seed)})
    manifest = {
        "kind": DATASET_MANIFEST_KIND,
        "version": DATASET_MANIFEST_VERSION,
        "config": cfg.to_dict(),
        "master_seed": int(master_seed),
        "rate_hz": float(cfg.rate),
        "n_samples": int(cfg.n_samples),
        "records": entries,
        "split": {
            "test_fraction": float(test_fraction),
            "seed": int(split_seed),
            "train": [int(i) for i in train_idx],
            "test": [int(i) for i in test_idx],
        },
    }
    write_json_atomic(manifest, out_dir / DATASET_MANIFEST_NAME)
    logger.info("wrote %d records + manifest to %s", len(records), out_dir)
    return manifest


def load_dataset(data_dir: str | Path) -> tuple[list[DatasetRecord], dict]:
    """Load all records listed by a dataset manifest, in manifest order."""
    data_dir = Path(data_dir)
    manifest_path = data_dir / DATASET_MANIFEST_NAME
    if not manifest_path.exists():
        raise DataFormatError(f"{data_dir}: no {DATASET_MANIFEST_NAME} found")
    manifest = read_json(manifest_path)
    if manifest.get("kind") != DATASET_MANIFEST_KIND:
        raise DataFormatError(f"{manifest_path}: kind is not {DATASET_MANIFEST_KIND!r}")
    if "records" not in manifest or "split" not in manifest:
        raise DataFormatError(f"{manifest_path}: missing 'records' or 'split'")
    records = []
    for entry in manifest["records"]:
        records.append(read_record_csv(data_dir / entry["file"], seed=int(entry["seed"])))
    n = len(records)
    split = manifest["split"]
    for key in ("train", "test"):
        idx = split.get(key, [])
        if any(not 0 <= int(i) < n for i in idx):
            raise DataFormatError(f"{manifest_path}: split index out of range in {key!r}")
    return records, manifest


def split_from_manifest(
    records: Sequence[DatasetRecord], manifest: dict
) -> tuple[list[DatasetRecord], list[DatasetRecord]]:
    """Partition loaded records by the manifest's stored split indices."""
    split = manifest["split"]
    train = [records[int(i)] for i in split["train"]]
    test = [records[int(i)] for i in split["test"]]
    return train, test
