"""Lossless model persistence.

One JSON document per model: a header with the format version and every
architecture field, then the tensors in canonical order as row-major value
lists. Python float repr is shortest-round-trip, so save/load is bitwise
exact. Loading validates the header, the tensor set, and every shape before
constructing anything; a bad file never yields partial parameters.
"""

from __future__ import annotations

import json
import os
from pathlib import Path

import numpy as np

from ..errors import DataFormatError
from .model import EncoderConfig, ModelParams, expected_shapes

FORMAT_VERSION = 1


def save_weights(path: str | Path, params: ModelParams, config: EncoderConfig) -> None:
    """Write params + config as one self-describing JSON document (atomic)."""
    tensors = []
    for name, arr in params.named_arrays():
        if not np.all(np.isfinite(arr)):
            raise ValueError(f"tensor {name} contains non-finite values; refusing to save")
        tensors.append(
            {
                "name": name,
                "shape": list(arr.shape),
                "values": [float(v) for v in arr.reshape(-1)],
            }
        )
    doc = {
        "format_version": FORMAT_VERSION,
        "config": config.to_dict(),
        "tensors": tensors,
    }
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, allow_nan=False)
    os.replace(tmp, path)


def load_weights(path: str | Path) -> tuple[ModelParams, EncoderConfig]:
    """Read a weights document back into (params, config).

    Raises DataFormatError on unparseable JSON, version or config mismatch,
    missing/extra tensors, wrong shapes, or non-finite values.
    """
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise DataFormatError(f"cannot read weights file {path}: {exc}") from exc

    if not isinstance(doc, dict) or doc.get("format_version") != FORMAT_VERSION:
        raise DataFormatError(
            f"unsupported weights format in {path}: "
            f"expected format_version {FORMAT_VERSION}, got {doc.get('format_version')!r}"
        )
    try:
        raw_config = dict(doc["config"])
        raw_config["stack_units"] = tuple(raw_config["stack_units"])
        config = EncoderConfig(**raw_config)
    except (KeyError, TypeError, ValueError) as exc:
        raise DataFormatError(f"invalid config block in {path}: {exc}") from exc

    shapes = expected_shapes(config)
    loaded: dict[str, np.ndarray] = {}
    for entry in doc.get("tensors", []):
        try:
            name = entry["name"]
            shape = tuple(entry["shape"])
            values = np.asarray(entry["values"], dtype=np.float64)
        except (KeyError, TypeError, ValueError) as exc:
            raise DataFormatError(f"malformed tensor entry in {path}: {exc}") from exc
        if name not in shapes:
            raise DataFormatError(f"unexpected tensor {name!r} in {path}")
        if name in loaded:
            raise DataFormatError(f"duplicate tensor {name!r} in {path}")
        if shape != shapes[name] or values.size != int(np.prod(shape)):
            raise DataFormatError(
                f"tensor {name!r} has shape {shape} with {values.size} values; "
                f"expected {shapes[name]}"
            )
        if not np.all(np.isfinite(values)):
            raise DataFormatError(f"tensor {name!r} in {path} has non-finite values")
        loaded[name] = values.reshape(shape)
    missing = set(shapes) - set(loaded)
    if missing:
        raise DataFormatError(f"weights file {path} is missing tensors: {sorted(missing)}")

    n_dense = sum(1 for n in shapes if n.endswith(".kernel"))
    return (
        ModelParams(
            loaded["attention.wq"],
            loaded["attention.wk"],
            loaded["attention.wv"],
            loaded["attention.wo"],
            [loaded[f"dense_{i}.kernel"] for i in range(n_dense)],
            [loaded[f"dense_{i}.bias"] for i in range(n_dense)],
        ),
        config,
    )
