"""Empirical-mode denoising of artifact-contaminated biosignals.

The package decomposes a signal by envelope sifting, detects artifact
windows, and reconstructs a cleaned trace either from the mean envelope
or by subtracting the extracted mode. Envelope interpolation can be
linear, cubic spline, or a small trained attention encoder that predicts
envelope values from the extremum pattern of a window.

``TimeSeries`` is re-exported lazily so that importing the package (for
example via the console script) does not pull in numpy before the CLI has
had a chance to pin the BLAS thread pools.
"""

import importlib

from emdenoise.errors import (
    DataFormatError,
    EmdenoiseError,
    InsufficientExtremaError,
    NumericError,
)

__all__ = [
    "DataFormatError",
    "EmdenoiseError",
    "InsufficientExtremaError",
    "NumericError",
    "TimeSeries",
    "__version__",
]

__version__ = "0.1.0"

_LAZY = {"TimeSeries": "emdenoise.signals"}


def __getattr__(name):
    if name in _LAZY:
        return getattr(importlib.import_module(_LAZY[name]), name)
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")
