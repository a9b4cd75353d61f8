"""Empirical mode decomposition built on pluggable envelope interpolation.

Sifting repeatedly subtracts the mean of the upper and lower envelopes until
the Cauchy-style SD statistic between successive proto-IMFs drops below a
threshold. The envelope interpolator is selectable: piecewise linear, natural
cubic spline (the classical choice), or a learned model supplied by the
caller. Denoising comes in two flavors: the mean-envelope output itself, and
reconstruction with the first IMFs removed.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import InsufficientExtremaError
from .signals import (
    LOWER,
    MEAN,
    UPPER,
    Envelope,
    TimeSeries,
    count_zero_crossings,
    extend_boundaries,
    find_local_extrema,
    interpolate_cubic_spline,
    interpolate_linear,
    mean_of_envelopes,
    reassemble_windows,
    window_signal,
)

logger = logging.getLogger(__name__)

LINEAR = "linear"
CUBIC_SPLINE = "cubic_spline"
LEARNED = "learned"

DEFAULT_SD_THRESHOLD = 0.2
DEFAULT_MAX_SIFT = 50
DEFAULT_MAX_IMFS = 10
DEFAULT_N_MIRROR = 2


@dataclass(frozen=True)
class InterpolatorKind:
    """Envelope interpolation strategy.

    The learned variant carries a model object exposing
    ``envelope(samples, polarity) -> np.ndarray``; classical variants carry
    none.
    """

    name: str
    model: object | None = None

    def __post_init__(self) -> None:
        if self.name not in (LINEAR, CUBIC_SPLINE, LEARNED):
            raise ValueError(f"unknown interpolator kind {self.name!r}")
        if self.name == LEARNED and self.model is None:
            raise ValueError("learned interpolator requires a model")
        if self.name != LEARNED and self.model is not None:
            raise ValueError(f"{self.name} interpolator does not take a model")

    @classmethod
    def linear(cls) -> "InterpolatorKind":
        return cls(LINEAR)

    @classmethod
    def cubic_spline(cls) -> "InterpolatorKind":
        return cls(CUBIC_SPLINE)

    @classmethod
    def learned(cls, model: object) -> "InterpolatorKind":
        return cls(LEARNED, model)


@dataclass(frozen=True)
class SiftResult:
    """One sifting pass: the local-mean envelope and the detail left over."""

    mean_env: Envelope
    detail: TimeSeries


@dataclass(frozen=True)
class EmdResult:
    """Decomposition output: IMFs (fastest first), residual, sift counts."""

    imfs: list[TimeSeries] = field(default_factory=list)
    residual: TimeSeries = None  # type: ignore[assignment]
    sift_counts: list[int] = field(default_factory=list)

    def reconstruct(self) -> np.ndarray:
        out = np.array(self.residual.samples)
        for imf in self.imfs:
            out += imf.samples
        return out


def _classical_envelope(
    samples: np.ndarray, knots: np.ndarray, values: np.ndarray, kind_name: str
) -> np.ndarray:
    grid = np.arange(samples.size, dtype=np.float64)
    if kind_name == LINEAR:
        return interpolate_linear(knots.astype(np.float64), values, grid)
    return interpolate_cubic_spline(knots.astype(np.float64), values, grid)


def compute_envelopes(
    window: TimeSeries,
    kind: InterpolatorKind,
    n_mirror: int = DEFAULT_N_MIRROR,
) -> tuple[Envelope, Envelope]:
    """Upper and lower envelopes of a window on its own sample grid.

    Classical kinds interpolate through mirror-extended extrema; the learned
    kind delegates both polarities to the model. Raises
    InsufficientExtremaError when the window lacks 2 maxima or 2 minima.
    """
    if kind.name == LEARNED:
        upper = np.asarray(kind.model.envelope(window.samples, UPPER), dtype=np.float64)
        lower = np.asarray(kind.model.envelope(window.samples, LOWER), dtype=np.float64)
        return Envelope(upper, UPPER), Envelope(lower, LOWER)

    maxima, minima = find_local_extrema(window)
    ext_max, ext_min = extend_boundaries(maxima, minima, len(window), n_mirror)
    upper = _classical_envelope(window.samples, ext_max.indices, ext_max.values, kind.name)
    lower = _classical_envelope(window.samples, ext_min.indices, ext_min.values, kind.name)
    return Envelope(upper, UPPER), Envelope(lower, LOWER)


def sift_once(
    window: TimeSeries,
    kind: InterpolatorKind,
    n_mirror: int = DEFAULT_N_MIRROR,
) -> SiftResult:
    """Subtract the envelope mean from the window once."""
    upper, lower = compute_envelopes(window, kind, n_mirror)
    mean_env = mean_of_envelopes(upper, lower)
    detail = window.with_samples(window.samples - mean_env.values)
    return SiftResult(mean_env, detail)


def _satisfies_oscillation_law(samples: np.ndarray) -> bool:
    # Judged on the interior 90% so boundary mirroring effects do not
    # count against the extrema/zero-crossing balance; a candidate whose
    # full window passes can still carry a riding wave inside the trim.
    n = samples.size
    interior = samples[int(0.05 * n) : int(0.95 * n)]
    if interior.size < 3:
        interior = samples
    maxima, minima = find_local_extrema(interior)
    return abs(len(maxima) + len(minima) - count_zero_crossings(interior)) <= 1


def extract_imf(
    window: TimeSeries,
    kind: InterpolatorKind,
    sd_threshold: float = DEFAULT_SD_THRESHOLD,
    max_sift: int = DEFAULT_MAX_SIFT,
    n_mirror: int = DEFAULT_N_MIRROR,
) -> tuple[TimeSeries, int]:
    """Sift until the candidate is an IMF and the SD statistic settles.

    SD after pass k is sum((h_{k-1} - h_k)^2) / sum(h_{k-1}^2); sifting stops
    once SD < sd_threshold and the candidate's extrema and zero-crossing
    counts differ by at most one (the defining IMF property; the SD test
    alone can leave riding waves on noisy inputs). Insufficient extrema on
    the first pass propagate; on a later pass they end the loop and the
    current proto-IMF is returned. Returns (imf, passes_run).
    """
    if sd_threshold <= 0:
        raise ValueError(f"sd_threshold must be positive, got {sd_threshold}")
    if max_sift < 1:
        raise ValueError(f"max_sift must be >= 1, got {max_sift}")

    h = window
    iterations = 0
    for iteration in range(1, max_sift + 1):
        try:
            result = sift_once(h, kind, n_mirror)
        except InsufficientExtremaError:
            if iteration == 1:
                raise
            break
        prev = h.samples
        h = result.detail
        iterations = iteration
        denom = float(np.sum(prev * prev))
        if denom == 0.0:
            break
        sd = float(np.sum((prev - h.samples) ** 2)) / denom
        if sd < sd_threshold and _satisfies_oscillation_law(h.samples):
            break
    return h, iterations


def _has_enough_extrema(samples: np.ndarray) -> bool:
    maxima, minima = find_local_extrema(samples)
    return len(maxima) >= 2 and len(minima) >= 2


def decompose(
    ts: TimeSeries,
    kind: InterpolatorKind,
    max_imfs: int = DEFAULT_MAX_IMFS,
    sd_threshold: float = DEFAULT_SD_THRESHOLD,
    max_sift: int = DEFAULT_MAX_SIFT,
    n_mirror: int = DEFAULT_N_MIRROR,
) -> EmdResult:
    """Full EMD: peel off IMFs until the residual is too flat or max_imfs hit.

    The residual update is a plain subtraction, so summing all IMFs plus the
    residual telescopes back to the input.
    """
    if max_imfs < 1:
        raise ValueError(f"max_imfs must be >= 1, got {max_imfs}")
    imfs: list[TimeSeries] = []
    counts: list[int] = []
    residual = ts
    while len(imfs) < max_imfs and _has_enough_extrema(residual.samples):
        imf, n_iter = extract_imf(residual, kind, sd_threshold, max_sift, n_mirror)
        imfs.append(imf)
        counts.append(n_iter)
        residual = residual.with_samples(residual.samples - imf.samples)
    return EmdResult(imfs, residual, counts)


def denoise_mean_envelope(
    ts: TimeSeries,
    kind: InterpolatorKind,
    window_len: int = 800,
    hop: int = 200,
    n_mirror: int = DEFAULT_N_MIRROR,
) -> TimeSeries:
    """Denoise by replacing each window with its envelope mean.

    Windows that lack enough extrema pass through unchanged (logged). The
    windowed results are overlap-averaged back onto the original grid, so the
    output has the input's length and rate.
    """
    starts, windows = window_signal(ts, window_len, hop)
    segments: list[np.ndarray] = []
    for start, samples in zip(starts, windows):
        window = ts.with_samples(samples)
        try:
            upper, lower = compute_envelopes(window, kind, n_mirror)
        except InsufficientExtremaError:
            logger.warning(
                "window at %d lacks extrema for envelopes; passing it through", start
            )
            segments.append(samples)
            continue
        segments.append(mean_of_envelopes(upper, lower).values)
    return ts.with_samples(reassemble_windows(segments, starts, len(ts)))


def denoise_subtract_imf(
    ts: TimeSeries,
    kind: InterpolatorKind,
    n_remove: int = 1,
    max_imfs: int = DEFAULT_MAX_IMFS,
    sd_threshold: float = DEFAULT_SD_THRESHOLD,
    max_sift: int = DEFAULT_MAX_SIFT,
    n_mirror: int = DEFAULT_N_MIRROR,
) -> TimeSeries:
    """Denoise by dropping the first n_remove IMFs from the reconstruction.

    n_remove = 0 reproduces the input up to floating-point roundoff; values
    beyond the number of extracted IMFs leave just the residual.
    """
    if n_remove < 0:
        raise ValueError(f"n_remove must be >= 0, got {n_remove}")
    result = decompose(ts, kind, max_imfs, sd_threshold, max_sift, n_mirror)
    if n_remove > len(result.imfs):
        logger.warning(
            "asked to remove %d IMFs but only %d extracted; keeping residual only",
            n_remove,
            len(result.imfs),
        )
    out = np.array(result.residual.samples)
    for imf in result.imfs[n_remove:]:
        out += imf.samples
    return ts.with_samples(out)
