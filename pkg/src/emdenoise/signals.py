"""Core signal types, extrema detection, envelope interpolation, and windowing.

All sample arrays are one-dimensional float64. Extrema indices follow the
plateau-collapsed convention: a run of equal samples bounded by strictly
lower (higher) neighbors counts as a single maximum (minimum) located at the
floor of the run's midpoint, and the first and last samples are never
extrema. Interpolators clamp instead of extrapolating outside the knot span.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InsufficientExtremaError

UPPER = "upper"
LOWER = "lower"
MEAN = "mean"


def _as_samples(x: "TimeSeries | np.ndarray") -> np.ndarray:
    if isinstance(x, TimeSeries):
        return x.samples
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError(f"expected a 1-d sample array, got shape {arr.shape}")
    return arr


@dataclass(frozen=True)
class TimeSeries:
    """A uniformly sampled signal with its sampling rate in Hz.

    Instances are immutable; the sample buffer is copied on construction and
    marked read-only so shared references cannot drift.
    """

    samples: np.ndarray
    rate_hz: float

    def __post_init__(self) -> None:
        samples = np.array(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise ValueError(f"samples must be 1-d, got shape {samples.shape}")
        if samples.size < 2:
            raise ValueError("a time series needs at least 2 samples")
        if not np.all(np.isfinite(samples)):
            raise ValueError("samples must be finite")
        rate = float(self.rate_hz)
        if not np.isfinite(rate) or rate <= 0.0:
            raise ValueError(f"rate_hz must be a positive finite number, got {rate}")
        samples.flags.writeable = False
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "rate_hz", rate)

    def __len__(self) -> int:
        return self.samples.size

    @property
    def duration_s(self) -> float:
        return self.samples.size / self.rate_hz

    def with_samples(self, samples: np.ndarray) -> "TimeSeries":
        """Same rate, new sample buffer."""
        return TimeSeries(samples, self.rate_hz)


@dataclass(frozen=True)
class ExtremaSet:
    """Indices and values of one kind of extremum, sorted by index.

    Indices are normally inside [0, n); after mirror extension they may lie
    outside that range (negative on the left, >= n on the right), and the
    strict ordering invariant is the one that survives.
    """

    indices: np.ndarray
    values: np.ndarray
    kind: str

    def __post_init__(self) -> None:
        indices = np.array(self.indices, dtype=np.int64)
        values = np.array(self.values, dtype=np.float64)
        if indices.ndim != 1 or values.ndim != 1:
            raise ValueError("indices and values must be 1-d")
        if indices.size != values.size:
            raise ValueError(
                f"index/value length mismatch: {indices.size} != {values.size}"
            )
        if indices.size > 1 and not np.all(np.diff(indices) > 0):
            raise ValueError("indices must be strictly increasing")
        if self.kind not in ("max", "min"):
            raise ValueError(f"kind must be 'max' or 'min', got {self.kind!r}")
        indices.flags.writeable = False
        values.flags.writeable = False
        object.__setattr__(self, "indices", indices)
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return self.indices.size


@dataclass(frozen=True)
class Envelope:
    """An envelope sampled on the same grid as its source signal."""

    values: np.ndarray
    polarity: str

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=np.float64)
        if values.ndim != 1:
            raise ValueError("envelope values must be 1-d")
        if self.polarity not in (UPPER, LOWER, MEAN):
            raise ValueError(f"polarity must be upper/lower/mean, got {self.polarity!r}")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return self.values.size


def find_local_extrema(x: "TimeSeries | np.ndarray") -> tuple[ExtremaSet, ExtremaSet]:
    """Locate interior maxima and minima with plateau collapsing.

    A plateau (run of equal samples) bounded on both sides by strictly lower
    values yields one maximum at floor of the run midpoint; symmetrically for
    minima. Endpoints are never reported, so monotonic and constant signals
    yield empty sets.

    Returns
    -------
    (maxima, minima) : tuple of ExtremaSet
    """
    samples = _as_samples(x)
    n = samples.size
    if n < 3:
        empty = np.empty(0)
        return (
            ExtremaSet(empty.astype(np.int64), empty, "max"),
            ExtremaSet(empty.astype(np.int64), empty, "min"),
        )

    # Collapse runs of equal values: run j spans [starts[j], ends[j]].
    change = np.nonzero(np.diff(samples))[0]
    starts = np.concatenate(([0], change + 1))
    ends = np.concatenate((change, [n - 1]))
    vals = samples[starts]

    if vals.size < 3:
        empty = np.empty(0)
        return (
            ExtremaSet(empty.astype(np.int64), empty, "max"),
            ExtremaSet(empty.astype(np.int64), empty, "min"),
        )

    left, mid, right = vals[:-2], vals[1:-1], vals[2:]
    centers = (starts[1:-1] + ends[1:-1]) // 2
    is_max = (mid > left) & (mid > right)
    is_min = (mid < left) & (mid < right)
    return (
        ExtremaSet(centers[is_max], mid[is_max], "max"),
        ExtremaSet(centers[is_min], mid[is_min], "min"),
    )


def _mirror_one(ext: ExtremaSet, n: int, n_mirror: int) -> ExtremaSet:
    idx = ext.indices
    val = ext.values
    k = min(n_mirror, idx.size)
    # Reflect the k extrema nearest each end about sample 0 and sample n-1.
    pre_idx = (-idx[:k])[::-1]
    pre_val = val[:k][::-1]
    post_idx = (2 * (n - 1) - idx[-k:])[::-1]
    post_val = val[-k:][::-1]
    return ExtremaSet(
        np.concatenate((pre_idx, idx, post_idx)),
        np.concatenate((pre_val, val, post_val)),
        ext.kind,
    )


def extend_boundaries(
    maxima: ExtremaSet,
    minima: ExtremaSet,
    n_samples: int,
    n_mirror: int = 2,
) -> tuple[ExtremaSet, ExtremaSet]:
    """Mirror interior extrema about the first and last sample.

    Each set is extended independently: the n_mirror extrema nearest the
    start are reflected about index 0 (an extremum at index i lands at -i)
    and the n_mirror nearest the end about index n-1. Values are copied
    verbatim. This damps envelope end swings without inventing data.

    Raises InsufficientExtremaError when either set has fewer than 2 entries.
    """
    if n_mirror < 1:
        raise ValueError(f"n_mirror must be >= 1, got {n_mirror}")
    if len(maxima) < 2 or len(minima) < 2:
        raise InsufficientExtremaError(
            f"need at least 2 maxima and 2 minima to extend, "
            f"got {len(maxima)} maxima / {len(minima)} minima"
        )
    return _mirror_one(maxima, n_samples, n_mirror), _mirror_one(minima, n_samples, n_mirror)


def _check_knots(knots_x: np.ndarray, knots_y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    kx = np.asarray(knots_x, dtype=np.float64)
    ky = np.asarray(knots_y, dtype=np.float64)
    if kx.ndim != 1 or ky.ndim != 1 or kx.size != ky.size:
        raise ValueError("knot coordinate arrays must be 1-d and equal length")
    if kx.size < 2:
        raise ValueError(f"need at least 2 knots, got {kx.size}")
    if not np.all(np.diff(kx) > 0):
        raise ValueError("knot positions must be strictly increasing")
    return kx, ky


def interpolate_linear(
    knots_x: np.ndarray, knots_y: np.ndarray, query_x: np.ndarray
) -> np.ndarray:
    """Piecewise-linear interpolation through every knot, clamped outside the span."""
    kx, ky = _check_knots(knots_x, knots_y)
    return np.interp(np.asarray(query_x, dtype=np.float64), kx, ky)


def _natural_spline_moments(kx: np.ndarray, ky: np.ndarray) -> np.ndarray:
    """Second derivatives of the natural cubic spline at the knots (Thomas solve)."""
    m = kx.size
    moments = np.zeros(m)
    if m == 2:
        return moments
    h = np.diff(kx)
    slopes = np.diff(ky) / h
    rhs = 6.0 * np.diff(slopes)

    # Tridiagonal system over interior knots; natural ends pin M[0] = M[-1] = 0.
    diag = 2.0 * (h[:-1] + h[1:])
    sub = h[1:-1].copy()
    sup = h[1:-1].copy()
    for i in range(1, m - 2):
        w = sub[i - 1] / diag[i - 1]
        diag[i] -= w * sup[i - 1]
        rhs[i] -= w * rhs[i - 1]
    interior = np.zeros(m - 2)
    interior[-1] = rhs[-1] / diag[-1]
    for i in range(m - 4, -1, -1):
        interior[i] = (rhs[i] - sup[i] * interior[i + 1]) / diag[i]
    moments[1:-1] = interior
    return moments


def interpolate_cubic_spline(
    knots_x: np.ndarray, knots_y: np.ndarray, query_x: np.ndarray
) -> np.ndarray:
    """Natural cubic spline through the knots, clamped outside the span.

    Natural boundary conditions (zero second derivative at the end knots);
    with exactly two knots the spline degenerates to the straight segment.
    Queries outside [knots_x[0], knots_x[-1]] evaluate to the end-knot values.
    """
    kx, ky = _check_knots(knots_x, knots_y)
    moments = _natural_spline_moments(kx, ky)

    q = np.clip(np.asarray(query_x, dtype=np.float64), kx[0], kx[-1])
    seg = np.clip(np.searchsorted(kx, q, side="right") - 1, 0, kx.size - 2)
    h = kx[seg + 1] - kx[seg]
    u = (kx[seg + 1] - q) / h
    w = (q - kx[seg]) / h
    return (
        u * ky[seg]
        + w * ky[seg + 1]
        + ((u**3 - u) * moments[seg] + (w**3 - w) * moments[seg + 1]) * h**2 / 6.0
    )


def mean_of_envelopes(upper: Envelope, lower: Envelope) -> Envelope:
    """Elementwise average of an upper and a lower envelope."""
    if upper.polarity != UPPER or lower.polarity != LOWER:
        raise ValueError(
            f"expected (upper, lower) envelopes, got ({upper.polarity}, {lower.polarity})"
        )
    if len(upper) != len(lower):
        raise ValueError(f"envelope length mismatch: {len(upper)} != {len(lower)}")
    return Envelope((upper.values + lower.values) / 2.0, MEAN)


def count_zero_crossings(x: "TimeSeries | np.ndarray") -> int:
    """Number of sign changes, counting a run of exact zeros as one crossing.

    Zeros between samples of the same sign do not count; a signal that only
    touches zero and returns has no crossing there.
    """
    signs = np.sign(_as_samples(x))
    nonzero = signs[signs != 0.0]
    if nonzero.size < 2:
        return 0
    return int(np.count_nonzero(nonzero[1:] != nonzero[:-1]))


def window_starts(n: int, window_len: int, hop: int) -> np.ndarray:
    """Start offsets of hop-spaced windows covering all n samples.

    The final window is pulled back to n - window_len when the hop grid
    would leave a tail uncovered, so every sample belongs to at least one
    window.
    """
    if window_len < 1 or window_len > n:
        raise ValueError(f"window_len must be in [1, {n}], got {window_len}")
    if hop < 1:
        raise ValueError(f"hop must be >= 1, got {hop}")
    starts = list(range(0, n - window_len + 1, hop))
    if starts[-1] != n - window_len:
        starts.append(n - window_len)
    return np.asarray(starts, dtype=np.int64)


def window_signal(
    ts: TimeSeries, window_len: int, hop: int
) -> tuple[np.ndarray, list[np.ndarray]]:
    """Slice a signal into hop-spaced windows of fixed length.

    Returns (starts, windows); reassemble_windows inverts the operation by
    averaging overlapped samples.
    """
    starts = window_starts(len(ts), window_len, hop)
    windows = [np.array(ts.samples[s : s + window_len]) for s in starts]
    return starts, windows


def reassemble_windows(
    segments: list[np.ndarray], starts: np.ndarray, n: int
) -> np.ndarray:
    """Overlap-average window segments back onto an n-sample grid.

    Non-overlapping tilings concatenate exactly; where windows overlap, each
    sample is the mean of every segment covering it. Raises ValueError if
    some sample is covered by no segment.
    """
    if len(segments) != len(starts):
        raise ValueError(f"{len(segments)} segments vs {len(starts)} starts")
    acc = np.zeros(n)
    count = np.zeros(n)
    for seg, s in zip(segments, starts):
        seg = np.asarray(seg, dtype=np.float64)
        if s < 0 or s + seg.size > n:
            raise ValueError(f"segment at {s} with length {seg.size} exceeds [0, {n})")
        acc[s : s + seg.size] += seg
        count[s : s + seg.size] += 1.0
    if np.any(count == 0):
        raise ValueError("segments do not cover every sample")
    return acc / count
