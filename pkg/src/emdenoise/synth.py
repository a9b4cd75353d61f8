"""Seeded generation of EEG-like records contaminated by chewing bursts.

A clean record is a sum of narrowband rhythm components (random-phase
synthesis in the frequency domain, each scaled to an exact RMS amplitude)
plus 1/f-shaped background noise. The chewing artifact is a band-limited
noise burst with a cosine-tapered onset/offset, added at a seeded random
position and rescaled so its RMS over the burst support is an exact
multiple of the clean record's RMS.

All randomness flows through ``numpy.random.default_rng`` (PCG64). A record
with seed ``s`` uses sub-stream ``[s, 0]`` for the clean signal and
``[s, 1]`` for the artifact; dataset splitting uses ``[seed, 2]``. Records
of a dataset use seeds ``master_seed + index``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .encoder import TrainingPair, encode_window
from .errors import InsufficientExtremaError
from .signals import (
    TimeSeries,
    extend_boundaries,
    find_local_extrema,
    interpolate_cubic_spline,
    window_starts,
)

logger = logging.getLogger(__name__)

DEFAULT_RHYTHM_BANDS = (
    (6.0, 2.0, 1.0),
    (10.0, 2.0, 2.0),
    (20.0, 6.0, 0.5),
)


@dataclass(frozen=True)
class SynthConfig:
    """Knobs for the synthetic recording protocol.

    ``rhythm_bands`` is a tuple of (center_hz, bandwidth_hz, rms_amplitude)
    triples; the defaults put a strong alpha component at 10 Hz between a
    weaker theta and a broad low-amplitude beta.
    """

    rate: float = 250.0
    duration_s: float = 4.0
    record_count: int = 300
    rhythm_bands: tuple = DEFAULT_RHYTHM_BANDS
    pink_amplitude: float = 1.0
    artifact_band: tuple = (20.0, 60.0)
    artifact_multiplier: float = 5.0
    artifact_duration_range: tuple = (0.5, 1.5)

    def __post_init__(self):
        if self.rate <= 0:
            raise ValueError(f"rate must be positive, got {self.rate}")
        if self.duration_s <= 0:
            raise ValueError(f"duration_s must be positive, got {self.duration_s}")
        exact = self.rate * self.duration_s
        if abs(exact - round(exact)) > 1e-9 or round(exact) < 2:
            raise ValueError(
                f"rate * duration_s must be an integer sample count >= 2, got {exact}"
            )
        if self.record_count < 1:
            raise ValueError(f"record_count must be >= 1, got {self.record_count}")
        nyquist = self.rate / 2.0
        bands = tuple(
            (float(c), float(b), float(a)) for c, b, a in self.rhythm_bands
        )
        object.__setattr__(self, "rhythm_bands", bands)
        for center, bandwidth, amplitude in bands:
            lo, hi = center - bandwidth / 2.0, center + bandwidth / 2.0
            if lo <= 0 or hi >= nyquist:
                raise ValueError(
                    f"rhythm band {center}+/-{bandwidth / 2} Hz exceeds (0, {nyquist}) Hz"
                )
            if amplitude < 0:
                raise ValueError(f"rhythm amplitude must be >= 0, got {amplitude}")
        if self.pink_amplitude < 0:
            raise ValueError(f"pink_amplitude must be >= 0, got {self.pink_amplitude}")
        lo, hi = self.artifact_band
        if not (0 < lo < hi < nyquist):
            raise ValueError(
                f"artifact_band must satisfy 0 < lo < hi < {nyquist}, got {self.artifact_band}"
            )
        object.__setattr__(self, "artifact_band", (float(lo), float(hi)))
        if self.artifact_multiplier <= 0:
            raise ValueError(
                f"artifact_multiplier must be positive, got {self.artifact_multiplier}"
            )
        dlo, dhi = self.artifact_duration_range
        if not (0 < dlo <= dhi):
            raise ValueError(
                f"artifact_duration_range must satisfy 0 < lo <= hi, got {self.artifact_duration_range}"
            )
        object.__setattr__(self, "artifact_duration_range", (float(dlo), float(dhi)))

    @property
    def n_samples(self) -> int:
        return int(round(self.rate * self.duration_s))

    def to_dict(self) -> dict:
        return {
            "rate": self.rate,
            "duration_s": self.duration_s,
            "record_count": self.record_count,
            "rhythm_bands": [list(band) for band in self.rhythm_bands],
            "pink_amplitude": self.pink_amplitude,
            "artifact_band": list(self.artifact_band),
            "artifact_multiplier": self.artifact_multiplier,
            "artifact_duration_range": list(self.artifact_duration_range),
        }


@dataclass(frozen=True)
class DatasetRecord:
    """One (clean, contaminated, artifact mask) triple plus its seed."""

    clean: TimeSeries
    contaminated: TimeSeries
    artifact_mask: np.ndarray
    seed: int

    def __post_init__(self):
        mask = np.asarray(self.artifact_mask, dtype=np.int64)
        mask.flags.writeable = False
        object.__setattr__(self, "artifact_mask", mask)
        if len(self.clean) != len(self.contaminated) or len(mask) != len(self.clean):
            raise ValueError("clean, contaminated, and mask lengths must agree")
        if self.clean.rate_hz != self.contaminated.rate_hz:
            raise ValueError("clean and contaminated rates must agree")
        if not np.all((mask == 0) | (mask == 1)):
            raise ValueError("artifact_mask must be 0/1 valued")
        off = mask == 0
        if not np.array_equal(
            self.clean.samples[off], self.contaminated.samples[off]
        ):
            raise ValueError("contaminated must equal clean exactly off-mask")


def _random_phase_band(rng, n, rate, f_lo, f_hi, rms):
    """Narrowband series: unit-magnitude random phases on bins in [f_lo, f_hi],
    inverse-transformed and rescaled to an exact RMS."""
    freqs = np.fft.rfftfreq(n, d=1.0 / rate)
    sel = (freqs >= f_lo) & (freqs <= f_hi)
    # Phases are drawn even when the amplitude is zero so the draw order
    # seen by later components never depends on amplitude values.
    phases = rng.uniform(0.0, 2.0 * np.pi, size=int(sel.sum()))
    if not np.any(sel):
        raise ValueError(
            f"band [{f_lo}, {f_hi}] Hz contains no frequency bin at n={n}, rate={rate}"
        )
    spectrum = np.zeros(len(freqs), dtype=complex)
    spectrum[sel] = np.exp(1j * phases)
    if n % 2 == 0:
        spectrum[-1] = spectrum[-1].real
    x = np.fft.irfft(spectrum, n=n)
    current = np.sqrt(np.mean(x**2))
    if current == 0.0:
        return np.zeros(n)
    return x * (rms / current)


def _pink_noise(rng, n, rate, rms):
    """1/f-shaped noise via random phases with 1/sqrt(f) spectral magnitude."""
    freqs = np.fft.rfftfreq(n, d=1.0 / rate)
    phases = rng.uniform(0.0, 2.0 * np.pi, size=len(freqs) - 1)
    spectrum = np.zeros(len(freqs), dtype=complex)
    spectrum[1:] = np.exp(1j * phases) / np.sqrt(freqs[1:])
    if n % 2 == 0:
        spectrum[-1] = spectrum[-1].real
    x = np.fft.irfft(spectrum, n=n)
    current = np.sqrt(np.mean(x**2))
    if current == 0.0 or rms == 0.0:
        return np.zeros(n)
    return x * (rms / current)


def generate_clean_eeg(cfg: SynthConfig, seed: int) -> TimeSeries:
    """Clean record for ``seed``: configured rhythm bands plus pink noise.

    Uses sub-stream [seed, 0]; bands are drawn in configuration order and
    the pink noise last, so the output is bitwise-stable per (cfg, seed).
    """
    rng = np.random.default_rng([seed, 0])
    n = cfg.n_samples
    total = np.zeros(n)
    for center, bandwidth, amplitude in cfg.rhythm_bands:
        half = bandwidth / 2.0
        total += _random_phase_band(
            rng, n, cfg.rate, center - half, center + half, amplitude
        )
    total += _pink_noise(rng, n, cfg.rate, cfg.pink_amplitude)
    return TimeSeries(total, cfg.rate)


def _tukey_window(m: int, alpha: float = 0.2) -> np.ndarray:
    """Cosine-tapered window: flat top with cosine ramps covering an
    alpha fraction of the length."""
    if m == 1 or alpha <= 0:
        return np.ones(m)
    w = np.ones(m)
    edge = int(np.floor(alpha * (m - 1) / 2.0))
    if edge > 0:
        t = np.arange(edge + 1)
        ramp = 0.5 * (1.0 + np.cos(np.pi * (2.0 * t / (alpha * (m - 1)) - 1.0)))
        w[: edge + 1] = ramp
        w[m - edge - 1 :] = ramp[::-1]
    return w


def inject_chewing_artifact(
    clean: TimeSeries, cfg: SynthConfig, seed: int
) -> DatasetRecord:
    """Add one band-limited burst to ``clean`` at a seeded random position.

    Uses sub-stream [seed, 1]. Draw order: burst duration, onset, band
    phases. The tapered burst is rescaled so its RMS over the mask equals
    exactly ``artifact_multiplier`` times the clean record's RMS; samples
    off the mask are left bit-identical to the clean record.
    """
    n = len(clean)
    dlo, dhi = cfg.artifact_duration_range
    if dhi >= clean.duration_s:
        raise ValueError(
            f"artifact duration up to {dhi} s does not fit in a "
            f"{clean.duration_s} s record"
        )
    rng = np.random.default_rng([seed, 1])
    duration = rng.uniform(dlo, dhi)
    m = max(2, int(round(duration * clean.rate_hz)))
    onset = int(rng.integers(0, n - m + 1))

    f_lo, f_hi = cfg.artifact_band
    burst = _random_phase_band(rng, m, clean.rate_hz, f_lo, f_hi, 1.0)
    burst *= _tukey_window(m)
    burst_rms = np.sqrt(np.mean(burst**2))
    clean_rms = np.sqrt(np.mean(clean.samples**2))
    burst *= cfg.artifact_multiplier * clean_rms / burst_rms

    contaminated = clean.samples.copy()
    contaminated[onset : onset + m] += burst
    mask = np.zeros(n, dtype=np.int64)
    mask[onset : onset + m] = 1
    return DatasetRecord(
        clean=clean,
        contaminated=TimeSeries(contaminated, clean.rate_hz),
        artifact_mask=mask,
        seed=seed,
    )


def build_dataset(cfg: SynthConfig, master_seed: int) -> list:
    """All records of the protocol; record i uses seed master_seed + i."""
    records = []
    for i in range(cfg.record_count):
        seed = master_seed + i
        clean = generate_clean_eeg(cfg, seed)
        records.append(inject_chewing_artifact(clean, cfg, seed))
    return records


def make_training_pairs(
    record: DatasetRecord,
    window_len: int,
    hop: int,
    polarities: tuple = ("upper", "lower"),
    n_mirror: int = 2,
) -> list:
    """Windowed training pairs for one record.

    Inputs encode the CONTAMINATED window's maxima (the lower polarity is
    negated into upper orientation first); the target is the natural-spline
    envelope of the matching CLEAN window, mapped by the same per-pair
    normalization. Windows where either signal lacks enough extrema are
    skipped with a log line rather than raised.
    """
    for polarity in polarities:
        if polarity not in ("upper", "lower"):
            raise ValueError(f"unknown polarity {polarity!r}")
    n = len(record.clean)
    pairs = []
    grid = np.arange(window_len, dtype=float)
    for start in window_starts(n, window_len, hop):
        stop = start + window_len
        for polarity in polarities:
            sign = 1.0 if polarity == "upper" else -1.0
            contaminated = sign * record.contaminated.samples[start:stop]
            clean = sign * record.clean.samples[start:stop]
            try:
                encoded, shift, scale = encode_window(contaminated)
                maxima, minima = find_local_extrema(clean)
                maxima, _ = extend_boundaries(maxima, minima, window_len, n_mirror)
            except InsufficientExtremaError as exc:
                logger.info(
                    "skipping window at %d (%s): %s", start, polarity, exc
                )
                continue
            envelope = interpolate_cubic_spline(
                maxima.indices.astype(float), maxima.values, grid
            )
            target = (envelope - shift) / scale
            pairs.append(TrainingPair(encoded, target, shift, scale))
    return pairs


def split_indices(n: int, test_fraction: float, seed: int) -> tuple:
    """Disjoint, exhaustive (train, test) index arrays in ascending order.

    The permutation comes from sub-stream [seed, 2]; the test side takes
    round(n * test_fraction) entries.
    """
    if not (0.0 < test_fraction < 1.0):
        raise ValueError(f"test_fraction must be in (0, 1), got {test_fraction}")
    if n < 1:
        raise ValueError(f"need at least one record, got {n}")
    rng = np.random.default_rng([seed, 2])
    perm = rng.permutation(n)
    n_test = int(round(n * test_fraction))
    test = np.sort(perm[:n_test])
    train = np.sort(perm[n_test:])
    return train, test


def split_dataset(records: list, test_fraction: float, seed: int) -> tuple:
    """Split records into (train, test) lists via ``split_indices``."""
    train_idx, test_idx = split_indices(len(records), test_fraction, seed)
    train = [records[i] for i in train_idx]
    test = [records[i] for i in test_idx]
    return train, test
