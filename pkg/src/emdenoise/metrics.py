"""Signal-quality measurements and the method-comparison harness.

SNR is clean-referenced: 10*log10 of clean power over residual-error power,
which is the only defensible reference when the clean signal is known. The
periodogram is a single-segment windowed estimate normalized so that the
PSD integrates (bin sum times bin width) to the windowed signal's mean
power; band powers integrate bins by their center frequency.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .emd import DEFAULT_N_MIRROR, InterpolatorKind, denoise_mean_envelope
from .errors import EmdenoiseError, NumericError
from .signals import TimeSeries

logger = logging.getLogger(__name__)

ALPHA_BAND = (8.0, 13.0)

RECTANGULAR = "rectangular"
HANN = "hann"


def snr_db(clean: np.ndarray, test: np.ndarray) -> float:
    """Clean-referenced signal-to-noise ratio in decibels.

    The noise is test - clean; an exactly-zero noise vector (or an
    identically zero clean reference) has no finite ratio and raises.
    """
    clean = np.asarray(clean, dtype=np.float64)
    test = np.asarray(test, dtype=np.float64)
    if clean.shape != test.shape:
        raise ValueError(f"length mismatch: {clean.shape} vs {test.shape}")
    signal_power = float(np.sum(clean**2))
    if signal_power == 0.0:
        raise NumericError("clean reference is identically zero")
    noise_power = float(np.sum((test - clean) ** 2))
    if noise_power == 0.0:
        raise NumericError("test equals clean exactly; SNR is unbounded")
    return 10.0 * np.log10(signal_power / noise_power)


def mse(a: np.ndarray, b: np.ndarray) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.shape} vs {b.shape}")
    return float(np.mean((a - b) ** 2))


def mae(a: np.ndarray, b: np.ndarray) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.shape} vs {b.shape}")
    return float(np.mean(np.abs(a - b)))


def periodogram(ts: TimeSeries, window_fn: str = HANN) -> tuple:
    """Single-segment power spectral density estimate.

    Returns (freqs_hz, psd). Scaling satisfies sum(psd) * bin_width ==
    mean((w * x)**2), the windowed signal's mean power, for either window.
    """
    n = len(ts)
    if n < 8:
        raise ValueError(f"need at least 8 samples for a periodogram, got {n}")
    if window_fn == RECTANGULAR:
        w = np.ones(n)
    elif window_fn == HANN:
        w = np.hanning(n)
    else:
        raise ValueError(f"unknown window_fn {window_fn!r}")
    spectrum = np.fft.rfft(w * ts.samples)
    freqs = np.fft.rfftfreq(n, d=1.0 / ts.rate_hz)
    scale = np.full(len(freqs), 2.0)
    scale[0] = 1.0
    if n % 2 == 0:
        scale[-1] = 1.0
    psd = scale * np.abs(spectrum) ** 2 / (ts.rate_hz * n)
    return freqs, psd


def band_power(freqs: np.ndarray, psd: np.ndarray, f_lo: float, f_hi: float) -> float:
    """Integral of the PSD over bins with centers in [f_lo, f_hi).

    The interval closes at the top of the spectrum: asking for the full band
    up to the highest bin center includes that bin, so the full-band power
    equals the Parseval total.
    """
    freqs = np.asarray(freqs, dtype=np.float64)
    psd = np.asarray(psd, dtype=np.float64)
    if freqs.shape != psd.shape:
        raise ValueError("freqs and psd must have matching shapes")
    if not (0.0 <= f_lo < f_hi):
        raise ValueError(f"need 0 <= f_lo < f_hi, got [{f_lo}, {f_hi})")
    if f_hi > freqs[-1] * (1.0 + 1e-12) + 1e-12:
        raise ValueError(
            f"f_hi {f_hi} exceeds the top bin center {freqs[-1]}"
        )
    sel = (freqs >= f_lo) & (freqs < f_hi)
    if f_hi >= freqs[-1]:
        sel |= freqs == freqs[-1]
    if len(freqs) > 1:
        bin_width = freqs[1] - freqs[0]
    else:
        bin_width = 1.0
    return float(np.sum(psd[sel]) * bin_width)


@dataclass(frozen=True)
class EvalReport:
    """Aggregated comparison of denoising methods over a record set."""

    baseline: dict
    methods: dict
    n_records: int
    dataset_ref: str = ""
    config_echo: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "n_records": self.n_records,
            "dataset_ref": self.dataset_ref,
            "config_echo": self.config_echo,
            "baseline": self.baseline,
            "methods": self.methods,
        }


def _mean_std(values: list) -> tuple:
    arr = np.asarray(values, dtype=np.float64)
    return float(np.mean(arr)), float(np.std(arr))


def standard_methods(
    kinds: list,
    window_len: int = 800,
    hop: int = 200,
    n_mirror: int = DEFAULT_N_MIRROR,
) -> dict:
    """Name -> denoiser callables for the windowed mean-envelope pipeline."""
    methods = {}
    for kind in kinds:
        def denoiser(ts: TimeSeries, _kind=kind) -> TimeSeries:
            return denoise_mean_envelope(
                ts, _kind, window_len=window_len, hop=hop, n_mirror=n_mirror
            )

        methods[kind.name] = denoiser
    return methods


def evaluate_methods(
    records: list,
    methods: dict,
    dataset_ref: str = "",
    config_echo: dict | None = None,
) -> EvalReport:
    """Score every method on every record against the clean reference.

    Per record and method: SNR of the denoised output, its MSE and MAE
    against the clean signal, and the alpha-band power ratio
    denoised/clean. The contaminated input's SNR is the shared baseline.
    A record that fails under one method is recorded as a failure entry
    for that method; the run always completes.
    """
    if not records:
        raise ValueError("need at least one record")
    if not methods:
        raise ValueError("need at least one method")
    baseline_snrs = [
        snr_db(rec.clean.samples, rec.contaminated.samples) for rec in records
    ]
    b_mean, b_std = _mean_std(baseline_snrs)
    baseline = {
        "snr_db_mean": b_mean,
        "snr_db_std": b_std,
        "snr_db_per_record": [float(v) for v in baseline_snrs],
    }

    method_stats = {}
    for name, denoiser in methods.items():
        snrs, mses, maes, ratios, failures = [], [], [], [], []
        for rec in records:
            try:
                denoised = denoiser(rec.contaminated)
                snrs.append(snr_db(rec.clean.samples, denoised.samples))
                mses.append(mse(rec.clean.samples, denoised.samples))
                maes.append(mae(rec.clean.samples, denoised.samples))
                f_d, p_d = periodogram(denoised)
                f_c, p_c = periodogram(rec.clean)
                num = band_power(f_d, p_d, *ALPHA_BAND)
                den = band_power(f_c, p_c, *ALPHA_BAND)
                if den == 0.0:
                    raise NumericError("clean record has no alpha-band power")
                ratios.append(num / den)
            except EmdenoiseError as exc:
                logger.warning("method %s failed on record %s: %s", name, rec.seed, exc)
                failures.append({"record_seed": int(rec.seed), "error": str(exc)})
        entry: dict = {"n_ok": len(snrs), "n_failed": len(failures)}
        if snrs:
            entry["snr_db_mean"], entry["snr_db_std"] = _mean_std(snrs)
            entry["mse_mean"], entry["mse_std"] = _mean_std(mses)
            entry["mae_mean"], entry["mae_std"] = _mean_std(maes)
            entry["alpha_ratio_mean"], entry["alpha_ratio_std"] = _mean_std(ratios)
            entry["snr_db_per_record"] = [float(v) for v in snrs]
            entry["alpha_ratio_per_record"] = [float(v) for v in ratios]
        if failures:
            entry["failures"] = failures
        method_stats[name] = entry

    return EvalReport(
        baseline=baseline,
        methods=method_stats,
        n_records=len(records),
        dataset_ref=dataset_ref,
        config_echo=dict(config_echo or {}),
    )
