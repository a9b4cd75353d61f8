"""Deterministic SVG rendering of signal overlays.

The plots exist so a pipeline run leaves a human-checkable picture of the
original trace, the envelopes, and the denoised output. Emitting SVG by hand
keeps the bytes a pure function of the input series: no graphics library,
no font metrics, no timestamps. Every series becomes one ``<polyline>``;
coordinates are printed with fixed precision.
"""

from __future__ import annotations

import logging
from typing import Sequence

import numpy as np

logger = logging.getLogger(__name__)

# Okabe-Ito palette: distinguishable under common color-vision deficiencies.
PALETTE = ("#000000", "#e69f00", "#56b4e9", "#009e73", "#cc79a7", "#d55e00")

_WIDTH = 960
_HEIGHT = 480
_MARGIN_LEFT = 64
_MARGIN_RIGHT = 16
_MARGIN_TOP = 20
_MARGIN_BOTTOM = 44


def _tick_values(lo: float, hi: float, n: int = 5) -> list[float]:
    """Round tick positions covering [lo, hi] at a 1/2/5 step."""
    if hi <= lo:
        return [lo]
    raw = (hi - lo) / max(n, 1)
    mag = 10.0 ** np.floor(np.log10(raw))
    for mult in (1.0, 2.0, 5.0, 10.0):
        step = mult * mag
        if raw <= step:
            break
    first = np.ceil(lo / step) * step
    ticks = []
    value = first
    while value <= hi + 1e-9 * step:
        ticks.append(float(value))
        value += step
    return ticks


def _escape(text: str) -> str:
    return text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def plot_series(
    series: Sequence[tuple[str, np.ndarray]],
    rate_hz: float,
    title: str = "",
) -> str:
    """Render labeled sample arrays as an SVG overlay.

    All series must share one length; x is time in seconds, y is amplitude
    in microvolts (the synthetic units). Returns the SVG document text.
    """
    if not series:
        raise ValueError("need at least one series to plot")
    arrays = [np.asarray(samples, dtype=np.float64) for _, samples in series]
    n = arrays[0].size
    if n < 2:
        raise ValueError(f"series must have at least 2 samples, got {n}")
    for (label, _), arr in zip(series, arrays):
        if arr.ndim != 1 or arr.size != n:
            raise ValueError(
                f"series {label!r} has shape {arr.shape}, expected ({n},) like the first"
            )
    if rate_hz <= 0:
        raise ValueError(f"rate_hz must be positive, got {rate_hz}")

    t_max = (n - 1) / rate_hz
    y_lo = min(float(np.min(a)) for a in arrays)
    y_hi = max(float(np.max(a)) for a in arrays)
    if y_hi == y_lo:
        y_lo -= 1.0
        y_hi += 1.0
    pad = 0.05 * (y_hi - y_lo)
    y_lo -= pad
    y_hi += pad

    plot_w = _WIDTH - _MARGIN_LEFT - _MARGIN_RIGHT
    plot_h = _HEIGHT - _MARGIN_TOP - _MARGIN_BOTTOM

    def sx(t: float) -> float:
        return _MARGIN_LEFT + plot_w * (t / t_max)

    def sy(v: float) -> float:
        return _MARGIN_TOP + plot_h * (1.0 - (v - y_lo) / (y_hi - y_lo))

    out = []
    out.append(
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_WIDTH}" height="{_HEIGHT}" '
        f'viewBox="0 0 {_WIDTH} {_HEIGHT}">'
    )
    out.append(f'<rect width="{_WIDTH}" height="{_HEIGHT}" fill="#ffffff"/>')
    if title:
        out.append(
            f'<text x="{_WIDTH / 2:.1f}" y="14" font-family="sans-serif" font-size="13" '
            f'text-anchor="middle">{_escape(title)}</text>'
        )

    # axes frame
    out.append(
        f'<rect x="{_MARGIN_LEFT}" y="{_MARGIN_TOP}" width="{plot_w}" height="{plot_h}" '
        f'fill="none" stroke="#444444" stroke-width="1"/>'
    )
    for t in _tick_values(0.0, t_max, 6):
        x = sx(t)
        out.append(
            f'<line x1="{x:.2f}" y1="{_MARGIN_TOP + plot_h}" x2="{x:.2f}" '
            f'y2="{_MARGIN_TOP + plot_h + 4}" stroke="#444444" stroke-width="1"/>'
        )
        out.append(
            f'<text x="{x:.2f}" y="{_MARGIN_TOP + plot_h + 16}" font-family="sans-serif" '
            f'font-size="11" text-anchor="middle">{t:g}</text>'
        )
    for v in _tick_values(y_lo, y_hi, 5):
        y = sy(v)
        out.append(
            f'<line x1="{_MARGIN_LEFT - 4}" y1="{y:.2f}" x2="{_MARGIN_LEFT}" y2="{y:.2f}" '
            f'stroke="#444444" stroke-width="1"/>'
        )
        out.append(
            f'<text x="{_MARGIN_LEFT - 7}" y="{y + 3.5:.2f}" font-family="sans-serif" '
            f'font-size="11" text-anchor="end">{v:g}</text>'
        )
    out.append(
        f'<text x="{_MARGIN_LEFT + plot_w / 2:.1f}" y="{_HEIGHT - 6}" '
        f'font-family="sans-serif" font-size="12" text-anchor="middle">time (s)</text>'
    )
    out.append(
        f'<text x="14" y="{_MARGIN_TOP + plot_h / 2:.1f}" font-family="sans-serif" '
        f'font-size="12" text-anchor="middle" '
        f'transform="rotate(-90 14 {_MARGIN_TOP + plot_h / 2:.1f})">amplitude (µV)</text>'
    )

    times = np.arange(n) / rate_hz
    for i, ((label, _), arr) in enumerate(zip(series, arrays)):
        color = PALETTE[i % len(PALETTE)]
        points = " ".join(f"{sx(t):.2f},{sy(v):.2f}" for t, v in zip(times, arr))
        out.append(
            f'<polyline fill="none" stroke="{color}" stroke-width="1.2" points="{points}"/>'
        )

    # legend, one row per series, top-left inside the frame
    for i, (label, _) in enumerate(series):
        color = PALETTE[i % len(PALETTE)]
        y = _MARGIN_TOP + 14 + 16 * i
        x = _MARGIN_LEFT + 10
        out.append(
            f'<line x1="{x}" y1="{y - 4}" x2="{x + 22}" y2="{y - 4}" '
            f'stroke="{color}" stroke-width="2"/>'
        )
        out.append(
            f'<text x="{x + 28}" y="{y}" font-family="sans-serif" font-size="12">'
            f"{_escape(label)}</text>"
        )

    out.append("</svg>")
    return "\n".join(out) + "\n"
