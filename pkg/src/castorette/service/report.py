"""Forecast report figures.

Renders static PNGs next to the delimited export so a report directory
is self-contained: the CSV for machines, the figures for people.
"""

from __future__ import annotations

from datetime import datetime, timezone
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.dates as mdates
import matplotlib.pyplot as plt


def _times(rows):
    return [datetime.fromtimestamp(r["ts"], tz=timezone.utc) for r in rows]


def render_forecast_figures(rows: list[dict], out_dir, stem: str = "forecast",
                            title: str = "") -> list[Path]:
    """Write the forecast overlay and residual figures; returns paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    times = _times(rows)
    observed = [r.get("observed") for r in rows]
    forecast = [r.get("forecast") for r in rows]
    written: list[Path] = []

    fig, ax = plt.subplots(figsize=(11, 4.5))
    band_t = [t for t, r in zip(times, rows) if r.get("lower") is not None]
    if band_t:
        lower = [r["lower"] for r in rows if r.get("lower") is not None]
        upper = [r["upper"] for r in rows if r.get("lower") is not None]
        ax.fill_between(band_t, lower, upper, alpha=0.25, linewidth=0,
                        label="±1.96σ", color="tab:orange")
    ax.plot(times, observed, label="observed", color="tab:blue", linewidth=1.2)
    ax.plot(times, forecast, label="forecast", color="tab:orange", linewidth=1.2)
    ax.set_title(title or "Forecast vs observed")
    ax.set_ylabel("value")
    ax.legend(loc="upper left")
    ax.xaxis.set_major_formatter(mdates.DateFormatter("%m-%d %H:%M", tz=timezone.utc))
    fig.autofmt_xdate()
    fig.tight_layout()
    path = out / f"{stem}_overlay.png"
    fig.savefig(path, dpi=120)
    plt.close(fig)
    written.append(path)

    paired = [
        (t, r["observed"] - r["forecast"])
        for t, r in zip(times, rows)
        if r.get("observed") is not None and r.get("forecast") is not None
    ]
    if paired:
        fig, ax = plt.subplots(figsize=(11, 3))
        ax.axhline(0.0, color="black", linewidth=0.8)
        ax.bar([t for t, _ in paired], [e for _, e in paired],
               width=0.03, color="tab:red", alpha=0.7)
        ax.set_title("Residuals (observed − forecast)")
        ax.xaxis.set_major_formatter(
            mdates.DateFormatter("%m-%d %H:%M", tz=timezone.utc))
        fig.autofmt_xdate()
        fig.tight_layout()
        path = out / f"{stem}_residuals.png"
        fig.savefig(path, dpi=120)
        plt.close(fig)
        written.append(path)

    return written
