"""Human-readable outputs: the baseline-vs-cooperative comparison table and
the figures rendered next to the CSV files."""

from __future__ import annotations

from collections import defaultdict
from fractions import Fraction
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .runner import RunResult, fronthaul_offered_bps
from .traffic import format_fraction


def _fronthaul_stats(result: RunResult) -> tuple[float, float | None, float | None]:
    """(throughput Mb/s, mean latency us, median grant-wait us) of the
    fronthaul stream, byte-weighted across UE flows."""
    fh = [f for f in result.flows if f.flow_id.startswith("fh-")]
    total = sum(f.delivered_bytes for f in fh)
    mbps = sum(f.throughput_bps for f in fh) / 1e6
    if total == 0:
        return mbps, None, None
    lat = sum(f.lat_mean_ns * f.delivered_bytes for f in fh if f.lat_mean_ns is not None) / total
    dbru_vals = [f.dbru_opp_p50_ns for f in fh if f.dbru_opp_p50_ns is not None]
    dbru = max(dbru_vals) if dbru_vals else None
    return mbps, lat / 1e3, (dbru / 1e3 if dbru is not None else None)


def _by_point(results: list[RunResult]) -> dict[Fraction, dict[str, RunResult]]:
    table: dict[Fraction, dict[str, RunResult]] = defaultdict(dict)
    for res in results:
        table[res.fraction][res.mode] = res
    return table


def comparison_table(results: list[RunResult]) -> str:
    """Per sweep point: fronthaul throughput and mean latency, both modes."""
    points = _by_point(results)
    offered = float(fronthaul_offered_bps(results[0].scenario)) / 1e6
    fmt = "{:>6}  {:>12} {:>12}  {:>12} {:>12}  {:>11} {:>11}"
    lines = [
        f"fronthaul offered load: {offered:.2f} Mb/s",
        fmt.format("bg", "base Mb/s", "cti Mb/s", "base lat us", "cti lat us",
                   "base w50 us", "cti w50 us"),
    ]

    def cell(value, pattern="{:.2f}"):
        return "-" if value is None else pattern.format(value)

    for fraction in sorted(points):
        row = points[fraction]
        base = _fronthaul_stats(row["baseline"]) if "baseline" in row else (None, None, None)
        coop = _fronthaul_stats(row["cti"]) if "cti" in row else (None, None, None)
        lines.append(fmt.format(
            format_fraction(fraction),
            cell(base[0]), cell(coop[0]),
            cell(base[1]), cell(coop[1]),
            cell(base[2]), cell(coop[2]),
        ))
    return "\n".join(lines) + "\n"


_SERIES = (("baseline", "tab:red", "o"), ("cti", "tab:green", "s"))


def render_figures(results: list[RunResult], outdir: str | Path) -> list[Path]:
    """Render the sweep charts as PNG files alongside the CSV output."""
    outdir = Path(outdir)
    points = _by_point(results)
    fractions = sorted(points)
    x = [float(f) * 100 for f in fractions]
    offered = float(fronthaul_offered_bps(results[0].scenario)) / 1e6

    def series(mode, pick):
        ys = []
        for f in fractions:
            res = points[f].get(mode)
            ys.append(pick(_fronthaul_stats(res)) if res is not None else None)
        return ys

    written = []

    def plot(filename, ylabel, title, pick, extra=None, logy=False):
        fig, ax = plt.subplots(figsize=(6.0, 4.0))
        for mode, color, marker in _SERIES:
            ys = series(mode, pick)
            if all(v is None for v in ys):
                continue
            label = "status-report DBA" if mode == "baseline" else "CTI DBA"
            ax.plot(x, ys, color=color, marker=marker, label=label)
        if extra:
            extra(ax)
        if logy:
            ax.set_yscale("log")
        ax.set_xlabel("background load (% of PON capacity)")
        ax.set_ylabel(ylabel)
        ax.set_title(title)
        ax.grid(True, alpha=0.3)
        ax.legend()
        fig.tight_layout()
        path = outdir / filename
        fig.savefig(path, dpi=120)
        plt.close(fig)
        written.append(path)

    plot("fronthaul_throughput_vs_load.png", "fronthaul throughput (Mb/s)",
         "Fronthaul throughput under background load", lambda s: s[0],
         extra=lambda ax: ax.axhline(offered, color="gray", ls="--", lw=1, label="offered"))
    plot("fronthaul_latency_vs_load.png", "mean ONU-to-OLT latency (us)",
         "Fronthaul transport latency", lambda s: s[1], logy=True)
    plot("fronthaul_grant_wait_vs_load.png", "median grant wait (us)",
         "Queue-to-grant wait (median)", lambda s: s[2], logy=True)
    return written
