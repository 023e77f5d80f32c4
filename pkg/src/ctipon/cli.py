"""Command-line front end: single runs and load sweeps, CSV + table + figure
output."""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from . import metrics, runner
from .cti import CtiBus
from .pon import InvariantViolation
from .report import comparison_table, render_figures
from .scenario import ConfigError, dump_effective, load_scenario
from .traffic import SweepSpec, format_fraction


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ctipon",
        description="Simulate 5G fronthaul over a shared XGS-PON upstream and compare "
                    "status-report DBA against CTI grant-forecast DBA.",
    )
    parser.add_argument("--scenario", metavar="PATH", default=None,
                        help="scenario file (flat key=value; defaults apply when omitted)")
    parser.add_argument("--mode", choices=("baseline", "cti", "both"), default="both")
    parser.add_argument("--seed", type=int, default=None, metavar="U64")
    parser.add_argument("--sim-time-ms", type=float, default=None, metavar="N")
    parser.add_argument("--warmup-ms", type=float, default=None, metavar="N")
    parser.add_argument("--sweep", default=None, metavar="{default|LIST}",
                        help="run the background-load sweep: 'default' or comma list, e.g. 0.5,0.8")
    parser.add_argument("--out", default="out", metavar="DIR")
    parser.add_argument("--emit-packets", action="store_true",
                        help="also write per-packet records to packets.csv")
    parser.add_argument("--no-figures", action="store_true", help="skip PNG rendering")
    parser.add_argument("--jobs", type=int, default=0, metavar="N",
                        help="parallel sweep workers (default: CPU count)")
    return parser


def _overrides(args) -> dict[str, str]:
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = str(args.seed)
    if args.sim_time_ms is not None:
        overrides["duration_ms"] = repr(args.sim_time_ms)
    if args.warmup_ms is not None:
        overrides["warmup_ms"] = repr(args.warmup_ms)
    return overrides


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        scenario = load_scenario(args.scenario, _overrides(args))
        modes = ("baseline", "cti") if args.mode == "both" else (args.mode,)
        jobs = args.jobs if args.jobs > 0 else (os.cpu_count() or 1)

        if args.sweep is not None:
            if args.sweep == "default":
                fractions = scenario.sweep_fractions
            else:
                fractions = SweepSpec(tuple(
                    load_fraction for load_fraction in _parse_sweep_list(args.sweep))).fractions
            results = runner.run_sweep(scenario, fractions, modes, jobs=jobs,
                                       keep_packets=args.emit_packets)
        else:
            results = [runner.run_single(scenario, mode, keep_packets=args.emit_packets)
                       for mode in modes]

        outdir = Path(args.out)
        outdir.mkdir(parents=True, exist_ok=True)
        _write_outputs(scenario, results, outdir, args)
        table = comparison_table(results)
        sys.stdout.write(table)
        return 0
    except (ConfigError, InvariantViolation, OSError) as exc:
        print(f"ctipon: error: {exc}", file=sys.stderr)
        return 2


def _parse_sweep_list(text: str):
    from fractions import Fraction
    try:
        return [Fraction(part.strip()) for part in text.split(",") if part.strip()]
    except ValueError as exc:
        raise ConfigError(f"--sweep: not a number list: {text!r}") from exc


def _write_outputs(scenario, results, outdir: Path, args) -> None:
    flow_rows = []
    summary_rows = []
    trace_rows = []
    packet_rows = []
    for res in results:
        frac = format_fraction(res.fraction)
        flow_rows.extend(f.row(res.run_id, res.mode, frac) for f in res.flows)
        summary_rows.append(res.summary_row)
        trace_rows.extend(res.cti_trace)
        if res.packet_rows:
            packet_rows.extend(res.packet_rows)

    metrics.write_csv(outdir / "flows.csv", metrics.FLOWS_HEADER, flow_rows)
    metrics.write_csv(outdir / "summary.csv", metrics.SUMMARY_HEADER, summary_rows)
    metrics.write_csv(outdir / "cti_trace.csv", CtiBus.TRACE_HEADER, trace_rows)
    if args.emit_packets:
        metrics.write_csv(outdir / "packets.csv", metrics.PACKETS_HEADER, packet_rows)
    (outdir / "effective_scenario.txt").write_text(dump_effective(scenario))
    (outdir / "comparison.txt").write_text(comparison_table(results))
    if not args.no_figures:
        render_figures(results, outdir)


if __name__ == "__main__":
    sys.exit(main())
