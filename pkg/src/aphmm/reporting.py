"""Run reports: counters, timings, and figures rendered next to the tables."""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .engine import Counters
from .seqio import format_float, write_table

REPORT_SCHEMA = 1


@dataclass
class BenchReport:
    """Per-step wall times, operation counters, and a configuration echo."""

    command: str
    config: dict = field(default_factory=dict)
    wall_times: dict = field(default_factory=dict)   # step name -> seconds
    counters: Counters = field(default_factory=Counters)
    extra: dict = field(default_factory=dict)

    def rows(self, timing: bool = True):
        rows = [("command", "name", self.command)]
        for k, v in sorted(self.config.items()):
            rows.append(("config", k, str(v)))
        if timing:
            for k, v in sorted(self.wall_times.items()):
                rows.append(("wall_time_s", k, format_float(v)))
        c = self.counters
        for k in (
            "multiplications",
            "product_requests",
            "lut_hits",
            "lut_misses",
            "lut_build_products",
            "filter_selections",
            "filter_selected_total",
            "bytes_moved",
            "peak_backward_rows",
            "forward_timestamps",
            "backward_timestamps",
        ):
            rows.append(("counter", k, str(getattr(c, k))))
        rows.append(("counter", "lut_hit_ratio", format_float(c.lut_hit_ratio())))
        for k, v in sorted(self.extra.items()):
            rows.append(("extra", k, str(v)))
        return rows


class StepTimer:
    def __init__(self, report: BenchReport):
        self.report = report

    def time(self, name: str):
        return _TimerCtx(self.report, name)


class _TimerCtx:
    def __init__(self, report: BenchReport, name: str):
        self.report = report
        self.name = name

    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.report.wall_times[self.name] = self.report.wall_times.get(self.name, 0.0) + time.perf_counter() - self.t0
        return False


def write_report(directory, report: BenchReport, timing: bool = True, plot: bool = True) -> Path:
    """Write report.tsv (and report.png when plotting) under `directory`."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    table = directory / "report.tsv"
    write_table(table, ["section", "key", "value"], report.rows(timing=timing), schema=REPORT_SCHEMA)
    if plot:
        render_report_figure(directory / "report.png", report, timing=timing)
    return table


def render_report_figure(path, report: BenchReport, timing: bool = True) -> None:
    panels = 2 if (timing and report.wall_times) else 1
    fig, axes = plt.subplots(1, panels, figsize=(4.5 * panels, 3.2))
    if panels == 1:
        axes = [axes]
    c = report.counters
    names = ["lut_hits", "lut_misses", "lut_build_products"]
    values = [c.lut_hits, c.lut_misses, c.lut_build_products]
    axes[0].bar(names, values, color=["#2a7", "#b55", "#778"])
    axes[0].set_ylabel("product requests")
    axes[0].set_title(f"table hit ratio {c.lut_hit_ratio():.3f}")
    axes[0].tick_params(axis="x", rotation=20)
    if panels == 2:
        steps = sorted(report.wall_times)
        axes[1].bar(steps, [report.wall_times[s] for s in steps], color="#469")
        axes[1].set_ylabel("wall time [s]")
        axes[1].tick_params(axis="x", rotation=20)
    fig.suptitle(report.command)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_sweep_figure(path, reports, vary: str) -> None:
    """Line plot of the swept parameter against estimated speedups and cycles."""
    xs = []
    for r in reports:
        if vary == "chunk":
            xs.append(r.workload.sequence_length)
        else:
            xs.append(getattr(r.config, vary))
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.4))
    ax1.plot(xs, [r.total_cycles for r in reports], "o-", color="#469")
    ax1.set_xlabel(vary)
    ax1.set_ylabel("estimated cycles")
    ax1.grid(True, alpha=0.3)
    key = "speedup_end_to_end" if vary == "cores" else "speedup_vs_1pe"
    ax2.plot(xs, [getattr(r, key) for r in reports], "s-", color="#2a7")
    ax2.set_xlabel(vary)
    ax2.set_ylabel(key.replace("_", " "))
    ax2.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_bench_figure(path, rows) -> None:
    """Bar chart of bench metric rows: (suite, case, metric, value)."""
    labels, values = [], []
    for suite, case, metric, value in rows:
        try:
            v = float(value)
        except (TypeError, ValueError):
            continue
        labels.append(f"{suite}:{case}:{metric}")
        values.append(v)
    if not labels:
        return
    fig, ax = plt.subplots(figsize=(max(6, 0.45 * len(labels)), 3.6))
    ax.bar(range(len(values)), values, color="#469")
    ax.set_xticks(range(len(labels)))
    ax.set_xticklabels(labels, rotation=60, ha="right", fontsize=7)
    ax.set_yscale("symlog")
    ax.set_ylabel("value")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
