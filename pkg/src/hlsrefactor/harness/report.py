"""Run reports, multi-run statistics and their renderings."""

from __future__ import annotations

import csv
import io
import json
import statistics
from dataclasses import dataclass, field
from pathlib import Path

COUNTERS = ("iterations", "compile_runs", "hls_runs")
BY_MODEL = ("prompts_by_model", "input_tokens_by_model", "output_tokens_by_model")


def empty_function_entry() -> dict:
    return {
        "iterations": 0,
        "prompts_by_model": {},
        "input_tokens_by_model": {},
        "output_tokens_by_model": {},
        "compile_runs": 0,
        "hls_runs": 0,
        "streaming_verdict": None,
        "final_source_path": None,
        "status": "pending",
    }


@dataclass
class RunReport:
    success: bool
    per_function: dict[str, dict] = field(default_factory=dict)
    totals: dict = field(default_factory=dict)
    wall_time: float = 0.0
    benchmark: str = ""
    errors: list[str] = field(default_factory=list)
    cost: float = 0.0

    def compute_totals(self) -> dict:
        t = {k: 0 for k in COUNTERS}
        for k in BY_MODEL:
            t[k] = {}
        for entry in self.per_function.values():
            for k in COUNTERS:
                t[k] += entry.get(k, 0)
            for k in BY_MODEL:
                for m, v in entry.get(k, {}).items():
                    t[k][m] = t[k].get(m, 0) + v
        self.totals = t
        return t

    def prompts(self) -> int:
        return sum(self.totals.get("prompts_by_model", {}).values())

    def to_dict(self) -> dict:
        """The machine contract; timing is kept out so replays compare byte-equal."""
        return {
            "benchmark": self.benchmark,
            "success": self.success,
            "per_function": self.per_function,
            "totals": self.totals,
            "errors": self.errors,
            "cost": self.cost,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RunReport":
        return cls(d["success"], d.get("per_function", {}), d.get("totals", {}), d.get("wall_time", 0.0),
                   d.get("benchmark", ""), d.get("errors", []), d.get("cost", 0.0))


def _table(headers: list[str], rows: list[list[str]]) -> str:
    widths = [max(len(h), *(len(r[i]) for r in rows)) if rows else len(h) for i, h in enumerate(headers)]
    line = lambda cells: "| " + " | ".join(c.rjust(w) if i else c.ljust(w) for i, (c, w) in enumerate(zip(cells, widths))) + " |"
    sep = "|" + "|".join("-" * (w + 2) for w in widths) + "|"
    return "\n".join([line(headers), sep, *(line(r) for r in rows)]) + "\n"


def _models(report: RunReport) -> list[str]:
    ms = set()
    for e in [*report.per_function.values(), report.totals]:
        ms |= set(e.get("prompts_by_model", {}))
    return sorted(ms)


def report_rows(report: RunReport) -> tuple[list[str], list[list[str]]]:
    models = _models(report)
    headers = ["Function", "Status", "Iter."]
    for m in models:
        headers += [f"# Prompts {m}", f"# In Tok. {m}", f"# Out Tok. {m}"]
    headers += ["# Compile Runs", "# HLS Runs", "Streaming"]
    rows = []
    entries = list(report.per_function.items()) + [("TOTAL", {**report.totals, "status": "ok" if report.success else "failed"})]
    for name, e in entries:
        row = [name, str(e.get("status", "")), str(e.get("iterations", 0))]
        for m in models:
            row += [str(e.get(k, {}).get(m, 0)) for k in BY_MODEL]
        sv = e.get("streaming_verdict")
        row += [str(e.get("compile_runs", 0)), str(e.get("hls_runs", 0)), "-" if sv is None else str(sv).lower()]
        rows.append(row)
    return headers, rows


def emit_report(report: RunReport, fmt: str = "json") -> bytes:
    if not report.totals:
        report.compute_totals()
    if fmt == "json":
        return (json.dumps(report.to_dict(), sort_keys=True, indent=2) + "\n").encode()
    if fmt in ("table", "text-table"):
        return _table(*report_rows(report)).encode()
    if fmt == "csv":
        buf = io.StringIO()
        headers, rows = report_rows(report)
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(headers)
        w.writerows(rows)
        return buf.getvalue().encode()
    raise ValueError(f"unknown format {fmt!r}")


# ---- aggregation -------------------------------------------------------------

@dataclass
class AggregateStats:
    benchmark: str
    repeats: int
    successes: int
    success_rate: float
    # (avg, min, max) over successful runs; None when no run succeeded
    prompts: tuple | None = None
    prompts_by_model: dict[str, tuple] = field(default_factory=dict)
    input_tokens_by_model: dict[str, tuple] = field(default_factory=dict)
    output_tokens_by_model: dict[str, tuple] = field(default_factory=dict)
    compile_runs: tuple | None = None
    hls_runs: tuple | None = None

    def to_dict(self) -> dict:
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in self.__dict__.items()}


def _ama(values: list[float]) -> tuple | None:
    if not values:
        return None
    return (statistics.fmean(values), min(values), max(values))


def aggregate(reports: list[RunReport], benchmark: str = "") -> AggregateStats:
    if not reports:
        raise ValueError("no reports to aggregate")
    for r in reports:
        if not r.totals:
            r.compute_totals()
    ok = [r for r in reports if r.success]
    stats = AggregateStats(benchmark or reports[0].benchmark, len(reports), len(ok), 100.0 * len(ok) / len(reports))
    stats.prompts = _ama([r.prompts() for r in ok])
    models = sorted({m for r in ok for m in r.totals.get("prompts_by_model", {})})
    for key in BY_MODEL:
        getattr(stats, key).update({m: _ama([r.totals.get(key, {}).get(m, 0) for r in ok]) for m in models})
    stats.compile_runs = _ama([r.totals.get("compile_runs", 0) for r in ok])
    stats.hls_runs = _ama([r.totals.get("hls_runs", 0) for r in ok])
    return stats


def _fmt(t: tuple | None) -> list[str]:
    if t is None:
        return ["-", "-", "-"]
    return [f"{t[0]:.2f}", f"{t[1]:g}", f"{t[2]:g}"]


def stats_rows(stats: list[AggregateStats]) -> tuple[list[str], list[list[str]]]:
    models = sorted({m for s in stats for m in s.prompts_by_model})
    headers = ["Benchmark", "Succ. %", "Prompts Avg", "Prompts Min", "Prompts Max"]
    for m in models:
        headers += [f"{m} {c}" for c in ("Prompts Avg", "Prompts Min", "Prompts Max", "In Tok. Avg",
                                         "In Tok. Min", "In Tok. Max", "Out Tok. Avg", "Out Tok. Min",
                                         "Out Tok. Max")]
    headers += ["Compile Avg", "Compile Min", "Compile Max", "HLS Avg", "HLS Min", "HLS Max"]
    rows = []
    for s in stats:
        row = [s.benchmark, f"{s.success_rate:g}", *_fmt(s.prompts)]
        for m in models:
            for key in BY_MODEL:
                row += _fmt(getattr(s, key).get(m))
        row += [*_fmt(s.compile_runs), *_fmt(s.hls_runs)]
        rows.append(row)
    return headers, rows


def emit_stats(stats: list[AggregateStats], fmt: str = "table") -> bytes:
    if fmt == "json":
        return (json.dumps([s.to_dict() for s in stats], sort_keys=True, indent=2) + "\n").encode()
    headers, rows = stats_rows(stats)
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(headers)
        w.writerows(rows)
        return buf.getvalue().encode()
    return _table(headers, rows).encode()


# ---- figures -----------------------------------------------------------------

def render_report_figure(report: RunReport, path: Path) -> Path:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    names = list(report.per_function)
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(max(6, 1.2 * len(names) + 3), 3.5))
    x = range(len(names))
    prompts = [sum(report.per_function[n].get("prompts_by_model", {}).values()) for n in names]
    ax1.bar(list(x), prompts, color="tab:blue")
    ax1.set_title("Prompts per function")
    comp = [report.per_function[n].get("compile_runs", 0) for n in names]
    hls = [report.per_function[n].get("hls_runs", 0) for n in names]
    ax2.bar([i - 0.2 for i in x], comp, 0.4, label="compile runs")
    ax2.bar([i + 0.2 for i in x], hls, 0.4, label="HLS runs")
    ax2.set_title("Tool runs per function")
    ax2.legend()
    for ax in (ax1, ax2):
        ax.set_xticks(list(x))
        ax.set_xticklabels(names, rotation=30, ha="right")
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=100)
    plt.close(fig)
    return path


def render_stats_figure(stats: list[AggregateStats], path: Path) -> Path:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    names = [s.benchmark for s in stats]
    x = list(range(len(names)))
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(max(6, 1.2 * len(names) + 3), 3.5))
    ax1.bar(x, [s.success_rate for s in stats], color="tab:green")
    ax1.set_ylim(0, 100)
    ax1.set_title("Success rate (%)")
    avg = [s.prompts[0] if s.prompts else 0 for s in stats]
    lo = [s.prompts[0] - s.prompts[1] if s.prompts else 0 for s in stats]
    hi = [s.prompts[2] - s.prompts[0] if s.prompts else 0 for s in stats]
    ax2.bar(x, avg, yerr=[lo, hi], capsize=4, color="tab:orange")
    ax2.set_title("Prompts (avg, min-max)")
    for ax in (ax1, ax2):
        ax.set_xticks(x)
        ax.set_xticklabels(names, rotation=30, ha="right")
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=100)
    plt.close(fig)
    return path
