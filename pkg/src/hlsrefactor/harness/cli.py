"""Command-line entry point: run, bench, lint, report."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from hlsrefactor.cfront import ParseError, PreprocessFailure
from hlsrefactor.harness.config import ConfigError, RunConfig, apply_models, from_dict, load_suite, load_yaml
from hlsrefactor.harness.pipeline import ReferenceTestFailure, run_benchmark_suite, run_pipeline
from hlsrefactor.harness.report import (
    RunReport,
    emit_report,
    emit_stats,
    render_report_figure,
    render_stats_figure,
)
from hlsrefactor.pragma.engine import OptimizationTarget
from hlsrefactor.synth.adapter import AdapterConfig
from hlsrefactor.synth.lint import lint_file

EXIT_OK, EXIT_FAILED, EXIT_CONFIG = 0, 2, 3


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hlsrefactor", description="Refactor C into HLS-synthesizable C with an LLM.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="cmd", required=True)

    r = sub.add_parser("run", help="run the full flow on one design")
    r.add_argument("--config", type=Path, help="YAML run config; flags override it")
    r.add_argument("--src", type=Path)
    r.add_argument("--top")
    r.add_argument("--test", type=Path)
    r.add_argument("--target", choices=["area", "latency"])
    r.add_argument("--streaming", action="store_true", default=None)
    r.add_argument("--adapter", choices=["lint", "command"])
    r.add_argument("--backend", choices=["live", "replay", "scripted"])
    r.add_argument("--transcript", type=Path)
    r.add_argument("--script", type=Path, help="responses file for the scripted backend")
    r.add_argument("--models", type=Path, help="YAML with ladder, escalation_threshold, rates, backend")
    r.add_argument("--out", type=Path)
    r.add_argument("--max-outer", type=int)
    r.add_argument("--max-inner", type=int)
    r.add_argument("--optimize", choices=["per_function", "integrated", "off"])
    r.add_argument("--strict-pragma-only", action="store_true", default=None)
    r.add_argument("--seed", type=int)

    b = sub.add_parser("bench", help="repeat runs over a suite and aggregate")
    b.add_argument("--suite", type=Path, required=True)
    b.add_argument("--repeats", type=int, default=1)
    b.add_argument("--out", type=Path)
    b.add_argument("--format", choices=["table", "json", "csv"], default="table")

    li = sub.add_parser("lint", help="standalone synthesizability lint")
    li.add_argument("--src", type=Path, required=True)
    li.add_argument("--top", required=True)

    rep = sub.add_parser("report", help="render a finished run")
    rep.add_argument("--in", dest="indir", type=Path, required=True)
    rep.add_argument("--format", choices=["json", "table"], default="table")
    return p


def build_run_config(a) -> RunConfig:
    base = {}
    root = Path(".")
    if a.config:
        base = load_yaml(a.config)
        root = a.config.parent
    for flag, key in (("src", "src"), ("top", "top"), ("test", "test")):
        v = getattr(a, flag)
        if v is not None:
            base[key] = str(v.resolve()) if isinstance(v, Path) else v
    if not all(k in base for k in ("src", "top", "test")):
        raise ConfigError("run needs --src, --top and --test (or a --config providing them)")
    cfg = from_dict(base, root)
    if a.target:
        cfg.target = OptimizationTarget(a.target)
    if a.streaming is not None:
        cfg.streaming = a.streaming
    if a.adapter:
        cfg.adapter = AdapterConfig.from_dict({**(base.get("adapter") if isinstance(base.get("adapter"), dict) else {}),
                                               "adapter": a.adapter})
    if a.models:
        apply_models(cfg, load_yaml(a.models))
    if a.backend:
        cfg.backend.kind = a.backend
    if a.transcript:
        cfg.backend.transcript = a.transcript
    if a.script:
        cfg.script = a.script
    if a.out:
        cfg.out_dir = a.out
    if a.max_outer:
        cfg.budgets.max_outer_iterations = a.max_outer
    if a.max_inner is not None:
        cfg.budgets.max_inner_retries = a.max_inner
    if a.optimize:
        cfg.optimize = a.optimize
    if a.strict_pragma_only:
        cfg.strict_pragma_only = True
    if a.seed is not None:
        cfg.seed = a.seed
    cfg.validate()
    return cfg


def _find_reports(d: Path) -> list[Path]:
    if (d / "report.json").is_file():
        return [d / "report.json"]
    return sorted(d.glob("run_*/report.json"))


def cmd_run(a) -> int:
    cfg = build_run_config(a)
    try:
        report = run_pipeline(cfg)
    except ReferenceTestFailure as e:
        print(f"error: {e}\n{e.log}", file=sys.stderr)
        return EXIT_CONFIG
    sys.stdout.write(emit_report(report, "table").decode())
    for err in report.errors:
        print(f"note: {err.splitlines()[0]}", file=sys.stderr)
    return EXIT_OK if report.success else EXIT_FAILED


def cmd_bench(a) -> int:
    cfgs = load_suite(a.suite)
    if a.out:
        for c in cfgs:
            c.out_dir = a.out
    for c in cfgs:
        c.validate()
    stats = run_benchmark_suite(cfgs, a.repeats)
    out = emit_stats(stats, a.format)
    sys.stdout.write(out.decode())
    dest = Path(a.out or cfgs[0].out_dir)
    dest.mkdir(parents=True, exist_ok=True)
    (dest / "stats.json").write_bytes(emit_stats(stats, "json"))
    (dest / "stats.csv").write_bytes(emit_stats(stats, "csv"))
    render_stats_figure(stats, dest / "stats.png")
    return EXIT_OK if all(s.successes == s.repeats for s in stats) else EXIT_FAILED


def cmd_lint(a) -> int:
    if not a.src.is_file():
        raise ConfigError(f"no such file: {a.src}")
    res = lint_file(a.src, a.top)
    for d in res.diagnostics:
        print(d.render())
    return EXIT_OK if res.ok else EXIT_FAILED


def cmd_report(a) -> int:
    paths = _find_reports(a.indir)
    if not paths:
        raise ConfigError(f"no report.json under {a.indir}")
    for p in paths:
        report = RunReport.from_dict(json.loads(p.read_text()))
        sys.stdout.write(emit_report(report, a.format).decode())
        (p.parent / "report.csv").write_bytes(emit_report(report, "csv"))
        render_report_figure(report, p.parent / "report.png")
    return EXIT_OK


def main(argv=None) -> int:
    a = _parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if a.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    handlers = {"run": cmd_run, "bench": cmd_bench, "lint": cmd_lint, "report": cmd_report}
    try:
        return handlers[a.cmd](a)
    except (ConfigError, ParseError, PreprocessFailure, ValueError, FileNotFoundError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
