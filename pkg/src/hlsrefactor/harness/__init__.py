from hlsrefactor.harness.config import ConfigError, RunConfig, from_dict, load_suite, load_yaml
from hlsrefactor.harness.pipeline import ReferenceTestFailure, run_benchmark_suite, run_pipeline
from hlsrefactor.harness.report import AggregateStats, RunReport, aggregate, emit_report, emit_stats

__all__ = [
    "AggregateStats", "ConfigError", "ReferenceTestFailure", "RunConfig", "RunReport", "aggregate",
    "emit_report", "emit_stats", "from_dict", "load_suite", "load_yaml", "run_benchmark_suite", "run_pipeline",
]
