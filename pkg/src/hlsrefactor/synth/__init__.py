from hlsrefactor.synth.adapter import AdapterConfig, AdapterFailure, hls_synthesize
from hlsrefactor.synth.lint import (
    ICL_KEYS,
    LintCategory,
    LintConfig,
    LintDiagnostic,
    SynthResult,
    lint,
    lint_file,
)
from hlsrefactor.synth.pragmas import PragmaDirective, PragmaKind, verify_pragmas
from hlsrefactor.synth.streaming import StreamingVerdict, detect_streaming_interface

__all__ = [
    "AdapterConfig", "AdapterFailure", "hls_synthesize", "ICL_KEYS", "LintCategory", "LintConfig",
    "LintDiagnostic", "SynthResult", "lint", "lint_file", "PragmaDirective", "PragmaKind",
    "verify_pragmas", "StreamingVerdict", "detect_streaming_interface",
]
