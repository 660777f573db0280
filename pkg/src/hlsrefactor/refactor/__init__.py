from hlsrefactor.refactor.context import Budget, BudgetExhausted, EngineContext
from hlsrefactor.refactor.engine import (
    GuardViolation,
    IterationOutcome,
    PinnedSignatureViolation,
    RefactorResult,
    guard_child_signatures,
    run_inner,
    run_outer,
    run_streaming_stage,
)

__all__ = [
    "Budget", "BudgetExhausted", "EngineContext", "GuardViolation", "IterationOutcome",
    "PinnedSignatureViolation", "RefactorResult", "guard_child_signatures", "run_inner",
    "run_outer", "run_streaming_stage",
]
