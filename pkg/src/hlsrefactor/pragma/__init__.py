from hlsrefactor.pragma.engine import CompileError, OptimizationTarget, OptResult, diff_semantics, optimize

__all__ = ["CompileError", "OptimizationTarget", "OptResult", "diff_semantics", "optimize"]
