from hlsrefactor.llm.gateway import (
    BackendConfig,
    BackendError,
    Gateway,
    LiveBackend,
    ModelPolicy,
    ModelUsage,
    PromptExchange,
    ReplayBackend,
    ReplayMiss,
    ScriptedBackend,
    UsageLedger,
    append_transcript,
    complete,
    make_backend,
    read_transcript,
    record_failure,
    record_success,
    request_digest,
    script_responder,
    select_model,
)

__all__ = [
    "BackendConfig", "BackendError", "Gateway", "LiveBackend", "ModelPolicy", "ModelUsage",
    "PromptExchange", "ReplayBackend", "ReplayMiss", "ScriptedBackend", "UsageLedger",
    "append_transcript", "complete", "make_backend", "read_transcript", "record_failure",
    "record_success", "request_digest", "script_responder", "select_model",
]
