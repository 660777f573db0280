from hlsrefactor.prompts.library import (
    ICL_FOR_CLASS,
    ErrorClass,
    IclAsset,
    MissingBinding,
    NoCodeFound,
    PromptRole,
    PromptTemplate,
    classify_error,
    class_for_category,
    error_table,
    extract_code,
    icl_asset,
    load_template,
    render_optimize,
    render_refactor,
    render_streaming,
    render_system,
    render_template,
)

__all__ = [
    "ICL_FOR_CLASS", "ErrorClass", "IclAsset", "MissingBinding", "NoCodeFound", "PromptRole",
    "PromptTemplate", "classify_error", "class_for_category", "error_table", "extract_code",
    "icl_asset", "load_template", "render_optimize", "render_refactor", "render_streaming",
    "render_system", "render_template",
]
