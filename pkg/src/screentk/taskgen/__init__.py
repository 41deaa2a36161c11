"""LLM-driven generation of screen QA, navigation and summarization data."""

from .backend import (
    BackendError,
    BackendTimeout,
    CompletionRequest,
    CompletionResult,
    FileStubBackend,
    HttpBackend,
    TransientBackendError,
    complete,
)
from .parsing import (
    NavigationSample,
    QaPair,
    ResponseParseError,
    parse_nav_response,
    parse_qa_response,
    parse_rephrase_response,
    parse_summary_response,
)
from .pipeline import GenerationItem, GenerationStats, generate_dataset, validate_nav_target, validate_qa
from .templates import TEMPLATES, PromptTemplate, TemplateError, render_prompt

__all__ = [
    "BackendError", "BackendTimeout", "CompletionRequest", "CompletionResult", "FileStubBackend",
    "GenerationItem", "GenerationStats", "HttpBackend", "NavigationSample", "PromptTemplate", "QaPair",
    "ResponseParseError", "TEMPLATES", "TemplateError", "TransientBackendError", "complete",
    "generate_dataset", "parse_nav_response", "parse_qa_response", "parse_rephrase_response",
    "parse_summary_response", "render_prompt", "validate_nav_target", "validate_qa",
]
