"""Phishing email detection through LLM analysis.

Pipeline: parse and decode .eml bytes, reduce the email under a token
budget, render an analysis prompt, obtain a structured verdict from a
provider (or the deterministic mock), and evaluate detection quality over
labeled corpora.
"""

from .errors import (
    AuthError,
    BudgetUnreachable,
    EmptyDataset,
    InvalidScore,
    MalformedMessage,
    MissingField,
    NoBody,
    PhishscanError,
    ProviderRefusal,
    RationalesTooLong,
    SchemaViolation,
    TransportError,
    UnknownTokenizer,
    Unparseable,
)
from .gateway import (
    MockProvider,
    ProviderProfile,
    RawModelResponse,
    ResponseSchema,
    build_function_schema,
    extract_json_fallback,
    parse_structured,
    submit,
)
from .ingest import (
    AttachmentRef,
    BodyPart,
    HeaderField,
    ParsedEmail,
    RawEmail,
    anonymize_recipients,
    decode_header_value,
    flatten_body_parts,
    parse_eml,
    sanitize_headers,
)
from .pipeline import DetectionResult, run_detection
from .prompts import PromptVariant, RenderedPrompt, render_prompt, select_variant, serialize_email
from .simplify import (
    SimplifiedEmail,
    prune_html,
    select_preferred_part,
    simplify,
    trim_html_center,
    trim_plain_middle,
)
from .tokens import TokenBudget, count_tokens, register_tokenizer, within_budget
from .verdict import DetectionVerdict, validate_verdict, verdict_from_json, verdict_to_json

__version__ = "0.1.0"

__all__ = [
    "AttachmentRef", "AuthError", "BodyPart", "BudgetUnreachable",
    "DetectionResult", "DetectionVerdict", "EmptyDataset", "HeaderField",
    "InvalidScore", "MalformedMessage", "MissingField", "MockProvider",
    "NoBody", "ParsedEmail", "PhishscanError", "PromptVariant",
    "ProviderProfile", "ProviderRefusal", "RationalesTooLong", "RawEmail",
    "RawModelResponse", "RenderedPrompt", "ResponseSchema", "SchemaViolation",
    "SimplifiedEmail", "TokenBudget", "TransportError", "UnknownTokenizer",
    "Unparseable", "anonymize_recipients", "build_function_schema",
    "count_tokens", "decode_header_value", "extract_json_fallback",
    "flatten_body_parts", "parse_eml", "parse_structured", "prune_html",
    "register_tokenizer", "render_prompt", "run_detection",
    "sanitize_headers", "select_preferred_part", "select_variant",
    "serialize_email", "simplify", "submit", "trim_html_center",
    "trim_plain_middle", "validate_verdict", "verdict_from_json",
    "verdict_to_json", "within_budget",
]
