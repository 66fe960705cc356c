"""End-to-end analysis of a single email: bytes in, validated verdict out."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

from . import gateway
from .gateway import ProviderProfile, RawModelResponse, build_function_schema
from .ingest import RawEmail, anonymize_recipients, parse_eml, sanitize_headers
from .prompts import PromptVariant, RenderedPrompt, render_prompt
from .simplify import DEFAULT_ELISION_MARKER, SimplifiedEmail, simplify
from .tokens import TokenBudget
from .verdict import DetectionVerdict, validate_verdict

DEFAULT_DUMMY_ADDRESS = "user@example.com"


@dataclass(frozen=True)
class DetectionResult:
    verdict: DetectionVerdict
    response: RawModelResponse
    simplified: SimplifiedEmail
    prompt: RenderedPrompt


def run_detection(raw: RawEmail, profile: ProviderProfile, variant: PromptVariant,
                  budget: TokenBudget = TokenBudget(), *,
                  tokenizer: str | None = None,
                  dummy_to: str = DEFAULT_DUMMY_ADDRESS,
                  header_denylist: tuple[str, ...] = (),
                  keep_attributes: tuple[str, ...] | None = None,
                  elision_marker: str = DEFAULT_ELISION_MARKER,
                  max_retries: int = 3,
                  submit_fn: Callable[..., RawModelResponse] | None = None) -> DetectionResult:
    """Run parse, sanitize, anonymize, simplify, prompt, submit and parse."""
    tokenizer = tokenizer or profile.tokenizer
    parsed = parse_eml(raw)
    parsed = sanitize_headers(parsed, header_denylist)
    parsed = anonymize_recipients(parsed, dummy_to)
    simplified = simplify(parsed, tokenizer, budget,
                          keep_attributes=keep_attributes,
                          elision_marker=elision_marker)
    rendered = render_prompt(simplified, variant, tokenizer)
    schema = build_function_schema(variant)
    submit = submit_fn or gateway.submit
    response = submit(rendered, profile, schema, max_retries=max_retries)
    if response.is_structured:
        verdict = gateway.parse_structured(response, schema)
    else:
        verdict = gateway.extract_json_fallback(response.payload)
    verdict = validate_verdict(verdict, variant)
    return DetectionResult(verdict=verdict, response=response,
                           simplified=simplified, prompt=rendered)
