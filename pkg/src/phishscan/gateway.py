"""Provider gateway: submit prompts, parse structured replies, recover from noise.

Submissions carry no sampling-parameter overrides; every provider runs with
its own defaults. A deterministic mock provider makes the whole pipeline
runnable offline.
"""

from __future__ import annotations

import ast
import json
import logging
import os
import re
import threading
import time
from dataclasses import dataclass, field
from typing import Any, Callable

import requests

from .errors import AuthError, ProviderRefusal, SchemaViolation, TransportError, Unparseable
from .prompts import NORMAL, PromptVariant, RenderedPrompt, extract_email_slot
from .tokens import DEFAULT_TOKENIZER, count_tokens
from .verdict import DetectionVerdict

logger = logging.getLogger(__name__)

FUNCTION_NAME = "print_phishing_result"
FUNCTION_DESCRIPTION = ("Outputs whether a given email is a phishing email "
                        "or a legitimate email.")

DEFAULT_MOCK_KEYWORDS = ("verify", "urgent", "suspended", "click")
DEFAULT_MOCK_PHISHING_SCORE = 8


@dataclass(frozen=True)
class ProviderProfile:
    """Identity, pricing and transport settings of one model endpoint."""

    name: str
    endpoint: str
    model_id: str
    supports_structured_output: bool = True
    tokenizer: str = DEFAULT_TOKENIZER
    price_per_1k_input: float = 0.0
    price_per_1k_output: float = 0.0
    max_in_flight: int = 4
    timeout_s: float = 60.0
    credential_env: str | None = None
    adapter: str = "openai_chat"
    options: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.price_per_1k_input < 0 or self.price_per_1k_output < 0:
            raise ValueError("prices must be non-negative")
        if self.max_in_flight < 1:
            raise ValueError("max_in_flight must be >= 1")


def profile_from_dict(data: dict) -> ProviderProfile:
    known = {f for f in ProviderProfile.__dataclass_fields__}
    unknown = set(data) - known
    if unknown:
        raise ValueError(f"unknown provider profile keys: {sorted(unknown)}")
    return ProviderProfile(**data)


@dataclass(frozen=True)
class SchemaProperty:
    name: str
    json_type: str
    description: str
    required: bool


_PROPERTY_TABLE = (
    SchemaProperty("is_phishing", "boolean",
                   "A boolean value indicating whether the email is phishing "
                   "(true) or legitimate (false).", required=True),
    SchemaProperty("phishing_score", "number",
                   "Phishing risk confidence score as an integer on a scale "
                   "from 0 to 10.", required=True),
    SchemaProperty("brand_impersonated", "string",
                   "Brand name associated with the email, if applicable.",
                   required=False),
    SchemaProperty("rationales", "string",
                   "Detailed rationales for the determination, up to 500 words.",
                   required=False),
    SchemaProperty("brief_reason", "string",
                   "Brief reason for the determination.", required=False),
)


@dataclass(frozen=True)
class ResponseSchema:
    """Function-calling schema the provider is asked to fill."""

    function_name: str
    properties: tuple[SchemaProperty, ...]

    def property_names(self) -> tuple[str, ...]:
        return tuple(p.name for p in self.properties)

    def as_tool(self) -> dict:
        """Chat-completions tool declaration for this schema."""
        return {
            "type": "function",
            "function": {
                "name": self.function_name,
                "description": FUNCTION_DESCRIPTION,
                "parameters": {
                    "type": "object",
                    "properties": {
                        p.name: {"type": p.json_type, "description": p.description}
                        for p in self.properties
                    },
                    "required": [p.name for p in self.properties if p.required],
                },
            },
        }


def build_function_schema(variant: PromptVariant) -> ResponseSchema:
    """Five properties for normal-breadth prompts, is_phishing alone for simple."""
    if variant.schema_breadth == "simple":
        return ResponseSchema(FUNCTION_NAME, _PROPERTY_TABLE[:1])
    return ResponseSchema(FUNCTION_NAME, _PROPERTY_TABLE)


@dataclass(frozen=True)
class RawModelResponse:
    """One provider reply plus its accounting data.

    ``latency_s`` is end-to-end including retries and backoff;
    ``attempt_latencies`` holds each individual request round trip.
    """

    payload: dict | str
    input_tokens: int
    output_tokens: int
    latency_s: float
    attempt_latencies: tuple[float, ...] = ()

    @property
    def is_structured(self) -> bool:
        return isinstance(self.payload, dict)


class MockProvider:
    """Deterministic keyword rule engine standing in for a live model.

    Any configured keyword appearing in the fenced email region yields a
    phishing verdict at a fixed score. Captured calls expose concurrency
    and request parameters to tests.
    """

    def __init__(self, keywords: tuple[str, ...] = DEFAULT_MOCK_KEYWORDS,
                 phishing_score: int = DEFAULT_MOCK_PHISHING_SCORE,
                 legitimate_score: int = 0, settle_s: float = 0.0):
        self.keywords = tuple(kw.lower() for kw in keywords)
        self.phishing_score = phishing_score
        self.legitimate_score = legitimate_score
        self.settle_s = settle_s
        self.calls: list[dict] = []
        self.max_in_flight_seen = 0
        self._in_flight = 0
        self._lock = threading.Lock()

    @property
    def call_count(self) -> int:
        return len(self.calls)

    def respond(self, prompt_text: str, schema: ResponseSchema, params: dict) -> dict:
        with self._lock:
            self._in_flight += 1
            self.max_in_flight_seen = max(self.max_in_flight_seen, self._in_flight)
            self.calls.append({
                "prompt": prompt_text,
                "properties": schema.property_names(),
                "params": dict(params),
            })
        try:
            if self.settle_s:
                time.sleep(self.settle_s)
            try:
                region = extract_email_slot(prompt_text)
            except ValueError:
                region = prompt_text
            lowered = region.lower()
            matched = [kw for kw in self.keywords if kw in lowered]
            return self._arguments(bool(matched), matched, schema)
        finally:
            with self._lock:
                self._in_flight -= 1

    def _arguments(self, phishing: bool, matched: list[str],
                   schema: ResponseSchema) -> dict:
        full = {
            "is_phishing": phishing,
            "phishing_score": self.phishing_score if phishing else self.legitimate_score,
            "brand_impersonated": "",
            "rationales": ("Deterministic rule match on: " + ", ".join(matched)
                           if phishing else "No configured phishing keywords found."),
            "brief_reason": ("Keyword rule matched." if phishing
                             else "No keyword rule matched."),
        }
        return {name: full[name] for name in schema.property_names()}


_STATE_LOCK = threading.Lock()
_SEMAPHORES: dict[str, threading.BoundedSemaphore] = {}
_MOCKS: dict[str, MockProvider] = {}


def _semaphore_for(profile: ProviderProfile) -> threading.BoundedSemaphore:
    with _STATE_LOCK:
        if profile.name not in _SEMAPHORES:
            _SEMAPHORES[profile.name] = threading.BoundedSemaphore(profile.max_in_flight)
        return _SEMAPHORES[profile.name]


def mock_provider_for(profile: ProviderProfile) -> MockProvider:
    """The shared mock instance backing a profile (created on first use)."""
    with _STATE_LOCK:
        if profile.name not in _MOCKS:
            options = profile.options or {}
            _MOCKS[profile.name] = MockProvider(
                keywords=tuple(options.get("keywords", DEFAULT_MOCK_KEYWORDS)),
                phishing_score=int(options.get("phishing_score",
                                               DEFAULT_MOCK_PHISHING_SCORE)),
                legitimate_score=int(options.get("legitimate_score", 0)),
                settle_s=float(options.get("settle_s", 0.0)),
            )
        return _MOCKS[profile.name]


def reset_gateway_state() -> None:
    """Drop per-profile semaphores and mock instances (test isolation)."""
    with _STATE_LOCK:
        _SEMAPHORES.clear()
        _MOCKS.clear()


def submit(prompt: RenderedPrompt, profile: ProviderProfile, schema: ResponseSchema,
           *, max_retries: int = 3, backoff_base: float = 1.0,
           transport: Callable[..., Any] | None = None,
           sleep: Callable[[float], None] = time.sleep) -> RawModelResponse:
    """Send one prompt under the profile's in-flight cap and default parameters.

    Transient transport failures retry with exponential backoff; credential
    and non-retryable provider errors raise immediately.
    """
    semaphore = _semaphore_for(profile)
    with semaphore:
        if profile.adapter == "mock":
            provider = mock_provider_for(profile)
            arguments = provider.respond(prompt.text, schema, {})
            return RawModelResponse(
                payload=arguments,
                input_tokens=count_tokens(prompt.text, profile.tokenizer),
                output_tokens=count_tokens(json.dumps(arguments), profile.tokenizer),
                latency_s=0.0,
                attempt_latencies=(0.0,),
            )
        if profile.adapter == "openai_chat":
            return _submit_openai_chat(prompt, profile, schema, max_retries,
                                       backoff_base, transport, sleep)
        raise ValueError(f"unknown provider adapter {profile.adapter!r}")


def _submit_openai_chat(prompt: RenderedPrompt, profile: ProviderProfile,
                        schema: ResponseSchema, max_retries: int,
                        backoff_base: float,
                        transport: Callable[..., Any] | None,
                        sleep: Callable[[float], None]) -> RawModelResponse:
    headers = {"Content-Type": "application/json"}
    if profile.credential_env:
        secret = os.environ.get(profile.credential_env)
        if not secret:
            raise AuthError(f"environment variable {profile.credential_env} is not set")
        headers["Authorization"] = f"Bearer {secret}"

    # Sampling parameters are deliberately absent: provider defaults apply.
    body: dict[str, Any] = {
        "model": profile.model_id,
        "messages": [{"role": "user", "content": prompt.text}],
    }
    if profile.supports_structured_output:
        body["tools"] = [schema.as_tool()]
        body["tool_choice"] = {"type": "function",
                               "function": {"name": schema.function_name}}

    post = transport or requests.post
    start = time.monotonic()
    attempts: list[float] = []
    last_error: Exception | str | None = None
    for attempt in range(max_retries):
        if attempt:
            sleep(backoff_base * 2 ** (attempt - 1))
        t0 = time.monotonic()
        try:
            response = post(profile.endpoint, json=body, headers=headers,
                            timeout=profile.timeout_s)
        except requests.RequestException as exc:
            attempts.append(time.monotonic() - t0)
            last_error = exc
            logger.warning("attempt %d/%d against %s failed: %s",
                           attempt + 1, max_retries, profile.name, exc)
            continue
        attempts.append(time.monotonic() - t0)
        status = response.status_code
        if status in (401, 403):
            raise AuthError(f"provider rejected credentials (HTTP {status})")
        if status == 429 or status >= 500:
            last_error = f"HTTP {status}"
            logger.warning("attempt %d/%d against %s got HTTP %d",
                           attempt + 1, max_retries, profile.name, status)
            continue
        if 400 <= status < 500:
            raise ProviderRefusal(f"provider refused request (HTTP {status})")
        data = response.json()
        usage = data.get("usage") or {}
        return RawModelResponse(
            payload=_payload_from_chat_completion(data),
            input_tokens=int(usage.get("prompt_tokens", 0)),
            output_tokens=int(usage.get("completion_tokens", 0)),
            latency_s=time.monotonic() - start,
            attempt_latencies=tuple(attempts),
        )
    raise TransportError(
        f"provider {profile.name} unreachable after {max_retries} attempts: {last_error}")


def _payload_from_chat_completion(data: dict) -> dict | str:
    choices = data.get("choices") or []
    message = (choices[0].get("message") or {}) if choices else {}
    tool_calls = message.get("tool_calls") or []
    if tool_calls:
        arguments = (tool_calls[0].get("function") or {}).get("arguments", "")
        try:
            parsed = json.loads(arguments)
        except ValueError:
            return str(arguments)
        if isinstance(parsed, dict):
            return parsed
        return str(arguments)
    return str(message.get("content") or "")


_MISSING = object()


def parse_structured(response: RawModelResponse, schema: ResponseSchema) -> DetectionVerdict:
    """Map a structured payload onto a verdict, 1:1 per the schema.

    Missing optional string fields default to empty; type mismatches raise
    SchemaViolation naming the offending field.
    """
    if not response.is_structured:
        raise ValueError("response payload is free text; use extract_json_fallback")
    verdict = _verdict_from_mapping(response.payload, schema, strict=True)
    assert verdict is not None  # strict mode raises instead of returning None
    return verdict


def _verdict_from_mapping(data: dict, schema: ResponseSchema,
                          strict: bool) -> DetectionVerdict | None:
    values: dict[str, Any] = {}
    for prop in schema.properties:
        raw = data.get(prop.name, _MISSING)
        if prop.name == "is_phishing":
            flag = _coerce_bool(raw, strict)
            if flag is None:
                if strict:
                    raise SchemaViolation("is_phishing")
                return None
            values["is_phishing"] = flag
        elif prop.name == "phishing_score":
            values["phishing_score"] = _coerce_score(raw, strict)
        else:
            values[prop.name] = _coerce_text(prop.name, raw, strict)
    return DetectionVerdict(**values)


def _coerce_bool(raw: Any, strict: bool) -> bool | None:
    if type(raw) is bool:
        return raw
    if strict:
        return None
    if isinstance(raw, str):
        lowered = raw.strip().lower()
        if lowered in ("true", "yes"):
            return True
        if lowered in ("false", "no"):
            return False
    return None


def _coerce_score(raw: Any, strict: bool) -> int | None:
    if raw is _MISSING or raw is None:
        return None
    if type(raw) is bool:
        if strict:
            raise SchemaViolation("phishing_score")
        return None
    if isinstance(raw, int):
        return raw
    if isinstance(raw, float) and raw.is_integer():
        return int(raw)
    if strict:
        raise SchemaViolation("phishing_score")
    if isinstance(raw, str) and re.fullmatch(r"-?\d+", raw.strip()):
        return int(raw.strip())
    return None


def _coerce_text(name: str, raw: Any, strict: bool) -> str | None:
    if raw is _MISSING or raw is None:
        return ""  # present in schema but absent in reply
    if isinstance(raw, str):
        return raw
    if strict:
        raise SchemaViolation(name)
    return ""


def _balanced_objects(text: str):
    """Balanced ``{...}`` substrings in order of their opening brace."""
    for start, ch in enumerate(text):
        if ch != "{":
            continue
        depth = 0
        in_string = False
        escaped = False
        for i in range(start, len(text)):
            c = text[i]
            if in_string:
                if escaped:
                    escaped = False
                elif c == "\\":
                    escaped = True
                elif c == '"':
                    in_string = False
                continue
            if c == '"':
                in_string = True
            elif c == "{":
                depth += 1
            elif c == "}":
                depth -= 1
                if depth == 0:
                    yield text[start:i + 1]
                    break


def _normalize_jsonish(text: str) -> str:
    out = re.sub(r",\s*([}\]])", r"\1", text)  # trailing commas
    out = re.sub(r"\bTrue\b", "true", out)
    out = re.sub(r"\bFalse\b", "false", out)
    out = re.sub(r"\bNone\b", "null", out)
    # Single-quoted keys and values after structural characters.
    out = re.sub(
        r"(?<=[{,\[:])(\s*)'((?:[^'\\]|\\.)*)'",
        lambda m: m.group(1) + json.dumps(m.group(2).replace("\\'", "'")),
        out,
    )
    return out


def _parse_jsonish(candidate: str) -> dict | None:
    for attempt in (candidate, _normalize_jsonish(candidate)):
        try:
            data = json.loads(attempt)
        except ValueError:
            continue
        if isinstance(data, dict):
            return data
    try:
        data = ast.literal_eval(candidate)
    except (ValueError, SyntaxError, TypeError, MemoryError, RecursionError):
        return None
    return data if isinstance(data, dict) else None


# Explicit key mentions: "is_phishing: true", "is_phishing should be set to
# false". Bounded connector words keep the match from crossing statements.
_KEY_PATTERN = re.compile(
    r"is[_\s-]?phishing"
    r"(?:\W|\b(?:should|would|must|will|can|be|set|to|is|equals?|value|of|as)\b){0,12}?"
    r"\b(true|false|yes|no)\b")

_PROSE_TRUE = tuple(re.compile(p) for p in (
    r"\b(?:this|the|it)(?: email| message)? is (?:a |an |most likely |very likely |likely |probably |clearly |definitely )*phishing\b",
    r"\bis a phishing (?:email|message|attempt)\b",
    r"\bemail is phishing\b",
    r"\bverdict\W{0,8}phishing\b",
    r"\bclassif\w* (?:this |the |it )?(?:email )?as phishing\b",
    r"\bphishing\s*[:=]\s*(?:true|yes)\b",
))

_PROSE_FALSE = tuple(re.compile(p) for p in (
    r"\bnot (?:a |an )?phishing\b",
    r"\b(?:this|the|it)(?: email| message)? is (?:a |an |most likely |very likely |likely |probably |clearly |definitely )*legitimate\b",
    r"\bemail is legitimate\b",
    r"\bis a legitimate (?:email|message)\b",
    r"\bverdict\W{0,8}legitimate\b",
    r"\bclassif\w* (?:this |the |it )?(?:email )?as legitimate\b",
    r"\bno (?:signs?|evidence|indicators?) of phishing\b",
    r"\bphishing\s*[:=]\s*(?:false|no)\b",
))


def _keyword_verdict(text: str) -> bool | None:
    lowered = " ".join(text.lower().split())
    polarities = {match.group(1) in ("true", "yes")
                  for match in _KEY_PATTERN.finditer(lowered)}
    if len(polarities) == 1:
        return polarities.pop()
    if len(polarities) == 2:
        return None  # conflicting explicit statements
    prose_true = any(p.search(lowered) for p in _PROSE_TRUE)
    prose_false = any(p.search(lowered) for p in _PROSE_FALSE)
    if prose_true != prose_false:
        return prose_true
    return None


def extract_json_fallback(text: str) -> DetectionVerdict:
    """Recover a verdict from free text.

    First choice: the outermost balanced JSON-ish object carrying an
    is_phishing key (prose, code fences, trailing commas and single quotes
    tolerated). Second choice: decisive keyword patterns. Otherwise raises
    Unparseable.
    """
    for candidate in _balanced_objects(text):
        if "is_phishing" not in candidate:
            continue
        data = _parse_jsonish(candidate)
        if data is None or "is_phishing" not in data:
            continue
        verdict = _verdict_from_mapping(data, build_function_schema(NORMAL), strict=False)
        if verdict is not None:
            return verdict
    hint = _keyword_verdict(text)
    if hint is not None:
        return DetectionVerdict(is_phishing=hint)
    raise Unparseable("no verdict object or decisive keyword patterns found")
