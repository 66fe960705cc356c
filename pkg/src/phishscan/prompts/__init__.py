"""Prompt variants and template rendering.

Templates live as versioned resource files so wording changes stay
diffable. Each template carries exactly one fenced slot into which the
serialized email is inserted.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from importlib import resources

from ..simplify import SimplifiedEmail
from ..tokens import DEFAULT_TOKENIZER, count_tokens

EMAIL_SLOT = "{email}"
FENCE = "```"

VARIANT_KINDS = ("normal", "simple", "embedded_schema")


@dataclass(frozen=True)
class PromptVariant:
    """Prompt flavor. ``base`` records which template an embedded-schema
    variant extends; for the other kinds it equals ``kind``."""

    kind: str
    base: str = "normal"

    def __post_init__(self) -> None:
        if self.kind not in VARIANT_KINDS:
            raise ValueError(f"unknown prompt variant kind {self.kind!r}")
        if self.kind != "embedded_schema":
            object.__setattr__(self, "base", self.kind)
        elif self.base not in ("normal", "simple"):
            raise ValueError(f"embedded_schema base must be normal or simple, got {self.base!r}")

    @property
    def schema_breadth(self) -> str:
        """"simple" when only is_phishing is expected, else "normal"."""
        return "simple" if self.base == "simple" else "normal"


NORMAL = PromptVariant("normal")
SIMPLE = PromptVariant("simple")


def select_variant(requested: str, supports_structured_output: bool) -> PromptVariant:
    """Resolve the requested kind against provider capabilities.

    Providers without structured output get the schema embedded in the
    prompt instead; the simple flavor then carries only the is_phishing key.
    """
    if requested not in ("normal", "simple"):
        raise ValueError(f"requested prompt must be normal or simple, got {requested!r}")
    if supports_structured_output:
        return PromptVariant(requested)
    return PromptVariant("embedded_schema", base=requested)


@dataclass(frozen=True)
class RenderedPrompt:
    text: str
    variant: PromptVariant
    email_token_count: int


@lru_cache(maxsize=None)
def _load_template(name: str) -> str:
    path = resources.files(__package__) / "templates" / f"{name}.txt"
    template = path.read_text(encoding="utf-8")
    if template.count(EMAIL_SLOT) != 1:
        raise ValueError(f"template {name} must contain exactly one email slot")
    return template


def _template_name(variant: PromptVariant) -> str:
    if variant.kind == "embedded_schema":
        return f"{variant.base}_embedded_schema"
    return variant.kind


def serialize_email(email: SimplifiedEmail) -> str:
    """Header lines, a blank line, then the body text."""
    return email.as_text()


def render_prompt(email: SimplifiedEmail, variant: PromptVariant,
                  tokenizer: str = DEFAULT_TOKENIZER) -> RenderedPrompt:
    """Insert the serialized email into the variant's template."""
    serialized = serialize_email(email)
    text = _load_template(_template_name(variant)).replace(EMAIL_SLOT, serialized, 1)
    return RenderedPrompt(
        text=text,
        variant=variant,
        email_token_count=count_tokens(serialized, tokenizer),
    )


def extract_email_slot(prompt_text: str) -> str:
    """Text between the first and last fence; inverse of the slot insertion."""
    start = prompt_text.find(FENCE)
    end = prompt_text.rfind(FENCE)
    if start == -1 or end <= start:
        raise ValueError("prompt text carries no fenced email slot")
    return prompt_text[start + len(FENCE):end]
