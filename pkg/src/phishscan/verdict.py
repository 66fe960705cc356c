"""Detection verdict values: validation and canonical JSON serialization."""

from __future__ import annotations

import json
from dataclasses import dataclass

from .errors import InvalidScore, MissingField, RationalesTooLong
from .prompts import PromptVariant

VERDICT_KEYS = ("is_phishing", "phishing_score", "brand_impersonated",
                "rationales", "brief_reason")

SCORE_MIN = 0
SCORE_MAX = 10
RATIONALES_WORD_CAP = 500


@dataclass(frozen=True)
class DetectionVerdict:
    """Structured result of one email analysis.

    Only is_phishing is always present; the remaining fields depend on the
    prompt variant and on what the model chose to fill in.
    """

    is_phishing: bool
    phishing_score: int | None = None
    brand_impersonated: str | None = None
    rationales: str | None = None
    brief_reason: str | None = None


def validate_verdict(verdict: DetectionVerdict, variant: PromptVariant) -> DetectionVerdict:
    """Enforce range and length constraints; out-of-range values raise, never clamp."""
    if variant.schema_breadth == "normal" and verdict.phishing_score is None:
        raise MissingField("phishing_score")
    if verdict.phishing_score is not None and not (
            SCORE_MIN <= verdict.phishing_score <= SCORE_MAX):
        raise InvalidScore(
            f"phishing_score {verdict.phishing_score} outside {SCORE_MIN}..{SCORE_MAX}")
    if verdict.rationales is not None:
        words = len(verdict.rationales.split())
        if words > RATIONALES_WORD_CAP:
            raise RationalesTooLong(f"rationales has {words} words, cap is {RATIONALES_WORD_CAP}")
    return verdict


def verdict_to_json(verdict: DetectionVerdict) -> str:
    """Canonical single-line JSON: schema key order, absent optionals omitted."""
    data = {key: getattr(verdict, key) for key in VERDICT_KEYS
            if getattr(verdict, key) is not None}
    return json.dumps(data, ensure_ascii=False)


def verdict_from_json(text: str) -> DetectionVerdict:
    """Inverse of verdict_to_json."""
    data = json.loads(text)
    if not isinstance(data, dict):
        raise ValueError("verdict JSON must be an object")
    unknown = set(data) - set(VERDICT_KEYS)
    if unknown:
        raise ValueError(f"unknown verdict keys: {sorted(unknown)}")
    if "is_phishing" not in data:
        raise MissingField("is_phishing")
    return DetectionVerdict(**data)
