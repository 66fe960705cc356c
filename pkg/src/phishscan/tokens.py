"""Token counting registry and budget checks.

Counts are deterministic per scheme. The built-in ``approx4`` scheme
approximates one token per 4 UTF-8 bytes; vendor-specific tokenizers can be
registered behind the same interface without changing callers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

from .errors import UnknownTokenizer

DEFAULT_TOKENIZER = "approx4"
DEFAULT_TOKEN_LIMIT = 3000


@dataclass(frozen=True)
class TokenBudget:
    """Maximum token count admitted for a serialized email."""

    limit: int = DEFAULT_TOKEN_LIMIT

    def __post_init__(self) -> None:
        if self.limit < 1:
            raise ValueError(f"token budget limit must be >= 1, got {self.limit}")


class ByteRatioScheme:
    """Counting scheme of ceil(utf8_byte_length / bytes_per_token).

    Byte lengths are additive over concatenation, which lets trimming loops
    track counts incrementally instead of re-encoding whole candidates.
    """

    def __init__(self, bytes_per_token: int):
        self.utf8_bytes_per_token = bytes_per_token

    def __call__(self, text: str) -> int:
        return math.ceil(len(text.encode("utf-8")) / self.utf8_bytes_per_token)


_REGISTRY: dict[str, Callable[[str], int]] = {
    "approx4": ByteRatioScheme(4),
}


def register_tokenizer(name: str, counter: Callable[[str], int]) -> None:
    """Register a counting scheme under ``name``, replacing any existing one."""
    _REGISTRY[name] = counter


def get_scheme(tokenizer: str) -> Callable[[str], int]:
    try:
        return _REGISTRY[tokenizer]
    except KeyError:
        raise UnknownTokenizer(f"no tokenizer registered under {tokenizer!r}") from None


def count_tokens(text: str, tokenizer: str = DEFAULT_TOKENIZER) -> int:
    """Count tokens of ``text`` under the named scheme."""
    return get_scheme(tokenizer)(text)


def within_budget(text: str, tokenizer: str = DEFAULT_TOKENIZER,
                  budget: TokenBudget = TokenBudget()) -> bool:
    """True iff the text's token count does not exceed the budget limit."""
    return count_tokens(text, tokenizer) <= budget.limit
