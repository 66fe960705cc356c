"""Exception types shared across the package."""


class PhishscanError(Exception):
    """Base class for all package-specific errors."""


class MalformedMessage(PhishscanError):
    """Raised when no header/body boundary can be found in raw email bytes."""


class UnknownTokenizer(PhishscanError):
    """Raised when a tokenizer name does not resolve to a registered scheme."""


class NoBody(PhishscanError):
    """Raised when a body part is requested from an email with no leaf parts."""


class BudgetUnreachable(PhishscanError):
    """Raised when no amount of trimming can bring a text under its token budget."""


class TransportError(PhishscanError):
    """Raised after retries are exhausted on transient provider transport failures."""


class AuthError(PhishscanError):
    """Raised when provider credentials are missing or rejected."""


class ProviderRefusal(PhishscanError):
    """Raised on non-retryable provider rejections (4xx other than auth)."""


class SchemaViolation(PhishscanError):
    """Raised when a structured response does not match the declared schema."""

    def __init__(self, field: str, message: str | None = None):
        self.field = field
        super().__init__(message or f"schema violation in field {field!r}")


class Unparseable(PhishscanError):
    """Raised when neither JSON extraction nor keyword search decides a verdict."""


class InvalidScore(PhishscanError):
    """Raised when a phishing score falls outside the 0-10 range."""


class RationalesTooLong(PhishscanError):
    """Raised when the rationales text exceeds the 500-word cap."""


class MissingField(PhishscanError):
    """Raised when a verdict lacks a field required by its prompt variant."""

    def __init__(self, field: str):
        self.field = field
        super().__init__(f"verdict is missing required field {field!r}")


class EmptyDataset(PhishscanError):
    """Raised when a dataset root yields no usable samples."""
