"""Parsing of raw .eml bytes into a decoded, sanitized, anonymized structure.

Parsing is total by design: malformed sub-structures degrade to plain-text
leaves instead of failing, and only messages with no recognizable
header/body boundary at all are rejected.
"""

from __future__ import annotations

import email.header
import fnmatch
import logging
from dataclasses import dataclass, replace
from email import errors as email_errors
from email.parser import BytesParser
from email.utils import parseaddr

from .errors import MalformedMessage

logger = logging.getLogger(__name__)

# Headers removed by default: vendor extension headers and authentication
# signatures add noise without analytical value, and spam-filter verdicts
# would leak another system's decision into the analysis.
DEFAULT_HEADER_DENYLIST = ("X-*", "DKIM-Signature", "ARC-*")

RECIPIENT_HEADERS = ("to", "cc", "delivered-to")


@dataclass(frozen=True)
class RawEmail:
    """Octet content of one .eml file plus an optional origin label."""

    content: bytes
    source_path: str | None = None

    def __post_init__(self) -> None:
        if not self.content:
            raise ValueError("raw email bytes must be non-empty")


@dataclass(frozen=True)
class HeaderField:
    """One header with its decoded value and the original wire text."""

    name: str
    value: str
    raw_value: str


@dataclass(frozen=True)
class BodyPart:
    """A node of the body tree: a decoded text leaf or a multipart container."""

    media_type: str
    charset: str
    content: str
    children: tuple["BodyPart", ...] = ()
    transfer_encoding: str = "7bit"

    @property
    def is_container(self) -> bool:
        return self.media_type.startswith(("multipart/", "message/"))


@dataclass(frozen=True)
class AttachmentRef:
    """Attachment metadata; binary payloads are never retained."""

    filename: str
    declared_media_type: str


@dataclass(frozen=True)
class ParsedEmail:
    headers: tuple[HeaderField, ...]
    body: BodyPart
    attachments: tuple[AttachmentRef, ...] = ()

    def get_header(self, name: str) -> str | None:
        """First decoded value of the named header, case-insensitive."""
        wanted = name.lower()
        for field in self.headers:
            if field.name.lower() == wanted:
                return field.value
        return None


def decode_header_value(raw: str) -> str:
    """Decode all RFC 2047 encoded-words in a header value.

    Total function: malformed input comes back unchanged, undecodable bytes
    become U+FFFD. Strings without an ``=?`` marker are returned as-is.
    """
    if "=?" not in raw:
        return raw
    try:
        chunks = email.header.decode_header(raw)
    except Exception:
        return raw
    parts = []
    for data, charset in chunks:
        if isinstance(data, str):
            parts.append(data)
            continue
        try:
            parts.append(data.decode(charset or "utf-8", errors="replace"))
        except (LookupError, ValueError):
            parts.append(data.decode("utf-8", errors="replace"))
    return "".join(parts)


def _decode_payload_bytes(data: bytes, charset: str | None) -> str:
    try:
        text = data.decode(charset or "utf-8", errors="replace")
    except (LookupError, ValueError):
        # Unknown or broken charset label; fall back so the pipeline stays total.
        text = data.decode("utf-8", errors="replace")
    return text.replace("\r\n", "\n")


def _header_name_ok(name: str) -> bool:
    return bool(name) and ":" not in name and not any(ch.isspace() for ch in name)


def _degraded_leaf(text: str) -> BodyPart:
    return BodyPart(media_type="text/plain", charset="utf-8", content=text.replace("\r\n", "\n"))


class _TreeBuilder:
    """Converts a compat32 message into a BodyPart tree plus attachment refs."""

    def __init__(self) -> None:
        self.attachments: list[AttachmentRef] = []

    def convert(self, part) -> BodyPart | None:
        try:
            return self._convert(part)
        except Exception:
            # Malformed sub-structure: keep whatever raw text we can see.
            return _degraded_leaf(str(part.get_payload() or ""))

    def _convert(self, part) -> BodyPart | None:
        media_type = part.get_content_type()
        if part.is_multipart():
            payload = part.get_payload()
            children = []
            for child in payload:
                node = self.convert(child)
                if node is not None:
                    children.append(node)
            return BodyPart(media_type=media_type, charset="", content="",
                            children=tuple(children),
                            transfer_encoding=self._cte(part))

        if media_type.startswith(("multipart/", "message/")):
            # Container whose boundary parsing failed: keep the raw text.
            return _degraded_leaf(str(part.get_payload() or ""))

        filename = part.get_filename()
        disposition = str(part.get("Content-Disposition") or "").strip().lower()
        maintype = media_type.split("/", 1)[0]
        if filename is not None or disposition.startswith("attachment") or maintype != "text":
            self.attachments.append(AttachmentRef(
                filename=decode_header_value(filename or ""),
                declared_media_type=media_type,
            ))
            return None

        data = part.get_payload(decode=True)
        if data is None:
            raw = part.get_payload()
            data = raw.encode("utf-8", errors="replace") if isinstance(raw, str) else b""
        return BodyPart(
            media_type=media_type,
            charset=part.get_content_charset() or "utf-8",
            content=_decode_payload_bytes(data, part.get_content_charset()),
            transfer_encoding=self._cte(part),
        )

    @staticmethod
    def _cte(part) -> str:
        return str(part.get("Content-Transfer-Encoding") or "7bit").strip().lower()


def parse_eml(raw: RawEmail) -> ParsedEmail:
    """Parse .eml bytes into decoded headers, a body tree, and attachment refs.

    Raises MalformedMessage only when the bytes establish no header section
    and no header/body separator; any other damage degrades locally.
    """
    try:
        msg = BytesParser().parsebytes(raw.content)

        no_boundary = any(isinstance(d, email_errors.MissingHeaderBodySeparatorDefect)
                          for d in msg.defects)
        if no_boundary and not msg.items():
            raise MalformedMessage(
                f"no header/body boundary found in {raw.source_path or 'message'}")

        headers = []
        for name, raw_value in msg.items():
            name = name.strip()
            if not _header_name_ok(name):
                continue
            raw_text = str(raw_value).replace("\r\n", "\n")
            headers.append(HeaderField(
                name=name,
                value=decode_header_value(raw_text),
                raw_value=raw_text,
            ))

        builder = _TreeBuilder()
        body = builder.convert(msg)
        if body is None:
            body = BodyPart(media_type="text/plain", charset="utf-8", content="")
        return ParsedEmail(headers=tuple(headers), body=body,
                           attachments=tuple(builder.attachments))
    except MalformedMessage:
        raise
    except Exception:
        # Totality guard: salvage the raw bytes as a plain-text body.
        logger.exception("unexpected parse failure, degrading to raw text")
        return ParsedEmail(
            headers=(),
            body=_degraded_leaf(raw.content.decode("utf-8", errors="replace")),
        )


def sanitize_headers(parsed: ParsedEmail,
                     denylist: tuple[str, ...] | list[str] = ()) -> ParsedEmail:
    """Drop headers matching the built-in denylist plus any extra patterns.

    Patterns are case-insensitive globs; ``denylist`` extends (never replaces)
    the defaults, so X-*, DKIM-Signature and ARC-* always go. Relative order
    of retained headers is preserved.
    """
    patterns = [p.lower() for p in (*DEFAULT_HEADER_DENYLIST, *denylist)]
    kept = tuple(
        field for field in parsed.headers
        if not any(fnmatch.fnmatchcase(field.name.lower(), pat) for pat in patterns)
    )
    return replace(parsed, headers=kept)


def anonymize_recipients(parsed: ParsedEmail,
                         dummy: str = "user@example.com") -> ParsedEmail:
    """Replace every To/Cc/Delivered-To value with a single dummy address.

    Display names are dropped and multiple recipients collapse to one
    occurrence of the dummy. Other headers are untouched.
    """
    _, addr = parseaddr(dummy)
    if "@" not in addr or any(ch.isspace() for ch in addr):
        raise ValueError(f"dummy address {dummy!r} is not a valid address")
    rewritten = tuple(
        replace(field, value=dummy, raw_value=dummy)
        if field.name.lower() in RECIPIENT_HEADERS else field
        for field in parsed.headers
    )
    return replace(parsed, headers=rewritten)


def flatten_body_parts(parsed: ParsedEmail) -> list[BodyPart]:
    """Depth-first list of leaf parts in document order; containers excluded."""
    leaves: list[BodyPart] = []

    def walk(node: BodyPart) -> None:
        if node.is_container:
            for child in node.children:
                walk(child)
        else:
            leaves.append(node)

    walk(parsed.body)
    return leaves
