"""Reduction of a parsed email to a token-budget-compliant text form.

Four sequential steps, stopping at the first that achieves compliance:
keep only the preferred body part, prune HTML of non-content markup,
then trim from the center (HTML elements) or the middle line (plain text).
Headers are never trimmed; the body absorbs the entire reduction.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

from . import htmltree
from .errors import BudgetUnreachable, NoBody
from .htmltree import Comment, Element, Text, detach, parse_html, postorder_elements, serialize
from .ingest import BodyPart, ParsedEmail, flatten_body_parts
from .tokens import DEFAULT_TOKENIZER, TokenBudget, get_scheme

# Attributes that survive pruning; everything else is presentation noise.
KEEP_ATTRIBUTES = ("src", "href", "alt", "title", "name", "id", "class")

# Wrappers with no informational value of their own.
UNWRAP_TAGS = frozenset({"font", "strong", "b"})

REMOVE_NODE_TAGS = frozenset({"style", "script"})

DEFAULT_ELISION_MARKER = "[...]"

URL_REMAINDER_KEEP = 10

STEP_ORGANIZE = "organize_multipart"
STEP_PRUNE = "prune_html"
STEP_TRIM_HTML = "trim_html_center"
STEP_TRIM_PLAIN = "trim_plain_middle"


@dataclass(frozen=True)
class SimplifiedEmail:
    """Budget-compliant text form of an email, ready for prompt insertion."""

    header_block: str
    body_text: str
    body_kind: str  # "html" | "plain"
    reduction_log: tuple[str, ...] = ()

    def as_text(self) -> str:
        return self.header_block + "\n\n" + self.body_text


def select_preferred_part(parts: list[BodyPart]) -> BodyPart:
    """First text/html leaf if any, else first text/plain, else first leaf."""
    if not parts:
        raise NoBody("email has no body parts")
    for part in parts:
        if part.media_type == "text/html":
            return part
    for part in parts:
        if part.media_type == "text/plain":
            return part
    return parts[0]


_URL_PREFIX = re.compile(r"^(?:[a-zA-Z][a-zA-Z0-9+.-]*:)?(?://[^/?#]*)?")


def _truncate_url(url: str) -> str:
    # Scheme and authority stay intact; everything after them (and after the
    # path's leading slash) is cut to its first URL_REMAINDER_KEEP characters.
    prefix_end = _URL_PREFIX.match(url).end()
    if prefix_end < len(url) and url[prefix_end] == "/":
        prefix_end += 1
    return url[:prefix_end + URL_REMAINDER_KEEP]


def _subtree_flags(element: Element) -> tuple[bool, bool]:
    """(has non-whitespace text, carries src/href on self or descendant)."""
    has_text = False
    has_link = False
    stack: list[htmltree.Node] = [element]
    while stack and not (has_text and has_link):
        node = stack.pop()
        if isinstance(node, Text):
            if node.data.strip():
                has_text = True
        elif isinstance(node, Element):
            if node.has_attr("src") or node.has_attr("href"):
                has_link = True
            stack.extend(node.children)
    return has_text, has_link


def prune_html(html: str, keep_attributes: tuple[str, ...] | list[str] | None = None) -> str:
    """Apply the five markup-omission rules in order and re-serialize.

    1. comment/style/script nodes go; 2. attributes outside the allowlist
    go; 3. elements with no text content go unless they or a descendant
    carry src/href; 4. font/strong/b unwrap; 5. img src and a href keep
    scheme+authority and a 10-character path remainder.
    """
    keep = tuple(keep_attributes) if keep_attributes is not None else KEEP_ATTRIBUTES
    root = parse_html(html)

    # Rule 1: comments, style and script nodes.
    for element in postorder_elements(root):
        if element.tag in REMOVE_NODE_TAGS:
            detach(element)
    _drop_comments(root)

    # Rule 2: attribute allowlist.
    for element in postorder_elements(root):
        element.attrs = [(k, v) for k, v in element.attrs if k in keep]

    # Rule 3: textless elements, except carriers of src/href.
    for element in postorder_elements(root):
        if element.parent is None:
            continue  # already gone with an ancestor
        has_text, has_link = _subtree_flags(element)
        if not has_text and not has_link:
            detach(element)

    # Rule 4: unwrap formatting wrappers.
    for element in postorder_elements(root):
        if element.tag in UNWRAP_TAGS:
            parent = element.parent
            index = parent.children.index(element)
            for offset, child in enumerate(element.children):
                child.parent = parent
                parent.children.insert(index + offset, child)
            element.children = []
            detach(element)

    # Rule 5: URL remainder truncation.
    for element in postorder_elements(root):
        if element.tag == "img":
            src = element.get_attr("src")
            if src:
                element.set_attr("src", _truncate_url(src))
        elif element.tag == "a":
            href = element.get_attr("href")
            if href:
                element.set_attr("href", _truncate_url(href))

    return serialize(root)


def _drop_comments(root: Element) -> None:
    stack: list[Element] = [root]
    while stack:
        element = stack.pop()
        element.children = [c for c in element.children if not isinstance(c, Comment)]
        for child in element.children:
            if isinstance(child, Element):
                stack.append(child)


def _utf8_len(text: str) -> int:
    return len(text.encode("utf-8"))


def trim_html_center(html: str, tokenizer: str = DEFAULT_TOKENIZER,
                     budget: TokenBudget = TokenBudget()) -> str:
    """Remove the middle element of the depth-first element list until the
    serialization fits the budget.

    The list is in postorder (leaves before their containers); the document
    root is never removed. Raises BudgetUnreachable when even the fully
    emptied body stays over budget.
    """
    scheme = get_scheme(tokenizer)
    if scheme(html) <= budget.limit:
        return html

    root = parse_html(html)
    bytes_per_token = getattr(scheme, "utf8_bytes_per_token", None)
    if bytes_per_token:
        # Byte-ratio schemes are additive over the context-free serializer,
        # so removals can be accounted without re-serializing each round.
        total = _utf8_len(serialize(root))
        while True:
            if math.ceil(total / bytes_per_token) <= budget.limit:
                return serialize(root)
            removable = postorder_elements(root)
            if not removable:
                break
            victim = removable[len(removable) // 2]
            total -= _utf8_len(serialize(victim))
            detach(victim)
        raise BudgetUnreachable(
            f"empty body still counts {math.ceil(total / bytes_per_token)}"
            f" tokens against limit {budget.limit}")

    while True:
        text = serialize(root)
        if scheme(text) <= budget.limit:
            return text
        removable = postorder_elements(root)
        if not removable:
            raise BudgetUnreachable(
                f"empty body still counts {scheme(text)} tokens"
                f" against limit {budget.limit}")
        detach(removable[len(removable) // 2])


def trim_plain_middle(text: str, tokenizer: str = DEFAULT_TOKENIZER,
                      budget: TokenBudget = TokenBudget(),
                      marker: str = DEFAULT_ELISION_MARKER) -> str:
    """Delete the middle line (index n//2) repeatedly until the text fits.

    The first and last lines are the last to go, and a single marker line
    replaces the elided region. Raises BudgetUnreachable when even the
    marker alone stays over budget.
    """
    scheme = get_scheme(tokenizer)
    if scheme(text) <= budget.limit:
        return text

    lines = text.split("\n")
    mid = len(lines) // 2
    head, tail = lines[:mid], lines[mid + 1:]

    bytes_per_token = getattr(scheme, "utf8_bytes_per_token", None)
    if bytes_per_token:
        # Candidate byte length is additive over lines plus one newline each.
        total = (sum(_utf8_len(l) + 1 for l in head)
                 + _utf8_len(marker)
                 + sum(_utf8_len(l) + 1 for l in tail))
        while True:
            if math.ceil(total / bytes_per_token) <= budget.limit:
                return "\n".join(head + [marker] + tail)
            if not head and not tail:
                raise BudgetUnreachable(
                    f"elision marker alone counts {math.ceil(total / bytes_per_token)}"
                    f" tokens against limit {budget.limit}")
            if len(head) <= len(tail):
                total -= _utf8_len(tail.pop(0)) + 1
            else:
                total -= _utf8_len(head.pop()) + 1

    while True:
        candidate = "\n".join(head + [marker] + tail)
        if scheme(candidate) <= budget.limit:
            return candidate
        if not head and not tail:
            raise BudgetUnreachable(
                f"elision marker alone counts {scheme(candidate)} tokens"
                f" against limit {budget.limit}")
        if len(head) <= len(tail):
            tail.pop(0)
        else:
            head.pop()


def serialize_headers(parsed: ParsedEmail) -> str:
    """Header block as ``Name: value`` lines in retained order."""
    return "\n".join(f"{field.name}: {field.value}" for field in parsed.headers)


def simplify(parsed: ParsedEmail, tokenizer: str = DEFAULT_TOKENIZER,
             budget: TokenBudget = TokenBudget(), *,
             keep_attributes: tuple[str, ...] | None = None,
             elision_marker: str = DEFAULT_ELISION_MARKER) -> SimplifiedEmail:
    """Reduce a parsed email until its serialized text fits the budget."""
    scheme = get_scheme(tokenizer)
    header_block = serialize_headers(parsed)
    leaves = flatten_body_parts(parsed)

    raw_body = "\n\n".join(part.content for part in leaves)
    kind = "html" if any(p.media_type == "text/html" for p in leaves) else "plain"
    if scheme(header_block + "\n\n" + raw_body) <= budget.limit:
        return SimplifiedEmail(header_block, raw_body, kind, ())

    if not leaves:
        raise BudgetUnreachable("headers alone exceed the token budget")

    log = [STEP_ORGANIZE]
    part = select_preferred_part(leaves)
    kind = "html" if part.media_type == "text/html" else "plain"
    body = part.content
    if scheme(header_block + "\n\n" + body) <= budget.limit:
        return SimplifiedEmail(header_block, body, kind, tuple(log))

    remaining = budget.limit - scheme(header_block + "\n\n")
    if remaining < 1:
        raise BudgetUnreachable("headers alone exceed the token budget")
    body_budget = TokenBudget(remaining)

    if kind == "html":
        body = prune_html(body, keep_attributes)
        log.append(STEP_PRUNE)
        if scheme(header_block + "\n\n" + body) <= budget.limit:
            return SimplifiedEmail(header_block, body, kind, tuple(log))
        body = trim_html_center(body, tokenizer, body_budget)
        log.append(STEP_TRIM_HTML)
    else:
        body = trim_plain_middle(body, tokenizer, body_budget, marker=elision_marker)
        log.append(STEP_TRIM_PLAIN)

    if scheme(header_block + "\n\n" + body) > budget.limit:
        # Unreachable for subadditive schemes; guards exotic plug-ins.
        raise BudgetUnreachable("body trimming could not satisfy the budget")
    return SimplifiedEmail(header_block, body, kind, tuple(log))
