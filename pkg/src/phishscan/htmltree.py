"""Minimal error-recovering HTML tree with a deterministic serializer.

Built on html.parser so arbitrarily malformed markup still yields a tree.
The serializer is context-free: the output of a document is the
concatenation of its children's output, which lets callers account for
removals by subtree length alone.
"""

from __future__ import annotations

from html.parser import HTMLParser

DOCUMENT_TAG = "#document"

VOID_ELEMENTS = frozenset({
    "area", "base", "br", "col", "embed", "hr", "img", "input",
    "link", "meta", "param", "source", "track", "wbr",
})


class Node:
    __slots__ = ("parent",)

    def __init__(self) -> None:
        self.parent: Element | None = None


class Text(Node):
    __slots__ = ("data",)

    def __init__(self, data: str) -> None:
        super().__init__()
        self.data = data


class Comment(Node):
    __slots__ = ("data",)

    def __init__(self, data: str) -> None:
        super().__init__()
        self.data = data


class Element(Node):
    __slots__ = ("tag", "attrs", "children")

    def __init__(self, tag: str, attrs: list[tuple[str, str | None]] | None = None) -> None:
        super().__init__()
        self.tag = tag
        self.attrs: list[tuple[str, str | None]] = list(attrs or [])
        self.children: list[Node] = []

    def append(self, node: Node) -> None:
        node.parent = self
        self.children.append(node)

    def get_attr(self, name: str) -> str | None:
        for key, value in self.attrs:
            if key == name:
                return value
        return None

    def has_attr(self, name: str) -> bool:
        return any(key == name for key, _ in self.attrs)

    def set_attr(self, name: str, value: str | None) -> None:
        for i, (key, _) in enumerate(self.attrs):
            if key == name:
                self.attrs[i] = (name, value)
                return
        self.attrs.append((name, value))


class _TreeParser(HTMLParser):
    def __init__(self) -> None:
        super().__init__(convert_charrefs=True)
        self.root = Element(DOCUMENT_TAG)
        self.stack: list[Element] = [self.root]

    def handle_starttag(self, tag: str, attrs: list[tuple[str, str | None]]) -> None:
        element = Element(tag, attrs)
        self.stack[-1].append(element)
        if tag not in VOID_ELEMENTS:
            self.stack.append(element)

    def handle_startendtag(self, tag: str, attrs: list[tuple[str, str | None]]) -> None:
        self.stack[-1].append(Element(tag, attrs))

    def handle_endtag(self, tag: str) -> None:
        if tag in VOID_ELEMENTS:
            return
        for i in range(len(self.stack) - 1, 0, -1):
            if self.stack[i].tag == tag:
                del self.stack[i:]
                return
        # Stray end tag with no matching open element: ignored.

    def handle_data(self, data: str) -> None:
        self.stack[-1].append(Text(data))

    def handle_comment(self, data: str) -> None:
        self.stack[-1].append(Comment(data))

    # Doctype declarations, CDATA marked sections and processing
    # instructions carry no analyzable text; drop them.
    def handle_decl(self, decl: str) -> None:
        pass

    def unknown_decl(self, data: str) -> None:
        pass

    def handle_pi(self, data: str) -> None:
        pass


def parse_html(text: str) -> Element:
    """Parse (possibly malformed) HTML into a synthetic document element."""
    parser = _TreeParser()
    parser.feed(text)
    parser.close()
    return parser.root


def _escape_text(data: str) -> str:
    return data.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def _escape_attr(data: str) -> str:
    return (data.replace("&", "&amp;").replace('"', "&quot;")
            .replace("<", "&lt;").replace(">", "&gt;"))


def _open_tag(element: Element) -> str:
    parts = [element.tag]
    for name, value in element.attrs:
        if value is None:
            parts.append(name)
        else:
            parts.append(f'{name}="{_escape_attr(value)}"')
    return "<" + " ".join(parts) + ">"


def serialize(node: Node) -> str:
    """Deterministic HTML text for a node; the document wrapper emits no tags."""
    out: list[str] = []
    work: list[tuple[Node, bool]] = [(node, False)]
    while work:
        current, closing = work.pop()
        if closing:
            out.append(f"</{current.tag}>")  # type: ignore[union-attr]
            continue
        if isinstance(current, Text):
            out.append(_escape_text(current.data))
        elif isinstance(current, Comment):
            out.append(f"<!--{current.data}-->")
        elif isinstance(current, Element):
            is_document = current.tag == DOCUMENT_TAG
            if not is_document:
                out.append(_open_tag(current))
            if not is_document and current.tag not in VOID_ELEMENTS:
                work.append((current, True))
            for child in reversed(current.children):
                work.append((child, False))
    return "".join(out)


def detach(node: Node) -> None:
    """Remove a node (and its subtree) from its parent."""
    if node.parent is not None:
        node.parent.children.remove(node)
        node.parent = None


def postorder_elements(root: Element) -> list[Element]:
    """All elements below the document root, children before their parents."""
    out: list[Element] = []

    def visit(element: Element) -> None:
        stack: list[tuple[Element, bool]] = [(element, False)]
        while stack:
            current, expanded = stack.pop()
            if expanded:
                out.append(current)
                continue
            stack.append((current, True))
            for child in reversed(current.children):
                if isinstance(child, Element):
                    stack.append((child, False))

    for child in root.children:
        if isinstance(child, Element):
            visit(child)
    return out
