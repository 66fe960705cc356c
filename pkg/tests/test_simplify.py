import math
import random
from urllib.parse import urlsplit

import pytest

from phishscan.errors import BudgetUnreachable, NoBody
from phishscan.htmltree import Element, Text, parse_html
from phishscan.ingest import BodyPart, HeaderField, ParsedEmail
from phishscan.simplify import (
    prune_html,
    select_preferred_part,
    serialize_headers,
    simplify,
    trim_html_center,
    trim_plain_middle,
)
from phishscan.tokens import TokenBudget, count_tokens, register_tokenizer
from genmail import random_html, random_parsed_email, random_plain_lines
from golden_html import GOLDEN_CASES


def _leaf(media, content):
    return BodyPart(media, "utf-8", content)


# ------------------------------------------------------- preferred part

def test_prefers_html_over_plain():
    html = _leaf("text/html", "<b>h</b>")
    assert select_preferred_part([_leaf("text/plain", "p"), html]) is html


def test_single_plain_part():
    plain = _leaf("text/plain", "p")
    assert select_preferred_part([plain]) is plain


def test_first_html_wins_ties():
    first = _leaf("text/html", "one")
    assert select_preferred_part([first, _leaf("text/html", "two")]) is first


def test_falls_back_to_first_leaf():
    calendar = _leaf("text/calendar", "BEGIN:VCALENDAR")
    assert select_preferred_part([calendar]) is calendar


def test_no_parts_raises():
    with pytest.raises(NoBody):
        select_preferred_part([])


# ------------------------------------------------------------- pruning

@pytest.mark.parametrize("case_id,source,expected",
                         GOLDEN_CASES, ids=[c[0] for c in GOLDEN_CASES])
def test_prune_golden(case_id, source, expected):
    assert prune_html(source) == expected


def test_prune_keep_attributes_override():
    out = prune_html('<p id="a" class="b">t</p>', keep_attributes=("id",))
    assert out == '<p id="a">t</p>'


def test_prune_preserves_scheme_and_authority():
    html = random_html(random.Random(7), 30_000)
    source_urls = _collect_urls(html)
    pruned_urls = _collect_urls(prune_html(html))
    assert pruned_urls
    for url in pruned_urls:
        matches = [u for u in source_urls if u.startswith(url)]
        assert matches, url
        split_out, split_in = urlsplit(url), urlsplit(matches[0])
        assert (split_out.scheme, split_out.netloc) == (split_in.scheme, split_in.netloc)


def _collect_urls(html):
    urls = []
    stack = [parse_html(html)]
    while stack:
        node = stack.pop()
        if isinstance(node, Element):
            for attr in ("href", "src"):
                value = node.get_attr(attr)
                if value:
                    urls.append(value)
            stack.extend(node.children)
    return urls


def test_prune_preserves_text_order():
    html = random_html(random.Random(11), 20_000)
    before = _text_nodes(html)
    after = _text_nodes(prune_html(html))
    it = iter(before)
    assert all(any(t == s for s in it) for t in after), "text order changed"


def _text_nodes(html):
    out = []
    def walk(node):
        for child in node.children:
            if isinstance(child, Text):
                if child.data.strip():
                    out.append(child.data)
            elif isinstance(child, Element):
                walk(child)
    walk(parse_html(html))
    return out


# ------------------------------------------------------ trim_html_center

def test_trim_html_unchanged_when_within_budget():
    html = "<p>aa</p><p>bb</p>"
    assert trim_html_center(html, "approx4", TokenBudget(100)) == html


def test_trim_html_removes_middle_sibling_first():
    html = "<p>aa</p><p>bb</p><p>cc</p><p>dd</p><p>ee</p>"  # 45 bytes, 12 tokens
    out = trim_html_center(html, "approx4", TokenBudget(9))  # admits 4 blocks
    assert out == "<p>aa</p><p>bb</p><p>dd</p><p>ee</p>"


def test_trim_html_degenerate_budget():
    with pytest.raises(BudgetUnreachable):
        trim_html_center("plain words with no elements " * 4, "approx4", TokenBudget(1))
    # fully emptied body that fits is returned rather than raising
    out = trim_html_center("<p>aaaaaaaaaaaaaaaaaaaa</p>", "approx4", TokenBudget(1))
    assert out == ""


def test_trim_html_fast_path_matches_generic():
    register_tokenizer("approx4-generic",
                       lambda text: math.ceil(len(text.encode("utf-8")) / 4))
    rng = random.Random(23)
    for _ in range(25):
        html = random_html(rng, rng.randint(200, 8_000))
        limit = rng.randint(8, 400)
        fast = _run(trim_html_center, html, "approx4", TokenBudget(limit))
        slow = _run(trim_html_center, html, "approx4-generic", TokenBudget(limit))
        assert fast == slow


def _run(fn, text, tokenizer, budget):
    try:
        return fn(text, tokenizer, budget)
    except BudgetUnreachable:
        return BudgetUnreachable


# ----------------------------------------------------- trim_plain_middle

def test_trim_plain_unchanged_when_within_budget():
    text = "a\nb\nc"
    assert trim_plain_middle(text, "approx4", TokenBudget(100)) == text


def test_trim_plain_removes_middle_line_first():
    text = "\n".join(ch * 20 for ch in "abcde")  # 104 bytes -> 26 tokens
    out = trim_plain_middle(text, "approx4", TokenBudget(23))
    assert out.split("\n") == ["a" * 20, "b" * 20, "[...]", "d" * 20, "e" * 20]


def test_trim_plain_keeps_first_and_last_lines_longest():
    text = "\n".join(f"line-{i:02d}-{'x' * 30}" for i in range(9))
    out = trim_plain_middle(text, "approx4", TokenBudget(30))
    lines = out.split("\n")
    assert lines[0].startswith("line-00")
    assert lines[-1].startswith("line-08")
    assert lines.count("[...]") == 1


def test_trim_plain_degenerate_budget():
    with pytest.raises(BudgetUnreachable):
        trim_plain_middle("x" * 100, "approx4", TokenBudget(1))
    # marker alone fits a 2-token budget
    assert trim_plain_middle("x" * 100, "approx4", TokenBudget(2)) == "[...]"


def _naive_trim_plain(text, limit, marker="[...]"):
    """Independent transcription of: repeatedly delete line index n//2."""
    def count(s):
        return math.ceil(len(s.encode("utf-8")) / 4)
    if count(text) <= limit:
        return text
    cur = text.split("\n")
    pos = len(cur) // 2
    del cur[pos]
    while True:
        candidate = "\n".join(cur[:pos] + [marker] + cur[pos:])
        if count(candidate) <= limit:
            return candidate
        if not cur:
            return BudgetUnreachable
        middle = len(cur) // 2
        del cur[middle]
        if middle < pos:
            pos -= 1


def test_trim_plain_matches_naive_simulation():
    rng = random.Random(31)
    for _ in range(150):
        text = random_plain_lines(rng, rng.randint(10, 4_000))
        limit = rng.randint(2, 300)
        got = _run(trim_plain_middle, text, "approx4", TokenBudget(limit))
        want = _naive_trim_plain(text, limit)
        assert got == want


def test_trim_plain_fast_path_matches_generic():
    register_tokenizer("approx4-generic",
                       lambda text: math.ceil(len(text.encode("utf-8")) / 4))
    rng = random.Random(37)
    for _ in range(40):
        text = random_plain_lines(rng, rng.randint(10, 3_000))
        limit = rng.randint(2, 200)
        fast = _run(trim_plain_middle, text, "approx4", TokenBudget(limit))
        slow = _run(trim_plain_middle, text, "approx4-generic", TokenBudget(limit))
        assert fast == slow


# ------------------------------------------------------------- simplify

def _email(body, headers=None):
    headers = headers or (HeaderField("From", "a@b.example", "a@b.example"),
                          HeaderField("Subject", "note", "note"))
    return ParsedEmail(headers=tuple(headers), body=body)


def test_simplify_early_stop_is_byte_identical():
    email = _email(BodyPart("multipart/alternative", "", "", children=(
        _leaf("text/plain", "short plain"), _leaf("text/html", "<p>short html</p>"))))
    out = simplify(email, "approx4", TokenBudget(3000))
    assert out.reduction_log == ()
    assert out.as_text() == (serialize_headers(email) + "\n\n"
                             + "short plain\n\n<p>short html</p>")
    assert out.body_kind == "html"


def test_simplify_organize_step_alone_can_suffice():
    big_plain = "word " * 2000          # ~10000 bytes
    small_html = "<p>" + "h" * 100 + "</p>"
    email = _email(BodyPart("multipart/alternative", "", "", children=(
        _leaf("text/plain", big_plain), _leaf("text/html", small_html))))
    out = simplify(email, "approx4", TokenBudget(200))
    assert out.reduction_log == ("organize_multipart",)
    assert out.body_text == small_html
    assert out.body_kind == "html"


def test_simplify_prune_step_logged():
    noisy_html = ("<style>" + "s" * 3000 + "</style>"
                  + "<div class='x'><p>" + "t" * 200 + "</p></div>")
    email = _email(_leaf("text/html", noisy_html))
    out = simplify(email, "approx4", TokenBudget(150))
    assert out.reduction_log == ("organize_multipart", "prune_html")
    assert out.body_text.startswith("<div")


def test_simplify_html_trim_logged_and_compliant():
    html = "<div>" + "".join(f"<p>{'x' * 120}</p>" for _ in range(40)) + "</div>"
    email = _email(_leaf("text/html", html))
    budget = TokenBudget(400)
    out = simplify(email, "approx4", budget)
    assert out.reduction_log == ("organize_multipart", "prune_html", "trim_html_center")
    assert count_tokens(out.as_text(), "approx4") <= budget.limit


def test_simplify_plain_trim_logged_and_marked():
    text = "\n".join(f"line {i} {'y' * 60}" for i in range(60))
    email = _email(_leaf("text/plain", text))
    out = simplify(email, "approx4", TokenBudget(300))
    assert out.reduction_log == ("organize_multipart", "trim_plain_middle")
    assert "[...]" in out.body_text
    assert count_tokens(out.as_text(), "approx4") <= 300


def test_simplify_custom_elision_marker():
    text = "\n".join(f"line {i} {'y' * 60}" for i in range(60))
    email = _email(_leaf("text/plain", text))
    out = simplify(email, "approx4", TokenBudget(300), elision_marker="<<cut>>")
    assert "<<cut>>" in out.body_text
    assert "[...]" not in out.body_text


def test_simplify_pathological_html_fits_default_budget():
    html = random_html(random.Random(41), 100_000)
    email = _email(_leaf("text/html", html))
    out = simplify(email, "approx4", TokenBudget(3000))
    assert count_tokens(out.as_text(), "approx4") <= 3000


def test_simplify_headers_over_budget_unreachable():
    headers = (HeaderField("Received", "hop " * 400, "raw"),)
    email = _email(_leaf("text/plain", "body"), headers=headers)
    with pytest.raises(BudgetUnreachable):
        simplify(email, "approx4", TokenBudget(50))


def test_simplify_idempotent_on_rewrapped_output():
    rng = random.Random(43)
    for _ in range(20):
        email = random_parsed_email(rng, max_body_bytes=60_000)
        try:
            out = simplify(email, "approx4", TokenBudget(800))
        except BudgetUnreachable:
            continue
        media = "text/html" if out.body_kind == "html" else "text/plain"
        rewrapped = ParsedEmail(headers=email.headers,
                                body=BodyPart(media, "utf-8", out.body_text))
        again = simplify(rewrapped, "approx4", TokenBudget(800))
        assert again.as_text() == out.as_text()
        assert again.reduction_log == ()


def test_simplify_plain_output_is_prefix_marker_suffix():
    text = "\n".join(f"row {i} {'z' * 40}" for i in range(80))
    email = _email(_leaf("text/plain", text))
    out = simplify(email, "approx4", TokenBudget(200))
    original = text.split("\n")
    got = out.body_text.split("\n")
    cut = got.index("[...]")
    assert got[:cut] == original[:cut]
    assert got[cut + 1:] == original[len(original) - (len(got) - cut - 1):]
