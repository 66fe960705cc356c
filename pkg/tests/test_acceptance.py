"""Acceptance suite: every criterion runs offline at its stated tolerance
and reports one pass/fail line (run with -s to see them when passing)."""

import functools
import json
import random
import time

import pytest

from phishscan.errors import BudgetUnreachable, InvalidScore, RationalesTooLong, Unparseable
from phishscan.evaluation import (
    ConfusionMatrix,
    compute_metrics,
    estimate_cost,
    evaluate_corpus,
    load_dataset,
)
from phishscan.gateway import (
    ProviderProfile,
    RawModelResponse,
    build_function_schema,
    extract_json_fallback,
    parse_structured,
)
from phishscan.ingest import decode_header_value
from phishscan.prompts import NORMAL
from phishscan.simplify import prune_html, simplify
from phishscan.tokens import TokenBudget, count_tokens
from phishscan.verdict import DetectionVerdict, validate_verdict, verdict_from_json, verdict_to_json
from genmail import random_parsed_email
from golden_html import GOLDEN_CASES
from noisy_corpus import NOISY_CASES
from rfc2047_data import DECODE_CASES


def criterion(number, name):
    def decorate(fn):
        @functools.wraps(fn)
        def wrapper(*args, **kwargs):
            try:
                fn(*args, **kwargs)
            except BaseException:
                print(f"ACCEPTANCE {number} FAIL - {name}")
                raise
            print(f"ACCEPTANCE {number} PASS - {name}")
        return wrapper
    return decorate


# (tp, fp, tn, fn) -> printed precision/recall/accuracy percentages
PUBLISHED_RESULT_ROWS = [
    ((1007, 3, 997, 3), 99.70, 99.70, 99.70),
    ((1001, 4, 996, 9), 99.60, 99.11, 99.35),
    ((980, 32, 968, 30), 96.84, 97.03, 96.92),
    ((697, 6, 994, 313), 99.15, 69.01, 84.13),
    ((950, 361, 639, 60), 72.46, 94.06, 79.05),
    ((790, 9, 991, 220), 98.87, 78.22, 88.61),
    ((991, 21, 979, 19), 97.92, 98.12, 98.01),
    ((977, 6, 994, 33), 99.39, 96.73, 98.06),
    ((580, 374, 626, 430), 60.80, 57.43, 60.00),
    ((564, 413, 587, 446), 57.73, 55.84, 57.26),
    ((923, 827, 173, 87), 52.74, 91.39, 54.53),
    ((941, 208, 792, 69), 81.90, 93.17, 86.22),
]


@criterion(1, "metric oracle reproduces every published confusion-matrix row")
def test_criterion_1_metric_oracle():
    start = time.perf_counter()
    for (tp, fp, tn, fn), precision, recall, accuracy in PUBLISHED_RESULT_ROWS:
        metrics = compute_metrics(ConfusionMatrix(tp, fp, tn, fn))
        assert abs(metrics.precision * 100 - precision) <= 0.005
        assert abs(metrics.recall * 100 - recall) <= 0.005
        assert abs(metrics.accuracy * 100 - accuracy) <= 0.005
    assert time.perf_counter() - start < 1.0


@criterion(2, "1,000 randomized emails always simplify into the 3,000-token budget")
def test_criterion_2_budget_property():
    start = time.perf_counter()
    rng = random.Random(2024)
    budget = TokenBudget(3000)
    violations = 0
    for _ in range(1000):
        email = random_parsed_email(rng, max_body_bytes=200_000)
        try:
            out = simplify(email, "approx4", budget)
        except BudgetUnreachable:
            continue  # an allowed outcome, never a silent violation
        if count_tokens(out.as_text(), "approx4") > budget.limit:
            violations += 1
    assert violations == 0
    assert time.perf_counter() - start < 30.0


@criterion(3, "pruning golden suite matches hand-derived outputs byte-for-byte")
def test_criterion_3_pruning_rules():
    assert len(GOLDEN_CASES) >= 20
    for case_id, source, expected in GOLDEN_CASES:
        got = prune_html(source)
        assert got == expected, f"{case_id}: {got!r} != {expected!r}"


@criterion(4, "header decoding matches an independently derived 30-case suite")
def test_criterion_4_decoding():
    assert decode_header_value(
        "=?UTF-8?B?U3ViamVjdDogU2VjdXJpdHkgQWxlcnQh?=") == "Subject: Security Alert!"
    assert len(DECODE_CASES) >= 30
    for raw, expected in DECODE_CASES:
        assert decode_header_value(raw) == expected, raw


@criterion(5, "fallback extraction recovers wrapped verdicts and scores >= 95% on noise")
def test_criterion_5_fallback_extraction():
    # property: any valid five-field object wrapped in prose/fences recovers
    # exactly what structured parsing yields on the bare object
    rng = random.Random(77)
    schema = build_function_schema(NORMAL)
    fillers = ("Sure thing! ", "Analysis follows.\n", "After a close look... ",
               "VERDICT BELOW\n", "resp> ", "")
    tails = (" Hope this helps.", "\nStay safe online.", " -- end of analysis", "")
    recovered = 0
    for i in range(400):
        obj = {
            "is_phishing": rng.random() < 0.5,
            "phishing_score": rng.randint(0, 10),
            "brand_impersonated": rng.choice(["", "Microsoft", "Binance", "La Poste"]),
            "rationales": f"case {i}: " + "evidence " * rng.randint(0, 30),
            "brief_reason": rng.choice(["Spoofing.", "Clean headers.", "Urgency cues."]),
        }
        bare = json.dumps(obj, ensure_ascii=False)
        wrapped = rng.choice(fillers) + (
            f"```json\n{bare}\n```" if rng.random() < 0.5 else bare) + rng.choice(tails)
        expected = parse_structured(
            RawModelResponse(payload=obj, input_tokens=0, output_tokens=0, latency_s=0.0),
            schema)
        if extract_json_fallback(wrapped) == expected:
            recovered += 1
    assert recovered == 400  # 100% recovery

    # hand-built noisy corpus: >= 95% correct
    assert len(NOISY_CASES) == 50
    correct = 0
    for text, expected_flag in NOISY_CASES:
        try:
            got = extract_json_fallback(text).is_phishing
        except Unparseable:
            got = None
        correct += got == expected_flag
    assert correct >= 48, f"only {correct}/50 correct"

    # pure prose stays undecided
    with pytest.raises(Unparseable):
        extract_json_fallback("The weather is nice.")


@criterion(6, "offline end-to-end corpus run is exact and deterministic")
def test_criterion_6_end_to_end(corpus_root):
    start = time.perf_counter()
    profile = ProviderProfile(name="acceptance-mock", endpoint="mock://local",
                              model_id="mock-rules", adapter="mock")
    samples = load_dataset(corpus_root)
    first = evaluate_corpus(samples, profile, NORMAL)
    second = evaluate_corpus(samples, profile, NORMAL)
    assert first.matrix == ConfusionMatrix(tp=5, fp=0, tn=5, fn=0)
    assert compute_metrics(first.matrix).accuracy == 1.0
    assert first.records == second.records
    assert first.histogram == second.histogram
    assert first.cost == second.cost
    assert time.perf_counter() - start < 5.0


@criterion(7, "verdict serialization round-trips and rejects invalid values")
def test_criterion_7_verdict_round_trip():
    rng = random.Random(4242)
    alphabet = "abcdefghij \"'\\\n\téß中"
    def text_or_none():
        if rng.random() < 0.3:
            return None
        return "".join(rng.choice(alphabet) for _ in range(rng.randint(0, 60)))
    for _ in range(1000):
        verdict = DetectionVerdict(
            is_phishing=rng.random() < 0.5,
            phishing_score=None if rng.random() < 0.3 else rng.randint(0, 10),
            brand_impersonated=text_or_none(),
            rationales=text_or_none(),
            brief_reason=text_or_none(),
        )
        assert verdict_from_json(verdict_to_json(verdict)) == verdict

    with pytest.raises(InvalidScore):
        validate_verdict(DetectionVerdict(True, phishing_score=11), NORMAL)
    with pytest.raises(InvalidScore):
        validate_verdict(DetectionVerdict(True, phishing_score=-1), NORMAL)
    with pytest.raises(RationalesTooLong):
        validate_verdict(
            DetectionVerdict(True, 5, rationales=" ".join(["w"] * 501)), NORMAL)


@criterion(8, "cost accounting is exact to the cent and linear")
def test_criterion_8_cost_accounting():
    from test_evaluation import _record

    gpt4_prices = ProviderProfile(name="p4", endpoint="e", model_id="m",
                                  price_per_1k_input=0.03, price_per_1k_output=0.06)
    report = estimate_cost([_record("tp", tokens=(1000, 500))], gpt4_prices)
    assert round(report.total_cost, 2) == 0.06
    assert abs(report.total_cost - 0.06) < 1e-9

    low_prices = ProviderProfile(name="p35", endpoint="e", model_id="m",
                                 price_per_1k_input=0.002, price_per_1k_output=0.002)
    report = estimate_cost([_record("tp", tokens=(1000, 1000))], low_prices)
    assert abs(report.total_cost - 0.004) < 1e-9

    rng = random.Random(9)
    for _ in range(50):
        prices = ProviderProfile(name="px", endpoint="e", model_id="m",
                                 price_per_1k_input=rng.random() / 10,
                                 price_per_1k_output=rng.random() / 10)
        tokens = (rng.randint(0, 10**6), rng.randint(0, 10**6))
        single = estimate_cost([_record("tp", tokens=tokens)], prices)
        double = estimate_cost(
            [_record("tp", tokens=(2 * tokens[0], 2 * tokens[1]))], prices)
        assert double.total_cost == 2 * single.total_cost
