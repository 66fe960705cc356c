"""Corpus evaluation: run the pipeline over labeled .eml files and score it.

Provider failures never silently bias the metrics: failed samples become
error records, excluded from the confusion matrix and reported alongside it.
Per-sample records persist as JSON Lines so reruns can replay cached
verdicts instead of paying for provider calls again.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable

from . import pipeline
from .errors import EmptyDataset, MalformedMessage, PhishscanError
from .gateway import ProviderProfile, RawModelResponse
from .ingest import RawEmail, parse_eml
from .prompts import PromptVariant
from .simplify import DEFAULT_ELISION_MARKER
from .tokens import TokenBudget

logger = logging.getLogger(__name__)

PHISHING = "phishing"
LEGITIMATE = "legitimate"
OUTCOMES = ("tp", "fp", "tn", "fn")
SCORE_BINS = 11  # scores 0..10


@dataclass(frozen=True)
class LabeledSample:
    path: Path
    label: str


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0

    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


@dataclass(frozen=True)
class EvalMetrics:
    """Derived rates; None marks an undefined value (zero denominator)."""

    precision: float | None
    recall: float | None
    accuracy: float | None


@dataclass
class ScoreHistogram:
    """Per-score counts (0..10) split by confusion-matrix outcome."""

    counts: dict[str, list[int]] = field(
        default_factory=lambda: {o: [0] * SCORE_BINS for o in OUTCOMES})
    unscored: int = 0

    def total_scored(self) -> int:
        return sum(sum(bins) for bins in self.counts.values())


@dataclass(frozen=True)
class CostReport:
    total_input_tokens: int
    total_output_tokens: int
    total_cost: float


@dataclass(frozen=True)
class LatencyStats:
    mean: float
    p50: float
    p95: float


@dataclass
class SampleRecord:
    """Everything recorded about one evaluated sample."""

    path: str
    label: str
    content_sha256: str
    profile: str
    model_id: str
    variant: str
    outcome: str  # tp | fp | tn | fn | error
    is_phishing: bool | None = None
    phishing_score: int | None = None
    brand_impersonated: str | None = None
    rationales: str | None = None
    brief_reason: str | None = None
    error: str | None = None
    input_tokens: int = 0
    output_tokens: int = 0
    latency_s: float = 0.0
    attempt_latencies: list[float] = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps(asdict(self), ensure_ascii=False)

    @classmethod
    def from_json(cls, line: str) -> "SampleRecord":
        return cls(**json.loads(line))


@dataclass
class EvalRun:
    matrix: ConfusionMatrix
    histogram: ScoreHistogram
    cost: CostReport
    latency: LatencyStats
    records: list[SampleRecord]


def load_dataset(root: Path | str) -> list[LabeledSample]:
    """Collect labeled .eml files from <root>/phishing and <root>/legitimate.

    Ordering is lexicographic over relative paths; unreadable or unparseable
    files are skipped with a logged reason. Raises EmptyDataset when nothing
    usable remains.
    """
    root = Path(root)
    samples: list[LabeledSample] = []
    for label in (LEGITIMATE, PHISHING):
        subdir = root / label
        if not subdir.is_dir():
            continue
        for path in sorted(subdir.glob("*.eml")):
            try:
                parse_eml(RawEmail(path.read_bytes(), source_path=str(path)))
            except (OSError, ValueError, MalformedMessage) as exc:
                logger.warning("skipping %s: %s", path, exc)
                continue
            samples.append(LabeledSample(path=path, label=label))
    if not samples:
        raise EmptyDataset(f"no usable .eml samples under {root}")
    samples.sort(key=lambda s: str(s.path))
    return samples


def content_hash(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def cache_key(sha256: str, profile: ProviderProfile, variant: PromptVariant) -> tuple:
    return (sha256, profile.name, profile.model_id, variant.kind, variant.base)


def load_record_cache(records_path: Path | str,
                      ) -> dict[tuple, dict]:
    """Map cache keys to previously written record dicts (errors excluded)."""
    cache: dict[tuple, dict] = {}
    path = Path(records_path)
    if not path.is_file():
        return cache
    for line in path.read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        try:
            data = json.loads(line)
        except ValueError:
            continue
        if data.get("outcome") == "error":
            continue
        key = (data.get("content_sha256"), data.get("profile"),
               data.get("model_id"), *_split_variant(data.get("variant", "")))
        cache[key] = data
    return cache


def _split_variant(tag: str) -> tuple[str, str]:
    kind, _, base = tag.partition("+")
    return kind, base or kind


def _variant_tag(variant: PromptVariant) -> str:
    if variant.kind == "embedded_schema" and variant.base != variant.kind:
        return f"{variant.kind}+{variant.base}"
    return variant.kind


def _classify(label: str, predicted: bool) -> str:
    if label == PHISHING:
        return "tp" if predicted else "fn"
    return "fp" if predicted else "tn"


def evaluate_corpus(samples: list[LabeledSample], profile: ProviderProfile,
                    variant: PromptVariant, budget: TokenBudget = TokenBudget(), *,
                    tokenizer: str | None = None,
                    workers: int = 4,
                    dummy_to: str = pipeline.DEFAULT_DUMMY_ADDRESS,
                    header_denylist: tuple[str, ...] = (),
                    keep_attributes: tuple[str, ...] | None = None,
                    elision_marker: str = DEFAULT_ELISION_MARKER,
                    failure_ceiling: float = 1.0,
                    cache: dict[tuple, dict] | None = None,
                    submit_fn: Callable[..., RawModelResponse] | None = None) -> EvalRun:
    """Run the full pipeline over every sample and aggregate the results."""
    if not samples:
        raise EmptyDataset("evaluate_corpus needs at least one sample")
    cache = cache or {}

    def evaluate_one(sample: LabeledSample) -> SampleRecord:
        data = sample.path.read_bytes()
        sha = content_hash(data)
        record = SampleRecord(
            path=str(sample.path), label=sample.label, content_sha256=sha,
            profile=profile.name, model_id=profile.model_id,
            variant=_variant_tag(variant), outcome="error",
        )
        cached = cache.get(cache_key(sha, profile, variant))
        if cached is not None:
            return SampleRecord(**{**cached,
                                   "path": str(sample.path), "label": sample.label})
        try:
            result = pipeline.run_detection(
                RawEmail(data, source_path=str(sample.path)), profile, variant,
                budget, tokenizer=tokenizer, dummy_to=dummy_to,
                header_denylist=header_denylist, keep_attributes=keep_attributes,
                elision_marker=elision_marker, submit_fn=submit_fn)
        except (PhishscanError, ValueError) as exc:
            record.error = f"{type(exc).__name__}: {exc}"
            logger.warning("sample %s failed: %s", sample.path, record.error)
            return record
        verdict = result.verdict
        record.outcome = _classify(sample.label, verdict.is_phishing)
        record.is_phishing = verdict.is_phishing
        record.phishing_score = verdict.phishing_score
        record.brand_impersonated = verdict.brand_impersonated
        record.rationales = verdict.rationales
        record.brief_reason = verdict.brief_reason
        record.input_tokens = result.response.input_tokens
        record.output_tokens = result.response.output_tokens
        record.latency_s = result.response.latency_s
        record.attempt_latencies = list(result.response.attempt_latencies)
        return record

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(evaluate_one, samples))
    else:
        records = [evaluate_one(sample) for sample in samples]

    errors = sum(1 for r in records if r.outcome == "error")
    if errors / len(records) > failure_ceiling:
        raise PhishscanError(
            f"failure rate {errors}/{len(records)} exceeds ceiling {failure_ceiling}")

    tallies = {o: 0 for o in OUTCOMES}
    for record in records:
        if record.outcome in tallies:
            tallies[record.outcome] += 1
    matrix = ConfusionMatrix(**tallies)
    return EvalRun(
        matrix=matrix,
        histogram=histogram_scores(records),
        cost=estimate_cost(records, profile),
        latency=latency_stats(records),
        records=records,
    )


def _ratio(numerator: int, denominator: int) -> float | None:
    if denominator == 0:
        return None
    return numerator / denominator


def compute_metrics(matrix: ConfusionMatrix) -> EvalMetrics:
    """precision = tp/(tp+fp); recall = tp/(tp+fn); accuracy over everything."""
    return EvalMetrics(
        precision=_ratio(matrix.tp, matrix.tp + matrix.fp),
        recall=_ratio(matrix.tp, matrix.tp + matrix.fn),
        accuracy=_ratio(matrix.tp + matrix.tn, matrix.total()),
    )


def histogram_scores(records: list[SampleRecord]) -> ScoreHistogram:
    """11 bins x 4 outcome classes; score-less verdicts counted separately."""
    hist = ScoreHistogram()
    for record in records:
        if record.outcome not in OUTCOMES:
            continue
        if record.phishing_score is None:
            hist.unscored += 1
        else:
            hist.counts[record.outcome][record.phishing_score] += 1
    return hist


def estimate_cost(records: list[SampleRecord], profile: ProviderProfile) -> CostReport:
    """Linear token-price accounting in USD per 1K tokens."""
    total_in = sum(r.input_tokens for r in records)
    total_out = sum(r.output_tokens for r in records)
    cost = (total_in * profile.price_per_1k_input
            + total_out * profile.price_per_1k_output) / 1000
    return CostReport(total_input_tokens=total_in, total_output_tokens=total_out,
                      total_cost=cost)


def latency_stats(records: list[SampleRecord]) -> LatencyStats:
    """Mean/p50/p95 of end-to-end latencies over non-error records."""
    latencies = sorted(r.latency_s for r in records if r.outcome in OUTCOMES)
    if not latencies:
        return LatencyStats(mean=0.0, p50=0.0, p95=0.0)
    return LatencyStats(
        mean=sum(latencies) / len(latencies),
        p50=_percentile(latencies, 0.50),
        p95=_percentile(latencies, 0.95),
    )


def _percentile(sorted_values: list[float], q: float) -> float:
    index = max(0, math.ceil(q * len(sorted_values)) - 1)
    return sorted_values[index]


def histogram_to_csv(hist: ScoreHistogram) -> str:
    """Delimited bin-by-class counts, one row per score."""
    lines = ["score,tp,fp,tn,fn"]
    for score in range(SCORE_BINS):
        row = [str(score)] + [str(hist.counts[o][score]) for o in OUTCOMES]
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def recount_matrix(records: list[SampleRecord]) -> ConfusionMatrix:
    """Independent recount of outcomes from labels and predictions."""
    tallies = {o: 0 for o in OUTCOMES}
    for record in records:
        if record.is_phishing is None or record.outcome == "error":
            continue
        tallies[_classify(record.label, record.is_phishing)] += 1
    return ConfusionMatrix(**tallies)
