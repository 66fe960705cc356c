"""Command line interface wiring the pipeline together.

Two subcommands: ``scan`` analyzes one .eml file and prints the verdict
JSON; ``evaluate`` runs a labeled corpus and writes metrics, records,
histogram data and a rendered histogram figure. Flag values override the
config file, which overrides built-in defaults.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import tempfile
from dataclasses import dataclass
from pathlib import Path

from . import evaluation, pipeline, plots
from .errors import PhishscanError
from .gateway import ProviderProfile, profile_from_dict
from .ingest import RawEmail
from .prompts import PromptVariant, select_variant
from .simplify import DEFAULT_ELISION_MARKER
from .tokens import DEFAULT_TOKEN_LIMIT, DEFAULT_TOKENIZER, TokenBudget
from .verdict import verdict_to_json

EXIT_LEGITIMATE = 0
EXIT_ERROR = 1
EXIT_PHISHING = 2

BUILTIN_PROFILES = {
    "mock": ProviderProfile(
        name="mock", endpoint="mock://local", model_id="mock-keyword-rules",
        adapter="mock"),
    "openai": ProviderProfile(
        name="openai", endpoint="https://api.openai.com/v1/chat/completions",
        model_id="gpt-4", credential_env="OPENAI_API_KEY",
        price_per_1k_input=0.03, price_per_1k_output=0.06),
}

CONFIG_DEFAULTS = {
    "profile": "mock",
    "prompt": "normal",
    "token_limit": DEFAULT_TOKEN_LIMIT,
    "tokenizer": DEFAULT_TOKENIZER,
    "workers": 4,
    "dummy_to": pipeline.DEFAULT_DUMMY_ADDRESS,
    "elision_marker": DEFAULT_ELISION_MARKER,
    "keep_attributes": None,
    "header_denylist": [],
}

CONFIG_HELP = """\
config file (JSON object), every key optional:
  profile          provider profile name to use (default: mock)
  prompt           prompt flavor, normal or simple (default: normal)
  token_limit      token budget for the serialized email (default: 3000)
  tokenizer        registered token counting scheme (default: approx4)
  workers          parallel workers for evaluate (default: 4)
  dummy_to         address substituted for all recipients
  elision_marker   line inserted where plain-text content was removed
  keep_attributes  HTML attribute allowlist override (list of names)
  header_denylist  extra header glob patterns to drop (list)
  profiles         list of provider profile objects; fields: name, endpoint,
                   model_id, supports_structured_output, tokenizer,
                   price_per_1k_input, price_per_1k_output, max_in_flight,
                   timeout_s, credential_env, adapter, options

credentials are read from the environment variable named by the selected
profile's credential_env; they never live in the config file.
"""


@dataclass
class RunConfig:
    profile: ProviderProfile
    variant: PromptVariant
    budget: TokenBudget
    tokenizer: str
    workers: int
    dummy_to: str
    elision_marker: str
    keep_attributes: tuple[str, ...] | None
    header_denylist: tuple[str, ...]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="phishscan",
        description="Phishing email detection through LLM analysis.",
        epilog=CONFIG_HELP,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", required=True,
                                help="available commands")

    scan = sub.add_parser(
        "scan", help="analyze one .eml file and print the verdict JSON",
        description="Analyze one .eml file; exit 0 legitimate, 2 phishing, 1 error.")
    _add_common(scan)
    scan.add_argument("path", help="path to the .eml file to analyze")

    ev = sub.add_parser(
        "evaluate", help="run a labeled corpus and write evaluation artifacts",
        description="Evaluate <root>/phishing/*.eml and <root>/legitimate/*.eml; "
                    "writes metrics.json, records.jsonl, histogram.csv, cost.json "
                    "and histogram.png, then prints one 'TP FP TN FN precision "
                    "recall accuracy' row.")
    _add_common(ev)
    ev.add_argument("root", help="dataset root with phishing/ and legitimate/ subdirectories")
    ev.add_argument("--out", default="out", help="output directory for artifacts (default: out)")
    ev.add_argument("--workers", type=int, default=None,
                    help="parallel evaluation workers (default: 4)")
    ev.add_argument("--no-plot", action="store_true",
                    help="skip rendering histogram.png")
    ev.add_argument("--fresh", action="store_true",
                    help="ignore cached verdicts from a previous records.jsonl")
    return parser


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", default=None, help="path to a JSON config file")
    parser.add_argument("--profile", default=None,
                        help="provider profile name (default: mock)")
    parser.add_argument("--prompt", choices=("normal", "simple"), default=None,
                        help="prompt flavor (default: normal)")
    parser.add_argument("--token-limit", type=int, default=None,
                        help="token budget for the serialized email (default: 3000)")
    parser.add_argument("--dummy-to", default=None,
                        help="dummy address substituted for all recipients")


def _load_config_file(path: str | None) -> dict:
    if not path:
        return {}
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise ValueError("config file must hold a JSON object")
    unknown = set(data) - set(CONFIG_DEFAULTS) - {"profiles"}
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    return data


def _resolve_config(args: argparse.Namespace) -> RunConfig:
    file_config = _load_config_file(args.config)
    merged = dict(CONFIG_DEFAULTS)
    merged.update({k: v for k, v in file_config.items() if k != "profiles"})
    for key, flag in (("profile", "profile"), ("prompt", "prompt"),
                      ("token_limit", "token_limit"), ("dummy_to", "dummy_to"),
                      ("workers", "workers")):
        value = getattr(args, flag, None)
        if value is not None:
            merged[key] = value

    profiles = dict(BUILTIN_PROFILES)
    for entry in file_config.get("profiles", []):
        profile = profile_from_dict(entry)
        profiles[profile.name] = profile
    name = merged["profile"]
    if name not in profiles:
        raise PhishscanError(f"unknown provider profile {name!r}; "
                             f"known: {sorted(profiles)}")
    profile = profiles[name]

    keep = merged["keep_attributes"]
    return RunConfig(
        profile=profile,
        variant=select_variant(merged["prompt"], profile.supports_structured_output),
        budget=TokenBudget(int(merged["token_limit"])),
        tokenizer=merged["tokenizer"],
        workers=int(merged["workers"]),
        dummy_to=merged["dummy_to"],
        elision_marker=merged["elision_marker"],
        keep_attributes=tuple(keep) if keep is not None else None,
        header_denylist=tuple(merged["header_denylist"]),
    )


def _cmd_scan(args: argparse.Namespace) -> int:
    config = _resolve_config(args)
    try:
        data = Path(args.path).read_bytes()
    except OSError as exc:
        print(f"phishscan: cannot read {args.path}: {exc}", file=sys.stderr)
        return EXIT_ERROR
    result = pipeline.run_detection(
        RawEmail(data, source_path=args.path), config.profile, config.variant,
        config.budget, tokenizer=config.tokenizer, dummy_to=config.dummy_to,
        header_denylist=config.header_denylist,
        keep_attributes=config.keep_attributes,
        elision_marker=config.elision_marker)
    print(verdict_to_json(result.verdict))
    return EXIT_PHISHING if result.verdict.is_phishing else EXIT_LEGITIMATE


def _format_pct(value: float | None) -> str:
    return "n/a" if value is None else f"{value:.2%}"


def format_result_row(matrix: evaluation.ConfusionMatrix,
                      metrics: evaluation.EvalMetrics) -> str:
    """One summary row: TP FP TN FN precision recall accuracy."""
    return (f"{matrix.tp} {matrix.fp} {matrix.tn} {matrix.fn} "
            f"{_format_pct(metrics.precision)} {_format_pct(metrics.recall)} "
            f"{_format_pct(metrics.accuracy)}")


def _write_atomic(path: Path, text: str) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.chmod(tmp, 0o644)  # mkstemp defaults to 0600
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _cmd_evaluate(args: argparse.Namespace) -> int:
    config = _resolve_config(args)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    samples = evaluation.load_dataset(args.root)
    records_path = out_dir / "records.jsonl"
    cache = {} if args.fresh else evaluation.load_record_cache(records_path)

    run = evaluation.evaluate_corpus(
        samples, config.profile, config.variant, config.budget,
        tokenizer=config.tokenizer, workers=config.workers,
        dummy_to=config.dummy_to, header_denylist=config.header_denylist,
        keep_attributes=config.keep_attributes,
        elision_marker=config.elision_marker, cache=cache)
    metrics = evaluation.compute_metrics(run.matrix)

    errors = sum(1 for r in run.records if r.outcome == "error")
    _write_atomic(records_path, "".join(r.to_json() + "\n" for r in run.records))
    _write_atomic(out_dir / "metrics.json", json.dumps({
        "tp": run.matrix.tp, "fp": run.matrix.fp,
        "tn": run.matrix.tn, "fn": run.matrix.fn,
        "evaluated": run.matrix.total(), "errors": errors,
        "precision": metrics.precision, "recall": metrics.recall,
        "accuracy": metrics.accuracy,
        "unscored_verdicts": run.histogram.unscored,
        "latency": {"mean_s": run.latency.mean, "p50_s": run.latency.p50,
                    "p95_s": run.latency.p95},
    }, indent=2) + "\n")
    _write_atomic(out_dir / "histogram.csv", evaluation.histogram_to_csv(run.histogram))
    _write_atomic(out_dir / "cost.json", json.dumps({
        "total_input_tokens": run.cost.total_input_tokens,
        "total_output_tokens": run.cost.total_output_tokens,
        "total_cost_usd": run.cost.total_cost,
        "price_per_1k_input": config.profile.price_per_1k_input,
        "price_per_1k_output": config.profile.price_per_1k_output,
    }, indent=2) + "\n")
    if not args.no_plot:
        fd, tmp = tempfile.mkstemp(dir=out_dir, suffix=".png")
        os.close(fd)
        plots.render_score_histogram(run.histogram, tmp)
        os.chmod(tmp, 0o644)
        os.replace(tmp, out_dir / "histogram.png")

    if errors:
        print(f"phishscan: {errors} sample(s) failed and were excluded "
              f"from the matrix; see records.jsonl", file=sys.stderr)
    print(format_result_row(run.matrix, metrics))
    return 0


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "scan":
            return _cmd_scan(args)
        return _cmd_evaluate(args)
    except (PhishscanError, ValueError, OSError) as exc:
        print(f"phishscan: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
