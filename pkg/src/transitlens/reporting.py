"""Report generation over finished runs: analytics files and comparison tables."""

from __future__ import annotations

import json
from typing import Iterable, Optional

from .analytics import (
    full_distribution,
    load_stopwords,
    rank_dissatisfaction,
    word_frequencies,
)
from .config import AppConfig
from .evaluation import (
    SOURCE_HUMAN,
    SOURCE_LLM,
    ComparisonTable,
    HumanScoreStore,
    ItemScore,
    aggregate_scores,
    build_comparison_table,
)
from .orchestrator import RunManifest, RunStore
from .reasoner import ParseStatus
from .taxonomy import Sentiment, TravelMode, load_taxonomy


def collect_item_scores(store: RunStore) -> list[ItemScore]:
    """Per-item scores (human and LLM) for one run, ready for aggregation.

    ParseFailed verdicts carry no scores and are skipped; their effect shows
    up in coverage instead.
    """
    manifest = RunManifest.load(store.manifest_path)
    model = manifest.reasoner_config.get("model_name", "unknown")
    strategy = manifest.strategy
    items = []
    score_store = HumanScoreStore(store.scores_path)
    for score in score_store.scores():
        items.append(
            ItemScore(
                post_id=score.post_id,
                model_name=model,
                strategy=strategy,
                source=SOURCE_HUMAN,
                mode_score=score.mode_score,
                sentiment_score=score.sentiment_score,
            )
        )
    for verdict in store.load_verdicts():
        if verdict.parse_status is ParseStatus.FAILED:
            continue
        items.append(
            ItemScore(
                post_id=verdict.post_id,
                model_name=model,
                strategy=strategy,
                source=SOURCE_LLM,
                mode_score=verdict.mode_score,
                sentiment_score=verdict.sentiment_score,
            )
        )
    return items


def run_coverage(store: RunStore) -> Optional[float]:
    """Fraction of reasoner outputs that parsed (Full or Partial)."""
    outputs = store.load_outputs()
    if not outputs:
        return None
    ok = sum(1 for o in outputs if o.parse_status is not ParseStatus.FAILED)
    return ok / len(outputs)


def comparison_across_runs(stores: Iterable[RunStore], axis: str = "models") -> ComparisonTable:
    """Table 1/2-style comparison built from several runs' score stores."""
    group_by = "model" if axis == "models" else "strategy"
    items = []
    coverage = {}
    for store in stores:
        manifest = RunManifest.load(store.manifest_path)
        run_items = collect_item_scores(store)
        items.extend(run_items)
        key = (
            manifest.reasoner_config.get("model_name", "unknown")
            if group_by == "model"
            else manifest.strategy
        )
        cov = run_coverage(store)
        if cov is not None:
            coverage[key] = cov
    summaries = aggregate_scores(items, group_by=group_by)
    return build_comparison_table(summaries, axis=axis, coverage=coverage)


def _distribution_text(report_dict: dict) -> str:
    lines = [f"total posts: {report_dict['total']}"]
    lines.append("mode distribution:")
    for mode, entry in report_dict["per_mode"].items():
        lines.append(f"  {mode}: {entry['count']} ({entry['proportion']:.1%})")
    lines.append(
        "NA split: {0} by content, {1} by parse failure".format(
            report_dict["na_from_content"], report_dict["na_from_parse_failures"]
        )
    )
    lines.append("sentiment by mode:")
    for mode, sentiments in report_dict["per_mode_sentiment"].items():
        mix = ", ".join(
            f"{s} {entry['proportion']:.1%}" for s, entry in sentiments.items()
        )
        lines.append(f"  {mode}: {mix}")
    return "\n".join(lines)


def write_run_reports(store: RunStore, config: Optional[AppConfig] = None) -> dict:
    """Write analytics + evaluation report files for one run; returns paths."""
    config = config or AppConfig()
    taxonomy = load_taxonomy(config.taxonomy_path)
    stopwords = load_stopwords(config.stopwords_path)
    outputs = store.load_outputs()
    posts = {p.post_id: p for p in store.load_clean_posts()}
    store.reports_dir.mkdir(parents=True, exist_ok=True)
    paths = {}

    distribution = full_distribution(outputs).to_dict()
    dist_json = store.reports_dir / "distribution.json"
    dist_json.write_text(json.dumps(distribution, indent=1), "utf-8")
    dist_txt = store.reports_dir / "distribution.txt"
    dist_txt.write_text(_distribution_text(distribution) + "\n", "utf-8")
    paths["distribution"] = dist_json

    rankings = {}
    for mode in TravelMode:
        if mode is TravelMode.NA:
            continue
        has_negative = any(
            o.mode is mode and o.sentiment is Sentiment.NEGATIVE for o in outputs
        )
        if not has_negative:
            continue
        rankings[mode.value] = rank_dissatisfaction(outputs, mode, taxonomy).to_dict()
    reasons_path = store.reports_dir / "dissatisfaction_reasons.json"
    reasons_path.write_text(json.dumps(rankings, indent=1), "utf-8")
    paths["reasons"] = reasons_path

    posts_by_mode = {}
    for output in outputs:
        post = posts.get(output.post_id)
        if post is not None:
            posts_by_mode.setdefault(output.mode, []).append(post)
    tables = word_frequencies(posts_by_mode, stopwords, top_n=config.top_n_words)
    words_path = store.reports_dir / "word_frequencies.json"
    words_path.write_text(
        json.dumps(
            {mode.value: [[w, c] for w, c in rows] for mode, rows in tables.items()},
            indent=1,
        ),
        "utf-8",
    )
    paths["word_frequencies"] = words_path

    summaries = aggregate_scores(collect_item_scores(store), group_by="model")
    summary_path = store.reports_dir / "evaluation_summary.json"
    summary_path.write_text(
        json.dumps([s.to_dict() for s in summaries], indent=1), "utf-8"
    )
    paths["evaluation_summary"] = summary_path
    return paths
