"""Corpus-level descriptive analytics over reasoner outputs.

Everything here is a pure tally over immutable snapshots: mode distribution,
sentiment mix per mode, mode share per sentiment, ranked dissatisfaction
reasons, and word-frequency tables for wordcloud rendering elsewhere.
"""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass, field
from importlib import resources
from typing import Iterable, Optional

from .reasoner import ParseStatus, ReasonerOutput
from .taxonomy import ReasonCategory, Sentiment, Taxonomy, TravelMode, default_taxonomy


@dataclass
class DistributionReport:
    total: int = 0
    # mode -> (count, proportion of total)
    per_mode: dict = field(default_factory=dict)
    # NA rows split so NA-by-parse-failure stays distinguishable from NA-by-content
    na_from_parse_failures: int = 0
    na_from_content: int = 0
    # (mode, sentiment) -> (count, proportion within mode)
    per_mode_sentiment: dict = field(default_factory=dict)
    # (sentiment, mode) -> proportion within sentiment
    per_sentiment_mode_share: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        # iterate the enums, not the dict keys, so the JSON key order is stable
        modes_with_sentiment = [
            m for m in TravelMode if any(k[0] is m for k in self.per_mode_sentiment)
        ]
        sentiments_with_share = [
            s for s in Sentiment if any(k[0] is s for k in self.per_sentiment_mode_share)
        ]
        return {
            "total": self.total,
            "per_mode": {
                mode.value: {"count": c, "proportion": p}
                for mode, (c, p) in self.per_mode.items()
            },
            "na_from_parse_failures": self.na_from_parse_failures,
            "na_from_content": self.na_from_content,
            "per_mode_sentiment": {
                mode.value: {
                    sentiment.value: {"count": c, "proportion": p}
                    for (m, sentiment), (c, p) in self.per_mode_sentiment.items()
                    if m is mode
                }
                for mode in modes_with_sentiment
            },
            "per_sentiment_mode_share": {
                sentiment.value: {
                    mode.value: share
                    for (s, mode), share in self.per_sentiment_mode_share.items()
                    if s is sentiment
                }
                for sentiment in sentiments_with_share
            },
        }


def mode_distribution(outputs: Iterable[ReasonerOutput]) -> DistributionReport:
    """Counts and proportions per travel mode, NA included.

    ParseFailed rows default to NA; they are counted but also reported
    separately so NA-by-failure never masquerades as NA-by-content.
    """
    outputs = list(outputs)
    report = DistributionReport(total=len(outputs))
    counts = Counter(o.mode for o in outputs)
    for output in outputs:
        if output.mode is TravelMode.NA:
            if output.parse_status is ParseStatus.FAILED:
                report.na_from_parse_failures += 1
            else:
                report.na_from_content += 1
    for mode in TravelMode:
        count = counts.get(mode, 0)
        proportion = count / report.total if report.total else 0.0
        report.per_mode[mode] = (count, proportion)
    return report


def sentiment_by_mode(outputs: Iterable[ReasonerOutput]) -> DistributionReport:
    """For each mode present, the Positive/Negative/Neutral mix (sums to 1)."""
    outputs = list(outputs)
    report = DistributionReport(total=len(outputs))
    mode_totals = Counter(o.mode for o in outputs)
    pair_counts = Counter((o.mode, o.sentiment) for o in outputs)
    for mode, mode_total in mode_totals.items():
        for sentiment in Sentiment:
            count = pair_counts.get((mode, sentiment), 0)
            report.per_mode_sentiment[(mode, sentiment)] = (count, count / mode_total)
    return report


def mode_share_by_sentiment(outputs: Iterable[ReasonerOutput]) -> DistributionReport:
    """For each sentiment present, the travel-mode shares (sums to 1)."""
    outputs = list(outputs)
    report = DistributionReport(total=len(outputs))
    sentiment_totals = Counter(o.sentiment for o in outputs)
    pair_counts = Counter((o.sentiment, o.mode) for o in outputs)
    for sentiment, sent_total in sentiment_totals.items():
        for mode in TravelMode:
            count = pair_counts.get((sentiment, mode), 0)
            report.per_sentiment_mode_share[(sentiment, mode)] = count / sent_total
    return report


def full_distribution(outputs: Iterable[ReasonerOutput]) -> DistributionReport:
    """All three distribution views over one snapshot."""
    outputs = list(outputs)
    report = mode_distribution(outputs)
    report.per_mode_sentiment = sentiment_by_mode(outputs).per_mode_sentiment
    report.per_sentiment_mode_share = mode_share_by_sentiment(outputs).per_sentiment_mode_share
    return report


@dataclass(frozen=True)
class RankedReason:
    category: ReasonCategory
    count: int
    proportion: float  # among categorized negative posts for this mode


@dataclass
class ReasonRanking:
    mode: TravelMode
    ranked: list
    uncategorized_count: int

    def to_dict(self) -> dict:
        return {
            "mode": self.mode.value,
            "ranked": [
                {
                    "label": r.category.label,
                    "count": r.count,
                    "proportion": r.proportion,
                    "catalog_rank": r.category.rank,
                }
                for r in self.ranked
            ],
            "uncategorized_count": self.uncategorized_count,
        }


def rank_dissatisfaction(
    outputs: Iterable[ReasonerOutput],
    mode: TravelMode,
    taxonomy: Optional[Taxonomy] = None,
) -> ReasonRanking:
    """Rank complaint categories for one mode's negative posts.

    Rationales are put through the keyword categorizer; counts rank
    descending with catalog rank breaking ties, so the ordering is total.
    """
    if mode is TravelMode.NA:
        raise ValueError("rank_dissatisfaction requires a concrete travel mode, got NA")
    taxonomy = taxonomy or default_taxonomy()
    counts: Counter = Counter()
    uncategorized = 0
    for output in outputs:
        if output.mode is not mode or output.sentiment is not Sentiment.NEGATIVE:
            continue
        category = taxonomy.categorize_reason(mode, output.rationale)
        if category is None:
            uncategorized += 1
        else:
            counts[category] += 1
    categorized_total = sum(counts.values())
    ranked = [
        RankedReason(category=cat, count=n, proportion=n / categorized_total)
        for cat, n in sorted(counts.items(), key=lambda kv: (-kv[1], kv[0].rank))
    ]
    return ReasonRanking(mode=mode, ranked=ranked, uncategorized_count=uncategorized)


_TOKEN_RE = re.compile(r"[^0-9A-Za-z]+")


def load_stopwords(path=None) -> set:
    if path is None:
        text = resources.files("transitlens.data").joinpath("stopwords.txt").read_text("utf-8")
    else:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    return {line.strip().lower() for line in text.splitlines() if line.strip()}


def word_frequencies(
    posts_by_mode: dict,
    stopwords: Optional[set] = None,
    top_n: int = 50,
) -> dict:
    """Top tokens per predicted mode for wordcloud rendering.

    Lowercase tokenization on non-alphanumeric boundaries; stopwords and
    tokens shorter than 3 characters are dropped. Ties order alphabetically
    so the tables are stable.
    """
    if stopwords is None:
        stopwords = load_stopwords()
    tables = {}
    for mode, posts in posts_by_mode.items():
        counter: Counter = Counter()
        for post in posts:
            for token in _TOKEN_RE.split(post.clean_text.lower()):
                if len(token) >= 3 and token not in stopwords:
                    counter[token] += 1
        tables[mode] = sorted(counter.items(), key=lambda kv: (-kv[1], kv[0]))[:top_n]
    return tables
