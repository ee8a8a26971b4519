"""Human scores, verifier scores, and the model/strategy comparison tables."""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Iterable, Optional

logger = logging.getLogger(__name__)

SOURCE_HUMAN = "Human"
SOURCE_LLM = "LLM"


class ScoreRejection(ValueError):
    """A submitted score violated the store contract (range, unknown post)."""


def _check_score(value: float, name: str) -> float:
    value = float(value)
    if not 0.0 <= value <= 1.0:
        raise ScoreRejection(f"{name} must be within [0, 1], got {value}")
    return value


@dataclass(frozen=True)
class HumanScore:
    post_id: str
    evaluator_id: str
    mode_score: float
    sentiment_score: float
    submitted_at: datetime

    def __post_init__(self):
        _check_score(self.mode_score, "mode_score")
        _check_score(self.sentiment_score, "sentiment_score")
        if not self.post_id:
            raise ScoreRejection("post_id must be non-empty")
        if not self.evaluator_id:
            raise ScoreRejection("evaluator_id must be non-empty")

    def to_dict(self) -> dict:
        return {
            "post_id": self.post_id,
            "evaluator_id": self.evaluator_id,
            "mode_score": self.mode_score,
            "sentiment_score": self.sentiment_score,
            "submitted_at": self.submitted_at.isoformat(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "HumanScore":
        return cls(
            post_id=data["post_id"],
            evaluator_id=data["evaluator_id"],
            mode_score=data["mode_score"],
            sentiment_score=data["sentiment_score"],
            submitted_at=datetime.fromisoformat(data["submitted_at"]),
        )


class HumanScoreStore:
    """Append-only JSON Lines score log with latest-wins semantics.

    A resubmission by the same (post, evaluator) pair supersedes the earlier
    record; the append log keeps the full history and compact() writes a
    latest-only snapshot next to it.
    """

    def __init__(self, path, known_post_ids: Optional[set] = None):
        self.path = Path(path)
        self.known_post_ids = set(known_post_ids) if known_post_ids is not None else None
        self._latest: dict[tuple[str, str], HumanScore] = {}
        if self.path.exists():
            with open(self.path, encoding="utf-8") as fh:
                for line in fh:
                    if line.strip():
                        score = HumanScore.from_dict(json.loads(line))
                        self._latest[(score.post_id, score.evaluator_id)] = score

    def record(self, score: HumanScore) -> bool:
        """Persist a score; returns True when it superseded an earlier one."""
        if self.known_post_ids is not None and score.post_id not in self.known_post_ids:
            raise ScoreRejection(f"unknown post_id {score.post_id!r}")
        key = (score.post_id, score.evaluator_id)
        superseded = key in self._latest
        if superseded:
            logger.info(
                "score for post %s by evaluator %s superseded", score.post_id, score.evaluator_id
            )
        self.path.parent.mkdir(parents=True, exist_ok=True)
        with open(self.path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(score.to_dict()) + "\n")
        self._latest[key] = score
        return superseded

    def scores(self) -> list[HumanScore]:
        return list(self._latest.values())

    def scored_post_ids(self, evaluator_id: str) -> set:
        return {pid for (pid, ev) in self._latest if ev == evaluator_id}

    def evaluator_ids(self) -> set:
        return {ev for (_pid, ev) in self._latest}

    def compact(self) -> Path:
        snapshot = self.path.with_suffix(self.path.suffix + ".snapshot")
        with open(snapshot, "w", encoding="utf-8") as fh:
            for key in sorted(self._latest):
                fh.write(json.dumps(self._latest[key].to_dict()) + "\n")
        return snapshot


def record_human_score(score: HumanScore, store: HumanScoreStore) -> bool:
    """Validate and persist one human score; see HumanScoreStore.record."""
    return store.record(score)


@dataclass(frozen=True)
class ItemScore:
    """One per-item score with the grouping axes attached."""

    post_id: str
    model_name: str
    strategy: str
    source: str  # SOURCE_HUMAN or SOURCE_LLM
    mode_score: float
    sentiment_score: float


@dataclass(frozen=True)
class EvaluationSummary:
    group_key: str
    source: str
    avg_mode_score: float
    avg_sentiment_score: float
    n_items: int

    def to_dict(self) -> dict:
        return {
            "group_key": self.group_key,
            "source": self.source,
            "avg_mode_score": self.avg_mode_score,
            "avg_sentiment_score": self.avg_sentiment_score,
            "n_items": self.n_items,
        }


def aggregate_scores(items: Iterable[ItemScore], group_by: str = "model") -> list[EvaluationSummary]:
    """Mean scores per (group, source), with equal post weighting.

    Multiple scores for one post (several human evaluators) are averaged
    per post first, then across posts. Sums use math.fsum so the result is
    exactly permutation-invariant.
    """
    if group_by not in ("model", "strategy"):
        raise ValueError("group_by must be 'model' or 'strategy'")
    per_post: dict[tuple[str, str], dict[str, list[tuple[float, float]]]] = {}
    for item in items:
        key = item.model_name if group_by == "model" else item.strategy
        bucket = per_post.setdefault((key, item.source), {})
        bucket.setdefault(item.post_id, []).append((item.mode_score, item.sentiment_score))

    summaries = []
    for (group_key, source), posts in per_post.items():
        post_mode_means = []
        post_sent_means = []
        for scores in posts.values():
            n = len(scores)
            post_mode_means.append(math.fsum(m for m, _ in scores) / n)
            post_sent_means.append(math.fsum(s for _, s in scores) / n)
        n_posts = len(posts)
        summaries.append(
            EvaluationSummary(
                group_key=group_key,
                source=source,
                avg_mode_score=math.fsum(post_mode_means) / n_posts,
                avg_sentiment_score=math.fsum(post_sent_means) / n_posts,
                n_items=n_posts,
            )
        )
    summaries.sort(key=lambda s: (s.group_key, s.source))
    return summaries


_COLUMNS = (
    (SOURCE_HUMAN, "avg_mode_score"),
    (SOURCE_HUMAN, "avg_sentiment_score"),
    (SOURCE_LLM, "avg_mode_score"),
    (SOURCE_LLM, "avg_sentiment_score"),
)
_COLUMN_NAMES = ("human_mode", "human_sentiment", "llm_mode", "llm_sentiment")


@dataclass
class TableRow:
    key: str
    cells: dict = field(default_factory=dict)  # column name -> {value, display, best, n_items}
    coverage: Optional[float] = None


@dataclass
class ComparisonTable:
    axis: str
    rows: list

    def to_dict(self) -> dict:
        return {
            "axis": self.axis,
            "columns": list(_COLUMN_NAMES),
            "rows": [
                {"key": row.key, "cells": row.cells, "coverage": row.coverage}
                for row in self.rows
            ],
        }

    def to_text(self) -> str:
        header_top = "Rows: " + self.axis
        lines = [
            header_top,
            "key | human_mode human_sentiment | llm_mode llm_sentiment",
        ]
        for row in self.rows:
            rendered = []
            for name in _COLUMN_NAMES:
                cell = row.cells.get(name)
                if cell is None:
                    rendered.append("-")
                else:
                    rendered.append(cell["display"] + ("*" if cell["best"] else ""))
            line = f"{row.key} | {rendered[0]} {rendered[1]} | {rendered[2]} {rendered[3]}"
            if row.coverage is not None:
                line += f"  (coverage {row.coverage:.0%})"
            lines.append(line)
        lines.append("* best in column")
        return "\n".join(lines)


def build_comparison_table(
    summaries: Iterable[EvaluationSummary],
    axis: str = "models",
    coverage: Optional[dict] = None,
) -> ComparisonTable:
    """Arrange summaries into the four-column comparison layout.

    Rows are axis values; columns pair human and LLM verification scores for
    mode and sentiment, each at two decimals. The best value per column is
    marked; ties mark every tied row.
    """
    if axis not in ("models", "strategies"):
        raise ValueError("axis must be 'models' or 'strategies'")
    by_key: dict[str, dict[str, EvaluationSummary]] = {}
    for summary in summaries:
        by_key.setdefault(summary.group_key, {})[summary.source] = summary
    if not by_key:
        raise ValueError("no summaries to tabulate")

    rows = []
    for key in by_key:
        row = TableRow(key=key, coverage=(coverage or {}).get(key))
        for name, (source, attr) in zip(_COLUMN_NAMES, _COLUMNS):
            summary = by_key[key].get(source)
            if summary is None:
                row.cells[name] = None
            else:
                value = getattr(summary, attr)
                row.cells[name] = {
                    "value": value,
                    "display": f"{value:.2f}",
                    "best": False,
                    "n_items": summary.n_items,
                }
        rows.append(row)

    for name in _COLUMN_NAMES:
        values = [row.cells[name]["value"] for row in rows if row.cells.get(name)]
        if not values:
            continue
        top = max(values)
        for row in rows:
            cell = row.cells.get(name)
            if cell and abs(cell["value"] - top) <= 1e-12:
                cell["best"] = True
    return ComparisonTable(axis=axis, rows=rows)
