"""Ingestion, preprocessing and filtering of raw social-media posts."""

from __future__ import annotations

import csv
import json
import re
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Optional


@dataclass(frozen=True)
class RawPost:
    post_id: str
    user_id: str
    timestamp: datetime
    text: str
    keyword_source: Optional[str] = None


@dataclass(frozen=True)
class CleanPost:
    post_id: str
    clean_text: str
    original_length: int
    removed_elements: tuple[str, ...] = ()


@dataclass(frozen=True)
class RowRejection:
    row_number: int
    reason: str


@dataclass
class LoadResult:
    posts: list[RawPost] = field(default_factory=list)
    rejections: list[RowRejection] = field(default_factory=list)

    @property
    def total_rows(self) -> int:
        return len(self.posts) + len(self.rejections)


class CorpusError(Exception):
    """Fatal ingestion problem (unreadable file, unknown format)."""


class EmptyAfterCleaning(Exception):
    """Post text vanished entirely during preprocessing; excluded from classification."""

    def __init__(self, post_id: str):
        super().__init__(f"post {post_id} is empty after cleaning")
        self.post_id = post_id


_FIELDS = ("post_id", "user_id", "timestamp", "text", "keyword_source")


def _parse_timestamp(value: str) -> datetime:
    ts = datetime.fromisoformat(value.replace("Z", "+00:00"))
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc)


def _row_to_post(row: dict, row_number: int) -> tuple[Optional[RawPost], Optional[RowRejection]]:
    post_id = (row.get("post_id") or "").strip()
    text = row.get("text") or ""
    if not post_id:
        return None, RowRejection(row_number, "missing post_id")
    if not text.strip():
        return None, RowRejection(row_number, "missing text")
    try:
        ts = _parse_timestamp(str(row.get("timestamp") or "1970-01-01T00:00:00+00:00"))
    except ValueError:
        return None, RowRejection(row_number, f"bad timestamp {row.get('timestamp')!r}")
    keyword_source = row.get("keyword_source") or None
    return RawPost(post_id, str(row.get("user_id") or ""), ts, text, keyword_source), None


def load_corpus(path, format: Optional[str] = None) -> LoadResult:
    """Read a CSV or JSON Lines corpus file into RawPosts.

    Malformed rows (missing post_id/text, bad timestamp, unparseable line)
    become RowRejections instead of being silently dropped, so
    len(posts) + len(rejections) always equals the number of data rows.
    """
    path = Path(path)
    if not path.is_file():
        raise CorpusError(f"corpus file not found: {path}")
    if format is None:
        format = "jsonl" if path.suffix in (".jsonl", ".ndjson", ".jsons") else "csv"
    if format not in ("csv", "jsonl"):
        raise CorpusError(f"unknown corpus format {format!r} (expected csv or jsonl)")

    result = LoadResult()
    seen_ids: set[str] = set()
    if format == "csv":
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or "post_id" not in reader.fieldnames:
                raise CorpusError(f"{path}: CSV header with a post_id column is required")
            for i, row in enumerate(reader, start=1):
                _accept(row, i, result, seen_ids)
    else:
        with open(path, encoding="utf-8") as fh:
            for i, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    row = json.loads(line)
                except json.JSONDecodeError:
                    result.rejections.append(RowRejection(i, "unparseable JSON line"))
                    continue
                if not isinstance(row, dict):
                    result.rejections.append(RowRejection(i, "line is not a JSON object"))
                    continue
                _accept(row, i, result, seen_ids)
    return result


def _accept(row: dict, row_number: int, result: LoadResult, seen_ids: set) -> None:
    post, rejection = _row_to_post(row, row_number)
    if rejection is not None:
        result.rejections.append(rejection)
        return
    if post.post_id in seen_ids:
        result.rejections.append(RowRejection(row_number, f"duplicate post_id {post.post_id}"))
        return
    seen_ids.add(post.post_id)
    result.posts.append(post)


# Cleaning rules. RT-marker stripping runs last (before whitespace collapse)
# because removing a mention or emoji can expose a leading "RT"; this ordering
# keeps preprocess idempotent.
_RT_RE = re.compile(r"^(?:\s*[Rr][Tt]\b\s*:?\s*)+")
_URL_RE = re.compile(r"(?:https?://\S*|www\.\S+)")
_MENTION_RE = re.compile(r"@\w+")
_HASHTAG_RE = re.compile(r"#+(\w+)")
_EMOJI_RE = re.compile(
    "["
    "\U0001F300-\U0001FAFF"
    "\U00002600-\U000027BF"
    "\U0001F1E6-\U0001F1FF"
    "\U00002190-\U000021FF"
    "\U00002B00-\U00002BFF"
    "️"
    "]+"
)


def preprocess(post: RawPost) -> CleanPost:
    """Strip URLs, @-mentions, RT markers, emoji and '#' from hashtags; collapse
    whitespace. Case is preserved for the downstream models.

    Raises EmptyAfterCleaning when nothing survives.
    """
    text = post.text
    removed: list[str] = []

    new = _URL_RE.sub(" ", text)
    if new != text:
        removed.append("url")
    text = new

    new = _MENTION_RE.sub(" ", text)
    if new != text:
        removed.append("mention")
    text = new

    text = _HASHTAG_RE.sub(r"\1", text)

    new = _EMOJI_RE.sub(" ", text)
    if new != text:
        removed.append("emoji")
    text = new

    new = _RT_RE.sub("", text)
    if new != text:
        removed.append("retweet-marker")
    text = new

    new = re.sub(r"\s+", " ", text).strip()
    if new != text:
        removed.append("extra-whitespace")
    text = new

    if not text:
        raise EmptyAfterCleaning(post.post_id)
    return CleanPost(
        post_id=post.post_id,
        clean_text=text,
        original_length=len(post.text),
        removed_elements=tuple(removed),
    )


def keyword_filter(
    posts: Iterable[RawPost], keyword_sets: dict[str, list[str]]
) -> list[RawPost]:
    """Keep posts matching at least one collection keyword (case-insensitive,
    whole-word), annotated with the keyword that matched.

    The match is a collection hint only; it never labels the travel mode.
    """
    if not keyword_sets or not any(keyword_sets.values()):
        raise ValueError("keyword_filter requires at least one non-empty keyword set")
    compiled: list[tuple[str, re.Pattern]] = []
    for _hint, keywords in keyword_sets.items():
        for kw in keywords:
            compiled.append((kw, re.compile(r"\b" + re.escape(kw) + r"\b", re.IGNORECASE)))
    kept = []
    for post in posts:
        for kw, pattern in compiled:
            if pattern.search(post.text):
                kept.append(replace(post, keyword_source=kw))
                break
    return kept


def deduplicate(posts: Iterable[RawPost]) -> list[RawPost]:
    """Drop repeated post_ids and same-user exact repeats of the cleaned text.

    First occurrence wins; surviving order is preserved.
    """
    seen_ids: set[str] = set()
    seen_texts: set[tuple[str, str]] = set()
    kept = []
    for post in posts:
        if post.post_id in seen_ids:
            continue
        try:
            cleaned = preprocess(post).clean_text
        except EmptyAfterCleaning:
            cleaned = ""
        text_key = (post.user_id, cleaned)
        if post.user_id and text_key in seen_texts:
            continue
        seen_ids.add(post.post_id)
        seen_texts.add(text_key)
        kept.append(post)
    return kept
