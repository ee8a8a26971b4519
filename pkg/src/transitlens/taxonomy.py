"""Closed vocabularies for travel modes, sentiments and complaint categories.

The synonym sets and per-mode complaint catalogs are config data loaded from
a YAML file (a default pack ships with the package), so the vocabulary can
evolve without code changes.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum
from importlib import resources
from typing import Optional

import yaml


class TravelMode(str, Enum):
    TAXI_UBER = "Taxi/Uber"
    PRIVATE_VEHICLE = "Private vehicle"
    BUS = "Bus"
    SUBWAY_METRO = "Subway/Metro"
    BIKE = "Bike"
    WALKING = "Walking"
    NA = "NA"


class Sentiment(str, Enum):
    POSITIVE = "Positive"
    NEGATIVE = "Negative"
    NEUTRAL = "Neutral"


# YAML keys -> enum members
_MODE_KEYS = {
    "taxi_uber": TravelMode.TAXI_UBER,
    "private_vehicle": TravelMode.PRIVATE_VEHICLE,
    "bus": TravelMode.BUS,
    "subway_metro": TravelMode.SUBWAY_METRO,
    "bike": TravelMode.BIKE,
    "walking": TravelMode.WALKING,
    "na": TravelMode.NA,
}


@dataclass(frozen=True)
class ReasonCategory:
    """One complaint category, scoped to a mode and ranked within its catalog."""

    mode_scope: TravelMode
    label: str
    rank: int
    keywords: tuple[str, ...] = ()


class TaxonomyError(ValueError):
    """Raised for malformed taxonomy config or contract violations."""


def _normalize(raw: str) -> str:
    """Lowercase, trim surrounding punctuation/quotes, collapse inner whitespace."""
    text = raw.strip().lower()
    text = text.strip("\"'`.,;:!?()[]{}")
    return re.sub(r"\s+", " ", text)


def _word_pattern(phrase: str) -> re.Pattern:
    return re.compile(r"\b" + re.escape(phrase) + r"\b", re.IGNORECASE)


class Taxonomy:
    """Immutable lookup tables built from a taxonomy config; safe to share."""

    def __init__(
        self,
        synonyms: dict[TravelMode, tuple[str, ...]],
        catalogs: dict[TravelMode, tuple[ReasonCategory, ...]],
    ):
        self.synonyms = synonyms
        self.catalogs = {
            mode: tuple(sorted(cats, key=lambda c: c.rank)) for mode, cats in catalogs.items()
        }
        self._mode_lookup: dict[str, TravelMode] = {}
        for mode, words in synonyms.items():
            self._mode_lookup[_normalize(mode.value)] = mode
            for word in words:
                self._mode_lookup[_normalize(word)] = mode
        # compiled whole-word scanners per mode, used by the stub backend and
        # the reasoning check; NA synonyms are lookup-only, never scanned
        self._scan_patterns = {
            mode: tuple(_word_pattern(w) for w in words)
            for mode, words in synonyms.items()
            if mode is not TravelMode.NA
        }
        self._category_patterns = {
            mode: tuple((cat, tuple(_word_pattern(k) for k in cat.keywords)) for cat in cats)
            for mode, cats in self.catalogs.items()
        }

    def canonicalize_mode(self, raw: str) -> Optional[TravelMode]:
        """Map free text to a TravelMode; None means unrecognized (not an error)."""
        return self._mode_lookup.get(_normalize(raw))

    def canonicalize_sentiment(self, raw: str) -> Optional[Sentiment]:
        text = _normalize(raw)
        for sentiment in Sentiment:
            if text == sentiment.value.lower():
                return sentiment
        return None

    def mode_mentioned(self, mode: TravelMode, text: str) -> bool:
        """Whole-word scan for any synonym of `mode` in `text`."""
        patterns = self._scan_patterns.get(mode, ())
        return any(p.search(text) for p in patterns)

    def mentioned_synonyms(self, mode: TravelMode, text: str) -> list[str]:
        """Synonyms of `mode` present in `text`, in catalog order."""
        found = []
        for word, pattern in zip(self.synonyms.get(mode, ()), self._scan_patterns.get(mode, ())):
            if pattern.search(text):
                found.append(word)
        return found

    def categorize_reason(self, mode: TravelMode, rationale_text: str) -> Optional[ReasonCategory]:
        """Keyword-rule complaint classifier; first matching category by rank wins.

        None means uncategorized. Calling with mode=NA is a contract violation.
        """
        if mode is TravelMode.NA:
            raise TaxonomyError("categorize_reason requires a concrete travel mode, got NA")
        for category, patterns in self._category_patterns.get(mode, ()):
            if any(p.search(rationale_text) for p in patterns):
                return category
        return None


def load_taxonomy(path=None) -> Taxonomy:
    """Load a taxonomy config; defaults to the pack shipped with the package."""
    if path is None:
        text = resources.files("transitlens.data").joinpath("taxonomy.yaml").read_text("utf-8")
    else:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    doc = yaml.safe_load(text)
    if not isinstance(doc, dict) or "synonyms" not in doc:
        raise TaxonomyError("taxonomy config must contain a 'synonyms' mapping")
    synonyms: dict[TravelMode, tuple[str, ...]] = {}
    for key, words in doc["synonyms"].items():
        if key not in _MODE_KEYS:
            raise TaxonomyError(f"unknown mode key in taxonomy config: {key!r}")
        synonyms[_MODE_KEYS[key]] = tuple(str(w) for w in words)
    catalogs: dict[TravelMode, tuple[ReasonCategory, ...]] = {}
    for key, cats in (doc.get("categories") or {}).items():
        if key not in _MODE_KEYS:
            raise TaxonomyError(f"unknown mode key in taxonomy config: {key!r}")
        mode = _MODE_KEYS[key]
        parsed = []
        seen_labels = set()
        for cat in cats:
            label = str(cat["label"])
            if label in seen_labels:
                raise TaxonomyError(f"duplicate category label {label!r} for {key}")
            seen_labels.add(label)
            parsed.append(
                ReasonCategory(
                    mode_scope=mode,
                    label=label,
                    rank=int(cat["rank"]),
                    keywords=tuple(str(k) for k in cat.get("keywords", ())),
                )
            )
        catalogs[mode] = tuple(parsed)
    return Taxonomy(synonyms, catalogs)


_default: Optional[Taxonomy] = None


def default_taxonomy() -> Taxonomy:
    global _default
    if _default is None:
        _default = load_taxonomy()
    return _default


def canonicalize_mode(raw: str) -> Optional[TravelMode]:
    return default_taxonomy().canonicalize_mode(raw)


def canonicalize_sentiment(raw: str) -> Optional[Sentiment]:
    return default_taxonomy().canonicalize_sentiment(raw)


def categorize_reason(mode: TravelMode, rationale_text: str) -> Optional[ReasonCategory]:
    return default_taxonomy().categorize_reason(mode, rationale_text)
