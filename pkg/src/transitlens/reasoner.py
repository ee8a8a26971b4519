"""First agent: classify a post's travel mode and sentiment with a rationale.

Models answer in wildly different shapes, so parsing is a layered grammar:
labeled lines first, then prose ("the travel mode ... is likely X"), then
negation phrases that mean NA. Parsing is total: any byte string yields a
status, never an exception.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence

from .corpus import CleanPost
from .gateway import ChatExchange, LlmGateway
from .prompting import ExemplarSet, PromptStrategy, TemplatePack, render_prompt
from .taxonomy import Sentiment, Taxonomy, TravelMode, default_taxonomy


class ParseStatus(str, Enum):
    FULL = "FullParse"
    PARTIAL = "PartialParse"
    FAILED = "ParseFailed"


@dataclass(frozen=True)
class ReasonerOutput:
    post_id: str
    mode: TravelMode
    sentiment: Sentiment
    rationale: str
    strategy: PromptStrategy
    model_name: str
    parse_status: ParseStatus
    raw_response: str

    def to_dict(self) -> dict:
        return {
            "post_id": self.post_id,
            "mode": self.mode.value,
            "sentiment": self.sentiment.value,
            "rationale": self.rationale,
            "strategy": self.strategy.value,
            "model_name": self.model_name,
            "parse_status": self.parse_status.value,
            "raw_response": self.raw_response,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ReasonerOutput":
        return cls(
            post_id=data["post_id"],
            mode=TravelMode(data["mode"]),
            sentiment=Sentiment(data["sentiment"]),
            rationale=data["rationale"],
            strategy=PromptStrategy(data["strategy"]),
            model_name=data["model_name"],
            parse_status=ParseStatus(data["parse_status"]),
            raw_response=data["raw_response"],
        )


_MODE_LINE_RE = re.compile(r"travel\s*mode\s*:\s*([^,\n]+)", re.IGNORECASE)
_SENT_LINE_RE = re.compile(r"\bsentiment\s*:\s*([^,\n]+)", re.IGNORECASE)
_MODE_PROSE_RE = re.compile(
    r"travel\s+mode[^.!?\n]{0,80}?\bis\b\s*(?:likely\s+|probably\s+)?([^.,;\n]+)",
    re.IGNORECASE,
)
_SENT_PROSE_RE = re.compile(
    r"sentiment[^.!?\n]{0,80}?\bis\b\s*(?:likely\s+|probably\s+)?([^.,;\n]+)",
    re.IGNORECASE,
)
_MODE_NEGATION_RE = re.compile(
    r"(travel\s+mode[^.!?\n]{0,120}?not\s+(?:explicitly\s+)?(?:stated|mentioned|specified|clear)"
    r"|not\s+related\s+to\s+any\s+travel\s+mode"
    r"|no\s+(?:specific\s+)?(?:travel\s+)?mode\s+(?:is\s+)?mentioned)",
    re.IGNORECASE,
)
_REASON_LINE_RE = re.compile(r"^\s*reason(?:ing)?\s*:\s*(.+)$", re.IGNORECASE | re.MULTILINE)
_NEGATION_PHRASE_RE = re.compile(
    r"not\s+(?:explicitly\s+)?(?:stated|mentioned|specified|clear)", re.IGNORECASE
)


def _candidate_phrases(captured: str) -> list[str]:
    base = captured.strip()
    variants = [base]
    words = base.split()
    if words and words[0].lower() in ("the", "a", "an"):
        variants.append(" ".join(words[1:]))
    phrases = []
    for variant in variants:
        vwords = variant.split()
        if variant and variant not in phrases:
            phrases.append(variant)
        for n in (3, 2, 1):
            if len(vwords) > n:
                prefix = " ".join(vwords[:n])
                if prefix not in phrases:
                    phrases.append(prefix)
    return phrases


def _resolve_mode(raw: str, taxonomy: Taxonomy) -> tuple[Optional[TravelMode], list[TravelMode]]:
    """First resolvable mode plus any further distinct modes mentioned."""
    found: list[TravelMode] = []
    for regex in (_MODE_LINE_RE, _MODE_PROSE_RE):
        for match in regex.finditer(raw):
            captured = match.group(1)
            for phrase in _candidate_phrases(captured):
                mode = taxonomy.canonicalize_mode(phrase)
                if mode is not None:
                    if mode not in found:
                        found.append(mode)
                    break
            else:
                if _NEGATION_PHRASE_RE.search(captured) and TravelMode.NA not in found:
                    found.append(TravelMode.NA)
        if found:
            return found[0], found[1:]
    if _MODE_NEGATION_RE.search(raw):
        return TravelMode.NA, []
    return None, []


def _resolve_sentiment(raw: str, taxonomy: Taxonomy) -> Optional[Sentiment]:
    for regex in (_SENT_LINE_RE, _SENT_PROSE_RE):
        for match in regex.finditer(raw):
            for phrase in _candidate_phrases(match.group(1)):
                sentiment = taxonomy.canonicalize_sentiment(phrase)
                if sentiment is not None:
                    return sentiment
    return None


def _extract_rationale(raw: str) -> str:
    match = _REASON_LINE_RE.search(raw)
    if match:
        return match.group(1).strip()
    for sentence in re.split(r"(?<=[.!?])\s+", raw):
        if "because" in sentence.lower():
            return sentence.strip()
    return raw.strip()


def parse_reasoner_response(
    raw: str, taxonomy: Optional[Taxonomy] = None
) -> tuple[TravelMode, Sentiment, str, ParseStatus]:
    """Parse any model reply into (mode, sentiment, rationale, status).

    Unresolved fields fall back to NA / Neutral; the status records how much
    actually parsed. Total over arbitrary input.
    """
    taxonomy = taxonomy or default_taxonomy()
    if not isinstance(raw, str):
        raw = str(raw)
    mode, extra_modes = _resolve_mode(raw, taxonomy)
    sentiment = _resolve_sentiment(raw, taxonomy)
    rationale = _extract_rationale(raw)
    if extra_modes:
        others = ", ".join(m.value for m in extra_modes)
        rationale = (rationale + f" [other modes mentioned: {others}]").strip()

    if mode is not None and sentiment is not None:
        status = ParseStatus.FULL
    elif mode is not None or sentiment is not None:
        status = ParseStatus.PARTIAL
    else:
        status = ParseStatus.FAILED
    return (
        mode if mode is not None else TravelMode.NA,
        sentiment if sentiment is not None else Sentiment.NEUTRAL,
        rationale,
        status,
    )


def classify_post(
    post: CleanPost,
    strategy: PromptStrategy,
    gateway: LlmGateway,
    templates: TemplatePack,
    exemplars: Optional[ExemplarSet] = None,
) -> ReasonerOutput:
    """render_prompt -> complete -> parse, preserving the raw response.

    Gateway failures surface as ParseFailed outputs with the error noted in
    the rationale, so a bad post never stops the pipeline.
    """
    prompt = render_prompt(templates[strategy], post, exemplars)
    exchange = gateway.try_complete(prompt)
    model_name = gateway.config.model_name
    if not exchange.ok:
        return ReasonerOutput(
            post_id=post.post_id,
            mode=TravelMode.NA,
            sentiment=Sentiment.NEUTRAL,
            rationale=f"gateway error ({exchange.error_kind}): {exchange.error}",
            strategy=strategy,
            model_name=model_name,
            parse_status=ParseStatus.FAILED,
            raw_response="",
        )
    mode, sentiment, rationale, status = parse_reasoner_response(exchange.response_text)
    return ReasonerOutput(
        post_id=post.post_id,
        mode=mode,
        sentiment=sentiment,
        rationale=rationale,
        strategy=strategy,
        model_name=model_name,
        parse_status=status,
        raw_response=exchange.response_text,
    )


def classify_batch(
    posts: Sequence[CleanPost],
    strategy: PromptStrategy,
    gateway: LlmGateway,
    templates: TemplatePack,
    exemplars: Optional[ExemplarSet] = None,
    max_in_flight: int = 4,
) -> list[tuple[ReasonerOutput, "ChatExchange"]]:
    """Classify posts with bounded concurrency; (output, exchange) pairs in
    input order. The exchange lets callers tell transport failures apart from
    genuine model replies that merely failed to parse."""
    template = templates[strategy]
    prompts = [render_prompt(template, post, exemplars) for post in posts]
    exchanges = gateway.complete_batch(prompts, max_in_flight=max_in_flight)
    results = []
    for post, exchange in zip(posts, exchanges):
        if not exchange.ok:
            output = ReasonerOutput(
                post_id=post.post_id,
                mode=TravelMode.NA,
                sentiment=Sentiment.NEUTRAL,
                rationale=f"gateway error ({exchange.error_kind}): {exchange.error}",
                strategy=strategy,
                model_name=gateway.config.model_name,
                parse_status=ParseStatus.FAILED,
                raw_response="",
            )
        else:
            mode, sentiment, rationale, status = parse_reasoner_response(exchange.response_text)
            output = ReasonerOutput(
                post_id=post.post_id,
                mode=mode,
                sentiment=sentiment,
                rationale=rationale,
                strategy=strategy,
                model_name=gateway.config.model_name,
                parse_status=status,
                raw_response=exchange.response_text,
            )
        results.append((output, exchange))
    return results


_MISMATCH_WORDS = ("frustration", "dissatisfaction", "angry", "miserable")

FLAG_KEYWORD_ABSENCE = "keyword-absence"
FLAG_SENTIMENT_MISMATCH = "sentiment-rationale-mismatch"
FLAG_UNPARSED = "unparsed"


def reasoning_check(
    output: ReasonerOutput,
    post: CleanPost,
    taxonomy: Optional[Taxonomy] = None,
    extra_keywords: Optional[dict] = None,
) -> list[str]:
    """Advisory consistency flags; an empty list means consistent.

    The flags feed the verifier prompt and never override the parse.
    `extra_keywords` may map TravelMode -> collection keywords to accept
    alongside taxonomy synonyms.
    """
    taxonomy = taxonomy or default_taxonomy()
    if output.parse_status is ParseStatus.FAILED:
        return [FLAG_UNPARSED]
    flags = []
    if output.mode is not TravelMode.NA and not taxonomy.mode_mentioned(
        output.mode, post.clean_text
    ):
        extras = (extra_keywords or {}).get(output.mode, ())
        if not any(
            re.search(r"\b" + re.escape(k) + r"\b", post.clean_text, re.IGNORECASE)
            for k in extras
        ):
            flags.append(FLAG_KEYWORD_ABSENCE)
    if output.sentiment is Sentiment.POSITIVE and any(
        re.search(r"\b" + w + r"\b", output.rationale, re.IGNORECASE)
        for w in _MISMATCH_WORDS
    ):
        flags.append(FLAG_SENTIMENT_MISMATCH)
    return flags
