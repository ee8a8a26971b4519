"""Second agent: an LLM-as-judge that scores reasoner outputs.

The judge sees the post, the predicted labels, the reasoner's rationale and
the reasoning-check flags (a blind variant hides the latter two) and must
answer with two scores in [0, 1], one for the mode and one for the sentiment.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Optional, Sequence

from .corpus import CleanPost
from .gateway import ChatExchange, LlmGateway
from .prompting import TemplatePack, render_judge_prompt
from .reasoner import ParseStatus, ReasonerOutput, reasoning_check


@dataclass(frozen=True)
class VerifierVerdict:
    post_id: str
    mode_score: Optional[float]
    sentiment_score: Optional[float]
    judge_model: str
    judge_rationale: str
    parse_status: ParseStatus
    clamped: bool = False

    def to_dict(self) -> dict:
        return {
            "post_id": self.post_id,
            "mode_score": self.mode_score,
            "sentiment_score": self.sentiment_score,
            "judge_model": self.judge_model,
            "judge_rationale": self.judge_rationale,
            "parse_status": self.parse_status.value,
            "clamped": self.clamped,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "VerifierVerdict":
        return cls(
            post_id=data["post_id"],
            mode_score=data["mode_score"],
            sentiment_score=data["sentiment_score"],
            judge_model=data["judge_model"],
            judge_rationale=data["judge_rationale"],
            parse_status=ParseStatus(data["parse_status"]),
            clamped=data.get("clamped", False),
        )


_MODE_SCORE_RE = re.compile(r"mode\s*score\s*:\s*(-?\d+(?:\.\d+)?)", re.IGNORECASE)
_SENT_SCORE_RE = re.compile(r"sentiment\s*score\s*:\s*(-?\d+(?:\.\d+)?)", re.IGNORECASE)
_NUMBER_RE = re.compile(r"-?\d+(?:\.\d+)?")
_RATIONALE_RE = re.compile(r"^\s*rationale\s*:\s*(.+)$", re.IGNORECASE | re.MULTILINE)


def parse_verifier_response(raw: str) -> Optional[tuple[float, float, bool]]:
    """Extract (mode_score, sentiment_score, clamped) from a judge reply.

    Labeled lines win; otherwise the first two numbers in the text are taken
    in (mode, sentiment) order. Out-of-range values are clamped and flagged.
    None means the reply had fewer than two extractable numbers.
    """
    mode_match = _MODE_SCORE_RE.search(raw)
    sent_match = _SENT_SCORE_RE.search(raw)
    if mode_match and sent_match:
        values = [float(mode_match.group(1)), float(sent_match.group(1))]
    else:
        numbers = _NUMBER_RE.findall(raw)
        if len(numbers) < 2:
            return None
        values = [float(numbers[0]), float(numbers[1])]
    clamped = False
    for i, v in enumerate(values):
        bounded = min(1.0, max(0.0, v))
        if bounded != v:
            clamped = True
            values[i] = bounded
    return values[0], values[1], clamped


def _judge_rationale(raw: str) -> str:
    match = _RATIONALE_RE.search(raw)
    return match.group(1).strip() if match else raw.strip()


def verify(
    post: CleanPost,
    output: ReasonerOutput,
    gateway: LlmGateway,
    templates: TemplatePack,
    flags: Optional[Sequence[str]] = None,
    include_rationale: bool = True,
) -> VerifierVerdict:
    """Score one reasoner output with the judge endpoint.

    Unparseable judge replies and gateway failures yield a ParseFailed
    verdict (no scores) instead of raising.
    """
    if output.parse_status is ParseStatus.FAILED:
        raise ValueError(f"post {output.post_id}: cannot verify a ParseFailed output")
    if flags is None:
        flags = reasoning_check(output, post)
    prompt = render_judge_prompt(
        templates.verifier,
        post,
        predicted_mode=output.mode,
        predicted_sentiment=output.sentiment,
        rationale=output.rationale,
        flags=flags,
        include_rationale=include_rationale,
    )
    exchange = gateway.try_complete(prompt)
    judge_model = gateway.config.model_name
    if not exchange.ok:
        return VerifierVerdict(
            post_id=output.post_id,
            mode_score=None,
            sentiment_score=None,
            judge_model=judge_model,
            judge_rationale=f"gateway error ({exchange.error_kind}): {exchange.error}",
            parse_status=ParseStatus.FAILED,
        )
    parsed = parse_verifier_response(exchange.response_text)
    if parsed is None:
        return VerifierVerdict(
            post_id=output.post_id,
            mode_score=None,
            sentiment_score=None,
            judge_model=judge_model,
            judge_rationale=_judge_rationale(exchange.response_text),
            parse_status=ParseStatus.FAILED,
        )
    mode_score, sentiment_score, clamped = parsed
    return VerifierVerdict(
        post_id=output.post_id,
        mode_score=mode_score,
        sentiment_score=sentiment_score,
        judge_model=judge_model,
        judge_rationale=_judge_rationale(exchange.response_text),
        parse_status=ParseStatus.FULL,
        clamped=clamped,
    )


def verify_batch(
    pairs: Sequence[tuple[CleanPost, ReasonerOutput]],
    gateway: LlmGateway,
    templates: TemplatePack,
    include_rationale: bool = True,
    max_in_flight: int = 4,
) -> list[tuple[VerifierVerdict, "ChatExchange"]]:
    """Verify (post, output) pairs with bounded concurrency, in input order.

    Returns (verdict, exchange) pairs; the exchange distinguishes transport
    failures (retryable) from judge replies that failed to parse (final)."""
    prompts = []
    for post, output in pairs:
        if output.parse_status is ParseStatus.FAILED:
            raise ValueError(f"post {output.post_id}: cannot verify a ParseFailed output")
        prompts.append(
            render_judge_prompt(
                templates.verifier,
                post,
                predicted_mode=output.mode,
                predicted_sentiment=output.sentiment,
                rationale=output.rationale,
                flags=reasoning_check(output, post),
                include_rationale=include_rationale,
            )
        )
    exchanges = gateway.complete_batch(prompts, max_in_flight=max_in_flight)
    results = []
    for (post, output), exchange in zip(pairs, exchanges):
        judge_model = gateway.config.model_name
        if not exchange.ok:
            verdict = VerifierVerdict(
                post_id=output.post_id,
                mode_score=None,
                sentiment_score=None,
                judge_model=judge_model,
                judge_rationale=f"gateway error ({exchange.error_kind}): {exchange.error}",
                parse_status=ParseStatus.FAILED,
            )
        else:
            parsed = parse_verifier_response(exchange.response_text)
            if parsed is None:
                verdict = VerifierVerdict(
                    post_id=output.post_id,
                    mode_score=None,
                    sentiment_score=None,
                    judge_model=judge_model,
                    judge_rationale=_judge_rationale(exchange.response_text),
                    parse_status=ParseStatus.FAILED,
                )
            else:
                mode_score, sentiment_score, clamped = parsed
                verdict = VerifierVerdict(
                    post_id=output.post_id,
                    mode_score=mode_score,
                    sentiment_score=sentiment_score,
                    judge_model=judge_model,
                    judge_rationale=_judge_rationale(exchange.response_text),
                    parse_status=ParseStatus.FULL,
                    clamped=clamped,
                )
        results.append((verdict, exchange))
    return results
