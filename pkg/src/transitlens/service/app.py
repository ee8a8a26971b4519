"""HTTP service for the human-evaluation loop.

Serves the next unscored task per evaluator, accepts 0-1 scores, and exposes
live summary and progress views. The browser UI is a separate static bundle
mounted at / when present; every feature works through these four endpoints
alone, so the API is fully usable without the UI built.
"""

from __future__ import annotations

import threading
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional

from fastapi import FastAPI, HTTPException, Query, Response
from fastapi.staticfiles import StaticFiles

from ..evaluation import (
    SOURCE_HUMAN,
    SOURCE_LLM,
    HumanScore,
    HumanScoreStore,
    ItemScore,
    aggregate_scores,
    record_human_score,
)
from ..orchestrator import RunManifest, RunStore, Status
from ..reasoner import ParseStatus
from .schemas import (
    EvalTaskResponse,
    ProgressResponse,
    ScoreAck,
    ScoreSubmission,
    SummaryRow,
)


class RunContext:
    """Snapshot of one run plus the live human-score store."""

    def __init__(self, store: RunStore):
        self.store = store
        self.manifest = RunManifest.load(store.manifest_path)
        self.posts = {p.post_id: p for p in store.load_clean_posts()}
        self.outputs = store.load_outputs()
        self.outputs_by_id = {o.post_id: o for o in self.outputs}
        self.verdicts = store.load_verdicts()
        scoreable = {
            o.post_id for o in self.outputs if o.parse_status is not ParseStatus.FAILED
        }
        self.score_store = HumanScoreStore(store.scores_path, known_post_ids=scoreable)
        self.write_lock = threading.Lock()

    def next_task(self, evaluator_id: str):
        scored = self.score_store.scored_post_ids(evaluator_id)
        queue = [
            o
            for o in self.outputs
            if o.parse_status is not ParseStatus.FAILED and o.post_id not in scored
        ]
        if not queue:
            return None
        output = queue[0]
        post = self.posts[output.post_id]
        return EvalTaskResponse(
            post_id=output.post_id,
            post_text=post.clean_text,
            predicted_mode=output.mode.value,
            predicted_sentiment=output.sentiment.value,
            rationale=output.rationale,
            remaining=len(queue),
        )

    def summary_rows(self) -> list[SummaryRow]:
        model = self.manifest.reasoner_config.get("model_name", "unknown")
        strategy = self.manifest.strategy
        items = [
            ItemScore(
                post_id=s.post_id,
                model_name=model,
                strategy=strategy,
                source=SOURCE_HUMAN,
                mode_score=s.mode_score,
                sentiment_score=s.sentiment_score,
            )
            for s in self.score_store.scores()
        ]
        items.extend(
            ItemScore(
                post_id=v.post_id,
                model_name=model,
                strategy=strategy,
                source=SOURCE_LLM,
                mode_score=v.mode_score,
                sentiment_score=v.sentiment_score,
            )
            for v in self.verdicts
            if v.parse_status is ParseStatus.FULL
        )
        return [SummaryRow(**s.to_dict()) for s in aggregate_scores(items, group_by="model")]

    def progress(self) -> ProgressResponse:
        counts = self.manifest.counts()
        return ProgressResponse(
            total=len(self.manifest.per_post_status),
            pending=counts[Status.PENDING.value],
            reasoned=counts[Status.REASONED.value],
            verified=counts[Status.VERIFIED.value],
            failed=counts[Status.FAILED.value],
            human_scores=len(self.score_store.scores()),
            evaluators=len(self.score_store.evaluator_ids()),
        )


def create_app(store: RunStore, static_dir: Optional[Path] = None) -> FastAPI:
    context = RunContext(store)
    app = FastAPI(title="transitlens evaluation service")
    app.state.context = context

    @app.get("/api/tasks/next")
    def tasks_next(evaluator: str = Query(min_length=1)):
        task = context.next_task(evaluator)
        if task is None:
            return Response(status_code=204)
        return task

    @app.post("/api/scores", response_model=ScoreAck)
    def submit_score(submission: ScoreSubmission):
        if (
            context.score_store.known_post_ids is not None
            and submission.post_id not in context.score_store.known_post_ids
        ):
            raise HTTPException(
                status_code=404, detail=f"unknown post_id {submission.post_id!r}"
            )
        score = HumanScore(
            post_id=submission.post_id,
            evaluator_id=submission.evaluator_id,
            mode_score=submission.mode_score,
            sentiment_score=submission.sentiment_score,
            submitted_at=submission.submitted_at or datetime.now(timezone.utc),
        )
        with context.write_lock:
            superseded = record_human_score(score, context.score_store)
        return ScoreAck(superseded=superseded)

    @app.get("/api/summary", response_model=list[SummaryRow])
    def summary():
        return context.summary_rows()

    @app.get("/api/progress", response_model=ProgressResponse)
    def progress():
        return context.progress()

    if static_dir is not None and Path(static_dir).is_dir():
        app.mount("/", StaticFiles(directory=static_dir, html=True), name="ui")
    else:

        @app.get("/")
        def root():
            return {
                "service": "transitlens evaluation API",
                "endpoints": ["/api/tasks/next", "/api/scores", "/api/summary", "/api/progress"],
                "note": "build the frontend bundle to serve the UI here",
            }

    return app
