"""Pydantic request/response models for the evaluation API."""

from __future__ import annotations

from datetime import datetime
from typing import Optional

from pydantic import BaseModel, Field


class EvalTaskResponse(BaseModel):
    post_id: str
    post_text: str
    predicted_mode: str
    predicted_sentiment: str
    rationale: str
    remaining: int


class ScoreSubmission(BaseModel):
    post_id: str
    evaluator_id: str = Field(min_length=1)
    mode_score: float = Field(ge=0.0, le=1.0)
    sentiment_score: float = Field(ge=0.0, le=1.0)
    submitted_at: Optional[datetime] = None


class ScoreAck(BaseModel):
    status: str = "stored"
    superseded: bool = False


class SummaryRow(BaseModel):
    group_key: str
    source: str
    avg_mode_score: float
    avg_sentiment_score: float
    n_items: int


class ProgressResponse(BaseModel):
    total: int
    pending: int
    reasoned: int
    verified: int
    failed: int
    human_scores: int
    evaluators: int
