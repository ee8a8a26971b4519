"""End-to-end run management: manifest, persistent stores, pipeline, resume.

A run lives in its own directory of append-only JSON Lines stores plus a
manifest. The stores are the source of truth for per-post progress, which
makes kill-and-resume safe: a resumed run re-dispatches only posts without a
persisted record, so stores end up identical to an uninterrupted run.
Timestamps live only in the manifest; the stores are byte-reproducible.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path
from typing import Optional, Sequence

from .config import AppConfig
from .corpus import (
    CleanPost,
    CorpusError,
    EmptyAfterCleaning,
    LoadResult,
    deduplicate,
    keyword_filter,
    load_corpus,
    preprocess,
)
from .gateway import EndpointConfig, LlmGateway
from .prompting import (
    PromptStrategy,
    TemplatePack,
    load_exemplar_pool,
    load_templates,
    select_exemplars,
)
from .reasoner import ParseStatus, ReasonerOutput, classify_batch
from .verifier import VerifierVerdict, verify_batch


class Status(str, Enum):
    PENDING = "Pending"
    REASONED = "Reasoned"
    VERIFIED = "Verified"
    FAILED = "Failed"


_STAGE_ORDER = {Status.PENDING: 0, Status.REASONED: 1, Status.VERIFIED: 2}

# failure reasons that resume must not re-dispatch
_PERMANENT_REASONS = {
    "empty-after-cleaning",
    "gateway:permanent-rejection",
    "gateway:protocol-error",
}


class RunError(Exception):
    pass


class RunExistsError(RunError):
    pass


class DigestMismatchError(RunError):
    """The corpus file changed since the run was created; refuse to resume."""


@dataclass
class RunManifest:
    run_id: str
    corpus_path: str
    corpus_digest: str
    strategy: str
    backend: str
    reasoner_config: dict
    verifier_config: dict
    created_at: str
    per_post_status: dict = field(default_factory=dict)
    failures: dict = field(default_factory=dict)
    rejected_rows: int = 0

    def status_of(self, post_id: str) -> Status:
        return Status(self.per_post_status.get(post_id, Status.PENDING.value))

    def advance(self, post_id: str, new: Status) -> None:
        """Move a post forward (Pending -> Reasoned -> Verified). Any state may
        fail, and a Failed post may be re-dispatched, but stages never move
        backward."""
        old = self.status_of(post_id)
        if new is Status.FAILED or old is Status.FAILED:
            self.per_post_status[post_id] = new.value
            return
        if _STAGE_ORDER[new] < _STAGE_ORDER[old]:
            raise RunError(f"post {post_id}: cannot move {old.value} -> {new.value}")
        self.per_post_status[post_id] = new.value

    def counts(self) -> dict:
        counts = {status.value: 0 for status in Status}
        for value in self.per_post_status.values():
            counts[value] += 1
        return counts

    def to_dict(self) -> dict:
        return {
            "run_id": self.run_id,
            "corpus_path": self.corpus_path,
            "corpus_digest": self.corpus_digest,
            "strategy": self.strategy,
            "backend": self.backend,
            "reasoner_config": self.reasoner_config,
            "verifier_config": self.verifier_config,
            "created_at": self.created_at,
            "per_post_status": self.per_post_status,
            "failures": self.failures,
            "rejected_rows": self.rejected_rows,
        }

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), ensure_ascii=False, indent=1), "utf-8")

    @classmethod
    def load(cls, path) -> "RunManifest":
        data = json.loads(Path(path).read_text("utf-8"))
        return cls(**data)


class RunStore:
    """File layout of one run directory; all stores are append-only JSONL."""

    def __init__(self, runs_dir, run_id: str):
        self.run_id = run_id
        self.dir = Path(runs_dir) / run_id
        self.manifest_path = self.dir / "manifest.json"
        self.clean_posts_path = self.dir / "clean_posts.jsonl"
        self.outputs_path = self.dir / "reasoner.jsonl"
        self.verdicts_path = self.dir / "verdicts.jsonl"
        self.scores_path = self.dir / "scores.jsonl"
        self.reports_dir = self.dir / "reports"

    def exists(self) -> bool:
        return self.manifest_path.exists()

    def _append(self, path: Path, record: dict) -> None:
        with open(path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")
            fh.flush()

    def _load(self, path: Path) -> list:
        if not path.exists():
            return []
        rows = []
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    rows.append(json.loads(line))
        return rows

    def append_clean_post(self, post: CleanPost) -> None:
        self._append(
            self.clean_posts_path,
            {
                "post_id": post.post_id,
                "clean_text": post.clean_text,
                "original_length": post.original_length,
                "removed_elements": list(post.removed_elements),
            },
        )

    def load_clean_posts(self) -> list[CleanPost]:
        return [
            CleanPost(
                post_id=row["post_id"],
                clean_text=row["clean_text"],
                original_length=row["original_length"],
                removed_elements=tuple(row["removed_elements"]),
            )
            for row in self._load(self.clean_posts_path)
        ]

    def append_output(self, output: ReasonerOutput) -> None:
        self._append(self.outputs_path, output.to_dict())

    def load_outputs(self) -> list[ReasonerOutput]:
        return [ReasonerOutput.from_dict(row) for row in self._load(self.outputs_path)]

    def append_verdict(self, verdict: VerifierVerdict) -> None:
        self._append(self.verdicts_path, verdict.to_dict())

    def load_verdicts(self) -> list[VerifierVerdict]:
        return [VerifierVerdict.from_dict(row) for row in self._load(self.verdicts_path)]


def corpus_digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _prepare_corpus(corpus_path, config: AppConfig) -> tuple[list[CleanPost], dict, LoadResult]:
    result = load_corpus(corpus_path, config.corpus_format)
    posts = deduplicate(result.posts)
    if config.apply_keyword_filter:
        posts = keyword_filter(posts, config.keywords)
    clean_posts = []
    failures = {}
    for post in posts:
        try:
            clean_posts.append(preprocess(post))
        except EmptyAfterCleaning:
            failures[post.post_id] = "empty-after-cleaning"
    return clean_posts, failures, result


def _chunks(items: Sequence, size: int):
    for i in range(0, len(items), size):
        yield items[i : i + size]


def _build_exemplars(strategy: PromptStrategy, config: AppConfig):
    if strategy is not PromptStrategy.IN_CONTEXT_LEARNING:
        return None
    pool = load_exemplar_pool(config.exemplars_path)
    return select_exemplars(pool, config.exemplar_k, config.exemplar_seed)


def run_pipeline(
    corpus_path,
    strategy: PromptStrategy,
    config: Optional[AppConfig] = None,
    backend: str = "stub",
    run_id: Optional[str] = None,
    max_in_flight: Optional[int] = None,
    max_posts: Optional[int] = None,
    reasoner_gateway: Optional[LlmGateway] = None,
    verifier_gateway: Optional[LlmGateway] = None,
) -> RunManifest:
    """Execute ingest -> preprocess -> classify -> verify for a corpus file.

    Results stream into the run store as chunks complete. Fatal config
    problems (bad templates, unreadable corpus) raise before any dispatch;
    per-post problems mark the post Failed and the run continues.
    `max_posts` stops the classify stage after that many dispatches, which
    simulates an interrupted run for the resume tests.
    """
    config = config or AppConfig()
    corpus_path = Path(corpus_path)
    if not corpus_path.is_file():
        raise CorpusError(f"corpus file not found: {corpus_path}")
    templates = load_templates(config.templates_dir)
    digest = corpus_digest(corpus_path)
    if run_id is None:
        run_id = f"{strategy.value}-{digest[:10]}"
    store = RunStore(config.runs_dir, run_id)
    if store.exists():
        raise RunExistsError(f"run {run_id} already exists; use resume_run")

    clean_posts, failures, load_result = _prepare_corpus(corpus_path, config)
    manifest = RunManifest(
        run_id=run_id,
        corpus_path=str(corpus_path),
        corpus_digest=digest,
        strategy=strategy.value,
        backend=backend,
        reasoner_config=config.reasoner.to_public_dict(),
        verifier_config=config.verifier.to_public_dict(),
        created_at=datetime.now(timezone.utc).isoformat(),
        per_post_status={p.post_id: Status.PENDING.value for p in clean_posts},
        failures=dict(failures),
        rejected_rows=len(load_result.rejections),
    )
    for post_id in failures:
        manifest.per_post_status[post_id] = Status.FAILED.value

    store.dir.mkdir(parents=True, exist_ok=True)
    for post in clean_posts:
        store.append_clean_post(post)
    manifest.save(store.manifest_path)

    return _execute(
        manifest,
        store,
        clean_posts,
        config,
        templates,
        backend=backend,
        max_in_flight=max_in_flight,
        max_posts=max_posts,
        reasoner_gateway=reasoner_gateway,
        verifier_gateway=verifier_gateway,
    )


def resume_run(
    run_id: str,
    config: Optional[AppConfig] = None,
    backend: Optional[str] = None,
    max_posts: Optional[int] = None,
    max_in_flight: Optional[int] = None,
    reasoner_gateway: Optional[LlmGateway] = None,
    verifier_gateway: Optional[LlmGateway] = None,
) -> RunManifest:
    """Continue an interrupted run. Only posts without a persisted record
    (or with a transient failure) are re-dispatched; completed records are
    never recomputed. Refuses to run when the corpus file changed."""
    config = config or AppConfig()
    store = RunStore(config.runs_dir, run_id)
    if not store.exists():
        raise RunError(f"no manifest for run {run_id} under {config.runs_dir}")
    manifest = RunManifest.load(store.manifest_path)
    try:
        digest = corpus_digest(manifest.corpus_path)
    except FileNotFoundError:
        raise DigestMismatchError(
            f"corpus {manifest.corpus_path} for run {run_id} no longer exists"
        ) from None
    if digest != manifest.corpus_digest:
        raise DigestMismatchError(
            f"corpus {manifest.corpus_path} changed since run {run_id} was created"
        )
    templates = load_templates(config.templates_dir)
    clean_posts, _failures, _load_result = _prepare_corpus(manifest.corpus_path, config)
    known = {p.post_id for p in store.load_clean_posts()}
    for post in clean_posts:
        if post.post_id not in known:
            store.append_clean_post(post)
    return _execute(
        manifest,
        store,
        clean_posts,
        config,
        templates,
        backend=backend or manifest.backend,
        max_in_flight=max_in_flight,
        max_posts=max_posts,
        reasoner_gateway=reasoner_gateway,
        verifier_gateway=verifier_gateway,
    )


def verify_run(
    run_id: str,
    config: Optional[AppConfig] = None,
    backend: Optional[str] = None,
    max_in_flight: Optional[int] = None,
    verifier_gateway: Optional[LlmGateway] = None,
) -> RunManifest:
    """Run only the verification stage over already-reasoned posts."""
    config = config or AppConfig()
    store = RunStore(config.runs_dir, run_id)
    if not store.exists():
        raise RunError(f"no manifest for run {run_id} under {config.runs_dir}")
    manifest = RunManifest.load(store.manifest_path)
    templates = load_templates(config.templates_dir)
    clean_posts = store.load_clean_posts()
    return _execute(
        manifest,
        store,
        clean_posts,
        config,
        templates,
        backend=backend or manifest.backend,
        max_in_flight=max_in_flight,
        max_posts=None,
        reasoner_gateway=None,
        verifier_gateway=verifier_gateway,
        stages=("verify",),
    )


def _execute(
    manifest: RunManifest,
    store: RunStore,
    clean_posts: list[CleanPost],
    config: AppConfig,
    templates: TemplatePack,
    backend: str,
    max_in_flight: Optional[int],
    max_posts: Optional[int],
    reasoner_gateway: Optional[LlmGateway],
    verifier_gateway: Optional[LlmGateway],
    stages: tuple = ("classify", "verify"),
) -> RunManifest:
    max_in_flight = max_in_flight or config.max_in_flight
    strategy = PromptStrategy(manifest.strategy)
    exemplars = _build_exemplars(strategy, config)
    if reasoner_gateway is None:
        reasoner_gateway = LlmGateway(
            EndpointConfig.from_dict(manifest.reasoner_config),
            backend=backend,
            transcript_path=(store.dir / "transcript-reasoner.jsonl")
            if config.log_transcripts
            else None,
        )
    if verifier_gateway is None:
        verifier_gateway = LlmGateway(
            EndpointConfig.from_dict(manifest.verifier_config),
            backend=backend,
            transcript_path=(store.dir / "transcript-verifier.jsonl")
            if config.log_transcripts
            else None,
        )

    outputs = {o.post_id: o for o in store.load_outputs()}
    verdict_ids = {v.post_id for v in store.load_verdicts()}

    def dispatchable(post: CleanPost) -> bool:
        if post.post_id in outputs:
            return False
        return manifest.failures.get(post.post_id) not in _PERMANENT_REASONS

    pending = [p for p in clean_posts if dispatchable(p)] if "classify" in stages else []
    interrupted = False
    if max_posts is not None and len(pending) >= max_posts:
        # the limit was binding: treat it as a kill right after the classify
        # stage, so the verify stage is skipped too
        pending = pending[:max_posts]
        interrupted = True

    for chunk in _chunks(pending, config.chunk_size):
        results = classify_batch(
            chunk, strategy, reasoner_gateway, templates, exemplars, max_in_flight
        )
        for output, exchange in results:
            if not exchange.ok:
                manifest.failures[output.post_id] = f"gateway:{exchange.error_kind}"
                manifest.advance(output.post_id, Status.FAILED)
                continue
            manifest.failures.pop(output.post_id, None)
            store.append_output(output)
            outputs[output.post_id] = output
            manifest.advance(output.post_id, Status.REASONED)
        manifest.save(store.manifest_path)

    if interrupted or "verify" not in stages:
        manifest.save(store.manifest_path)
        return manifest

    to_verify = []
    for post in clean_posts:
        output = outputs.get(post.post_id)
        if output is None or output.post_id in verdict_ids:
            continue
        if output.parse_status is ParseStatus.FAILED:
            continue  # unscoreable; stays Reasoned and counts against coverage
        if manifest.failures.get(post.post_id) in _PERMANENT_REASONS:
            continue
        to_verify.append((post, output))

    for chunk in _chunks(to_verify, config.chunk_size):
        results = verify_batch(chunk, verifier_gateway, templates, max_in_flight=max_in_flight)
        for verdict, exchange in results:
            if not exchange.ok:
                manifest.failures[verdict.post_id] = f"gateway:{exchange.error_kind}"
                manifest.advance(verdict.post_id, Status.FAILED)
                continue
            manifest.failures.pop(verdict.post_id, None)
            store.append_verdict(verdict)
            verdict_ids.add(verdict.post_id)
            manifest.advance(verdict.post_id, Status.VERIFIED)
        manifest.save(store.manifest_path)

    manifest.save(store.manifest_path)
    return manifest
