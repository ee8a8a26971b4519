"""Command-line entry points: ingest, run, verify, evaluate, report, serve.

Exit codes: 0 success, 1 fatal config problem, 2 run finished but some posts
failed or did not parse.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .config import AppConfig, ConfigError, load_config
from .corpus import CorpusError, deduplicate, keyword_filter, load_corpus
from .evaluation import HumanScoreStore, aggregate_scores
from .orchestrator import (
    RunError,
    RunStore,
    resume_run,
    run_pipeline,
    verify_run,
)
from .prompting import TemplateError, parse_strategy
from .reasoner import ParseStatus
from .reporting import (
    collect_item_scores,
    comparison_across_runs,
    run_coverage,
    write_run_reports,
)
from .taxonomy import TaxonomyError

_FATAL = (ConfigError, CorpusError, TemplateError, TaxonomyError, RunError, ValueError)


def _load(config_path) -> AppConfig:
    return load_config(config_path)


@click.group()
def main():
    """Travel-mode and sentiment mining over social-media corpora."""


@main.command()
@click.option("--corpus", required=True, type=click.Path(), help="CSV or JSONL corpus file")
@click.option("--config", "config_path", type=click.Path(), default=None)
@click.option("--backend", type=click.Choice(["stub", "remote"]), default="stub", show_default=True)
@click.option("--apply-keyword-filter", is_flag=True, default=False,
              help="Keep only posts matching the configured collection keywords")
@click.option("--out", type=click.Path(), default=None, help="Write surviving posts as JSONL")
def ingest(corpus, config_path, backend, apply_keyword_filter, out):
    """Load a corpus, deduplicate, optionally keyword-filter; report counts."""
    try:
        config = _load(config_path)
        result = load_corpus(corpus, config.corpus_format)
        posts = deduplicate(result.posts)
        removed_dups = len(result.posts) - len(posts)
        if apply_keyword_filter or config.apply_keyword_filter:
            posts = keyword_filter(posts, config.keywords)
    except _FATAL as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    click.echo(f"rows read:    {result.total_rows}")
    click.echo(f"rejected:     {len(result.rejections)}")
    for rejection in result.rejections[:10]:
        click.echo(f"  row {rejection.row_number}: {rejection.reason}")
    click.echo(f"duplicates:   {removed_dups}")
    click.echo(f"posts kept:   {len(posts)}")
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            for post in posts:
                fh.write(
                    json.dumps(
                        {
                            "post_id": post.post_id,
                            "user_id": post.user_id,
                            "timestamp": post.timestamp.isoformat(),
                            "text": post.text,
                            "keyword_source": post.keyword_source,
                        },
                        ensure_ascii=False,
                    )
                    + "\n"
                )
        click.echo(f"wrote {out}")


def _finish_run(manifest, store: RunStore):
    counts = manifest.counts()
    click.echo(f"run {manifest.run_id}: {counts}")
    parse_failed = sum(
        1 for o in store.load_outputs() if o.parse_status is ParseStatus.FAILED
    )
    if parse_failed:
        click.echo(f"outputs that failed to parse: {parse_failed}")
    if counts["Failed"] or parse_failed:
        sys.exit(2)


@main.command()
@click.option("--corpus", type=click.Path(), default=None, help="Corpus file (omit with --resume)")
@click.option("--strategy", default="instruction_following", show_default=True,
              help="instruction_following | in_context_learning | chain_of_thought | analogical")
@click.option("--config", "config_path", type=click.Path(), default=None)
@click.option("--backend", type=click.Choice(["stub", "remote"]), default="stub", show_default=True)
@click.option("--run-id", default=None)
@click.option("--resume", is_flag=True, default=False, help="Continue an interrupted run")
@click.option("--max-in-flight", type=int, default=None)
@click.option("--max-posts", type=int, default=None, help="Stop after classifying this many posts")
def run(corpus, strategy, config_path, backend, run_id, resume, max_in_flight, max_posts):
    """Run the full pipeline: ingest, preprocess, classify, verify."""
    try:
        config = _load(config_path)
        if resume:
            if not run_id:
                raise ConfigError("--resume requires --run-id")
            manifest = resume_run(
                run_id, config, backend=backend, max_posts=max_posts,
                max_in_flight=max_in_flight,
            )
        else:
            if not corpus:
                raise ConfigError("--corpus is required (or pass --resume)")
            manifest = run_pipeline(
                corpus,
                parse_strategy(strategy),
                config,
                backend=backend,
                run_id=run_id,
                max_in_flight=max_in_flight,
                max_posts=max_posts,
            )
    except _FATAL as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    _finish_run(manifest, RunStore(config.runs_dir, manifest.run_id))


@main.command()
@click.option("--run-id", required=True)
@click.option("--config", "config_path", type=click.Path(), default=None)
@click.option("--backend", type=click.Choice(["stub", "remote"]), default=None)
@click.option("--max-in-flight", type=int, default=None)
def verify(run_id, config_path, backend, max_in_flight):
    """Score reasoned posts with the verifier agent."""
    try:
        config = _load(config_path)
        manifest = verify_run(run_id, config, backend=backend, max_in_flight=max_in_flight)
    except _FATAL as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    _finish_run(manifest, RunStore(config.runs_dir, manifest.run_id))


@main.command()
@click.option("--run-id", required=True)
@click.option("--config", "config_path", type=click.Path(), default=None)
@click.option("--backend", type=click.Choice(["stub", "remote"]), default=None,
              help="Accepted for interface uniformity; aggregation is local")
@click.option("--group-by", type=click.Choice(["model", "strategy"]), default="model",
              show_default=True)
def evaluate(run_id, config_path, backend, group_by):
    """Aggregate human and LLM scores for a run into summary rows."""
    try:
        config = _load(config_path)
        store = RunStore(config.runs_dir, run_id)
        if not store.exists():
            raise RunError(f"no run {run_id} under {config.runs_dir}")
        items = collect_item_scores(store)
        summaries = aggregate_scores(items, group_by=group_by)
        if store.scores_path.exists():
            snapshot = HumanScoreStore(store.scores_path).compact()
            click.echo(f"score snapshot: {snapshot}")
    except _FATAL as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    if not summaries:
        click.echo("no scores recorded yet")
        return
    coverage = run_coverage(store)
    for summary in summaries:
        click.echo(
            f"{summary.group_key} [{summary.source}] "
            f"mode={summary.avg_mode_score:.2f} sentiment={summary.avg_sentiment_score:.2f} "
            f"n={summary.n_items}"
        )
    if coverage is not None:
        click.echo(f"parse coverage: {coverage:.1%}")


@main.command()
@click.option("--run-id", "run_ids", multiple=True, required=True,
              help="Repeat to compare several runs in one table")
@click.option("--config", "config_path", type=click.Path(), default=None)
@click.option("--backend", type=click.Choice(["stub", "remote"]), default=None,
              help="Accepted for interface uniformity; reporting is local")
@click.option("--axis", type=click.Choice(["models", "strategies"]), default="models",
              show_default=True)
def report(run_ids, config_path, backend, axis):
    """Write analytics reports and print the comparison table."""
    try:
        config = _load(config_path)
        stores = []
        for run_id in run_ids:
            store = RunStore(config.runs_dir, run_id)
            if not store.exists():
                raise RunError(f"no run {run_id} under {config.runs_dir}")
            stores.append(store)
        for store in stores:
            paths = write_run_reports(store, config)
            click.echo(f"{store.run_id}: wrote {', '.join(str(p) for p in paths.values())}")
        table = comparison_across_runs(stores, axis=axis)
    except _FATAL as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    click.echo(table.to_text())
    table_path = stores[0].reports_dir / f"comparison_{axis}.json"
    table_path.write_text(json.dumps(table.to_dict(), indent=1), "utf-8")
    (stores[0].reports_dir / f"comparison_{axis}.txt").write_text(table.to_text() + "\n", "utf-8")
    click.echo(f"table written to {table_path}")


@main.command()
@click.option("--run-id", required=True)
@click.option("--config", "config_path", type=click.Path(), default=None)
@click.option("--backend", type=click.Choice(["stub", "remote"]), default=None,
              help="Accepted for interface uniformity; serving touches no endpoint")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8000, show_default=True)
@click.option("--static-dir", type=click.Path(), default=None,
              help="Built UI bundle to serve at / (defaults to config static_dir)")
def serve(run_id, config_path, backend, host, port, static_dir):
    """Serve the human-evaluation API (and UI when built) for a run."""
    try:
        config = _load(config_path)
        store = RunStore(config.runs_dir, run_id)
        if not store.exists():
            raise RunError(f"no run {run_id} under {config.runs_dir}")
        from .service.app import create_app

        static = Path(static_dir) if static_dir else config.static_dir
        app = create_app(store, static_dir=static)
    except _FATAL as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    import uvicorn

    uvicorn.run(app, host=host, port=port, log_level="info")


if __name__ == "__main__":
    main()
