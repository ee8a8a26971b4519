"""Prompt strategies and template rendering for the reasoner and the judge.

Templates live in a pack directory, one text file per strategy with a small
YAML front-matter header; the judge template uses the reserved name
"verifier". Placeholder syntax is `{name}`.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from enum import Enum
from importlib import resources
from pathlib import Path
from typing import Optional, Sequence

import yaml

from .corpus import CleanPost
from .taxonomy import Sentiment, TravelMode

COT_TRIGGER = "Let's think step by step"

DEFAULT_OUTPUT_SCHEMA = (
    "Answer with exactly three lines:\n"
    "Travel mode: <Taxi/Uber | Private vehicle | Bus | Subway/Metro | Bike | Walking | NA>\n"
    "Sentiment: <Positive | Negative | Neutral>\n"
    "Reason: <one short sentence>"
)


class PromptStrategy(str, Enum):
    INSTRUCTION_FOLLOWING = "instruction_following"
    IN_CONTEXT_LEARNING = "in_context_learning"
    CHAIN_OF_THOUGHT = "chain_of_thought"
    ANALOGICAL = "analogical"


_STRATEGY_ALIASES = {
    "if": PromptStrategy.INSTRUCTION_FOLLOWING,
    "icl": PromptStrategy.IN_CONTEXT_LEARNING,
    "cot": PromptStrategy.CHAIN_OF_THOUGHT,
}


def parse_strategy(name: str) -> PromptStrategy:
    key = name.strip().lower().replace("-", "_")
    if key in _STRATEGY_ALIASES:
        return _STRATEGY_ALIASES[key]
    try:
        return PromptStrategy(key)
    except ValueError:
        raise TemplateError(f"unknown prompting strategy {name!r}") from None


class TemplateError(ValueError):
    """Fatal template-pack configuration problem."""


@dataclass(frozen=True)
class PromptTemplate:
    strategy: PromptStrategy
    system_preamble: str
    body: str
    output_schema: str = DEFAULT_OUTPUT_SCHEMA

    def validate(self) -> None:
        name = self.strategy.value
        if self.body.count("{post_text}") != 1:
            raise TemplateError(
                f"template {name}: body must contain {{post_text}} exactly once"
            )
        if self.strategy is PromptStrategy.IN_CONTEXT_LEARNING and "{exemplars}" not in self.body:
            raise TemplateError(f"template {name}: missing {{exemplars}} placeholder")
        if self.strategy is PromptStrategy.CHAIN_OF_THOUGHT and COT_TRIGGER not in (
            self.system_preamble + self.body
        ):
            raise TemplateError(f"template {name}: missing trigger phrase {COT_TRIGGER!r}")


@dataclass(frozen=True)
class JudgeTemplate:
    """Template for the verifier agent; reserved name 'verifier' in the pack."""

    system_preamble: str
    body: str

    def validate(self) -> None:
        for placeholder in ("{post_text}", "{predicted_mode}", "{predicted_sentiment}"):
            if placeholder not in self.body:
                raise TemplateError(f"template verifier: missing {placeholder} placeholder")


@dataclass(frozen=True)
class Exemplar:
    post_id: str
    post_text: str
    mode: TravelMode
    sentiment: Sentiment


@dataclass(frozen=True)
class ExemplarSet:
    items: tuple[Exemplar, ...]

    def __post_init__(self):
        if len(self.items) < 1:
            raise ValueError("an ExemplarSet needs at least one exemplar")


@dataclass(frozen=True)
class TemplatePack:
    by_strategy: dict
    verifier: JudgeTemplate

    def __getitem__(self, strategy: PromptStrategy) -> PromptTemplate:
        return self.by_strategy[strategy]


def _split_front_matter(text: str, source: str) -> tuple[dict, str]:
    lines = text.split("\n")
    if not lines or lines[0].strip() != "---":
        raise TemplateError(f"{source}: expected '---' front-matter header")
    try:
        end = next(i for i, line in enumerate(lines[1:], start=1) if line.strip() == "---")
    except StopIteration:
        raise TemplateError(f"{source}: unterminated front-matter header") from None
    header = yaml.safe_load("\n".join(lines[1:end])) or {}
    body = "\n".join(lines[end + 1 :]).strip("\n")
    return header, body


def _parse_template_file(text: str, source: str):
    header, body = _split_front_matter(text, source)
    name = str(header.get("strategy", "")).strip().lower()
    if not name:
        raise TemplateError(f"{source}: front matter must name a strategy")
    system = str(header.get("system", "")).strip()
    if name == "verifier":
        template = JudgeTemplate(system_preamble=system, body=body)
        template.validate()
        return "verifier", template
    try:
        strategy = PromptStrategy(name)
    except ValueError:
        raise TemplateError(f"{source}: unknown strategy {name!r}") from None
    template = PromptTemplate(
        strategy=strategy,
        system_preamble=system,
        body=body,
        output_schema=str(header.get("output_schema") or DEFAULT_OUTPUT_SCHEMA).strip(),
    )
    template.validate()
    return strategy, template


def load_templates(path=None) -> TemplatePack:
    """Load a template pack directory; defaults to the pack shipped in the package.

    Every strategy and the verifier must be present and pass invariant checks,
    otherwise a TemplateError names the offending template.
    """
    if path is None:
        root = resources.files("transitlens.data").joinpath("templates")
        files = [(p.name, p.read_text("utf-8")) for p in root.iterdir() if p.name.endswith(".txt")]
    else:
        root = Path(path)
        if not root.is_dir():
            raise TemplateError(f"template pack directory not found: {root}")
        files = [(p.name, p.read_text("utf-8")) for p in sorted(root.glob("*.txt"))]

    by_strategy: dict = {}
    verifier: Optional[JudgeTemplate] = None
    for name, text in sorted(files):
        key, template = _parse_template_file(text, name)
        if key == "verifier":
            verifier = template
        else:
            by_strategy[key] = template
    for strategy in PromptStrategy:
        if strategy not in by_strategy:
            raise TemplateError(f"no template for {strategy.name.title().replace('_', '')}")
    if verifier is None:
        raise TemplateError("no template for verifier")
    return TemplatePack(by_strategy=by_strategy, verifier=verifier)


def render_exemplars(exemplars: ExemplarSet) -> str:
    blocks = []
    for ex in exemplars.items:
        blocks.append(
            f'Example post: "{ex.post_text}"\n'
            f"Travel mode: {ex.mode.value}\n"
            f"Sentiment: {ex.sentiment.value}"
        )
    return "\n\n".join(blocks)


def render_prompt(
    template: PromptTemplate,
    post: CleanPost,
    exemplars: Optional[ExemplarSet] = None,
) -> str:
    """Substitute placeholders and return the full prompt text.

    Exemplars are required for in-context learning and forbidden elsewhere;
    the post under classification must never appear among the exemplars.
    """
    is_icl = template.strategy is PromptStrategy.IN_CONTEXT_LEARNING
    if is_icl and exemplars is None:
        raise ValueError("in-context learning requires an exemplar set")
    if not is_icl and exemplars is not None:
        raise ValueError(f"strategy {template.strategy.value} does not take exemplars")
    if exemplars is not None:
        for ex in exemplars.items:
            if ex.post_id == post.post_id:
                raise ValueError(f"exemplar leakage: post {post.post_id} is under classification")

    body = template.body.replace("{output_schema}", template.output_schema)
    if is_icl:
        body = body.replace("{exemplars}", render_exemplars(exemplars))
    # post text goes in last so its content is never re-scanned for placeholders
    body = body.replace("{post_text}", post.clean_text)
    if template.system_preamble:
        return template.system_preamble + "\n\n" + body
    return body


def render_judge_prompt(
    template: JudgeTemplate,
    post: CleanPost,
    predicted_mode: TravelMode,
    predicted_sentiment: Sentiment,
    rationale: str = "",
    flags: Sequence[str] = (),
    include_rationale: bool = True,
) -> str:
    """Render the verifier prompt. `include_rationale=False` gives the
    blind-judge variant (prediction only)."""
    body = template.body
    body = body.replace("{predicted_mode}", predicted_mode.value)
    body = body.replace("{predicted_sentiment}", predicted_sentiment.value)
    body = body.replace("{rationale}", rationale if include_rationale else "(hidden)")
    body = body.replace(
        "{flags}", ", ".join(flags) if (flags and include_rationale) else "none"
    )
    body = body.replace("{post_text}", post.clean_text)
    if template.system_preamble:
        return template.system_preamble + "\n\n" + body
    return body


def load_exemplar_pool(path=None) -> list[Exemplar]:
    """Read a labeled exemplar pool (JSON Lines); defaults to the packaged pool."""
    if path is None:
        text = resources.files("transitlens.data").joinpath("exemplars.jsonl").read_text("utf-8")
    else:
        text = Path(path).read_text("utf-8")
    pool = []
    for line in text.splitlines():
        if not line.strip():
            continue
        row = json.loads(line)
        pool.append(
            Exemplar(
                post_id=row["post_id"],
                post_text=row["post_text"],
                mode=TravelMode(row["mode"]),
                sentiment=Sentiment(row["sentiment"]),
            )
        )
    return pool


def select_exemplars(pool: Sequence[Exemplar], k: int, seed: int) -> ExemplarSet:
    """Deterministic exemplar selection, stratified so that k >= 3 picks cover
    a Positive, a Negative and an NA-mode exemplar whenever the pool allows."""
    if k < 1:
        raise ValueError("k must be at least 1")
    if len(pool) < k:
        raise ValueError(f"exemplar pool has {len(pool)} items, need {k}")
    rng = random.Random(seed)
    if k < 3:
        return ExemplarSet(items=tuple(rng.sample(list(pool), k)))

    requirements = [
        lambda e: e.sentiment is Sentiment.POSITIVE,
        lambda e: e.sentiment is Sentiment.NEGATIVE,
        lambda e: e.mode is TravelMode.NA,
    ]
    chosen: list[Exemplar] = []
    for requirement in requirements:
        if any(requirement(e) for e in chosen):
            continue
        candidates = [e for e in pool if requirement(e) and e not in chosen]
        if candidates:
            chosen.append(rng.choice(candidates))
    remaining = [e for e in pool if e not in chosen]
    fill = k - len(chosen)
    if fill > 0:
        chosen.extend(rng.sample(remaining, fill))
    return ExemplarSet(items=tuple(chosen[:k]))
