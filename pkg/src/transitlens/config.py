"""YAML run configuration: endpoints, keyword sets, data-pack paths, limits."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import yaml

from .gateway import EndpointConfig


class ConfigError(Exception):
    """Fatal configuration problem; the CLI maps this to exit code 1."""


# Default collection keyword sets; plural forms are spelled out because
# matching is whole-word on purpose.
DEFAULT_KEYWORDS = {
    "subway": [
        "subway", "metro", "path", "mta", "lirr", "train", "trains",
        "light rail", "transit",
    ],
    "bus": ["bus", "buses", "public transport"],
    "bike": ["bike", "bikes", "bicycle", "bicycles", "cycling", "citi bike"],
    "taxi": ["taxi", "taxis", "cab", "cabs", "uber", "lyft", "rideshare"],
    "car": ["car", "cars", "driving", "highway"],
    "walk": ["walk", "walking", "on foot"],
}


@dataclass
class AppConfig:
    runs_dir: Path = Path("runs")
    corpus_format: Optional[str] = None  # None = infer from extension
    keywords: dict = field(default_factory=lambda: {k: list(v) for k, v in DEFAULT_KEYWORDS.items()})
    apply_keyword_filter: bool = False
    taxonomy_path: Optional[Path] = None
    templates_dir: Optional[Path] = None
    stopwords_path: Optional[Path] = None
    exemplars_path: Optional[Path] = None
    exemplar_k: int = 3
    exemplar_seed: int = 7
    chunk_size: int = 32
    max_in_flight: int = 4
    top_n_words: int = 50
    log_transcripts: bool = False
    static_dir: Optional[Path] = None
    reasoner: EndpointConfig = field(default_factory=EndpointConfig)
    verifier: EndpointConfig = field(default_factory=lambda: EndpointConfig(model_name="stub-judge"))


def _endpoint_from(data: dict, fallback_model: str) -> EndpointConfig:
    try:
        config = EndpointConfig.from_dict(data or {})
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad endpoint config: {exc}") from exc
    if not data or "model_name" not in data:
        config.model_name = fallback_model
    return config


def load_config(path=None) -> AppConfig:
    """Build an AppConfig from a YAML file; no file means the defaults."""
    if path is None:
        return AppConfig()
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        doc = yaml.safe_load(path.read_text("utf-8")) or {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top level must be a mapping")

    config = AppConfig()
    base = path.parent

    def _resolve(value) -> Path:
        p = Path(value)
        return p if p.is_absolute() else base / p

    if "runs_dir" in doc:
        config.runs_dir = _resolve(doc["runs_dir"])
    if "corpus_format" in doc:
        config.corpus_format = doc["corpus_format"]
    if "keywords" in doc:
        if not isinstance(doc["keywords"], dict):
            raise ConfigError("keywords must map a hint name to a list of strings")
        config.keywords = {str(k): [str(w) for w in v] for k, v in doc["keywords"].items()}
    for flag in ("apply_keyword_filter", "log_transcripts"):
        if flag in doc:
            setattr(config, flag, bool(doc[flag]))
    for path_key in ("taxonomy_path", "templates_dir", "stopwords_path", "exemplars_path", "static_dir"):
        if doc.get(path_key):
            setattr(config, path_key, _resolve(doc[path_key]))
    for int_key in ("exemplar_k", "exemplar_seed", "chunk_size", "max_in_flight", "top_n_words"):
        if int_key in doc:
            setattr(config, int_key, int(doc[int_key]))
    if "reasoner_endpoint" in doc:
        config.reasoner = _endpoint_from(doc["reasoner_endpoint"], "stub-rules")
    if "verifier_endpoint" in doc:
        config.verifier = _endpoint_from(doc["verifier_endpoint"], "stub-judge")
    return config
