import threading
from datetime import datetime, timezone
from pathlib import Path

import pytest

from transitlens.config import AppConfig
from transitlens.corpus import RawPost, load_corpus, preprocess
from transitlens.gateway import EndpointConfig, LlmGateway
from transitlens.prompting import load_templates

FIXTURE_CORPUS = Path(__file__).parent / "fixtures" / "corpus_200.csv"


@pytest.fixture(scope="session")
def fixture_corpus_path() -> Path:
    return FIXTURE_CORPUS


@pytest.fixture(scope="session")
def fixture_posts():
    return load_corpus(FIXTURE_CORPUS, "csv").posts


@pytest.fixture(scope="session")
def fixture_clean_posts(fixture_posts):
    return [preprocess(p) for p in fixture_posts]


@pytest.fixture(scope="session")
def templates():
    return load_templates()


@pytest.fixture
def stub_gateway():
    return LlmGateway(EndpointConfig(), backend="stub")


@pytest.fixture
def judge_gateway():
    return LlmGateway(EndpointConfig(model_name="stub-judge"), backend="stub")


@pytest.fixture
def app_config(tmp_path) -> AppConfig:
    return AppConfig(runs_dir=tmp_path / "runs")


def make_post(post_id: str, text: str, user_id: str = "u1") -> RawPost:
    return RawPost(
        post_id=post_id,
        user_id=user_id,
        timestamp=datetime(2021, 6, 1, tzinfo=timezone.utc),
        text=text,
    )


def make_clean(post_id: str, text: str):
    return preprocess(make_post(post_id, text))


class FakeClock:
    """Virtual time: sleep() advances the clock instead of waiting."""

    def __init__(self):
        self.now = 0.0
        self._lock = threading.Lock()
        self.sleeps = []

    def clock(self) -> float:
        with self._lock:
            return self.now

    def sleep(self, duration: float) -> None:
        with self._lock:
            self.sleeps.append(duration)
            self.now += duration
