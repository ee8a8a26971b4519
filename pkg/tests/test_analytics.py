import random
from collections import Counter

import pytest

from transitlens.analytics import (
    full_distribution,
    load_stopwords,
    mode_distribution,
    mode_share_by_sentiment,
    rank_dissatisfaction,
    sentiment_by_mode,
    word_frequencies,
)
from transitlens.prompting import PromptStrategy
from transitlens.reasoner import ParseStatus, ReasonerOutput
from transitlens.taxonomy import Sentiment, TravelMode

from conftest import make_clean


def _output(i, mode, sentiment, rationale="", status=ParseStatus.FULL):
    return ReasonerOutput(
        post_id=f"p{i}",
        mode=mode,
        sentiment=sentiment,
        rationale=rationale,
        strategy=PromptStrategy.INSTRUCTION_FOLLOWING,
        model_name="stub-rules",
        parse_status=status,
        raw_response="",
    )


def _random_outputs(rng, n):
    modes = list(TravelMode)
    sentiments = list(Sentiment)
    outputs = []
    for i in range(n):
        status = ParseStatus.FAILED if rng.random() < 0.05 else ParseStatus.FULL
        mode = TravelMode.NA if status is ParseStatus.FAILED else rng.choice(modes)
        sentiment = Sentiment.NEUTRAL if status is ParseStatus.FAILED else rng.choice(sentiments)
        outputs.append(_output(i, mode, sentiment, status=status))
    return outputs


class TestModeDistribution:
    def test_simple_arithmetic(self):
        outputs = [
            _output(0, TravelMode.SUBWAY_METRO, Sentiment.NEUTRAL),
            _output(1, TravelMode.SUBWAY_METRO, Sentiment.NEUTRAL),
            _output(2, TravelMode.BIKE, Sentiment.NEUTRAL),
            _output(3, TravelMode.NA, Sentiment.NEUTRAL),
        ]
        report = mode_distribution(outputs)
        assert report.per_mode[TravelMode.SUBWAY_METRO] == (2, 0.5)
        assert report.per_mode[TravelMode.BIKE] == (1, 0.25)
        assert report.per_mode[TravelMode.NA] == (1, 0.25)

    def test_empty_input(self):
        report = mode_distribution([])
        assert report.total == 0
        assert all(count == 0 for count, _ in report.per_mode.values())

    def test_na_split_by_origin(self):
        outputs = [
            _output(0, TravelMode.NA, Sentiment.NEUTRAL),
            _output(1, TravelMode.NA, Sentiment.NEUTRAL, status=ParseStatus.FAILED),
        ]
        report = mode_distribution(outputs)
        assert report.per_mode[TravelMode.NA] == (2, 1.0)
        assert report.na_from_content == 1
        assert report.na_from_parse_failures == 1

    def test_proportions_sum_to_one(self):
        rng = random.Random(4)
        for trial in range(50):
            outputs = _random_outputs(rng, rng.randrange(1, 60))
            report = mode_distribution(outputs)
            assert abs(sum(p for _, p in report.per_mode.values()) - 1.0) <= 1e-9

    def test_matches_independent_tally(self):
        rng = random.Random(11)
        outputs = _random_outputs(rng, 300)
        report = mode_distribution(outputs)
        oracle = Counter(o.mode for o in outputs)
        for mode in TravelMode:
            assert report.per_mode[mode][0] == oracle.get(mode, 0)
            assert report.per_mode[mode][1] == oracle.get(mode, 0) / 300


class TestSentimentByMode:
    def test_two_thirds_one_third(self):
        outputs = [
            _output(0, TravelMode.BUS, Sentiment.NEGATIVE),
            _output(1, TravelMode.BUS, Sentiment.NEGATIVE),
            _output(2, TravelMode.BUS, Sentiment.POSITIVE),
        ]
        report = sentiment_by_mode(outputs)
        assert report.per_mode_sentiment[(TravelMode.BUS, Sentiment.NEGATIVE)] == (2, 2 / 3)
        assert report.per_mode_sentiment[(TravelMode.BUS, Sentiment.POSITIVE)] == (1, 1 / 3)
        assert report.per_mode_sentiment[(TravelMode.BUS, Sentiment.NEUTRAL)] == (0, 0.0)

    def test_per_mode_families_sum_to_one(self):
        rng = random.Random(5)
        outputs = _random_outputs(rng, 200)
        report = sentiment_by_mode(outputs)
        modes = {m for (m, _s) in report.per_mode_sentiment}
        for mode in modes:
            total = sum(
                p for (m, _s), (_c, p) in report.per_mode_sentiment.items() if m is mode
            )
            assert abs(total - 1.0) <= 1e-9

    def test_matches_independent_tally(self):
        rng = random.Random(6)
        outputs = _random_outputs(rng, 250)
        report = sentiment_by_mode(outputs)
        oracle = Counter((o.mode, o.sentiment) for o in outputs)
        for (mode, sentiment), (count, _p) in report.per_mode_sentiment.items():
            assert count == oracle.get((mode, sentiment), 0)


class TestModeShareBySentiment:
    def test_shares_sum_to_one_per_sentiment(self):
        rng = random.Random(7)
        outputs = _random_outputs(rng, 150)
        report = mode_share_by_sentiment(outputs)
        sentiments = {s for (s, _m) in report.per_sentiment_mode_share}
        for sentiment in sentiments:
            total = sum(
                share
                for (s, _m), share in report.per_sentiment_mode_share.items()
                if s is sentiment
            )
            assert abs(total - 1.0) <= 1e-9

    def test_two_item_case(self):
        outputs = [
            _output(0, TravelMode.BUS, Sentiment.POSITIVE),
            _output(1, TravelMode.BIKE, Sentiment.POSITIVE),
        ]
        report = mode_share_by_sentiment(outputs)
        assert report.per_sentiment_mode_share[(Sentiment.POSITIVE, TravelMode.BUS)] == 0.5
        assert report.per_sentiment_mode_share[(Sentiment.POSITIVE, TravelMode.BIKE)] == 0.5

    def test_empty(self):
        report = mode_share_by_sentiment([])
        assert report.per_sentiment_mode_share == {}


class TestRankDissatisfaction:
    def test_two_delays_one_fare(self):
        outputs = [
            _output(0, TravelMode.SUBWAY_METRO, Sentiment.NEGATIVE, "train delayed badly"),
            _output(1, TravelMode.SUBWAY_METRO, Sentiment.NEGATIVE, "stuck waiting forever"),
            _output(2, TravelMode.SUBWAY_METRO, Sentiment.NEGATIVE, "the fare is too high"),
        ]
        ranking = rank_dissatisfaction(outputs, TravelMode.SUBWAY_METRO)
        assert [(r.category.label, r.count) for r in ranking.ranked] == [
            ("delays-waiting", 2),
            ("fares", 1),
        ]
        assert ranking.uncategorized_count == 0

    def test_all_uncategorizable(self):
        outputs = [
            _output(0, TravelMode.BUS, Sentiment.NEGATIVE, "just bad vibes"),
            _output(1, TravelMode.BUS, Sentiment.NEGATIVE, "no specific complaint"),
        ]
        ranking = rank_dissatisfaction(outputs, TravelMode.BUS)
        assert ranking.ranked == []
        assert ranking.uncategorized_count == 2

    def test_na_is_contract_violation(self):
        with pytest.raises(ValueError):
            rank_dissatisfaction([], TravelMode.NA)

    def test_only_negative_posts_of_that_mode_count(self):
        outputs = [
            _output(0, TravelMode.BUS, Sentiment.NEGATIVE, "late again"),
            _output(1, TravelMode.BUS, Sentiment.POSITIVE, "late but fine"),
            _output(2, TravelMode.BIKE, Sentiment.NEGATIVE, "late lane repairs"),
        ]
        ranking = rank_dissatisfaction(outputs, TravelMode.BUS)
        assert sum(r.count for r in ranking.ranked) + ranking.uncategorized_count == 1

    def test_ties_break_by_catalog_rank_total_order(self):
        outputs = [
            _output(0, TravelMode.SUBWAY_METRO, Sentiment.NEGATIVE, "the fare hike hurts"),
            _output(1, TravelMode.SUBWAY_METRO, Sentiment.NEGATIVE, "platform smells of smoke"),
        ]
        ranking = rank_dissatisfaction(outputs, TravelMode.SUBWAY_METRO)
        labels = [r.category.label for r in ranking.ranked]
        assert labels == ["smoking-odor", "fares"]  # equal counts; rank 4 before rank 6
        seen = set()
        for r in ranking.ranked:
            key = (r.count, r.category.rank)
            assert key not in seen
            seen.add(key)

    def test_proportions_among_categorized(self):
        outputs = [
            _output(0, TravelMode.SUBWAY_METRO, Sentiment.NEGATIVE, "delayed"),
            _output(1, TravelMode.SUBWAY_METRO, Sentiment.NEGATIVE, "weird thing"),
        ]
        ranking = rank_dissatisfaction(outputs, TravelMode.SUBWAY_METRO)
        assert ranking.ranked[0].proportion == 1.0
        assert ranking.uncategorized_count == 1


class TestWordFrequencies:
    def test_bus_among_top_tokens(self):
        posts = [
            make_clean("p1", "the bus was late near the bus terminal"),
            make_clean("p2", "bus to the port authority"),
        ]
        tables = word_frequencies({TravelMode.BUS: posts})
        top_words = [w for w, _ in tables[TravelMode.BUS][:5]]
        assert "bus" in top_words

    def test_stopwords_and_short_tokens_removed(self):
        posts = [make_clean("p1", "a an the")]
        tables = word_frequencies({TravelMode.NA: posts})
        assert tables[TravelMode.NA] == []

    def test_matches_brute_force_token_count(self):
        posts = [
            make_clean("p1", "delay delay delay on the train line"),
            make_clean("p2", "train line closed, use the other train"),
        ]
        stopwords = load_stopwords()
        tables = word_frequencies({TravelMode.SUBWAY_METRO: posts}, stopwords)
        oracle = Counter()
        for post in posts:
            for token in __import__("re").split(r"[^0-9A-Za-z]+", post.clean_text.lower()):
                if len(token) >= 3 and token not in stopwords:
                    oracle[token] += 1
        assert dict(tables[TravelMode.SUBWAY_METRO]) == dict(oracle)

    def test_top_n_cutoff(self):
        posts = [make_clean("p1", " ".join(f"word{i}" for i in range(100)))]
        tables = word_frequencies({TravelMode.NA: posts}, top_n=10)
        assert len(tables[TravelMode.NA]) == 10

    def test_lowercased(self):
        posts = [make_clean("p1", "Bus BUS bus")]
        tables = word_frequencies({TravelMode.BUS: posts})
        assert tables[TravelMode.BUS] == [("bus", 3)]


def test_full_distribution_combines_all_parts():
    rng = random.Random(12)
    outputs = _random_outputs(rng, 80)
    report = full_distribution(outputs)
    assert report.total == 80
    assert report.per_mode
    assert report.per_mode_sentiment
    assert report.per_sentiment_mode_share
    as_dict = report.to_dict()
    assert set(as_dict) == {
        "total", "per_mode", "na_from_parse_failures", "na_from_content",
        "per_mode_sentiment", "per_sentiment_mode_share",
    }
