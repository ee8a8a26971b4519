import pytest
from hypothesis import given, strategies as st

from transitlens.gateway import EndpointConfig, LlmGateway
from transitlens.prompting import PromptStrategy
from transitlens.reasoner import (
    FLAG_KEYWORD_ABSENCE,
    FLAG_SENTIMENT_MISMATCH,
    FLAG_UNPARSED,
    ParseStatus,
    ReasonerOutput,
    classify_batch,
    classify_post,
    parse_reasoner_response,
    reasoning_check,
)
from transitlens.taxonomy import Sentiment, TravelMode

from conftest import make_clean

GPT_STYLE = (
    "The travel mode related to the tweet is likely Metro, because of MTA. "
    "The sentiment expressed in the tweet is negative, as the user is expressing "
    "frustration and dissatisfaction with the attitude of MTA employees."
)
LLAMA_STYLE = "Travel mode: Walking, Sentiment: Negative"
MISTRAL_STYLE = "The travel mode related to the tweet is not explicitly stated"


class TestParseGoldens:
    def test_prose_style(self):
        mode, sentiment, rationale, status = parse_reasoner_response(GPT_STYLE)
        assert (mode, sentiment, status) == (
            TravelMode.SUBWAY_METRO,
            Sentiment.NEGATIVE,
            ParseStatus.FULL,
        )
        assert "because of MTA" in rationale

    def test_labeled_line_style(self):
        mode, sentiment, _, status = parse_reasoner_response(LLAMA_STYLE)
        assert (mode, sentiment, status) == (
            TravelMode.WALKING,
            Sentiment.NEGATIVE,
            ParseStatus.FULL,
        )

    def test_negation_style(self):
        mode, sentiment, _, status = parse_reasoner_response(MISTRAL_STYLE)
        assert mode is TravelMode.NA
        assert status is ParseStatus.PARTIAL
        assert sentiment is Sentiment.NEUTRAL  # safe default for the missing field

    def test_labeled_na(self):
        mode, _, _, status = parse_reasoner_response("Travel mode: NA\nSentiment: Neutral")
        assert mode is TravelMode.NA
        assert status is ParseStatus.FULL

    def test_reason_label_extracted(self):
        _, _, rationale, _ = parse_reasoner_response(
            "Travel mode: Bus\nSentiment: Negative\nReason: the driver was rude"
        )
        assert rationale == "the driver was rude"

    def test_multi_mode_keeps_first_and_notes_rest(self):
        mode, _, rationale, _ = parse_reasoner_response(
            "Travel mode: Bus\nTravel mode: Bike\nSentiment: Negative"
        )
        assert mode is TravelMode.BUS
        assert "Bike" in rationale

    def test_unknown_label_value_gives_partial(self):
        mode, sentiment, _, status = parse_reasoner_response(
            "Travel mode: hovercraft\nSentiment: Negative"
        )
        assert status is ParseStatus.PARTIAL
        assert mode is TravelMode.NA
        assert sentiment is Sentiment.NEGATIVE

    def test_gibberish_is_parse_failed_with_safe_defaults(self):
        mode, sentiment, _, status = parse_reasoner_response("great job!")
        assert (mode, sentiment, status) == (
            TravelMode.NA,
            Sentiment.NEUTRAL,
            ParseStatus.FAILED,
        )


ADVERSARIAL = [
    "",
    " ",
    "\n\n\n",
    "🙂🙂🙂",
    "\x00\x01\x02",
    "Travel mode:",
    "Sentiment:",
    "Travel mode: \nSentiment: ",
    "travel mode sentiment reason",
    "The travel mode is",
    "mode: Bus sentiment: happy",
    "TRAVEL MODE: BUS, SENTIMENT: NEGATIVE",
    "Travel mode: Bus Travel mode: Bike Travel mode: Walking",
    "The travel mode related to the tweet is likely Bus or maybe Bike, hard to say.",
    "I think they took the subway but also maybe a cab? Sentiment: mixed",
    "{'travel_mode': 'Bus', 'sentiment': 'Negative'}",
    '{"mode": "Bus"}',
    "<answer>Bus</answer>",
    "Mode score: 1.0\nSentiment score: 0.5",
    "Reason: because because because",
    "Travel mode: " + "Bus " * 500,
    "x" * 10_000,
    "42",
    "0.99",
    "Sentiment: Negative",
    "Travel mode: Bike",
    "the sentiment is positive!!!",
    "Ответ: автобус",
    "תחבורה ציבורית",
    "地铁很慢",
    "sentiment: النقل",
    "Travel mode: NA, Sentiment: NA",
    "NA",
    "n/a n/a n/a",
    "Let's think step by step. First, the mode. Second, the sentiment.",
    "I cannot classify this post.",
    "As an AI language model, I refuse.",
    "Travel mode: Subway/Metro\nSentiment: Positive\nReason: expressing frustration",
    "mode=Bus;sentiment=Negative",
    "travel mode ... is ... hmm",
    "The travel mode related to the tweet is not explicitly stated, sorry.",
    "no specific mode is mentioned here",
    "- Travel mode: Bus\n- Sentiment: Neutral",
    "1. Bus 2. Negative 3. because late",
    "Travel mode: the bus, Sentiment: the bad one",
    "\tTravel mode:\tBus\t\n\tSentiment:\tPositive\t",
    "Travel mode: Bus\r\nSentiment: Negative\r\n",
    "Post: \"the bus was late\"",
    "Sentiment: Neutral\nTravel mode: Bike",
    "emoji only 🚇 🚲 🚌",
]


class TestParseTotality:
    def test_adversarial_corpus_is_fifty_cases(self):
        assert len(ADVERSARIAL) == 50

    @pytest.mark.parametrize("raw", ADVERSARIAL)
    def test_never_raises_always_statused(self, raw):
        mode, sentiment, rationale, status = parse_reasoner_response(raw)
        assert isinstance(mode, TravelMode)
        assert isinstance(sentiment, Sentiment)
        assert isinstance(rationale, str)
        assert status in (ParseStatus.FULL, ParseStatus.PARTIAL, ParseStatus.FAILED)

    @given(st.text(max_size=400))
    def test_total_over_arbitrary_text(self, raw):
        mode, sentiment, _, status = parse_reasoner_response(raw)
        if status is ParseStatus.FAILED:
            assert mode is TravelMode.NA and sentiment is Sentiment.NEUTRAL

    def test_full_parse_reserialization_fixed_point(self):
        for raw in [GPT_STYLE, LLAMA_STYLE, "Travel mode: Bus\nSentiment: Positive\nReason: ok"]:
            mode, sentiment, rationale, status = parse_reasoner_response(raw)
            if status is not ParseStatus.FULL:
                continue
            serialized = (
                f"Travel mode: {mode.value}\nSentiment: {sentiment.value}\nReason: {rationale}"
            )
            mode2, sentiment2, _, status2 = parse_reasoner_response(serialized)
            assert (mode2, sentiment2, status2) == (mode, sentiment, ParseStatus.FULL)


class TestClassifyPost:
    def test_mta_tweet_via_stub(self, stub_gateway, templates):
        post = make_clean(
            "p1",
            "sorry to ask is being miserable a criteria to be employed by the mta? "
            "almost every mta employee is miserable and angry",
        )
        output = classify_post(post, PromptStrategy.INSTRUCTION_FOLLOWING, stub_gateway, templates)
        assert output.mode is TravelMode.SUBWAY_METRO
        assert output.sentiment is Sentiment.NEGATIVE
        assert output.parse_status is ParseStatus.FULL
        assert output.raw_response

    def test_subway_restaurant_post(self, stub_gateway, templates):
        post = make_clean("p2", "I like the sandwich at Subway in NYC")
        output = classify_post(post, PromptStrategy.INSTRUCTION_FOLLOWING, stub_gateway, templates)
        assert output.mode is TravelMode.NA
        assert output.sentiment is Sentiment.NEUTRAL

    def test_gateway_error_becomes_parse_failed(self, templates):
        def always_401(payload):
            return 401, {"error": "nope"}

        gateway = LlmGateway(EndpointConfig(), backend="remote", transport=always_401)
        post = make_clean("p3", "the bus was late")
        output = classify_post(post, PromptStrategy.INSTRUCTION_FOLLOWING, gateway, templates)
        assert output.parse_status is ParseStatus.FAILED
        assert output.mode is TravelMode.NA
        assert output.sentiment is Sentiment.NEUTRAL
        assert "gateway error" in output.rationale

    def test_stub_classification_is_deterministic(self, stub_gateway, templates):
        post = make_clean("p4", "the train was delayed, miserable commute")
        a = classify_post(post, PromptStrategy.CHAIN_OF_THOUGHT, stub_gateway, templates)
        b = classify_post(post, PromptStrategy.CHAIN_OF_THOUGHT, stub_gateway, templates)
        assert a == b

    def test_classify_batch_matches_single_calls(self, stub_gateway, templates):
        posts = [
            make_clean(f"p{i}", text)
            for i, text in enumerate(
                ["the bus was late", "love my bike lane", "nice weather today"]
            )
        ]
        batch = classify_batch(posts, PromptStrategy.ANALOGICAL, stub_gateway, templates)
        singles = [
            classify_post(p, PromptStrategy.ANALOGICAL, stub_gateway, templates) for p in posts
        ]
        assert [output for output, _ in batch] == singles


def _output(post_id="p1", mode=TravelMode.SUBWAY_METRO, sentiment=Sentiment.NEGATIVE,
            rationale="mentions mta", status=ParseStatus.FULL):
    return ReasonerOutput(
        post_id=post_id,
        mode=mode,
        sentiment=sentiment,
        rationale=rationale,
        strategy=PromptStrategy.INSTRUCTION_FOLLOWING,
        model_name="stub-rules",
        parse_status=status,
        raw_response="",
    )


class TestReasoningCheck:
    def test_consistent_when_synonym_present(self):
        post = make_clean("p1", "the mta is packed today")
        assert reasoning_check(_output(), post) == []

    def test_keyword_absence(self):
        post = make_clean("p1", "lovely evening downtown")
        flags = reasoning_check(_output(mode=TravelMode.BIKE), post)
        assert flags == [FLAG_KEYWORD_ABSENCE]

    def test_sentiment_rationale_mismatch(self):
        post = make_clean("p1", "the mta is fine")
        output = _output(
            sentiment=Sentiment.POSITIVE,
            rationale="the user is expressing frustration and dissatisfaction",
        )
        assert FLAG_SENTIMENT_MISMATCH in reasoning_check(output, post)

    def test_unparsed_flag(self):
        post = make_clean("p1", "anything")
        output = _output(mode=TravelMode.NA, sentiment=Sentiment.NEUTRAL, status=ParseStatus.FAILED)
        assert reasoning_check(output, post) == [FLAG_UNPARSED]

    def test_extra_keywords_suppress_absence_flag(self):
        post = make_clean("p1", "stuck on the q55 again")
        flags = reasoning_check(
            _output(mode=TravelMode.BUS),
            post,
            extra_keywords={TravelMode.BUS: ["q55"]},
        )
        assert flags == []

    def test_na_mode_never_flags_absence(self):
        post = make_clean("p1", "no transport here")
        output = _output(mode=TravelMode.NA, sentiment=Sentiment.NEUTRAL)
        assert reasoning_check(output, post) == []
