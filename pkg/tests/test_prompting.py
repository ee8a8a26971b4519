import pytest

from transitlens.prompting import (
    DEFAULT_OUTPUT_SCHEMA,
    Exemplar,
    ExemplarSet,
    PromptStrategy,
    TemplateError,
    load_exemplar_pool,
    load_templates,
    parse_strategy,
    render_prompt,
    select_exemplars,
)
from transitlens.taxonomy import Sentiment, TravelMode

from conftest import make_clean


def _pool(n=30, seed=3):
    """A mixed labeled pool with all the classes stratification needs."""
    import random

    rng = random.Random(seed)
    modes = [m for m in TravelMode]
    sentiments = [s for s in Sentiment]
    pool = []
    for i in range(n):
        pool.append(
            Exemplar(
                post_id=f"pool-{i}",
                post_text=f"labeled example number {i}",
                mode=rng.choice(modes),
                sentiment=rng.choice(sentiments),
            )
        )
    # guarantee the required classes exist
    pool[0] = Exemplar("pool-0", "great ride", TravelMode.BIKE, Sentiment.POSITIVE)
    pool[1] = Exemplar("pool-1", "late again", TravelMode.BUS, Sentiment.NEGATIVE)
    pool[2] = Exemplar("pool-2", "lunch spot", TravelMode.NA, Sentiment.NEUTRAL)
    return pool


class TestLoadTemplates:
    def test_default_pack_has_all_strategies_and_verifier(self, templates):
        assert set(templates.by_strategy) == set(PromptStrategy)
        assert templates.verifier is not None

    def test_missing_strategy_is_fatal(self, tmp_path):
        pack = tmp_path / "pack"
        pack.mkdir()
        (pack / "only.txt").write_text(
            "---\nstrategy: instruction_following\n---\nPost: \"{post_text}\"\n{output_schema}\n"
        )
        with pytest.raises(TemplateError, match="no template for"):
            load_templates(pack)

    def test_cot_without_trigger_phrase_is_fatal(self, tmp_path):
        pack = tmp_path / "pack"
        pack.mkdir()
        (pack / "cot.txt").write_text(
            "---\nstrategy: chain_of_thought\n---\nThink hard.\nPost: \"{post_text}\"\n"
        )
        with pytest.raises(TemplateError, match="trigger phrase"):
            load_templates(pack)

    def test_double_post_placeholder_is_fatal(self, tmp_path):
        pack = tmp_path / "pack"
        pack.mkdir()
        (pack / "bad.txt").write_text(
            "---\nstrategy: analogical\n---\n{post_text} and {post_text}\n"
        )
        with pytest.raises(TemplateError, match="exactly once"):
            load_templates(pack)

    def test_cot_template_contains_trigger(self, templates):
        cot = templates[PromptStrategy.CHAIN_OF_THOUGHT]
        assert "Let's think step by step" in cot.body


class TestRenderPrompt:
    def test_instruction_following_contains_post_and_schema(self, templates):
        post = make_clean("p1", "the bus was late")
        rendered = render_prompt(templates[PromptStrategy.INSTRUCTION_FOLLOWING], post)
        assert rendered.count(post.clean_text) == 1
        assert "Travel mode:" in rendered
        assert "Example post:" not in rendered

    def test_icl_renders_exemplars_in_order(self, templates):
        post = make_clean("p1", "the bus was late")
        exemplars = ExemplarSet(
            items=(
                Exemplar("e1", "first example", TravelMode.BUS, Sentiment.NEGATIVE),
                Exemplar("e2", "second example", TravelMode.BIKE, Sentiment.POSITIVE),
                Exemplar("e3", "third example", TravelMode.NA, Sentiment.NEUTRAL),
            )
        )
        rendered = render_prompt(
            templates[PromptStrategy.IN_CONTEXT_LEARNING], post, exemplars
        )
        first = rendered.index("first example")
        second = rendered.index("second example")
        third = rendered.index("third example")
        assert first < second < third < rendered.index(post.clean_text)
        assert rendered.count(post.clean_text) == 1

    def test_icl_without_exemplars_is_contract_violation(self, templates):
        with pytest.raises(ValueError):
            render_prompt(templates[PromptStrategy.IN_CONTEXT_LEARNING], make_clean("p", "x"))

    def test_non_icl_with_exemplars_is_contract_violation(self, templates):
        exemplars = ExemplarSet(
            items=(Exemplar("e", "t", TravelMode.BUS, Sentiment.NEUTRAL),)
        )
        with pytest.raises(ValueError):
            render_prompt(templates[PromptStrategy.ANALOGICAL], make_clean("p", "x"), exemplars)

    def test_post_among_exemplars_is_leakage(self, templates):
        post = make_clean("p1", "the bus was late")
        exemplars = ExemplarSet(
            items=(Exemplar("p1", "the bus was late", TravelMode.BUS, Sentiment.NEGATIVE),)
        )
        with pytest.raises(ValueError, match="leakage"):
            render_prompt(templates[PromptStrategy.IN_CONTEXT_LEARNING], post, exemplars)

    def test_rendering_is_deterministic(self, templates):
        post = make_clean("p1", "the mta again")
        a = render_prompt(templates[PromptStrategy.CHAIN_OF_THOUGHT], post)
        b = render_prompt(templates[PromptStrategy.CHAIN_OF_THOUGHT], post)
        assert a == b

    def test_rendered_length_arithmetic_oracle(self, templates):
        # length must equal template length minus placeholders plus insertions
        post = make_clean("p1", "a very specific post body")
        template = templates[PromptStrategy.INSTRUCTION_FOLLOWING]
        rendered = render_prompt(template, post)
        expected = (
            len(template.system_preamble)
            + 2  # the joining blank line
            + len(template.body)
            - len("{post_text}")
            + len(post.clean_text)
            - len("{output_schema}")
            + len(template.output_schema)
        )
        assert len(rendered) == expected

    def test_every_strategy_contains_post_exactly_once(self, templates):
        post = make_clean("p9", "one of a kind text marker xyzzy")
        exemplars = ExemplarSet(
            items=(Exemplar("e", "plain example", TravelMode.BUS, Sentiment.NEUTRAL),)
        )
        for strategy in PromptStrategy:
            ex = exemplars if strategy is PromptStrategy.IN_CONTEXT_LEARNING else None
            rendered = render_prompt(templates[strategy], post, ex)
            assert rendered.count(post.clean_text) == 1, strategy


class TestSelectExemplars:
    def test_whole_pool_when_k_equals_size(self):
        pool = _pool(3)
        chosen = select_exemplars(pool, 3, seed=1)
        assert set(chosen.items) == set(pool)

    def test_deterministic_for_same_inputs(self):
        pool = _pool(30)
        a = select_exemplars(pool, 3, seed=42)
        b = select_exemplars(pool, 3, seed=42)
        assert a == b

    def test_different_seeds_allowed_to_differ(self):
        pool = _pool(30)
        picks = {tuple(select_exemplars(pool, 3, seed=s).items) for s in range(10)}
        assert len(picks) > 1

    def test_stratification_brute_force(self):
        pool = _pool(30)
        for seed in range(20):
            chosen = select_exemplars(pool, 3, seed=seed).items
            assert any(e.sentiment is Sentiment.POSITIVE for e in chosen), seed
            assert any(e.sentiment is Sentiment.NEGATIVE for e in chosen), seed
            assert any(e.mode is TravelMode.NA for e in chosen), seed

    def test_pool_smaller_than_k(self):
        with pytest.raises(ValueError):
            select_exemplars(_pool(3), 4, seed=0)

    def test_packaged_pool_loads(self):
        pool = load_exemplar_pool()
        assert len(pool) >= 3
        assert any(e.mode is TravelMode.NA for e in pool)


def test_parse_strategy_aliases():
    assert parse_strategy("icl") is PromptStrategy.IN_CONTEXT_LEARNING
    assert parse_strategy("CoT") is PromptStrategy.CHAIN_OF_THOUGHT
    assert parse_strategy("in-context-learning") is PromptStrategy.IN_CONTEXT_LEARNING
    with pytest.raises(TemplateError):
        parse_strategy("telepathy")


def test_default_schema_demands_three_labeled_lines():
    assert "Travel mode:" in DEFAULT_OUTPUT_SCHEMA
    assert "Sentiment:" in DEFAULT_OUTPUT_SCHEMA
    assert "Reason:" in DEFAULT_OUTPUT_SCHEMA
