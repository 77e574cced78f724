from __future__ import annotations

import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import ScriptedChat, fenced_json
from pageforge.errors import NotationError, ValidationFailed
from pageforge.generator import (
    ContentReview,
    FigurePlacement,
    PageContent,
    SectionContent,
    apply_author_feedback,
    enforce_content_rules,
    generate_text_content,
    parse_figure_notation,
    place_figures,
    refine_content_loop,
    review_content,
    revise_content,
    serialize_figure_notation,
    teaser_index,
)
from pageforge.planner import SectionPlan

PROMPT_EXAMPLE = '![Overview]["assets/paper-picture-8.png"][width=1068, height=128](8)'


@pytest.fixture
def plan():
    return SectionPlan(
        paper_type="methodology",
        sections=(
            ("Overview", "Problem and contribution."),
            ("Method", "The approach."),
            ("Experiments", "Results."),
            ("Conclusion", "Takeaways."),
        ),
    )


@pytest.fixture
def text_content(plan, library, doc, providers):
    return generate_text_content(plan, library, doc, providers.chat)


@pytest.fixture
def placed_content(text_content, library, doc, providers):
    return place_figures(text_content, library, doc, providers.chat)


class TestNotation:
    def test_prompt_example_string(self):
        placements = parse_figure_notation(PROMPT_EXAMPLE)
        assert len(placements) == 1
        p = placements[0]
        assert (p.description, p.path, p.width, p.height, p.index) == (
            "Overview",
            "assets/paper-picture-8.png",
            1068,
            128,
            8,
        )

    def test_plain_prose_has_no_placements(self):
        assert parse_figure_notation("no tokens in here at all") == []

    def test_unquoted_path_accepted(self):
        tokens = parse_figure_notation("![x][a/b.png][width=10, height=5](2)")
        assert tokens[0].path == "a/b.png"

    def test_non_integer_index_is_an_error_with_offset(self):
        text = "padding ![x][p][width=10, height=5](two)"
        with pytest.raises(NotationError, match="integer") as exc_info:
            parse_figure_notation(text)
        assert exc_info.value.offset == text.index("![")

    def test_malformed_size_block_is_an_error(self):
        with pytest.raises(NotationError, match="size"):
            parse_figure_notation("![x][p][w=10](1)")

    def test_textual_order_preserved(self):
        text = (
            '![b]["q.png"][width=2, height=2](2) filler ![a]["p.png"][width=1, height=1](1)'
        )
        assert [p.index for p in parse_figure_notation(text)] == [2, 1]

    @given(
        st.builds(
            FigurePlacement,
            description=st.text(
                alphabet=st.characters(blacklist_characters="[]\\", blacklist_categories=("Cs", "Cc")),
                max_size=40,
            ),
            path=st.text(alphabet="abcdefghij/._-", min_size=1, max_size=30).map(
                lambda s: s.strip() or "p"
            ),
            width=st.integers(min_value=1, max_value=4000),
            height=st.integers(min_value=1, max_value=4000),
            index=st.integers(min_value=1, max_value=99),
        )
    )
    def test_serialize_parse_round_trip(self, placement):
        text = serialize_figure_notation(placement)
        assert parse_figure_notation(text) == [placement]


class TestGenerateTextContent:
    def test_every_plan_section_has_prose_and_no_placements(self, text_content, plan):
        assert text_content.names == plan.names
        for _, sc in text_content.sections:
            assert sc.prose.strip()
            assert sc.placements == ()

    def test_caption_tags_stripped_from_prose(self, plan, library, doc):
        reply = {name: f"Figure 2. Text about {name}" for name in plan.names}
        chat = ScriptedChat([fenced_json(reply)])
        content = generate_text_content(plan, library, doc, chat)
        for _, sc in content.sections:
            assert not sc.prose.startswith("Figure 2.")

    def test_renamed_section_fails_after_retry(self, plan, library, doc):
        wrong = {**{n: "text" for n in plan.names[:-1]}, "Renamed": "text"}
        chat = ScriptedChat([fenced_json(wrong), fenced_json(wrong)])
        with pytest.raises(ValidationFailed):
            generate_text_content(plan, library, doc, chat)


class TestPlaceFigures:
    def test_mock_places_all_assets_once(self, placed_content, library):
        placed = [p.index for p in placed_content.all_placements()]
        assert sorted(placed) == [1, 2, 3]

    def test_placement_dimensions_follow_library(self, placed_content, library):
        for p in placed_content.all_placements():
            asset = library.asset(p.index)
            assert (p.width, p.height) == (asset.width, asset.height)

    def test_duplicate_index_rejected(self, text_content, library, doc):
        token = serialize_figure_notation(
            FigurePlacement("x", library.asset(1).path, 640, 360, 1)
        )
        reply = {n: f"{sc.prose}\n\n{token}" for n, sc in text_content.sections}
        chat = ScriptedChat([fenced_json(reply), fenced_json(reply)])
        with pytest.raises(ValidationFailed, match="more than once"):
            place_figures(text_content, library, doc, chat)

    def test_out_of_range_index_rejected(self, text_content, library, doc):
        token = "![x][\"p.png\"][width=5, height=5](99)"
        reply = {n: sc.prose for n, sc in text_content.sections}
        first = text_content.names[0]
        reply[first] += "\n\n" + token
        chat = ScriptedChat([fenced_json(reply), fenced_json(reply)])
        with pytest.raises(ValidationFailed, match="outside library range"):
            place_figures(text_content, library, doc, chat)

    def test_prose_survives_placement_verbatim(self, text_content, placed_content):
        for (_, before), (_, after) in zip(text_content.sections, placed_content.sections):
            assert before.prose == after.prose

    def test_conclusion_placements_dropped(self, text_content, library, doc):
        token = serialize_figure_notation(
            FigurePlacement("x", library.asset(1).path, 640, 360, 1)
        )
        reply = {n: sc.prose for n, sc in text_content.sections}
        reply["Conclusion"] += "\n\n" + token
        chat = ScriptedChat([fenced_json(reply)])
        content = place_figures(text_content, library, doc, chat)
        assert content.section("Conclusion").placements == ()


class TestTeaser:
    def test_teaser_is_early_figure(self, library, doc):
        assert teaser_index(library, doc) == 1

    def test_fallback_to_first_asset(self, library, doc):
        from dataclasses import replace

        stripped = library.__class__(
            text_repr=library.text_repr,
            assets=tuple(replace(a, original_section=None) for a in library.assets),
            asset_dir=library.asset_dir,
        )
        assert teaser_index(stripped, doc) == 1

    def test_no_assets_no_teaser(self, library, doc):
        empty = library.__class__(text_repr=library.text_repr, assets=(), asset_dir=library.asset_dir)
        assert teaser_index(empty, doc) is None


class TestEnforceContentRules:
    def test_compliant_content_passes(self, placed_content, library, doc):
        assert enforce_content_rules(placed_content, library, doc).passed

    def test_duplicate_index_flagged(self, placed_content, library, doc):
        p = placed_content.all_placements()[0]
        name, sc = placed_content.sections[0]
        doubled = PageContent(
            sections=((name, SectionContent(sc.prose, sc.placements + (p,))),)
            + placed_content.sections[1:]
        )
        rules = {r for r, _ in enforce_content_rules(doubled, library, doc).violations}
        assert "duplicate_index" in rules

    def test_teaser_missing_flagged(self, placed_content, library, doc):
        without = PageContent(
            sections=tuple(
                (n, SectionContent(sc.prose, tuple(p for p in sc.placements if p.index != 1)))
                for n, sc in placed_content.sections
            )
        )
        rules = {r for r, _ in enforce_content_rules(without, library, doc).violations}
        assert "teaser_missing" in rules

    def test_table_budget_enforced(self, doc, providers):
        # a library of four tables, all placed -> max_tables violation
        from pageforge.ingest import AssetLibrary, FigureAsset

        assets = tuple(
            FigureAsset(i, "table", f"Table {i}", None, f"t{i}.png", 10, 10, None)
            for i in range(1, 5)
        )
        lib = AssetLibrary(text_repr={}, assets=assets)
        placements = tuple(
            FigurePlacement(f"t{i}", f"t{i}.png", 10, 10, i) for i in range(1, 5)
        )
        content = PageContent(sections=(("Experiments", SectionContent("text", placements)),))
        rules = {r for r, _ in enforce_content_rules(content, lib, doc).violations}
        assert "max_tables" in rules


class TestReviewAndRevise:
    def test_clean_review_parsed(self, placed_content, doc, library, providers):
        review = review_content(placed_content, doc, library, providers.chat)
        assert review.weaknesses == ()
        assert isinstance(review, ContentReview)

    def test_review_checker_calls_are_temperature_zero(self, placed_content, doc, library):
        chat = ScriptedChat([fenced_json({"weakness": [], "strength": [], "suggestion": []})])
        review_content(placed_content, doc, library, chat)
        assert chat.calls[0]["temperature"] == 0.0

    def test_review_prompt_carries_deterministic_counts(self, placed_content, doc, library):
        chat = ScriptedChat([fenced_json({"weakness": [], "strength": [], "suggestion": []})])
        review_content(placed_content, doc, library, chat)
        joined = " ".join(text for _, text in chat.calls[0]["messages"])
        assert "places 1 table(s)" in joined and "2 figure(s)" in joined

    def test_prose_reply_is_an_error(self, placed_content, doc, library):
        chat = ScriptedChat(["not json at all", "still not json"])
        with pytest.raises(ValidationFailed):
            review_content(placed_content, doc, library, chat)

    def test_empty_review_is_a_no_op(self, placed_content, library):
        review = ContentReview((), (), ())
        chat = ScriptedChat([])  # would fail if called
        assert revise_content(placed_content, review, chat, library) is placed_content

    def test_revision_may_drop_a_placement(self, placed_content, library):
        review = ContentReview(("too many tables",), (), ("drop table 3",))
        reply = {
            n: "\n\n".join(
                [sc.prose]
                + [serialize_figure_notation(p) for p in sc.placements if p.index != 3]
            )
            for n, sc in placed_content.sections
        }
        chat = ScriptedChat([fenced_json(reply)])
        revised = revise_content(placed_content, review, chat, library)
        assert 3 not in [p.index for p in revised.all_placements()]
        for (_, before), (_, after) in zip(placed_content.sections, revised.sections):
            assert before.prose == after.prose  # byte-equal

    def test_prose_edit_rejected(self, placed_content, library):
        review = ContentReview(("w",), (), ())
        reply = {n: sc.prose + " EDITED" for n, sc in placed_content.sections}
        chat = ScriptedChat([fenced_json(reply), fenced_json(reply)])
        with pytest.raises(ValidationFailed, match="prose"):
            revise_content(placed_content, review, chat, library)


class TestRefineLoop:
    def test_zero_iterations_touches_nothing(self, placed_content, doc, library):
        chat = ScriptedChat([])
        content, converged, iters = refine_content_loop(
            placed_content, doc, library, chat, max_iter=0
        )
        assert content is placed_content and iters == 0
        assert converged  # mock-placed content already satisfies the rules

    def test_converges_in_one_round(self, placed_content, doc, library):
        chat = ScriptedChat([fenced_json({"weakness": [], "strength": [], "suggestion": []})])
        content, converged, iters = refine_content_loop(
            placed_content, doc, library, chat, max_iter=3
        )
        assert converged and iters == 1
        assert len(chat.calls) == 1  # review only, no revise

    def test_never_converging_mock_hits_bound(self, placed_content, doc, library):
        def weak_review(messages):
            return fenced_json(
                {"weakness": ["always unhappy"], "strength": [], "suggestion": []}
            )

        def echo_revise(messages):
            joined = " ".join(t for _, t in messages)
            start = joined.index("<project_page_content>") + len("<project_page_content>")
            end = joined.index("</project_page_content>", start)
            return fenced_json(json.loads(joined[start:end]))

        replies = [weak_review, echo_revise] * 3
        chat = ScriptedChat(replies)
        _, converged, iters = refine_content_loop(
            placed_content, doc, library, chat, max_iter=3
        )
        assert not converged and iters == 3


class TestAuthorFeedback:
    def test_delete_this_section(self, placed_content, library, doc, providers):
        result = apply_author_feedback(
            placed_content, "delete this section: Method", providers.chat, library, doc
        )
        assert "Method" not in result.names
        assert len(result.names) == len(placed_content.names) - 1

    def test_reorder_sections(self, placed_content, library, doc, providers):
        result = apply_author_feedback(
            placed_content, "reorder the sections", providers.chat, library, doc
        )
        assert set(result.names) == set(placed_content.names)
        assert result.names == list(reversed(placed_content.names))

    def test_empty_feedback_unchanged(self, placed_content, library, doc):
        chat = ScriptedChat([])
        assert (
            apply_author_feedback(placed_content, "   ", chat, library, doc) is placed_content
        )

    def test_invalid_result_errors_with_violations(self, placed_content, library, doc):
        # a reply that drops the teaser placement entirely
        reply = {n: sc.prose for n, sc in placed_content.sections}
        chat = ScriptedChat([fenced_json(reply)])
        with pytest.raises(ValidationFailed) as exc_info:
            apply_author_feedback(placed_content, "remove all figures", chat, library, doc)
        assert exc_info.value.violations
