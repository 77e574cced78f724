from __future__ import annotations

import json
import random
import re

import pytest

from conftest import ScriptedChat, fenced_json, make_template_bundle
from pageforge.errors import PageForgeError, ValidationFailed
from pageforge.generator import generate_text_content, place_figures
from pageforge.planner import SectionPlan
from pageforge.provider import UsageLedger, parse_judge_reply
from pageforge.renderer import (
    HtmlPage,
    HtmlReview,
    apply_style_feedback,
    load_template_library,
    match_templates,
    refine_html_loop,
    render_html,
    review_html,
    revise_html,
    select_template,
    validate_html,
)
from pageforge.screenshot import StubScreenshotter


@pytest.fixture
def template_lib(tmp_path):
    return load_template_library(make_template_bundle(tmp_path / "templates"))


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
def placed_content(plan, library, doc, providers):
    content = generate_text_content(plan, library, doc, providers.chat)
    return place_figures(content, library, doc, providers.chat)


@pytest.fixture
def rendered(placed_content, template_lib, providers, tmp_path, paper_dir):
    page = render_html(
        placed_content,
        template_lib.templates[0],
        providers.chat,
        output_dir=tmp_path / "site",
        asset_dir=paper_dir / "assets",
    )
    return page, placed_content


class ScriptedJudge:
    def __init__(self, replies):
        self.replies = list(replies)
        self.calls = []

    def vision_chat(self, image, prompt, *, stage="judge", temperature=0.0):
        self.calls.append({"stage": stage, "temperature": temperature, "prompt": prompt})
        return self.replies.pop(0)

    def judge(self, image, rubric_prompt, *, stage="judge"):
        return parse_judge_reply(lambda p: self.vision_chat(image, p, stage=stage), rubric_prompt)


class TestMatchTemplates:
    def test_tag_filter(self, template_lib):
        matched = match_templates(template_lib, {"has_navigation": True})
        assert len(matched) == 4
        assert all(t.tags["has_navigation"] for t in matched)

    def test_empty_query_returns_all_in_order(self, template_lib):
        matched = match_templates(template_lib, {})
        assert [t.id for t in matched] == [t.id for t in template_lib.templates]

    def test_unknown_key_names_the_key(self, template_lib):
        with pytest.raises(KeyError, match="no_such_tag"):
            match_templates(template_lib, {"no_such_tag": 1})


class TestSelectTemplate:
    def test_singleton(self, template_lib):
        only = [template_lib.templates[0]]
        assert select_template(only, random.Random(0)) is only[0]

    def test_seeded_pick_is_replayable(self, template_lib):
        candidates = list(template_lib.templates[:5])
        first = select_template(candidates, random.Random(42))
        again = select_template(candidates, random.Random(42))
        assert first.id == again.id

    def test_pick_by_id(self, template_lib):
        assert select_template(list(template_lib.templates), "tpl-03").id == "tpl-03"

    def test_empty_candidates_rejected(self):
        with pytest.raises(PageForgeError):
            select_template([], random.Random(0))

    def test_unknown_id_rejected(self, template_lib):
        with pytest.raises(PageForgeError):
            select_template(list(template_lib.templates), "tpl-99")


class TestRenderHtml:
    def test_sections_and_stylesheets_present(self, rendered, template_lib):
        page, content = rendered
        for name in content.names:
            assert name in page.html
        assert 'href="static/main.css"' in page.html
        assert (page.output_dir / "static" / "main.css").is_file()
        assert (page.output_dir / "index.html").is_file()

    def test_assets_copied_under_output(self, rendered):
        page, content = rendered
        for p in content.all_placements():
            assert (page.output_dir / "assets" / f"paper-picture-{p.index}.png").is_file()

    def test_math_script_present_iff_prose_has_math(self, rendered):
        page, content = rendered
        from pageforge.generator import has_math

        assert has_math(content)  # fixture paper carries display math
        assert "mathjax@3" in page.html.lower()

    def test_no_math_no_script(self, plan, library, doc, providers, template_lib, tmp_path, paper_dir):
        no_math = {n: f"Plain text about {n}." for n, _ in plan.sections}
        chat = ScriptedChat(
            [fenced_json(no_math), lambda m: providers.chat.chat(m)]
        )
        content = generate_text_content(plan, library, doc, chat)
        page = render_html(
            content,
            template_lib.templates[0],
            providers.chat,
            output_dir=tmp_path / "nomath",
            asset_dir=paper_dir / "assets",
        )
        assert "mathjax" not in page.html.lower()

    def test_size_comments_precede_images(self, rendered):
        page, _ = rendered
        for m in re.finditer(r"<img\b", page.html):
            preceding = page.html[max(0, m.start() - 200) : m.start()]
            assert re.search(r"<!--\s*width\s*=\s*[\d.]+\s*,\s*height\s*=\s*[\d.]+\s*-->", preceding)

    def test_stylesheet_rewrite_rejected(self, placed_content, template_lib, tmp_path, paper_dir):
        bad_html = (
            "```html\n<!DOCTYPE html>\n<html><head>"
            '<link rel="stylesheet" href="static/RENAMED.css">'
            "</head><body>"
            + "".join(f"<h2>{n}</h2>" for n in placed_content.names)
            + "</body></html>\n```"
        )
        chat = ScriptedChat([bad_html, bad_html])
        with pytest.raises(ValidationFailed, match="stylesheet"):
            render_html(
                placed_content,
                template_lib.templates[0],
                chat,
                output_dir=tmp_path / "bad",
                asset_dir=paper_dir / "assets",
            )

    def test_missing_section_retried_then_rejected(self, placed_content, template_lib, tmp_path, paper_dir):
        incomplete = (
            "```html\n<!DOCTYPE html>\n<html><head>"
            '<link rel="stylesheet" href="static/main.css">'
            "</head><body><h2>Overview</h2></body></html>\n```"
        )
        chat = ScriptedChat([incomplete, incomplete])
        with pytest.raises(ValidationFailed, match="misses sections"):
            render_html(
                placed_content,
                template_lib.templates[0],
                chat,
                output_dir=tmp_path / "inc",
                asset_dir=paper_dir / "assets",
            )
        assert len(chat.calls) == 2


class TestValidateHtml:
    def test_well_formed_page_passes(self, rendered):
        page, content = rendered
        report = validate_html(page, content)
        assert report.passed, report.violations

    def test_missing_placement_flagged(self, rendered):
        page, content = rendered
        html = re.sub(r"<img[^>]*paper-picture-1[^>]*>", "", page.html)
        broken = HtmlPage(html=html, output_dir=page.output_dir)
        rules = {r for r, _ in validate_html(broken, content).violations}
        assert "missing_placement" in rules

    def test_dangling_src_flagged(self, rendered):
        page, content = rendered
        html = page.html.replace("assets/paper-picture-2.png", "assets/ghost.png")
        broken = HtmlPage(html=html, output_dir=page.output_dir)
        rules = {r for r, _ in validate_html(broken, content).violations}
        assert "dangling_ref" in rules and "missing_placement" in rules

    def test_spurious_math_script_flagged(self, rendered, plan):
        page, content = rendered
        from pageforge.generator import PageContent, SectionContent

        mathless = PageContent(
            sections=tuple(
                (n, SectionContent("plain", sc.placements)) for n, sc in content.sections
            )
        )
        rules = {r for r, _ in validate_html(page, mathless).violations}
        assert "math_script" in rules


class TestReviewHtml:
    def test_aggregated_review_with_unit_validation(self, rendered):
        page, _ = rendered
        reply = json.dumps(
            {
                "weaknesses": ["image 1 exceeds the main text block"],
                "strengths": [],
                "suggestions": [
                    "shrink to 90% of original width",
                    "set both top and bottom margin to 24px",
                ],
            }
        )
        judge = ScriptedJudge([reply])
        review = review_html(page, StubScreenshotter(), judge)
        assert review.weaknesses and len(review.suggestions) == 2
        assert judge.calls[0]["temperature"] == 0.0

    def test_clean_page_empty_review(self, rendered, providers):
        page, _ = rendered
        review = review_html(page, StubScreenshotter(), providers.judge)
        assert review.weaknesses == ()

    def test_width_suggestion_without_percentage_rejected(self, rendered):
        page, _ = rendered
        bad = json.dumps(
            {"weaknesses": [], "strengths": [], "suggestions": ["shrink the width a bit"]}
        )
        judge = ScriptedJudge([bad, bad])
        with pytest.raises(ValidationFailed, match="percentage"):
            review_html(page, StubScreenshotter(), judge)

    def test_spacing_suggestion_without_pixels_rejected(self):
        with pytest.raises(ValidationFailed, match="pixels"):
            HtmlReview((), (), ("even out the vertical spacing",))


class TestReviseHtml:
    def test_shrink_applied_and_content_preserved(self, rendered):
        page, content = rendered
        review = HtmlReview(
            weaknesses=("image too wide",),
            strengths=(),
            suggestions=("shrink to 90% of original width",),
        )
        revised_html = page.html.replace("max-width: 90%", "max-width: 81%")
        chat = ScriptedChat([f"```html\n{revised_html}\n```"])
        revised = revise_html(page, review, chat)
        assert "max-width: 81%" in revised.html
        assert validate_html(revised, content).passed

    def test_empty_review_is_no_op(self, rendered):
        page, _ = rendered
        chat = ScriptedChat([])
        assert revise_html(page, HtmlReview((), (), ()), chat) is page

    def test_dropped_section_rejected(self, rendered):
        page, _ = rendered
        mutilated = re.sub(r"<h2>Method</h2>", "", page.html)
        chat = ScriptedChat([f"```html\n{mutilated}\n```"] * 2)
        review = HtmlReview(("w",), (), ())
        with pytest.raises(ValidationFailed, match="lost"):
            revise_html(page, review, chat)


class TestRefineHtmlLoop:
    def test_zero_iterations_unchanged(self, rendered):
        page, content = rendered
        out, converged, iters = refine_html_loop(
            page, content, 0, StubScreenshotter(), ScriptedJudge([]), ScriptedChat([])
        )
        assert out is page and iters == 0 and converged

    def test_converges_in_two_rounds(self, rendered):
        page, content = rendered
        weak = json.dumps(
            {"weaknesses": ["too wide"], "strengths": [], "suggestions": ["shrink to 90% of original width"]}
        )
        clean = json.dumps({"weaknesses": [], "strengths": [], "suggestions": []})
        judge = ScriptedJudge([weak, clean])
        chat = ScriptedChat([f"```html\n{page.html}\n```"])
        _, converged, iters = refine_html_loop(
            page, content, 3, StubScreenshotter(), judge, chat
        )
        assert converged and iters == 2

    def test_non_converging_hits_bound(self, rendered):
        page, content = rendered
        weak = json.dumps(
            {"weaknesses": ["always"], "strengths": [], "suggestions": []}
        )
        judge = ScriptedJudge([weak] * 3)
        chat = ScriptedChat([f"```html\n{page.html}\n```"] * 3)
        _, converged, iters = refine_html_loop(
            page, content, 3, StubScreenshotter(), judge, chat
        )
        assert not converged and iters == 3


class TestStyleFeedback:
    def test_add_navigation_bar(self, rendered, providers):
        page, content = rendered
        updated = apply_style_feedback(page, "add the navigation bar", providers.chat, content)
        assert "<nav" in updated.html
        assert validate_html(updated, content).passed

    def test_table_colors_instruction(self, rendered, providers):
        page, content = rendered
        updated = apply_style_feedback(
            page, "adjust the table colors to match the theme", providers.chat, content
        )
        assert set(content.names) == {
            n for n in content.names if n in updated.html
        }

    def test_empty_feedback_no_op(self, rendered):
        page, content = rendered
        chat = ScriptedChat([])
        assert apply_style_feedback(page, "", chat, content) is page
