"""Template matching, HTML compilation, and the layout checker loop."""

from __future__ import annotations

import json
import logging
import random
import re
import shutil
from dataclasses import dataclass, replace
from pathlib import Path

from .errors import PageForgeError, ValidationFailed
from .generator import PageContent, content_prompt_json, has_math
from .planner import VerificationReport
from .provider import (
    ChatProvider,
    JudgeProvider,
    JsonExtractError,
    extract_html_block,
    extract_json_block,
)
from .prompts import MATHJAX_SNIPPET, render
from .screenshot import Screenshotter

log = logging.getLogger(__name__)

_STYLESHEET_HREF = re.compile(
    r"<link[^>]*rel=[\"']stylesheet[\"'][^>]*href=[\"']([^\"']+)[\"']|"
    r"<link[^>]*href=[\"']([^\"']+)[\"'][^>]*rel=[\"']stylesheet[\"']",
    re.IGNORECASE,
)
_LOCAL_REF = re.compile(r"(?:src|href)\s*=\s*[\"']([^\"']+)[\"']", re.IGNORECASE)
_IMG_TAG = re.compile(r"<img\b[^>]*>", re.IGNORECASE)
_IMG_SRC = re.compile(r"<img\b[^>]*\bsrc\s*=\s*[\"']([^\"']+)[\"']", re.IGNORECASE)
_SIZE_COMMENT = re.compile(r"<!--\s*width\s*=\s*[\d.]+\s*,\s*height\s*=\s*[\d.]+\s*-->")
_HEADING_TEXT = re.compile(r"<h[1-6][^>]*>(.*?)</h[1-6]>", re.IGNORECASE | re.DOTALL)
_TAG_IN_TEXT = re.compile(r"(>\s*)((?:Figure|Fig\.?|Table)\s+\d+\s*[.:])\s*", re.IGNORECASE)
_MATHJAX_MARK = "mathjax@3"


def strip_tags(html: str) -> str:
    text = re.sub(r"<(script|style)\b.*?</\1>", " ", html, flags=re.IGNORECASE | re.DOTALL)
    text = re.sub(r"<!--.*?-->", " ", text, flags=re.DOTALL)
    text = re.sub(r"<[^>]+>", " ", text)
    return re.sub(r"\s+", " ", text).strip()


@dataclass(frozen=True)
class Template:
    id: str
    html_skeleton: str
    style_paths: tuple[str, ...]
    tags: dict[str, object]
    complexity: int
    root: Path | None = None

    def stylesheet_hrefs(self) -> set[str]:
        out = set()
        for m in _STYLESHEET_HREF.finditer(self.html_skeleton):
            out.add(m.group(1) or m.group(2))
        return out


@dataclass(frozen=True)
class TemplateLibrary:
    templates: tuple[Template, ...]
    tag_vocabulary: frozenset[str]

    def get(self, template_id: str) -> Template:
        for t in self.templates:
            if t.id == template_id:
                return t
        raise KeyError(f"no template with id {template_id!r}")


def load_template_library(root: str | Path) -> TemplateLibrary:
    """Read the bundle layout: one directory per template with ``template.html``,
    optional styles, and a ``manifest.json`` carrying id, tags, complexity."""
    root = Path(root)
    if not root.is_dir():
        raise PageForgeError(f"template library not found: {root}")
    templates = []
    vocabulary: set[str] = set()
    declared = None
    library_meta = root / "library.json"
    if library_meta.is_file():
        declared = set(json.loads(library_meta.read_text(encoding="utf-8")).get(
            "tag_vocabulary", []
        ))
    for tdir in sorted(p for p in root.iterdir() if p.is_dir()):
        manifest_path = tdir / "manifest.json"
        html_path = tdir / "template.html"
        if not manifest_path.is_file() or not html_path.is_file():
            log.warning("skipping %s: missing manifest.json or template.html", tdir)
            continue
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
        styles = tuple(
            str(p.relative_to(tdir)) for p in sorted(tdir.rglob("*.css"))
        )
        tags = dict(manifest.get("tags", {}))
        vocabulary.update(tags)
        templates.append(
            Template(
                id=manifest.get("id", tdir.name),
                html_skeleton=html_path.read_text(encoding="utf-8"),
                style_paths=styles,
                tags=tags,
                complexity=int(manifest.get("complexity", 0)),
                root=tdir,
            )
        )
    if not templates:
        raise PageForgeError(f"template library at {root} is empty")
    return TemplateLibrary(
        templates=tuple(templates),
        tag_vocabulary=frozenset(declared if declared is not None else vocabulary),
    )


def save_template(root: str | Path, template: Template) -> Path:
    tdir = Path(root) / template.id
    tdir.mkdir(parents=True, exist_ok=True)
    (tdir / "template.html").write_text(template.html_skeleton, encoding="utf-8")
    (tdir / "manifest.json").write_text(
        json.dumps(
            {"id": template.id, "tags": template.tags, "complexity": template.complexity},
            indent=2,
        ),
        encoding="utf-8",
    )
    if template.root is not None:
        for style in template.style_paths:
            src = template.root / style
            if src.is_file():
                dst = tdir / style
                dst.parent.mkdir(parents=True, exist_ok=True)
                shutil.copyfile(src, dst)
    return tdir


def match_templates(lib: TemplateLibrary, tag_query: dict[str, object]) -> list[Template]:
    """Templates whose tags satisfy every query entry, in library order."""
    for key in tag_query:
        if key not in lib.tag_vocabulary:
            raise KeyError(f"unknown template tag {key!r}")
    return [
        t for t in lib.templates if all(t.tags.get(k) == v for k, v in tag_query.items())
    ]


def select_template(
    candidates: list[Template], choice: str | random.Random
) -> Template:
    """Pick a template: a user-selected id, or seeded-uniform in autonomous mode."""
    if not candidates:
        raise PageForgeError("no candidate templates to select from")
    if isinstance(choice, random.Random):
        return candidates[choice.randrange(len(candidates))]
    for t in candidates:
        if t.id == choice:
            return t
    raise PageForgeError(f"selected template {choice!r} is not among the candidates")


# --- page rendering ------------------------------------------------------------


@dataclass(frozen=True)
class HtmlPage:
    html: str
    output_dir: Path
    asset_manifest: tuple[str, ...] = ()
    screenshot_path: Path | None = None


def page_asset_name(index: int, source_path: str) -> str:
    return f"paper-picture-{index}{Path(source_path).suffix.lower()}"


def _page_content_for_prompt(content: PageContent) -> str:
    """Content JSON with placement paths rewritten to on-page asset paths."""
    rewritten = PageContent(
        sections=tuple(
            (
                name,
                replace(
                    sc,
                    placements=tuple(
                        replace(p, path=f"assets/{page_asset_name(p.index, p.path)}")
                        for p in sc.placements
                    ),
                ),
            )
            for name, sc in content.sections
        )
    )
    return content_prompt_json(rewritten)


def _ensure_math_snippet(html: str, want_math: bool) -> str:
    present = _MATHJAX_MARK in html.lower()
    if want_math and not present:
        idx = html.lower().find("</head>")
        if idx == -1:
            return MATHJAX_SNIPPET + "\n" + html
        return html[:idx] + MATHJAX_SNIPPET + "\n" + html[idx:]
    if not want_math and present:
        html = html.replace(MATHJAX_SNIPPET, "")
        html = re.sub(
            r"<script[^>]*mathjax@3[^>]*>\s*</script>", "", html, flags=re.IGNORECASE
        )
        html = re.sub(
            r"<script>\s*window\.MathJax.*?</script>", "", html, flags=re.DOTALL
        )
    return html


def _ensure_size_comments(html: str, content: PageContent) -> str:
    dims = {}
    for p in content.all_placements():
        dims[page_asset_name(p.index, p.path)] = (p.width, p.height)
    out = []
    last = 0
    for m in _IMG_TAG.finditer(html):
        preceding = html[max(0, m.start() - 200) : m.start()]
        if not _SIZE_COMMENT.search(preceding):
            src = _IMG_SRC.match(m.group(0)) or re.search(
                r"src\s*=\s*[\"']([^\"']+)[\"']", m.group(0)
            )
            name = Path(src.group(1)).name if src else ""
            width, height = dims.get(name, (0, 0))
            if width:
                out.append(html[last : m.start()])
                out.append(f"<!-- width = {width}, height = {height} -->\n")
                last = m.start()
    out.append(html[last:])
    return "".join(out)


def _strip_caption_tags_in_text(html: str) -> str:
    return _TAG_IN_TEXT.sub(r"\1", html)


def render_html(
    content: PageContent,
    template: Template,
    provider: ChatProvider,
    *,
    output_dir: str | Path,
    asset_dir: str | Path | None = None,
) -> HtmlPage:
    """Compile content into the chosen template and materialize the page dir.

    Output layout: ``index.html`` at the top, placement images copied under
    ``assets/``, the template's styles copied verbatim under their original
    relative paths.
    """
    output_dir = Path(output_dir)
    system, user = render(
        "html_generation",
        generated_content=_page_content_for_prompt(content),
        html_template=template.html_skeleton,
    )
    want_hrefs = template.stylesheet_hrefs()
    messages = [("system", system), ("user", user)]
    html: str | None = None
    for attempt in range(2):
        reply = provider.chat(messages, stage="render_html")
        try:
            candidate = extract_html_block(reply)
            text = strip_tags(candidate).lower()
            missing = [n for n in content.names if n.lower() not in text]
            if missing:
                raise ValidationFailed(f"rendered page misses sections: {missing}")
            got_hrefs = set()
            for m in _STYLESHEET_HREF.finditer(candidate):
                got_hrefs.add(m.group(1) or m.group(2))
            if got_hrefs != want_hrefs:
                raise ValidationFailed(
                    f"stylesheet paths changed: {sorted(got_hrefs)} != {sorted(want_hrefs)}"
                )
            html = candidate
            break
        except (JsonExtractError, ValidationFailed) as exc:
            if attempt == 1:
                raise ValidationFailed(f"html generation failed after retry: {exc}") from exc
            messages = messages + [
                ("assistant", reply),
                ("user", f"Your previous reply was invalid: {exc}. Produce the full "
                         "corrected page as a fenced ```html block."),
            ]
    assert html is not None

    html = _ensure_math_snippet(html, has_math(content))
    html = _ensure_size_comments(html, content)
    html = _strip_caption_tags_in_text(html)

    output_dir.mkdir(parents=True, exist_ok=True)
    manifest: list[str] = []
    assets_out = output_dir / "assets"
    for p in content.all_placements():
        name = page_asset_name(p.index, p.path)
        assets_out.mkdir(parents=True, exist_ok=True)
        dst = assets_out / name
        if asset_dir is not None and (Path(asset_dir) / p.path).is_file():
            shutil.copyfile(Path(asset_dir) / p.path, dst)
        else:
            dst.touch()
        manifest.append(f"assets/{name}")
    if template.root is not None:
        for style in template.style_paths:
            src = template.root / style
            if src.is_file():
                dst = output_dir / style
                dst.parent.mkdir(parents=True, exist_ok=True)
                shutil.copyfile(src, dst)
                manifest.append(style)
    (output_dir / "index.html").write_text(html, encoding="utf-8")
    return HtmlPage(html=html, output_dir=output_dir, asset_manifest=tuple(manifest))


def validate_html(page: HtmlPage, content: PageContent) -> VerificationReport:
    """Deterministic checks on a rendered page; aesthetic judgment stays with the VLM."""
    violations: list[tuple[str, str]] = []
    html = page.html

    try:
        from .bench.domtree import standardize_dom

        standardize_dom(html)
    except Exception as exc:  # noqa: BLE001 - parseability is the check itself
        violations.append(("parse", f"page does not parse: {exc}"))

    for m in _LOCAL_REF.finditer(html):
        ref = m.group(1)
        if ref.startswith(("http://", "https://", "//", "data:", "mailto:", "#", "javascript:")):
            continue
        target = (page.output_dir / ref.split("#")[0].split("?")[0]).resolve()
        if not target.is_file():
            violations.append(("dangling_ref", f"local reference {ref!r} does not resolve"))
        elif page.output_dir.resolve() not in target.parents:
            violations.append(("escaping_ref", f"reference {ref!r} escapes the output dir"))

    text = strip_tags(html).lower()
    for name in content.names:
        if name.lower() not in text:
            violations.append(("missing_section", name))

    srcs = [Path(m.group(1)).name for m in _IMG_SRC.finditer(html)]
    for p in content.all_placements():
        expected = page_asset_name(p.index, p.path)
        n = srcs.count(expected)
        if n == 0:
            violations.append(("missing_placement", str(p.index)))
        elif n > 1:
            violations.append(("duplicate_placement", str(p.index)))

    math_wanted = has_math(content)
    math_present = _MATHJAX_MARK in html.lower()
    if math_wanted != math_present:
        violations.append(
            ("math_script", "missing math script" if math_wanted else "spurious math script")
        )

    for m in _IMG_TAG.finditer(html):
        preceding = html[max(0, m.start() - 200) : m.start()]
        if not _SIZE_COMMENT.search(preceding):
            violations.append(("size_comment", f"no size comment before {m.group(0)[:60]}"))

    return VerificationReport.from_violations(violations)


# --- layout checker loop --------------------------------------------------------


@dataclass(frozen=True)
class HtmlReview:
    weaknesses: tuple[str, ...]
    strengths: tuple[str, ...]
    suggestions: tuple[str, ...]

    def __post_init__(self) -> None:
        for s in self.suggestions:
            low = s.lower()
            if ("width" in low or "shrink" in low) and not re.search(r"\d+\s*%", s):
                raise ValidationFailed(f"width suggestion must use a percentage: {s!r}")
            if ("margin" in low or "spacing" in low) and not re.search(r"\d+\s*px", s):
                raise ValidationFailed(f"spacing suggestion must use pixels: {s!r}")

    @property
    def empty(self) -> bool:
        return not (self.weaknesses or self.strengths or self.suggestions)

    def to_json(self) -> dict:
        return {
            "weaknesses": list(self.weaknesses),
            "strengths": list(self.strengths),
            "suggestions": list(self.suggestions),
        }


def _html_review_from_reply(value: object) -> HtmlReview:
    if not isinstance(value, dict):
        raise ValidationFailed("review must be a JSON object")
    fields = []
    for plural, singular in (
        ("weaknesses", "weakness"),
        ("strengths", "strength"),
        ("suggestions", "suggestion"),
    ):
        items = value.get(plural, value.get(singular))
        if items is None:
            raise ValidationFailed(f"review missing field {plural!r}")
        if not isinstance(items, list):
            raise ValidationFailed(f"review field {plural!r} must be a list")
        fields.append(tuple(str(x) for x in items))
    return HtmlReview(*fields)


def review_html(
    page: HtmlPage, screenshotter: Screenshotter, provider: JudgeProvider
) -> HtmlReview:
    """One aggregated layout review across all images, from a screenshot."""
    shot = screenshotter.capture(page.output_dir)
    image = Path(shot).read_bytes()
    system, body = render("html_review")
    prompt = f"{system}\n\n{body}"
    last_error: Exception | None = None
    for attempt in range(2):
        reply = provider.vision_chat(image, prompt, stage="html_review", temperature=0.0)
        try:
            return _html_review_from_reply(extract_json_block(reply))
        except (JsonExtractError, ValidationFailed) as exc:
            last_error = exc
            prompt = (
                f"{system}\n\n{body}\n\nYour previous reply was invalid ({exc}); "
                "return the JSON object exactly as specified."
            )
    raise ValidationFailed(f"html review invalid after repair retry: {last_error}")


def _page_signature(html: str) -> tuple[frozenset[str], frozenset[str]]:
    headings = frozenset(
        re.sub(r"<[^>]+>", "", m.group(1)).strip().lower()
        for m in _HEADING_TEXT.finditer(html)
    )
    images = frozenset(Path(m.group(1)).name for m in _IMG_SRC.finditer(html))
    return headings, images


def _apply_html_edit(
    page: HtmlPage,
    provider: ChatProvider,
    template_name: str,
    stage: str,
    **placeholders: object,
) -> HtmlPage:
    """Shared edit step: chat, extract html, enforce content preservation."""
    system, user = render(template_name, **placeholders)
    before = _page_signature(page.html)
    messages = [("system", system), ("user", user)]
    for attempt in range(2):
        reply = provider.chat(messages, stage=stage, temperature=0.0)
        try:
            html = extract_html_block(reply)
            if _page_signature(html) != before:
                raise ValidationFailed("edit lost sections or images")
            (page.output_dir / "index.html").write_text(html, encoding="utf-8")
            return replace(page, html=html)
        except (JsonExtractError, ValidationFailed) as exc:
            if attempt == 1:
                raise ValidationFailed(f"{stage} failed after retry: {exc}") from exc
            messages = messages + [
                ("assistant", reply),
                ("user", f"Your previous reply was invalid: {exc}. Return the complete "
                         "page again as a fenced ```html block, preserving all content."),
            ]
    raise AssertionError("unreachable")


def revise_html(page: HtmlPage, review: HtmlReview, provider: ChatProvider) -> HtmlPage:
    """Apply review suggestions; the section and image sets must survive."""
    if review.empty:
        return page
    return _apply_html_edit(
        page,
        provider,
        "html_revise",
        "html_revise",
        existing_html=page.html,
        suggestions=json.dumps(review.to_json(), indent=2),
    )


def refine_html_loop(
    page: HtmlPage,
    content: PageContent,
    max_iter: int,
    screenshotter: Screenshotter,
    judge: JudgeProvider,
    chat: ChatProvider,
) -> tuple[HtmlPage, bool, int]:
    """Review/revise until the review is weakness-free and validation passes.

    Returns (page, converged, iterations used).
    """
    if max_iter < 0:
        raise ValueError("max_iter must be >= 0")
    if max_iter == 0:
        return page, validate_html(page, content).passed, 0

    iterations = 0
    for _ in range(max_iter):
        iterations += 1
        review = review_html(page, screenshotter, judge)
        valid = validate_html(page, content)
        if valid.passed and not review.weaknesses:
            return page, True, iterations
        if not valid.passed:
            review = HtmlReview(
                weaknesses=review.weaknesses + tuple(f"[{r}] {d}" for r, d in valid.violations),
                strengths=review.strengths,
                suggestions=review.suggestions,
            )
        page = revise_html(page, review, chat)
    converged = validate_html(page, content).passed and not review.weaknesses
    return page, converged, iterations


def apply_style_feedback(
    page: HtmlPage, feedback: str, provider: ChatProvider, content: PageContent
) -> HtmlPage:
    """Apply an author styling instruction; content preservation is enforced."""
    if not feedback.strip():
        return page
    result = _apply_html_edit(
        page,
        provider,
        "style_feedback",
        "style_feedback",
        existing_html=page.html,
        feedback=feedback,
    )
    report = validate_html(result, content)
    if not report.passed:
        raise ValidationFailed(
            "style feedback produced an invalid page", violations=list(report.violations)
        )
    return result
