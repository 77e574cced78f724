"""Fill the plan with prose, place figures via index notation, run the content checker loop.

Generation is text-first: prose is produced and frozen before any figure is
placed, and the placement and revision steps may only touch placements.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass

from .errors import NotationError, ValidationFailed
from .ingest import CAPTION_TAG, AssetLibrary, PaperDocument
from .planner import SectionPlan, VerificationReport
from .provider import ChatProvider, chat_json
from .prompts import render

log = logging.getLogger(__name__)

MAX_TABLE_PLACEMENTS = 3


@dataclass(frozen=True)
class FigurePlacement:
    description: str
    path: str
    width: int
    height: int
    index: int

    def __post_init__(self) -> None:
        if self.index < 1:
            raise ValidationFailed(f"placement index must be >= 1, got {self.index}")
        if self.width <= 0 or self.height <= 0:
            raise ValidationFailed("placement dimensions must be positive")

    def to_json(self) -> dict:
        return {
            "description": self.description,
            "path": self.path,
            "width": self.width,
            "height": self.height,
            "index": self.index,
        }

    @classmethod
    def from_json(cls, data: dict) -> "FigurePlacement":
        return cls(
            description=data["description"],
            path=data["path"],
            width=data["width"],
            height=data["height"],
            index=data["index"],
        )


@dataclass(frozen=True)
class SectionContent:
    prose: str
    placements: tuple[FigurePlacement, ...] = ()


@dataclass(frozen=True)
class PageContent:
    sections: tuple[tuple[str, SectionContent], ...]

    @property
    def names(self) -> list[str]:
        return [name for name, _ in self.sections]

    def section(self, name: str) -> SectionContent:
        for n, sc in self.sections:
            if n == name:
                return sc
        raise KeyError(name)

    def all_placements(self) -> list[FigurePlacement]:
        return [p for _, sc in self.sections for p in sc.placements]

    def to_json(self) -> dict:
        return {
            "sections": [
                {
                    "name": name,
                    "prose": sc.prose,
                    "placements": [p.to_json() for p in sc.placements],
                }
                for name, sc in self.sections
            ]
        }

    @classmethod
    def from_json(cls, data: dict) -> "PageContent":
        return cls(
            sections=tuple(
                (
                    s["name"],
                    SectionContent(
                        prose=s["prose"],
                        placements=tuple(
                            FigurePlacement.from_json(p) for p in s["placements"]
                        ),
                    ),
                )
                for s in data["sections"]
            )
        )


# --- figure index notation ---------------------------------------------------

_NOTATION = re.compile(
    r"!\[(?P<desc>[^\[\]]*)\]"
    r"\[\s*\"?(?P<path>[^\[\]\"]+?)\"?\s*\]"
    r"\[width=(?P<w>\d+),\s*height=(?P<h>\d+)\]"
    r"\((?P<idx>\d+)\)"
)
_NOTATION_LOOSE = re.compile(
    r"!\[(?P<desc>[^\[\]]*)\]"
    r"\[\s*\"?(?P<path>[^\[\]\"]*?)\"?\s*\]"
    r"\[(?P<dims>[^\[\]]*)\]"
    r"\((?P<idx>[^()]*)\)"
)


def serialize_figure_notation(placement: FigurePlacement) -> str:
    return (
        f'![{placement.description}]["{placement.path}"]'
        f"[width={placement.width}, height={placement.height}]({placement.index})"
    )


def parse_figure_notation(text: str) -> list[FigurePlacement]:
    """Parse every placement token in textual order.

    Anything that does not start with ``![`` is ignored; a token that starts
    with ``![`` but fails the grammar raises :class:`NotationError` carrying
    the byte offset of the token.
    """
    placements: list[FigurePlacement] = []
    pos = 0
    while True:
        start = text.find("![", pos)
        if start == -1:
            return placements
        m = _NOTATION.match(text, start)
        if m:
            placements.append(
                FigurePlacement(
                    description=m.group("desc"),
                    path=m.group("path"),
                    width=int(m.group("w")),
                    height=int(m.group("h")),
                    index=int(m.group("idx")),
                )
            )
            pos = m.end()
            continue
        loose = _NOTATION_LOOSE.match(text, start)
        if loose:
            if not loose.group("idx").strip().isdigit():
                raise NotationError(
                    f"figure index must be an integer, got {loose.group('idx')!r}", start
                )
            raise NotationError(
                f"malformed size block {loose.group('dims')!r}, "
                "expected [width=<int>, height=<int>]",
                start,
            )
        raise NotationError("malformed figure placement token", start)


def split_notation(text: str) -> tuple[str, list[FigurePlacement]]:
    """Separate prose from placement tokens; prose whitespace is normalized."""
    placements = parse_figure_notation(text)
    return normalize_ws(_NOTATION.sub(" ", text)), placements


def normalize_ws(text: str) -> str:
    return re.sub(r"\s+", " ", text).strip()


def has_math(content: PageContent) -> bool:
    pattern = re.compile(r"\$[^$]+\$|\\\(|\\\[")
    return any(pattern.search(sc.prose) for _, sc in content.sections)


def _is_conclusion_like(name: str) -> bool:
    return "conclusion" in name.lower() or "summary" in name.lower()


def teaser_index(lib: AssetLibrary, doc: PaperDocument) -> int | None:
    """The early overview figure that must appear on the page.

    Chosen as the smallest-index figure whose original section is one of the
    first two document sections, falling back to index 1.
    """
    if not lib.assets:
        return None
    early = set(doc.headings[:2])
    candidates = [
        a.index for a in lib.assets if a.kind == "figure" and a.original_section in early
    ]
    return min(candidates) if candidates else 1


def _strip_caption_tags(prose: str) -> str:
    lines = []
    for line in prose.splitlines():
        m = CAPTION_TAG.match(line)
        if m:
            log.warning("stripping caption tag %r from prose", m.group(1))
            line = line[m.end() :]
        lines.append(line)
    return "\n".join(lines)


def content_prompt_json(content: PageContent, include_placements: bool = True) -> str:
    """Render content as the JSON object agents see in prompts."""
    obj = {}
    for name, sc in content.sections:
        text = sc.prose
        if include_placements and sc.placements:
            tokens = "\n".join(serialize_figure_notation(p) for p in sc.placements)
            text = f"{text}\n\n{tokens}" if text else tokens
        obj[name] = text
    return json.dumps(obj, indent=2)


# --- operations ---------------------------------------------------------------


def generate_text_content(
    plan: SectionPlan, lib: AssetLibrary, doc: PaperDocument, provider: ChatProvider
) -> PageContent:
    """Write prose for every planned section; placements stay empty here."""
    system, user = render(
        "text_content_generation",
        figures=lib.figures_json(),
        paper_content=doc.to_markdown(),
        format_instructions=json.dumps(dict(plan.sections), indent=2),
    )

    def validate(value: object) -> PageContent:
        if not isinstance(value, dict):
            raise ValidationFailed("content reply must be a JSON object")
        if list(value) != plan.names and set(value) != set(plan.names):
            raise ValidationFailed(
                f"section names {sorted(value)} must exactly match the plan {plan.names}"
            )
        sections = []
        for name in plan.names:
            prose = value[name]
            if not isinstance(prose, str) or not prose.strip():
                raise ValidationFailed(f"section {name!r} has empty prose")
            sections.append((name, SectionContent(prose=_strip_caption_tags(prose).strip())))
        return PageContent(sections=tuple(sections))

    return chat_json(
        provider, [("system", system), ("user", user)], stage="generate_text", validator=validate
    )


def _reconcile_placements(
    raw: list[FigurePlacement], lib: AssetLibrary, seen: set[int]
) -> tuple[FigurePlacement, ...]:
    out = []
    for p in raw:
        if p.index > len(lib.assets):
            raise ValidationFailed(f"placement index {p.index} outside library range")
        if p.index in seen:
            raise ValidationFailed(f"asset {p.index} placed more than once")
        seen.add(p.index)
        asset = lib.asset(p.index)
        # Dimensions and paths always come from the library record; the
        # notation's claim is advisory.
        out.append(
            FigurePlacement(
                description=p.description or asset.caption,
                path=asset.path,
                width=asset.width,
                height=asset.height,
                index=p.index,
            )
        )
    return tuple(out)


def place_figures(
    content: PageContent, lib: AssetLibrary, doc: PaperDocument, provider: ChatProvider
) -> PageContent:
    """Insert figure placements into text-only content.

    The reply's prose is discarded: only placement tokens are extracted, so
    the frozen prose from the text stage survives verbatim. Placements inside
    a conclusion-like final section are dropped.
    """
    system, user = render(
        "full_content_generation",
        figures=lib.figures_json(),
        project_page_content=content_prompt_json(content, include_placements=False),
        paper_content=doc.to_markdown(),
    )

    def validate(value: object) -> PageContent:
        if not isinstance(value, dict) or set(value) != set(content.names):
            raise ValidationFailed("reply section names must match the content")
        seen: set[int] = set()
        sections = []
        last = content.names[-1]
        for name, sc in content.sections:
            try:
                _, raw = split_notation(str(value[name]))
            except NotationError as exc:
                raise ValidationFailed(f"section {name!r}: {exc}") from exc
            if name == last and _is_conclusion_like(name) and raw:
                log.warning("dropping %d placement(s) from conclusion section", len(raw))
                raw = []
            sections.append((name, SectionContent(sc.prose, _reconcile_placements(raw, lib, seen))))
        return PageContent(sections=tuple(sections))

    return chat_json(
        provider, [("system", system), ("user", user)], stage="place_figures", validator=validate
    )


@dataclass(frozen=True)
class ContentReview:
    weaknesses: tuple[str, ...]
    strengths: tuple[str, ...]
    suggestions: tuple[str, ...]

    @property
    def empty(self) -> bool:
        return not (self.weaknesses or self.strengths or self.suggestions)

    def to_json(self) -> dict:
        return {
            "weakness": list(self.weaknesses),
            "strength": list(self.strengths),
            "suggestion": list(self.suggestions),
        }


def _review_from_reply(value: object) -> ContentReview:
    if not isinstance(value, dict):
        raise ValidationFailed("review must be a JSON object")
    fields = []
    for singular, plural in (
        ("weakness", "weaknesses"),
        ("strength", "strengths"),
        ("suggestion", "suggestions"),
    ):
        if singular in value:
            items = value[singular]
        elif plural in value:
            items = value[plural]
        else:
            raise ValidationFailed(f"review missing field {singular!r}")
        if not isinstance(items, list):
            raise ValidationFailed(f"review field {singular!r} must be a list")
        fields.append(tuple(str(x) for x in items))
    return ContentReview(*fields)


def review_content(
    content: PageContent, doc: PaperDocument, lib: AssetLibrary, provider: ChatProvider
) -> ContentReview:
    """Run the content checker; checker calls are always temperature 0."""
    figures = [a for a in lib.assets if a.kind == "figure"]
    tables = [a for a in lib.assets if a.kind == "table"]
    placed = {p.index for p in content.all_placements()}
    n_tables = sum(1 for a in tables if a.index in placed)
    n_figures = sum(1 for a in figures if a.index in placed)
    system, user = render(
        "full_content_review",
        figures=json.dumps([a.to_json() for a in figures], indent=2),
        tables=json.dumps([a.to_json() for a in tables], indent=2),
        paper_content=doc.to_markdown(),
        generated_content=content_prompt_json(content),
    )
    counts = (
        f"Counted deterministically: the content currently places {n_tables} table(s) "
        f"and {n_figures} figure(s)."
    )
    return chat_json(
        provider,
        [("system", system), ("user", user), ("user", counts)],
        stage="content_review",
        temperature=0.0,
        validator=_review_from_reply,
    )


def revise_content(
    content: PageContent,
    review: ContentReview,
    provider: ChatProvider,
    lib: AssetLibrary,
) -> PageContent:
    """Apply a review; prose and section names are frozen, placements may move."""
    if review.empty:
        return content
    system, user = render(
        "full_content_revise",
        review_content=json.dumps(review.to_json(), indent=2),
        generated_content=content_prompt_json(content),
    )

    def validate(value: object) -> PageContent:
        if not isinstance(value, dict) or set(value) != set(content.names):
            raise ValidationFailed("revision must keep the exact section set")
        seen: set[int] = set()
        sections = []
        for name, sc in content.sections:
            try:
                clean, raw = split_notation(str(value[name]))
            except NotationError as exc:
                raise ValidationFailed(f"section {name!r}: {exc}") from exc
            if clean != normalize_ws(sc.prose):
                raise ValidationFailed(f"revision changed the prose of section {name!r}")
            sections.append((name, SectionContent(sc.prose, _reconcile_placements(raw, lib, seen))))
        return PageContent(sections=tuple(sections))

    return chat_json(
        provider,
        [("system", system), ("user", user)],
        stage="content_revise",
        temperature=0.0,
        validator=validate,
    )


def enforce_content_rules(
    content: PageContent, lib: AssetLibrary, doc: PaperDocument
) -> VerificationReport:
    """Deterministic mirror of the checker's hard rules."""
    violations: list[tuple[str, str]] = []
    placements = content.all_placements()

    indices = [p.index for p in placements]
    dupes = sorted({i for i in indices if indices.count(i) > 1})
    if dupes:
        violations.append(("duplicate_index", f"assets placed more than once: {dupes}"))

    out_of_range = sorted({i for i in indices if i < 1 or i > len(lib.assets)})
    if out_of_range:
        violations.append(("index_range", f"placement indices outside library: {out_of_range}"))

    n_tables = sum(
        1
        for p in placements
        if 1 <= p.index <= len(lib.assets) and lib.asset(p.index).kind == "table"
    )
    if n_tables > MAX_TABLE_PLACEMENTS:
        violations.append(
            ("max_tables", f"{n_tables} tables placed, at most {MAX_TABLE_PLACEMENTS} allowed")
        )

    teaser = teaser_index(lib, doc)
    if teaser is not None and teaser not in indices:
        violations.append(("teaser_missing", f"teaser figure {teaser} is not placed"))

    if content.sections:
        last_name, last_sc = content.sections[-1]
        if _is_conclusion_like(last_name) and last_sc.placements:
            violations.append(
                ("conclusion_no_figures", f"final section {last_name!r} carries placements")
            )

    return VerificationReport.from_violations(violations)


def refine_content_loop(
    content: PageContent,
    doc: PaperDocument,
    lib: AssetLibrary,
    provider: ChatProvider,
    max_iter: int = 3,
) -> tuple[PageContent, bool, int]:
    """Alternate review/revise until rules pass and the review is weakness-free.

    Returns (content, converged, iterations used); with ``max_iter=0`` no
    provider call is made and the flag reflects the deterministic rules only.
    """
    if max_iter < 0:
        raise ValueError("max_iter must be >= 0")
    if max_iter == 0:
        return content, enforce_content_rules(content, lib, doc).passed, 0

    iterations = 0
    for _ in range(max_iter):
        iterations += 1
        review = review_content(content, doc, lib, provider)
        rules = enforce_content_rules(content, lib, doc)
        if rules.passed and not review.weaknesses:
            return content, True, iterations
        if not rules.passed:
            review = ContentReview(
                weaknesses=review.weaknesses
                + tuple(f"[{r}] {d}" for r, d in rules.violations),
                strengths=review.strengths,
                suggestions=review.suggestions,
            )
        content = revise_content(content, review, provider, lib)
    converged = enforce_content_rules(content, lib, doc).passed and not review.weaknesses
    return content, converged, iterations


def apply_author_feedback(
    content: PageContent,
    feedback: str,
    provider: ChatProvider,
    lib: AssetLibrary,
    doc: PaperDocument,
) -> PageContent:
    """Apply a natural-language author instruction at the content checkpoint.

    Unlike the checker's revise step, structural edits (deleting or
    reordering sections, rewriting prose) are allowed; the result is
    re-validated against the content rules.
    """
    if not feedback.strip():
        return content
    system, user = render(
        "content_feedback", content=content_prompt_json(content), feedback=feedback
    )

    def validate(value: object) -> PageContent:
        if not isinstance(value, dict) or not value:
            raise ValidationFailed("feedback reply must be a non-empty JSON object")
        seen: set[int] = set()
        sections = []
        for name, text in value.items():
            try:
                clean, raw = split_notation(str(text))
            except NotationError as exc:
                raise ValidationFailed(f"section {name!r}: {exc}") from exc
            prose = clean
            for existing_name, sc in content.sections:
                if existing_name == name and clean == normalize_ws(sc.prose):
                    prose = sc.prose  # keep original bytes when unchanged
                    break
            sections.append((name, SectionContent(prose, _reconcile_placements(raw, lib, seen))))
        return PageContent(sections=tuple(sections))

    result = chat_json(
        provider,
        [("system", system), ("user", user)],
        stage="content_feedback",
        validator=validate,
    )
    report = enforce_content_rules(result, lib, doc)
    if not report.passed:
        raise ValidationFailed(
            "feedback produced invalid content", violations=list(report.violations)
        )
    return result
