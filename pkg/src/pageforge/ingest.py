"""Turn converter-produced Markdown plus extracted images into an asset library.

The external converter owns PDF parsing; this module consumes its Markdown
and image directory. Inline pipe tables stay in the prose — table assets
enter the library as image files or standalone ``.html`` fragments referenced
with image syntax, which matches how converters emit them.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field, replace
from pathlib import Path

from .errors import PageForgeError, ValidationFailed
from .provider import ChatProvider, chat_json
from .prompts import render

# Leading caption tag, e.g. "Figure 1.", "Fig. 2:", "Table 3."
CAPTION_TAG = re.compile(r"^\s*((?:Figure|Fig\.?|Table)\s+\d+\s*[.:])\s*", re.IGNORECASE)

_IMAGE_REF = re.compile(r"!\[([^\]]*)\]\(([^)\s]+)\)")
_HEADING = re.compile(r"^(#{1,6})\s+(.*?)\s*#*\s*$")


def extract_caption_tag(caption: str) -> tuple[str | None, str]:
    """Split a leading caption tag off; total and idempotent.

    Repeated leading tags are all removed so that re-applying the function to
    ``cleaned`` is always a no-op; the reported tag is the first one.
    """
    tag: str | None = None
    rest = caption
    while True:
        m = CAPTION_TAG.match(rest)
        if not m:
            break
        if tag is None:
            tag = m.group(1).strip()
        rest = rest[m.end() :]
    return tag, rest.strip()


@dataclass(frozen=True)
class FigureRef:
    """An image/table reference found in the source Markdown."""

    caption: str
    path: str
    kind: str  # "figure" | "table"
    section: str | None


@dataclass(frozen=True)
class Section:
    heading: str
    paragraphs: tuple[str, ...]


@dataclass(frozen=True)
class PaperDocument:
    title: str
    sections: tuple[Section, ...]
    equations: tuple[str, ...]
    source_path: Path
    figure_refs: tuple[FigureRef, ...] = ()

    @property
    def headings(self) -> list[str]:
        return [s.heading for s in self.sections]

    def to_markdown(self) -> str:
        parts = []
        for section in self.sections:
            parts.append(f"# {section.heading}")
            parts.extend(section.paragraphs)
        return "\n\n".join(parts)

    def to_json(self) -> dict:
        return {
            "title": self.title,
            "sections": [
                {"heading": s.heading, "paragraphs": list(s.paragraphs)} for s in self.sections
            ],
            "equations": list(self.equations),
            "source_path": str(self.source_path),
            "figure_refs": [
                {"caption": r.caption, "path": r.path, "kind": r.kind, "section": r.section}
                for r in self.figure_refs
            ],
        }

    @classmethod
    def from_json(cls, data: dict) -> "PaperDocument":
        return cls(
            title=data["title"],
            sections=tuple(
                Section(s["heading"], tuple(s["paragraphs"])) for s in data["sections"]
            ),
            equations=tuple(data["equations"]),
            source_path=Path(data["source_path"]),
            figure_refs=tuple(
                FigureRef(r["caption"], r["path"], r["kind"], r.get("section"))
                for r in data["figure_refs"]
            ),
        )


def _dedupe_heading(heading: str, seen: set[str]) -> str:
    if heading not in seen:
        return heading
    n = 2
    while f"{heading} ({n})" in seen:
        n += 1
    return f"{heading} ({n})"


def parse_markdown(raw: str, asset_dir: str | Path) -> PaperDocument:
    """Structure converter Markdown into sections, equations, and figure refs.

    Any heading level starts a section; duplicate headings get a " (2)"
    suffix so the library's section map stays keyed uniquely. Display-math
    blocks (``$$ ... $$``) are collected into ``equations``. Text before the
    first heading is dropped, but figures found there are kept.
    """
    asset_dir = Path(asset_dir)
    if not asset_dir.is_dir():
        raise PageForgeError(f"asset_dir is not a readable directory: {asset_dir}")

    sections: list[tuple[str, list[str]]] = []
    equations: list[str] = []
    refs: list[FigureRef] = []
    seen_headings: set[str] = set()
    current: list[str] | None = None
    current_heading: str | None = None
    paragraph: list[str] = []
    math_buf: list[str] | None = None
    lines = raw.splitlines()

    def flush_paragraph() -> None:
        nonlocal paragraph
        if paragraph and current is not None:
            current.append(" ".join(paragraph).strip())
        paragraph = []

    def neighbor_caption(idx: int) -> str:
        for j in (idx + 1, idx - 1):
            if 0 <= j < len(lines):
                text = lines[j].strip().strip("*_ ")
                if CAPTION_TAG.match(text):
                    return text
        return ""

    def record_equation(body: str) -> None:
        equations.append(body)
        # Display math stays visible in the section text so downstream
        # prompts see the source formulas in place.
        if current is not None:
            paragraph.append(f"$${body}$$")

    for idx, line in enumerate(lines):
        stripped = line.strip()
        if math_buf is not None:
            if stripped.endswith("$$"):
                body = stripped[:-2].strip()
                if body:
                    math_buf.append(body)
                record_equation("\n".join(math_buf).strip())
                math_buf = None
            elif stripped:
                math_buf.append(stripped)
            continue
        if stripped.startswith("$$"):
            inner = stripped[2:]
            if inner.endswith("$$") and len(stripped) > 3:
                record_equation(inner[:-2].strip())
            else:
                math_buf = [inner.strip()] if inner.strip() else []
            continue

        heading_match = _HEADING.match(line)
        if heading_match:
            flush_paragraph()
            heading = _dedupe_heading(heading_match.group(2).strip(), seen_headings)
            if not heading:
                continue
            seen_headings.add(heading)
            current = []
            current_heading = heading
            sections.append((heading, current))
            continue

        img_matches = list(_IMAGE_REF.finditer(line))
        if img_matches:
            for m in img_matches:
                alt, path = m.group(1).strip(), m.group(2).strip()
                caption = alt or neighbor_caption(idx)
                tag, _ = extract_caption_tag(caption)
                is_table = path.lower().endswith((".html", ".htm")) or bool(
                    tag and tag.lower().startswith("table")
                )
                refs.append(
                    FigureRef(
                        caption=caption,
                        path=path,
                        kind="table" if is_table else "figure",
                        section=current_heading,
                    )
                )
            remainder = _IMAGE_REF.sub("", line).strip()
            if remainder:
                paragraph.append(remainder)
            continue

        if not stripped:
            flush_paragraph()
        else:
            paragraph.append(stripped)

    flush_paragraph()
    if math_buf is not None and math_buf:
        equations.append("\n".join(math_buf).strip())

    if not sections:
        raise PageForgeError("zero sections found in markdown input")

    return PaperDocument(
        title=sections[0][0],
        sections=tuple(Section(h, tuple(p for p in ps if p)) for h, ps in sections),
        equations=tuple(equations),
        source_path=asset_dir,
        figure_refs=tuple(refs),
    )


# --- asset library -----------------------------------------------------------


@dataclass(frozen=True)
class FigureAsset:
    index: int
    kind: str  # "figure" | "table"
    caption: str
    tag: str | None
    path: str
    width: int
    height: int
    original_section: str | None = None

    def __post_init__(self) -> None:
        if self.index < 1:
            raise ValidationFailed(f"asset index must be >= 1, got {self.index}")
        if self.kind not in ("figure", "table"):
            raise ValidationFailed(f"asset kind must be figure|table, got {self.kind!r}")
        if self.width <= 0 or self.height <= 0:
            raise ValidationFailed(f"asset dimensions must be positive: {self.width}x{self.height}")

    def to_json(self) -> dict:
        return {
            "index": self.index,
            "kind": self.kind,
            "caption": self.caption,
            "tag": self.tag,
            "path": self.path,
            "width": self.width,
            "height": self.height,
            "original_section": self.original_section,
        }

    @classmethod
    def from_json(cls, data: dict) -> "FigureAsset":
        return cls(
            index=data["index"],
            kind=data["kind"],
            caption=data["caption"],
            tag=data.get("tag"),
            path=data["path"],
            width=data["width"],
            height=data["height"],
            original_section=data.get("original_section"),
        )


@dataclass(frozen=True)
class AssetLibrary:
    text_repr: dict[str, str]
    assets: tuple[FigureAsset, ...]
    asset_dir: Path = field(default=Path("."))

    def __post_init__(self) -> None:
        indices = sorted(a.index for a in self.assets)
        if indices != list(range(1, len(self.assets) + 1)):
            raise ValidationFailed(f"asset indices must be 1..{len(self.assets)}, got {indices}")
        pairs = [(a.kind, a.caption) for a in self.assets]
        if len(set(pairs)) != len(pairs):
            raise ValidationFailed("duplicate (kind, caption) pair in asset library")

    def asset(self, index: int) -> FigureAsset:
        for a in self.assets:
            if a.index == index:
                return a
        raise KeyError(f"no asset with index {index}")

    def figures_json(self) -> str:
        """The asset list as the JSON text agents see in prompts."""
        return json.dumps([a.to_json() for a in self.assets], indent=2)

    def to_json(self) -> dict:
        return {
            "text_repr": dict(self.text_repr),
            "assets": [a.to_json() for a in self.assets],
        }

    @classmethod
    def from_json(cls, data: dict, asset_dir: str | Path = ".") -> "AssetLibrary":
        return cls(
            text_repr=dict(data["text_repr"]),
            assets=tuple(FigureAsset.from_json(a) for a in data["assets"]),
            asset_dir=Path(asset_dir),
        )


def save_library(lib: AssetLibrary, path: str | Path) -> None:
    Path(path).write_text(json.dumps(lib.to_json(), indent=2), encoding="utf-8")


def load_library(path: str | Path, asset_dir: str | Path = ".") -> AssetLibrary:
    return AssetLibrary.from_json(
        json.loads(Path(path).read_text(encoding="utf-8")), asset_dir=asset_dir
    )


def probe_dimensions(path: Path) -> tuple[int, int]:
    """Pixel size from the file itself; provider-reported sizes are ignored.

    HTML table fragments have no intrinsic pixel size, so they get a
    deterministic estimate from their row count at a fixed 960px width.
    """
    if not path.is_file():
        raise PageForgeError(f"asset file missing: {path}")
    if path.suffix.lower() in (".html", ".htm"):
        text = path.read_text(encoding="utf-8", errors="replace")
        rows = max(text.lower().count("<tr"), text.count("\n") + 1)
        return 960, 48 * min(rows + 1, 40)
    from PIL import Image, UnidentifiedImageError

    try:
        with Image.open(path) as img:
            return int(img.width), int(img.height)
    except UnidentifiedImageError as exc:
        raise PageForgeError(f"asset file undecodable: {path}") from exc


def _dedupe_caption(kind: str, caption: str, seen: set[tuple[str, str]]) -> str:
    if (kind, caption) not in seen:
        return caption
    n = 2
    while (kind, f"{caption} ({n})") in seen:
        n += 1
    return f"{caption} ({n})"


def build_asset_library(doc: PaperDocument, provider: ChatProvider) -> AssetLibrary:
    """Summarize each section via the provider and probe every asset's size."""
    if not doc.sections:
        raise PageForgeError("document has no sections")

    sections_json = json.dumps(
        {s.heading: "\n\n".join(s.paragraphs) for s in doc.sections}, indent=2
    )
    system, user = render("asset_library_refine", sections=sections_json)

    def validate(value: object) -> dict[str, str]:
        if not isinstance(value, dict):
            raise ValidationFailed("summary reply must be a JSON object")
        if set(value) != set(doc.headings):
            raise ValidationFailed(
                f"summary headings {sorted(value)} do not match document headings"
            )
        if any(not isinstance(v, str) or not v.strip() for v in value.values()):
            raise ValidationFailed("every summary must be a non-empty string")
        return {h: str(value[h]) for h in doc.headings}

    text_repr = chat_json(
        provider, [("system", system), ("user", user)], stage="ingest_refine", validator=validate
    )

    assets: list[FigureAsset] = []
    seen: set[tuple[str, str]] = set()
    for i, ref in enumerate(doc.figure_refs, start=1):
        width, height = probe_dimensions(doc.source_path / ref.path)
        caption = ref.caption or Path(ref.path).stem
        caption = _dedupe_caption(ref.kind, caption, seen)
        seen.add((ref.kind, caption))
        assets.append(
            FigureAsset(
                index=i,
                kind=ref.kind,
                caption=caption,
                tag=None,
                path=ref.path,
                width=width,
                height=height,
                original_section=ref.section,
            )
        )
    return AssetLibrary(text_repr=text_repr, assets=tuple(assets), asset_dir=doc.source_path)


def assign_figure_sections(
    lib: AssetLibrary, doc: PaperDocument, provider: ChatProvider
) -> AssetLibrary:
    """Fill ``original_section``, split caption tags, keep everything else fixed.

    Only caption, tag, and original_section may change; count, indices, paths
    and dimensions are copied from the input by construction.
    """
    if not lib.assets:
        return lib

    system, user = render(
        "filter_figures",
        figures=lib.figures_json(),
        project_page_content=json.dumps(lib.text_repr, indent=2),
        paper_content=doc.to_markdown(),
    )
    headings = set(doc.headings)

    def validate(value: object) -> dict[int, dict]:
        entries = value.get("figures") if isinstance(value, dict) else value
        if not isinstance(entries, list):
            raise ValidationFailed("reply must be a JSON array of figures")
        by_index: dict[int, dict] = {}
        for entry in entries:
            if not isinstance(entry, dict) or "index" not in entry:
                raise ValidationFailed(f"figure entry missing index: {entry!r}")
            by_index[int(entry["index"])] = entry
        want = {a.index for a in lib.assets}
        if set(by_index) != want:
            raise ValidationFailed(
                f"reply indices {sorted(by_index)} do not match asset indices {sorted(want)}"
            )
        for entry in by_index.values():
            section = entry.get("original_section")
            if section is not None and section not in headings:
                raise ValidationFailed(f"unknown original_section {section!r}")
        return by_index

    by_index = chat_json(
        provider,
        [("system", system), ("user", user)],
        stage="ingest_sections",
        validator=validate,
    )

    updated = []
    seen: set[tuple[str, str]] = set()
    for asset in lib.assets:
        entry = by_index[asset.index]
        raw_caption = str(entry.get("caption", asset.caption))
        tag = entry.get("tag")
        found_tag, cleaned = extract_caption_tag(raw_caption)
        if tag is None:
            tag = found_tag
        cleaned = _dedupe_caption(asset.kind, cleaned, seen)
        seen.add((asset.kind, cleaned))
        updated.append(
            replace(
                asset,
                caption=cleaned,
                tag=str(tag) if tag else None,
                original_section=entry.get("original_section"),
            )
        )
    return AssetLibrary(text_repr=lib.text_repr, assets=tuple(updated), asset_dir=lib.asset_dir)
