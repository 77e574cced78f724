"""Template-library curation: near-duplicate grouping and representative picks.

A fast SimHash prefilter nominates candidate page pairs; the exact tree edit
distance confirms which pairs really share a template. Each confirmed group
keeps its most structurally complex page (most standardized-DOM nodes).
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass

from ..renderer import Template, TemplateLibrary
from .domtree import TreeNode, standardize_dom
from .simhash import DEFAULT_HAMMING_THRESHOLD, pairwise_hamming, simhash
from .ted import tree_edit_distance

log = logging.getLogger(__name__)

# Fallback relative rule when no absolute edit-count threshold is given:
# pages within 10% of the larger page's node count belong to one template.
TED_RELATIVE_THRESHOLD = 0.10


@dataclass(frozen=True)
class DedupOutcome:
    library: TemplateLibrary
    groups: tuple[tuple[str, ...], ...]
    skipped: tuple[tuple[str, str], ...]  # (page id, reason)


class _UnionFind:
    def __init__(self, n: int) -> None:
        self.parent = list(range(n))

    def find(self, x: int) -> int:
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[rb] = ra


def page_features(html: str) -> list[float]:
    """Structural/stylistic feature vector for cluster-based sampling."""
    tree = standardize_dom(html)
    counts: dict[str, int] = {}
    max_depth = 0
    stack: list[tuple[TreeNode, int]] = [(tree, 0)]
    while stack:
        node, depth = stack.pop()
        max_depth = max(max_depth, depth)
        tag = node.label[0] if isinstance(node.label, tuple) else str(node.label)
        counts[tag] = counts.get(tag, 0) + 1
        for child in node.children:
            stack.append((child, depth + 1))
    heads = sum(counts.get(f"h{i}", 0) for i in range(1, 7))
    return [
        float(tree.size()),
        float(max_depth),
        float(counts.get("img", 0)),
        float(counts.get("a", 0)),
        float(counts.get("div", 0) + counts.get("section", 0)),
        float(heads),
        float(counts.get("table", 0)),
        float(counts.get("nav", 0)),
        float(counts.get("link", 0)),
        float(len(html)) / 1000.0,
    ]


def infer_tags(html: str) -> dict[str, object]:
    """Cheap deterministic style tags for curated pages."""
    low = html.lower()
    return {
        "has_navigation": bool(re.search(r"<nav\b|role=[\"']navigation|class=[\"'][^\"']*nav", low)),
        "has_footer": "<footer" in low,
        "has_math": "mathjax" in low or "katex" in low,
        "background_color": "dark"
        if re.search(r"background(?:-color)?\s*:\s*#(?:[0-3][0-9a-f]{2}|000)", low)
        else "light",
    }


def dedup_templates(
    pages: list[tuple[str, str]],
    simhash_threshold: int = DEFAULT_HAMMING_THRESHOLD,
    ted_threshold: int | None = None,
) -> DedupOutcome:
    """Collapse near-duplicate pages into one template per structural group.

    ``ted_threshold`` is an absolute edit count; when None, a pair is
    confirmed if its distance is at most 10% of the larger page's node count.
    Ties on node count keep the lexicographically smallest page id.
    """
    if not pages:
        raise ValueError("pages must be non-empty")

    parsed: list[tuple[str, str, TreeNode]] = []
    skipped: list[tuple[str, str]] = []
    for page_id, html in pages:
        try:
            parsed.append((page_id, html, standardize_dom(html)))
        except Exception as exc:  # noqa: BLE001 - skip-and-report contract
            log.warning("skipping unparseable page %s: %s", page_id, exc)
            skipped.append((page_id, str(exc)))

    n = len(parsed)
    fingerprints = [simhash(tree) for _, _, tree in parsed]
    sizes = [tree.size() for _, _, tree in parsed]
    uf = _UnionFind(n)
    if n > 1:
        distances = pairwise_hamming(fingerprints)
        for i in range(n):
            for j in range(i + 1, n):
                if distances[i, j] > simhash_threshold:
                    continue
                ted = tree_edit_distance(parsed[i][2], parsed[j][2])
                limit = (
                    ted_threshold
                    if ted_threshold is not None
                    else TED_RELATIVE_THRESHOLD * max(sizes[i], sizes[j])
                )
                if ted <= limit:
                    uf.union(i, j)

    groups: dict[int, list[int]] = {}
    for i in range(n):
        groups.setdefault(uf.find(i), []).append(i)

    templates: list[Template] = []
    group_ids: list[tuple[str, ...]] = []
    for members in groups.values():
        # max node count wins; ties break to the smallest id
        best = min(members, key=lambda i: (-sizes[i], parsed[i][0]))
        page_id, html, tree = parsed[best]
        templates.append(
            Template(
                id=page_id,
                html_skeleton=html,
                style_paths=(),
                tags=infer_tags(html),
                complexity=tree.size(),
            )
        )
        group_ids.append(tuple(sorted(parsed[i][0] for i in members)))

    order = sorted(range(len(templates)), key=lambda i: templates[i].id)
    templates = [templates[i] for i in order]
    group_ids = [group_ids[i] for i in order]
    vocabulary = frozenset(k for t in templates for k in t.tags)
    return DedupOutcome(
        library=TemplateLibrary(templates=tuple(templates), tag_vocabulary=vocabulary),
        groups=tuple(group_ids),
        skipped=tuple(skipped),
    )
