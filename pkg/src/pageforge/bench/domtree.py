"""Standardized DOM trees: the structural skeleton used for fingerprinting
and tree edit distance.

Standardization keeps only element structure: text nodes, comments, and
whole ``script``/``style`` subtrees are dropped, and each node is labeled by
its tag name plus sorted class list. Child order is preserved.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from html.parser import HTMLParser
from typing import Hashable, Iterator

from ..errors import PageForgeError

# Elements that never take a closing tag.
VOID_TAGS = frozenset(
    "area base br col embed hr img input link meta param source track wbr".split()
)
_SKIP_SUBTREE = frozenset({"script", "style"})

DOC_ROOT: tuple[str, tuple[str, ...]] = ("#document", ())


@dataclass
class TreeNode:
    """Ordered labeled tree node; labels are any hashable value."""

    label: Hashable
    children: list["TreeNode"] = field(default_factory=list)

    def add(self, *children: "TreeNode") -> "TreeNode":
        self.children.extend(children)
        return self

    def size(self) -> int:
        return sum(1 for _ in self.iter_nodes())

    def iter_nodes(self) -> Iterator["TreeNode"]:
        stack = [self]
        while stack:
            node = stack.pop()
            yield node
            stack.extend(reversed(node.children))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, TreeNode):
            return NotImplemented
        return self.label == other.label and self.children == other.children

    def __repr__(self) -> str:
        if not self.children:
            return f"{self.label!r}"
        return f"{self.label!r}({', '.join(map(repr, self.children))})"


class _DomBuilder(HTMLParser):
    def __init__(self) -> None:
        super().__init__(convert_charrefs=True)
        self.top: list[TreeNode] = []
        self.stack: list[TreeNode] = []
        self._skip_depth = 0
        self._skip_tag: str | None = None

    @staticmethod
    def _label(tag: str, attrs: list[tuple[str, str | None]]) -> tuple[str, tuple[str, ...]]:
        classes: tuple[str, ...] = ()
        for name, value in attrs:
            if name.lower() == "class" and value:
                classes = tuple(sorted(value.split()))
                break
        return tag.lower(), classes

    def _attach(self, node: TreeNode) -> None:
        if self.stack:
            self.stack[-1].children.append(node)
        else:
            self.top.append(node)

    def handle_starttag(self, tag: str, attrs: list[tuple[str, str | None]]) -> None:
        tag = tag.lower()
        if self._skip_depth:
            if tag == self._skip_tag and tag not in VOID_TAGS:
                self._skip_depth += 1
            return
        if tag in _SKIP_SUBTREE:
            self._skip_depth = 1
            self._skip_tag = tag
            return
        node = TreeNode(self._label(tag, attrs))
        self._attach(node)
        if tag not in VOID_TAGS:
            self.stack.append(node)

    def handle_startendtag(self, tag: str, attrs: list[tuple[str, str | None]]) -> None:
        if self._skip_depth or tag.lower() in _SKIP_SUBTREE:
            return
        self._attach(TreeNode(self._label(tag, attrs)))

    def handle_endtag(self, tag: str) -> None:
        tag = tag.lower()
        if self._skip_depth:
            if tag == self._skip_tag:
                self._skip_depth -= 1
                if self._skip_depth == 0:
                    self._skip_tag = None
            return
        # Tolerant close: pop to the nearest matching open tag, ignore strays.
        for i in range(len(self.stack) - 1, -1, -1):
            if self.stack[i].label[0] == tag:
                del self.stack[i:]
                return


def standardize_dom(html: str) -> TreeNode:
    """Parse HTML into its standardized structural tree.

    A document with a single top-level element is rooted at that element;
    zero or several top-level elements get a synthetic ``#document`` root, so
    an empty document yields a single root node.
    """
    if not isinstance(html, str):
        raise PageForgeError(f"expected HTML text, got {type(html).__name__}")
    builder = _DomBuilder()
    try:
        builder.feed(html)
        builder.close()
    except Exception as exc:
        raise PageForgeError(f"unparseable HTML: {exc}") from exc
    if len(builder.top) == 1:
        return builder.top[0]
    return TreeNode(DOC_ROOT, builder.top)
