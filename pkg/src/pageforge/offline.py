"""Deterministic offline model backend (``mock:`` endpoints).

Replies are pure functions of the prompt, so two runs with the same inputs
and seed produce byte-identical pages. Useful for demos, CI, and cost-free
dry runs; every reply is generated by recognizing which registry template
produced the prompt and honoring that template's output contract.
"""

from __future__ import annotations

import hashlib
import json
import math
import re
import time
from dataclasses import dataclass

from .errors import PageForgeError
from .provider import JudgeScore, Message, ProviderConfig, UsageLedger, parse_judge_reply
from .prompts import MATHJAX_SNIPPET

_EMBED_DIM = 64


def _block(tag: str, text: str) -> str | None:
    m = re.search(rf"<{tag}>\s*(.*?)\s*</{tag}>", text, re.DOTALL)
    return m.group(1) if m else None


def _json_after(label: str, text: str):
    """Parse the first balanced JSON value after a label line."""
    pos = text.find(label)
    if pos == -1:
        return None
    start = None
    for i in range(pos + len(label), len(text)):
        if text[i] in "[{":
            start = i
            break
        if text[i] not in " \t\r\n:":
            # Some other prose came first; keep scanning for a bracket anyway.
            continue
    if start is None:
        return None
    depth = 0
    in_string = False
    escape = False
    for i in range(start, len(text)):
        ch = text[i]
        if in_string:
            if escape:
                escape = False
            elif ch == "\\":
                escape = True
            elif ch == '"':
                in_string = False
            continue
        if ch == '"':
            in_string = True
        elif ch in "[{":
            depth += 1
        elif ch in "]}":
            depth -= 1
            if depth == 0:
                try:
                    return json.loads(text[start : i + 1])
                except json.JSONDecodeError:
                    return None
    return None


def _fenced(kind: str, text: str) -> str:
    return f"```{kind}\n{text}\n```"


def _hash(text: str) -> int:
    return int.from_bytes(hashlib.md5(text.encode("utf-8")).digest()[:8], "big")


_PLAN = {
    "paper_type": "methodology",
    "Overview": "Introduce the problem, the motivation, and the headline contribution.",
    "Method": "Describe the proposed approach and its components.",
    "Experiments": "Summarize the evaluation protocol and the main results.",
    "Conclusion": "Wrap up with takeaways and future directions.",
}

_CAPTION_TAG = re.compile(r"^\s*((?:Figure|Fig\.?|Table)\s+\d+\s*[.:])\s*", re.IGNORECASE)


class OfflineChatProvider:
    """Scripted chat replies keyed off the prompt's registry template."""

    def __init__(self, cfg: ProviderConfig, ledger: UsageLedger | None = None) -> None:
        self.cfg = cfg
        self.ledger = ledger if ledger is not None else UsageLedger()

    def chat(
        self, messages: list[Message], *, stage: str = "chat", temperature: float | None = None
    ) -> str:
        if not messages:
            raise ValueError("messages must be non-empty")
        start = time.monotonic()
        system = next((t for r, t in messages if r == "system"), "")
        user = "\n\n".join(t for r, t in messages if r == "user")
        reply = self._dispatch(system, user)
        prompt_tokens = sum(len(t.split()) for _, t in messages)
        self.ledger.record(
            stage,
            prompt_tokens,
            len(reply.split()),
            self.cfg.unit_cost_per_token,
            time.monotonic() - start,
        )
        return reply

    # -- dispatch table ------------------------------------------------------

    def _dispatch(self, system: str, user: str) -> str:
        if "condense research paper sections" in system:
            return self._refine_library(user)
        if "determine which section of the paper each image" in system:
            return self._filter_figures(user)
        if "expert content planner" in system:
            return _fenced("json", json.dumps(_PLAN, indent=2))
        if "text-based paper project page" in system:
            return self._text_content(user)
        if "generating a paper project page" in system:
            return self._place_figures(user)
        if "expert reviewer for scientific project pages" in system:
            return _fenced(
                "json",
                json.dumps(
                    {"weakness": [], "strength": ["Placement follows the narrative."],
                     "suggestion": []}
                ),
            )
        if "revise the previously generated project page content" in system:
            return self._echo_content(user)
        if "maintaining the content of a research project page" in system:
            return self._content_feedback(user)
        if "maintaining a research project page" in system:
            return self._style_feedback(user)
        if "Existing HTML:" in user and "Suggestions:" in user:
            return self._html_revise(user)
        if "HTML Template:" in user:
            return self._html_generate(user)
        if "meticulous examiner" in system:
            return self._qa_generate(user)
        if "using only the provided webpage text" in system:
            return self._qa_answer(user)
        if "strict grader" in system:
            return self._qa_grade(user)
        raise PageForgeError(f"offline chat cannot serve this prompt: {system[:80]!r}")

    # -- per-template behaviors ------------------------------------------------

    def _refine_library(self, user: str) -> str:
        sections = _json_after("<sections>", user) or {}
        summaries = {}
        for heading, text in sections.items():
            words = str(text).split()
            summaries[heading] = (
                " ".join(words[:40]) if words else f"This part covers {heading}."
            )
        return _fenced("json", json.dumps(summaries, indent=2))

    def _filter_figures(self, user: str) -> str:
        figures = _json_after("<figures>", user) or []
        paper = _block("paper_content", user) or ""
        headings = re.findall(r"^#+\s+(.+?)\s*$", paper, re.MULTILINE)
        out = []
        for fig in figures:
            caption = str(fig.get("caption", ""))
            m = _CAPTION_TAG.match(caption)
            tag = m.group(1).strip() if m else None
            cleaned = caption[m.end() :].strip() if m else caption
            section = fig.get("original_section")
            if section not in headings:
                section = headings[0] if headings else None
            out.append({**fig, "caption": cleaned, "tag": tag, "original_section": section})
        return _fenced("json", json.dumps(out, indent=2))

    def _text_content(self, user: str) -> str:
        plan = _json_after("Section Plan:", user) or {}
        paper = _block("paper_content", user) or ""
        has_equations = "$$" in paper
        content = {}
        for name, description in plan.items():
            if name == "paper_type":
                continue
            content[name] = (
                f"{description} From the authors' perspective, this section walks "
                f"through the {name.lower()} of the work in plain language."
            )
        if has_equations and content:
            first = next(iter(content))
            content[first] += " The central relation is $y = f(x)$."
        return _fenced("json", json.dumps(content, indent=2))

    def _place_figures(self, user: str) -> str:
        figures = _json_after("<figures>", user) or []
        content = _json_after("<project_page_content>", user) or {}
        names = list(content)
        eligible = [
            n for n in names if "conclusion" not in n.lower() and "summary" not in n.lower()
        ] or names
        placed = dict(content)
        tables_used = 0
        slot = 0
        for fig in sorted(figures, key=lambda f: int(f.get("index", 0))):
            if fig.get("kind") == "table":
                if tables_used >= 3:
                    continue
                tables_used += 1
            target = eligible[slot % len(eligible)]
            slot += 1
            desc = str(fig.get("caption", "")).replace("[", "(").replace("]", ")")
            path = str(fig.get("path", "")).replace("[", "").replace("]", "").replace('"', "")
            token = (
                f'![{desc}]["{path}"]'
                f"[width={fig.get('width', 1)}, height={fig.get('height', 1)}]"
                f"({fig.get('index')})"
            )
            placed[target] = f"{placed[target]}\n\n{token}"
        return _fenced("json", json.dumps(placed, indent=2))

    def _echo_content(self, user: str) -> str:
        content = _json_after("<project_page_content>", user) or {}
        return _fenced("json", json.dumps(content, indent=2))

    def _content_feedback(self, user: str) -> str:
        content = _json_after("<project_page_content>", user) or {}
        feedback = (_block("feedback", user) or "").lower()
        names = list(content)
        if "delete" in feedback:
            target = next((n for n in names if n.lower() in feedback), None)
            if target is None and len(names) > 1:
                target = names[-1]
            if target and len(names) > 1:
                content = {n: v for n, v in content.items() if n != target}
        elif "reorder" in feedback or "order" in feedback:
            content = {n: content[n] for n in reversed(names)}
        return _fenced("json", json.dumps(content, indent=2))

    def _style_feedback(self, user: str) -> str:
        m = re.search(r"Existing HTML:\s*(.*?)\s*The author's instruction:", user, re.DOTALL)
        html = m.group(1).strip() if m else ""
        feedback = (_block("feedback", user) or "").lower()
        if "navigation" in feedback and "<nav" not in html.lower():
            html = re.sub(
                r"(<body[^>]*>)",
                r'\1\n<nav class="site-nav"><a href="#top">Top</a></nav>',
                html,
                count=1,
                flags=re.IGNORECASE,
            )
        if "color" in feedback:
            html = html.replace("<table", '<table style="border-color: inherit"')
        return _fenced("html", html)

    def _html_generate(self, user: str) -> str:
        content = _json_after("Project Page Content:", user) or {}
        m = re.search(r"HTML Template:\s*(.*?)\s*Requirements:", user, re.DOTALL)
        template_html = m.group(1).strip() if m else ""
        links = re.findall(
            r"<link[^>]*rel=[\"']stylesheet[\"'][^>]*>", template_html, re.IGNORECASE
        )
        title = next(iter(content), "Project Page")
        token_re = re.compile(
            r"!\[([^\[\]]*)\]\[\s*\"?([^\[\]\"]+?)\"?\s*\]\[width=(\d+),\s*height=(\d+)\]\((\d+)\)"
        )
        has_formula = any("$" in str(text) for text in content.values())

        parts = [
            "<!DOCTYPE html>",
            '<html lang="en">',
            "<head>",
            '<meta charset="utf-8">',
            f"<title>{title}</title>",
            *links,
        ]
        if has_formula:
            parts.append(MATHJAX_SNIPPET)
        parts.append("</head>")
        parts.append("<body>")
        parts.append('<main class="page-main">')
        for name, text in content.items():
            text = str(text)
            images = []
            for tm in token_re.finditer(text):
                desc, path, width, height, _idx = tm.groups()
                scale = min(1.0, 960 / max(int(width), 1))
                images.append(
                    f"<!-- width = {int(int(width) * scale)}, height = {int(int(height) * scale)} -->\n"
                    f'<div class="image-container"><img src="{path}" alt="{desc}" '
                    f'style="display: block; margin: auto; max-width: 90%;"></div>'
                )
            prose = token_re.sub("", text).strip()
            parts.append('<section class="content-section">')
            parts.append(f"<h2>{name}</h2>")
            parts.append(f"<p>{prose}</p>")
            parts.extend(images)
            parts.append("</section>")
        parts.append("</main>")
        parts.append("</body>")
        parts.append("</html>")
        return _fenced("html", "\n".join(parts))

    def _html_revise(self, user: str) -> str:
        m = re.search(r"Existing HTML:\s*(.*?)\s*Suggestions:", user, re.DOTALL)
        return _fenced("html", m.group(1).strip() if m else "")

    def _qa_generate(self, user: str) -> str:
        m = re.search(r"Generate exactly (\d+) question-answer pairs", user)
        n = int(m.group(1)) if m else 100
        n_detail_m = re.search(r"(\d+) detail questions", user)
        n_detail = int(n_detail_m.group(1)) if n_detail_m else (n + 1) // 2
        pairs = []
        for i in range(n):
            category = "detail" if i < n_detail else "understanding"
            pairs.append(
                {
                    "question": f"What is recorded as item {i + 1}?",
                    "reference_answer": f"item-{i + 1}",
                    "category": category,
                }
            )
        return _fenced("json", json.dumps(pairs, indent=2))

    def _qa_answer(self, user: str) -> str:
        m = re.search(r"item (\d+)\?", user)
        return f"item-{m.group(1)}" if m else "unknown"

    def _qa_grade(self, user: str) -> str:
        ref = re.search(r"Reference answer:\s*(.*)", user)
        cand = re.search(r"Candidate answer:\s*(.*)", user)
        norm = lambda s: re.sub(r"\W+", " ", s).strip().lower()  # noqa: E731
        correct = bool(ref and cand and norm(ref.group(1)) == norm(cand.group(1)))
        return _fenced("json", json.dumps({"correct": correct}))


class OfflineEmbedProvider:
    """Bag-of-words hash embedding: deterministic, self-similarity maximal."""

    def __init__(self, cfg: ProviderConfig, ledger: UsageLedger | None = None) -> None:
        self.cfg = cfg
        self.ledger = ledger if ledger is not None else UsageLedger()

    def embed(self, texts: list[str]) -> list[list[float]]:
        if not texts or any(not t for t in texts):
            raise ValueError("texts must be non-empty and contain no empty strings")
        start = time.monotonic()
        vectors = []
        for text in texts:
            vec = [0.0] * _EMBED_DIM
            for word in text.lower().split():
                h = _hash(word)
                vec[h % _EMBED_DIM] += 1.0 if (h >> 7) & 1 else -1.0
            norm = math.sqrt(sum(x * x for x in vec))
            if norm == 0:
                vec[0] = 1.0
                norm = 1.0
            vectors.append([x / norm for x in vec])
        self.ledger.record(
            "embed",
            sum(len(t.split()) for t in texts),
            0,
            self.cfg.unit_cost_per_token,
            time.monotonic() - start,
        )
        return vectors


class OfflineLogprobProvider:
    """Whitespace tokens with a fixed per-token logprob table."""

    def __init__(self, cfg: ProviderConfig, ledger: UsageLedger | None = None) -> None:
        self.cfg = cfg
        self.ledger = ledger if ledger is not None else UsageLedger()

    def tokenize(self, text: str) -> list[str]:
        return text.split()

    def detokenize(self, tokens: list[str]) -> str:
        return " ".join(tokens)

    def token_logprobs(self, text: str, context: str = "") -> list[tuple[str, float]]:
        if not text:
            raise ValueError("text must be non-empty")
        start = time.monotonic()
        # Context-free by construction: each token's score depends only on
        # its surface form, which keeps windowed and full-context scoring
        # identical for any window placement.
        pairs = [
            (tok, -(0.25 + (_hash(tok) % 64) / 64.0)) for tok in self.tokenize(text)
        ]
        self.ledger.record(
            "logprob", len(pairs), 0, self.cfg.unit_cost_per_token, time.monotonic() - start
        )
        return pairs


class OfflineJudgeProvider:
    """Scripted VLM: neutral reviews and mid-scale rubric scores."""

    def __init__(self, cfg: ProviderConfig, ledger: UsageLedger | None = None) -> None:
        self.cfg = cfg
        self.ledger = ledger if ledger is not None else UsageLedger()

    def vision_chat(
        self, image: bytes, prompt: str, *, stage: str = "judge", temperature: float = 0.0
    ) -> str:
        start = time.monotonic()
        if "professional reviewer specializing in images" in prompt:
            reply = json.dumps(
                {"weaknesses": [], "strengths": ["Images sit at a comfortable width."],
                 "suggestions": []}
            )
        elif "aesthetics reviewer" in prompt:
            reply = json.dumps({"reason": "Consistent styling, modest palette.", "score": 3})
        elif "visual elements reviewer" in prompt:
            reply = json.dumps({"reason": "Formulas and figures render.", "score": 4})
        elif "layout reviewer" in prompt:
            reply = json.dumps({"reason": "Single column, even spacing.", "score": 3})
        else:
            reply = json.dumps({"reason": "No rubric recognized.", "score": 3})
        self.ledger.record(
            stage, len(prompt.split()), len(reply.split()),
            self.cfg.unit_cost_per_token, time.monotonic() - start,
        )
        return reply

    def judge(self, image: bytes, rubric_prompt: str, *, stage: str = "judge") -> JudgeScore:
        return parse_judge_reply(
            lambda p: self.vision_chat(image, p, stage=stage), rubric_prompt
        )


def build(role: str, cfg: ProviderConfig, ledger: UsageLedger):
    if role == "chat":
        return OfflineChatProvider(cfg, ledger)
    if role == "judge":
        return OfflineJudgeProvider(cfg, ledger)
    if role == "embed":
        return OfflineEmbedProvider(cfg, ledger)
    if role == "logprob":
        return OfflineLogprobProvider(cfg, ledger)
    raise ValueError(f"unknown offline role {role!r}")
