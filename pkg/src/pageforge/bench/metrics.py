"""The page-quality metric suite.

Content quality: readability perplexity, semantic fidelity against the
source document, and compression-aware information accuracy from a QA
pipeline. Visual quality: three rubric-driven judge scores from screenshots.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from ..errors import ValidationFailed
from ..ingest import PaperDocument
from ..provider import ChatProvider, EmbedProvider, JudgeProvider, JudgeScore, LogprobProvider, chat_json
from ..prompts import render

# --- readability ---------------------------------------------------------------


def readability_ppl(
    text: str, provider: LogprobProvider, window: int = 512, stride: int = 256
) -> float:
    """Perplexity of the page text under the scoring model.

    exp of the mean negative conditional log-probability over all tokens.
    Long texts are scored with a sliding window whose overlap is context
    only: every token's logprob enters the sum exactly once.
    """
    if not text:
        raise ValueError("text must be non-empty")
    if not window > stride > 0:
        raise ValueError("require window > stride > 0")

    tokens = provider.tokenize(text)
    n = len(tokens)
    if n == 0:
        raise ValueError("text tokenized to nothing")

    total = 0.0
    scored = 0
    end_prev = 0
    while end_prev < n:
        if end_prev == 0:
            new = tokens[:window]
            context: list[str] = []
        else:
            end = min(end_prev + stride, n)
            new = tokens[end_prev:end]
            context = tokens[max(0, end - window) : end_prev]
        pairs = provider.token_logprobs(
            provider.detokenize(new), provider.detokenize(context) if context else ""
        )
        total += sum(lp for _, lp in pairs)
        scored += len(pairs)
        end_prev += len(new)
    return math.exp(-total / scored)


# --- semantic fidelity -----------------------------------------------------------


def cosine(u: Sequence[float], v: Sequence[float]) -> float:
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise ValueError(f"dimension mismatch: {u.shape} vs {v.shape}")
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0 or nv == 0:
        raise ValueError("cosine undefined for zero vectors")
    return float(np.dot(u, v) / (nu * nv))


def align_sections(
    gen_sections: list[str], src_paragraphs: list[str], embedder: EmbedProvider
) -> list[tuple[int, int]]:
    """Pair each generated section with its most similar source paragraph.

    Many-to-one is allowed; cosine ties break to the lowest source index.
    """
    if not gen_sections or not src_paragraphs:
        raise ValueError("both text lists must be non-empty")
    gen_vecs = np.asarray(embedder.embed(gen_sections), dtype=np.float64)
    src_vecs = np.asarray(embedder.embed(src_paragraphs), dtype=np.float64)
    pairs = []
    for gi in range(len(gen_sections)):
        sims = [cosine(gen_vecs[gi], src_vecs[si]) for si in range(len(src_paragraphs))]
        pairs.append((gi, int(np.argmax(sims))))
    return pairs


def semantic_fidelity(pairs: list[tuple[str, str]], embedder: EmbedProvider) -> float:
    """Mean cosine similarity over aligned (generated, source) text pairs."""
    if not pairs:
        raise ValueError("pairs must be non-empty")
    gen_vecs = embedder.embed([g for g, _ in pairs])
    src_vecs = embedder.embed([s for _, s in pairs])
    return float(np.mean([cosine(g, s) for g, s in zip(gen_vecs, src_vecs)]))


# --- compression-aware information accuracy -----------------------------------------


@dataclass(frozen=True)
class QAPair:
    question: str
    reference_answer: str
    category: str  # "detail" | "understanding"

    def __post_init__(self) -> None:
        if self.category not in ("detail", "understanding"):
            raise ValidationFailed(f"bad QA category {self.category!r}")


def generate_qa(doc: PaperDocument, provider: ChatProvider, n: int = 100) -> list[QAPair]:
    """Generate n labeled QA pairs from the source document (half per category)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    n_detail = (n + 1) // 2
    system, user = render(
        "qa_generation",
        paper_content=doc.to_markdown(),
        n=n,
        n_detail=n_detail,
        n_understanding=n - n_detail,
    )

    def validate(value: object) -> list[QAPair]:
        if not isinstance(value, list):
            raise ValidationFailed("QA reply must be a JSON array")
        if len(value) != n:
            raise ValidationFailed(f"expected {n} QA pairs, got {len(value)}")
        pairs = []
        for item in value:
            if not isinstance(item, dict) or not {
                "question",
                "reference_answer",
                "category",
            } <= set(item):
                raise ValidationFailed(f"QA pair missing fields: {item!r}")
            pairs.append(
                QAPair(
                    question=str(item["question"]),
                    reference_answer=str(item["reference_answer"]),
                    category=str(item["category"]),
                )
            )
        return pairs

    return chat_json(
        provider, [("system", system), ("user", user)], stage="qa_generate", validator=validate
    )


def _normalize_answer(text: str) -> str:
    return re.sub(r"\W+", " ", text).strip().lower()


def grade_answer(
    grader: ChatProvider, question: str, reference: str, candidate: str
) -> bool:
    """Equivalence judgment at temperature 0, with an exact-match shortcut."""
    if _normalize_answer(reference) == _normalize_answer(candidate):
        return True
    system, user = render(
        "qa_grade", question=question, reference_answer=reference, candidate_answer=candidate
    )

    def validate(value: object) -> bool:
        if not isinstance(value, dict) or not isinstance(value.get("correct"), bool):
            raise ValidationFailed(f"grader must reply {{'correct': bool}}, got {value!r}")
        return value["correct"]

    return chat_json(
        grader,
        [("system", system), ("user", user)],
        stage="qa_grade",
        temperature=0.0,
        validator=validate,
    )


def answer_and_grade(
    page_text: str,
    qa: list[QAPair],
    panel: list[ChatProvider],
    grader: ChatProvider,
) -> tuple[float, float]:
    """Panel accuracy per category; each panelist answers from page text only."""
    if not panel:
        raise ValueError("panel must be non-empty")
    per_category: dict[str, list[float]] = {"detail": [], "understanding": []}
    for panelist in panel:
        correct = {"detail": 0, "understanding": 0}
        totals = {"detail": 0, "understanding": 0}
        for pair in qa:
            system, user = render("qa_answer", page_text=page_text, question=pair.question)
            answer = panelist.chat([("system", system), ("user", user)], stage="qa_answer")
            totals[pair.category] += 1
            if grade_answer(grader, pair.question, pair.reference_answer, answer):
                correct[pair.category] += 1
        for cat in per_category:
            if totals[cat]:
                per_category[cat].append(correct[cat] / totals[cat])
    acc_detail = float(np.mean(per_category["detail"])) if per_category["detail"] else 0.0
    acc_understanding = (
        float(np.mean(per_category["understanding"])) if per_category["understanding"] else 0.0
    )
    return acc_detail, acc_understanding


def count_tokens(text: str, counter: Callable[[str], list] | None = None) -> int:
    """Token count under the scoring provider's tokenizer, else whitespace.

    Pass the same counter for both texts of a compression ratio; the ratio is
    meaningless across two different token spaces.
    """
    if counter is not None:
        return len(counter(text))
    return len(text.split())


def compression_ratio(src_tokens: int, gen_tokens: int) -> float:
    if src_tokens <= 0 or gen_tokens <= 0:
        raise ValueError("token counts must be positive")
    return src_tokens / gen_tokens


def comp_aware_score(accuracy: float, compression: float) -> float:
    """Accuracy times the natural log of the compression ratio."""
    if not 0.0 <= accuracy <= 1.0:
        raise ValueError("accuracy must lie in [0, 1]")
    if compression <= 0:
        raise ValueError("compression ratio must be positive")
    return accuracy * math.log(compression)


def aggregate_overall(s_detail: float, s_understanding: float) -> float:
    """Overall score: arithmetic mean of the two category scores."""
    return (s_detail + s_understanding) / 2.0


@dataclass(frozen=True)
class CompAwareResult:
    accuracy_detail: float
    accuracy_understanding: float
    compression: float
    s_detail: float
    s_understanding: float
    s_overall: float

    def __post_init__(self) -> None:
        for acc, score in (
            (self.accuracy_detail, self.s_detail),
            (self.accuracy_understanding, self.s_understanding),
        ):
            if abs(score - comp_aware_score(acc, self.compression)) > 1e-9:
                raise ValidationFailed("category score inconsistent with accuracy * ln(C)")
        if abs(self.s_overall - aggregate_overall(self.s_detail, self.s_understanding)) > 1e-9:
            raise ValidationFailed("overall score is not the mean of the category scores")

    @classmethod
    def from_accuracies(
        cls, accuracy_detail: float, accuracy_understanding: float, compression: float
    ) -> "CompAwareResult":
        s_d = comp_aware_score(accuracy_detail, compression)
        s_u = comp_aware_score(accuracy_understanding, compression)
        return cls(
            accuracy_detail=accuracy_detail,
            accuracy_understanding=accuracy_understanding,
            compression=compression,
            s_detail=s_d,
            s_understanding=s_u,
            s_overall=aggregate_overall(s_d, s_u),
        )

    def to_json(self) -> dict:
        return {
            "accuracy_detail": self.accuracy_detail,
            "accuracy_understanding": self.accuracy_understanding,
            "compression": self.compression,
            "s_detail": self.s_detail,
            "s_understanding": self.s_understanding,
            "s_overall": self.s_overall,
        }

    @classmethod
    def from_json(cls, data: dict) -> "CompAwareResult":
        return cls(**data)


# --- VLM judges ---------------------------------------------------------------

_RUBRIC_TEMPLATES = {
    "element": "vlm_element_judge",
    "layout": "vlm_layout_judge",
    "aesthetics": "vlm_aesthetics_judge",
}


def judge_page(screenshot: bytes, rubric: str, judge_provider: JudgeProvider) -> JudgeScore:
    """Score a page screenshot on one rubric; the prompt goes out verbatim."""
    try:
        template = _RUBRIC_TEMPLATES[rubric]
    except KeyError:
        raise ValueError(f"unknown rubric {rubric!r}; expected {sorted(_RUBRIC_TEMPLATES)}")
    system, body = render(template)
    return judge_provider.judge(screenshot, f"{system}\n\n{body}", stage=f"judge_{rubric}")


# --- report ---------------------------------------------------------------------


@dataclass(frozen=True)
class MetricReport:
    readability_ppl: float | None = None
    semantic_fidelity: float | None = None
    comp_aware: CompAwareResult | None = None
    visual_content_accuracy: JudgeScore | None = None
    layout_cohesion: JudgeScore | None = None
    aesthetic: JudgeScore | None = None

    def to_json(self) -> dict:
        def score(s: JudgeScore | None) -> dict | None:
            return None if s is None else {"reason": s.reason, "score": s.score}

        return {
            "readability_ppl": self.readability_ppl,
            "semantic_fidelity": self.semantic_fidelity,
            "comp_aware": None if self.comp_aware is None else self.comp_aware.to_json(),
            "visual_content_accuracy": score(self.visual_content_accuracy),
            "layout_cohesion": score(self.layout_cohesion),
            "aesthetic": score(self.aesthetic),
        }

    @classmethod
    def from_json(cls, data: dict) -> "MetricReport":
        def score(d: dict | None) -> JudgeScore | None:
            return None if d is None else JudgeScore(reason=d["reason"], score=d["score"])

        return cls(
            readability_ppl=data.get("readability_ppl"),
            semantic_fidelity=data.get("semantic_fidelity"),
            comp_aware=(
                CompAwareResult.from_json(data["comp_aware"])
                if data.get("comp_aware")
                else None
            ),
            visual_content_accuracy=score(data.get("visual_content_accuracy")),
            layout_cohesion=score(data.get("layout_cohesion")),
            aesthetic=score(data.get("aesthetic")),
        )

    def save(self, path) -> None:
        from pathlib import Path

        Path(path).write_text(json.dumps(self.to_json(), indent=2), encoding="utf-8")
