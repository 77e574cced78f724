"""Produce and verify the webpage's section plan."""

from __future__ import annotations

import json
from dataclasses import dataclass

from .errors import ValidationFailed
from .ingest import AssetLibrary, PaperDocument
from .provider import ChatProvider, chat_json
from .prompts import render

PAPER_TYPES = ("methodology", "benchmark", "survey")
FORBIDDEN_SECTIONS = ("acknowledgements", "references", "related work", "experiment setting")
MAX_SECTIONS = 5

# No measurable rule exists for "covers methodology and experiments", so the
# check looks for this keyword family in section names and descriptions.
_METHOD_KEYWORDS = ("method", "approach", "framework", "experiment", "result", "evaluation")


@dataclass(frozen=True)
class SectionPlan:
    paper_type: str
    sections: tuple[tuple[str, str], ...]  # ordered (name, description)

    @property
    def names(self) -> list[str]:
        return [name for name, _ in self.sections]

    def to_json(self) -> dict:
        return {
            "paper_type": self.paper_type,
            "sections": [{"name": n, "description": d} for n, d in self.sections],
        }

    @classmethod
    def from_json(cls, data: dict) -> "SectionPlan":
        return cls(
            paper_type=data["paper_type"],
            sections=tuple((s["name"], s["description"]) for s in data["sections"]),
        )


@dataclass(frozen=True)
class VerificationReport:
    passed: bool
    violations: tuple[tuple[str, str], ...] = ()

    def __post_init__(self) -> None:
        if self.passed != (len(self.violations) == 0):
            raise ValueError("passed must be equivalent to an empty violation list")

    @classmethod
    def from_violations(cls, violations: list[tuple[str, str]]) -> "VerificationReport":
        return cls(passed=not violations, violations=tuple(violations))

    def to_json(self) -> dict:
        return {
            "passed": self.passed,
            "violations": [{"rule_id": r, "detail": d} for r, d in self.violations],
        }


def verify_plan(plan: SectionPlan) -> VerificationReport:
    """Deterministic rule pass over a plan; pure, no provider involved."""
    violations: list[tuple[str, str]] = []
    n = len(plan.sections)
    if not 1 <= n <= MAX_SECTIONS:
        violations.append(("cardinality", f"plan has {n} sections, expected 1..{MAX_SECTIONS}"))
    for name, _ in plan.sections:
        if name.strip().lower() in FORBIDDEN_SECTIONS:
            violations.append(("forbidden_name", f"section {name!r} is not allowed"))
    for name, description in plan.sections:
        if not description.strip():
            violations.append(("nonempty_description", f"section {name!r} has no description"))
    haystack = " ".join(f"{n} {d}" for n, d in plan.sections).lower()
    if not any(k in haystack for k in _METHOD_KEYWORDS):
        violations.append(
            ("method_or_experiments", "no section covers the methodology or experiments")
        )
    if plan.paper_type not in PAPER_TYPES:
        violations.append(("paper_type", f"unknown paper type {plan.paper_type!r}"))
    return VerificationReport.from_violations(violations)


def _plan_from_reply(value: object) -> SectionPlan:
    if not isinstance(value, dict):
        raise ValidationFailed("plan reply must be a flat JSON object")
    paper_type = "methodology"
    sections: list[tuple[str, str]] = []
    for key, val in value.items():
        if key == "paper_type":
            paper_type = str(val).strip().lower()
            continue
        if not isinstance(val, str):
            raise ValidationFailed(f"nested structure under section {key!r}; plan must be flat")
        sections.append((key, val))
    plan = SectionPlan(paper_type=paper_type, sections=tuple(sections))
    report = verify_plan(plan)
    if not report.passed:
        raise ValidationFailed(
            "plan violates rules: " + "; ".join(f"{r}: {d}" for r, d in report.violations),
            violations=list(report.violations),
        )
    return plan


def plan_sections(
    doc: PaperDocument, lib: AssetLibrary, provider: ChatProvider
) -> SectionPlan:
    """Ask the planner for a section outline and verify it (one retry).

    The reply is a flat JSON object of name -> description; an optional
    ``paper_type`` key carries the inferred paper type and defaults to
    methodology when the planner omits it.
    """
    paper_md = doc.to_markdown()
    if lib.text_repr:
        paper_md += "\n\nSection summaries:\n" + json.dumps(lib.text_repr, indent=2)
    system, user = render("section_generation", paper_content=paper_md)
    return chat_json(
        provider,
        [("system", system), ("user", user)],
        stage="plan",
        validator=_plan_from_reply,
    )


def save_plan(plan: SectionPlan, path) -> None:
    from pathlib import Path

    Path(path).write_text(json.dumps(plan.to_json(), indent=2), encoding="utf-8")


def load_plan(path) -> SectionPlan:
    from pathlib import Path

    return SectionPlan.from_json(json.loads(Path(path).read_text(encoding="utf-8")))
