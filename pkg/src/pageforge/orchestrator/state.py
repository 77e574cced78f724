"""Pipeline state machine and run configuration."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

from ..errors import PageForgeError
from ..provider import ProviderConfig

# "created" is the implicit pre-stage before any artifact exists.
STAGE_ORDER = (
    "created",
    "ingested",
    "planned",
    "text_generated",
    "content_placed",
    "content_approved",
    "template_selected",
    "rendered",
    "html_approved",
    "done",
)
FAILED = "failed"
MODES = ("autonomous", "interactive")


@dataclass(frozen=True)
class CheckerFlags:
    content_checker: bool = True
    html_checker: bool = True

    def to_json(self) -> dict:
        return {"content_checker": self.content_checker, "html_checker": self.html_checker}


@dataclass(frozen=True)
class PipelineState:
    run_id: str
    stage: str = "created"
    mode: str = "autonomous"
    checker_flags: CheckerFlags = field(default_factory=CheckerFlags)
    iteration_counts: dict[str, int] = field(default_factory=dict)
    failure: str | None = None

    def advance(self, new_stage: str) -> "PipelineState":
        """Move one step forward; skipping or reordering stages is a bug."""
        if new_stage == FAILED:
            return replace(self, stage=FAILED)
        current = STAGE_ORDER.index(self.stage)
        target = STAGE_ORDER.index(new_stage)
        if target != current + 1:
            raise PageForgeError(
                f"illegal stage transition {self.stage} -> {new_stage}"
            )
        return replace(self, stage=new_stage)

    def with_iterations(self, key: str, count: int) -> "PipelineState":
        counts = dict(self.iteration_counts)
        counts[key] = count
        return replace(self, iteration_counts=counts)

    def to_json(self) -> dict:
        return {
            "run_id": self.run_id,
            "stage": self.stage,
            "mode": self.mode,
            "checker_flags": self.checker_flags.to_json(),
            "iteration_counts": dict(self.iteration_counts),
            "failure": self.failure,
        }

    @classmethod
    def from_json(cls, data: dict) -> "PipelineState":
        return cls(
            run_id=data["run_id"],
            stage=data["stage"],
            mode=data["mode"],
            checker_flags=CheckerFlags(**data["checker_flags"]),
            iteration_counts=dict(data["iteration_counts"]),
            failure=data.get("failure"),
        )


@dataclass
class RunConfig:
    paper_path: Path
    asset_dir: Path
    output_dir: Path
    provider_configs: dict[str, ProviderConfig] = field(default_factory=dict)
    template_library: Path | None = None
    tag_query: dict[str, object] = field(default_factory=dict)
    template_id: str | None = None
    mode: str = "autonomous"
    seed: int = 0
    max_iter: int = 3
    checker_flags: CheckerFlags = field(default_factory=CheckerFlags)
    runs_dir: Path | None = None
    checkpoint_timeout: float | None = None
    qa_pairs: int = 100

    def __post_init__(self) -> None:
        self.paper_path = Path(self.paper_path)
        self.asset_dir = Path(self.asset_dir)
        self.output_dir = Path(self.output_dir)
        if self.template_library is not None:
            self.template_library = Path(self.template_library)
        if self.runs_dir is not None:
            self.runs_dir = Path(self.runs_dir)
        if self.mode not in MODES:
            raise PageForgeError(f"unknown mode {self.mode!r}")

    def validate_paths(self) -> None:
        if not self.paper_path.is_file():
            raise PageForgeError(f"paper not found: {self.paper_path}")
        if not self.asset_dir.is_dir():
            raise PageForgeError(f"asset dir not found: {self.asset_dir}")
        if self.template_library is not None and not self.template_library.is_dir():
            raise PageForgeError(f"template library not found: {self.template_library}")

    @property
    def effective_runs_dir(self) -> Path:
        return self.runs_dir if self.runs_dir is not None else self.output_dir / "runs"


def write_json(path: Path, payload: object) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2), encoding="utf-8")


def read_json(path: Path) -> object:
    return json.loads(path.read_text(encoding="utf-8"))
