"""Run execution: staged pipeline with persisted artifacts and checkpoints.

Every stage writes its artifact under ``runs/{run_id}/{stage}/`` before the
state advances, so a killed run resumes from the last persisted stage without
repeating provider calls. An append-only JSONL event log mirrors every
transition; replaying it reconstructs the final state.
"""

from __future__ import annotations

import logging
import random
import shutil
import time
import uuid
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol

from ..bench.metrics import (
    CompAwareResult,
    MetricReport,
    align_sections,
    answer_and_grade,
    compression_ratio,
    count_tokens,
    generate_qa,
    judge_page,
    readability_ppl,
    semantic_fidelity,
)
from ..errors import CapabilityError, PageForgeError, PipelineError, ValidationFailed
from ..generator import (
    PageContent,
    apply_author_feedback,
    enforce_content_rules,
    generate_text_content,
    place_figures,
    refine_content_loop,
)
from ..ingest import (
    AssetLibrary,
    PaperDocument,
    assign_figure_sections,
    build_asset_library,
    parse_markdown,
)
from ..planner import SectionPlan, plan_sections
from ..provider import ProviderSet, build_providers
from ..renderer import (
    HtmlPage,
    Template,
    TemplateLibrary,
    apply_style_feedback,
    load_template_library,
    match_templates,
    refine_html_loop,
    render_html,
    save_template,
    select_template,
    strip_tags,
    validate_html,
)
from ..screenshot import Screenshotter, StubScreenshotter, SubprocessScreenshotter
from .state import FAILED, STAGE_ORDER, PipelineState, RunConfig, read_json, write_json

log = logging.getLogger(__name__)

DEFAULT_TEMPLATE = Template(
    id="plain",
    html_skeleton=(
        "<!DOCTYPE html>\n<html lang=\"en\">\n<head>\n<meta charset=\"utf-8\">\n"
        "<title>Project Page</title>\n</head>\n<body>\n<main></main>\n</body>\n</html>"
    ),
    style_paths=(),
    tags={"has_navigation": False, "background_color": "light"},
    complexity=6,
)


class CheckpointPolicy(Protocol):
    def content_decision(self, content: PageContent) -> tuple[str, str | None]: ...

    def template_decision(self, candidates: list[Template]) -> str | None: ...

    def html_decision(self, page: HtmlPage) -> tuple[str, str | None]: ...


class AutoApprovePolicy:
    """Autonomous mode: approve every checkpoint, leave template choice random."""

    def content_decision(self, content: PageContent) -> tuple[str, str | None]:
        return "approve", None

    def template_decision(self, candidates: list[Template]) -> str | None:
        return None

    def html_decision(self, page: HtmlPage) -> tuple[str, str | None]:
        return "approve", None


def _new_run_id() -> str:
    return time.strftime("%Y%m%dT%H%M%S") + "-" + uuid.uuid4().hex[:8]


class PipelineRun:
    def __init__(
        self,
        cfg: RunConfig,
        providers: ProviderSet | None = None,
        screenshotter: Screenshotter | None = None,
        policy: CheckpointPolicy | None = None,
        run_id: str | None = None,
    ) -> None:
        cfg.validate_paths()
        self.cfg = cfg
        self.providers = providers if providers is not None else build_providers(cfg.provider_configs)
        if self.providers.chat is None:
            raise PageForgeError("a chat provider is required to run the pipeline")
        self.policy = policy if policy is not None else AutoApprovePolicy()
        self.rng = random.Random(cfg.seed)
        self.run_id = run_id or _new_run_id()
        self.run_dir = cfg.effective_runs_dir / self.run_id
        self.run_dir.mkdir(parents=True, exist_ok=True)
        if screenshotter is not None:
            self.screenshotter = screenshotter
        else:
            sub = SubprocessScreenshotter()
            self.screenshotter = sub if sub.binary else StubScreenshotter()

        state_path = self.run_dir / "state.json"
        if state_path.is_file():
            self.state = PipelineState.from_json(read_json(state_path))
            if self.state.stage == FAILED:
                # A resumed run re-enters at the last *completed* stage.
                completed = self._last_completed_stage()
                self.state = PipelineState(
                    run_id=self.run_id,
                    stage=completed,
                    mode=cfg.mode,
                    checker_flags=cfg.checker_flags,
                    iteration_counts=dict(self.state.iteration_counts),
                )
        else:
            self.state = PipelineState(
                run_id=self.run_id, mode=cfg.mode, checker_flags=cfg.checker_flags
            )
            self._persist_state()

    # -- persistence helpers ---------------------------------------------------

    def _persist_state(self) -> None:
        write_json(self.run_dir / "state.json", self.state.to_json())

    def _event(self, kind: str, payload: dict) -> None:
        import json as _json

        path = self.run_dir / "events.jsonl"
        index = self.event_count() + 1
        record = {"index": index, "ts": time.time(), "type": kind, **payload}
        with path.open("a", encoding="utf-8") as fh:
            fh.write(_json.dumps(record) + "\n")

    def event_count(self) -> int:
        path = self.run_dir / "events.jsonl"
        if not path.is_file():
            return 0
        with path.open(encoding="utf-8") as fh:
            return sum(1 for line in fh if line.strip())

    def events(self, since: int = 0) -> list[dict]:
        import json as _json

        path = self.run_dir / "events.jsonl"
        if not path.is_file():
            return []
        out = []
        with path.open(encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    record = _json.loads(line)
                    if record["index"] > since:
                        out.append(record)
        return out

    _STAGE_ARTIFACTS = {
        "ingested": ("document.json", "library.json"),
        "planned": ("plan.json",),
        "text_generated": ("content.json",),
        "content_placed": ("content.json",),
        "content_approved": ("content.json",),
        "template_selected": ("selected.json",),
        "rendered": ("page.json",),
        "html_approved": ("approved.json",),
        "done": ("final.json",),
    }

    def _last_completed_stage(self) -> str:
        completed = "created"
        for stage in STAGE_ORDER[1:]:
            files = self._STAGE_ARTIFACTS[stage]
            if all((self.run_dir / stage / f).is_file() for f in files):
                completed = stage
            else:
                break
        return completed

    def _complete_stage(self, name: str, extra: dict | None = None) -> None:
        if STAGE_ORDER.index(self.state.stage) < STAGE_ORDER.index(name):
            self.state = self.state.advance(name)
            self._persist_state()
            self._event("stage_completed", {"stage": name, **(extra or {})})

    def _stage_dir(self, name: str) -> Path:
        path = self.run_dir / name
        path.mkdir(parents=True, exist_ok=True)
        return path

    def _fail(self, exc: Exception) -> None:
        from dataclasses import replace

        self.state = replace(self.state, stage=FAILED, failure=str(exc))
        self._persist_state()
        self._event("failed", {"cause": str(exc)})
        self._write_ledger()

    def _write_ledger(self) -> None:
        write_json(self.run_dir / "ledger.json", self.providers.ledger.to_json())

    # -- stages ------------------------------------------------------------------

    def _stage_ingest(self) -> tuple[PaperDocument, AssetLibrary]:
        stage = self._stage_dir("ingested")
        doc_path, lib_path = stage / "document.json", stage / "library.json"
        if doc_path.is_file() and lib_path.is_file():
            doc = PaperDocument.from_json(read_json(doc_path))
            lib = AssetLibrary.from_json(read_json(lib_path), asset_dir=self.cfg.asset_dir)
            return doc, lib
        doc = parse_markdown(
            self.cfg.paper_path.read_text(encoding="utf-8"), self.cfg.asset_dir
        )
        lib = build_asset_library(doc, self.providers.chat)
        lib = assign_figure_sections(lib, doc, self.providers.chat)
        write_json(doc_path, doc.to_json())
        write_json(lib_path, lib.to_json())
        self._complete_stage("ingested")
        return doc, lib

    def _stage_plan(self, doc: PaperDocument, lib: AssetLibrary) -> SectionPlan:
        stage = self._stage_dir("planned")
        path = stage / "plan.json"
        if path.is_file():
            return SectionPlan.from_json(read_json(path))
        plan = plan_sections(doc, lib, self.providers.chat)
        write_json(path, plan.to_json())
        self._complete_stage("planned")
        return plan

    def _stage_text(
        self, plan: SectionPlan, lib: AssetLibrary, doc: PaperDocument
    ) -> PageContent:
        stage = self._stage_dir("text_generated")
        path = stage / "content.json"
        if path.is_file():
            return PageContent.from_json(read_json(path))
        content = generate_text_content(plan, lib, doc, self.providers.chat)
        write_json(path, content.to_json())
        self._complete_stage("text_generated")
        return content

    def _stage_place(
        self, content: PageContent, lib: AssetLibrary, doc: PaperDocument
    ) -> PageContent:
        stage = self._stage_dir("content_placed")
        path = stage / "content.json"
        if path.is_file():
            return PageContent.from_json(read_json(path))
        content = place_figures(content, lib, doc, self.providers.chat)
        write_json(path, content.to_json())
        self._complete_stage("content_placed")
        return content

    def _stage_content_approval(
        self, content: PageContent, lib: AssetLibrary, doc: PaperDocument
    ) -> PageContent:
        stage = self._stage_dir("content_approved")
        path = stage / "content.json"
        if path.is_file():
            return PageContent.from_json(read_json(path))

        def run_checker(current: PageContent) -> PageContent:
            if not self.cfg.checker_flags.content_checker:
                return current
            refined, converged, iters = refine_content_loop(
                current, doc, lib, self.providers.chat, max_iter=self.cfg.max_iter
            )
            self.state = self.state.with_iterations(
                "content_loop", self.state.iteration_counts.get("content_loop", 0) + iters
            )
            self._persist_state()
            self._event("checker_iterations", {"key": "content_loop", "iterations": iters})
            if not converged:
                self._event("checker_unconverged", {"stage": "content"})
            return refined

        checkpoint_path = self.run_dir / "checkpoint" / "content.json"

        content = run_checker(content)
        write_json(checkpoint_path, content.to_json())
        while True:
            rules = enforce_content_rules(content, lib, doc)
            action, payload = self.policy.content_decision(content)
            if action == "approve":
                explicit = self.cfg.mode == "interactive"
                if not rules.passed and not explicit:
                    raise PipelineError(
                        "content rules failed and no author approval is possible in "
                        f"autonomous mode: {list(rules.violations)}"
                    )
                self._event("approved", {"stage": "content_approved"})
                break
            if action == "feedback":
                try:
                    content = apply_author_feedback(
                        content, payload or "", self.providers.chat, lib, doc
                    )
                except ValidationFailed as exc:
                    # Bad feedback keeps the checkpoint open rather than
                    # failing the run; the violation list reaches the author.
                    self._event(
                        "feedback_rejected",
                        {"stage": "content_approved", "text": payload, "cause": str(exc)},
                    )
                    continue
                self._event("feedback_applied", {"stage": "content_approved", "text": payload})
                content = run_checker(content)
                write_json(checkpoint_path, content.to_json())
                continue
            raise PageForgeError(f"unknown checkpoint action {action!r}")

        write_json(path, content.to_json())
        checkpoint_path.unlink(missing_ok=True)
        self._complete_stage("content_approved")
        return content

    def _load_template_library(self) -> TemplateLibrary:
        if self.cfg.template_library is not None:
            return load_template_library(self.cfg.template_library)
        return TemplateLibrary(
            templates=(DEFAULT_TEMPLATE,),
            tag_vocabulary=frozenset(DEFAULT_TEMPLATE.tags),
        )

    def _stage_template(self) -> Template:
        stage = self._stage_dir("template_selected")
        chosen = stage / "selected.json"
        if chosen.is_file():
            selected = read_json(chosen)
            lib = load_template_library(stage)
            return lib.get(selected["id"])
        lib = self._load_template_library()
        candidates = match_templates(lib, self.cfg.tag_query)
        if not candidates:
            raise PipelineError(f"no templates match the tag query {self.cfg.tag_query}")
        template_id = self.cfg.template_id or self.policy.template_decision(candidates)
        choice = template_id if template_id is not None else self.rng
        template = select_template(candidates, choice)
        saved = save_template(stage, template)
        write_json(chosen, {"id": template.id})
        self._event("template_selected", {"template_id": template.id})
        self._complete_stage("template_selected")
        # reload from the persisted copy so resume and fresh runs agree
        return load_template_library(stage).get(template.id)

    def _page_dir(self) -> Path:
        return self.run_dir / "rendered" / "page"

    def _load_page(self) -> HtmlPage:
        page_dir = self._page_dir()
        meta = read_json(self.run_dir / "rendered" / "page.json")
        return HtmlPage(
            html=(page_dir / "index.html").read_text(encoding="utf-8"),
            output_dir=page_dir,
            asset_manifest=tuple(meta["asset_manifest"]),
            screenshot_path=Path(meta["screenshot_path"]) if meta.get("screenshot_path") else None,
        )

    def _stage_render(self, content: PageContent, template: Template) -> HtmlPage:
        stage = self._stage_dir("rendered")
        meta_path = stage / "page.json"
        if meta_path.is_file():
            return self._load_page()
        page = render_html(
            content,
            template,
            self.providers.chat,
            output_dir=self._page_dir(),
            asset_dir=self.cfg.asset_dir,
        )
        write_json(
            meta_path,
            {"asset_manifest": list(page.asset_manifest), "screenshot_path": None},
        )
        self._complete_stage("rendered")
        return page

    def _stage_html_approval(self, page: HtmlPage, content: PageContent) -> HtmlPage:
        stage = self._stage_dir("html_approved")
        marker = stage / "approved.json"
        if marker.is_file():
            return self._load_page()

        def run_checker(current: HtmlPage) -> HtmlPage:
            if not self.cfg.checker_flags.html_checker or self.providers.judge is None:
                return current
            refined, converged, iters = refine_html_loop(
                current,
                content,
                self.cfg.max_iter,
                self.screenshotter,
                self.providers.judge,
                self.providers.chat,
            )
            self.state = self.state.with_iterations(
                "html_loop", self.state.iteration_counts.get("html_loop", 0) + iters
            )
            self._persist_state()
            self._event("checker_iterations", {"key": "html_loop", "iterations": iters})
            if not converged:
                self._event("checker_unconverged", {"stage": "html"})
            return refined

        page = run_checker(page)
        while True:
            report = validate_html(page, content)
            action, payload = self.policy.html_decision(page)
            if action == "approve":
                if not report.passed:
                    raise PipelineError(
                        f"page failed validation: {list(report.violations)}"
                    )
                self._event("approved", {"stage": "html_approved"})
                break
            if action == "feedback":
                try:
                    page = apply_style_feedback(
                        page, payload or "", self.providers.chat, content
                    )
                except ValidationFailed as exc:
                    self._event(
                        "feedback_rejected",
                        {"stage": "html_approved", "text": payload, "cause": str(exc)},
                    )
                    continue
                self._event("feedback_applied", {"stage": "html_approved", "text": payload})
                page = run_checker(page)
                continue
            raise PageForgeError(f"unknown checkpoint action {action!r}")

        write_json(marker, {"approved": True})
        self._complete_stage("html_approved")
        return page

    def _stage_done(self, page: HtmlPage) -> HtmlPage:
        out = self.cfg.output_dir
        out.mkdir(parents=True, exist_ok=True)
        for item in page.output_dir.rglob("*"):
            if item.is_file():
                rel = item.relative_to(page.output_dir)
                dst = out / rel
                dst.parent.mkdir(parents=True, exist_ok=True)
                shutil.copyfile(item, dst)
        self._write_ledger()
        write_json(self.run_dir / "done" / "final.json", {"output_dir": str(out)})
        self._complete_stage("done")
        return HtmlPage(
            html=page.html,
            output_dir=out,
            asset_manifest=page.asset_manifest,
            screenshot_path=page.screenshot_path,
        )

    def execute(self) -> tuple[HtmlPage, PipelineState]:
        try:
            doc, lib = self._stage_ingest()
            plan = self._stage_plan(doc, lib)
            content = self._stage_text(plan, lib, doc)
            content = self._stage_place(content, lib, doc)
            content = self._stage_content_approval(content, lib, doc)
            template = self._stage_template()
            page = self._stage_render(content, template)
            page = self._stage_html_approval(page, content)
            page = self._stage_done(page)
            return page, self.state
        except Exception as exc:
            log.exception("run %s failed", self.run_id)
            self._fail(exc)
            raise PipelineError(f"run {self.run_id} failed at {self.state.stage}: {exc}") from exc


def run_pipeline(
    cfg: RunConfig,
    providers: ProviderSet | None = None,
    screenshotter: Screenshotter | None = None,
    policy: CheckpointPolicy | None = None,
    run_id: str | None = None,
) -> tuple[HtmlPage, PipelineState]:
    """Execute (or resume) a full run; see :class:`PipelineRun`."""
    return PipelineRun(
        cfg, providers=providers, screenshotter=screenshotter, policy=policy, run_id=run_id
    ).execute()


def replay_events(run_dir: Path) -> PipelineState:
    """Reconstruct the run state purely from the persisted event log."""
    import json as _json
    from dataclasses import replace

    state_data = read_json(Path(run_dir) / "state.json")
    seed = PipelineState.from_json(state_data)
    state = PipelineState(
        run_id=seed.run_id, mode=seed.mode, checker_flags=seed.checker_flags
    )
    path = Path(run_dir) / "events.jsonl"
    if not path.is_file():
        return state
    with path.open(encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            record = _json.loads(line)
            if record["type"] == "stage_completed":
                state = state.advance(record["stage"])
            elif record["type"] == "checker_iterations":
                state = state.with_iterations(
                    record["key"],
                    state.iteration_counts.get(record["key"], 0) + record["iterations"],
                )
            elif record["type"] == "failed":
                state = replace(state, stage=FAILED, failure=record.get("cause"))
    return state


# --- evaluation -----------------------------------------------------------------


@dataclass(frozen=True)
class EvalOptions:
    qa_pairs: int = 100
    window: int = 512
    stride: int = 256


def _page_sections_text(html: str) -> list[str]:
    import re as _re

    chunks = _re.split(r"<h[1-6][^>]*>", html)
    sections = []
    for chunk in chunks[1:]:
        text = strip_tags("<x>" + chunk)
        if text:
            sections.append(text)
    return sections if sections else [strip_tags(html)]


def eval_run(
    page_dir: Path,
    paper: PaperDocument,
    providers: ProviderSet,
    options: EvalOptions = EvalOptions(),
    screenshotter: Screenshotter | None = None,
) -> MetricReport:
    """Score one rendered page; unavailable providers blank their metric only."""
    page_dir = Path(page_dir)
    index = page_dir / "index.html"
    if not index.is_file():
        raise PageForgeError(f"no index.html under {page_dir}")
    html = index.read_text(encoding="utf-8")
    page_text = strip_tags(html)

    ppl = None
    token_counter = None
    if providers.logprob is not None:
        try:
            ppl = readability_ppl(
                page_text, providers.logprob, window=options.window, stride=options.stride
            )
            token_counter = providers.logprob.tokenize
        except CapabilityError as exc:
            log.warning("readability unavailable: %s", exc)

    fidelity = None
    if providers.embed is not None:
        try:
            gen_sections = _page_sections_text(html)
            src_paragraphs = [p for s in paper.sections for p in s.paragraphs] or [
                paper.to_markdown()
            ]
            pairs = align_sections(gen_sections, src_paragraphs, providers.embed)
            fidelity = semantic_fidelity(
                [(gen_sections[g], src_paragraphs[s]) for g, s in pairs], providers.embed
            )
        except CapabilityError as exc:
            log.warning("semantic fidelity unavailable: %s", exc)

    comp = None
    if providers.chat is not None:
        try:
            qa = generate_qa(paper, providers.chat, n=options.qa_pairs)
            acc_d, acc_u = answer_and_grade(
                page_text, qa, [providers.chat], providers.chat
            )
            ratio = compression_ratio(
                count_tokens(paper.to_markdown(), token_counter),
                count_tokens(page_text, token_counter),
            )
            comp = CompAwareResult.from_accuracies(acc_d, acc_u, ratio)
        except CapabilityError as exc:
            log.warning("comp-aware accuracy unavailable: %s", exc)

    scores = {"element": None, "layout": None, "aesthetics": None}
    if providers.judge is not None:
        shooter = screenshotter
        if shooter is None:
            sub = SubprocessScreenshotter()
            shooter = sub if sub.binary else StubScreenshotter()
        try:
            shot = shooter.capture(page_dir)
            image = shot.read_bytes()
            for rubric in scores:
                scores[rubric] = judge_page(image, rubric, providers.judge)
        except (CapabilityError, PageForgeError) as exc:
            log.warning("visual judging unavailable: %s", exc)

    return MetricReport(
        readability_ppl=ppl,
        semantic_fidelity=fidelity,
        comp_aware=comp,
        visual_content_accuracy=scores["element"],
        layout_cohesion=scores["layout"],
        aesthetic=scores["aesthetics"],
    )
