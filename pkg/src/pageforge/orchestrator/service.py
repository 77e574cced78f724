"""Local HTTP service hosting interactive runs and their checkpoints.

The pipeline thread blocks inside :class:`InteractivePolicy` whenever a
checkpoint is reached; the HTTP handlers feed decisions in. All state changes
round-trip through these endpoints — the browser dashboard carries no
pipeline logic of its own.
"""

from __future__ import annotations

import logging
import threading
from pathlib import Path
from typing import Any

from fastapi import FastAPI, HTTPException, Query
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import FileResponse, HTMLResponse, JSONResponse
from pydantic import BaseModel

from ..errors import StageConflictError
from ..generator import PageContent
from ..renderer import Template, load_template_library, match_templates
from .pipeline import AutoApprovePolicy, PipelineRun
from .state import RunConfig, read_json

log = logging.getLogger(__name__)

# Accepted aliases for checkpoint stages in approve/feedback bodies.
_STAGE_TO_KIND = {
    "content": "content",
    "content_approved": "content",
    "content_placed": "content",
    "template": "template",
    "template_selected": "template",
    "html": "html",
    "html_approved": "html",
    "rendered": "html",
}


class InteractivePolicy:
    """Blocking checkpoint policy driven by HTTP decisions.

    An unanswered checkpoint auto-approves after ``timeout`` seconds (None
    blocks forever), honoring the rule that every human touchpoint stays
    optional.
    """

    def __init__(self, timeout: float | None = None) -> None:
        self.timeout = timeout
        self._cond = threading.Condition()
        self.pending: str | None = None
        self.candidates: list[Template] = []
        self._decision: tuple[str, Any] | None = None

    def _wait(self, kind: str) -> tuple[str, Any]:
        with self._cond:
            self.pending = kind
            self._decision = None
            self._cond.notify_all()
            self._cond.wait_for(lambda: self._decision is not None, timeout=self.timeout)
            decision = self._decision if self._decision is not None else ("approve", None)
            self.pending = None
            self._decision = None
            self._cond.notify_all()
            return decision

    def submit(self, kind: str, action: str, payload: Any = None) -> None:
        with self._cond:
            if self.pending != kind:
                raise StageConflictError(
                    f"run is waiting at {self.pending or 'no'} checkpoint, not {kind}"
                )
            self._decision = (action, payload)
            self._cond.notify_all()

    # CheckpointPolicy interface
    def content_decision(self, content: PageContent) -> tuple[str, str | None]:
        return self._wait("content")

    def html_decision(self, page) -> tuple[str, str | None]:
        return self._wait("html")

    def template_decision(self, candidates: list[Template]) -> str | None:
        with self._cond:
            self.candidates = list(candidates)
        action, payload = self._wait("template")
        with self._cond:
            self.candidates = []
        if action == "select":
            return payload
        return None  # approve/timeout: fall back to the seeded random pick


class RunHandle:
    def __init__(self, run: PipelineRun, policy) -> None:
        self.run = run
        self.policy = policy
        self.error: str | None = None
        self.thread = threading.Thread(target=self._execute, daemon=True)

    def _execute(self) -> None:
        try:
            self.run.execute()
        except Exception as exc:  # noqa: BLE001 - surfaced via /state
            log.warning("run %s ended with error: %s", self.run.run_id, exc)
            self.error = str(exc)

    def start(self) -> None:
        self.thread.start()

    @property
    def pending(self) -> str | None:
        return getattr(self.policy, "pending", None)

    def latest_content(self) -> dict | None:
        candidates = [self.run.run_dir / "checkpoint" / "content.json"] + [
            self.run.run_dir / stage / "content.json"
            for stage in ("content_approved", "content_placed", "text_generated")
        ]
        for path in candidates:
            try:
                return read_json(path)
            except FileNotFoundError:
                continue  # the pipeline thread may remove checkpoint files mid-poll
        return None

    def page_dir(self) -> Path:
        return self.run.run_dir / "rendered" / "page"

    def state_view(self) -> dict:
        state = self.run.state
        sections = []
        content = self.latest_content()
        if content:
            for section in content["sections"]:
                sections.append(
                    {
                        "name": section["name"],
                        "excerpt": section["prose"][:240],
                        "placements": [
                            {"index": p["index"], "path": p["path"]}
                            for p in section["placements"]
                        ],
                    }
                )
        return {
            "run_id": state.run_id,
            "stage": state.stage,
            "mode": state.mode,
            "checker_flags": state.checker_flags.to_json(),
            "iteration_counts": dict(state.iteration_counts),
            "pending_checkpoint": self.pending,
            "sections": sections,
            "event_cursor": self.run.event_count(),
            "failure": self.run.state.failure or self.error,
        }


class RunManager:
    def __init__(self, template_library: Path | None = None) -> None:
        self.template_library = template_library
        self.runs: dict[str, RunHandle] = {}
        self._lock = threading.Lock()

    def start_run(self, cfg: RunConfig) -> str:
        policy = (
            InteractivePolicy(cfg.checkpoint_timeout)
            if cfg.mode == "interactive"
            else AutoApprovePolicy()
        )
        run = PipelineRun(cfg, policy=policy)
        handle = RunHandle(run, policy)
        with self._lock:
            self.runs[run.run_id] = handle
        handle.start()
        return run.run_id

    def get(self, run_id: str) -> RunHandle:
        with self._lock:
            if run_id not in self.runs:
                raise KeyError(run_id)
            return self.runs[run_id]


class FeedbackBody(BaseModel):
    stage: str
    text: str


class ApproveBody(BaseModel):
    stage: str


class TemplateBody(BaseModel):
    template_id: str


def _parse_tag_value(raw: str) -> object:
    low = raw.lower()
    if low == "true":
        return True
    if low == "false":
        return False
    if raw.lstrip("-").isdigit():
        return int(raw)
    return raw


def parse_tag_query(items: list[str]) -> dict[str, object]:
    query: dict[str, object] = {}
    for item in items:
        for part in item.split(","):
            if not part:
                continue
            if "=" not in part:
                raise ValueError(f"tag filter must look like key=value, got {part!r}")
            key, raw = part.split("=", 1)
            query[key] = _parse_tag_value(raw)
    return query


def create_app(manager: RunManager) -> FastAPI:
    app = FastAPI(title="pageforge service")
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )

    def handle_or_404(run_id: str) -> RunHandle:
        try:
            return manager.get(run_id)
        except KeyError:
            raise HTTPException(status_code=404, detail=f"unknown run {run_id!r}")

    def kind_or_400(stage: str) -> str:
        kind = _STAGE_TO_KIND.get(stage)
        if kind is None:
            raise HTTPException(status_code=400, detail=f"unknown checkpoint stage {stage!r}")
        return kind

    def submit_or_409(handle: RunHandle, kind: str, action: str, payload=None) -> None:
        policy = handle.policy
        if not isinstance(policy, InteractivePolicy):
            raise HTTPException(status_code=409, detail="run is not interactive")
        try:
            policy.submit(kind, action, payload)
        except StageConflictError as exc:
            raise HTTPException(status_code=409, detail=str(exc))

    @app.get("/runs")
    def list_runs() -> dict:
        return {"runs": sorted(manager.runs)}

    @app.get("/runs/{run_id}/state")
    def run_state(run_id: str) -> dict:
        return handle_or_404(run_id).state_view()

    @app.get("/runs/{run_id}/events")
    def run_events(run_id: str, since: int = 0) -> dict:
        handle = handle_or_404(run_id)
        return {"events": handle.run.events(since=since)}

    @app.get("/runs/{run_id}/content")
    def run_content(run_id: str) -> JSONResponse:
        content = handle_or_404(run_id).latest_content()
        if content is None:
            raise HTTPException(status_code=404, detail="no content generated yet")
        return JSONResponse(content)

    @app.get("/runs/{run_id}/preview")
    def preview(run_id: str) -> HTMLResponse:
        index = handle_or_404(run_id).page_dir() / "index.html"
        if not index.is_file():
            raise HTTPException(status_code=404, detail="page not rendered yet")
        return HTMLResponse(index.read_text(encoding="utf-8"))

    @app.get("/runs/{run_id}/preview/{asset_path:path}")
    def preview_asset(run_id: str, asset_path: str) -> FileResponse:
        page_dir = handle_or_404(run_id).page_dir().resolve()
        target = (page_dir / asset_path).resolve()
        if page_dir not in target.parents or not target.is_file():
            raise HTTPException(status_code=404, detail="asset not found")
        return FileResponse(target)

    @app.get("/templates")
    def templates(tags: list[str] = Query(default=[])) -> dict:
        try:
            query = parse_tag_query(tags)
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        candidates: list[Template]
        if manager.template_library is not None:
            try:
                candidates = match_templates(load_template_library(manager.template_library), query)
            except KeyError as exc:
                raise HTTPException(status_code=400, detail=str(exc))
        else:
            # No library on disk: show the candidates of any run blocked at its
            # template checkpoint, filtered by the same tag query.
            pool: list[Template] = []
            for handle in manager.runs.values():
                pool.extend(getattr(handle.policy, "candidates", []))
            candidates = [
                t for t in pool if all(t.tags.get(k) == v for k, v in query.items())
            ]
        return {
            "templates": [
                {"template_id": t.id, "tags": t.tags, "complexity": t.complexity}
                for t in candidates
            ]
        }

    @app.post("/runs/{run_id}/feedback")
    def post_feedback(run_id: str, body: FeedbackBody) -> dict:
        handle = handle_or_404(run_id)
        submit_or_409(handle, kind_or_400(body.stage), "feedback", body.text)
        return {"accepted": True}

    @app.post("/runs/{run_id}/approve")
    def post_approve(run_id: str, body: ApproveBody) -> dict:
        handle = handle_or_404(run_id)
        submit_or_409(handle, kind_or_400(body.stage), "approve")
        return {"accepted": True}

    @app.post("/runs/{run_id}/template")
    def post_template(run_id: str, body: TemplateBody) -> dict:
        handle = handle_or_404(run_id)
        submit_or_409(handle, "template", "select", body.template_id)
        return {"accepted": True}

    return app


def serve(cfg: RunConfig, port: int = 8400) -> None:
    """Host the configured run behind the review API (blocking)."""
    import uvicorn

    manager = RunManager(template_library=cfg.template_library)
    run_id = manager.start_run(cfg)
    log.info("started run %s; serving on port %d", run_id, port)
    uvicorn.run(create_app(manager), host="127.0.0.1", port=port, log_level="warning")
