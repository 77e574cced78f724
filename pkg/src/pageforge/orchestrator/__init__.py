"""Pipeline state machine, CLI, HTTP service, and run persistence."""

from .pipeline import EvalOptions, PipelineRun, eval_run, replay_events, run_pipeline
from .state import CheckerFlags, PipelineState, RunConfig

__all__ = [
    "CheckerFlags",
    "EvalOptions",
    "PipelineRun",
    "PipelineState",
    "RunConfig",
    "eval_run",
    "replay_events",
    "run_pipeline",
]
