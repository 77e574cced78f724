"""Exception hierarchy shared across the pipeline."""

from __future__ import annotations


class PageForgeError(Exception):
    """Base class for all package errors."""


class ProviderError(PageForgeError):
    """A model endpoint failed after exhausting retries."""


class AuthenticationError(ProviderError):
    """The endpoint rejected our credentials; retrying is pointless."""


class CapabilityError(ProviderError):
    """The configured endpoint cannot serve the requested modality."""


class JsonExtractError(PageForgeError):
    """No parseable JSON found in a model reply."""


class NotationError(PageForgeError):
    """A figure-placement token failed the placement grammar."""

    def __init__(self, message: str, offset: int) -> None:
        super().__init__(f"{message} (at offset {offset})")
        self.offset = offset


class ValidationFailed(PageForgeError):
    """A stage output violated its contract after the retry budget."""

    def __init__(self, message: str, violations: list[tuple[str, str]] | None = None) -> None:
        super().__init__(message)
        self.violations = violations or []


class PipelineError(PageForgeError):
    """A pipeline run could not advance; the failed stage is recorded."""


class StageConflictError(PageForgeError):
    """An interaction arrived for a checkpoint the run is not blocked at."""
