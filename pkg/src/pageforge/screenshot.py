"""Screenshot capture behind a small interface.

The real implementation shells out to a headless browser so the core stays
free of browser dependencies; tests and offline runs use the stub, which
emits a deterministic placeholder image at the same fixed 1280px viewport.
"""

from __future__ import annotations

import shutil
import subprocess
from pathlib import Path
from typing import Protocol

from .errors import PageForgeError

VIEWPORT_WIDTH = 1280


class Screenshotter(Protocol):
    def capture(self, page_dir: Path) -> Path: ...


class SubprocessScreenshotter:
    """Invoke a headless browser binary to render ``index.html`` to PNG."""

    BINARIES = ("chromium", "chromium-browser", "google-chrome", "chrome")

    def __init__(self, binary: str | None = None, viewport_height: int = 2000) -> None:
        self.binary = binary or next(
            (b for b in self.BINARIES if shutil.which(b)), None
        )
        self.viewport_height = viewport_height

    def capture(self, page_dir: Path) -> Path:
        if self.binary is None:
            raise PageForgeError("no headless browser binary found for screenshots")
        html = Path(page_dir) / "index.html"
        if not html.is_file():
            raise PageForgeError(f"no index.html under {page_dir}")
        out = Path(page_dir) / "screenshot.png"
        cmd = [
            self.binary,
            "--headless",
            "--disable-gpu",
            "--no-sandbox",
            f"--window-size={VIEWPORT_WIDTH},{self.viewport_height}",
            f"--screenshot={out}",
            html.resolve().as_uri(),
        ]
        result = subprocess.run(cmd, capture_output=True, timeout=120)
        if result.returncode != 0 or not out.is_file():
            raise PageForgeError(
                f"screenshot failed ({result.returncode}): {result.stderr.decode()[:200]}"
            )
        return out


class StubScreenshotter:
    """Deterministic stand-in: a blank viewport-sized PNG."""

    def capture(self, page_dir: Path) -> Path:
        from PIL import Image

        out = Path(page_dir) / "screenshot.png"
        Image.new("RGB", (VIEWPORT_WIDTH, 800), "white").save(out, format="PNG")
        return out
