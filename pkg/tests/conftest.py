from __future__ import annotations

import json
from pathlib import Path

import pytest

from pageforge.ingest import assign_figure_sections, build_asset_library, parse_markdown
from pageforge.provider import ProviderConfig, ProviderSet, UsageLedger, build_providers

PAPER_MD = """# DemoNet: A Tiny Method

## Abstract

We present DemoNet, a compact approach to a synthetic problem.

![Figure 1. Architecture overview of DemoNet](fig1.png)

## Method

DemoNet composes two stages with a shared encoder.

$$y = f(g(x))$$

![Figure 2. The two-stage composition](fig2.png)

## Experiments

DemoNet outperforms the baseline on all splits.

![Table 1. Main results on the synthetic benchmark](tab1.png)

## Conclusion

DemoNet is small, fast, and easy to train.
"""


def _write_png(path: Path, size: tuple[int, int]) -> None:
    from PIL import Image

    Image.new("RGB", size, "white").save(path, format="PNG")


@pytest.fixture
def paper_dir(tmp_path: Path) -> Path:
    root = tmp_path / "paper"
    assets = root / "assets"
    assets.mkdir(parents=True)
    (root / "paper.md").write_text(PAPER_MD, encoding="utf-8")
    _write_png(assets / "fig1.png", (640, 360))
    _write_png(assets / "fig2.png", (800, 500))
    _write_png(assets / "tab1.png", (700, 300))
    return root


def mock_provider_configs() -> dict[str, ProviderConfig]:
    return {
        role: ProviderConfig(endpoint="mock:", model_name="offline", unit_cost_per_token=2e-7)
        for role in ("chat", "judge", "embed", "logprob")
    }


@pytest.fixture
def providers() -> ProviderSet:
    return build_providers(mock_provider_configs(), UsageLedger())


@pytest.fixture
def doc(paper_dir):
    return parse_markdown((paper_dir / "paper.md").read_text(encoding="utf-8"), paper_dir / "assets")


@pytest.fixture
def library(doc, providers):
    lib = build_asset_library(doc, providers.chat)
    return assign_figure_sections(lib, doc, providers.chat)


class ScriptedChat:
    """Chat provider fed from a list of replies (or handler functions)."""

    def __init__(self, replies, ledger: UsageLedger | None = None) -> None:
        self.replies = list(replies)
        self.calls: list[dict] = []
        self.ledger = ledger if ledger is not None else UsageLedger()

    def chat(self, messages, *, stage="chat", temperature=None):
        if not messages:
            raise ValueError("messages must be non-empty")
        self.calls.append({"messages": messages, "stage": stage, "temperature": temperature})
        if not self.replies:
            raise AssertionError("ScriptedChat ran out of replies")
        reply = self.replies.pop(0)
        if callable(reply):
            reply = reply(messages)
        self.ledger.record(stage, 1, 1, None, 0.0)
        return reply


def fenced_json(value) -> str:
    return f"```json\n{json.dumps(value, indent=2)}\n```"


def make_template_bundle(root: Path, n: int = 10, nav_count: int = 4) -> Path:
    """A fixture library: ``nav_count`` of the n templates carry a nav bar."""
    root.mkdir(parents=True, exist_ok=True)
    for i in range(n):
        has_nav = i < nav_count
        tdir = root / f"tpl-{i:02d}"
        static = tdir / "static"
        static.mkdir(parents=True, exist_ok=True)
        (static / "main.css").write_text("body { margin: 0; }\n", encoding="utf-8")
        nav = '<nav><a href="#top">Top</a></nav>' if has_nav else ""
        (tdir / "template.html").write_text(
            "<!DOCTYPE html>\n<html><head>"
            '<link rel="stylesheet" href="static/main.css">'
            f"</head><body>{nav}<main><h1>Skeleton {i}</h1></main></body></html>",
            encoding="utf-8",
        )
        (tdir / "manifest.json").write_text(
            json.dumps(
                {
                    "id": f"tpl-{i:02d}",
                    "tags": {"has_navigation": has_nav, "background_color": "light"},
                    "complexity": 6 + i,
                }
            ),
            encoding="utf-8",
        )
    (root / "library.json").write_text(
        json.dumps({"tag_vocabulary": ["has_navigation", "background_color"]}),
        encoding="utf-8",
    )
    return root


# --- acceptance criterion reporting ---------------------------------------------

_ACCEPTANCE_RESULTS: list[tuple[str, str]] = []


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    if report.when == "call" and "test_acceptance" in str(item.fspath):
        name = item.name.replace("test_", "", 1)
        _ACCEPTANCE_RESULTS.append((name, "PASS" if report.passed else "FAIL"))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, verdict in _ACCEPTANCE_RESULTS:
        terminalreporter.write_line(f"{verdict}  {name}")
