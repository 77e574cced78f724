"""Acceptance criteria, one test per criterion.

Each test pins its stated tolerance and wall-clock budget; the terminal
summary prints one PASS/FAIL line per criterion (see conftest).
"""

from __future__ import annotations

import itertools
import math
import random
import time

import numpy as np
import pytest
from click.testing import CliRunner

from conftest import make_template_bundle, mock_provider_configs
from oracles import (
    build_tree,
    comp_aware_mpmath,
    cosine_double_loop,
    full_context_ppl,
    ted_by_forest_recursion,
    tree_shapes,
)
from pageforge.bench.dedup import dedup_templates
from pageforge.bench.metrics import aggregate_overall, comp_aware_score, cosine, readability_ppl
from pageforge.bench.sampling import cross_pair
from pageforge.bench.ted import tree_edit_distance
from pageforge.generator import (
    FigurePlacement,
    PageContent,
    enforce_content_rules,
    parse_figure_notation,
    serialize_figure_notation,
)
from pageforge.ingest import AssetLibrary, PaperDocument
from pageforge.orchestrator.cli import main as cli_main
from pageforge.orchestrator.pipeline import run_pipeline
from pageforge.orchestrator.state import RunConfig, read_json
from pageforge.renderer import HtmlPage, validate_html
from pageforge.screenshot import StubScreenshotter
from test_dedup import family_html
from test_metrics import CountingLogprob, UniformBinaryLogprob


class Budget:
    def __init__(self, seconds: float):
        self.seconds = seconds

    def __enter__(self):
        self.start = time.monotonic()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.monotonic() - self.start
        if exc[0] is None:
            assert self.elapsed < self.seconds, (
                f"runtime {self.elapsed:.2f}s exceeded the {self.seconds:.0f}s budget"
            )


def test_aggregation_anchor():
    """Overall = mean(D-Avg, U-Avg) reproduces the published per-row values."""
    with Budget(1.0):
        anchors = [
            ((1.469, 1.970), 1.719),
            ((0.992, 1.548), 1.270),
            ((1.526, 2.049), 1.788),
        ]
        for (s_detail, s_understanding), overall in anchors:
            assert aggregate_overall(s_detail, s_understanding) == pytest.approx(
                overall, abs=1e-3
            )


def test_formula_oracles():
    """comp-aware score and cosine match independent oracles within 1e-12."""
    with Budget(5.0):
        rng = np.random.default_rng(2024)
        for _ in range(1000):
            a = float(rng.uniform(0.0, 1.0))
            c = float(rng.uniform(0.02, 80.0))
            assert comp_aware_score(a, c) == pytest.approx(comp_aware_mpmath(a, c), abs=1e-12)
        for _ in range(1000):
            dim = int(rng.integers(2, 16))
            u = rng.normal(size=dim)
            v = rng.normal(size=dim)
            assert cosine(u, v) == pytest.approx(
                cosine_double_loop(u.tolist(), v.tolist()), abs=1e-12
            )


def test_ppl_consistency():
    """Sliding-window PPL equals full-context PPL for window-sized texts."""
    with Budget(10.0):
        rng = random.Random(99)
        words = [f"w{i}" for i in range(200)]
        provider = CountingLogprob()
        for _ in range(100):
            n = rng.randint(1, 60)  # shorter than the 64-token window
            text = " ".join(rng.choice(words) for _ in range(n))
            sliding = readability_ppl(text, provider, window=64, stride=32)
            full = full_context_ppl(text, provider)
            assert sliding == pytest.approx(full, rel=1e-9)
        assert readability_ppl("alpha beta gamma", UniformBinaryLogprob()) == 2.0


def test_ted_correctness():
    """Zhang-Shasha equals brute force on the enumerated small-tree corpus.

    Corpus: every ordered tree shape up to 6 nodes under two deterministic
    3-letter labelings; the oracle is the exhaustive recursion over forests
    (itself pinned against mapping enumeration in test_ted).
    """
    with Budget(60.0):
        corpus = []
        for n in range(1, 7):
            for shape in tree_shapes(n):
                corpus.append(build_tree(shape, lambda i: "abc"[i % 3]))
                corpus.append(build_tree(shape, lambda i: "cab"[(i // 2) % 3]))
        assert len(corpus) == 2 * (1 + 1 + 2 + 5 + 14 + 42)
        for t1, t2 in itertools.combinations_with_replacement(corpus, 2):
            expected = ted_by_forest_recursion(t1, t2)
            assert tree_edit_distance(t1, t2) == expected
            assert tree_edit_distance(t2, t1) == expected  # symmetry for free

        rng = random.Random(31337)
        labels = "abcde"
        for _ in range(500):
            nodes = [None]
            n = rng.randint(1, 30)
            from pageforge.bench.domtree import TreeNode

            tree_nodes = [TreeNode(rng.choice(labels))]
            for _ in range(n - 1):
                parent = tree_nodes[rng.randrange(len(tree_nodes))]
                child = TreeNode(rng.choice(labels))
                parent.children.append(child)
                tree_nodes.append(child)
            other_nodes = [TreeNode(rng.choice(labels))]
            for _ in range(rng.randint(0, 29)):
                parent = other_nodes[rng.randrange(len(other_nodes))]
                child = TreeNode(rng.choice(labels))
                parent.children.append(child)
                other_nodes.append(child)
            t1, t2 = tree_nodes[0], other_nodes[0]
            assert tree_edit_distance(t1, t1) == 0
            assert tree_edit_distance(t1, t2) == tree_edit_distance(t2, t1)


def test_dedup_behavior():
    """20 pages from 5 skeletons collapse to the 5 max-node variants."""
    with Budget(10.0):
        corpus = [(f"page-{f}{v}", family_html(f, v)) for f in range(5) for v in range(4)]
        outcome = dedup_templates(corpus)
        assert sorted(t.id for t in outcome.library.templates) == [
            "page-03",
            "page-13",
            "page-23",
            "page-33",
            "page-43",
        ]
        by_id = {t.id: t for t in outcome.library.templates}
        for family, group in enumerate(sorted(outcome.groups)):
            rep = by_id[f"page-{family}3"]
            from pageforge.bench.domtree import standardize_dom

            sizes = [standardize_dom(family_html(family, v)).size() for v in range(4)]
            assert rep.complexity == max(sizes)


def test_pipeline_determinism(paper_dir, tmp_path):
    """Same seed + scripted providers -> byte-identical page that passes both validators."""
    with Budget(30.0):
        digests = []
        for name in ("first", "second"):
            cfg = RunConfig(
                paper_path=paper_dir / "paper.md",
                asset_dir=paper_dir / "assets",
                output_dir=tmp_path / name,
                provider_configs=mock_provider_configs(),
                template_library=make_template_bundle(tmp_path / f"{name}-tpl"),
                seed=2024,
            )
            page, state = run_pipeline(cfg, screenshotter=StubScreenshotter())
            assert state.stage == "done"
            digests.append((cfg.output_dir / "index.html").read_bytes())

            run_dir = cfg.effective_runs_dir / state.run_id
            content = PageContent.from_json(
                read_json(run_dir / "content_approved" / "content.json")
            )
            lib = AssetLibrary.from_json(read_json(run_dir / "ingested" / "library.json"))
            doc = PaperDocument.from_json(read_json(run_dir / "ingested" / "document.json"))
            rules = enforce_content_rules(content, lib, doc)
            assert rules.passed, rules.violations
            table_count = sum(
                1 for p in content.all_placements() if lib.asset(p.index).kind == "table"
            )
            assert table_count <= 3
            indices = [p.index for p in content.all_placements()]
            assert len(indices) == len(set(indices))
            report = validate_html(page, content)
            assert report.passed, report.violations
        assert digests[0] == digests[1]


def test_ablation_plumbing(paper_dir, tmp_path):
    """Checker flags drive review/revise call counts in the ledger."""
    with Budget(30.0):
        runner = CliRunner()
        review_stages = ("content_review", "content_revise", "html_review", "html_revise")

        def ledger_stages(runs_dir) -> list[str]:
            run_dirs = list(runs_dir.iterdir())
            assert len(run_dirs) == 1
            return [e["stage"] for e in read_json(run_dirs[0] / "ledger.json")]

        base = [
            "run",
            "--paper", str(paper_dir / "paper.md"),
            "--assets", str(paper_dir / "assets"),
            "--template-lib", str(make_template_bundle(tmp_path / "tpl")),
            "--seed", "5",
        ]
        result = runner.invoke(
            cli_main,
            base
            + ["--out", str(tmp_path / "off"), "--no-content-checker", "--no-html-checker"],
            catch_exceptions=False,
        )
        assert result.exit_code == 0, result.output
        stages_off = ledger_stages(tmp_path / "off" / "runs")
        assert sum(1 for s in stages_off if s.startswith(review_stages)) == 0

        result = runner.invoke(
            cli_main, base + ["--out", str(tmp_path / "on")], catch_exceptions=False
        )
        assert result.exit_code == 0, result.output
        stages_on = ledger_stages(tmp_path / "on" / "runs")
        assert sum(1 for s in stages_on if s.startswith("content_review")) >= 1
        assert sum(1 for s in stages_on if s.startswith("html_review")) >= 1


def test_cross_pairing():
    """Derangements across corpus sizes 2..50 and 100 seeds: never a fixed point."""
    with Budget(5.0):
        for n in range(2, 51):
            ids = [f"paper-{i}" for i in range(n)]
            for seed in range(100):
                pairing = cross_pair(ids, ids, seed=seed)
                assert all(pairing[p] != p for p in ids)
                assert sorted(pairing.values()) == sorted(ids)


def test_notation_round_trip():
    """1000 random placements survive serialize -> parse; the canonical example parses."""
    with Budget(5.0):
        rng = random.Random(8)
        desc_alphabet = "abcdefghij KLMNOP.,:;!?-_()"
        path_alphabet = "abcdefghij/._-"
        for _ in range(1000):
            placement = FigurePlacement(
                description="".join(
                    rng.choice(desc_alphabet) for _ in range(rng.randint(0, 40))
                ),
                path="".join(rng.choice(path_alphabet) for _ in range(rng.randint(1, 30))).strip()
                or "p.png",
                width=rng.randint(1, 4000),
                height=rng.randint(1, 4000),
                index=rng.randint(1, 500),
            )
            text = serialize_figure_notation(placement)
            assert parse_figure_notation(text) == [placement]

        example = '![Overview]["assets/paper-picture-8.png"][width=1068, height=128](8)'
        parsed = parse_figure_notation(example)
        assert len(parsed) == 1
        assert parsed[0].index == 8
        assert parsed[0].width == 1068
        assert parsed[0].height == 128
