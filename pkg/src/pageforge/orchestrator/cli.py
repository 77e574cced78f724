"""Command-line interface: run, eval, curate, serve."""

from __future__ import annotations

import json
import logging
import sys
from pathlib import Path

import click

from ..bench.dedup import dedup_templates, page_features
from ..bench.sampling import cluster_sample, cross_pair
from ..ingest import PaperDocument, parse_markdown
from ..provider import ProviderConfig, build_providers, load_provider_configs
from ..renderer import save_template
from .pipeline import EvalOptions, eval_run, run_pipeline
from .service import RunManager, serve
from .state import CheckerFlags, RunConfig, write_json


def _provider_configs(path: str | None) -> dict[str, ProviderConfig]:
    if path:
        return load_provider_configs(path)
    # No config: run everything against the deterministic offline backend.
    return {
        role: ProviderConfig(endpoint="mock:", model_name="offline")
        for role in ("chat", "judge", "embed", "logprob")
    }


def _parse_tags(tags: tuple[str, ...]) -> dict[str, object]:
    from .service import parse_tag_query

    return parse_tag_query(list(tags))


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="debug logging")
def main(verbose: bool) -> None:
    """Turn parsed papers into project webpages; score any generated page."""
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )


@main.command()
@click.option("--paper", required=True, type=click.Path(exists=True), help="Markdown input")
@click.option("--assets", required=True, type=click.Path(exists=True), help="asset directory")
@click.option("--template-lib", type=click.Path(exists=True), default=None)
@click.option("--tags", multiple=True, help="template tag filter, key=value")
@click.option("--template-id", default=None, help="pick this template explicitly")
@click.option("--mode", type=click.Choice(["autonomous", "interactive"]), default="autonomous")
@click.option("--seed", type=int, default=0)
@click.option("--no-content-checker", is_flag=True)
@click.option("--no-html-checker", is_flag=True)
@click.option("--max-iter", type=int, default=3)
@click.option("--out", required=True, type=click.Path(), help="final page directory")
@click.option("--providers", type=click.Path(exists=True), default=None, help="provider config")
@click.option("--run-id", default=None, help="resume or name a run")
@click.option("--runs-dir", type=click.Path(), default=None)
def run(
    paper, assets, template_lib, tags, template_id, mode, seed,
    no_content_checker, no_html_checker, max_iter, out, providers, run_id, runs_dir,
) -> None:
    """Execute the full plan -> generate -> render pipeline."""
    cfg = RunConfig(
        paper_path=Path(paper),
        asset_dir=Path(assets),
        output_dir=Path(out),
        provider_configs=_provider_configs(providers),
        template_library=Path(template_lib) if template_lib else None,
        tag_query=_parse_tags(tags),
        template_id=template_id,
        mode=mode,
        seed=seed,
        max_iter=max_iter,
        checker_flags=CheckerFlags(
            content_checker=not no_content_checker, html_checker=not no_html_checker
        ),
        runs_dir=Path(runs_dir) if runs_dir else None,
    )
    page, state = run_pipeline(cfg, run_id=run_id)
    click.echo(f"run {state.run_id}: {state.stage}")
    click.echo(f"page written to {page.output_dir}")


@main.command("eval")
@click.option("--page", required=True, type=click.Path(exists=True), help="rendered page dir")
@click.option("--paper", required=True, type=click.Path(exists=True), help="Markdown source")
@click.option("--assets", required=True, type=click.Path(exists=True))
@click.option("--providers", type=click.Path(exists=True), default=None)
@click.option("--qa", type=int, default=100, help="QA pairs for the accuracy probe")
@click.option("--out", type=click.Path(), default=None, help="write the report here")
@click.option("--cross-pair", "cross_pair_manifest", type=click.Path(exists=True), default=None,
              help="corpus manifest (JSON list of {paper_id, template_id}); prints the "
                   "derangement used to decouple papers from their own templates")
@click.option("--seed", type=int, default=0)
def eval_cmd(page, paper, assets, providers, qa, out, cross_pair_manifest, seed) -> None:
    """Score a generated page with the full metric suite."""
    if cross_pair_manifest:
        entries = json.loads(Path(cross_pair_manifest).read_text(encoding="utf-8"))
        papers = [e["paper_id"] for e in entries]
        templates = [e.get("template_id", e["paper_id"]) for e in entries]
        pairing = cross_pair(papers, templates, seed)
        click.echo(json.dumps({"cross_pairing": pairing}, indent=2))
    doc = parse_markdown(Path(paper).read_text(encoding="utf-8"), Path(assets))
    provider_set = build_providers(_provider_configs(providers))
    report = eval_run(Path(page), doc, provider_set, options=EvalOptions(qa_pairs=qa))
    payload = report.to_json()
    click.echo(json.dumps(payload, indent=2))
    if out:
        write_json(Path(out), payload)


@main.command()
@click.option("--corpus", required=True, type=click.Path(exists=True),
              help="directory of candidate pages (*.html)")
@click.option("--k", type=int, default=None, help="cluster-sample size before dedup")
@click.option("--simhash-th", type=int, default=3)
@click.option("--ted-th", type=int, default=None)
@click.option("--seed", type=int, default=0)
@click.option("--out", required=True, type=click.Path(), help="template library bundle dir")
def curate(corpus, k, simhash_th, ted_th, seed, out) -> None:
    """Build a deduplicated, tag-annotated template library from raw pages."""
    corpus_dir = Path(corpus)
    pages = [
        (p.stem, p.read_text(encoding="utf-8", errors="replace"))
        for p in sorted(corpus_dir.glob("*.html"))
    ]
    if not pages:
        raise click.ClickException(f"no *.html pages under {corpus_dir}")
    if k is not None and k < len(pages):
        features = [page_features(html) for _, html in pages]
        keep = cluster_sample(features, k, seed)
        pages = [pages[i] for i in keep]
    outcome = dedup_templates(pages, simhash_threshold=simhash_th, ted_threshold=ted_th)
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    for template in outcome.library.templates:
        save_template(out_dir, template)
    write_json(
        out_dir / "library.json",
        {
            "tag_vocabulary": sorted(outcome.library.tag_vocabulary),
            "groups": [list(g) for g in outcome.groups],
            "skipped": [list(s) for s in outcome.skipped],
        },
    )
    click.echo(
        f"curated {len(outcome.library.templates)} templates from {len(pages)} pages "
        f"({len(outcome.skipped)} skipped) -> {out_dir}"
    )


@main.command("serve")
@click.option("--paper", required=True, type=click.Path(exists=True))
@click.option("--assets", required=True, type=click.Path(exists=True))
@click.option("--template-lib", type=click.Path(exists=True), default=None)
@click.option("--tags", multiple=True)
@click.option("--seed", type=int, default=0)
@click.option("--max-iter", type=int, default=3)
@click.option("--out", required=True, type=click.Path())
@click.option("--providers", type=click.Path(exists=True), default=None)
@click.option("--port", type=int, default=8400)
@click.option("--checkpoint-timeout", type=float, default=None,
              help="seconds before an unanswered checkpoint auto-approves")
def serve_cmd(
    paper, assets, template_lib, tags, seed, max_iter, out, providers, port, checkpoint_timeout
) -> None:
    """Host an interactive run behind the review API."""
    cfg = RunConfig(
        paper_path=Path(paper),
        asset_dir=Path(assets),
        output_dir=Path(out),
        provider_configs=_provider_configs(providers),
        template_library=Path(template_lib) if template_lib else None,
        tag_query=_parse_tags(tags),
        mode="interactive",
        seed=seed,
        max_iter=max_iter,
        checkpoint_timeout=checkpoint_timeout,
    )
    serve(cfg, port=port)


if __name__ == "__main__":
    main(sys.argv[1:])
