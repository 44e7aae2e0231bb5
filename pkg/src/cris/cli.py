"""Command line interface: crawl, generate, embed, query, serve."""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .generator import (
    CrisError,
    GeneratedAnnotation,
    embed as embed_annotation,
    generate,
    load_record_file,
)
from .harvester import ConfigError, CrawlConfig, CrawlReport, crawl, export
from .model import Iri, MalformedIri
from .query import evaluate, parse_query
from .schema import bundled_cerif_schema, closure, default_prefixes, load_schema
from .serde import parse_triples, serialize
from .server import ServerState, create_app, term_to_json, _schema_safe
from .store import ACCUMULATE, REPLACE_SOURCE, Store


def _load_schema_triples(schema_file: str | None):
    if schema_file is None:
        return bundled_cerif_schema()
    text = Path(schema_file).read_text(encoding="utf-8")
    outcome = parse_triples(text, scope=f"schema-file:{schema_file}")
    if outcome.errors:
        line, message = outcome.errors[0]
        raise click.ClickException(f"{schema_file}:{line}: {message}")
    return outcome.triples


def _open_store(store_dir: str) -> Store:
    return Store.load(store_dir, persist_dir=store_dir)


@click.group()
def main() -> None:
    """Research information retrieval engine."""


@main.command("crawl")
@click.option("--seeds", "seeds_file", required=True, type=click.Path(exists=True),
              help="File with one seed URL per line.")
@click.option("--allow", "allow_hosts", default="", help="Comma-separated host allowlist.")
@click.option("--depth", default=2, show_default=True, help="Maximum link depth.")
@click.option("--max-pages", default=100, show_default=True, help="Fetch budget.")
@click.option("--delay", default=0, show_default=True, help="Per-host delay in milliseconds.")
@click.option("--parallel", default=1, show_default=True, help="Concurrent fetches.")
@click.option("--timeout", default=10000, show_default=True, help="Fetch timeout in milliseconds.")
@click.option("--out", "store_dir", required=True, type=click.Path(), help="Store directory.")
@click.option("--accumulate", is_flag=True, help="Keep triples a source no longer asserts.")
@click.option("--no-robots", is_flag=True, help="Ignore robots.txt (fixture testing).")
@click.option("--report", "report_file", type=click.Path(), help="Write a JSON-lines crawl report.")
def crawl_command(
    seeds_file: str,
    allow_hosts: str,
    depth: int,
    max_pages: int,
    delay: int,
    parallel: int,
    timeout: int,
    store_dir: str,
    accumulate: bool,
    no_robots: bool,
    report_file: str | None,
) -> None:
    """Harvest annotated pages starting from the seed URLs."""
    try:
        seeds = []
        for line in Path(seeds_file).read_text(encoding="utf-8").splitlines():
            line = line.strip()
            if line and not line.startswith("#"):
                seeds.append(Iri(line))
    except MalformedIri as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(2)

    config = CrawlConfig(
        seeds=seeds,
        host_allowlist=[h.strip() for h in allow_hosts.split(",") if h.strip()],
        max_depth=depth,
        max_pages=max_pages,
        per_host_delay_ms=delay,
        fetch_parallelism=parallel,
        timeout_ms=timeout,
        merge_mode=ACCUMULATE if accumulate else REPLACE_SOURCE,
        obey_robots=not no_robots,
    )
    store = _open_store(store_dir)
    try:
        report = crawl(config, store)
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(2)

    export(store, store_dir)
    if report_file:
        Path(report_file).write_text(report.to_json_lines(), encoding="utf-8")
    fetched = len(report.fetched())
    click.echo(
        f"fetched {fetched} page(s), {len(report.failed())} failed, "
        f"{len(report.skipped())} skipped, {report.triples_added()} triples added"
    )
    if fetched == 0:
        sys.exit(1)


@main.command("generate")
@click.option("--in", "records_file", required=True, type=click.Path(exists=True),
              help="Record file (JSON).")
@click.option("--base", "base_uri", default=None,
              help="Base URI override for minted identifiers.")
@click.option("--strict", is_flag=True, help="Fail on properties the schema does not declare.")
@click.option("--schema", "schema_file", type=click.Path(exists=True),
              help="Schema triple file (defaults to the bundled ontology).")
@click.option("--out", "out_file", required=True, type=click.Path(), help="Output triple file.")
def generate_command(records_file, base_uri, strict, schema_file, out_file) -> None:
    """Generate annotation triples from a record file."""
    record_file = load_record_file(records_file)
    if base_uri:
        from .generator import RecordFile

        record_file = RecordFile(base_uri=Iri(base_uri), records=record_file.records)
    schema_triples = _load_schema_triples(schema_file)
    schema = load_schema(schema_triples)
    ct = closure(schema)
    try:
        annotation = generate(record_file, schema, ct, strict=strict)
    except CrisError as exc:
        raise click.ClickException(str(exc))
    for warning in annotation.warnings:
        click.echo(f"warning: {warning}", err=True)
    Path(out_file).write_text(serialize(annotation.triples), encoding="utf-8")
    click.echo(f"wrote {len(annotation.triples)} triples to {out_file}")


@main.command("embed")
@click.option("--annotation", "annotation_file", required=True, type=click.Path(exists=True),
              help="Triple file to embed.")
@click.option("--html", "html_file", required=True, type=click.Path(exists=True))
@click.option("--out", "out_file", required=True, type=click.Path())
def embed_command(annotation_file, html_file, out_file) -> None:
    """Embed an annotation triple file into an HTML page."""
    outcome = parse_triples(
        Path(annotation_file).read_text(encoding="utf-8"), scope=annotation_file
    )
    if outcome.errors:
        line, message = outcome.errors[0]
        raise click.ClickException(f"{annotation_file}:{line}: {message}")
    annotation = GeneratedAnnotation(triples=frozenset(outcome.triples), subject_uris={})
    html = Path(html_file).read_text(encoding="utf-8")
    Path(out_file).write_text(embed_annotation(annotation, html), encoding="utf-8")
    click.echo(f"embedded {len(outcome.triples)} triples into {out_file}")


@main.command("query")
@click.argument("query_text")
@click.option("--store", "store_dir", required=True, type=click.Path(), help="Store directory.")
@click.option("--schema", "schema_file", type=click.Path(exists=True),
              help="Schema triple file (defaults to the bundled ontology).")
def query_command(query_text, store_dir, schema_file) -> None:
    """Evaluate a query against a store and print the bindings as JSON."""
    store = Store.load(store_dir)
    schema_triples = list(_load_schema_triples(schema_file))
    snap = store.snapshot()
    schema_triples.extend(_schema_safe(snap.triples))
    schema = load_schema(schema_triples)
    ct = closure(schema)
    try:
        ast = parse_query(query_text, default_prefixes())
    except CrisError as exc:
        raise click.ClickException(str(exc))
    table = evaluate(ast, snap, schema, ct)
    click.echo(
        json.dumps(
            {
                "columns": list(table.columns),
                "rows": [[term_to_json(term) for term in row] for row in table.rows],
            },
            indent=2,
        )
    )


@main.command("serve")
@click.option("--store", "store_dir", required=True, type=click.Path(), help="Store directory.")
@click.option("--schema", "schema_file", type=click.Path(exists=True),
              help="Schema triple file (defaults to the bundled ontology).")
@click.option("--bind", default="127.0.0.1:7878", show_default=True, help="ADDR:PORT to listen on.")
@click.option("--cors", "cors_origin", default=None, help="Allowed CORS origin for the UI.")
@click.option("--accumulate", is_flag=True, help="Default merge mode for POST /statements.")
def serve_command(store_dir, schema_file, bind, cors_origin, accumulate) -> None:
    """Serve the HTTP query and update interface."""
    import uvicorn

    host, _, port_text = bind.rpartition(":")
    if not host or not port_text.isdigit():
        raise click.ClickException(f"--bind must be ADDR:PORT, got {bind!r}")
    store = _open_store(store_dir)
    state = ServerState(
        store=store,
        base_schema_triples=list(_load_schema_triples(schema_file)),
        merge_mode=ACCUMULATE if accumulate else REPLACE_SOURCE,
    )
    app = create_app(state, cors_origin=cors_origin)
    uvicorn.run(app, host=host, port=int(port_text), log_level="warning")


if __name__ == "__main__":
    main()
