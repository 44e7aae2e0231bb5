"""HTTP facade over the store, schema, and query engine.

JSON envelope: every non-2xx response body carries ``code`` and ``message``
(plus ``position`` for query syntax errors). Term encoding in results:
``{"iri": ...}`` | ``{"blank": ...}`` | ``{"literal": ..., "lang"?: ...}``.
Schema declarations merged into the store (for example via harvested
documents posted to /statements) take effect immediately: the effective
schema is recomputed from the startup schema plus the store contents.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from datetime import datetime, timezone
from typing import Iterable

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse, PlainTextResponse

from .model import BlankNode, Iri, Literal, MalformedIri, Term, Triple, UnknownPrefix, term_key
from .query import QuerySyntaxError, UnboundVariable, evaluate, parse_query
from .schema import (
    ClosureTable,
    Schema,
    _RESOURCE_OBJECT_PREDICATES,
    closure,
    default_prefixes,
    load_schema,
)
from .serde import TRIPLES_MEDIA_TYPE, parse_triples, serialize
from .store import LOCAL_SOURCE, REPLACE_SOURCE, ACCUMULATE, Store

DEFAULT_BODY_LIMIT = 8 * 1024 * 1024


def _utc_iso(epoch_seconds: int) -> str:
    return datetime.fromtimestamp(epoch_seconds, tz=timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def term_to_json(term: Term) -> dict:
    if isinstance(term, Iri):
        return {"iri": term.value}
    if isinstance(term, BlankNode):
        return {"blank": term.label}
    payload = {"literal": term.lexical}
    if term.lang:
        payload["lang"] = term.lang
    return payload


def _error(status: int, code: str, message: str, position: int | None = None) -> JSONResponse:
    body: dict = {"code": code, "message": message}
    if position is not None:
        body["position"] = position
    return JSONResponse(status_code=status, content=body)


def _schema_safe(triples: Iterable[Triple]) -> list[Triple]:
    """Drop triples that would make schema extraction fail (reserved
    predicate with a literal object); harvested data must not take the
    server down."""
    return [
        t
        for t in triples
        if not (t.predicate in _RESOURCE_OBJECT_PREDICATES and isinstance(t.object, Literal))
    ]


@dataclass
class ServerState:
    store: Store
    base_schema_triples: list[Triple]
    merge_mode: str = REPLACE_SOURCE
    body_limit: int = DEFAULT_BODY_LIMIT
    schema: Schema = None  # type: ignore[assignment]
    ct: ClosureTable = None  # type: ignore[assignment]

    def __post_init__(self) -> None:
        self.prefixes = default_prefixes()
        self.rebuild_schema()

    def rebuild_schema(self) -> None:
        dataset = list(self.base_schema_triples)
        dataset.extend(_schema_safe(self.store.snapshot().triples))
        self.schema = load_schema(dataset)
        self.ct = closure(self.schema)


def _class_tree(schema: Schema) -> list[dict]:
    children: dict[Iri, list[Iri]] = {}
    has_parent: set[Iri] = set()
    for child, parent in schema.subclass_edges:
        if child != parent:
            children.setdefault(parent, []).append(child)
            has_parent.add(child)

    def node(iri: Iri, path: frozenset[Iri]) -> dict:
        kids = sorted(
            (c for c in children.get(iri, []) if c not in path), key=lambda i: i.value
        )
        return {
            "iri": iri.value,
            "label": schema.labels.get(iri, ""),
            "children": [node(kid, path | {kid}) for kid in kids],
        }

    roots = sorted((c for c in schema.classes if c not in has_parent), key=lambda i: i.value)
    return [node(root, frozenset({root})) for root in roots]


def create_app(state: ServerState, cors_origin: str | None = None) -> FastAPI:
    app = FastAPI(title="cris", docs_url=None, redoc_url=None)

    if cors_origin:
        from fastapi.middleware.cors import CORSMiddleware

        app.add_middleware(
            CORSMiddleware,
            allow_origins=[cors_origin] if cors_origin != "*" else ["*"],
            allow_methods=["*"],
            allow_headers=["*"],
        )

    async def _limited_body(request: Request) -> bytes | None:
        body = await request.body()
        if len(body) > state.body_limit:
            return None
        return body

    @app.post("/query")
    async def post_query(request: Request):
        body = await _limited_body(request)
        if body is None:
            return _error(413, "BODY_TOO_LARGE", "request body exceeds limit")
        try:
            payload = json.loads(body)
        except ValueError:
            return _error(400, "BAD_REQUEST", "body must be JSON")
        if not isinstance(payload, dict) or not isinstance(payload.get("q"), str):
            return _error(400, "BAD_REQUEST", 'body must be {"q": "<query>"}')
        try:
            ast = parse_query(payload["q"], state.prefixes)
        except QuerySyntaxError as exc:
            return _error(400, "QUERY_SYNTAX", exc.reason, position=exc.position)
        except UnboundVariable as exc:
            return _error(400, "UNBOUND_VARIABLE", str(exc))
        except UnknownPrefix as exc:
            return _error(400, "UNKNOWN_PREFIX", str(exc))
        except MalformedIri as exc:
            return _error(400, "QUERY_SYNTAX", str(exc))
        table = evaluate(ast, state.store.snapshot(), state.schema, state.ct)
        return {
            "columns": list(table.columns),
            "rows": [[term_to_json(term) for term in row] for row in table.rows],
        }

    @app.post("/statements")
    async def post_statements(request: Request, source: str = LOCAL_SOURCE, mode: str = ""):
        body = await _limited_body(request)
        if body is None:
            return _error(413, "BODY_TOO_LARGE", "request body exceeds limit")
        try:
            text = body.decode("utf-8")
        except UnicodeDecodeError:
            return _error(400, "BAD_TRIPLES", "body is not valid UTF-8")
        merge_mode = mode or state.merge_mode
        if merge_mode not in (REPLACE_SOURCE, ACCUMULATE):
            return _error(400, "BAD_REQUEST", f"unknown merge mode {merge_mode!r}")
        outcome = parse_triples(text, scope=source)
        if not outcome.triples and outcome.errors:
            return _error(400, "BAD_TRIPLES", "no line parsed as a triple")
        added, duplicate = state.store.merge(
            outcome, source=source, at=int(datetime.now(tz=timezone.utc).timestamp()),
            mode=merge_mode,
        )
        state.rebuild_schema()
        return {
            "added": added,
            "duplicate": duplicate,
            "errors": [{"line": line, "message": message} for line, message in outcome.errors],
        }

    @app.get("/classes")
    async def get_classes():
        return _class_tree(state.schema)

    @app.get("/resources/{iri:path}")
    async def get_resource(iri: str):
        try:
            subject = Iri(iri)
        except MalformedIri:
            return _error(404, "RESOURCE_NOT_FOUND", f"no triples with subject {iri!r}")
        snap = state.store.snapshot()
        triples = snap.match(s=subject)
        if not triples:
            return _error(404, "RESOURCE_NOT_FOUND", f"no triples with subject {iri!r}")
        return {
            "iri": subject.value,
            "triples": [
                {
                    "subject": term_to_json(t.subject),
                    "predicate": term_to_json(t.predicate),
                    "object": term_to_json(t.object),
                    "sources": [
                        {"source": source, "fetched_at": _utc_iso(at)}
                        for source, at in sorted(snap.provenance.get(t, frozenset()))
                    ],
                }
                for t in triples
            ],
        }

    @app.get("/stats")
    async def get_stats():
        stats = state.store.snapshot().stats()
        return {
            "triples": stats.triples,
            "subjects": stats.subjects,
            "predicates": stats.predicates,
            "sources": [
                {"source": source, "triples": count, "latest_fetch": _utc_iso(latest)}
                for source, count, latest in stats.per_source
            ],
        }

    @app.get("/schema")
    async def get_schema():
        return PlainTextResponse(
            serialize(state.base_schema_triples),
            media_type=f"{TRIPLES_MEDIA_TYPE}; charset=utf-8",
        )

    return app
