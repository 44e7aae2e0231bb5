"""Polite HTTP crawler that harvests page annotations into the store.

Breadth-first from the seed URLs: fetch a page, extract its annotation
blocks and linked triple files, merge everything into the store with the
document URL as provenance source, and follow in-scope links. Hosts outside
the allowlist are never fetched; per-host requests are spaced by a
configurable delay; robots.txt is honored by default.
"""

from __future__ import annotations

import json
import threading
import time
import urllib.robotparser
from collections import deque
from concurrent.futures import FIRST_COMPLETED, ThreadPoolExecutor, wait
from dataclasses import dataclass, field
from pathlib import Path
from urllib.parse import urldefrag, urlsplit

import requests

from .model import CrisError, Iri
from .serde import (
    ParseOutcome,
    TRIPLES_FILE_EXTENSION,
    TRIPLES_MEDIA_TYPE,
    extract_annotations,
    parse_triples,
)
from .store import REPLACE_SOURCE, Store

DEFAULT_USER_AGENT = "cris-harvester/0.1"
DEFAULT_MAX_PAGE_BYTES = 2 * 1024 * 1024
DEFAULT_MAX_REDIRECTS = 5


class ConfigError(CrisError):
    """The crawl configuration is unusable; the only fatal crawl error."""


@dataclass
class CrawlConfig:
    seeds: list[Iri]
    host_allowlist: list[str] = field(default_factory=list)
    max_depth: int = 2
    max_pages: int = 100
    per_host_delay_ms: int = 0
    fetch_parallelism: int = 1
    timeout_ms: int = 10_000
    merge_mode: str = REPLACE_SOURCE
    obey_robots: bool = True
    max_page_bytes: int = DEFAULT_MAX_PAGE_BYTES
    max_redirects: int = DEFAULT_MAX_REDIRECTS
    user_agent: str = DEFAULT_USER_AGENT

    def validate(self) -> None:
        if not self.seeds:
            raise ConfigError("at least one seed URL is required")
        if self.max_depth < 0:
            raise ConfigError("max_depth must be non-negative")
        if self.max_pages < 1:
            raise ConfigError("max_pages must be positive")
        if self.fetch_parallelism < 1:
            raise ConfigError("fetch_parallelism must be positive")
        if self.per_host_delay_ms < 0:
            raise ConfigError("per_host_delay must be non-negative")
        if self.timeout_ms <= 0:
            raise ConfigError("timeout must be positive")
        allowlist = self.effective_allowlist()
        for seed in self.seeds:
            host = _host_of(seed.value)
            if host is None:
                raise ConfigError(f"seed has no host: {seed}")
            if host not in allowlist:
                raise ConfigError(f"seed host {host!r} is not in the allowlist")

    def effective_allowlist(self) -> frozenset[str]:
        """Explicit allowlist, or the seeds' hosts when none was given."""
        if self.host_allowlist:
            return frozenset(h.lower() for h in self.host_allowlist)
        return frozenset(
            h for h in (_host_of(seed.value) for seed in self.seeds) if h is not None
        )


@dataclass
class UrlRecord:
    url: str
    depth: int
    outcome: str  # fetched | skipped | failed
    status: int | None = None
    triples_added: int = 0
    parse_errors: int = 0
    duration_ms: int = 0
    detail: str = ""

    def to_json(self) -> str:
        return json.dumps(
            {
                "url": self.url,
                "depth": self.depth,
                "outcome": self.outcome,
                "status": self.status,
                "triples_added": self.triples_added,
                "parse_errors": self.parse_errors,
                "duration_ms": self.duration_ms,
                "detail": self.detail,
            },
            sort_keys=True,
        )


@dataclass
class CrawlReport:
    records: list[UrlRecord] = field(default_factory=list)
    started_at: int = 0
    finished_at: int = 0

    def fetched(self) -> list[UrlRecord]:
        return [r for r in self.records if r.outcome == "fetched"]

    def failed(self) -> list[UrlRecord]:
        return [r for r in self.records if r.outcome == "failed"]

    def skipped(self) -> list[UrlRecord]:
        return [r for r in self.records if r.outcome == "skipped"]

    def triples_added(self) -> int:
        return sum(r.triples_added for r in self.records)

    def to_json_lines(self) -> str:
        return "".join(record.to_json() + "\n" for record in self.records)


def _host_of(url: str) -> str | None:
    try:
        host = urlsplit(url).hostname
    except ValueError:
        return None
    return host.lower() if host else None


def _strip_fragment(url: str) -> str:
    return urldefrag(url)[0]


class _HostGate:
    """Serializes requests to one host and enforces the politeness delay."""

    def __init__(self) -> None:
        self.lock = threading.Lock()
        self.next_allowed = 0.0


@dataclass
class _FetchResult:
    status: int | None
    content_type: str
    body: bytes | None
    final_url: str
    error: str = ""
    duration_ms: int = 0


class _Fetcher:
    def __init__(self, config: CrawlConfig):
        self.config = config
        self.session = requests.Session()
        self.session.max_redirects = config.max_redirects
        self.session.headers["User-Agent"] = config.user_agent
        self._gates: dict[str, _HostGate] = {}
        self._gates_lock = threading.Lock()
        self._robots: dict[str, urllib.robotparser.RobotFileParser | None] = {}
        self._robots_lock = threading.Lock()

    def _gate_for(self, host: str) -> _HostGate:
        with self._gates_lock:
            return self._gates.setdefault(host, _HostGate())

    def _request(self, gate: _HostGate, url: str) -> _FetchResult:
        """One polite GET. The gate is held for the whole request, so
        consecutive request starts on a host are at least the delay apart."""
        delay_s = self.config.per_host_delay_ms / 1000.0
        timeout_s = self.config.timeout_ms / 1000.0
        with gate.lock:
            pause = gate.next_allowed - time.monotonic()
            if pause > 0:
                time.sleep(pause + 0.002)
            started = time.monotonic()
            gate.next_allowed = started + delay_s
            try:
                response = self.session.get(url, timeout=timeout_s, stream=True)
                chunks: list[bytes] = []
                total = 0
                for chunk in response.iter_content(65536):
                    total += len(chunk)
                    if total > self.config.max_page_bytes:
                        response.close()
                        return _FetchResult(
                            status=response.status_code,
                            content_type="",
                            body=None,
                            final_url=url,
                            error="response exceeds page size cap",
                            duration_ms=int((time.monotonic() - started) * 1000),
                        )
                    chunks.append(chunk)
                content_type = response.headers.get("Content-Type", "").split(";")[0].strip().lower()
                return _FetchResult(
                    status=response.status_code,
                    content_type=content_type,
                    body=b"".join(chunks),
                    final_url=str(response.url),
                    duration_ms=int((time.monotonic() - started) * 1000),
                )
            except requests.RequestException as exc:
                return _FetchResult(
                    status=None,
                    content_type="",
                    body=None,
                    final_url=url,
                    error=type(exc).__name__,
                    duration_ms=int((time.monotonic() - started) * 1000),
                )

    def _robots_for(self, host: str, gate: _HostGate, scheme_and_netloc: str):
        with self._robots_lock:
            if host in self._robots:
                return self._robots[host]
            result = self._request(gate, f"{scheme_and_netloc}/robots.txt")
            parser: urllib.robotparser.RobotFileParser | None = None
            if result.status is not None and 200 <= result.status < 300 and result.body is not None:
                parser = urllib.robotparser.RobotFileParser()
                parser.parse(result.body.decode("utf-8", errors="replace").splitlines())
            self._robots[host] = parser
            return parser

    def fetch(self, url: str) -> _FetchResult:
        host = _host_of(url)
        if host is None:
            return _FetchResult(None, "", None, url, error="no host")
        gate = self._gate_for(host)
        if self.config.obey_robots:
            parts = urlsplit(url)
            robots = self._robots_for(host, gate, f"{parts.scheme}://{parts.netloc}")
            if robots is not None and not robots.can_fetch(self.config.user_agent, url):
                return _FetchResult(None, "", None, url, error="disallowed by robots.txt")
        return self._request(gate, url)


def _is_triples_document(url: str, content_type: str) -> bool:
    return content_type == TRIPLES_MEDIA_TYPE or urlsplit(url).path.endswith(
        TRIPLES_FILE_EXTENSION
    )


def crawl(config: CrawlConfig, store: Store) -> CrawlReport:
    """Run one harvest. Individual fetch failures are recorded, never fatal;
    the only fatal error is a bad configuration."""
    config.validate()
    allowlist = config.effective_allowlist()
    fetcher = _Fetcher(config)
    report = CrawlReport(started_at=int(time.time()))

    frontier: deque[tuple[str, int]] = deque()
    enqueued: set[str] = set()
    skipped_noted: set[str] = set()
    attempts = 0

    def note_skip(url: str, depth: int, detail: str) -> None:
        if url not in enqueued and url not in skipped_noted:
            skipped_noted.add(url)
            report.records.append(
                UrlRecord(url=url, depth=depth, outcome="skipped", detail=detail)
            )

    def enqueue(url: str, depth: int) -> None:
        url = _strip_fragment(url)
        if url in enqueued:
            return
        host = _host_of(url)
        if host is None or host not in allowlist:
            note_skip(url, depth, "host not in allowlist")
            return
        enqueued.add(url)
        frontier.append((url, depth))

    for seed in config.seeds:
        enqueue(seed.value, 0)

    def handle_fetched(url: str, depth: int, result: _FetchResult) -> None:
        nonlocal attempts
        record = UrlRecord(
            url=url, depth=depth, outcome="fetched", status=result.status,
            duration_ms=result.duration_ms,
        )
        if result.error or result.status is None or result.body is None:
            record.outcome = "failed"
            record.detail = result.error or "no response"
            report.records.append(record)
            return
        if not (200 <= result.status < 300):
            record.outcome = "failed"
            record.detail = f"HTTP {result.status}"
            report.records.append(record)
            return

        now = int(time.time())
        if _is_triples_document(url, result.content_type):
            outcome = parse_triples(result.body.decode("utf-8", errors="replace"), scope=url)
            added, _ = store.merge(outcome, source=url, at=now, mode=config.merge_mode)
            record.triples_added = added
            record.parse_errors = len(outcome.errors)
            report.records.append(record)
            return
        if result.content_type != "text/html":
            record.outcome = "skipped"
            record.detail = f"unsupported content type {result.content_type or 'unknown'!r}"
            report.records.append(record)
            return

        html = result.body.decode("utf-8", errors="replace")
        extract = extract_annotations(html, Iri(result.final_url or url))
        combined = ParseOutcome(blank_scope=url)
        for _, block in extract.inline_blocks:
            outcome = parse_triples(block, scope=url)
            combined.triples.extend(outcome.triples)
            combined.errors.extend(outcome.errors)
        if combined.triples or combined.errors:
            added, _ = store.merge(combined, source=url, at=now, mode=config.merge_mode)
            record.triples_added = added
        record.parse_errors = len(combined.errors)
        if extract.dropped_urls:
            record.detail = f"{extract.dropped_urls} unresolvable URLs dropped"
        report.records.append(record)

        for ref in extract.linked_refs:
            enqueue(ref.value, depth)
        if depth < config.max_depth:
            for link in extract.outbound_links:
                enqueue(link.value, depth + 1)
        else:
            for link in extract.outbound_links:
                if _strip_fragment(link.value) not in enqueued:
                    note_skip(_strip_fragment(link.value), depth + 1, "beyond depth limit")

    with ThreadPoolExecutor(max_workers=config.fetch_parallelism) as pool:
        in_flight: dict = {}
        while frontier or in_flight:
            while (
                frontier
                and len(in_flight) < config.fetch_parallelism
                and attempts < config.max_pages
            ):
                url, depth = frontier.popleft()
                attempts += 1
                in_flight[pool.submit(fetcher.fetch, url)] = (url, depth)
            if not in_flight:
                break
            done, _ = wait(list(in_flight), return_when=FIRST_COMPLETED)
            for future in done:
                url, depth = in_flight.pop(future)
                result = future.result()
                if result.error == "disallowed by robots.txt":
                    report.records.append(
                        UrlRecord(url=url, depth=depth, outcome="skipped", detail=result.error)
                    )
                else:
                    handle_fetched(url, depth, result)

    report.finished_at = int(time.time())
    return report


def export(store: Store, directory: str | Path) -> None:
    """Write the store (instance and schema triples together) and its
    provenance sidecar as canonical files."""
    store.save(directory)
