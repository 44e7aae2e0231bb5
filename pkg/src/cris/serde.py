"""Line-oriented triple exchange format and HTML annotation extraction.

The exchange grammar is a small line-per-triple subset: IRIs in angle
brackets, ``_:label`` blanks, plain or language-tagged string literals, a
``.`` terminator, and ``#`` comment lines. Parsing recovers per line, so one
bad line never discards the rest of a document.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from html.parser import HTMLParser
from urllib.parse import urldefrag, urljoin

from .model import (
    BlankNode,
    Iri,
    Literal,
    MalformedIri,
    Term,
    Triple,
    format_term,
    make_iri,
    triple_key,
)

TRIPLES_MEDIA_TYPE = "text/x-cris-triples"
META_LINK_REL = "cris-meta"
TRIPLES_FILE_EXTENSION = ".nt"

_ESCAPES = {'"': '"', "\\": "\\", "n": "\n", "t": "\t", "r": "\r"}
_BLANK_CHARS = frozenset("ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789")


@dataclass
class ParseOutcome:
    """Result of parsing one triple document: the good lines and the bad."""

    triples: list[Triple] = field(default_factory=list)
    errors: list[tuple[int, str]] = field(default_factory=list)
    blank_scope: str = ""


class _LineParser:
    """Single-line scanner for the triple grammar."""

    def __init__(self, line: str):
        self.line = line
        self.pos = 0

    def error(self, message: str) -> ValueError:
        return ValueError(f"{message} (column {self.pos + 1})")

    def at_end(self) -> bool:
        return self.pos >= len(self.line)

    def peek(self) -> str:
        return self.line[self.pos] if self.pos < len(self.line) else ""

    def skip_ws(self) -> int:
        start = self.pos
        while not self.at_end() and self.line[self.pos] in " \t":
            self.pos += 1
        return self.pos - start

    def parse_iriref(self) -> Iri:
        if self.peek() != "<":
            raise self.error("expected '<'")
        end = self.line.find(">", self.pos + 1)
        if end < 0:
            raise self.error("unterminated IRI reference")
        raw = self.line[self.pos + 1 : end]
        try:
            iri = make_iri(raw)
        except MalformedIri as exc:
            raise self.error(str(exc)) from None
        self.pos = end + 1
        return iri

    def parse_blank(self) -> BlankNode:
        if not self.line.startswith("_:", self.pos):
            raise self.error("expected '_:'")
        self.pos += 2
        start = self.pos
        while not self.at_end() and self.line[self.pos] in _BLANK_CHARS:
            self.pos += 1
        if self.pos == start:
            raise self.error("empty blank node label")
        return BlankNode(self.line[start : self.pos])

    def parse_literal(self) -> Literal:
        if self.peek() != '"':
            raise self.error("expected '\"'")
        self.pos += 1
        chars: list[str] = []
        while True:
            if self.at_end():
                raise self.error("unterminated literal")
            ch = self.line[self.pos]
            if ch == '"':
                self.pos += 1
                break
            if ch == "\\":
                if self.pos + 1 >= len(self.line):
                    raise self.error("dangling escape")
                esc = self.line[self.pos + 1]
                if esc not in _ESCAPES:
                    raise self.error(f"unknown escape '\\{esc}'")
                chars.append(_ESCAPES[esc])
                self.pos += 2
                continue
            chars.append(ch)
            self.pos += 1
        lang = None
        if self.peek() == "@":
            self.pos += 1
            start = self.pos
            while not self.at_end() and (self.line[self.pos].isalnum() or self.line[self.pos] == "-"):
                self.pos += 1
            lang = self.line[start : self.pos]
            if not lang:
                raise self.error("empty language tag")
        try:
            return Literal("".join(chars), lang)
        except ValueError as exc:
            raise self.error(str(exc)) from None

    def parse_subject(self) -> Iri | BlankNode:
        if self.peek() == "<":
            return self.parse_iriref()
        if self.line.startswith("_:", self.pos):
            return self.parse_blank()
        raise self.error("expected IRI or blank node as subject")

    def parse_object(self) -> Term:
        if self.peek() == "<":
            return self.parse_iriref()
        if self.line.startswith("_:", self.pos):
            return self.parse_blank()
        if self.peek() == '"':
            return self.parse_literal()
        raise self.error("expected IRI, blank node, or literal as object")

    def parse_triple(self) -> Triple:
        subject = self.parse_subject()
        if not self.skip_ws():
            raise self.error("expected whitespace after subject")
        predicate = self.parse_iriref()
        if not self.skip_ws():
            raise self.error("expected whitespace after predicate")
        obj = self.parse_object()
        self.skip_ws()
        if self.peek() != ".":
            raise self.error("expected '.' terminator")
        self.pos += 1
        self.skip_ws()
        if not self.at_end():
            raise self.error("trailing content after '.'")
        return Triple(subject, predicate, obj)


def parse_triples(text: str, scope: str) -> ParseOutcome:
    """Parse a triple document; malformed lines become per-line errors.

    ``scope`` identifies the document for blank node purposes; the store
    relabels blank nodes under it at merge time.
    """
    outcome = ParseOutcome(blank_scope=scope)
    for number, raw_line in enumerate(text.split("\n"), start=1):
        line = raw_line.rstrip("\r")
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        parser = _LineParser(line)
        parser.skip_ws()
        try:
            outcome.triples.append(parser.parse_triple())
        except ValueError as exc:
            outcome.errors.append((number, str(exc)))
    return outcome


def format_triple(t: Triple) -> str:
    """One canonical line for a triple, without the trailing newline."""
    return f"{format_term(t.subject)} {format_term(t.predicate)} {format_term(t.object)} ."


def serialize(triples) -> str:
    """Canonical serialization: deduplicated, sorted, one triple per line."""
    lines = [format_triple(t) for t in sorted(set(triples), key=triple_key)]
    return "".join(line + "\n" for line in lines)


@dataclass
class AnnotationExtract:
    """Annotation carriers found on one HTML page."""

    inline_blocks: list[tuple[int, str]] = field(default_factory=list)
    linked_refs: list[Iri] = field(default_factory=list)
    outbound_links: list[Iri] = field(default_factory=list)
    dropped_urls: int = 0


class _AnnotationScanner(HTMLParser):
    """Tolerant tag scan for annotation blocks, meta links, and anchors."""

    def __init__(self) -> None:
        super().__init__(convert_charrefs=True)
        self.blocks: list[str] = []
        self.link_hrefs: list[str] = []
        self.anchor_hrefs: list[str] = []
        self._block_chunks: list[str] | None = None

    def handle_starttag(self, tag: str, attrs) -> None:
        attr_map = {name.lower(): (value or "") for name, value in attrs}
        if tag == "script":
            if attr_map.get("type", "").strip().lower() == TRIPLES_MEDIA_TYPE:
                self._block_chunks = []
        elif tag == "link":
            rel = attr_map.get("rel", "").strip().lower()
            if rel == META_LINK_REL and attr_map.get("href"):
                self.link_hrefs.append(attr_map["href"])
        elif tag == "a":
            if attr_map.get("href"):
                self.anchor_hrefs.append(attr_map["href"])

    def handle_endtag(self, tag: str) -> None:
        if tag == "script" and self._block_chunks is not None:
            self.blocks.append("".join(self._block_chunks))
            self._block_chunks = None

    def handle_data(self, data: str) -> None:
        if self._block_chunks is not None:
            self._block_chunks.append(data)


def _resolve(href: str, base_url: Iri, strip_fragment: bool) -> Iri | None:
    try:
        resolved = urljoin(base_url.value, href.strip())
    except ValueError:
        return None
    if strip_fragment:
        resolved = urldefrag(resolved)[0]
    try:
        return make_iri(resolved)
    except MalformedIri:
        return None


def extract_annotations(html: str, base_url: Iri) -> AnnotationExtract:
    """Pull annotation blocks, meta links, and outbound links from a page.

    Relative URLs resolve against ``base_url``; hrefs that do not resolve to
    a usable absolute URL are dropped and counted.
    """
    scanner = _AnnotationScanner()
    scanner.feed(html)
    scanner.close()

    extract = AnnotationExtract()
    extract.inline_blocks = list(enumerate(scanner.blocks))
    seen_refs: set[str] = set()
    for href in scanner.link_hrefs:
        iri = _resolve(href, base_url, strip_fragment=False)
        if iri is None:
            extract.dropped_urls += 1
        elif iri.value not in seen_refs:
            seen_refs.add(iri.value)
            extract.linked_refs.append(iri)
    seen_links: set[str] = set()
    for href in scanner.anchor_hrefs:
        iri = _resolve(href, base_url, strip_fragment=True)
        if iri is None:
            extract.dropped_urls += 1
        elif iri.value not in seen_links:
            seen_links.add(iri.value)
            extract.outbound_links.append(iri)
    return extract
