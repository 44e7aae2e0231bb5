"""Core graph vocabulary: terms, triples, ordering, and IRI handling.

Every other module builds on the value types defined here. All values are
immutable after construction and safe to share between threads.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Mapping, Union


class CrisError(Exception):
    """Base class for errors raised by this package."""


class MalformedIri(CrisError):
    """The given string cannot be used as an absolute IRI."""


class UnknownPrefix(CrisError):
    """A prefixed name uses a prefix with no namespace mapping."""


_SCHEME_RE = re.compile(r"^[A-Za-z][A-Za-z0-9+.-]*:")
_LANG_RE = re.compile(r"^[a-z]{1,8}(-[a-z0-9]{1,8})*$")
_BLANK_LABEL_RE = re.compile(r"^[A-Za-z0-9]+$")


def _check_iri(value: str) -> None:
    if not value:
        raise MalformedIri("IRI is empty")
    for ch in value:
        if ch.isspace():
            raise MalformedIri(f"IRI contains whitespace: {value!r}")
        if ch in '<>"':
            raise MalformedIri(f"IRI contains forbidden character {ch!r}: {value!r}")
    if not _SCHEME_RE.match(value):
        raise MalformedIri(f"IRI is not absolute (missing scheme): {value!r}")


@dataclass(frozen=True, slots=True)
class Iri:
    """An absolute IRI, kept verbatim. Equality is exact string equality."""

    value: str

    def __post_init__(self) -> None:
        _check_iri(self.value)

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True, slots=True)
class Literal:
    """A plain string value, optionally tagged with a lowercase language tag."""

    lexical: str
    lang: str | None = None

    def __post_init__(self) -> None:
        if self.lang is not None and not _LANG_RE.match(self.lang):
            raise ValueError(f"invalid language tag: {self.lang!r}")

    def __str__(self) -> str:
        return self.lexical


@dataclass(frozen=True, slots=True)
class BlankNode:
    """A document-scoped node without a persistent identifier.

    Identity is only meaningful within the dataset that introduced the node;
    merging datasets must rename colliding labels (the store does this).
    """

    label: str

    def __post_init__(self) -> None:
        if not _BLANK_LABEL_RE.match(self.label):
            raise ValueError(f"invalid blank node label: {self.label!r}")

    def __str__(self) -> str:
        return f"_:{self.label}"


Term = Union[Iri, BlankNode, Literal]

_KIND_RANK = {Iri: 0, BlankNode: 1, Literal: 2}


def escape_literal(text: str) -> str:
    """Escape a literal's lexical form for the triple line grammar."""
    return (
        text.replace("\\", "\\\\")
        .replace('"', '\\"')
        .replace("\n", "\\n")
        .replace("\r", "\\r")
        .replace("\t", "\\t")
    )


def format_term(term: Term) -> str:
    """Render a term in its canonical serialized form."""
    if isinstance(term, Iri):
        return f"<{term.value}>"
    if isinstance(term, BlankNode):
        return f"_:{term.label}"
    if isinstance(term, Literal):
        body = f'"{escape_literal(term.lexical)}"'
        return f"{body}@{term.lang}" if term.lang else body
    raise TypeError(f"not a term: {term!r}")


def term_key(term: Term) -> tuple[int, str]:
    """Sort key implementing the total term order: Iri < BlankNode < Literal,
    lexicographic by serialized form within a kind."""
    rank = _KIND_RANK[type(term)]
    if isinstance(term, Iri):
        return (rank, term.value)
    if isinstance(term, BlankNode):
        return (rank, term.label)
    return (rank, format_term(term))


def compare_terms(a: Term, b: Term) -> int:
    """Three-way comparison under the total term order."""
    ka, kb = term_key(a), term_key(b)
    if ka < kb:
        return -1
    if ka > kb:
        return 1
    return 0


@dataclass(frozen=True, slots=True)
class Triple:
    """An ordered (subject, predicate, object) assertion."""

    subject: Iri | BlankNode
    predicate: Iri
    object: Term

    def __post_init__(self) -> None:
        if not isinstance(self.subject, (Iri, BlankNode)):
            raise TypeError(f"triple subject must be an IRI or blank node: {self.subject!r}")
        if not isinstance(self.predicate, Iri):
            raise TypeError(f"triple predicate must be an IRI: {self.predicate!r}")
        if not isinstance(self.object, (Iri, BlankNode, Literal)):
            raise TypeError(f"triple object must be a term: {self.object!r}")

    def __str__(self) -> str:
        return (
            f"{format_term(self.subject)} {format_term(self.predicate)} "
            f"{format_term(self.object)} ."
        )


def triple_key(t: Triple) -> tuple[tuple[int, str], tuple[int, str], tuple[int, str]]:
    """Canonical (subject, predicate, object) sort key for a triple."""
    return (term_key(t.subject), term_key(t.predicate), term_key(t.object))


@dataclass(frozen=True)
class PrefixMap:
    """Namespace table used to expand shorthand IRI references.

    The default namespace backs the bare ``#Name`` shorthand and is always
    set; the bundled configuration points it at the research ontology
    namespace.
    """

    default: Iri
    entries: Mapping[str, Iri] = field(default_factory=dict)

    def with_entry(self, prefix: str, namespace: Iri) -> "PrefixMap":
        merged = dict(self.entries)
        merged[prefix] = namespace
        return PrefixMap(default=self.default, entries=merged)


def make_iri(text: str) -> Iri:
    """Validate and wrap an absolute IRI string."""
    return Iri(text)


def expand(token: str, prefixes: PrefixMap) -> Iri:
    """Resolve an IRI reference token: ``<IRI>``, ``prefix:name``, or ``#name``.

    ``#name`` resolves against the default namespace such that the result
    always ends in ``#name``.
    """
    if token.startswith("<"):
        if not token.endswith(">") or len(token) < 3:
            raise MalformedIri(f"unclosed IRI reference: {token!r}")
        return make_iri(token[1:-1])
    if token.startswith("#"):
        name = token[1:]
        if not name:
            raise MalformedIri("empty name after '#'")
        base = prefixes.default.value
        expanded = base + name if base.endswith("#") else f"{base}#{name}"
        return make_iri(expanded)
    if ":" in token:
        prefix, name = token.split(":", 1)
        namespace = prefixes.entries.get(prefix)
        if namespace is None:
            raise UnknownPrefix(f"no namespace bound to prefix {prefix!r}")
        return make_iri(namespace.value + name)
    raise MalformedIri(f"not an IRI reference: {token!r}")
