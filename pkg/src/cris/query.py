"""Parser and evaluator for the retrieval query language.

The surface language is a small class/path query syntax: a bare class
reference returns every instance of that class (subtypes included), a
leading ``^`` restricts to resources asserted with exactly that class, and
``select`` queries join property paths over patterns with conjunctive
filters. Evaluation is schema-aware: class references include subclasses
and property references include subproperties unless marked strict.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence, Union

from .model import (
    BlankNode,
    CrisError,
    Iri,
    Literal,
    PrefixMap,
    Term,
    expand,
    term_key,
)
from .schema import RDF_TYPE, ClosureTable, Schema
from .store import Snapshot


class QuerySyntaxError(CrisError):
    """Query text does not match the grammar."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} at position {position}")
        self.position = position
        self.reason = message


class UnboundVariable(CrisError):
    """A projection or condition variable never occurs in any pattern."""

    def __init__(self, variable: str):
        super().__init__(f"variable {variable!r} is not bound by any pattern")
        self.variable = variable


# -- AST --------------------------------------------------------------------


@dataclass(frozen=True)
class ClassRef:
    iri: Iri
    strict: bool = False


@dataclass(frozen=True)
class PropertyRef:
    iri: Iri
    strict: bool = False


@dataclass(frozen=True)
class Step:
    prop: PropertyRef
    var: str


@dataclass(frozen=True)
class PathPattern:
    head: ClassRef
    head_var: str
    steps: tuple[Step, ...] = ()

    def variables(self) -> list[str]:
        return [self.head_var] + [s.var for s in self.steps]


@dataclass(frozen=True)
class VarEqVar:
    left: str
    right: str


@dataclass(frozen=True)
class VarEqLiteral:
    var: str
    text: str


@dataclass(frozen=True)
class VarLikeLiteral:
    var: str
    pattern: str


Condition = Union[VarEqVar, VarEqLiteral, VarLikeLiteral]


@dataclass(frozen=True)
class ClassQuery:
    class_ref: ClassRef


@dataclass(frozen=True)
class SelectQuery:
    projection: tuple[str, ...]
    patterns: tuple[PathPattern, ...]
    conditions: tuple[Condition, ...] = ()


QueryAst = Union[ClassQuery, SelectQuery]


@dataclass(frozen=True)
class BindingTable:
    """Deduplicated, canonically ordered rows of projected variables."""

    columns: tuple[str, ...]
    rows: tuple[tuple[Term, ...], ...]


# -- tokenizer ---------------------------------------------------------------

_KEYWORDS = frozenset({"select", "from", "where", "and", "like"})
_NAME_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
_STRING_ESCAPES = {'"': '"', "\\": "\\", "n": "\n", "t": "\t", "r": "\r"}


@dataclass(frozen=True)
class _Token:
    kind: str  # one of: name, keyword, iriref, string, punct, end
    text: str
    pos: int


def _tokenize(text: str) -> list[_Token]:
    tokens: list[_Token] = []
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        if ch in "^{}.,=#:":
            tokens.append(_Token("punct", ch, i))
            i += 1
            continue
        if ch == "<":
            end = text.find(">", i + 1)
            if end < 0:
                raise QuerySyntaxError("unterminated IRI reference", i)
            tokens.append(_Token("iriref", text[i : end + 1], i))
            i = end + 1
            continue
        if ch == '"':
            start = i
            i += 1
            chars: list[str] = []
            while True:
                if i >= n:
                    raise QuerySyntaxError("unterminated string", start)
                c = text[i]
                if c == '"':
                    i += 1
                    break
                if c == "\\":
                    if i + 1 >= n or text[i + 1] not in _STRING_ESCAPES:
                        raise QuerySyntaxError("invalid string escape", i)
                    chars.append(_STRING_ESCAPES[text[i + 1]])
                    i += 2
                    continue
                chars.append(c)
                i += 1
            tokens.append(_Token("string", "".join(chars), start))
            continue
        match = _NAME_RE.match(text, i)
        if match:
            word = match.group(0)
            kind = "keyword" if word in _KEYWORDS else "name"
            tokens.append(_Token(kind, word, i))
            i = match.end()
            continue
        raise QuerySyntaxError(f"unexpected character {ch!r}", i)
    tokens.append(_Token("end", "", n))
    return tokens


# -- parser ------------------------------------------------------------------


class _Parser:
    def __init__(self, tokens: list[_Token], prefixes: PrefixMap):
        self.tokens = tokens
        self.prefixes = prefixes
        self.index = 0

    @property
    def current(self) -> _Token:
        return self.tokens[self.index]

    def advance(self) -> _Token:
        token = self.current
        self.index += 1
        return token

    def fail(self, expected: str) -> QuerySyntaxError:
        got = self.current.text or "end of input"
        return QuerySyntaxError(f"expected {expected}, got {got!r}", self.current.pos)

    def eat_punct(self, ch: str, expected: str | None = None) -> None:
        if self.current.kind == "punct" and self.current.text == ch:
            self.advance()
            return
        raise self.fail(expected or f"'{ch}'")

    def at_punct(self, ch: str) -> bool:
        return self.current.kind == "punct" and self.current.text == ch

    def parse_var(self) -> str:
        if self.current.kind != "name":
            raise self.fail("variable name")
        return self.advance().text

    def parse_ref_iri(self) -> Iri:
        token = self.current
        if token.kind == "iriref":
            self.advance()
            return expand(token.text, self.prefixes)
        if self.at_punct("#"):
            self.advance()
            if self.current.kind not in ("name", "keyword"):
                raise self.fail("name after '#'")
            name = self.advance().text
            return expand(f"#{name}", self.prefixes)
        if token.kind == "name" and self.tokens[self.index + 1].kind == "punct" \
                and self.tokens[self.index + 1].text == ":":
            prefix = self.advance().text
            self.advance()  # ':'
            if self.current.kind not in ("name", "keyword"):
                raise self.fail("name after ':'")
            name = self.advance().text
            return expand(f"{prefix}:{name}", self.prefixes)
        raise self.fail("IRI reference ('<IRI>', '#Name', or 'prefix:Name')")

    def parse_class_ref(self) -> ClassRef:
        strict = False
        if self.at_punct("^"):
            self.advance()
            strict = True
        return ClassRef(iri=self.parse_ref_iri(), strict=strict)

    def parse_property_ref(self) -> PropertyRef:
        strict = False
        if self.at_punct("^"):
            self.advance()
            strict = True
        return PropertyRef(iri=self.parse_ref_iri(), strict=strict)

    def parse_pattern(self) -> PathPattern:
        head = self.parse_class_ref()
        self.eat_punct("{")
        head_var_token = self.current
        head_var = self.parse_var()
        self.eat_punct("}")
        steps: list[Step] = []
        seen = {head_var}
        while self.at_punct("."):
            self.advance()
            prop = self.parse_property_ref()
            self.eat_punct("{")
            var_token = self.current
            var = self.parse_var()
            self.eat_punct("}")
            if var in seen:
                raise QuerySyntaxError(
                    f"variable {var!r} repeated within one pattern", var_token.pos
                )
            seen.add(var)
            steps.append(Step(prop=prop, var=var))
        if head_var in {s.var for s in steps}:
            raise QuerySyntaxError(
                f"variable {head_var!r} repeated within one pattern", head_var_token.pos
            )
        return PathPattern(head=head, head_var=head_var, steps=tuple(steps))

    def parse_condition(self) -> Condition:
        var = self.parse_var()
        if self.at_punct("="):
            self.advance()
            if self.current.kind == "string":
                return VarEqLiteral(var=var, text=self.advance().text)
            if self.current.kind == "name":
                return VarEqVar(left=var, right=self.advance().text)
            raise self.fail("variable or string after '='")
        if self.current.kind == "keyword" and self.current.text == "like":
            self.advance()
            if self.current.kind != "string":
                raise self.fail("string after 'like'")
            return VarLikeLiteral(var=var, pattern=self.advance().text)
        raise self.fail("'=' or 'like'")

    def parse_select(self) -> SelectQuery:
        self.advance()  # 'select'
        projection = [self.parse_var()]
        while self.at_punct(","):
            self.advance()
            projection.append(self.parse_var())
        if not (self.current.kind == "keyword" and self.current.text == "from"):
            raise self.fail("'from'")
        self.advance()
        patterns = [self.parse_pattern()]
        while self.at_punct(","):
            self.advance()
            patterns.append(self.parse_pattern())
        conditions: list[Condition] = []
        if self.current.kind == "keyword" and self.current.text == "where":
            self.advance()
            conditions.append(self.parse_condition())
            while self.current.kind == "keyword" and self.current.text == "and":
                self.advance()
                conditions.append(self.parse_condition())
        if self.current.kind != "end":
            raise self.fail("end of query")

        bound = {v for pattern in patterns for v in pattern.variables()}
        for var in projection:
            if var not in bound:
                raise UnboundVariable(var)
        for cond in conditions:
            if isinstance(cond, VarEqVar):
                referenced = [cond.left, cond.right]
            else:
                referenced = [cond.var]
            for var in referenced:
                if var not in bound:
                    raise UnboundVariable(var)
        return SelectQuery(
            projection=tuple(projection),
            patterns=tuple(patterns),
            conditions=tuple(conditions),
        )

    def parse_query(self) -> QueryAst:
        if self.current.kind == "keyword" and self.current.text == "select":
            return self.parse_select()
        ref = self.parse_class_ref()
        if self.current.kind != "end":
            raise self.fail("end of query")
        return ClassQuery(class_ref=ref)


def parse_query(text: str, prefixes: PrefixMap) -> QueryAst:
    """Parse query text into an AST, expanding IRI shorthand."""
    return _Parser(_tokenize(text), prefixes).parse_query()


# -- evaluator ---------------------------------------------------------------


def _instances(snap: Snapshot, ct: ClosureTable, ref: ClassRef) -> set[Term]:
    """Subjects with an asserted type matching the class reference."""
    if ref.strict:
        return {t.subject for t in snap.match(None, RDF_TYPE, ref.iri)}
    found: set[Term] = set()
    for cls in ct.subclasses_of(ref.iri):
        found.update(t.subject for t in snap.match(None, RDF_TYPE, cls))
    return found


def _step_predicates(ct: ClosureTable, ref: PropertyRef) -> frozenset[Iri]:
    if ref.strict:
        return frozenset({ref.iri})
    return ct.subproperties_of(ref.iri)


def _pattern_rows(snap: Snapshot, ct: ClosureTable, pattern: PathPattern) -> list[dict[str, Term]]:
    rows: list[dict[str, Term]] = [
        {pattern.head_var: subject} for subject in _instances(snap, ct, pattern.head)
    ]
    prev_var = pattern.head_var
    for step in pattern.steps:
        predicates = _step_predicates(ct, step.prop)
        extended: list[dict[str, Term]] = []
        for row in rows:
            subject = row[prev_var]
            if not isinstance(subject, (Iri, BlankNode)):
                continue
            objects: set[Term] = set()
            for predicate in predicates:
                objects.update(t.object for t in snap.match(subject, predicate, None))
            for obj in objects:
                new_row = dict(row)
                new_row[step.var] = obj
                extended.append(new_row)
        rows = extended
        prev_var = step.var
    return _dedupe_rows(rows, tuple(pattern.variables()))


def _dedupe_rows(rows: list[dict[str, Term]], variables: tuple[str, ...]) -> list[dict[str, Term]]:
    seen: set[tuple] = set()
    out: list[dict[str, Term]] = []
    for row in rows:
        key = tuple(row[v] for v in variables)
        if key not in seen:
            seen.add(key)
            out.append(row)
    return out


def _join(left: list[dict[str, Term]], right: list[dict[str, Term]]) -> list[dict[str, Term]]:
    if not left or not right:
        return []
    shared = sorted(set(left[0]) & set(right[0]))
    if not shared:
        return [dict(l, **r) for l in left for r in right]
    index: dict[tuple, list[dict[str, Term]]] = {}
    for row in right:
        index.setdefault(tuple(row[v] for v in shared), []).append(row)
    joined: list[dict[str, Term]] = []
    for row in left:
        for other in index.get(tuple(row[v] for v in shared), ()):
            joined.append(dict(row, **other))
    return joined


def _like_regex(pattern: str) -> re.Pattern:
    parts = pattern.split("*")
    return re.compile(".*".join(re.escape(part) for part in parts), re.DOTALL)


def _satisfies(row: Mapping[str, Term], cond: Condition) -> bool:
    if isinstance(cond, VarEqVar):
        return row[cond.left] == row[cond.right]
    if isinstance(cond, VarEqLiteral):
        value = row[cond.var]
        return isinstance(value, Literal) and value.lexical == cond.text
    value = row[cond.var]
    return isinstance(value, Literal) and bool(_like_regex(cond.pattern).fullmatch(value.lexical))


def _project(
    rows: Iterable[Mapping[str, Term]], projection: Sequence[str]
) -> tuple[tuple[Term, ...], ...]:
    unique = {tuple(row[v] for v in projection) for row in rows}
    return tuple(sorted(unique, key=lambda r: tuple(term_key(t) for t in r)))


def evaluate(ast: QueryAst, snap: Snapshot, schema: Schema, ct: ClosureTable) -> BindingTable:
    """Evaluate a query over one snapshot. Total: unknown classes or
    properties yield empty results rather than errors."""
    if isinstance(ast, ClassQuery):
        rows = [{"X0": term} for term in _instances(snap, ct, ast.class_ref)]
        return BindingTable(columns=("X0",), rows=_project(rows, ("X0",)))

    joined: list[dict[str, Term]] | None = None
    for pattern in ast.patterns:
        rows = _pattern_rows(snap, ct, pattern)
        joined = rows if joined is None else _join(joined, rows)
        if not joined:
            break
    joined = joined or []
    for cond in ast.conditions:
        joined = [row for row in joined if _satisfies(row, cond)]
    return BindingTable(columns=ast.projection, rows=_project(joined, ast.projection))
