"""Independent reference implementations used to check the real ones.

Everything here is deliberately naive: per-node BFS for reachability,
full-scan filters instead of indexes, and exhaustive nested-loop
enumeration for query evaluation. None of it shares code paths with the
package internals it verifies.
"""

from __future__ import annotations

from collections import deque
from types import SimpleNamespace

from cris.model import BlankNode, Iri, Literal, Triple

RDF_TYPE_IRI = "http://www.w3.org/1999/02/22-rdf-syntax-ns#type"


def bfs_reachable(start, edges) -> set:
    """Nodes reachable from ``start`` by following (child, parent) edges,
    start included."""
    adjacency: dict = {}
    for child, parent in edges:
        adjacency.setdefault(child, []).append(parent)
    seen = {start}
    queue = deque([start])
    while queue:
        node = queue.popleft()
        for nxt in adjacency.get(node, ()):
            if nxt not in seen:
                seen.add(nxt)
                queue.append(nxt)
    return seen


def naive_match(triples, s=None, p=None, o=None) -> list[Triple]:
    """Full-scan pattern filter, sorted by serialized text."""
    hits = [
        t
        for t in triples
        if (s is None or t.subject == s)
        and (p is None or t.predicate == p)
        and (o is None or t.object == o)
    ]
    return sorted(hits, key=naive_triple_key)


def naive_term_key(term):
    if isinstance(term, Iri):
        return (0, term.value)
    if isinstance(term, BlankNode):
        return (1, term.label)
    escaped = (
        term.lexical.replace("\\", "\\\\")
        .replace('"', '\\"')
        .replace("\n", "\\n")
        .replace("\r", "\\r")
        .replace("\t", "\\t")
    )
    rendered = f'"{escaped}"' + (f"@{term.lang}" if term.lang else "")
    return (2, rendered)


def naive_triple_key(t: Triple):
    return (naive_term_key(t.subject), naive_term_key(t.predicate), naive_term_key(t.object))


class QueryOracle:
    """Exhaustive nested-loop evaluation of the query AST over a triple list.

    Subsumption is recomputed per lookup with BFS over the raw edge lists;
    no closure table, no indexes, no joins smarter than a cartesian product.
    """

    def __init__(self, triples, class_edges, property_edges):
        self.triples = list(triples)
        self.class_edges = [(c.value, p.value) for c, p in class_edges]
        self.property_edges = [(c.value, p.value) for c, p in property_edges]

    def _class_reaches(self, child: str, parent: str) -> bool:
        return parent in bfs_reachable(child, self.class_edges)

    def _property_reaches(self, child: str, parent: str) -> bool:
        return parent in bfs_reachable(child, self.property_edges)

    def _head_rows(self, pattern) -> list[dict]:
        rows = []
        seen = set()
        for t in self.triples:
            if t.predicate.value != RDF_TYPE_IRI or not isinstance(t.object, Iri):
                continue
            if pattern.head.strict:
                ok = t.object == pattern.head.iri
            else:
                ok = self._class_reaches(t.object.value, pattern.head.iri.value)
            if ok and t.subject not in seen:
                seen.add(t.subject)
                rows.append({pattern.head_var: t.subject})
        return rows

    def _pattern_rows(self, pattern) -> list[dict]:
        rows = self._head_rows(pattern)
        prev = pattern.head_var
        for step in pattern.steps:
            extended = []
            emitted = set()
            for row in rows:
                for t in self.triples:
                    if t.subject != row[prev]:
                        continue
                    if step.prop.strict:
                        ok = t.predicate == step.prop.iri
                    else:
                        ok = self._property_reaches(t.predicate.value, step.prop.iri.value)
                    if not ok:
                        continue
                    key = tuple(row[v] for v in row) + (step.var, t.object)
                    if key in emitted:
                        continue
                    emitted.add(key)
                    new_row = dict(row)
                    new_row[step.var] = t.object
                    extended.append(new_row)
            rows = extended
            prev = step.var
        return rows

    @staticmethod
    def like_matches(pattern: str, text: str) -> bool:
        """Glob match where '*' spans any substring, via greedy scan."""
        pieces = pattern.split("*")
        if len(pieces) == 1:
            return text == pattern
        if not text.startswith(pieces[0]):
            return False
        position = len(pieces[0])
        for piece in pieces[1:-1]:
            found = text.find(piece, position)
            if found < 0:
                return False
            position = found + len(piece)
        last = pieces[-1]
        return text.endswith(last) and len(text) - len(last) >= position

    def _condition_holds(self, row, cond) -> bool:
        kind = type(cond).__name__
        if kind == "VarEqVar":
            return row[cond.left] == row[cond.right]
        if kind == "VarEqLiteral":
            value = row[cond.var]
            return isinstance(value, Literal) and value.lexical == cond.text
        value = row[cond.var]
        return isinstance(value, Literal) and self.like_matches(cond.pattern, value.lexical)

    def evaluate(self, ast):
        """Returns (columns, rows) with rows sorted by naive term keys."""
        kind = type(ast).__name__
        if kind == "ClassQuery":
            columns = ("X0",)
            pseudo = SimpleNamespace(head=ast.class_ref, head_var="X0", steps=())
            rows = self._head_rows(pseudo)
        else:
            columns = tuple(ast.projection)
            combined = [dict()]
            for pattern in ast.patterns:
                pattern_rows = self._pattern_rows(pattern)
                merged = []
                for left in combined:
                    for right in pattern_rows:
                        if all(left[v] == right[v] for v in left.keys() & right.keys()):
                            union = dict(left)
                            union.update(right)
                            merged.append(union)
                combined = merged
            rows = combined
            for cond in ast.conditions:
                rows = [row for row in rows if self._condition_holds(row, cond)]
        projected = {tuple(row[v] for v in columns) for row in rows}
        ordered = sorted(projected, key=lambda r: tuple(naive_term_key(t) for t in r))
        return columns, ordered
