"""Research ontology representation, subsumption closure, and validation.

A schema is extracted from ordinary triples (class/property declarations,
subclass and subproperty edges, domain/range assertions), so harvested
documents can extend the bundled ontology just by asserting more triples.
The closure table turns the hierarchies into reflexive-transitive
reachability, which is what gives queries their subtype-inclusive behavior.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from importlib import resources
from typing import Iterable, Mapping

from .model import BlankNode, CrisError, Iri, Literal, PrefixMap, Triple, triple_key
from . import serde

RDF_TYPE = Iri("http://www.w3.org/1999/02/22-rdf-syntax-ns#type")
RDF_PROPERTY = Iri("http://www.w3.org/1999/02/22-rdf-syntax-ns#Property")
RDFS_CLASS = Iri("http://www.w3.org/2000/01/rdf-schema#Class")
RDFS_SUBCLASSOF = Iri("http://www.w3.org/2000/01/rdf-schema#subClassOf")
RDFS_SUBPROPERTYOF = Iri("http://www.w3.org/2000/01/rdf-schema#subPropertyOf")
RDFS_DOMAIN = Iri("http://www.w3.org/2000/01/rdf-schema#domain")
RDFS_RANGE = Iri("http://www.w3.org/2000/01/rdf-schema#range")
RDFS_LABEL = Iri("http://www.w3.org/2000/01/rdf-schema#label")
RDFS_LITERAL = Iri("http://www.w3.org/2000/01/rdf-schema#Literal")

CERIF_NS = "http://derpi.tuwien.ac.at/~andrei/cerif.rdfs#"

# Predicates whose object must be a resource, never a literal.
_RESOURCE_OBJECT_PREDICATES = frozenset(
    {RDF_TYPE, RDFS_SUBCLASSOF, RDFS_SUBPROPERTYOF, RDFS_DOMAIN, RDFS_RANGE}
)


class InvalidSchemaTriple(CrisError):
    """A reserved schema predicate was used with a literal object."""


def cerif(name: str) -> Iri:
    """An IRI in the bundled research ontology namespace."""
    return Iri(CERIF_NS + name)


def default_prefixes() -> PrefixMap:
    """The bundled prefix configuration: bare ``#Name`` means the research
    ontology namespace."""
    return PrefixMap(
        default=Iri(CERIF_NS),
        entries={
            "cerif": Iri(CERIF_NS),
            "rdf": Iri("http://www.w3.org/1999/02/22-rdf-syntax-ns#"),
            "rdfs": Iri("http://www.w3.org/2000/01/rdf-schema#"),
        },
    )


@dataclass(frozen=True)
class Schema:
    """Classes, properties, their hierarchies, and domain/range constraints."""

    classes: frozenset[Iri] = frozenset()
    subclass_edges: frozenset[tuple[Iri, Iri]] = frozenset()
    properties: frozenset[Iri] = frozenset()
    subproperty_edges: frozenset[tuple[Iri, Iri]] = frozenset()
    domain: Mapping[Iri, Iri] = field(default_factory=dict)
    range: Mapping[Iri, Iri] = field(default_factory=dict)
    labels: Mapping[Iri, str] = field(default_factory=dict)


def load_schema(dataset: Iterable[Triple]) -> Schema:
    """Extract the schema asserted by a dataset.

    Endpoints referenced only by edges or domain/range assertions are added
    implicitly. Raises InvalidSchemaTriple when a reserved predicate carries
    a literal object; blank-node schema subjects/objects are ignored (the
    schema vocabulary is IRI-based).
    """
    classes: set[Iri] = set()
    properties: set[Iri] = set()
    subclass_edges: set[tuple[Iri, Iri]] = set()
    subproperty_edges: set[tuple[Iri, Iri]] = set()
    domain: dict[Iri, Iri] = {}
    range_: dict[Iri, Iri] = {}
    labels: dict[Iri, str] = {}

    for t in dataset:
        if t.predicate in _RESOURCE_OBJECT_PREDICATES and isinstance(t.object, Literal):
            raise InvalidSchemaTriple(
                f"predicate {t.predicate} cannot take a literal object: {serde.format_triple(t)}"
            )
        if isinstance(t.subject, BlankNode) or isinstance(t.object, BlankNode):
            continue
        if t.predicate == RDF_TYPE:
            if t.object == RDFS_CLASS and isinstance(t.subject, Iri):
                classes.add(t.subject)
            elif t.object == RDF_PROPERTY and isinstance(t.subject, Iri):
                properties.add(t.subject)
        elif t.predicate == RDFS_SUBCLASSOF:
            subclass_edges.add((t.subject, t.object))
            classes.add(t.subject)
            classes.add(t.object)
        elif t.predicate == RDFS_SUBPROPERTYOF:
            subproperty_edges.add((t.subject, t.object))
            properties.add(t.subject)
            properties.add(t.object)
        elif t.predicate == RDFS_DOMAIN:
            domain[t.subject] = t.object
            properties.add(t.subject)
            classes.add(t.object)
        elif t.predicate == RDFS_RANGE:
            range_[t.subject] = t.object
            properties.add(t.subject)
            if t.object != RDFS_LITERAL:
                classes.add(t.object)
        elif t.predicate == RDFS_LABEL:
            if isinstance(t.object, Literal):
                labels[t.subject] = t.object.lexical

    return Schema(
        classes=frozenset(classes),
        subclass_edges=frozenset(subclass_edges),
        properties=frozenset(properties),
        subproperty_edges=frozenset(subproperty_edges),
        domain=domain,
        range=range_,
        labels=labels,
    )


def _reachability(nodes: frozenset[Iri], edges: frozenset[tuple[Iri, Iri]]) -> dict[Iri, frozenset[Iri]]:
    adjacency: dict[Iri, list[Iri]] = {}
    for child, parent in edges:
        adjacency.setdefault(child, []).append(parent)
    reach: dict[Iri, frozenset[Iri]] = {}
    for node in nodes:
        seen = {node}
        queue = deque([node])
        while queue:
            current = queue.popleft()
            for parent in adjacency.get(current, ()):
                if parent not in seen:
                    seen.add(parent)
                    queue.append(parent)
        reach[node] = frozenset(seen)
    return reach


def _invert(reach: Mapping[Iri, frozenset[Iri]]) -> dict[Iri, frozenset[Iri]]:
    down: dict[Iri, set[Iri]] = {node: set() for node in reach}
    for node, ancestors in reach.items():
        for ancestor in ancestors:
            down.setdefault(ancestor, set()).add(node)
    return {node: frozenset(members) for node, members in down.items()}


@dataclass(frozen=True)
class ClosureTable:
    """Reflexive-transitive subclass/subproperty reachability.

    ``class_reach``/``property_reach`` map each declared class or property
    to all its ancestors, itself included. The inverted descendant maps are
    precomputed because query evaluation asks "what reaches C" constantly.
    """

    class_reach: Mapping[Iri, frozenset[Iri]]
    property_reach: Mapping[Iri, frozenset[Iri]]
    class_descendants: Mapping[Iri, frozenset[Iri]]
    property_descendants: Mapping[Iri, frozenset[Iri]]

    def subclasses_of(self, parent: Iri) -> frozenset[Iri]:
        """All classes that reach ``parent``, including ``parent`` itself."""
        return self.class_descendants.get(parent, frozenset({parent}))

    def subproperties_of(self, parent: Iri) -> frozenset[Iri]:
        return self.property_descendants.get(parent, frozenset({parent}))


def closure(schema: Schema) -> ClosureTable:
    """Compute the closure table for a schema. Cycles are tolerated and
    collapse to mutual reachability."""
    class_reach = _reachability(schema.classes, schema.subclass_edges)
    property_reach = _reachability(schema.properties, schema.subproperty_edges)
    return ClosureTable(
        class_reach=class_reach,
        property_reach=property_reach,
        class_descendants=_invert(class_reach),
        property_descendants=_invert(property_reach),
    )


def is_subclass(ct: ClosureTable, child: Iri, parent: Iri) -> bool:
    """True iff ``parent`` is reachable from ``child``. Classes never
    declared are reachable only from themselves."""
    reach = ct.class_reach.get(child)
    if reach is None:
        return child == parent
    return parent in reach


def is_subproperty(ct: ClosureTable, child: Iri, parent: Iri) -> bool:
    reach = ct.property_reach.get(child)
    if reach is None:
        return child == parent
    return parent in reach


def has_subclass_cycle(schema: Schema, ct: ClosureTable) -> bool:
    """True if any two distinct classes reach each other."""
    for child, parent in schema.subclass_edges:
        if child != parent and child in ct.class_reach.get(parent, frozenset()):
            return True
    return False


def bundled_cerif_schema() -> list[Triple]:
    """The shipped research ontology, parsed from the embedded triple file."""
    text = resources.files("cris.data").joinpath("cerif.nt").read_text(encoding="utf-8")
    outcome = serde.parse_triples(text, scope="bundled-schema")
    if outcome.errors:
        raise CrisError(f"bundled schema is corrupt: {outcome.errors[:3]}")
    return outcome.triples


@dataclass(frozen=True)
class Finding:
    severity: str
    triple: Triple
    message: str


@dataclass(frozen=True)
class ValidationReport:
    """Deterministically ordered validation findings (warnings only)."""

    findings: tuple[Finding, ...] = ()

    def __len__(self) -> int:
        return len(self.findings)


def _asserted_types(dataset: Iterable[Triple]) -> dict[Iri | BlankNode, set[Iri]]:
    types: dict[Iri | BlankNode, set[Iri]] = {}
    for t in dataset:
        if t.predicate == RDF_TYPE and isinstance(t.object, Iri):
            types.setdefault(t.subject, set()).add(t.object)
    return types


def validate(dataset: Iterable[Triple], schema: Schema, ct: ClosureTable) -> ValidationReport:
    """Check a dataset against the schema's constraints, open-world style.

    Emits warnings for domain/range mismatches on declared properties and
    for asserted instance types that the schema does not declare. Unknown
    predicates and untyped resources never warn: harvested data may lag the
    schema.
    """
    triples = list(dataset)
    types = _asserted_types(triples)
    findings: list[Finding] = []

    def warn(t: Triple, message: str) -> None:
        findings.append(Finding("warning", t, message))

    for t in triples:
        if t.predicate == RDF_TYPE and isinstance(t.object, Iri):
            if t.object in (RDFS_CLASS, RDF_PROPERTY):
                continue
            if t.object not in schema.classes:
                warn(t, f"type {t.object} is not declared in the schema")
            continue
        if t.predicate not in schema.properties:
            continue
        expected_domain = schema.domain.get(t.predicate)
        if expected_domain is not None:
            subject_types = types.get(t.subject, set())
            if subject_types and not any(
                is_subclass(ct, d, expected_domain) for d in subject_types
            ):
                warn(t, f"subject type outside domain {expected_domain} of {t.predicate}")
        expected_range = schema.range.get(t.predicate)
        if expected_range is not None:
            if expected_range == RDFS_LITERAL:
                if not isinstance(t.object, Literal):
                    warn(t, f"object of {t.predicate} should be a literal")
            else:
                if isinstance(t.object, Literal):
                    warn(t, f"object of {t.predicate} should be a resource of {expected_range}")
                else:
                    object_types = types.get(t.object, set())
                    if object_types and not any(
                        is_subclass(ct, d, expected_range) for d in object_types
                    ):
                        warn(t, f"object type outside range {expected_range} of {t.predicate}")

    findings.sort(key=lambda f: (triple_key(f.triple), f.message))
    return ValidationReport(findings=tuple(findings))
