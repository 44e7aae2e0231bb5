"""Research information retrieval engine.

Encode a research ontology, generate and harvest page-embedded metadata
annotations, store them as a schema-aware triple graph, and answer
subsumption-aware queries via library, CLI, and HTTP interfaces.
"""

from .model import (
    BlankNode,
    CrisError,
    Iri,
    Literal,
    MalformedIri,
    PrefixMap,
    Term,
    Triple,
    UnknownPrefix,
    compare_terms,
    expand,
    make_iri,
)
from .schema import (
    ClosureTable,
    Schema,
    bundled_cerif_schema,
    closure,
    default_prefixes,
    is_subclass,
    is_subproperty,
    load_schema,
    validate,
)
from .serde import extract_annotations, parse_triples, serialize
from .store import Snapshot, Store
from .query import BindingTable, evaluate, parse_query

__version__ = "0.1.0"

__all__ = [
    "BindingTable",
    "BlankNode",
    "ClosureTable",
    "CrisError",
    "Iri",
    "Literal",
    "MalformedIri",
    "PrefixMap",
    "Schema",
    "Snapshot",
    "Store",
    "Term",
    "Triple",
    "UnknownPrefix",
    "bundled_cerif_schema",
    "closure",
    "compare_terms",
    "default_prefixes",
    "evaluate",
    "expand",
    "extract_annotations",
    "is_subclass",
    "is_subproperty",
    "load_schema",
    "make_iri",
    "parse_query",
    "parse_triples",
    "serialize",
    "validate",
]
