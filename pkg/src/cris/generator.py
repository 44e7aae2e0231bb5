"""Turn structured research records into annotation triples.

Records describe research objects (people, projects, publications, ...) in
a small JSON format; each record becomes a typed resource with a persistent
URI minted from the record id, so assertions about one object made on
different pages join correctly. Generated annotations can be embedded into
an HTML page inside a script block that the harvester knows how to extract.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from typing import Any, Mapping

from .model import CrisError, Iri, Literal, MalformedIri, Triple, make_iri
from .schema import CERIF_NS, RDF_TYPE, ClosureTable, Schema
from .serde import TRIPLES_MEDIA_TYPE, serialize

_RECORD_ID_RE = re.compile(r"^[A-Za-z0-9_-]+$")


class RecordFileError(CrisError):
    """The record file is structurally invalid."""


class UnknownType(CrisError):
    """A record's type does not name a schema class."""


class UnknownProperty(CrisError):
    """A record uses a property the schema does not declare (strict mode)."""


class DanglingReference(CrisError):
    """An @id value resolves to neither a record id nor an absolute IRI."""


@dataclass(frozen=True)
class RecordValue:
    """Either a literal string or a reference (record id or absolute IRI)."""

    text: str
    is_reference: bool = False


@dataclass(frozen=True)
class Record:
    id: str
    type: str
    properties: Mapping[str, tuple[RecordValue, ...]] = field(default_factory=dict)


@dataclass(frozen=True)
class RecordFile:
    base_uri: Iri
    records: tuple[Record, ...]


@dataclass(frozen=True)
class GeneratedAnnotation:
    triples: frozenset[Triple]
    subject_uris: Mapping[str, Iri]
    warnings: tuple[str, ...] = ()


def _parse_value(raw: Any, where: str) -> RecordValue:
    if isinstance(raw, str):
        return RecordValue(text=raw)
    if isinstance(raw, dict) and set(raw) == {"@id"} and isinstance(raw["@id"], str):
        return RecordValue(text=raw["@id"], is_reference=True)
    raise RecordFileError(f"{where}: value must be a string or {{\"@id\": ...}}")


def parse_record_file(data: Any) -> RecordFile:
    """Validate the JSON shape of a record file and build the model."""
    if not isinstance(data, dict):
        raise RecordFileError("record file must be a JSON object")
    base = data.get("base_uri")
    if not isinstance(base, str):
        raise RecordFileError("record file needs a string 'base_uri'")
    try:
        base_uri = make_iri(base)
    except MalformedIri as exc:
        raise RecordFileError(f"bad base_uri: {exc}") from None
    raw_records = data.get("records")
    if not isinstance(raw_records, list):
        raise RecordFileError("record file needs a 'records' array")

    records: list[Record] = []
    seen_ids: set[str] = set()
    for index, raw in enumerate(raw_records):
        where = f"records[{index}]"
        if not isinstance(raw, dict):
            raise RecordFileError(f"{where}: record must be an object")
        record_id = raw.get("id")
        if not isinstance(record_id, str) or not _RECORD_ID_RE.match(record_id):
            raise RecordFileError(f"{where}: bad record id {record_id!r}")
        if record_id in seen_ids:
            raise RecordFileError(f"{where}: duplicate record id {record_id!r}")
        seen_ids.add(record_id)
        record_type = raw.get("type")
        if not isinstance(record_type, str) or not record_type:
            raise RecordFileError(f"{where}: missing type")
        properties: dict[str, tuple[RecordValue, ...]] = {}
        raw_props = raw.get("properties", {})
        if not isinstance(raw_props, dict):
            raise RecordFileError(f"{where}: properties must be an object")
        for prop_name, raw_values in raw_props.items():
            values = raw_values if isinstance(raw_values, list) else [raw_values]
            properties[prop_name] = tuple(
                _parse_value(v, f"{where}.{prop_name}") for v in values
            )
        records.append(Record(id=record_id, type=record_type, properties=properties))
    return RecordFile(base_uri=base_uri, records=tuple(records))


def load_record_file(path: str) -> RecordFile:
    with open(path, "r", encoding="utf-8") as handle:
        return parse_record_file(json.load(handle))


def generate(
    rf: RecordFile, schema: Schema, ct: ClosureTable, strict: bool = False
) -> GeneratedAnnotation:
    """Produce annotation triples for every record.

    Class and property tokens expand in the research ontology namespace.
    Unknown types always fail; unknown properties warn unless strict.
    """
    subject_uris = {record.id: Iri(rf.base_uri.value + record.id) for record in rf.records}
    triples: set[Triple] = set()
    warnings: list[str] = []

    for record in rf.records:
        class_iri = Iri(CERIF_NS + record.type)
        if class_iri not in schema.classes:
            raise UnknownType(f"record {record.id!r}: unknown type {record.type!r}")
        subject = subject_uris[record.id]
        triples.add(Triple(subject, RDF_TYPE, class_iri))
        for prop_name in sorted(record.properties):
            prop_iri = Iri(CERIF_NS + prop_name)
            if prop_iri not in schema.properties:
                message = f"record {record.id!r}: unknown property {prop_name!r}"
                if strict:
                    raise UnknownProperty(message)
                warnings.append(message)
            for value in record.properties[prop_name]:
                if value.is_reference:
                    if value.text in subject_uris:
                        obj = subject_uris[value.text]
                    else:
                        try:
                            obj = make_iri(value.text)
                        except MalformedIri:
                            raise DanglingReference(
                                f"record {record.id!r}: @id {value.text!r} is neither "
                                "a record id nor an absolute IRI"
                            ) from None
                    triples.add(Triple(subject, prop_iri, obj))
                else:
                    triples.add(Triple(subject, prop_iri, Literal(value.text)))

    return GeneratedAnnotation(
        triples=frozenset(triples),
        subject_uris=subject_uris,
        warnings=tuple(warnings),
    )


_EMBED_BLOCK_RE = re.compile(
    r'[ \t]*<script\s+type="' + re.escape(TRIPLES_MEDIA_TYPE) + r'">.*?</script>\n?',
    re.DOTALL | re.IGNORECASE,
)
_HEAD_CLOSE_RE = re.compile(r"</head\s*>", re.IGNORECASE)


def embed(annotation: GeneratedAnnotation, html: str) -> str:
    """Return the page with one annotation block holding the canonical
    serialization, replacing any block embedded earlier."""
    block = f'<script type="{TRIPLES_MEDIA_TYPE}">\n{serialize(annotation.triples)}</script>'
    stripped = _EMBED_BLOCK_RE.sub("", html)
    match = _HEAD_CLOSE_RE.search(stripped)
    if match:
        return stripped[: match.start()] + block + "\n" + stripped[match.start() :]
    return block + "\n" + stripped
