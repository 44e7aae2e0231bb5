"""Deduplicated, indexed triple repository with per-source provenance.

Three access-order indexes (subject-, predicate-, and object-first) back
pattern matching; every stored triple records which source documents
asserted it and when. Reads go through immutable snapshots; writes are
serialized behind one lock. Optional write-through persistence keeps a
canonical triple file plus a provenance sidecar on disk.
"""

from __future__ import annotations

import hashlib
import threading
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Mapping

from .model import BlankNode, Iri, Literal, Term, Triple, triple_key
from .serde import ParseOutcome, format_triple, parse_triples, serialize

LOCAL_SOURCE = "local"

STORE_FILE = "store.nt"
PROVENANCE_FILE = "store.prov"

REPLACE_SOURCE = "replace-source"
ACCUMULATE = "accumulate"

_Index = dict  # nested: key -> key -> set of third position


def _utc_iso(epoch_seconds: int) -> str:
    return datetime.fromtimestamp(epoch_seconds, tz=timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def _parse_utc_iso(text: str) -> int:
    return int(datetime.strptime(text, "%Y-%m-%dT%H:%M:%SZ").replace(tzinfo=timezone.utc).timestamp())


def relabel_blanks(triples: Iterable[Triple], scope: str) -> list[Triple]:
    """Rename blank nodes under a document scope so labels from different
    documents never collide. Deterministic per (label, scope)."""
    suffix = hashlib.sha1(scope.encode("utf-8")).hexdigest()[:10]

    def rename(term: Term) -> Term:
        if isinstance(term, BlankNode):
            return BlankNode(f"{term.label}x{suffix}")
        return term

    out = []
    for t in triples:
        if isinstance(t.subject, BlankNode) or isinstance(t.object, BlankNode):
            out.append(Triple(rename(t.subject), t.predicate, rename(t.object)))
        else:
            out.append(t)
    return out


@dataclass(frozen=True)
class StoreStats:
    triples: int
    subjects: int
    predicates: int
    per_source: tuple[tuple[str, int, int], ...]  # (source, triple count, latest fetch epoch)


@dataclass(frozen=True)
class Snapshot:
    """Immutable view of a store at one instant."""

    triples: frozenset[Triple]
    provenance: Mapping[Triple, frozenset[tuple[str, int]]]
    _spo: _Index = field(repr=False, default_factory=dict)
    _pos: _Index = field(repr=False, default_factory=dict)
    _osp: _Index = field(repr=False, default_factory=dict)

    def match(self, s: Term | None = None, p: Iri | None = None, o: Term | None = None) -> list[Triple]:
        """All triples agreeing with every bound position, canonically ordered."""
        results: list[Triple] = []
        if s is not None:
            by_pred = self._spo.get(s, {})
            preds = [p] if p is not None else list(by_pred)
            for pred in preds:
                for obj in by_pred.get(pred, ()):
                    if o is None or obj == o:
                        results.append(Triple(s, pred, obj))
        elif p is not None:
            by_obj = self._pos.get(p, {})
            objs = [o] if o is not None else list(by_obj)
            for obj in objs:
                for subj in by_obj.get(obj, ()):
                    results.append(Triple(subj, p, obj))
        elif o is not None:
            by_subj = self._osp.get(o, {})
            for subj, preds in by_subj.items():
                for pred in preds:
                    results.append(Triple(subj, pred, o))
        else:
            results = list(self.triples)
        results.sort(key=triple_key)
        return results

    def stats(self) -> StoreStats:
        # Count each triple once per source even if fetched multiple times.
        per_source: dict[str, tuple[int, int]] = {}
        for t in self.triples:
            entries = self.provenance.get(t, frozenset())
            for source in {source for source, _ in entries}:
                latest_at = max(at for src, at in entries if src == source)
                count, latest = per_source.get(source, (0, 0))
                per_source[source] = (count + 1, max(latest, latest_at))
        return StoreStats(
            triples=len(self.triples),
            subjects=len({t.subject for t in self.triples}),
            predicates=len({t.predicate for t in self.triples}),
            per_source=tuple(
                (source, count, latest)
                for source, (count, latest) in sorted(per_source.items())
            ),
        )


class Store:
    """Mutable triple repository. Single writer, many snapshot readers."""

    def __init__(self, persist_dir: str | Path | None = None):
        self._lock = threading.RLock()
        self._triples: set[Triple] = set()
        self._spo: _Index = {}
        self._pos: _Index = {}
        self._osp: _Index = {}
        self._prov: dict[Triple, set[tuple[str, int]]] = {}
        self._persist_dir = Path(persist_dir) if persist_dir is not None else None

    def __len__(self) -> int:
        with self._lock:
            return len(self._triples)

    def _add_to_indexes(self, t: Triple) -> None:
        self._spo.setdefault(t.subject, {}).setdefault(t.predicate, set()).add(t.object)
        self._pos.setdefault(t.predicate, {}).setdefault(t.object, set()).add(t.subject)
        self._osp.setdefault(t.object, {}).setdefault(t.subject, set()).add(t.predicate)

    def _remove_from_indexes(self, t: Triple) -> None:
        for index, a, b, c in (
            (self._spo, t.subject, t.predicate, t.object),
            (self._pos, t.predicate, t.object, t.subject),
            (self._osp, t.object, t.subject, t.predicate),
        ):
            third = index[a][b]
            third.discard(c)
            if not third:
                del index[a][b]
            if not index[a]:
                del index[a]

    def _insert_locked(self, t: Triple, source: str, at: int) -> bool:
        added = t not in self._triples
        if added:
            self._triples.add(t)
            self._add_to_indexes(t)
        self._prov.setdefault(t, set()).add((source, at))
        return added

    def _remove_locked(self, t: Triple) -> None:
        self._triples.discard(t)
        self._remove_from_indexes(t)
        self._prov.pop(t, None)

    def insert(self, t: Triple, source: str = LOCAL_SOURCE, at: int = 0) -> bool:
        """Add one triple. Returns True iff it was newly added; the
        provenance entry is recorded either way."""
        with self._lock:
            added = self._insert_locked(t, source, at)
            self._write_through()
        return added

    def merge(
        self,
        parsed: ParseOutcome,
        source: str,
        at: int,
        mode: str = REPLACE_SOURCE,
    ) -> tuple[int, int]:
        """Merge a parsed document under one source, returning
        (added, duplicate) counts.

        Blank nodes are relabeled under the document's parse scope first. In
        replace-source mode (the default), triples whose only provenance is
        this source and which the new document no longer asserts are removed,
        so re-harvesting reflects the document's current content; triples
        corroborated by other sources survive.
        """
        if mode not in (REPLACE_SOURCE, ACCUMULATE):
            raise ValueError(f"unknown merge mode: {mode!r}")
        relabeled = relabel_blanks(parsed.triples, parsed.blank_scope)
        incoming = set(relabeled)
        added = 0
        duplicate = 0
        with self._lock:
            if mode == REPLACE_SOURCE:
                stale = [
                    t
                    for t, entries in self._prov.items()
                    if t not in incoming and {src for src, _ in entries} == {source}
                ]
                for t in stale:
                    self._remove_locked(t)
            for t in relabeled:
                if self._insert_locked(t, source, at):
                    added += 1
                else:
                    duplicate += 1
            self._write_through()
        return added, duplicate

    def snapshot(self) -> Snapshot:
        """An immutable copy-on-read view; later writes never affect it."""
        with self._lock:
            spo = {a: {b: set(cs) for b, cs in inner.items()} for a, inner in self._spo.items()}
            pos = {a: {b: set(cs) for b, cs in inner.items()} for a, inner in self._pos.items()}
            osp = {a: {b: set(cs) for b, cs in inner.items()} for a, inner in self._osp.items()}
            prov = {t: frozenset(entries) for t, entries in self._prov.items()}
            return Snapshot(
                triples=frozenset(self._triples),
                provenance=prov,
                _spo=spo,
                _pos=pos,
                _osp=osp,
            )

    # -- persistence ------------------------------------------------------

    def _write_through(self) -> None:
        if self._persist_dir is not None:
            self.save(self._persist_dir)

    def save(self, directory: str | Path) -> None:
        """Write the canonical triple file and the provenance sidecar."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        with self._lock:
            (directory / STORE_FILE).write_text(serialize(self._triples), encoding="utf-8")
            lines = []
            for t in sorted(self._triples, key=triple_key):
                for source, at in sorted(self._prov.get(t, ())):
                    lines.append(f"{source}\t{_utc_iso(at)}\t{format_triple(t)}\n")
            (directory / PROVENANCE_FILE).write_text("".join(lines), encoding="utf-8")

    @classmethod
    def load(cls, directory: str | Path, persist_dir: str | Path | None = None) -> "Store":
        """Rebuild a store from its persisted files. Blank labels are taken
        verbatim (they were already scoped when first merged)."""
        directory = Path(directory)
        store = cls(persist_dir=persist_dir)
        store_file = directory / STORE_FILE
        if not store_file.exists():
            return store
        outcome = parse_triples(store_file.read_text(encoding="utf-8"), scope="store-file")
        if outcome.errors:
            raise ValueError(f"corrupt {STORE_FILE}: line {outcome.errors[0][0]}: {outcome.errors[0][1]}")
        for t in outcome.triples:
            store._triples.add(t)
            store._add_to_indexes(t)
        prov_file = directory / PROVENANCE_FILE
        if prov_file.exists():
            for line in prov_file.read_text(encoding="utf-8").splitlines():
                if not line.strip():
                    continue
                parts = line.split("\t")
                if len(parts) != 3:
                    continue
                source, iso, triple_line = parts
                parsed = parse_triples(triple_line, scope="store-file")
                if parsed.errors or len(parsed.triples) != 1:
                    continue
                t = parsed.triples[0]
                if t in store._triples:
                    store._prov.setdefault(t, set()).add((source, _parse_utc_iso(iso)))
        # The invariant requires provenance on every triple; default any
        # orphans to a local entry at epoch zero.
        for t in store._triples:
            store._prov.setdefault(t, set()).add((LOCAL_SOURCE, 0))
        return store
