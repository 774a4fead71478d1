"""Knowledge-graph access behind one interface.

Two implementations: :class:`SparqlClient` talks to a live Wikidata-style
endpoint, :class:`InMemoryTripleStore` serves a fixture graph loaded from a
pipe-separated triples file. Both expose the same four read operations, so
everything downstream can be exercised deterministically against the
in-memory store.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import re
import tempfile
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Union

import requests

log = logging.getLogger(__name__)

# Live Wikidata ids are Q+digits; fixture graphs also use QF1-style ids, so
# the fixture parser accepts an optional run of capitals before the digits.
# Ordinary literal words ("Quito", "Quarterly") stay literals.
ENTITY_ID_RE = re.compile(r"^Q[A-Z]*\d+$")

# Per-call result cap; both stores honor it so the interface contract matches.
RELATION_LIMIT = 100

ENTITY_IRI_PREFIX = "http://www.wikidata.org/entity/"
DIRECT_PROP_IRI_PREFIX = "http://www.wikidata.org/prop/direct/"


class KGError(Exception):
    """Base class for knowledge-graph access failures."""


class NotFound(KGError):
    """Lookup produced zero bindings."""


class TransportError(KGError):
    """Endpoint unreachable or persistently failing; safe to retry later."""


class MalformedResponse(KGError):
    """Endpoint replied with something that is not SPARQL result JSON."""


@dataclass(frozen=True)
class EntityRef:
    """A KG item: QID plus human-readable label (label may lag resolution)."""

    id: str
    label: str = ""


@dataclass(frozen=True)
class RelationRef:
    """A KG property: PID plus label; label may be empty before resolution."""

    id: str
    label: str = ""


@dataclass(frozen=True)
class LiteralValue:
    """A literal object position (dates, strings, quantities)."""

    value: str
    datatype: str | None = None


ObjectTerm = Union[EntityRef, LiteralValue]


@dataclass(frozen=True)
class Triple:
    subject: EntityRef
    relation: RelationRef
    object: ObjectTerm

    def key(self) -> str:
        """Deterministic identifier, used for tie-breaking and dedup."""
        if isinstance(self.object, EntityRef):
            obj = self.object.id
        else:
            obj = self.object.value
        return f"{self.subject.id}|{self.relation.id}|{obj}"


@dataclass
class RelationSet:
    """All triples touching one entity, split by which side it occupies."""

    head: list[Triple]
    tail: list[Triple]

    def all(self) -> list[Triple]:
        return self.head + self.tail


class KGStore:
    """Read-only triple access. Implementations are shareable across threads."""

    def resolve_entity_id(self, label: str) -> EntityRef:
        """Return the first entity whose English label equals ``label`` exactly."""
        raise NotImplementedError

    def get_label(self, relation: RelationRef) -> str:
        """Return the English label of a property."""
        raise NotImplementedError

    def head_relations(self, entity: EntityRef) -> list[Triple]:
        """Triples with ``entity`` as subject, at most RELATION_LIMIT."""
        raise NotImplementedError

    def tail_relations(self, entity: EntityRef) -> list[Triple]:
        """Triples with ``entity`` as object, at most RELATION_LIMIT."""
        raise NotImplementedError

    def entities(self) -> Iterator[EntityRef]:
        """Known entities, for fuzzy link fallback. Live stores yield nothing."""
        return iter(())


def fetch_relations(store: KGStore, entity: EntityRef) -> RelationSet:
    return RelationSet(head=store.head_relations(entity), tail=store.tail_relations(entity))


# ---------------------------------------------------------------------------
# Fixture triples file
# ---------------------------------------------------------------------------
#
# One triple per line:
#   subject_id|subject_label|relation_id|relation_label|object_id_or_literal|object_label
# Lines starting with '#' and blank lines are ignored. An object field matching
# the QID pattern is an entity reference; anything else is a literal.


def parse_triples(lines: Iterable[str], source: str = "<memory>") -> list[Triple]:
    triples = []
    for lineno, raw in enumerate(lines, start=1):
        line = raw.rstrip("\n")
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        fields = line.split("|")
        if len(fields) != 6:
            raise ValueError(f"{source}:{lineno}: expected 6 '|'-separated fields, got {len(fields)}")
        s_id, s_label, r_id, r_label, obj_field, obj_label = (f.strip() for f in fields)
        if not s_id or not r_id or not obj_field:
            raise ValueError(f"{source}:{lineno}: subject, relation and object must be non-empty")
        obj: ObjectTerm
        if ENTITY_ID_RE.match(obj_field):
            obj = EntityRef(id=obj_field, label=obj_label)
        else:
            obj = LiteralValue(value=obj_field)
        triples.append(
            Triple(
                subject=EntityRef(id=s_id, label=s_label),
                relation=RelationRef(id=r_id, label=r_label),
                object=obj,
            )
        )
    return triples


def load_triples(path: str | Path) -> list[Triple]:
    path = Path(path)
    with path.open(encoding="utf-8") as f:
        return parse_triples(f, source=str(path))


class InMemoryTripleStore(KGStore):
    """Deterministic fixture store; immutable after construction."""

    def __init__(self, triples: Iterable[Triple]):
        self._triples = list(triples)
        self._by_subject: dict[str, list[Triple]] = {}
        self._by_object: dict[str, list[Triple]] = {}
        self._entity_by_label: dict[str, EntityRef] = {}
        self._entity_by_id: dict[str, EntityRef] = {}
        self._relation_labels: dict[str, str] = {}
        for t in self._triples:
            self._by_subject.setdefault(t.subject.id, []).append(t)
            self._index_entity(t.subject)
            self._relation_labels.setdefault(t.relation.id, t.relation.label)
            if isinstance(t.object, EntityRef):
                self._by_object.setdefault(t.object.id, []).append(t)
                self._index_entity(t.object)

    def _index_entity(self, entity: EntityRef) -> None:
        self._entity_by_id.setdefault(entity.id, entity)
        if entity.label:
            # first occurrence wins, mirroring the endpoint's LIMIT 1
            self._entity_by_label.setdefault(entity.label, entity)

    @classmethod
    def from_file(cls, path: str | Path) -> "InMemoryTripleStore":
        return cls(load_triples(path))

    def resolve_entity_id(self, label: str) -> EntityRef:
        if not label:
            raise ValueError("label must be non-empty")
        entity = self._entity_by_label.get(label)
        if entity is None:
            raise NotFound(f"no entity labelled {label!r}")
        return entity

    def get_label(self, relation: RelationRef) -> str:
        if not relation.id:
            raise ValueError("relation id must be non-empty")
        label = self._relation_labels.get(relation.id)
        if not label:
            raise NotFound(f"no label for relation {relation.id!r}")
        return label

    def head_relations(self, entity: EntityRef) -> list[Triple]:
        return self._by_subject.get(entity.id, [])[:RELATION_LIMIT]

    def tail_relations(self, entity: EntityRef) -> list[Triple]:
        return self._by_object.get(entity.id, [])[:RELATION_LIMIT]

    def entities(self) -> Iterator[EntityRef]:
        return iter(self._entity_by_id.values())


# ---------------------------------------------------------------------------
# SPARQL query templates and builders
# ---------------------------------------------------------------------------
#
# Whitespace inside these literals (including trailing spaces) is significant:
# emitted queries are byte-compared against golden files in the test suite.
# Do not reformat.

GET_ENTITY_ID = """SELECT ?item WHERE {{
    ?item rdfs:label "{safe_name}"@en.
    FILTER(STRSTARTS(STR(?item),
    "http://www.wikidata.org/entity/Q"))
}} LIMIT 1"""

GET_ENTITY_NAME = """SELECT ?propertyLabel WHERE {{
  wd:{relation_id} rdfs:label ?propertyLabel.
  FILTER(LANG(?propertyLabel) = "en")
}}
LIMIT 1"""

GET_HEAD_RELATIONS = """SELECT ?relation ?relationLabel ?o ?oLabel WHERE {{
    wd:{wikidata_id} ?relation ?o.
    FILTER(STRSTARTS(STR(?relation),
    "http://www.wikidata.org/prop/direct/"))
    SERVICE wikibase:label 
    {{ bd:serviceParam wikibase:language "en". }}
}} LIMIT 100"""

GET_TAIL_RELATIONS = """SELECT ?relation ?relationLabel ?s ?sLabel WHERE {{
    ?s ?relation wd:{wikidata_id}.
    FILTER(STRSTARTS(STR(?relation), 
    "http://www.wikidata.org/prop/direct/"))
    SERVICE wikibase:label 
    {{ bd:serviceParam wikibase:language "en". }}
}} LIMIT 100"""


def escape_label(label: str) -> str:
    """Make a label safe for quoting inside a SPARQL string literal.

    Backslashes and double quotes are escaped; labels containing newlines
    are rejected outright rather than silently mangled.
    """
    if not label:
        raise ValueError("label must be non-empty")
    if "\n" in label or "\r" in label:
        raise ValueError("label must not contain newline characters")
    return label.replace("\\", "\\\\").replace('"', '\\"')


def entity_id_query(label: str) -> str:
    return GET_ENTITY_ID.format(safe_name=escape_label(label))


def entity_name_query(relation_id: str) -> str:
    if not relation_id:
        raise ValueError("relation id must be non-empty")
    return GET_ENTITY_NAME.format(relation_id=relation_id)


def head_relations_query(wikidata_id: str) -> str:
    return GET_HEAD_RELATIONS.format(wikidata_id=wikidata_id)


def tail_relations_query(wikidata_id: str) -> str:
    return GET_TAIL_RELATIONS.format(wikidata_id=wikidata_id)


# ---------------------------------------------------------------------------
# Live client
# ---------------------------------------------------------------------------


class SparqlClient(KGStore):
    """SPARQL-over-HTTP client with bounded retries and an on-disk query cache.

    Results are cached keyed by the exact query string so repeated runs are
    reproducible and gentle on rate-limited public endpoints. Cache writes go
    through write-then-rename, so concurrent evaluations can share a cache
    directory.
    """

    def __init__(
        self,
        endpoint_url: str,
        cache_dir: str | Path | None = None,
        session=None,
        retries: int = 3,
        backoff: float = 1.0,
        timeout: float = 30.0,
    ):
        self.endpoint_url = endpoint_url
        self.cache_dir = Path(cache_dir) if cache_dir else None
        if self.cache_dir:
            self.cache_dir.mkdir(parents=True, exist_ok=True)
        self._session = session if session is not None else requests.Session()
        self.retries = max(1, retries)
        self.backoff = backoff
        self.timeout = timeout

    # -- cache ---------------------------------------------------------

    def _cache_path(self, query: str) -> Path | None:
        if not self.cache_dir:
            return None
        digest = hashlib.sha256(query.encode("utf-8")).hexdigest()
        return self.cache_dir / f"{digest}.json"

    def _cache_read(self, query: str):
        path = self._cache_path(query)
        if path is None or not path.exists():
            return None
        try:
            return json.loads(path.read_text(encoding="utf-8"))
        except (OSError, ValueError):
            log.warning("discarding unreadable cache entry %s", path)
            return None

    def _cache_write(self, query: str, payload) -> None:
        path = self._cache_path(query)
        if path is None:
            return
        fd, tmp = tempfile.mkstemp(dir=str(self.cache_dir), suffix=".tmp")
        try:
            with os.fdopen(fd, "w", encoding="utf-8") as f:
                json.dump(payload, f)
            os.replace(tmp, path)
        except OSError:
            log.warning("failed to persist cache entry for query", exc_info=True)
            if os.path.exists(tmp):
                os.unlink(tmp)

    # -- transport -----------------------------------------------------

    def execute(self, query: str) -> list[dict]:
        """Run a query, returning the result bindings."""
        cached = self._cache_read(query)
        if cached is not None:
            return self._bindings(cached)

        last_error: Exception | None = None
        for attempt in range(self.retries):
            if attempt:
                time.sleep(self.backoff * 2 ** (attempt - 1))
            try:
                response = self._session.get(
                    self.endpoint_url,
                    params={"query": query, "format": "json"},
                    headers={"Accept": "application/sparql-results+json"},
                    timeout=self.timeout,
                )
            except requests.RequestException as exc:
                last_error = exc
                log.warning("SPARQL transport failure (attempt %d): %s", attempt + 1, exc)
                continue
            if response.status_code >= 500:
                last_error = TransportError(f"endpoint returned {response.status_code}")
                log.warning("SPARQL server error %d (attempt %d)", response.status_code, attempt + 1)
                continue
            if response.status_code != 200:
                raise TransportError(f"endpoint returned {response.status_code}")
            try:
                payload = response.json()
            except ValueError as exc:
                raise MalformedResponse(f"response is not JSON: {exc}") from exc
            bindings = self._bindings(payload)
            self._cache_write(query, payload)
            return bindings
        raise TransportError(f"endpoint failed after {self.retries} attempts: {last_error}")

    @staticmethod
    def _bindings(payload) -> list[dict]:
        try:
            bindings = payload["results"]["bindings"]
        except (KeyError, TypeError) as exc:
            raise MalformedResponse("missing results.bindings") from exc
        if not isinstance(bindings, list):
            raise MalformedResponse("results.bindings is not a list")
        return bindings

    # -- store interface -------------------------------------------------

    def resolve_entity_id(self, label: str) -> EntityRef:
        rows = self.execute(entity_id_query(label))
        if not rows:
            raise NotFound(f"no entity labelled {label!r}")
        iri = self._value(rows[0], "item")
        return EntityRef(id=self._strip_prefix(iri, ENTITY_IRI_PREFIX), label=label)

    def get_label(self, relation: RelationRef) -> str:
        rows = self.execute(entity_name_query(relation.id))
        if not rows:
            raise NotFound(f"no label for relation {relation.id!r}")
        return self._value(rows[0], "propertyLabel")

    def head_relations(self, entity: EntityRef) -> list[Triple]:
        rows = self.execute(head_relations_query(entity.id))
        triples = []
        for row in rows[:RELATION_LIMIT]:
            relation = self._relation(row)
            obj = self._term(row, "o", "oLabel")
            triples.append(Triple(subject=entity, relation=relation, object=obj))
        return triples

    def tail_relations(self, entity: EntityRef) -> list[Triple]:
        rows = self.execute(tail_relations_query(entity.id))
        triples = []
        for row in rows[:RELATION_LIMIT]:
            relation = self._relation(row)
            subj = self._term(row, "s", "sLabel")
            if not isinstance(subj, EntityRef):
                log.warning("skipping tail triple with literal subject: %r", subj)
                continue
            triples.append(Triple(subject=subj, relation=relation, object=entity))
        return triples

    # -- binding helpers -------------------------------------------------

    @staticmethod
    def _value(row: dict, name: str) -> str:
        try:
            return row[name]["value"]
        except (KeyError, TypeError) as exc:
            raise MalformedResponse(f"binding missing {name!r}") from exc

    @staticmethod
    def _optional(row: dict, name: str) -> str:
        entry = row.get(name)
        if isinstance(entry, dict):
            return entry.get("value", "")
        return ""

    @staticmethod
    def _strip_prefix(iri: str, prefix: str) -> str:
        return iri[len(prefix):] if iri.startswith(prefix) else iri

    def _relation(self, row: dict) -> RelationRef:
        iri = self._value(row, "relation")
        return RelationRef(
            id=self._strip_prefix(iri, DIRECT_PROP_IRI_PREFIX),
            label=self._optional(row, "relationLabel"),
        )

    def _term(self, row: dict, name: str, label_name: str) -> ObjectTerm:
        try:
            entry = row[name]
            kind = entry["type"]
            value = entry["value"]
        except (KeyError, TypeError) as exc:
            raise MalformedResponse(f"binding missing {name!r}") from exc
        if kind == "uri" and value.startswith(ENTITY_IRI_PREFIX):
            return EntityRef(
                id=self._strip_prefix(value, ENTITY_IRI_PREFIX),
                label=self._optional(row, label_name),
            )
        return LiteralValue(value=value, datatype=entry.get("datatype"))
