"""SPARQL 1.1 protocol backend exposing the same query surface as the local
store: relations of an entity (forward plus passive) and tails of an
entity/relation pair.

Wire format: HTTP POST with a form-encoded ``query`` field and
``Accept: application/sparql-results+json``.  The exact query templates are
the module constants below.  Entity identifiers are Freebase-style mids under
a configurable namespace; friendly names come from a configurable name
property (``type.object.name`` by default) and are cached per process.
"""

from __future__ import annotations

import threading

import requests

from .errors import SparqlNetworkError, SparqlProtocolError, SparqlTimeoutError
from .kgstore import EntityRef, RelationRef, Triple

DEFAULT_NAMESPACE = "http://rdf.freebase.com/ns/"
DEFAULT_NAME_PROPERTY = "type.object.name"

RELATIONS_QUERY = """\
PREFIX ns: <%(ns)s>
SELECT DISTINCT ?relation ?direction WHERE {
  { ns:%(mid)s ?relation ?x . BIND("forward" AS ?direction) }
  UNION
  { ?x ?relation ns:%(mid)s . BIND("passive" AS ?direction) }
}"""

FORWARD_TAILS_QUERY = """\
PREFIX ns: <%(ns)s>
SELECT DISTINCT ?tail WHERE { ns:%(mid)s ns:%(relation)s ?tail . }"""

PASSIVE_TAILS_QUERY = """\
PREFIX ns: <%(ns)s>
SELECT DISTINCT ?tail WHERE { ?tail ns:%(relation)s ns:%(mid)s . }"""

NAME_QUERY = """\
PREFIX ns: <%(ns)s>
SELECT ?name WHERE {
  ns:%(mid)s ns:%(name_property)s ?name .
  FILTER (lang(?name) = "" || langMatches(lang(?name), "en"))
} LIMIT 1"""


class SparqlKnowledgeGraph:
    """Remote graph reachable over the SPARQL 1.1 protocol.

    Read-only; concurrent in-flight requests are fine (one session per
    instance, requests.Session is documented thread-safe for plain use).
    """

    def __init__(self, endpoint: str, namespace: str = DEFAULT_NAMESPACE,
                 name_property: str = DEFAULT_NAME_PROPERTY, timeout: float = 30.0):
        self.endpoint = endpoint
        self.namespace = namespace
        self.name_property = name_property
        self.timeout = timeout
        self._session = requests.Session()
        self._name_cache: dict[str, str] = {}
        self._lock = threading.Lock()

    # -- protocol --------------------------------------------------------

    def _query(self, query: str) -> list[dict]:
        try:
            resp = self._session.post(
                self.endpoint,
                data={"query": query},
                headers={"Accept": "application/sparql-results+json"},
                timeout=self.timeout,
            )
        except requests.Timeout as exc:
            raise SparqlTimeoutError(f"query timed out after {self.timeout}s: {exc}") from exc
        except requests.RequestException as exc:
            raise SparqlNetworkError(f"transport failure: {exc}", endpoint=self.endpoint) from exc
        if resp.status_code != 200:
            raise SparqlNetworkError(
                f"HTTP {resp.status_code}", endpoint=self.endpoint, status=resp.status_code
            )
        try:
            body = resp.json()
            return body["results"]["bindings"]
        except (ValueError, KeyError, TypeError) as exc:
            raise SparqlProtocolError(f"malformed sparql-results+json: {exc}") from exc

    def _local_name(self, uri: str) -> str:
        if uri.startswith(self.namespace):
            return uri[len(self.namespace):]
        return uri.rsplit("/", 1)[-1]

    @staticmethod
    def _value(binding: dict, var: str) -> dict:
        try:
            return binding[var]
        except KeyError as exc:
            raise SparqlProtocolError(f"binding missing variable {var!r}") from exc

    # -- graph surface ----------------------------------------------------

    def friendly_name(self, mid: str) -> str:
        with self._lock:
            cached = self._name_cache.get(mid)
        if cached is not None:
            return cached
        bindings = self._query(NAME_QUERY % {
            "ns": self.namespace, "mid": mid, "name_property": self.name_property,
        })
        name = self._value(bindings[0], "name")["value"] if bindings else mid
        with self._lock:
            self._name_cache[mid] = name
        return name

    def resolve(self, key: str) -> EntityRef:
        return EntityRef(mid=key, friendly_name=self.friendly_name(key))

    def get_relations(self, entity: EntityRef) -> list[RelationRef]:
        bindings = self._query(RELATIONS_QUERY % {"ns": self.namespace, "mid": entity.mid})
        rels = set()
        for b in bindings:
            name = self._local_name(self._value(b, "relation")["value"])
            passive = self._value(b, "direction")["value"] == "passive"
            rels.add(RelationRef(name, passive=passive))
        return sorted(rels, key=lambda r: r.display)

    def triple_filling(self, entity: EntityRef, relation: RelationRef) -> list[Triple]:
        template = PASSIVE_TAILS_QUERY if relation.passive else FORWARD_TAILS_QUERY
        bindings = self._query(template % {
            "ns": self.namespace, "mid": entity.mid, "relation": relation.name,
        })
        tails = []
        for b in bindings:
            value = self._value(b, "tail")
            if value.get("type") == "uri":
                mid = self._local_name(value["value"])
                tails.append(EntityRef(mid=mid, friendly_name=self.friendly_name(mid)))
            else:
                literal = value.get("value", "")
                tails.append(EntityRef(mid=literal, friendly_name=literal))
        tails.sort(key=lambda e: (e.friendly_name, e.mid))
        return [Triple(entity, relation, t) for t in tails]


def remote_get_relations(endpoint: str, entity: EntityRef, **kwargs) -> list[RelationRef]:
    return SparqlKnowledgeGraph(endpoint, **kwargs).get_relations(entity)


def remote_triple_filling(endpoint: str, entity: EntityRef, relation: RelationRef, **kwargs) -> list[Triple]:
    return SparqlKnowledgeGraph(endpoint, **kwargs).triple_filling(entity, relation)
