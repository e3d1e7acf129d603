"""In-memory triple store with forward and passive (inverse) relation access.

Facts are directed triples ``head -relation-> tail``.  Queries see each stored
triple twice: once under the forward relation from its head, and once under
the passive relation (displayed ``~name``) from its tail.  Passive triples are
never stored; they are derived on the fly, which keeps the forward/passive
views consistent by construction.

All query results are deduplicated and lexicographically ordered so two loads
of the same source file behave identically.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from typing import IO, Iterable

from .errors import EntityNotFoundError, KbLoadError


@dataclass(frozen=True, order=True)
class EntityRef:
    """An entity, identified by an opaque mid plus a human-readable name.

    Local graphs have no separate identifier layer, so mid == friendly_name
    there; remote Freebase-style graphs use real mids (``m.03_r3``).
    """

    mid: str
    friendly_name: str

    def __str__(self) -> str:
        return self.friendly_name


@dataclass(frozen=True, order=True)
class RelationRef:
    """A relation label; ``passive=True`` means traversal from tail to head."""

    name: str
    passive: bool = False

    def __post_init__(self):
        if self.name.startswith("~"):
            raise ValueError("relation name must not carry a '~' prefix; set passive=True")

    @property
    def display(self) -> str:
        return "~" + self.name if self.passive else self.name

    @classmethod
    def parse(cls, text: str) -> "RelationRef":
        text = text.strip()
        if text.startswith("~"):
            return cls(text[1:].strip(), passive=True)
        return cls(text)

    def __str__(self) -> str:
        return self.display


@dataclass(frozen=True)
class Triple:
    head: EntityRef
    relation: RelationRef
    tail: EntityRef

    def render(self) -> str:
        return f"( {self.head.friendly_name}, {self.relation.display}, {self.tail.friendly_name} )"


class KnowledgeGraph:
    """Indexed store over a multiset of forward triples.

    Duplicate input lines are kept in :attr:`triples` (the multiset survives a
    dump/load round trip) but query results are set-valued.  The store is
    read-only after :meth:`add` calls stop; concurrent readers are safe.
    """

    def __init__(self):
        self.triples: list[tuple[str, str, str]] = []
        # head mid -> relation name -> set of tail mids
        self._out: dict[str, dict[str, set[str]]] = {}
        # tail mid -> relation name -> set of head mids
        self._in: dict[str, dict[str, set[str]]] = {}
        self._names: dict[str, str] = {}

    def add(self, head: str, relation: str, tail: str) -> None:
        self.triples.append((head, relation, tail))
        self._out.setdefault(head, {}).setdefault(relation, set()).add(tail)
        self._in.setdefault(tail, {}).setdefault(relation, set()).add(head)
        # local graphs use friendly names as mids
        self._names.setdefault(head, head)
        self._names.setdefault(tail, tail)

    # -- lookups ---------------------------------------------------------

    def entity(self, mid: str) -> EntityRef:
        return EntityRef(mid=mid, friendly_name=self._names.get(mid, mid))

    def entities(self) -> list[EntityRef]:
        return [self.entity(mid) for mid in sorted(self._names)]

    def resolve(self, key: str) -> EntityRef:
        """Find an entity by mid, falling back to friendly name.

        A friendly name shared by several mids resolves to the
        lexicographically smallest mid.
        """
        if not key:
            raise EntityNotFoundError("empty entity key")
        if key in self._names:
            return self.entity(key)
        matches = sorted(mid for mid, name in self._names.items() if name == key)
        if matches:
            return self.entity(matches[0])
        raise EntityNotFoundError(f"no entity with mid or name {key!r}")

    def get_relations(self, entity: EntityRef) -> list[RelationRef]:
        """All relations usable from ``entity``: forward where it is a head,
        passive where it is a tail.  Unknown entities yield an empty list."""
        rels = {RelationRef(name) for name in self._out.get(entity.mid, ())}
        rels |= {RelationRef(name, passive=True) for name in self._in.get(entity.mid, ())}
        return sorted(rels, key=lambda r: r.display)

    def triple_filling(self, entity: EntityRef, relation: RelationRef) -> list[Triple]:
        """Complete ``(entity, relation, ?)``; passive relations walk stored
        triples tail-to-head.  Ordered by tail name, deduplicated."""
        if relation.passive:
            others = self._in.get(entity.mid, {}).get(relation.name, set())
        else:
            others = self._out.get(entity.mid, {}).get(relation.name, set())
        return [
            Triple(self.entity(entity.mid), relation, self.entity(mid))
            for mid in sorted(others, key=lambda m: self._names.get(m, m))
        ]

    # -- integrity -------------------------------------------------------

    def verify_indexes(self) -> bool:
        """Rebuild both indexes from the triple multiset and compare."""
        out: dict[str, dict[str, set[str]]] = {}
        inn: dict[str, dict[str, set[str]]] = {}
        for h, r, t in self.triples:
            out.setdefault(h, {}).setdefault(r, set()).add(t)
            inn.setdefault(t, {}).setdefault(r, set()).add(h)
        return out == self._out and inn == self._in


def load_metaqa_kb(source: IO[str] | str | bytes) -> KnowledgeGraph:
    """Build a graph from ``head|relation|tail`` lines.

    Raises :class:`KbLoadError` on a line without exactly two separators and
    on an entirely empty source.
    """
    if isinstance(source, bytes):
        source = io.StringIO(source.decode("utf-8"))
    elif isinstance(source, str):
        source = io.StringIO(source)
    kg = KnowledgeGraph()
    for lineno, raw in enumerate(source, start=1):
        line = raw.rstrip("\n")
        if not line.strip():
            continue
        parts = line.split("|")
        if len(parts) != 3:
            raise KbLoadError(f"expected head|relation|tail, got {line!r}", line=lineno)
        head, relation, tail = (p.strip() for p in parts)
        if not head or not relation or not tail:
            raise KbLoadError(f"blank field in {line!r}", line=lineno)
        kg.add(head, relation, tail)
    if not kg.triples:
        raise KbLoadError("empty source")
    return kg


def load_metaqa_kb_file(path) -> KnowledgeGraph:
    with open(path, encoding="utf-8") as fh:
        return load_metaqa_kb(fh)


def dump_metaqa_kb(kg: KnowledgeGraph, sink: IO[str]) -> None:
    """Write the triple multiset back out, one pipe-separated line each."""
    for h, r, t in kg.triples:
        sink.write(f"{h}|{r}|{t}\n")


# Exhaustive-scan reference implementations.  These deliberately ignore the
# indexes so tests can pit them against the indexed paths above.

def scan_relations(triples: Iterable[tuple[str, str, str]], mid: str) -> set[str]:
    found = set()
    for h, r, t in triples:
        if h == mid:
            found.add(r)
        if t == mid:
            found.add("~" + r)
    return found


def scan_tails(triples: Iterable[tuple[str, str, str]], mid: str, relation: RelationRef) -> set[str]:
    found = set()
    for h, r, t in triples:
        if relation.passive:
            if t == mid and r == relation.name:
                found.add(h)
        else:
            if h == mid and r == relation.name:
                found.add(t)
    return found
