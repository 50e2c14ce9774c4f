"""In-memory multi-relational graph with oriented adjacency.

Entity and relation labels are interned to dense integer ids. Every stored
edge ``(head, relation, tail)`` yields two adjacency entries: the tail sees
``(head, relation, FORWARD)`` and the head sees ``(tail, relation, REVERSE)``,
so a node can enumerate incident edges in both traversal directions. The
graph is immutable after construction and safe for concurrent reads.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum
from typing import Iterable, Iterator, NamedTuple


class Vocabulary:
    """Bijection between string labels and dense ids 0..n-1."""

    __slots__ = ("_labels", "_ids")

    def __init__(self, labels: Iterable[str] = ()):
        self._labels: list[str] = []
        self._ids: dict[str, int] = {}
        for label in labels:
            self.add(label)

    def add(self, label: str) -> int:
        """Intern a label and return its id (existing or freshly assigned)."""
        idx = self._ids.get(label)
        if idx is None:
            idx = len(self._labels)
            self._ids[label] = idx
            self._labels.append(label)
        return idx

    def id(self, label: str) -> int:
        return self._ids[label]

    def get(self, label: str) -> int | None:
        return self._ids.get(label)

    def label(self, idx: int) -> str:
        return self._labels[idx]

    @property
    def labels(self) -> list[str]:
        return list(self._labels)

    def __len__(self) -> int:
        return len(self._labels)

    def __contains__(self, label: str) -> bool:
        return label in self._ids

    def __iter__(self) -> Iterator[str]:
        return iter(self._labels)

    def __repr__(self) -> str:
        return f"Vocabulary({len(self)} labels)"


class Direction(IntEnum):
    """Traversal direction of a relation relative to the stored edge."""

    FORWARD = 0
    REVERSE = 1

    @property
    def flipped(self) -> "Direction":
        return Direction.REVERSE if self is Direction.FORWARD else Direction.FORWARD


class OrientedRelation(NamedTuple):
    """A relation id together with the direction it is traversed in."""

    relation: int
    direction: Direction

    @property
    def flipped(self) -> "OrientedRelation":
        return OrientedRelation(self.relation, self.direction.flipped)


class Edge(NamedTuple):
    head: int
    relation: int
    tail: int


@dataclass
class KnowledgeGraph:
    """Deduplicated typed edges plus per-entity oriented adjacency.

    ``adjacency[v]`` lists ``(neighbor, OrientedRelation)`` pairs sorted by
    (neighbor id, relation id, direction), which fixes the reduction order of
    everything downstream that sums over neighbors.
    """

    entities: Vocabulary
    relations: Vocabulary
    edges: list[Edge]
    adjacency: list[list[tuple[int, OrientedRelation]]] = field(repr=False)

    @property
    def n_entities(self) -> int:
        return len(self.entities)

    @property
    def n_relations(self) -> int:
        return len(self.relations)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def neighbors(self, v: int) -> list[tuple[int, OrientedRelation]]:
        """All incident entries of ``v``, both orientations, in sorted order."""
        if not 0 <= v < self.n_entities:
            raise ValueError(f"entity id {v} out of range [0, {self.n_entities})")
        return self.adjacency[v]

    def triples(self) -> list[tuple[str, str, str]]:
        """The stored edge set as labeled triples, in edge order."""
        ent, rel = self.entities, self.relations
        return [(ent.label(h), rel.label(r), ent.label(t)) for h, r, t in self.edges]


def build_graph(
    triples: Iterable[tuple[str, str, str]],
    extra_entities: Iterable[str] = (),
) -> KnowledgeGraph:
    """Build a graph from labeled triples.

    Duplicate (head, relation, tail) triples are stored once. Entities listed
    in ``extra_entities`` (e.g. nodes that only carry attributes) are interned
    as isolated nodes after all triple entities.
    """
    entities = Vocabulary()
    relations = Vocabulary()
    seen: set[Edge] = set()
    edges: list[Edge] = []
    for head, relation, tail in triples:
        if not head or not relation or not tail:
            raise ValueError(f"triple with empty field: {(head, relation, tail)!r}")
        edge = Edge(entities.add(head), relations.add(relation), entities.add(tail))
        if edge not in seen:
            seen.add(edge)
            edges.append(edge)
    for label in extra_entities:
        entities.add(label)

    edges.sort()
    adjacency: list[list[tuple[int, OrientedRelation]]] = [[] for _ in range(len(entities))]
    for h, r, t in edges:
        # Self-loops deliberately get one entry per direction on the same node.
        adjacency[t].append((h, OrientedRelation(r, Direction.FORWARD)))
        adjacency[h].append((t, OrientedRelation(r, Direction.REVERSE)))
    for entries in adjacency:
        entries.sort(key=lambda item: (item[0], item[1].relation, item[1].direction))

    return KnowledgeGraph(entities=entities, relations=relations, edges=edges, adjacency=adjacency)
