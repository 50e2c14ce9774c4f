import numpy as np
import pytest

from mrap.attributes import AttributeTable, Status
from mrap.errors import DataError
from mrap.graph import Direction, Edge, OrientedRelation, Vocabulary, build_graph


class TestBuildGraph:
    def test_single_edge_orientation(self):
        g = build_graph([("a", "p", "b")])
        assert g.n_entities == 2
        assert g.n_relations == 1
        a, b = g.entities.id("a"), g.entities.id("b")
        p = g.relations.id("p")
        assert g.neighbors(b) == [(a, OrientedRelation(p, Direction.FORWARD))]
        assert g.neighbors(a) == [(b, OrientedRelation(p, Direction.REVERSE))]

    def test_duplicate_triples_stored_once(self):
        g = build_graph([("a", "p", "b"), ("a", "p", "b")])
        assert g.n_edges == 1

    def test_neighbors_deterministic_order(self):
        g = build_graph([("c", "q", "b"), ("a", "p", "b")])
        b = g.entities.id("b")
        got = [(n, o.relation, o.direction) for n, o in g.neighbors(b)]
        assert got == sorted(got)  # neighbor id, then relation id, then direction
        assert {g.entities.label(n) for n, _, _ in got} == {"a", "c"}
        assert all(d is Direction.FORWARD for _, _, d in got)

    def test_invalid_entity_id(self):
        g = build_graph([("a", "p", "b")])
        with pytest.raises(ValueError):
            g.neighbors(99)

    def test_empty_input(self):
        g = build_graph([])
        assert g.n_entities == 0 and g.n_edges == 0

    def test_empty_field_rejected(self):
        with pytest.raises(ValueError):
            build_graph([("a", "", "b")])

    def test_extra_entities_are_isolated(self):
        g = build_graph([("a", "p", "b")], extra_entities=["z", "a"])
        z = g.entities.id("z")
        assert g.neighbors(z) == []
        assert g.n_entities == 3  # "a" not duplicated

    def test_self_loop_one_entry_per_direction(self):
        g = build_graph([("a", "p", "a")])
        a = g.entities.id("a")
        directions = sorted(o.direction for _, o in g.neighbors(a))
        assert directions == [Direction.FORWARD, Direction.REVERSE]


class TestGraphProperties:
    def test_round_trip_reproduces_triple_set(self):
        triples = [("a", "p", "b"), ("b", "q", "c"), ("a", "p", "b"), ("c", "p", "a")]
        g = build_graph(triples)
        assert set(g.triples()) == set(triples)

    def test_orientation_symmetry_random(self):
        rng = np.random.default_rng(7)
        names = [f"n{i}" for i in range(12)]
        rels = ["p", "q", "r"]
        triples = [
            (names[rng.integers(12)], rels[rng.integers(3)], names[rng.integers(12)])
            for _ in range(60)
        ]
        g = build_graph(triples)
        for v in range(g.n_entities):
            for n, oriented in g.neighbors(v):
                assert (v, oriented.flipped) in g.neighbors(n)

    def test_adjacency_total_twice_edges(self):
        triples = [("a", "p", "b"), ("b", "q", "c"), ("c", "p", "a"), ("a", "q", "c")]
        g = build_graph(triples)
        assert sum(len(g.neighbors(v)) for v in range(g.n_entities)) == 2 * g.n_edges


class TestVocabulary:
    def test_bijection(self):
        vocab = Vocabulary(["x", "y"])
        assert vocab.id("x") == 0 and vocab.label(1) == "y"
        assert vocab.add("x") == 0
        assert vocab.add("z") == 2
        assert len(vocab) == 3

    def test_get_missing(self):
        assert Vocabulary().get("nope") is None


class TestAttrRange:
    def _table(self, values, statuses=None):
        types = Vocabulary(["h"])
        entries = [(i, 0, v) for i, v in enumerate(values)]
        table = AttributeTable.build(len(values), types, entries)
        if statuses is not None:
            table = table.with_status(np.array(statuses, dtype=np.int8))
        return table

    def test_max_minus_min(self):
        assert self._table([10.0, 30.0, 20.0]).value_range(0) == 20.0

    def test_single_value(self):
        assert self._table([5.0]).value_range(0) == 0.0

    def test_signed(self):
        assert self._table([-3.0, 7.0]).value_range(0) == 10.0

    def test_observed_only(self):
        table = self._table([1.0, 100.0], statuses=[Status.OBSERVED, Status.MISSING])
        assert table.value_range(0) == 0.0

    def test_no_observed_entries(self):
        table = self._table([1.0], statuses=[Status.MISSING])
        with pytest.raises(DataError):
            table.value_range(0)

    def test_observed_values_never_change_after_status_swap(self):
        table = self._table([4.0, 6.0])
        relabeled = table.with_status(np.array([Status.OBSERVED, Status.MISSING], dtype=np.int8))
        np.testing.assert_array_equal(relabeled.values, table.values)
