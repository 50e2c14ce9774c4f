"""Build a small multi-relational graph and inspect its oriented adjacency.

Every stored edge can be traversed in both directions: the edge
(person, directed, film) lets the film see its director (forward) and the
director see the film (reverse). Numeric attributes live in a sparse table
next to the graph.
"""
from mrap import build_graph
from mrap.attributes import AttributeTable
from mrap.graph import Direction, Vocabulary

triples = [
    ("coppola", "directed", "the_godfather"),
    ("coppola", "directed", "apocalypse_now"),
    ("sofia", "child_of", "coppola"),
    ("sofia", "directed", "lost_in_translation"),
]
graph = build_graph(triples)
print(f"{graph.n_entities} entities, {graph.n_relations} relation types, {graph.n_edges} edges\n")

for name in ("coppola", "the_godfather", "sofia"):
    v = graph.entities.id(name)
    print(f"adjacency of {name}:")
    for neighbor, oriented in graph.neighbors(v):
        arrow = "<-" if oriented.direction is Direction.FORWARD else "->"
        print(
            f"  {name} {arrow}{graph.relations.label(oriented.relation)}{arrow[::-1]} "
            f"{graph.entities.label(neighbor)}  ({oriented.direction.name.lower()})"
        )
    print()

# attach numeric attributes; values stay in native units
types = Vocabulary()
rows = [
    ("coppola", "date_of_birth", 1939.0),
    ("sofia", "date_of_birth", 1971.0),
    ("the_godfather", "film_release", 1972.0),
    ("apocalypse_now", "film_release", 1979.0),
    ("lost_in_translation", "film_release", 2003.0),
]
entries = [(graph.entities.id(e), types.add(a), v) for e, a, v in rows]
table = AttributeTable.build(graph.n_entities, types, entries)

print("attribute summaries (count, min, max, mean):")
for attr in range(table.n_types):
    print(f"  {types.label(attr):15s} {table.type_summary(attr)}")
    print(f"  {'':15s} observed range = {table.value_range(attr)}")
