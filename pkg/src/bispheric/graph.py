"""Directed acyclic triangulated sensing topologies.

The sensing graph is hierarchical: agent 1 (the leader) senses nobody,
agent 2 senses agent 1, agent 3 senses agents 1 and 2, and every agent
l >= 4 senses exactly three mutually adjacent agents of smaller index.
Edges are written (j, i) with j > i: source j measures sink i.
"""

from __future__ import annotations

from dataclasses import dataclass, field

Edge = tuple[int, int]


@dataclass(frozen=True)
class TetrahedronRef:
    """One tetrahedral subgraph: vertices i < j < k < l and its slot in the
    stacked-volume vector."""

    i: int
    j: int
    k: int
    l: int
    index: int

    @property
    def vertices(self) -> tuple[int, int, int, int]:
        return (self.i, self.j, self.k, self.l)


@dataclass(frozen=True)
class ValidationReport:
    """Outcome of graph validation.

    Structural errors (malformed input) are kept apart from violations of the
    out-degree / direction / triangulation rules.
    """

    structural_errors: tuple[str, ...] = ()
    violations: tuple[str, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.structural_errors and not self.violations

    def all_messages(self) -> tuple[str, ...]:
        return self.structural_errors + self.violations


@dataclass(frozen=True)
class SensingGraph:
    """Immutable directed sensing graph over agents 1..n.

    The edge set is stored sorted by (source, sink). Neighbor queries assume
    a graph that passes :func:`validate_graph`.
    """

    n: int
    edges: tuple[Edge, ...]
    _edge_set: frozenset[Edge] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "edges", tuple(sorted(tuple(e) for e in self.edges)))
        object.__setattr__(self, "_edge_set", frozenset(self.edges))

    def has_edge(self, j: int, i: int) -> bool:
        return (j, i) in self._edge_set

    def neighbors_of(self, agent: int) -> tuple[int, ...]:
        """Agents that `agent` senses, ascending."""
        return tuple(i for (j, i) in self.edges if j == agent)

    def neighbor_triple(self, agent: int) -> tuple[int, int, int]:
        """The ordered neighbor triple (i, j, k) of an ordinary follower."""
        nbrs = self.neighbors_of(agent)
        if agent < 4 or len(nbrs) != 3:
            raise ValueError(f"agent {agent} has no neighbor triple (neighbors: {nbrs})")
        return nbrs  # type: ignore[return-value]


def validate_graph(g: SensingGraph) -> ValidationReport:
    """Check the hierarchy rules and the edge-count identity.

    Returns a report whose ``ok`` is true iff the out-degree pattern, the
    high-to-low direction rule, the triangulation closure, and
    |edges| = 3n - 6 all hold. Malformed input (out-of-range indices,
    self-loops, duplicates, antiparallel pairs) is reported separately and
    suppresses the rule checks, which would be meaningless on it.
    """
    structural: list[str] = []
    if g.n < 3:
        structural.append(f"agent count {g.n} < 3")
    seen: set[Edge] = set()
    for (j, i) in g.edges:
        if not (1 <= i <= g.n) or not (1 <= j <= g.n):
            structural.append(f"edge ({j},{i}) has an out-of-range index (n={g.n})")
        elif j == i:
            structural.append(f"self-loop ({j},{i})")
        if (j, i) in seen:
            structural.append(f"duplicate edge ({j},{i})")
        seen.add((j, i))
        if (i, j) in seen and i != j:
            structural.append(f"antiparallel pair ({j},{i})/({i},{j})")
    if structural:
        return ValidationReport(structural_errors=tuple(structural))

    violations: list[str] = []
    out: dict[int, list[int]] = {a: [] for a in range(1, g.n + 1)}
    for (j, i) in g.edges:
        if j < i:
            violations.append(f"clause (ii): edge ({j},{i}) points low-to-high")
        out[j].append(i)
    for a in range(1, g.n + 1):
        want = a - 1 if a <= 3 else 3
        if len(out[a]) != want:
            violations.append(f"clause (i): out({a}) = {len(out[a])}, expected {want}")
    for (k, targets) in out.items():
        for x in targets:
            for y in targets:
                if y < x and not g.has_edge(x, y):
                    violations.append(
                        f"clause (iii): ({k},{y}) and ({k},{x}) present but ({x},{y}) missing"
                    )
    expected = 3 * g.n - 6
    if len(g.edges) != expected:
        violations.append(f"edge count {len(g.edges)} != 3n-6 = {expected}")
    return ValidationReport(violations=tuple(violations))


def henneberg_grow(g: SensingGraph, new_neighbors: tuple[int, int, int]) -> SensingGraph:
    """Insert vertex n+1 sensing the mutually adjacent triple (i, j, k).

    The triple must already be pairwise connected in `g`, otherwise the grown
    graph would break the triangulation closure.
    """
    report = validate_graph(g)
    if not report.ok:
        raise ValueError(f"cannot grow an invalid graph: {report.all_messages()}")
    i, j, k = sorted(new_neighbors)
    if (i, j, k) != tuple(new_neighbors):
        raise ValueError(f"neighbor triple {new_neighbors} must be ascending")
    if not (1 <= i < j < k <= g.n):
        raise ValueError(f"neighbor triple {new_neighbors} out of range for n={g.n}")
    for (a, b) in ((j, i), (k, i), (k, j)):
        if not g.has_edge(a, b):
            raise ValueError(
                f"neighbors {new_neighbors} are not mutually adjacent: edge ({a},{b}) missing"
            )
    v = g.n + 1
    return SensingGraph(n=v, edges=g.edges + ((v, i), (v, j), (v, k)))


def seed_graph() -> SensingGraph:
    """The 3-agent seed: leader, first follower, second follower."""
    return SensingGraph(n=3, edges=((2, 1), (3, 1), (3, 2)))


def tetrahedra(g: SensingGraph) -> list[TetrahedronRef]:
    """The tetrahedral subgraphs, one per ordinary follower, ordered by l."""
    refs = []
    for m, l in enumerate(range(4, g.n + 1)):
        i, j, k = g.neighbor_triple(l)
        refs.append(TetrahedronRef(i=i, j=j, k=k, l=l, index=m))
    return refs
