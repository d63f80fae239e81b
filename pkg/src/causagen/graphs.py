"""Causal graph structures and conditioning-plan construction.

Three conditioning strategies turn a column list plus optional graph into
a GenerationPlan:

* ``vanilla``  - each variable conditions on every predecessor in the
  given column order.
* ``dag``      - variables are generated in topological order and each
  conditions on its parents only.
* ``cpdag``    - hybrid for partially directed graphs: variables whose
  adjacent edges are all directed condition on their directed parents;
  everything else falls back to conditioning on all predecessors. Nodes
  incident to a directed edge form an "oriented block" generated first
  (topologically sorted by the directed subgraph); the remaining nodes
  follow in column order.

Ties are always broken by original column order, which makes every plan a
pure function of its inputs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from .errors import GraphError
from .table import atomic_write_text

VANILLA = "vanilla"
DAG = "dag"
CPDAG = "cpdag"
STRATEGIES = (VANILLA, DAG, CPDAG)


def _check_nodes_and_edges(nodes, edge_pairs):
    node_set = set(nodes)
    if len(node_set) != len(nodes):
        raise GraphError("duplicate node names")
    for u, v in edge_pairs:
        if u == v:
            raise GraphError(f"self-loop on {u!r}")
        if u not in node_set or v not in node_set:
            raise GraphError(f"edge ({u!r}, {v!r}) uses unknown node")


def _kahn(nodes: tuple[str, ...], edges: frozenset[tuple[str, str]]) -> list[str]:
    """Topological order with column-order tie-break. Raises on cycles."""
    position = {v: i for i, v in enumerate(nodes)}
    indegree = {v: 0 for v in nodes}
    children: dict[str, list[str]] = {v: [] for v in nodes}
    for u, v in edges:
        indegree[v] += 1
        children[u].append(v)
    available = sorted((v for v in nodes if indegree[v] == 0), key=position.__getitem__)
    order: list[str] = []
    while available:
        v = available.pop(0)
        order.append(v)
        freed = []
        for c in children[v]:
            indegree[c] -= 1
            if indegree[c] == 0:
                freed.append(c)
        if freed:
            available = sorted(available + freed, key=position.__getitem__)
    if len(order) != len(nodes):
        raise GraphError("graph contains a directed cycle")
    return order


class CausalDag:
    """Directed acyclic graph over named nodes; node order = column order."""

    __slots__ = ("nodes", "edges", "_topo")

    def __init__(self, nodes, edges):
        self.nodes = tuple(nodes)
        edge_list = [tuple(e) for e in edges]
        if len(set(edge_list)) != len(edge_list):
            raise GraphError("duplicate edges")
        self.edges = frozenset(edge_list)
        _check_nodes_and_edges(self.nodes, self.edges)
        self._topo = tuple(_kahn(self.nodes, self.edges))  # validates acyclicity

    def parents(self, v: str) -> list[str]:
        self._require(v)
        position = {n: i for i, n in enumerate(self.nodes)}
        return sorted((u for u, c in self.edges if c == v), key=position.__getitem__)

    def children(self, v: str) -> list[str]:
        self._require(v)
        position = {n: i for i, n in enumerate(self.nodes)}
        return sorted((c for u, c in self.edges if u == v), key=position.__getitem__)

    def skeleton(self) -> frozenset[frozenset[str]]:
        return frozenset(frozenset(e) for e in self.edges)

    def _require(self, v: str) -> None:
        if v not in self.nodes:
            raise GraphError(f"unknown node {v!r}")

    def __eq__(self, other):
        if not isinstance(other, CausalDag):
            return NotImplemented
        return self.nodes == other.nodes and self.edges == other.edges

    def __hash__(self):
        return hash((self.nodes, self.edges))

    def __repr__(self):
        return f"CausalDag(nodes={list(self.nodes)}, edges={sorted(self.edges)})"


class Cpdag:
    """Partially directed graph: directed edge set plus undirected pair set."""

    __slots__ = ("nodes", "directed", "undirected")

    def __init__(self, nodes, directed, undirected):
        self.nodes = tuple(nodes)
        self.directed = frozenset(tuple(e) for e in directed)
        und = set()
        for pair in undirected:
            a, b = tuple(pair)
            if a == b:
                raise GraphError(f"self-loop on {a!r}")
            und.add(frozenset((a, b)))
        self.undirected = frozenset(und)
        _check_nodes_and_edges(self.nodes, self.directed)
        _check_nodes_and_edges(self.nodes, [tuple(sorted(p)) for p in self.undirected])
        directed_adj = {frozenset(e) for e in self.directed}
        if directed_adj & self.undirected:
            raise GraphError("edge is both directed and undirected")
        if len(directed_adj) != len(self.directed):
            raise GraphError("two-cycle in directed edges")
        _kahn(self.nodes, self.directed)  # directed subgraph must be acyclic

    def directed_parents(self, v: str) -> list[str]:
        position = {n: i for i, n in enumerate(self.nodes)}
        return sorted((u for u, c in self.directed if c == v), key=position.__getitem__)

    def has_undirected_adjacency(self, v: str) -> bool:
        return any(v in pair for pair in self.undirected)

    def has_directed_adjacency(self, v: str) -> bool:
        return any(v in e for e in self.directed)

    def skeleton(self) -> frozenset[frozenset[str]]:
        return frozenset(frozenset(e) for e in self.directed) | self.undirected

    def __eq__(self, other):
        if not isinstance(other, Cpdag):
            return NotImplemented
        return (
            self.nodes == other.nodes
            and self.directed == other.directed
            and self.undirected == other.undirected
        )

    def __hash__(self):
        return hash((self.nodes, self.directed, self.undirected))

    def __repr__(self):
        return (
            f"Cpdag(nodes={list(self.nodes)}, directed={sorted(self.directed)}, "
            f"undirected={sorted(tuple(sorted(p)) for p in self.undirected)})"
        )


def dag_as_cpdag(g: CausalDag) -> Cpdag:
    """Fully directed CPDAG view of a DAG."""
    return Cpdag(g.nodes, g.edges, ())


# -- orderings and structural queries -------------------------------------


def topological_order(g: CausalDag) -> list[str]:
    """Parents-before-children order; column order breaks ties."""
    return list(g._topo)


def reverse_topological_order(g: CausalDag) -> list[str]:
    """Children-before-parents order (worst case for autoregression)."""
    return list(reversed(g._topo))


def v_structures(g: CausalDag) -> set[tuple[str, str, str]]:
    """All collider triples (a, c, b): a -> c <- b with a, b non-adjacent.

    Canonical form puts the parent earlier in column order first.
    """
    position = {n: i for i, n in enumerate(g.nodes)}
    adjacent = {frozenset(e) for e in g.edges}
    out = set()
    for c in g.nodes:
        pars = g.parents(c)
        for i in range(len(pars)):
            for j in range(i + 1, len(pars)):
                a, b = pars[i], pars[j]
                if frozenset((a, b)) not in adjacent:
                    if position[a] > position[b]:
                        a, b = b, a
                    out.add((a, c, b))
    return out


def minimal_cpdag(g: CausalDag) -> Cpdag:
    """Orient only the v-structure edges; leave the rest of the skeleton
    undirected. Deliberately applies no orientation propagation."""
    directed = set()
    for a, c, b in v_structures(g):
        directed.add((a, c))
        directed.add((b, c))
    undirected = {frozenset(e) for e in g.edges} - {frozenset(e) for e in directed}
    return Cpdag(g.nodes, directed, undirected)


def is_fully_directed(g: Cpdag, v: str) -> bool:
    """True iff every edge touching v is directed and there is at least one."""
    if v not in g.nodes:
        raise GraphError(f"unknown node {v!r}")
    return g.has_directed_adjacency(v) and not g.has_undirected_adjacency(v)


# -- generation plans ------------------------------------------------------


@dataclass(frozen=True)
class GenerationPlan:
    """Executable conditioning recipe: generation order plus the ordered
    conditioning set of every variable."""

    order: tuple[str, ...]
    conditioning: dict[str, tuple[str, ...]]
    strategy: str

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise GraphError(f"unknown strategy {self.strategy!r}")
        seen: set[str] = set()
        for v in self.order:
            missing = [c for c in self.conditioning[v] if c not in seen]
            if missing:
                raise GraphError(
                    f"conditioning of {v!r} uses {missing!r} before generation"
                )
            seen.add(v)
        if set(self.conditioning) != set(self.order):
            raise GraphError("conditioning keys do not match plan order")

    def conditioning_sets(self) -> dict[str, frozenset[str]]:
        return {v: frozenset(c) for v, c in self.conditioning.items()}


def build_plan(strategy: str, columns, graph=None) -> GenerationPlan:
    """Construct the GenerationPlan for one strategy.

    ``columns`` is the column order of the table (already reordered if an
    alternative ordering is wanted for the vanilla strategy). ``graph``
    must be a CausalDag for ``dag`` and a Cpdag for ``cpdag``.
    """
    columns = list(columns)
    if strategy == VANILLA:
        conditioning = {
            v: tuple(columns[:i]) for i, v in enumerate(columns)
        }
        return GenerationPlan(tuple(columns), conditioning, VANILLA)

    if graph is None:
        raise GraphError(f"strategy {strategy!r} requires a graph")
    if sorted(graph.nodes) != sorted(columns):
        raise GraphError("graph nodes do not match table columns")

    if strategy == DAG:
        if not isinstance(graph, CausalDag):
            raise GraphError("dag strategy requires a fully directed graph")
        aligned = _align(graph, columns)
        order = topological_order(aligned)
        conditioning = {v: tuple(aligned.parents(v)) for v in columns}
        return GenerationPlan(tuple(order), conditioning, DAG)

    if strategy == CPDAG:
        if isinstance(graph, CausalDag):
            graph = dag_as_cpdag(graph)
        graph = Cpdag(tuple(columns), graph.directed, graph.undirected)
        directed_topo = _kahn(graph.nodes, graph.directed)
        block = [v for v in directed_topo if graph.has_directed_adjacency(v)]
        rest = [v for v in columns if v not in block]
        order = block + rest
        conditioning = {}
        for i, v in enumerate(order):
            if is_fully_directed(graph, v):
                conditioning[v] = tuple(graph.directed_parents(v))
            else:
                conditioning[v] = tuple(order[:i])
        return GenerationPlan(tuple(order), conditioning, CPDAG)

    raise GraphError(f"unknown strategy {strategy!r}")


def _align(g: CausalDag, columns: list[str]) -> CausalDag:
    """Re-anchor a DAG's node order to the table's column order."""
    if tuple(columns) == g.nodes:
        return g
    return CausalDag(tuple(columns), g.edges)


# -- graph file I/O --------------------------------------------------------


def graph_to_obj(g: CausalDag | Cpdag) -> dict:
    if isinstance(g, CausalDag):
        g = dag_as_cpdag(g)
    return {
        "nodes": list(g.nodes),
        "directed": sorted([u, v] for u, v in g.directed),
        "undirected": sorted(sorted(pair) for pair in g.undirected),
    }


def graph_from_obj(obj) -> Cpdag:
    try:
        return Cpdag(
            tuple(obj["nodes"]),
            [tuple(e) for e in obj.get("directed", ())],
            [tuple(e) for e in obj.get("undirected", ())],
        )
    except (KeyError, TypeError) as exc:
        raise GraphError(f"malformed graph object: {exc}") from exc


def load_graph(path) -> Cpdag:
    with open(path, encoding="utf-8") as fh:
        return graph_from_obj(json.load(fh))


def save_graph(path, g: CausalDag | Cpdag) -> None:
    atomic_write_text(path, json.dumps(graph_to_obj(g), indent=2) + "\n")


def require_dag(g: Cpdag) -> CausalDag:
    """Interpret a graph file as a DAG; rejects undirected edges."""
    if g.undirected:
        raise GraphError("graph has undirected edges where a DAG is required")
    return CausalDag(g.nodes, g.directed)
