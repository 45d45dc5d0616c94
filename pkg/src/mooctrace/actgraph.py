"""Directed activity multigraphs and their structural metrics.

Consecutive token pairs of a footprint sequence become weight-1 directed
edges, keeping self-loops and parallel edges. Metrics read activity
persistence and organization out of the structure: density (can exceed 1),
self-loop count, strongly connected components, indegree-central
activities, and the transition with maximal edge betweenness.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from fractions import Fraction

from mooctrace.events import ActivityToken

EdgePair = tuple[ActivityToken, ActivityToken]


@dataclass(frozen=True)
class ActivityGraph:
    """Directed multigraph over activity tokens; edges kept in sequence order."""

    nodes: frozenset[ActivityToken]
    edges: tuple[EdgePair, ...]

    @property
    def num_nodes(self) -> int:
        return len(self.nodes)

    @property
    def num_edges(self) -> int:
        return len(self.edges)


@dataclass(frozen=True)
class GraphMetrics:
    num_nodes: int
    num_edges: int
    density: float
    num_self_loops: int
    num_scc: int
    top_indegree: tuple[tuple[ActivityToken, float], ...]
    central_transition: tuple[EdgePair, float] | None


def build_graph(seq) -> ActivityGraph:
    """Build the activity graph from a footprint sequence (or token list)."""
    tokens = tuple(getattr(seq, "tokens", seq))
    edges = tuple(zip(tokens, tokens[1:]))
    return ActivityGraph(frozenset(tokens), edges)


def density(g: ActivityGraph) -> float:
    """m / n(n-1); exceeds 1 when self-loops/parallel edges are plentiful.

    Defined as 0.0 for graphs with fewer than two nodes, where a density
    reading is uninformative (self-loop count carries persistence there).
    """
    n = g.num_nodes
    if n <= 1:
        return 0.0
    return g.num_edges / (n * (n - 1))


def count_self_loops(g: ActivityGraph) -> int:
    """Number of edges from a node to itself, counted with multiplicity."""
    return sum(1 for u, v in g.edges if u == v)


def _adjacency(g: ActivityGraph) -> dict[ActivityToken, list[ActivityToken]]:
    """Simple-digraph successors (parallel edges collapsed), sorted for determinism."""
    succ: dict[ActivityToken, set[ActivityToken]] = {v: set() for v in g.nodes}
    for u, v in g.edges:
        succ[u].add(v)
    return {u: sorted(vs) for u, vs in succ.items()}


def count_scc(g: ActivityGraph) -> int:
    """Number of strongly connected components (Tarjan); 0 for the empty graph."""
    succ = _adjacency(g)
    index: dict[ActivityToken, int] = {}
    lowlink: dict[ActivityToken, int] = {}
    on_stack: set[ActivityToken] = set()
    stack: list[ActivityToken] = []
    counter = 0
    n_scc = 0

    def strongconnect(v: ActivityToken) -> None:
        nonlocal counter, n_scc
        index[v] = lowlink[v] = counter
        counter += 1
        stack.append(v)
        on_stack.add(v)
        for w in succ[v]:
            if w not in index:
                strongconnect(w)
                lowlink[v] = min(lowlink[v], lowlink[w])
            elif w in on_stack:
                lowlink[v] = min(lowlink[v], index[w])
        if lowlink[v] == index[v]:
            n_scc += 1
            while True:
                w = stack.pop()
                on_stack.discard(w)
                if w == v:
                    break

    # Node count is bounded by the 15-token alphabet, so recursion is shallow.
    for v in sorted(g.nodes):
        if v not in index:
            strongconnect(v)
    return n_scc


def indegree_centrality(g: ActivityGraph) -> dict[ActivityToken, float]:
    """Indegree (with multiplicity, self-loops included) over n-1."""
    indeg = {v: 0 for v in g.nodes}
    for _, v in g.edges:
        indeg[v] += 1
    n = g.num_nodes
    if n <= 1:
        return {v: 0.0 for v in g.nodes}
    return {v: indeg[v] / (n - 1) for v in g.nodes}


def top_indegree(
    g: ActivityGraph, k: int = 3
) -> list[tuple[ActivityToken, float]]:
    """The k most indegree-central activities, ties broken by token order."""
    if k < 1:
        raise ValueError("k must be >= 1")
    centrality = indegree_centrality(g)
    ranked = sorted(centrality.items(), key=lambda item: (-item[1], item[0].value))
    return ranked[:k]


def edge_betweenness(g: ActivityGraph) -> dict[EdgePair, Fraction]:
    """Normalized edge betweenness on the collapsed simple digraph.

    Self-loops are excluded and parallel edges collapse to one: shortest
    paths never traverse a loop and multiplicity does not change path
    structure. For each ordered node pair (s, t) with s != t and at least
    one path, an edge accumulates the fraction of shortest s-t paths
    passing through it; the sum is normalized by 1/(n(n-1)).

    Computed in exact rational arithmetic; the alphabet bounds node count
    at 15, so this stays cheap and makes tie-breaks exact.
    """
    succ = {
        u: [v for v in vs if v != u] for u, vs in _adjacency(g).items()
    }
    nodes = sorted(g.nodes)
    n = len(nodes)
    betweenness: dict[EdgePair, Fraction] = {
        (u, v): Fraction(0) for u in succ for v in succ[u]
    }
    if n < 2:
        return betweenness

    norm = Fraction(1, n * (n - 1))
    for source in nodes:
        # BFS from source: distances, path counts, shortest-path predecessors.
        dist = {source: 0}
        sigma = {source: 1}
        preds: dict[ActivityToken, list[ActivityToken]] = {v: [] for v in nodes}
        order: list[ActivityToken] = []
        queue = deque([source])
        while queue:
            v = queue.popleft()
            order.append(v)
            for w in succ[v]:
                if w not in dist:
                    dist[w] = dist[v] + 1
                    sigma[w] = 0
                    queue.append(w)
                if dist[w] == dist[v] + 1:
                    sigma[w] += sigma[v]
                    preds[w].append(v)
        # Accumulate edge dependencies in reverse BFS order.
        delta = {v: Fraction(0) for v in order}
        for w in reversed(order):
            for v in preds[w]:
                contribution = Fraction(sigma[v], sigma[w]) * (1 + delta[w])
                betweenness[(v, w)] += contribution
                delta[v] += contribution
    return {e: bc * norm for e, bc in betweenness.items()}


def central_transition(g: ActivityGraph) -> tuple[EdgePair, float] | None:
    """The non-loop edge with maximal betweenness, or None without one.

    Exact ties break by (from, to) token order.
    """
    betweenness = edge_betweenness(g)
    if not betweenness:
        return None
    best = max(
        betweenness.items(),
        key=lambda item: (item[1], -item[0][0].value, -item[0][1].value),
    )
    return best[0], float(best[1])


def compute_metrics(g: ActivityGraph) -> GraphMetrics:
    """All structural metrics of one activity graph."""
    return GraphMetrics(
        num_nodes=g.num_nodes,
        num_edges=g.num_edges,
        density=density(g),
        num_self_loops=count_self_loops(g),
        num_scc=count_scc(g),
        top_indegree=tuple(top_indegree(g)),
        central_transition=central_transition(g),
    )


def export_dot(g: ActivityGraph, seq) -> str:
    """Graphviz DOT text with Be/En sentinel nodes around the sequence.

    Nodes are sized by indegree centrality and edges widened by parallel
    multiplicity. Sentinels are rendering-only: metrics never see them.
    """
    tokens = tuple(getattr(seq, "tokens", seq))
    centrality = indegree_centrality(g)

    multiplicity: dict[EdgePair, int] = {}
    for edge in g.edges:
        multiplicity[edge] = multiplicity.get(edge, 0) + 1

    lines = ["digraph activity {", "  rankdir=LR;"]
    lines.append('  "Be" [shape=doublecircle, width=0.30];')
    lines.append('  "En" [shape=doublecircle, width=0.30];')
    for v in sorted(g.nodes):
        width = 0.40 + 0.30 * centrality[v]
        lines.append(f'  "{v.name}" [shape=circle, width={width:.2f}];')
    if tokens:
        lines.append(f'  "Be" -> "{tokens[0].name}";')
    for (u, v) in sorted(multiplicity, key=lambda e: (e[0].value, e[1].value)):
        count = multiplicity[(u, v)]
        attrs = f' [penwidth={float(count):.1f}, label="{count}"]' if count > 1 else ""
        lines.append(f'  "{u.name}" -> "{v.name}"{attrs};')
    if tokens:
        lines.append(f'  "{tokens[-1].name}" -> "En";')
    lines.append("}")
    return "\n".join(lines) + "\n"


METRICS_CSV_HEADER = (
    "sid,courseweek,setup,num_nodes,num_edges,density,"
    "num_self_loops,num_scc,top_indegree,central_transition"
)


def metrics_csv_row(sid: int, courseweek: int, setup: str, m: GraphMetrics) -> str:
    """One CSV row keyed by (sid, courseweek, setup)."""
    top = ";".join(f"{tok.name}:{c:.6g}" for tok, c in m.top_indegree)
    if m.central_transition is not None:
        (u, v), bc = m.central_transition
        trans = f"{u.name}>{v.name}:{bc:.6g}"
    else:
        trans = ""
    return (
        f"{sid},{courseweek},{setup},{m.num_nodes},{m.num_edges},"
        f"{m.density:.6g},{m.num_self_loops},{m.num_scc},{top},{trans}"
    )
