"""Synthetic social graphs for the experiment harness.

The small benchmark graph is a 1000-user power-law clustered graph with
bidirectional edges of initial weight 0.1.  Large trace-style surrogates are
built to a requested node and edge count by growing a power-law clustered
base and topping it up with preferential-attachment edges (adding edges
keeps the graph connected).
"""

from __future__ import annotations

import networkx as nx
import numpy as np

from .graph import SocialMultiGraph

DEFAULT_LABEL = "Facebook"
DEFAULT_WEIGHT = 0.1


def multigraph_from_nx(
    G: nx.Graph,
    weight: float = DEFAULT_WEIGHT,
    label: str = DEFAULT_LABEL,
    bidirectional: bool = True,
) -> SocialMultiGraph:
    g = SocialMultiGraph()
    for u in sorted(G.nodes()):
        g.add_vertex(int(u))
    for u, v in sorted(G.edges()):
        g.add_edge(int(u), int(v), label, weight)
        if bidirectional:
            g.add_edge(int(v), int(u), label, weight)
    return g


def benchmark_graph_nx(
    users: int = 1000, m: int = 3, p: float = 0.5, seed: int = 42
) -> nx.Graph:
    return nx.powerlaw_cluster_graph(users, m, p, seed=seed)


def benchmark_graph(
    users: int = 1000, m: int = 3, p: float = 0.5, seed: int = 42
) -> SocialMultiGraph:
    return multigraph_from_nx(benchmark_graph_nx(users, m, p, seed))


def surrogate_trace_graph_nx(
    users: int, edges: int, m: int = 3, p: float = 0.3, seed: int = 7
) -> nx.Graph:
    """Connected power-law graph with approximately the requested edge count."""
    G = nx.powerlaw_cluster_graph(users, m, p, seed=seed)
    rng = np.random.default_rng(seed)
    deficit = edges - G.number_of_edges()
    if deficit < 0:
        raise ValueError("base graph already has more edges than requested")
    nodes = np.array(sorted(G.nodes()))
    while deficit > 0:
        deg = np.array([G.degree(int(u)) for u in nodes], dtype=float)
        prob = deg / deg.sum()
        us = rng.choice(nodes, size=2 * deficit, p=prob)
        vs = rng.choice(nodes, size=2 * deficit, p=prob)
        for u, v in zip(us, vs):
            if deficit == 0:
                break
            u, v = int(u), int(v)
            if u != v and not G.has_edge(u, v):
                G.add_edge(u, v)
                deficit -= 1
    return G
