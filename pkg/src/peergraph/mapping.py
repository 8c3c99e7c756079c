"""User-to-peer assignment: random, and social via community detection.

Social mappings come in two flavors: an exact Girvan-Newman style split
driven by edge betweenness (small graphs only; betweenness is recomputed
after every removal) and a recursive Louvain split for large graphs, with
community counts steered toward a target average size.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Optional

import networkx as nx
import numpy as np

from .graph import SocialMultiGraph, Uid

PeerId = int


@dataclass
class MappingPlan:
    assignment: dict  # uid -> tuple of peer ids (len == replication)
    num_peers: int
    kind: str  # random | social
    replication: int = 1
    communities: Optional[list] = None
    best_effort: bool = False

    def peers_of(self, uid: Uid) -> tuple:
        return self.assignment[uid]

    def primary_peer(self, uid: Uid) -> PeerId:
        return self.assignment[uid][0]

    def users_of_peer(self) -> dict:
        out: dict = {p: set() for p in range(self.num_peers)}
        for uid, peers in self.assignment.items():
            for p in peers:
                out[p].add(uid)
        return out

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            for uid in sorted(self.assignment):
                writer.writerow([uid, *self.assignment[uid]])

    @staticmethod
    def from_csv(path, kind: str = "random") -> "MappingPlan":
        assignment = {}
        peers = set()
        with open(path, newline="") as fh:
            for row in csv.reader(fh):
                uid = int(row[0])
                ps = tuple(int(x) for x in row[1:])
                assignment[uid] = ps
                peers.update(ps)
        repl = max((len(p) for p in assignment.values()), default=1)
        return MappingPlan(assignment, max(peers) + 1 if peers else 0, kind, repl)


def _as_nx(graph) -> nx.Graph:
    """Undirected simple view; parallel labels collapse to a single edge."""
    if isinstance(graph, nx.Graph):
        return graph.to_undirected() if graph.is_directed() else graph
    g = nx.Graph()
    g.add_nodes_from(graph.vertices())
    for e in graph.edges():
        g.add_edge(e.ego, e.alter)
    return g


# -- random mapping --------------------------------------------------------


def random_mapping(
    users: Iterable[Uid],
    num_peers: int,
    replication: int = 1,
    seed: int = 0,
) -> MappingPlan:
    """Each user gets ``replication`` distinct peers; each replica round is a
    balanced deal, so K=1 on an even split yields equal peer loads."""
    users = sorted(users)
    if replication > num_peers:
        raise ValueError("replication factor exceeds peer count")
    rng = np.random.default_rng(seed)
    assignment: dict = {u: [] for u in users}
    for _round in range(replication):
        order = rng.permutation(len(users))
        collisions = []
        for slot, upos in enumerate(order):
            u = users[upos]
            p = slot % num_peers
            if p in assignment[u]:
                collisions.append(u)
            else:
                assignment[u].append(p)
        for u in collisions:
            free = [p for p in range(num_peers) if p not in assignment[u]]
            assignment[u].append(int(free[rng.integers(len(free))]))
    return MappingPlan(
        {u: tuple(ps) for u, ps in assignment.items()},
        num_peers,
        "random",
        replication,
    )


# -- social mapping: Girvan-Newman variant ---------------------------------


def girvan_newman_communities(
    graph, num_communities: int, min_size: int = 1
) -> tuple[list[set], bool]:
    """Remove max-betweenness edges, accepting a split only when every new
    piece reaches ``min_size``; betweenness is recomputed after each removal.
    Returns (communities, best_effort_flag)."""
    H = _as_nx(graph).copy()
    best_effort = False
    while nx.number_connected_components(H) < num_communities:
        if H.number_of_edges() == 0:
            best_effort = True
            break
        bt = nx.edge_betweenness_centrality(H)
        candidates = sorted(bt, key=lambda e: (-bt[e], e))
        removed = False
        for u, v in candidates:
            H.remove_edge(u, v)
            if nx.has_path(H, u, v):
                removed = True  # no split yet; keep peeling
                break
            a = nx.node_connected_component(H, u)
            b = nx.node_connected_component(H, v)
            if len(a) >= min_size and len(b) >= min_size:
                removed = True
                break
            H.add_edge(u, v)
        if not removed:
            best_effort = True
            break
    comms = [set(c) for c in nx.connected_components(H)]
    comms.sort(key=lambda c: min(c))
    if best_effort:
        warnings.warn(
            f"could not reach {num_communities} communities of size >= {min_size}; "
            f"returning {len(comms)}",
            stacklevel=2,
        )
    return comms, best_effort


# -- social mapping: recursive Louvain -------------------------------------


def louvain_communities_sized(
    graph, target_avg_size: float, seed: int = 0
) -> list[set]:
    """Louvain, recursively splitting oversized communities, then greedily
    merging the smallest into their best-connected neighbor until the count
    matches ``round(n / target_avg_size)``."""
    G = _as_nx(graph)
    n = G.number_of_nodes()
    if n == 0:
        return []
    target_count = max(1, round(n / target_avg_size))
    work = [set(c) for c in nx.community.louvain_communities(G, seed=seed)]
    out: list[set] = []
    while work:
        c = work.pop()
        if len(c) <= max(1.5 * target_avg_size, 2):
            out.append(c)
            continue
        sub = G.subgraph(c)
        parts = [set(p) for p in nx.community.louvain_communities(sub, seed=seed)]
        if len(parts) == 1:
            nodes = sorted(c)
            step = max(1, int(target_avg_size))
            out.extend(set(nodes[i : i + step]) for i in range(0, len(nodes), step))
            continue
        work.extend(parts)
    out.sort(key=lambda c: min(c))
    if len(out) > target_count:
        out = _merge_smallest(G, out, target_count)
    return out


def _merge_smallest(G: nx.Graph, comms: list[set], target_count: int) -> list[set]:
    comm_of = {}
    comms = [set(c) for c in comms]
    for i, c in enumerate(comms):
        for u in c:
            comm_of[u] = i
    alive = set(range(len(comms)))
    # inter-community edge counts
    inter: dict = {}
    for u, v in G.edges():
        a, b = comm_of[u], comm_of[v]
        if a != b:
            key = (min(a, b), max(a, b))
            inter[key] = inter.get(key, 0) + 1
    while len(alive) > target_count:
        smallest = min(alive, key=lambda i: (len(comms[i]), min(comms[i])))
        neighbors = {}
        for (a, b), cnt in inter.items():
            if a == smallest and b in alive:
                neighbors[b] = neighbors.get(b, 0) + cnt
            elif b == smallest and a in alive:
                neighbors[a] = neighbors.get(a, 0) + cnt
        if neighbors:
            tgt = max(neighbors, key=lambda i: (neighbors[i], -len(comms[i]), -i))
        else:
            tgt = min(
                (i for i in alive if i != smallest),
                key=lambda i: (len(comms[i]), min(comms[i])),
            )
        comms[tgt] |= comms[smallest]
        for u in comms[smallest]:
            comm_of[u] = tgt
        alive.discard(smallest)
        for (a, b) in list(inter):
            if smallest in (a, b):
                cnt = inter.pop((a, b))
                other = b if a == smallest else a
                if other != tgt and other in alive:
                    key = (min(other, tgt), max(other, tgt))
                    inter[key] = inter.get(key, 0) + cnt
    out = [comms[i] for i in sorted(alive, key=lambda i: min(comms[i]))]
    return out


# -- community plans -------------------------------------------------------


def _replicate_socially(
    G: nx.Graph,
    communities: list[set],
    peer_of_comm: list[PeerId],
    replication: int,
    rng: np.random.Generator,
) -> dict:
    """Primary replica on the community's peer; extras on the peers of the
    most strongly connected adjacent communities."""
    comm_of = {}
    for i, c in enumerate(communities):
        for u in c:
            comm_of[u] = i
    adjacency: dict = {i: {} for i in range(len(communities))}
    for u, v in G.edges():
        a, b = comm_of[u], comm_of[v]
        if a != b:
            adjacency[a][b] = adjacency[a].get(b, 0) + 1
            adjacency[b][a] = adjacency[b].get(a, 0) + 1
    num_peers = len(communities)
    assignment = {}
    for i, c in enumerate(communities):
        ranked = sorted(
            adjacency[i], key=lambda j: (-adjacency[i][j], j)
        )
        extra_peers = [peer_of_comm[j] for j in ranked[: replication - 1]]
        while len(extra_peers) < replication - 1:
            p = int(rng.integers(num_peers))
            if p != peer_of_comm[i] and p not in extra_peers:
                extra_peers.append(p)
        for u in sorted(c):
            assignment[u] = (peer_of_comm[i], *extra_peers)
    return assignment


def plan_from_communities(
    graph,
    communities: list[set],
    replication: int = 1,
    seed: int = 0,
    best_effort: bool = False,
) -> MappingPlan:
    """One peer per community; the community-to-peer match is a seeded random
    permutation (communities land on arbitrary peers, not nearby ones)."""
    G = _as_nx(graph)
    rng = np.random.default_rng(seed)
    perm = rng.permutation(len(communities))
    peer_of_comm = [int(p) for p in perm]
    if replication <= 1:
        assignment = {
            u: (peer_of_comm[i],) for i, c in enumerate(communities) for u in c
        }
    else:
        assignment = _replicate_socially(
            G, communities, peer_of_comm, replication, rng
        )
    return MappingPlan(
        assignment,
        len(communities),
        "social",
        replication,
        communities=communities,
        best_effort=best_effort,
    )


def social_mapping_betweenness(
    graph,
    num_communities: int,
    min_size: int = 1,
    replication: int = 1,
    seed: int = 0,
) -> MappingPlan:
    comms, best_effort = girvan_newman_communities(graph, num_communities, min_size)
    return plan_from_communities(graph, comms, replication, seed, best_effort)


def social_mapping_louvain(
    graph,
    target_avg_size: float,
    replication: int = 1,
    seed: int = 0,
) -> MappingPlan:
    comms = louvain_communities_sized(graph, target_avg_size, seed)
    return plan_from_communities(graph, comms, replication, seed)
