"""Peer influence under independent attackers and colluding peer sets.

Influence experiments deliberately run with unlimited budgets and no churn,
over a symmetrized, unweighted view of the graph restricted to its largest
connected component, so the measurements reflect topology and mapping only.
One n-hop neighborhood request is issued per user, submitted to the user's
own peer; every peer that serves a secondary portion is tallied, excluding
the source peer.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import networkx as nx
import numpy as np

from .mapping import MappingPlan, PeerId, _as_nx


@dataclass
class InfluenceLedger:
    num_peers: int
    total_requests: int
    served: np.ndarray  # per-peer serviced-request counts
    # per-request serving-peer sets, flattened for fast collusion queries
    flat: np.ndarray
    offsets: np.ndarray  # len total_requests + 1

    def influence(self, peer: PeerId) -> float:
        return float(self.served[peer]) / self.total_requests

    def influences(self) -> np.ndarray:
        return self.served / self.total_requests

    def mean_influence(self) -> float:
        return float(self.served.sum()) / (self.num_peers * self.total_requests)

    def serving_set(self, request_index: int) -> np.ndarray:
        return self.flat[self.offsets[request_index] : self.offsets[request_index + 1]]


def _adjacency(graph) -> tuple[list, dict, list[list[int]]]:
    """Symmetrized, unweighted adjacency over the largest connected component."""
    G = _as_nx(graph)
    if G.number_of_nodes() == 0:
        raise ValueError("empty graph")
    if not nx.is_connected(G):
        G = G.subgraph(max(nx.connected_components(G), key=lambda c: (len(c), -min(c))))
    nodes = sorted(G.nodes())
    index = {u: i for i, u in enumerate(nodes)}
    adj: list[list[int]] = [[] for _ in nodes]
    for u, v in G.edges():
        adj[index[u]].append(index[v])
        adj[index[v]].append(index[u])
    for lst in adj:
        lst.sort()
    return nodes, index, adj


def run_influence_experiment(
    graph, plan: MappingPlan, hops: int
) -> InfluenceLedger:
    """Tally, for every user's n-hop request, the peers serving secondary
    portions: the peers trusted by the users expanded at hops 1..n-1, minus
    the source peer."""
    nodes, _index, adj = _adjacency(graph)
    peer_of = np.array([plan.primary_peer(u) for u in nodes], dtype=np.int64)
    served = np.zeros(plan.num_peers, dtype=np.int64)
    flat_parts: list[np.ndarray] = []
    offsets = [0]
    n = len(nodes)
    for ego in range(n):
        source_peer = peer_of[ego]
        seen = bytearray(n)
        seen[ego] = 1
        frontier = [ego]
        serving: set[int] = set()
        for _hop in range(1, hops):
            nxt = []
            for u in frontier:
                for v in adj[u]:
                    if not seen[v]:
                        seen[v] = 1
                        nxt.append(v)
                        p = peer_of[v]
                        if p != source_peer:
                            serving.add(int(p))
            frontier = nxt
            if not frontier:
                break
        arr = np.fromiter(sorted(serving), dtype=np.int64, count=len(serving))
        served[arr] += 1
        flat_parts.append(arr)
        offsets.append(offsets[-1] + len(arr))
    flat = (
        np.concatenate(flat_parts) if flat_parts else np.empty(0, dtype=np.int64)
    )
    return InfluenceLedger(
        num_peers=plan.num_peers,
        total_requests=n,
        served=served,
        flat=flat,
        offsets=np.array(offsets, dtype=np.int64),
    )


# -- collusion -------------------------------------------------------------


@dataclass(frozen=True)
class CollusionConfig:
    kind: str  # random | social
    seed_fraction: float = 0.01
    target_fraction: float = 0.1  # C
    repetitions: int = 10


def peer_adjacency(graph, plan: MappingPlan) -> list[set]:
    """Peers are adjacent when their trusted users share a social edge."""
    nodes, index, adj = _adjacency(graph)
    peer_of = [plan.primary_peer(u) for u in nodes]
    out: list[set] = [set() for _ in range(plan.num_peers)]
    for u in range(len(nodes)):
        pu = peer_of[u]
        for v in adj[u]:
            pv = peer_of[v]
            if pu != pv:
                out[pu].add(pv)
                out[pv].add(pu)
    return out


def build_collusion(
    plan: MappingPlan,
    config: CollusionConfig,
    graph=None,
    seed: int = 0,
) -> list[set]:
    """Seed 1% random peers, then expand each seed's set round-robin until
    the union reaches round(C * num_peers) colluders."""
    sizes = grow_collusion_series(plan, config, [config.target_fraction], graph, seed)
    return sizes[config.target_fraction]


def grow_collusion_series(
    plan: MappingPlan,
    config: CollusionConfig,
    fractions: Sequence[float],
    graph=None,
    seed: int = 0,
) -> dict:
    """One nested growth process snapshotted at each fraction, so the
    colluder union at a larger C contains the union at a smaller C."""
    if config.kind not in ("random", "social"):
        raise ValueError(f"unknown collusion kind {config.kind!r}")
    num_peers = plan.num_peers
    fractions = sorted(fractions)
    if config.seed_fraction > fractions[0]:
        raise ValueError("seed fraction exceeds smallest target fraction")
    rng = np.random.default_rng(seed)
    n_seeds = max(1, round(config.seed_fraction * num_peers))
    seeds = [int(p) for p in rng.choice(num_peers, size=n_seeds, replace=False)]
    sets: list[set] = [{s} for s in seeds]
    members: set = set(seeds)
    adjacency = (
        peer_adjacency(graph, plan) if config.kind == "social" else None
    )
    fell_back = False
    snapshots: dict = {}
    targets = iter(fractions)
    target = next(targets)
    goal = round(target * num_peers)
    i = 0
    while True:
        while len(members) >= goal:
            snapshots[target] = [set(s) for s in sets]
            nxt = next(targets, None)
            if nxt is None:
                if fell_back:
                    warnings.warn(
                        "social expansion exhausted adjacent peers; "
                        "filled with random peers",
                        stacklevel=2,
                    )
                return snapshots
            target = nxt
            goal = round(target * num_peers)
        grown = _grow_one(sets[i % len(sets)], members, num_peers, adjacency, rng)
        if grown is None:
            fell_back = fell_back or adjacency is not None
            free = sorted(set(range(num_peers)) - members)
            pick = int(free[rng.integers(len(free))])
            sets[i % len(sets)].add(pick)
            members.add(pick)
        i += 1


def _grow_one(
    s: set, members: set, num_peers: int, adjacency: Optional[list], rng
) -> Optional[int]:
    if adjacency is None:
        free = sorted(set(range(num_peers)) - members)
        if not free:
            return None
        pick = int(free[rng.integers(len(free))])
        s.add(pick)
        members.add(pick)
        return pick
    # social growth: strongest-connected adjacent non-member, ties by id
    counts: dict = {}
    for p in s:
        for q in adjacency[p]:
            if q not in members:
                counts[q] = counts.get(q, 0) + 1
    if not counts:
        return None
    pick = max(counts, key=lambda q: (counts[q], -q))
    s.add(pick)
    members.add(pick)
    return pick


def set_influence(ledger: InfluenceLedger, colluders: Iterable[PeerId]) -> float:
    """Fraction of requests in which any colluder serviced a part."""
    mask = np.zeros(ledger.num_peers, dtype=bool)
    mask[np.fromiter(colluders, dtype=np.int64)] = True
    if ledger.flat.size == 0:
        return 0.0
    hits = mask[ledger.flat]
    per_request = np.maximum.reduceat(hits, ledger.offsets[:-1])
    per_request[ledger.offsets[:-1] == ledger.offsets[1:]] = False
    return float(per_request.sum()) / ledger.total_requests


def mean_ci(values: Sequence[float]) -> tuple[float, float]:
    """Mean and 95% confidence half-width (normal approximation)."""
    arr = np.asarray(values, dtype=float)
    mean = float(arr.mean())
    if arr.size < 2:
        return mean, 0.0
    half = 1.96 * float(arr.std(ddof=1)) / np.sqrt(arr.size)
    return mean, half
