"""User-to-peer mapping: balanced random placement, community detection,
replication, and plan serialization."""

import networkx as nx
import pytest

from peergraph.mapping import (
    MappingPlan,
    girvan_newman_communities,
    louvain_communities_sized,
    random_mapping,
    social_mapping_betweenness,
    social_mapping_louvain,
)
from peergraph.synthgraphs import benchmark_graph_nx


def barbell():
    """Two 5-cliques joined by a single bridge edge."""
    G = nx.Graph()
    for base in (0, 5):
        for i in range(base, base + 5):
            for j in range(i + 1, base + 5):
                G.add_edge(i, j)
    G.add_edge(4, 5)
    return G


# -- random mapping --------------------------------------------------------


def test_random_mapping_balanced():
    plan = random_mapping(range(100), 10, replication=1, seed=0)
    sizes = [len(s) for s in plan.users_of_peer().values()]
    assert sizes == [10] * 10


def test_random_mapping_replication_distinct_peers():
    plan = random_mapping(range(60), 6, replication=3, seed=1)
    for uid, peers in plan.assignment.items():
        assert len(peers) == 3
        assert len(set(peers)) == 3


def test_random_mapping_replication_bound():
    with pytest.raises(ValueError):
        random_mapping(range(10), 3, replication=4)


def test_random_mapping_deterministic():
    a = random_mapping(range(50), 5, seed=7).assignment
    b = random_mapping(range(50), 5, seed=7).assignment
    c = random_mapping(range(50), 5, seed=8).assignment
    assert a == b
    assert a != c


def test_random_mapping_replication_keeps_balance_loose():
    plan = random_mapping(range(100), 10, replication=3, seed=2)
    sizes = [len(s) for s in plan.users_of_peer().values()]
    assert sum(sizes) == 300
    # each round deals evenly; collision fixes add a small wobble
    assert max(sizes) <= 1.5 * (sum(sizes) / len(sizes))


# -- community detection ---------------------------------------------------


def test_bridge_split_on_barbell():
    comms, best_effort = girvan_newman_communities(barbell(), 2, min_size=3)
    assert not best_effort
    assert sorted(map(sorted, comms)) == [[0, 1, 2, 3, 4], [5, 6, 7, 8, 9]]


def test_single_community_no_split():
    comms, best_effort = girvan_newman_communities(barbell(), 1)
    assert not best_effort
    assert len(comms) == 1 and len(comms[0]) == 10


def test_min_size_blocks_tiny_splits():
    # a path graph cannot produce 3 communities of size >= 4 from 10 nodes
    G = nx.path_graph(10)
    with pytest.warns(UserWarning):
        comms, best_effort = girvan_newman_communities(G, 3, min_size=4)
    assert best_effort
    assert all(len(c) >= 4 for c in comms) or len(comms) < 3


def test_louvain_hits_target_count():
    G = benchmark_graph_nx(300, 3, 0.5, seed=0)
    comms = louvain_communities_sized(G, target_avg_size=10.0, seed=0)
    assert len(comms) == 30
    covered = set().union(*comms)
    assert covered == set(G.nodes())
    assert sum(len(c) for c in comms) == 300  # disjoint cover


def test_louvain_groups_cliques_together():
    comms = louvain_communities_sized(barbell(), target_avg_size=5.0, seed=0)
    assert sorted(map(sorted, comms)) == [[0, 1, 2, 3, 4], [5, 6, 7, 8, 9]]


# -- social mapping plans --------------------------------------------------


def test_social_mapping_betweenness_coherent():
    plan = social_mapping_betweenness(barbell(), 2, min_size=3, seed=0)
    assert plan.kind == "social"
    assert plan.num_peers == 2
    # each clique lands whole on one peer
    for clique in (range(0, 5), range(5, 10)):
        peers = {plan.primary_peer(u) for u in clique}
        assert len(peers) == 1


def test_social_mapping_louvain_plan():
    G = benchmark_graph_nx(300, 3, 0.5, seed=0)
    plan = social_mapping_louvain(G, target_avg_size=10.0, replication=2, seed=0)
    assert plan.num_peers == 30
    assert set(plan.assignment) == set(G.nodes())
    for uid, peers in plan.assignment.items():
        assert len(set(peers)) == 2
    # community members share their primary peer
    for comm in plan.communities:
        assert len({plan.primary_peer(u) for u in comm}) == 1


def test_social_mapping_fragments_less_than_random():
    """Adjacent users should co-reside more often under social mapping."""
    G = benchmark_graph_nx(300, 3, 0.5, seed=1)
    social = social_mapping_louvain(G, target_avg_size=10.0, seed=0)
    random_ = random_mapping(sorted(G.nodes()), 30, seed=0)

    def colocated(plan):
        return sum(
            plan.primary_peer(u) == plan.primary_peer(v) for u, v in G.edges()
        )

    assert colocated(social) > 2 * colocated(random_)


# -- serialization ---------------------------------------------------------


def test_plan_csv_round_trip(tmp_path):
    plan = random_mapping(range(20), 4, replication=2, seed=3)
    path = tmp_path / "plan.csv"
    plan.to_csv(path)
    again = MappingPlan.from_csv(path)
    assert again.assignment == plan.assignment
    assert again.num_peers == plan.num_peers
    assert again.replication == 2
