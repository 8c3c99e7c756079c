"""Distributed execution: equivalence with the centralized evaluation,
timeout-budget semantics, partial results, policies, and resilience-walk
consistency."""

import math

import numpy as np
import pytest

from peergraph.acp import AccessPolicy, Atom, PolicyStore, Rule
from peergraph.engine import DistributedEngine, build_overlay, hop_distance
from peergraph.graph import SocialMultiGraph
from peergraph.inference import InferenceParams, evaluate_centralized
from peergraph.mapping import random_mapping, social_mapping_louvain
from peergraph.overlay import LatencyConfig, ServiceUnavailableError, SimConfig
from peergraph.resilience import run_influence_experiment
from peergraph.synthgraphs import benchmark_graph_nx, multigraph_from_nx


def setup_engine(users=80, num_peers=8, replication=1, seed=0, latency="constant",
                 policies=None, graph_seed=2):
    G = benchmark_graph_nx(users, 3, 0.5, seed=graph_seed)
    g = multigraph_from_nx(G)
    plan = random_mapping(sorted(G.nodes()), num_peers, replication, seed=seed)
    sim = build_overlay(
        g, plan, SimConfig(rng_seed=seed, latency=LatencyConfig(kind=latency))
    )
    return g, plan, DistributedEngine(g, plan, sim, policies=policies)


INF = math.inf


# -- equivalence with centralized evaluation --------------------------------


def test_neighborhood_matches_centralized_with_infinite_budget():
    g, plan, eng = setup_engine()
    rid = 0
    for ego in range(0, 80, 7):
        for radius in (1, 2, 3):
            req = InferenceParams(
                kind="neighborhood", ego=ego, radius=radius, timeout=INF,
                request_id=rid,
            )
            rid += 1
            res = eng.execute(req, rid % plan.num_peers)
            assert res.value == evaluate_centralized(g, req).value
            assert res.completion == 1.0


def test_strength_matches_centralized_with_infinite_budget():
    g, plan, eng = setup_engine()
    rng = np.random.default_rng(0)
    for rid in range(40):
        a, b = rng.choice(80, size=2, replace=False)
        req = InferenceParams(
            kind="social_strength", ego=int(a), alter=int(b), timeout=INF,
            request_id=1000 + rid,
        )
        res = eng.execute(req, rid % plan.num_peers)
        assert res.value == pytest.approx(
            evaluate_centralized(g, req).value, abs=1e-9
        )
        assert res.completion == 1.0


def test_equivalence_holds_under_replication_and_social_mapping():
    G = benchmark_graph_nx(100, 3, 0.5, seed=4)
    g = multigraph_from_nx(G)
    plan = social_mapping_louvain(G, target_avg_size=10.0, replication=2, seed=0)
    eng = DistributedEngine(g, plan)
    for rid, ego in enumerate(range(0, 100, 11)):
        req = InferenceParams(
            kind="neighborhood", ego=ego, radius=3, timeout=INF, request_id=rid
        )
        res = eng.execute(req, rid % plan.num_peers)
        assert res.value == evaluate_centralized(g, req).value


def test_scalar_kinds_served_locally():
    g, plan, eng = setup_engine()
    req = InferenceParams(kind="relation_test", ego=0, alter=1, request_id=7)
    res = eng.execute(req, 3)
    assert res.value == evaluate_centralized(g, req).value
    req2 = InferenceParams(kind="top_relations", ego=0, n=3, request_id=8)
    res2 = eng.execute(req2, 3)
    assert res2.value == evaluate_centralized(g, req2).value


def test_proximity_distributed():
    g, plan, eng = setup_engine()
    g.set_location(0, 45.0, 9.0, 10.0)
    for u in list(g.out_neighbors(0))[:3]:
        g.set_location(u, 45.0005, 9.0, 10.0)  # ~55 m away
    req = InferenceParams(
        kind="proximity", ego=0, radius=1, distance=100.0, timestamp=0.0,
        timeout=INF, request_id=9,
    )
    res = eng.execute(req, 0)
    assert res.value == evaluate_centralized(g, req).value
    assert len(res.value) == 3


# -- budget semantics -------------------------------------------------------


def line_fixture():
    """0 -> 1 -> 2 -> 3 with each user on its own peer."""
    g = SocialMultiGraph()
    g.add_edge(0, 1, "a", 0.5)
    g.add_edge(1, 2, "a", 0.5)
    g.add_edge(2, 3, "a", 0.5)
    plan = random_mapping([0, 1, 2, 3], 4, seed=0)
    # place user i on peer i for readable accounting
    plan.assignment.update({u: (u,) for u in range(4)})
    sim = build_overlay(
        g, plan, SimConfig(rng_seed=0, latency=LatencyConfig(kind="constant", constant=1.0))
    )
    return g, plan, DistributedEngine(g, plan, sim)


def test_zero_timeout_serves_local_portion_only():
    g, plan, eng = line_fixture()
    req = InferenceParams(
        kind="neighborhood", ego=0, radius=3, timeout=0.0, request_id=1
    )
    res = eng.execute(req, 0)
    # the ego's peer expands one hop; no secondary budget at all
    assert res.value == {1}
    assert res.completion == pytest.approx(1 / 3)


def test_generous_timeout_reaches_everything():
    g, plan, eng = line_fixture()
    req = InferenceParams(
        kind="neighborhood", ego=0, radius=3, timeout=10.0, request_id=2
    )
    res = eng.execute(req, 0)
    assert res.value == {1, 2, 3}
    assert res.completion == 1.0


def test_budget_scales_with_remaining_hops():
    # constant RTT 1.0, processing 0.01.  Per level, budgets are 3T, 2T, T.
    # The innermost response arrives at its parent after 1.01 s (needs
    # 1.01 <= 2T) and the full chain reaches the ego's peer after 2.02 s
    # (needs 2.02 <= 3T), so T = 0.68 folds everything and T = 0.66 folds
    # nothing beyond the local hop.
    g, plan, eng = line_fixture()
    ok = eng.execute(
        InferenceParams(kind="neighborhood", ego=0, radius=3, timeout=0.68,
                        request_id=3),
        0,
    )
    assert ok.value == {1, 2, 3}
    g, plan, eng = line_fixture()
    late = eng.execute(
        InferenceParams(kind="neighborhood", ego=0, radius=3, timeout=0.66,
                        request_id=3),
        0,
    )
    assert late.value == {1}
    assert late.completion == pytest.approx(1 / 3)
    # a shallower request at the same T fits: budget 2T covers the 1.01 s hop
    g, plan, eng = line_fixture()
    shallow = eng.execute(
        InferenceParams(kind="neighborhood", ego=0, radius=2, timeout=0.66,
                        request_id=3),
        0,
    )
    assert shallow.value == {1, 2}


def test_completion_monotone_in_timeout():
    G = benchmark_graph_nx(120, 3, 0.5, seed=6)
    g = multigraph_from_nx(G)
    plan = random_mapping(sorted(G.nodes()), 12, seed=0)

    def mean_completion(T):
        sim = build_overlay(
            g, plan, SimConfig(rng_seed=0, latency=LatencyConfig(kind="lognormal"))
        )
        eng = DistributedEngine(g, plan, sim)
        cs = []
        for rid, ego in enumerate(range(0, 120, 5)):
            req = InferenceParams(
                kind="neighborhood", ego=ego, radius=3, timeout=T, request_id=rid
            )
            cs.append(eng.execute(req, rid % 12).completion)
        return float(np.mean(cs))

    sweep = [mean_completion(T) for T in (0.0, 0.05, 0.15, 0.4, 1.0, 5.0)]
    assert all(a <= b + 1e-12 for a, b in zip(sweep, sweep[1:]))
    assert sweep[0] < 1.0 and sweep[-1] == 1.0


def test_partial_result_is_subset_of_oracle():
    G = benchmark_graph_nx(120, 3, 0.5, seed=6)
    g = multigraph_from_nx(G)
    plan = random_mapping(sorted(G.nodes()), 12, seed=0)
    eng = DistributedEngine(g, plan, build_overlay(
        g, plan, SimConfig(rng_seed=0, latency=LatencyConfig(kind="lognormal"))
    ))
    for rid, ego in enumerate(range(0, 120, 9)):
        req = InferenceParams(
            kind="neighborhood", ego=ego, radius=3, timeout=0.1, request_id=rid
        )
        res = eng.execute(req, 0)
        oracle = evaluate_centralized(g, req).value
        assert res.value <= oracle
        assert res.completion == pytest.approx(
            len(res.value & oracle) / len(oracle) if oracle else 1.0
        )


def test_strength_degrades_gracefully():
    G = benchmark_graph_nx(120, 3, 0.5, seed=6)
    g = multigraph_from_nx(G)
    plan = random_mapping(sorted(G.nodes()), 12, seed=0)
    eng = DistributedEngine(g, plan, build_overlay(
        g, plan, SimConfig(rng_seed=0, latency=LatencyConfig(kind="lognormal"))
    ))
    req = InferenceParams(
        kind="social_strength", ego=0, alter=50, timeout=0.0, request_id=4
    )
    res = eng.execute(req, 0)
    full = evaluate_centralized(g, req).value
    assert 0.0 <= res.value <= full + 1e-12
    assert 0.0 <= res.completion <= 1.0


# -- availability -----------------------------------------------------------


def test_unreachable_user_raises():
    g, plan, eng = setup_engine()
    victim = 5
    for p in plan.peers_of(victim):
        eng.sim.peers[p].online = False
    with pytest.raises(ServiceUnavailableError):
        eng.execute(
            InferenceParams(kind="neighborhood", ego=victim, radius=1, request_id=1), 0
        )


def test_replication_masks_single_peer_failure():
    G = benchmark_graph_nx(60, 3, 0.5, seed=3)
    g = multigraph_from_nx(G)
    plan = random_mapping(sorted(G.nodes()), 6, replication=2, seed=0)
    sim = build_overlay(g, plan, SimConfig(rng_seed=0))
    eng = DistributedEngine(g, plan, sim)
    sim.peers[plan.primary_peer(0)].online = False
    req = InferenceParams(
        kind="neighborhood", ego=0, radius=2, timeout=INF, request_id=1
    )
    res = eng.execute(req, plan.peers_of(0)[1])
    assert res.value == evaluate_centralized(g, req).value


# -- policies ---------------------------------------------------------------


def one_hop_policy():
    """Each owner exposes edges only to originators at social distance 1."""
    return AccessPolicy(rules=[Rule(Atom("alpha"), Atom("rho", "1"))])


def test_policy_prunes_intermediate_expansion():
    g = SocialMultiGraph()
    for a, b in ((0, 1), (1, 2), (2, 3)):
        g.add_edge(a, b, "a", 0.5)
        g.add_edge(b, a, "a", 0.5)
    plan = random_mapping([0, 1, 2, 3], 2, seed=0)
    store = PolicyStore(default=one_hop_policy())
    eng = DistributedEngine(g, plan, policies=store)
    req = InferenceParams(
        kind="neighborhood", ego=0, radius=3, timeout=INF, request_id=1
    )
    res = eng.execute(req, 0)
    # user 1 is 1 hop from the ego and exposes onward edges; user 2 is 2 hops
    # away, so its edges to 3 stay hidden
    assert res.value == {1, 2}
    assert res.completion == 1.0  # completion is measured against the
    # policy-aware reachable set


def test_engine_and_centralized_agree_under_policies():
    G = benchmark_graph_nx(60, 3, 0.5, seed=9)
    g = multigraph_from_nx(G)
    plan = random_mapping(sorted(G.nodes()), 6, seed=0)
    store = PolicyStore(default=one_hop_policy())
    eng = DistributedEngine(g, plan, policies=store)
    from peergraph.inference import neighborhood

    for rid, ego in enumerate(range(0, 60, 13)):
        req = InferenceParams(
            kind="neighborhood", ego=ego, radius=2, timeout=INF, request_id=rid
        )
        res = eng.execute(req, 0)
        expected = neighborhood(
            g, ego, None, 0.0, 2, 0.0, eng._edge_policy(req)
        )
        assert res.value == expected


# -- accounting -------------------------------------------------------------


def test_messages_and_serving_peers_accounted():
    g, plan, eng = setup_engine(latency="constant")
    req = InferenceParams(
        kind="neighborhood", ego=0, radius=3, timeout=INF, request_id=5
    )
    before = eng.sim.messages_sent
    res = eng.execute(req, 3)
    assert res.messages_sent == eng.sim.messages_sent - before
    assert res.messages_sent >= 2  # at least forward + response
    assert res.serving_peers[0] == plan.primary_peer(0)
    assert res.elapsed > 0.0


def test_execute_deterministic():
    def once():
        g, plan, eng = setup_engine(latency="lognormal")
        req = InferenceParams(
            kind="neighborhood", ego=0, radius=3, timeout=0.5, request_id=5
        )
        res = eng.execute(req, 3)
        return res.value, res.completion, res.elapsed, res.messages_sent

    assert once() == once()


# -- fast influence walk consistency ----------------------------------------


def test_fast_walk_matches_engine_serving_sets():
    """The vectorized influence walk and the engine agree on which peers
    serve secondary portions (K=1, unlimited budget, no churn)."""
    G = benchmark_graph_nx(60, 3, 0.5, seed=12)
    g = multigraph_from_nx(G)
    plan = random_mapping(sorted(G.nodes()), 6, seed=1)
    ledger = run_influence_experiment(G, plan, hops=3)
    eng = DistributedEngine(g, plan)
    for rid, ego in enumerate(range(0, 60, 6)):
        req = InferenceParams(
            kind="neighborhood", ego=ego, radius=3, timeout=INF, request_id=rid
        )
        res = eng.execute(req, plan.primary_peer(ego))
        secondaries = set(res.serving_peers[1:]) - {plan.primary_peer(ego)}
        assert secondaries == set(ledger.serving_set(ego))


def test_hop_distance():
    g = SocialMultiGraph()
    g.add_edge(0, 1, "a", 0.5)
    g.add_edge(1, 2, "a", 0.5)
    assert hop_distance(g, 0, 0) == 0
    assert hop_distance(g, 0, 2) == 2
    assert hop_distance(g, 2, 0) is None  # directed
    assert hop_distance(g, 0, 2, max_hops=1) is None
