"""Recursive, timeout-budgeted, multi-peer inference execution.

A request enters at any peer, which resolves the ego's trusted peer list and
forwards to the fastest trusted peer.  That peer serves what it can from the
users it trusts and issues secondary requests for the rest; a peer reached at
depth k works under a budget of T*(n-k) simulated seconds and folds in only
the child responses that arrive within it.  With unlimited budgets, zero
churn, and permissive policies the outcome equals the centralized evaluation.

Peers conceptually hold per-user subgraph snapshots; with zero staleness
those snapshots coincide with the master graph restricted to the users a
peer trusts, which is how reads are implemented here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

from .acp import PolicyStore, RequestContext
from .graph import SocialMultiGraph, Uid
from .inference import (
    InferenceParams,
    InferenceResult,
    _filtered_neighbors,
    evaluate_centralized,
    great_circle_m,
    label_sum,
    neighborhood,
    normalized_weight,
    relation_test,
    strength_paths,
    top_relations,
)
from .mapping import MappingPlan
from .overlay import (
    OverlaySim,
    PeerId,
    ServiceUnavailableError,
    SimConfig,
    TrustedPeerGroup,
)

LOCAL_PROCESSING_S = 0.01  # subgraph traversal cost per peer, tens of ms


def build_overlay(
    graph: SocialMultiGraph, plan: MappingPlan, config: Optional[SimConfig] = None
) -> OverlaySim:
    """Bootstrap an overlay matching a mapping plan.

    Peers, registrations, and group memberships are installed directly
    (bootstrap traffic is not part of any measured workload); counters start
    at zero afterwards.
    """
    sim = OverlaySim(config)
    for p in range(plan.num_peers):
        sim.add_peer(p)
    for uid in sorted(plan.assignment):
        peers = plan.assignment[uid]
        sim.dht[f"uid:{uid}"] = {
            "endpoints": [sim.peers[p].address for p in peers],
            "signer": uid,
        }
        sim.groups[uid] = TrustedPeerGroup(owner=uid, members=set(peers))
        for p in peers:
            sim.peers[p].trusted_users.add(uid)
    sim.master_graph = graph
    sim.messages_sent = sim.deliveries = sim.drops = 0
    return sim


@dataclass
class _RequestState:
    req: InferenceParams
    radius: int
    expanded: dict = field(default_factory=dict)  # uid -> deepest remaining expanded
    found: set = field(default_factory=set)
    serving: list = field(default_factory=list)  # multiset of serving peers
    unavailable: int = 0


class DistributedEngine:
    def __init__(
        self,
        graph: SocialMultiGraph,
        plan: MappingPlan,
        sim: Optional[OverlaySim] = None,
        policies: Optional[PolicyStore] = None,
        now: float = 0.0,
    ):
        self.graph = graph
        self.plan = plan
        self.sim = sim if sim is not None else build_overlay(graph, plan)
        self.policies = policies
        self.now = now

    # -- plumbing ----------------------------------------------------------

    def _rtt(self, src: PeerId, dst: PeerId, req: InferenceParams) -> float:
        return self.sim.latency.rtt(src, dst, 3, req.request_id)

    def _peer_trusts(self, peer: PeerId, uid: Uid) -> bool:
        return uid in self.sim.peers[peer].trusted_users

    def _fastest_trusted(self, via: PeerId, uid: Uid) -> Optional[PeerId]:
        tpl = self.sim.resolve_tpl(via, uid)
        return tpl.entries[0][0] if tpl.entries else None

    def _edge_policy(self, req: InferenceParams):
        if self.policies is None:
            return None
        store = self.policies

        def check(owner: Uid, label: str, weight: float) -> bool:
            ctx = self._context_for(owner, req)
            return store.allows_edge(owner, label, weight, ctx)

        return check

    def _context_for(self, owner: Uid, req: InferenceParams) -> RequestContext:
        distance = hop_distance(self.graph, owner, req.ego, max_hops=6)
        labels = frozenset(
            e.label for e in self.graph.edges_between(owner, req.ego).values()
        )
        weight = label_sum(self.graph, owner, req.ego, self.now)
        return RequestContext(
            originator_user=str(req.ego),
            originator_peer=str(self.plan.assignment.get(req.ego, ("",))[0]),
            application="",
            social_distance=distance,
            connection_labels=labels,
            connection_weight=weight,
        )

    # -- entry point -------------------------------------------------------

    def execute(self, req: InferenceParams, entry_peer: PeerId) -> InferenceResult:
        msg0 = self.sim.messages_sent
        tpl = self.sim.resolve_tpl(entry_peer, req.ego)
        if not tpl.entries:
            raise ServiceUnavailableError(f"no online trusted peer for {req.ego}")
        p0, p0_latency = tpl.entries[0]
        self.sim.send(entry_peer, p0, "request", req.ego)
        forward = self._rtt(entry_peer, p0, req)

        if req.kind == "neighborhood":
            value, elapsed, st = self._run_neighborhood(req, p0)
            oracle = neighborhood(
                self.graph,
                req.ego,
                req.label,
                req.min_weight,
                req.radius,
                self.now,
                self._edge_policy(req),
            )
            completion = (len(value & oracle) / len(oracle)) if oracle else 1.0
            serving = st.serving
        elif req.kind == "proximity":
            value, elapsed, st = self._run_proximity(req, p0)
            oracle = evaluate_centralized(self.graph, req, self.now).value
            completion = (len(value & oracle) / len(oracle)) if oracle else 1.0
            serving = st.serving
        elif req.kind == "social_strength":
            value, elapsed, serving, completion = self._run_strength(req, p0)
        elif req.kind == "relation_test":
            policy = self._edge_policy(req)
            value = relation_test(
                self.graph, req.ego, req.alter, req.label, req.min_weight, self.now, policy
            )
            elapsed, completion, serving = LOCAL_PROCESSING_S, 1.0, []
        elif req.kind == "top_relations":
            value = top_relations(
                self.graph, req.ego, req.label, req.n, self.now, self._edge_policy(req)
            )
            elapsed, completion, serving = LOCAL_PROCESSING_S, 1.0, []
        else:
            raise ValueError(f"unknown kind {req.kind!r}")

        self.sim.send(p0, entry_peer, "response", req.ego)
        total = forward / 2.0 + elapsed + self._rtt(p0, entry_peer, req) / 2.0
        return InferenceResult(
            kind=req.kind,
            value=value,
            completion=completion,
            serving_peers=[p0, *serving],
            messages_sent=self.sim.messages_sent - msg0,
            elapsed=total,
        )

    # -- neighborhood ------------------------------------------------------

    def _run_neighborhood(self, req: InferenceParams, p0: PeerId):
        st = _RequestState(req=req, radius=req.radius)
        elapsed = self._serve_hood(p0, {req.ego: req.radius}, 0, st, st.found, st.expanded)
        st.found.discard(req.ego)
        return st.found, elapsed, st

    def _serve_hood(
        self,
        peer: PeerId,
        tasks: dict,
        level: int,
        st: _RequestState,
        found: set,
        expanded: dict,
    ) -> float:
        """Expand the tasked users at ``peer``; returns the peer's internal
        elapsed time.  ``tasks`` maps uid -> remaining hops (> 0).

        ``found``/``expanded`` belong to this response only; a parent merges
        them upward iff the response arrives within the parent's budget, so a
        dropped branch contributes nothing to the final answer.
        """
        req = st.req
        policy = self._edge_policy(req)
        deferred: dict = {}
        queue = sorted(tasks.items())
        while queue:
            u, rem = queue.pop(0)
            if expanded.get(u, -1) >= rem:
                continue
            if self._peer_trusts(peer, u) and self.sim.peers[peer].online:
                expanded[u] = rem
                for v, _w in _filtered_neighbors(
                    self.graph, u, req.label, req.min_weight, self.now, policy
                ):
                    found.add(v)
                    if rem - 1 > 0 and expanded.get(v, -1) < rem - 1:
                        queue.append((v, rem - 1))
            else:
                deferred[u] = max(deferred.get(u, 0), rem)

        own_budget = req.timeout * (st.radius - level)
        if not deferred or own_budget <= 0.0:
            return LOCAL_PROCESSING_S

        batches: dict = {}
        for u in sorted(deferred):
            target = self._fastest_trusted(peer, u)
            if target is None:
                st.unavailable += 1  # user's whole group offline: branch lost
                continue
            batches.setdefault(target, {})[u] = deferred[u]

        arrivals = []
        dropped = False
        for target in sorted(batches):
            self.sim.send(peer, target, "secondary", req.ego)
            child_found: set = set()
            child_expanded = dict(expanded)
            child_elapsed = self._serve_hood(
                target, batches[target], level + 1, st, child_found, child_expanded
            )
            self.sim.send(target, peer, "secondary-response", req.ego)
            st.serving.append(target)
            arrival = self._rtt(peer, target, req) + child_elapsed
            if arrival <= own_budget:
                arrivals.append(arrival)
                found |= child_found
                for u, rem in child_expanded.items():
                    if expanded.get(u, -1) < rem:
                        expanded[u] = rem
            else:
                dropped = True
        if dropped:
            return own_budget
        return max(arrivals, default=0.0) + LOCAL_PROCESSING_S

    # -- proximity ---------------------------------------------------------

    def _run_proximity(self, req: InferenceParams, p0: PeerId):
        v = self.graph.vertex(req.ego)
        if v.location is None:
            raise ValueError(f"ego {req.ego} has no location")
        hood_req = InferenceParams(
            kind="neighborhood",
            ego=req.ego,
            label=req.label,
            min_weight=req.min_weight,
            radius=req.radius,
            timeout=req.timeout,
            request_id=req.request_id,
        )
        users, elapsed, st = self._run_neighborhood(hood_req, p0)
        cutoff = req.timestamp if req.timestamp is not None else -math.inf
        out = set()
        for u in users:
            vu = self.graph.vertex(u)
            if vu.location is None or vu.location_timestamp is None:
                continue
            if vu.location_timestamp < cutoff:
                continue
            if self.policies is not None and not self.policies.allows_location(
                u, self._context_for(u, req)
            ):
                continue
            if great_circle_m(v.location, vu.location) <= req.distance:
                out.add(u)
        return out, elapsed, st

    # -- social strength ---------------------------------------------------

    def _run_strength(self, req: InferenceParams, p0: PeerId):
        """Two-hop horizon: the ego's peer folds one factor per parallel
        path, fetching nw(j, alter) from each intermediate's trusted peer."""
        horizon = 2
        paths = strength_paths(self.graph, req.ego, req.alter)
        serving: list = []
        factors = []
        remote: dict = {}
        for j in paths:
            if j is None:
                factors.append(normalized_weight(self.graph, req.ego, req.alter, self.now))
            elif self._peer_trusts(p0, j) and self.sim.peers[p0].online:
                factors.append(
                    min(
                        normalized_weight(self.graph, req.ego, j, self.now),
                        normalized_weight(self.graph, j, req.alter, self.now),
                    )
                )
            else:
                target = self._fastest_trusted(p0, j)
                if target is None:
                    continue
                remote.setdefault(target, []).append(j)

        own_budget = req.timeout * horizon
        arrivals = []
        folded = len(factors)
        if own_budget <= 0.0:
            remote = {}
        for target in sorted(remote):
            self.sim.send(p0, target, "secondary", req.ego)
            self.sim.send(target, p0, "secondary-response", req.ego)
            serving.append(target)
            arrival = self._rtt(p0, target, req) + LOCAL_PROCESSING_S
            if own_budget > 0.0 and arrival <= own_budget:
                arrivals.append(arrival)
                for j in remote[target]:
                    factors.append(
                        min(
                            normalized_weight(self.graph, req.ego, j, self.now),
                            normalized_weight(self.graph, j, req.alter, self.now),
                        )
                    )
                    folded += 1
        prod = 1.0
        for m in factors:
            prod *= 1.0 - m / 2.0
        value = 1.0 - prod
        completion = folded / len(paths) if paths else 1.0
        elapsed = max(arrivals, default=0.0) + LOCAL_PROCESSING_S
        if folded < len(paths) and remote:
            elapsed = max(elapsed, own_budget if own_budget > 0 else 0.0)
        return value, elapsed, serving, completion


def hop_distance(
    graph: SocialMultiGraph, src: Uid, dst: Uid, max_hops: int = 6
) -> Optional[int]:
    """Unweighted out-edge BFS distance, or None beyond ``max_hops``."""
    if src == dst:
        return 0
    seen = {src}
    frontier = [src]
    for hop in range(1, max_hops + 1):
        nxt = []
        for u in frontier:
            for v in graph.out_neighbors(u):
                if v == dst:
                    return hop
                if v not in seen:
                    seen.add(v)
                    nxt.append(v)
        frontier = nxt
        if not frontier:
            break
    return None
