"""Experiment driver: specs, validation, and the four experiment kinds.

A spec file (TOML) plus a seed reproduces a run exactly; all randomness is
derived from the spec seed with fixed offsets, and output CSVs are emitted
with stable formatting so reruns are byte-identical.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from typing import Optional

try:
    import tomllib
except ModuleNotFoundError:  # pragma: no cover - 3.10 fallback
    import tomli as tomllib

import networkx as nx

from . import metrics, synthgraphs
from .engine import DistributedEngine, build_overlay
from .graph import SocialMultiGraph, load_edge_list
from .mapping import (
    MappingPlan,
    random_mapping,
    social_mapping_betweenness,
    social_mapping_louvain,
)
from .overlay import LatencyConfig, SimConfig
from .resilience import (
    CollusionConfig,
    grow_collusion_series,
    mean_ci,
    run_influence_experiment,
    set_influence,
)
from .workload import DegreeRankModel, gen_neighborhood_requests, gen_strength_requests

EXPERIMENT_KINDS = ("performance", "timeout-tradeoff", "influence", "collusion")


@dataclass
class GraphSpec:
    source: str = "synthetic"  # synthetic | surrogate | file
    path: Optional[str] = None
    users: int = 1000
    edges: Optional[int] = None
    m: int = 3
    p: float = 0.5
    seed: int = 42


@dataclass
class MappingSpec:
    kinds: tuple = ("random", "social")
    users_per_peer: tuple = (10,)
    algorithm: str = "louvain"  # louvain | betweenness
    base_density: int = 10  # users/peer with no replication; K = N / base


@dataclass
class WorkloadSpec:
    neighborhood_requests: int = 200
    strength_requests: int = 0
    zipf_exponent: float = 1.0
    max_weight: float = 0.1
    force_radius: Optional[int] = None


@dataclass
class ExperimentSpec:
    kind: str
    seed: int = 0
    graph: GraphSpec = field(default_factory=GraphSpec)
    mapping: MappingSpec = field(default_factory=MappingSpec)
    workload: WorkloadSpec = field(default_factory=WorkloadSpec)
    timeout: float = 15.0
    timeout_sweep: tuple = (2.5, 5.0, 7.5, 10.0)
    latency_kind: str = "lognormal"
    latency_mean: float = 0.25
    latency_sigma: float = 0.8
    churn_rate: float = 0.0
    hops: tuple = (2, 3)
    collusion_kinds: tuple = ("random", "social")
    collusion_fractions: tuple = (0.1, 0.2, 0.3, 0.4, 0.5)
    collusion_seed_fraction: float = 0.01
    repetitions: int = 10


def load_spec(path) -> ExperimentSpec:
    with open(path, "rb") as fh:
        data = tomllib.load(fh)
    return spec_from_dict(data)


def spec_from_dict(data: dict) -> ExperimentSpec:
    g = data.get("graph", {})
    m = data.get("mapping", {})
    w = data.get("workload", {})
    s = data.get("sim", {})
    c = data.get("collusion", {})
    return ExperimentSpec(
        kind=data["kind"],
        seed=int(data.get("seed", 0)),
        graph=GraphSpec(
            source=g.get("source", "synthetic"),
            path=g.get("path"),
            users=int(g.get("users", 1000)),
            edges=int(g["edges"]) if "edges" in g else None,
            m=int(g.get("m", 3)),
            p=float(g.get("p", 0.5)),
            seed=int(g.get("seed", 42)),
        ),
        mapping=MappingSpec(
            kinds=tuple(m.get("kinds", ("random", "social"))),
            users_per_peer=tuple(int(n) for n in m.get("users_per_peer", (10,))),
            algorithm=m.get("algorithm", "louvain"),
            base_density=int(m.get("base_density", 10)),
        ),
        workload=WorkloadSpec(
            neighborhood_requests=int(w.get("neighborhood_requests", 200)),
            strength_requests=int(w.get("strength_requests", 0)),
            zipf_exponent=float(w.get("zipf_exponent", 1.0)),
            max_weight=float(w.get("max_weight", 0.1)),
            force_radius=int(w["force_radius"]) if "force_radius" in w else None,
        ),
        timeout=float(s.get("timeout", 15.0)),
        timeout_sweep=tuple(float(t) for t in s.get("timeout_sweep", (2.5, 5.0, 7.5, 10.0))),
        latency_kind=s.get("latency", "lognormal"),
        latency_mean=float(s.get("mean_rtt", 0.25)),
        latency_sigma=float(s.get("sigma", 0.8)),
        churn_rate=float(s.get("churn", 0.0)),
        hops=tuple(int(h) for h in data.get("hops", (2, 3))),
        collusion_kinds=tuple(c.get("kinds", ("random", "social"))),
        collusion_fractions=tuple(
            float(f) for f in c.get("fractions", (0.1, 0.2, 0.3, 0.4, 0.5))
        ),
        collusion_seed_fraction=float(c.get("seed_fraction", 0.01)),
        repetitions=int(c.get("repetitions", 10)),
    )


def validate(spec: ExperimentSpec) -> list[str]:
    """Static feasibility checks; returns diagnostics, never raises."""
    problems = []
    if spec.kind not in EXPERIMENT_KINDS:
        problems.append(f"unknown experiment kind {spec.kind!r}")
    g = spec.graph
    if g.source == "file":
        if not g.path:
            problems.append("graph.source = 'file' requires graph.path")
        elif not os.path.exists(g.path):
            problems.append(f"graph file {g.path} does not exist")
    elif g.source not in ("synthetic", "surrogate"):
        problems.append(f"unknown graph source {g.source!r}")
    if g.users < 2:
        problems.append("graph.users must be >= 2")
    if not 0.0 <= spec.workload.max_weight <= 1.0:
        problems.append(f"workload.max_weight {spec.workload.max_weight} outside [0,1]")
    for n in spec.mapping.users_per_peer:
        if n < spec.mapping.base_density:
            problems.append(
                f"users_per_peer {n} below base density {spec.mapping.base_density}"
            )
        num_peers = g.users // spec.mapping.base_density
        k = max(1, n // spec.mapping.base_density)
        if k > num_peers:
            problems.append(f"replication {k} exceeds {num_peers} peers")
    if spec.timeout < 0:
        problems.append("sim.timeout must be >= 0")
    for f in spec.collusion_fractions:
        if not 0.0 < f <= 1.0:
            problems.append(f"collusion fraction {f} outside (0,1]")
    if spec.kind == "collusion" and spec.collusion_fractions:
        if spec.collusion_seed_fraction > min(spec.collusion_fractions):
            problems.append("collusion seed fraction exceeds smallest target fraction")
    for kind in spec.mapping.kinds:
        if kind not in ("random", "social"):
            problems.append(f"unknown mapping kind {kind!r}")
    return problems


# -- building blocks -------------------------------------------------------


def build_graph(spec: GraphSpec) -> tuple[SocialMultiGraph, nx.Graph]:
    if spec.source == "file":
        g = load_edge_list(spec.path)
        from .mapping import _as_nx

        return g, _as_nx(g)
    if spec.source == "surrogate":
        edges = spec.edges if spec.edges is not None else spec.users * 4
        G = synthgraphs.surrogate_trace_graph_nx(
            spec.users, edges, m=spec.m, p=spec.p, seed=spec.seed
        )
    else:
        G = synthgraphs.benchmark_graph_nx(spec.users, spec.m, spec.p, spec.seed)
    return synthgraphs.multigraph_from_nx(G), G


def build_plan(
    spec: ExperimentSpec,
    G: nx.Graph,
    mapping_kind: str,
    users_per_peer: int,
) -> MappingPlan:
    users = sorted(G.nodes())
    base = spec.mapping.base_density
    num_peers = max(1, len(users) // base)
    replication = max(1, users_per_peer // base)
    if mapping_kind == "random":
        return random_mapping(users, num_peers, replication, seed=spec.seed + 1)
    if spec.mapping.algorithm == "betweenness":
        return social_mapping_betweenness(
            G, num_peers, min_size=max(1, base // 2), replication=replication,
            seed=spec.seed + 1,
        )
    return social_mapping_louvain(
        G, target_avg_size=len(users) / num_peers, replication=replication,
        seed=spec.seed + 1,
    )


def sim_config(spec: ExperimentSpec) -> SimConfig:
    return SimConfig(
        rng_seed=spec.seed,
        latency=LatencyConfig(
            kind=spec.latency_kind, mean=spec.latency_mean, sigma=spec.latency_sigma
        ),
        churn_rate=spec.churn_rate,
    )


def _requests(spec: ExperimentSpec, graph: SocialMultiGraph, timeout: float):
    model = DegreeRankModel.from_graph(
        graph, zipf_exponent=spec.workload.zipf_exponent
    )
    reqs = gen_neighborhood_requests(
        model,
        graph,
        spec.workload.neighborhood_requests,
        seed=spec.seed + 2,
        timeout=timeout,
        max_weight=spec.workload.max_weight,
    )
    if spec.workload.force_radius is not None:
        from dataclasses import replace

        reqs = [replace(r, radius=spec.workload.force_radius) for r in reqs]
    reqs += gen_strength_requests(
        graph,
        spec.workload.strength_requests,
        seed=spec.seed + 3,
        timeout=timeout,
        first_request_id=len(reqs),
    )
    return reqs


def _run_workload(engine: DistributedEngine, requests, num_peers: int):
    rows = []
    for req in requests:
        entry = req.request_id % num_peers
        result = engine.execute(req, entry)
        rows.append((req, result))
    return rows


# -- experiment kinds ------------------------------------------------------


def run(spec: ExperimentSpec, out_dir: str) -> list[str]:
    problems = validate(spec)
    if problems:
        raise ValueError("invalid spec: " + "; ".join(problems))
    os.makedirs(out_dir, exist_ok=True)
    if spec.kind == "performance":
        return _run_performance(spec, out_dir)
    if spec.kind == "timeout-tradeoff":
        return _run_timeout_tradeoff(spec, out_dir)
    if spec.kind == "influence":
        return _run_influence(spec, out_dir)
    return _run_collusion(spec, out_dir)


def _run_performance(spec: ExperimentSpec, out_dir: str) -> list[str]:
    graph, G = build_graph(spec.graph)
    written = []
    summary_rows = []
    for n in spec.mapping.users_per_peer:
        for kind in spec.mapping.kinds:
            plan = build_plan(spec, G, kind, n)
            sim = build_overlay(graph, plan, sim_config(spec))
            engine = DistributedEngine(graph, plan, sim)
            requests = _requests(spec, graph, spec.timeout)
            rows = _run_workload(engine, requests, plan.num_peers)
            path = os.path.join(out_dir, f"requests_{kind}_N{n}.csv")
            metrics.write_csv(
                path,
                metrics.RESULT_HEADER,
                [metrics.result_row(req, res) for req, res in rows],
            )
            written.append(path)
            completions = [res.completion for _r, res in rows]
            elapsed = [res.elapsed for _r, res in rows]
            msgs = [res.messages_sent for _r, res in rows]
            peers_contacted = [len(set(res.serving_peers)) for _r, res in rows]
            summary_rows.append(
                [
                    kind,
                    n,
                    max(1, n // spec.mapping.base_density),
                    len(rows),
                    sum(msgs),
                    metrics.summarize(completions)["mean"],
                    metrics.summarize(elapsed)["mean"],
                    metrics.summarize(elapsed)["p50"],
                    metrics.summarize(elapsed)["p90"],
                    metrics.summarize(elapsed)["p99"],
                    metrics.summarize(peers_contacted)["mean"],
                ]
            )
    path = os.path.join(out_dir, "summary.csv")
    metrics.write_csv(
        path,
        [
            "mapping",
            "N",
            "K",
            "requests",
            "total_messages",
            "mean_completion",
            "mean_elapsed_s",
            "p50_elapsed_s",
            "p90_elapsed_s",
            "p99_elapsed_s",
            "mean_peers_contacted",
        ],
        summary_rows,
    )
    written.append(path)
    return written


def _run_timeout_tradeoff(spec: ExperimentSpec, out_dir: str) -> list[str]:
    graph, G = build_graph(spec.graph)
    n = spec.mapping.users_per_peer[0]
    kind = "social" if "social" in spec.mapping.kinds else spec.mapping.kinds[0]
    plan = build_plan(spec, G, kind, n)
    written = []
    summary_rows = []
    base_requests = _requests(spec, graph, spec.timeout)
    from dataclasses import replace

    for t in spec.timeout_sweep:
        sim = build_overlay(graph, plan, sim_config(spec))
        engine = DistributedEngine(graph, plan, sim)
        requests = [replace(r, timeout=t) for r in base_requests]
        rows = _run_workload(engine, requests, plan.num_peers)
        path = os.path.join(out_dir, f"requests_T{metrics.fmt(t)}.csv")
        metrics.write_csv(
            path,
            metrics.RESULT_HEADER,
            [metrics.result_row(req, res) for req, res in rows],
        )
        written.append(path)
        completions = [res.completion for _r, res in rows]
        s = metrics.summarize(completions)
        summary_rows.append([t, s["count"], s["mean"], s["p50"], s["p90"], s["p99"]])
    path = os.path.join(out_dir, "summary.csv")
    metrics.write_csv(
        path,
        ["timeout_s", "requests", "mean_completion", "p50", "p90", "p99"],
        summary_rows,
    )
    written.append(path)
    return written


def _run_influence(spec: ExperimentSpec, out_dir: str) -> list[str]:
    _graph, G = build_graph(spec.graph)
    written = []
    rows = []
    summary_rows = []
    graph_name = spec.graph.source
    for n in spec.mapping.users_per_peer:
        for kind in spec.mapping.kinds:
            plan = build_plan(spec, G, kind, n)
            k = max(1, n // spec.mapping.base_density)
            for hops in spec.hops:
                ledger = run_influence_experiment(G, plan, hops)
                for peer in range(plan.num_peers):
                    rows.append(
                        [graph_name, kind, n, k, hops, peer, ledger.influence(peer)]
                    )
                summary_rows.append(
                    [graph_name, kind, n, k, hops, ledger.mean_influence()]
                )
    path = os.path.join(out_dir, "influence.csv")
    metrics.write_csv(
        path,
        ["graph", "mapping", "N", "K", "hops", "peer", "influence"],
        rows,
    )
    written.append(path)
    path = os.path.join(out_dir, "summary.csv")
    metrics.write_csv(
        path,
        ["graph", "mapping", "N", "K", "hops", "mean_influence"],
        summary_rows,
    )
    written.append(path)
    return written


def _run_collusion(spec: ExperimentSpec, out_dir: str) -> list[str]:
    _graph, G = build_graph(spec.graph)
    written = []
    rows = []
    summary_rows = []
    graph_name = spec.graph.source
    n = spec.mapping.users_per_peer[0]
    k = max(1, n // spec.mapping.base_density)
    for kind in spec.mapping.kinds:
        plan = build_plan(spec, G, kind, n)
        for hops in spec.hops:
            ledger = run_influence_experiment(G, plan, hops)
            for ckind in spec.collusion_kinds:
                per_c: dict = {c: [] for c in spec.collusion_fractions}
                for rep in range(spec.repetitions):
                    cfg = CollusionConfig(
                        kind=ckind,
                        seed_fraction=spec.collusion_seed_fraction,
                        repetitions=spec.repetitions,
                    )
                    series = grow_collusion_series(
                        plan,
                        cfg,
                        spec.collusion_fractions,
                        G,
                        seed=spec.seed + 100 + rep,
                    )
                    for c, sets in series.items():
                        union = set().union(*sets)
                        infl = set_influence(ledger, union)
                        per_c[c].append(infl)
                        rows.append(
                            [
                                graph_name,
                                kind,
                                n,
                                k,
                                hops,
                                ckind,
                                c,
                                rep,
                                len(union),
                                infl,
                            ]
                        )
                for c in spec.collusion_fractions:
                    mean, half = mean_ci(per_c[c])
                    summary_rows.append(
                        [graph_name, kind, n, k, hops, ckind, c, mean, half]
                    )
    path = os.path.join(out_dir, "collusion.csv")
    metrics.write_csv(
        path,
        [
            "graph",
            "mapping",
            "N",
            "K",
            "hops",
            "collusion_kind",
            "C",
            "repetition",
            "colluders",
            "influence",
        ],
        rows,
    )
    written.append(path)
    path = os.path.join(out_dir, "summary.csv")
    metrics.write_csv(
        path,
        ["graph", "mapping", "N", "K", "hops", "collusion_kind", "C", "mean", "ci95"],
        summary_rows,
    )
    written.append(path)
    return written
