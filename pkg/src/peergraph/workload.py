"""Seeded workload generators: edge-weight updates, neighborhood requests,
and social-strength requests.

Load is degree-correlated: users are ranked by social degree into groups and
groups are drawn from a configurable probability vector (Zipf-shaped by
default), so high-degree users produce proportionally more traffic.  Within
a draw round no user repeats until the group's pool is exhausted.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .graph import EdgeUpdateRecord, SocialMultiGraph, Uid
from .inference import InferenceParams

SENSOR_INCREMENT = 0.01


@dataclass
class DegreeRankModel:
    groups: list  # lists of uids, highest-degree group first
    probs: np.ndarray  # one probability per group, sums to 1

    def __post_init__(self):
        total = float(np.sum(self.probs))
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"group probabilities sum to {total}, not 1")

    @staticmethod
    def from_graph(
        graph: SocialMultiGraph,
        num_groups: int = 10,
        zipf_exponent: float = 1.0,
        probs: Optional[Sequence[float]] = None,
    ) -> "DegreeRankModel":
        users = sorted(graph.vertices())
        degree = {u: sum(1 for _ in graph.out_neighbors(u)) for u in users}
        ranked = sorted(users, key=lambda u: (-degree[u], u))
        num_groups = min(num_groups, len(ranked)) or 1
        bounds = np.linspace(0, len(ranked), num_groups + 1).astype(int)
        groups = [ranked[bounds[i] : bounds[i + 1]] for i in range(num_groups)]
        groups = [g for g in groups if g]
        if probs is None:
            raw = np.array([1.0 / (i + 1) ** zipf_exponent for i in range(len(groups))])
            p = raw / raw.sum()
        else:
            p = np.asarray(probs, dtype=float)
            if len(p) != len(groups):
                raise ValueError("probability vector length != group count")
        return DegreeRankModel(groups, p)


class _GroupSampler:
    """Draw a group by probability, then a user from the group without
    repetition until the group's pool empties (one round)."""

    def __init__(self, model: DegreeRankModel, rng: np.random.Generator):
        self.model = model
        self.rng = rng
        self.pools = [[] for _ in model.groups]

    def draw(self) -> Uid:
        g = int(self.rng.choice(len(self.model.groups), p=self.model.probs))
        if not self.pools[g]:
            pool = list(self.model.groups[g])
            self.rng.shuffle(pool)
            self.pools[g] = pool
        return self.pools[g].pop()


def gen_weight_updates(
    model: DegreeRankModel,
    graph: SocialMultiGraph,
    count: int,
    seed: int = 0,
    start_time: float = 0.0,
    dt: float = 1.0,
) -> list[EdgeUpdateRecord]:
    """Sensor emulation: ego by degree group, alter uniform among ego's
    direct connections, constant +0.01 weight adjustments."""
    if graph.num_vertices() == 0:
        raise ValueError("graph is empty")
    rng = np.random.default_rng(seed)
    sampler = _GroupSampler(model, rng)
    seqs = {u: graph.last_seq(u) for u in graph.vertices()}
    records = []
    t = start_time
    while len(records) < count:
        ego = sampler.draw()
        neighbors = sorted(graph.out_neighbors(ego))
        if not neighbors:
            continue  # isolated ego: redraw
        alter = neighbors[int(rng.integers(len(neighbors)))]
        labels = sorted(graph.edges_between(ego, alter))
        label = labels[int(rng.integers(len(labels)))]
        seqs[ego] += 1
        records.append(
            EdgeUpdateRecord(
                seq=seqs[ego],
                ego=ego,
                alter=alter,
                label=label,
                op="adjust-weight",
                weight_delta_or_value=SENSOR_INCREMENT,
                issued_at=t,
            )
        )
        t += dt
    return records


def gen_neighborhood_requests(
    model: DegreeRankModel,
    graph: SocialMultiGraph,
    count: int,
    seed: int = 0,
    timeout: float = math.inf,
    max_weight: float = 0.1,
    first_request_id: int = 0,
) -> list[InferenceParams]:
    """Flood-style requests: source by degree group, radius uniform in
    {1,2,3}, weight threshold uniform below ``max_weight``."""
    rng = np.random.default_rng(seed)
    sampler = _GroupSampler(model, rng)
    requests = []
    for i in range(count):
        ego = sampler.draw()
        radius = int(rng.integers(1, 4))
        chi = float(rng.uniform(0.0, max_weight))
        requests.append(
            InferenceParams(
                kind="neighborhood",
                ego=ego,
                min_weight=chi,
                radius=radius,
                timeout=timeout,
                request_id=first_request_id + i,
            )
        )
    return requests


def gen_strength_requests(
    graph: SocialMultiGraph,
    count: int,
    seed: int = 0,
    timeout: float = math.inf,
    budget_exponent: float = 2.0,
    first_request_id: int = 0,
) -> list[InferenceParams]:
    """Random source/destination pairs; each drawn source carries a
    heavy-tailed total request budget (discrete power law)."""
    users = sorted(graph.vertices())
    if len(users) < 2:
        raise ValueError("need at least two users")
    rng = np.random.default_rng(seed)
    requests = []
    i = first_request_id
    while len(requests) < count:
        src = users[int(rng.integers(len(users)))]
        budget = int(rng.zipf(budget_exponent))
        for _ in range(min(budget, count - len(requests))):
            dst = src
            while dst == src:
                dst = users[int(rng.integers(len(users)))]
            requests.append(
                InferenceParams(
                    kind="social_strength",
                    ego=src,
                    alter=dst,
                    timeout=timeout,
                    request_id=i,
                )
            )
            i += 1
    return requests


def source_budgets(
    num_sources: int, seed: int = 0, budget_exponent: float = 2.0
) -> np.ndarray:
    """The heavy-tailed per-source budget distribution, exposed for
    inspection and tests."""
    rng = np.random.default_rng(seed)
    return rng.zipf(budget_exponent, size=num_sources)
