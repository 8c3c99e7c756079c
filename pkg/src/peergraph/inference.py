"""The five social-inference operations, evaluated on a single graph.

These centralized evaluations double as the oracle for the distributed
engine: with unlimited budgets and permissive policies the distributed
results must match them exactly.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional

from .graph import SocialMultiGraph, Uid

EARTH_RADIUS_M = 6_371_000.0


class AccessDeniedError(Exception):
    """Policy denial; distinct from a negative inference result."""


class UndefinedPairError(ValueError):
    """normalized weight requested for a non-neighbor."""


@dataclass(frozen=True)
class InferenceParams:
    kind: str  # relation_test | top_relations | neighborhood | proximity | social_strength
    ego: Uid
    alter: Optional[Uid] = None
    label: Optional[str] = None  # None = any label
    min_weight: float = 0.0
    n: Optional[int] = None
    radius: Optional[int] = None
    distance: Optional[float] = None  # meters
    timestamp: Optional[float] = None  # location staleness cutoff (simulated instant)
    timeout: float = math.inf  # per-hop budget T, simulated seconds
    request_id: int = 0

    def __post_init__(self):
        if self.kind in ("neighborhood", "proximity") and self.radius is None:
            raise ValueError(f"{self.kind} requires radius")
        if self.kind in ("relation_test", "social_strength") and self.alter is None:
            raise ValueError(f"{self.kind} requires alter")
        if self.kind == "top_relations" and self.n is None:
            raise ValueError("top_relations requires n")
        if not 0.0 <= self.min_weight <= 1.0:
            raise ValueError("min_weight outside [0,1]")


def params_to_json(req: InferenceParams) -> str:
    d = {k: v for k, v in asdict(req).items() if v is not None}
    if d.get("timeout") == math.inf:
        del d["timeout"]
    return json.dumps(d, sort_keys=True)


def params_from_json(line: str) -> InferenceParams:
    d = json.loads(line)
    return InferenceParams(
        kind=d["kind"],
        ego=int(d["ego"]),
        alter=int(d["alter"]) if d.get("alter") is not None else None,
        label=d.get("label"),
        min_weight=float(d.get("min_weight", 0.0)),
        n=int(d["n"]) if d.get("n") is not None else None,
        radius=int(d["radius"]) if d.get("radius") is not None else None,
        distance=float(d["distance"]) if d.get("distance") is not None else None,
        timestamp=float(d["timestamp"]) if d.get("timestamp") is not None else None,
        timeout=float(d.get("timeout", math.inf)),
        request_id=int(d.get("request_id", 0)),
    )


@dataclass
class InferenceResult:
    kind: str
    value: object  # set/list/bool/float per kind
    completion: float = 1.0
    serving_peers: list = field(default_factory=list)
    messages_sent: int = 0
    elapsed: float = 0.0


# A policy hook receives (owner uid, edge label, effective weight) and says
# whether the owner exposes that edge to the current requester.  None means
# the permissive default.
EdgePolicy = Optional[Callable[[Uid, str, float], bool]]


def _edge_ok(policy: EdgePolicy, owner: Uid, label: str, weight: float) -> bool:
    return True if policy is None else policy(owner, label, weight)


def _filtered_neighbors(
    graph: SocialMultiGraph,
    ego: Uid,
    label: Optional[str],
    min_weight: float,
    now: float,
    policy: EdgePolicy = None,
):
    """Out-neighbors reachable over a single edge passing the label/weight
    filter after lazy aging; yields (alter, best passing weight)."""
    for alter, labels in graph._out.get(ego, {}).items():
        best = None
        for lab, e in labels.items():
            if label is not None and lab != label:
                continue
            w = graph.effective_weight(e, now)
            if w < min_weight:
                continue
            if not _edge_ok(policy, ego, lab, w):
                continue
            if best is None or w > best:
                best = w
        if best is not None:
            yield alter, best


def relation_test(
    graph: SocialMultiGraph,
    ego: Uid,
    alter: Uid,
    label: Optional[str],
    min_weight: float,
    now: float = 0.0,
    policy: EdgePolicy = None,
) -> bool:
    """True iff an ego-to-alter edge with the label carries weight >= threshold."""
    for lab, e in graph.edges_between(ego, alter).items():
        if label is not None and lab != label:
            continue
        w = graph.effective_weight(e, now)
        if w >= min_weight:
            if policy is not None and not policy(ego, lab, w):
                raise AccessDeniedError(f"owner {ego} denies {lab}")
            return True
    return False


def top_relations(
    graph: SocialMultiGraph,
    ego: Uid,
    label: Optional[str],
    n: int,
    now: float = 0.0,
    policy: EdgePolicy = None,
) -> list[tuple[Uid, float]]:
    """Neighbors over the label sorted by decreasing weight, ties by uid."""
    if n < 1:
        raise ValueError("n must be >= 1")
    scored = list(_filtered_neighbors(graph, ego, label, 0.0, now, policy))
    scored.sort(key=lambda p: (-p[1], p[0]))
    return scored[:n]


def label_sum(graph: SocialMultiGraph, i: Uid, j: Uid, now: float = 0.0) -> float:
    return sum(
        graph.effective_weight(e, now) for e in graph.edges_between(i, j).values()
    )


def normalized_weight(
    graph: SocialMultiGraph, i: Uid, j: Uid, now: float = 0.0
) -> float:
    """Label-summed weight of (i, j) over the maximum label-summed weight
    among i's neighbors."""
    out = graph._out.get(i, {})
    if j not in out:
        raise UndefinedPairError(f"{j} is not a neighbor of {i}")
    denom = max(label_sum(graph, i, k, now) for k in out)
    if denom == 0.0:
        return 0.0
    return label_sum(graph, i, j, now) / denom


def strength_paths(graph: SocialMultiGraph, ego: Uid, alter: Uid):
    """Intermediates of the distinct 2-hop paths ego -> j -> alter, plus a
    ``None`` entry when a direct edge exists (the 1-hop path)."""
    paths = []
    if alter in graph._out.get(ego, {}):
        paths.append(None)
    for j in graph._out.get(ego, {}):
        if j != alter and alter in graph._out.get(j, {}):
            paths.append(j)
    return paths


def social_strength(
    graph: SocialMultiGraph,
    ego: Uid,
    alter: Uid,
    now: float = 0.0,
) -> float:
    """One factor per parallel path within the 2-hop horizon:
    S = 1 - prod(1 - min(nw(ego,j), nw(j,alter)) / 2)."""
    if ego == alter:
        raise ValueError("ego and alter must differ")
    prod = 1.0
    for j in strength_paths(graph, ego, alter):
        if j is None:
            m = normalized_weight(graph, ego, alter, now)
        else:
            m = min(
                normalized_weight(graph, ego, j, now),
                normalized_weight(graph, j, alter, now),
            )
        prod *= 1.0 - m / 2.0
    return 1.0 - prod


def neighborhood(
    graph: SocialMultiGraph,
    ego: Uid,
    label: Optional[str],
    min_weight: float,
    radius: int,
    now: float = 0.0,
    policy: EdgePolicy = None,
) -> set[Uid]:
    """BFS over filtered edges; every traversed edge must satisfy the label
    and weight filter (path-wise filtering)."""
    if radius < 1:
        raise ValueError("radius must be >= 1")
    seen = {ego}
    frontier = [ego]
    found: set[Uid] = set()
    for _ in range(radius):
        nxt = []
        for u in frontier:
            for v, _w in _filtered_neighbors(graph, u, label, min_weight, now, policy):
                if v not in seen:
                    seen.add(v)
                    found.add(v)
                    nxt.append(v)
        frontier = nxt
        if not frontier:
            break
    return found


def great_circle_m(a: tuple[float, float], b: tuple[float, float]) -> float:
    lat1, lon1, lat2, lon2 = map(math.radians, (a[0], a[1], b[0], b[1]))
    h = (
        math.sin((lat2 - lat1) / 2) ** 2
        + math.cos(lat1) * math.cos(lat2) * math.sin((lon2 - lon1) / 2) ** 2
    )
    return 2 * EARTH_RADIUS_M * math.asin(math.sqrt(h))


def proximity(
    graph: SocialMultiGraph,
    ego: Uid,
    label: Optional[str],
    min_weight: float,
    radius: int,
    distance: float,
    timestamp: float,
    now: float = 0.0,
    policy: EdgePolicy = None,
) -> set[Uid]:
    """Neighborhood filtered to users physically within ``distance`` of ego
    whose stored location is no older than the ``timestamp`` cutoff."""
    v = graph.vertex(ego)
    if v.location is None:
        raise ValueError(f"ego {ego} has no location")
    users = neighborhood(graph, ego, label, min_weight, radius, now, policy)
    out = set()
    for u in users:
        vu = graph.vertex(u)
        if vu.location is None or vu.location_timestamp is None:
            continue
        if vu.location_timestamp < timestamp:
            continue
        if great_circle_m(v.location, vu.location) <= distance:
            out.add(u)
    return out


def evaluate_centralized(
    graph: SocialMultiGraph, req: InferenceParams, now: float = 0.0
) -> InferenceResult:
    """Single-graph evaluation of any request kind (the oracle path)."""
    if req.kind == "relation_test":
        value = relation_test(graph, req.ego, req.alter, req.label, req.min_weight, now)
    elif req.kind == "top_relations":
        value = top_relations(graph, req.ego, req.label, req.n, now)
    elif req.kind == "neighborhood":
        value = neighborhood(graph, req.ego, req.label, req.min_weight, req.radius, now)
    elif req.kind == "proximity":
        value = proximity(
            graph,
            req.ego,
            req.label,
            req.min_weight,
            req.radius,
            req.distance,
            req.timestamp if req.timestamp is not None else -math.inf,
            now,
        )
    elif req.kind == "social_strength":
        value = social_strength(graph, req.ego, req.alter, now)
    else:
        raise ValueError(f"unknown kind {req.kind!r}")
    return InferenceResult(kind=req.kind, value=value)
