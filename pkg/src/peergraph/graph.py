"""Directed, labeled, weighted social multigraph with append-only update logs.

Edges live on (ego, alter, label) triples; multiple labels between the same
ordered pair make the structure a multigraph.  Edge weights stay in [0, 1]
and decay multiplicatively while the pair does not interact over the label,
so a tie fades but never vanishes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Iterable, Iterator, Optional

Uid = int

WEEK = 7 * 24 * 3600.0

DEFAULT_AGING_DECREMENT = 0.10
DEFAULT_AGING_PERIOD = WEEK


class ReplayGapError(Exception):
    """Update record applied out of order for its ego."""


class UnknownUserError(KeyError):
    """Operation referenced a uid absent from the graph."""


@dataclass
class SocialEdge:
    ego: Uid
    alter: Uid
    label: str
    weight: float
    last_interaction: float = 0.0


@dataclass
class VertexAttributes:
    uid: Uid
    location: Optional[tuple[float, float]] = None
    location_timestamp: Optional[float] = None
    aging_decrement: float = DEFAULT_AGING_DECREMENT
    aging_period: float = DEFAULT_AGING_PERIOD

    def __post_init__(self) -> None:
        if (self.location is None) != (self.location_timestamp is None):
            raise ValueError("location and location_timestamp must be set together")


@dataclass(frozen=True)
class EdgeUpdateRecord:
    seq: int
    ego: Uid
    alter: Uid
    label: str
    op: str  # create | remove | adjust-weight
    weight_delta_or_value: float = 0.0
    issued_at: float = 0.0
    absolute: bool = False  # adjust-weight sets the value instead of adding a delta

    def to_json(self) -> str:
        return json.dumps(
            {
                "seq": self.seq,
                "ego": self.ego,
                "alter": self.alter,
                "label": self.label,
                "op": self.op,
                "weight_delta_or_value": self.weight_delta_or_value,
                "issued_at": self.issued_at,
                "absolute": self.absolute,
            },
            sort_keys=True,
        )

    @staticmethod
    def from_json(line: str) -> "EdgeUpdateRecord":
        d = json.loads(line)
        return EdgeUpdateRecord(
            seq=int(d["seq"]),
            ego=int(d["ego"]),
            alter=int(d["alter"]),
            label=str(d["label"]),
            op=str(d["op"]),
            weight_delta_or_value=float(d.get("weight_delta_or_value", 0.0)),
            issued_at=float(d.get("issued_at", 0.0)),
            absolute=bool(d.get("absolute", False)),
        )


def _clamp01(w: float) -> float:
    return 0.0 if w < 0.0 else (1.0 if w > 1.0 else w)


class SocialMultiGraph:
    """Mutable multigraph indexed by ego and by alter.

    Mutation is single-writer per ego (only the owner's aggregator log feeds
    an ego's out-edges); reads are safe to share.
    """

    def __init__(self) -> None:
        self._vertices: dict[Uid, VertexAttributes] = {}
        # ego -> alter -> label -> SocialEdge
        self._out: dict[Uid, dict[Uid, dict[str, SocialEdge]]] = {}
        # alter -> set of egos with at least one edge toward alter
        self._in: dict[Uid, set[Uid]] = {}
        self._last_seq: dict[Uid, int] = {}

    # -- vertices ----------------------------------------------------------

    def add_vertex(self, uid: Uid, **attrs) -> VertexAttributes:
        v = self._vertices.get(uid)
        if v is None:
            v = VertexAttributes(uid=uid, **attrs)
            self._vertices[uid] = v
            self._out.setdefault(uid, {})
            self._in.setdefault(uid, set())
        elif attrs:
            self._vertices[uid] = v = replace(v, **attrs)
        return v

    def has_vertex(self, uid: Uid) -> bool:
        return uid in self._vertices

    def vertex(self, uid: Uid) -> VertexAttributes:
        try:
            return self._vertices[uid]
        except KeyError:
            raise UnknownUserError(uid) from None

    def vertices(self) -> Iterator[Uid]:
        return iter(self._vertices)

    def num_vertices(self) -> int:
        return len(self._vertices)

    def set_location(self, uid: Uid, lat: float, lon: float, timestamp: float) -> None:
        self.vertex(uid)
        self._vertices[uid] = replace(
            self._vertices[uid], location=(lat, lon), location_timestamp=timestamp
        )

    # -- edges -------------------------------------------------------------

    def add_edge(
        self,
        ego: Uid,
        alter: Uid,
        label: str,
        weight: float,
        last_interaction: float = 0.0,
    ) -> SocialEdge:
        self.add_vertex(ego)
        self.add_vertex(alter)
        e = SocialEdge(ego, alter, label, _clamp01(weight), last_interaction)
        self._out[ego].setdefault(alter, {})[label] = e
        self._in[alter].add(ego)
        return e

    def remove_edge(self, ego: Uid, alter: Uid, label: str) -> bool:
        labels = self._out.get(ego, {}).get(alter)
        if not labels or label not in labels:
            return False
        del labels[label]
        if not labels:
            del self._out[ego][alter]
            self._in[alter].discard(ego)
        return True

    def edge(self, ego: Uid, alter: Uid, label: str) -> Optional[SocialEdge]:
        return self._out.get(ego, {}).get(alter, {}).get(label)

    def edges_between(self, ego: Uid, alter: Uid) -> dict[str, SocialEdge]:
        """One weight per label; never a merged scalar."""
        return dict(self._out.get(ego, {}).get(alter, {}))

    def out_neighbors(self, ego: Uid) -> Iterator[Uid]:
        return iter(self._out.get(ego, {}))

    def in_neighbors(self, alter: Uid) -> Iterator[Uid]:
        return iter(self._in.get(alter, set()))

    def out_edges(self, ego: Uid) -> Iterator[SocialEdge]:
        for labels in self._out.get(ego, {}).values():
            yield from labels.values()

    def edges(self) -> Iterator[SocialEdge]:
        for ego in self._out:
            yield from self.out_edges(ego)

    def num_edges(self) -> int:
        return sum(1 for _ in self.edges())

    def last_seq(self, ego: Uid) -> int:
        return self._last_seq.get(ego, 0)

    # -- aging -------------------------------------------------------------

    def effective_weight(self, edge: SocialEdge, now: float) -> float:
        """Weight after lazy aging at simulated time ``now`` (pure)."""
        v = self._vertices.get(edge.ego)
        dec = v.aging_decrement if v else DEFAULT_AGING_DECREMENT
        period = v.aging_period if v else DEFAULT_AGING_PERIOD
        idle = now - edge.last_interaction
        if idle < period:
            return edge.weight
        k = int(idle // period)
        return edge.weight * (1.0 - dec) ** k

    def age_edges(self, now: float) -> None:
        """Materialize aging for every edge; idempotent for a fixed ``now``."""
        for e in self.edges():
            v = self._vertices[e.ego]
            idle = now - e.last_interaction
            if idle < v.aging_period:
                continue
            k = int(idle // v.aging_period)
            e.weight *= (1.0 - v.aging_decrement) ** k
            e.last_interaction += k * v.aging_period

    # -- update log --------------------------------------------------------

    def apply_update(self, rec: EdgeUpdateRecord) -> bool:
        """Apply one aggregator record; returns False for a remove no-op.

        Records must arrive gap-free per ego (seq = last applied + 1).
        """
        expected = self._last_seq.get(rec.ego, 0) + 1
        if rec.seq != expected:
            raise ReplayGapError(
                f"ego {rec.ego}: got seq {rec.seq}, expected {expected}"
            )
        self._last_seq[rec.ego] = rec.seq
        self.add_vertex(rec.ego)
        if rec.op == "create":
            self.add_edge(
                rec.ego, rec.alter, rec.label, rec.weight_delta_or_value, rec.issued_at
            )
            return True
        if rec.op == "remove":
            return self.remove_edge(rec.ego, rec.alter, rec.label)
        if rec.op == "adjust-weight":
            e = self.edge(rec.ego, rec.alter, rec.label)
            if e is None:
                # adjusting a missing edge creates it (sensors may race a create)
                self.add_edge(
                    rec.ego,
                    rec.alter,
                    rec.label,
                    rec.weight_delta_or_value,
                    rec.issued_at,
                )
                return True
            if rec.absolute:
                e.weight = _clamp01(rec.weight_delta_or_value)
            else:
                e.weight = _clamp01(e.weight + rec.weight_delta_or_value)
            e.last_interaction = rec.issued_at
            return True
        raise ValueError(f"unknown op {rec.op!r}")

    def replay(self, records: Iterable[EdgeUpdateRecord]) -> None:
        for rec in records:
            self.apply_update(rec)

    # -- subgraphs ---------------------------------------------------------

    def snapshot_subgraph(self, users: Iterable[Uid]) -> "SocialMultiGraph":
        """Induced subgraph: the users, all their incident edges, and the
        boundary vertices those edges touch."""
        users = set(users)
        for u in users:
            if u not in self._vertices:
                raise UnknownUserError(u)
        sub = SocialMultiGraph()
        for u in users:
            sub._vertices[u] = self._vertices[u]
            sub._out.setdefault(u, {})
            sub._in.setdefault(u, set())
        for u in users:
            for e in self.out_edges(u):
                if e.alter not in sub._vertices:
                    sub._vertices[e.alter] = self._vertices[e.alter]
                    sub._out.setdefault(e.alter, {})
                    sub._in.setdefault(e.alter, set())
                sub.add_edge(e.ego, e.alter, e.label, e.weight, e.last_interaction)
            for ego in self._in.get(u, set()):
                if ego in users:
                    continue  # already copied from the ego side
                for label, e in self._out[ego].get(u, {}).items():
                    if ego not in sub._vertices:
                        sub._vertices[ego] = self._vertices[ego]
                        sub._out.setdefault(ego, {})
                        sub._in.setdefault(ego, set())
                    sub.add_edge(e.ego, e.alter, e.label, e.weight, e.last_interaction)
        sub._last_seq = {u: self._last_seq.get(u, 0) for u in users}
        return sub

    def copy(self) -> "SocialMultiGraph":
        return self.snapshot_subgraph(self._vertices)


# -- file formats ----------------------------------------------------------


def _parse_uid(token: str) -> Uid:
    return int(token, 16) if token.lower().startswith("0x") else int(token)


def load_edge_list(path) -> SocialMultiGraph:
    """Line-oriented ``ego alter label weight [last_interaction]`` format."""
    g = SocialMultiGraph()
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) not in (4, 5):
                raise ValueError(f"{path}:{lineno}: expected 4 or 5 fields")
            ego, alter = _parse_uid(parts[0]), _parse_uid(parts[1])
            weight = float(parts[3])
            last = float(parts[4]) if len(parts) == 5 else 0.0
            g.add_edge(ego, alter, parts[2], weight, last)
    return g


def dump_edge_list(graph: SocialMultiGraph, path) -> None:
    with open(path, "w") as fh:
        for ego in sorted(graph.vertices()):
            for alter in sorted(graph._out.get(ego, {})):
                for label in sorted(graph._out[ego][alter]):
                    e = graph._out[ego][alter][label]
                    fh.write(
                        f"{e.ego} {e.alter} {e.label} "
                        f"{e.weight!r} {e.last_interaction!r}\n"
                    )


def load_update_log(path) -> list[EdgeUpdateRecord]:
    records = []
    with open(path) as fh:
        for raw in fh:
            line = raw.strip()
            if line:
                records.append(EdgeUpdateRecord.from_json(line))
    return records


def dump_update_log(records: Iterable[EdgeUpdateRecord], path) -> None:
    with open(path, "w") as fh:
        for rec in records:
            fh.write(rec.to_json() + "\n")
