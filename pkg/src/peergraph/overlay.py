"""Deterministic simulation of the peer network.

Models DHT-style storage with a hop-count cost, trusted-peer groups with
multicast discovery and epoch-based key rotation, TPL caching, append-only
data-file polling, message accounting, latency, and churn.  Cryptography is
structural: envelopes carry (payload, signer, epoch) and the simulator
enforces who may decrypt; no ciphers are run.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional

import numpy as np

from .graph import EdgeUpdateRecord, SocialMultiGraph, Uid

PeerId = int


class ServiceUnavailableError(Exception):
    """No online trusted peer can serve the user."""


class DuplicateUidError(ValueError):
    pass


# -- latency ---------------------------------------------------------------


@dataclass(frozen=True)
class LatencyConfig:
    """Round-trip-time model for one request/response exchange."""

    kind: str = "lognormal"  # constant | uniform | two-class | lognormal
    constant: float = 0.25
    lo: float = 0.1
    hi: float = 0.4
    mean: float = 0.25  # lognormal mean RTT in seconds
    sigma: float = 0.8  # lognormal shape (heavy tail)
    intra_lo: float = 0.015
    intra_hi: float = 0.035
    inter_lo: float = 0.15
    inter_hi: float = 0.45
    regions: int = 8  # for the two-class model


class LatencyModel:
    """Deterministic RTT sampler: the draw depends only on the seed, the
    endpoint pair, and the caller-supplied salt, never on call order."""

    def __init__(self, config: LatencyConfig, seed: int):
        self.config = config
        self.seed = seed

    def _rng(self, *salt: int) -> np.random.Generator:
        return np.random.default_rng(
            np.random.SeedSequence([self.seed & 0xFFFFFFFF, *(s & 0xFFFFFFFF for s in salt)])
        )

    def region(self, peer: PeerId) -> int:
        return int(self._rng(0x5E61, peer).integers(self.config.regions))

    def rtt(self, src: PeerId, dst: PeerId, *salt: int) -> float:
        c = self.config
        rng = self._rng(1, src, dst, *salt)
        if c.kind == "constant":
            return c.constant
        if c.kind == "uniform":
            return float(rng.uniform(c.lo, c.hi))
        if c.kind == "two-class":
            if self.region(src) == self.region(dst):
                return float(rng.uniform(c.intra_lo, c.intra_hi))
            return float(rng.uniform(c.inter_lo, c.inter_hi))
        if c.kind == "lognormal":
            mu = math.log(c.mean) - c.sigma**2 / 2.0
            return float(rng.lognormal(mu, c.sigma))
        raise ValueError(f"unknown latency kind {c.kind!r}")


# -- config ----------------------------------------------------------------


@dataclass
class SimConfig:
    rng_seed: int = 0
    latency: LatencyConfig = field(default_factory=LatencyConfig)
    churn_rate: float = 0.0  # stationary offline fraction, <= 0.05 typical
    churn_tick: float = 1.0
    churn_speed: float = 0.1  # per-tick transition scale
    poll_period: float = 10.0
    dht_base: int = 16


def dht_lookup_hops(num_peers: int, base: int = 16) -> int:
    if num_peers <= 1:
        return 1
    return max(1, math.ceil(math.log(num_peers, base)))


# -- peers and groups ------------------------------------------------------


@dataclass
class TrustedPeerGroup:
    owner: Uid
    members: set = field(default_factory=set)
    key_epoch: int = 0

    @property
    def handle(self) -> str:
        return f"Trusted_Peer_Group{self.owner}"


@dataclass
class TrustedPeerList:
    owner: Uid
    entries: list  # (peer_id, latency) ascending by latency
    fetched_at: float
    version: int

    def peers(self) -> list[PeerId]:
        return [p for p, _lat in self.entries]


@dataclass
class PeerNode:
    peer_id: PeerId
    owner: Optional[Uid] = None
    online: bool = True
    address_gen: int = 0
    trusted_users: set = field(default_factory=set)
    local_graphs: dict = field(default_factory=dict)  # uid -> SocialMultiGraph
    graph_epoch: dict = field(default_factory=dict)  # uid -> key epoch of the copy
    tpl_cache: dict = field(default_factory=dict)  # uid -> TrustedPeerList
    high_water: dict = field(default_factory=dict)  # uid -> applied seq

    @property
    def address(self) -> str:
        return f"addr-{self.peer_id}-{self.address_gen}"


class OverlaySim:
    """Single-threaded discrete-event loop owning all mutable peer state."""

    def __init__(self, config: Optional[SimConfig] = None):
        self.config = config or SimConfig()
        self.latency = LatencyModel(self.config.latency, self.config.rng_seed)
        self.now = 0.0
        self._events: list = []
        self._event_seq = 0
        self.peers: dict[PeerId, PeerNode] = {}
        self.groups: dict[Uid, TrustedPeerGroup] = {}
        self.dht: dict[str, object] = {}
        self.data_files: dict[Uid, list[EdgeUpdateRecord]] = {}
        self.data_versions: dict[Uid, int] = {}
        self.tpl_versions: dict[Uid, int] = {}
        self.messages_sent = 0
        self.deliveries = 0
        self.drops = 0
        self.trace: Optional[list] = None
        self._churn_rng = np.random.default_rng(
            np.random.SeedSequence([self.config.rng_seed & 0xFFFFFFFF, 0xC4D2])
        )
        self.master_graph: Optional[SocialMultiGraph] = None

    # -- event loop --------------------------------------------------------

    def schedule(self, delay: float, fn: Callable[[], None]) -> None:
        self._event_seq += 1
        heapq.heappush(self._events, (self.now + delay, self._event_seq, fn))

    def run_until(self, t: float) -> None:
        while self._events and self._events[0][0] <= t:
            when, _seq, fn = heapq.heappop(self._events)
            self.now = when
            fn()
        self.now = max(self.now, t)

    # -- message accounting ------------------------------------------------

    def send(self, src: PeerId, dst: PeerId, kind: str = "msg", user=None) -> bool:
        self.messages_sent += 1
        dst_peer = self.peers.get(dst)
        delivered = dst_peer is not None and dst_peer.online
        if delivered:
            self.deliveries += 1
        else:
            self.drops += 1
        if self.trace is not None:
            self.trace.append((self.now, kind, src, dst, user))
        return delivered

    def charge_dht(self, src: PeerId, kind: str, user=None) -> int:
        hops = dht_lookup_hops(max(1, len(self.peers)), self.config.dht_base)
        for _ in range(hops):
            self.messages_sent += 1
            self.deliveries += 1
            if self.trace is not None:
                self.trace.append((self.now, f"dht-{kind}", src, -1, user))
        return hops

    # -- membership --------------------------------------------------------

    def add_peer(self, peer_id: PeerId, owner: Optional[Uid] = None) -> PeerNode:
        peer = PeerNode(peer_id=peer_id, owner=owner)
        self.peers[peer_id] = peer
        return peer

    def register_user(self, uid: Uid, contributed_peers: Iterable[PeerId]) -> None:
        key = f"uid:{uid}"
        if key in self.dht:
            raise DuplicateUidError(f"uid {uid} already registered")
        endpoints = [self.peers[p].address for p in contributed_peers]
        via = next(iter(contributed_peers), 0) if contributed_peers else 0
        self.charge_dht(via, "put", uid)
        self.dht[key] = {"endpoints": endpoints, "signer": uid}
        self.groups.setdefault(uid, TrustedPeerGroup(owner=uid))

    def refresh_endpoint(self, uid: Uid, peer_id: PeerId) -> None:
        entry = self.dht.get(f"uid:{uid}")
        if entry is None:
            return
        addr = self.peers[peer_id].address
        prefix = f"addr-{peer_id}-"
        entry["endpoints"] = [
            addr if e.startswith(prefix) else e for e in entry["endpoints"]
        ]

    def lookup_user(self, uid: Uid, via: PeerId = 0) -> list[str]:
        key = f"uid:{uid}"
        self.charge_dht(via, "get", uid)
        if key not in self.dht:
            raise KeyError(f"uid {uid} not registered")
        return list(self.dht[key]["endpoints"])

    def handshake_add_trusted(self, user: Uid, candidate_peer: PeerId) -> bool:
        """Three-step handshake (invite, accept, keys) plus group subscribe.

        Charges exactly 4 messages on success, 1 on an offline candidate,
        0 on an idempotent re-add.
        """
        group = self.groups.setdefault(user, TrustedPeerGroup(owner=user))
        if candidate_peer in group.members:
            return True
        peer = self.peers[candidate_peer]
        origin = self._user_home_peer(user)
        if not self.send(origin, candidate_peer, "invite", user):
            return False
        self.send(candidate_peer, origin, "accept", user)
        self.send(origin, candidate_peer, "keys", user)
        self.send(candidate_peer, origin, "subscribe", user)
        group.members.add(candidate_peer)
        peer.trusted_users.add(user)
        peer.graph_epoch[user] = group.key_epoch
        if self.master_graph is not None and self.master_graph.has_vertex(user):
            peer.local_graphs[user] = self.master_graph.snapshot_subgraph({user})
        self.tpl_versions[user] = self.tpl_versions.get(user, 0) + 1
        return True

    def remove_trusted(
        self, user: Uid, peer_id: PeerId, initiator: str = "owner"
    ) -> None:
        """Key rotation on removal: unicast new keys to each remaining member,
        multicast the removal to the group; the removed copy goes stale."""
        group = self.groups[user]
        if peer_id not in group.members:
            raise KeyError(f"peer {peer_id} not in group of {user}")
        if initiator not in ("owner", "peer"):
            raise ValueError("initiator must be 'owner' or 'peer'")
        group.members.discard(peer_id)
        group.key_epoch += 1
        origin = self._user_home_peer(user)
        for member in sorted(group.members):
            self.send(origin, member, "new-keys", user)
            self.peers[member].graph_epoch[user] = group.key_epoch
        self.send(origin, peer_id, "removal-multicast", user)
        self.data_versions[user] = self.data_versions.get(user, 0) + 1
        removed = self.peers[peer_id]
        removed.trusted_users.discard(user)
        removed.local_graphs.pop(user, None)
        removed.graph_epoch.pop(user, None)
        self.tpl_versions[user] = self.tpl_versions.get(user, 0) + 1

    def _user_home_peer(self, user: Uid) -> PeerId:
        group = self.groups.get(user)
        if group and group.members:
            return min(group.members)
        return 0

    def service_available(self, user: Uid) -> bool:
        group = self.groups.get(user)
        return bool(
            group and any(self.peers[m].online for m in group.members)
        )

    # -- TPL ---------------------------------------------------------------

    def resolve_tpl(
        self, requesting_peer: PeerId, target_user: Uid, use_cache: bool = True
    ) -> TrustedPeerList:
        """Multicast discovery of a user's online trusted peers.

        A cache hit costs zero messages; a miss costs the DHT route to the
        group handle plus one response per online member.
        """
        peer = self.peers[requesting_peer]
        version = self.tpl_versions.get(target_user, 0)
        if use_cache:
            cached = peer.tpl_cache.get(target_user)
            if cached is not None and cached.version == version:
                stale = [
                    p for p in cached.peers() if not self.peers[p].online
                ]
                if not stale:
                    return cached
                # unresponsive member: invalidate and re-resolve
                del peer.tpl_cache[target_user]
        group = self.groups.get(target_user)
        if group is None:
            raise ServiceUnavailableError(f"user {target_user} has no trusted group")
        self.charge_dht(requesting_peer, "multicast", target_user)
        entries = []
        for member in sorted(group.members):
            if not self.peers[member].online:
                continue
            self.send(member, requesting_peer, "tpl-response", target_user)
            lat = self.latency.rtt(requesting_peer, member, 2, version)
            entries.append((member, lat))
        entries.sort(key=lambda e: (e[1], e[0]))
        tpl = TrustedPeerList(target_user, entries, self.now, version)
        if entries:
            peer.tpl_cache[target_user] = tpl
        return tpl

    def invalidate_tpl(self, requesting_peer: PeerId, target_user: Uid) -> None:
        self.peers[requesting_peer].tpl_cache.pop(target_user, None)

    # -- append-only data files -------------------------------------------

    def store_user_data(self, user: Uid, records: Iterable[EdgeUpdateRecord]) -> None:
        file = self.data_files.setdefault(user, [])
        for rec in records:
            if file and rec.seq != file[-1].seq + 1:
                raise ValueError(
                    f"append-only file for {user}: seq {rec.seq} after {file[-1].seq}"
                )
            if not file and rec.seq != 1:
                raise ValueError(f"first record for {user} must have seq 1")
            file.append(rec)

    def fetch_new_records(self, peer_id: PeerId, user: Uid) -> int:
        """Poll the user's file and apply records above the high-water mark."""
        peer = self.peers[peer_id]
        if user not in peer.trusted_users:
            raise PermissionError(f"peer {peer_id} is not trusted by {user}")
        self.charge_dht(peer_id, "fetch", user)
        self.send(-1, peer_id, "fetch-response", user)
        mark = peer.high_water.get(user, 0)
        new = [r for r in self.data_files.get(user, []) if r.seq > mark]
        graph = peer.local_graphs.setdefault(user, SocialMultiGraph())
        for rec in new:
            graph.apply_update(rec)
        if new:
            peer.high_water[user] = new[-1].seq
        return len(new)

    def start_polling(self, phase_step: float = 0.0) -> None:
        """Recurring per-peer polls of every trusted user's file."""

        def make_poll(peer_id: PeerId, phase: float):
            def poll():
                peer = self.peers[peer_id]
                if peer.online:
                    for user in sorted(peer.trusted_users):
                        self.fetch_new_records(peer_id, user)
                self.schedule(self.config.poll_period, poll)

            return poll

        for i, peer_id in enumerate(sorted(self.peers)):
            self.schedule(i * phase_step, make_poll(peer_id, i * phase_step))

    # -- churn -------------------------------------------------------------

    def start_churn(self) -> None:
        rate = self.config.churn_rate
        if rate <= 0:
            return
        speed = self.config.churn_speed
        p_off = rate * speed
        p_on = (1.0 - rate) * speed

        def tick():
            for peer_id in sorted(self.peers):
                peer = self.peers[peer_id]
                u = self._churn_rng.random()
                if peer.online and u < p_off:
                    peer.online = False
                elif not peer.online and u < p_on:
                    peer.online = True
                    peer.address_gen += 1
                    if peer.owner is not None:
                        self.refresh_endpoint(peer.owner, peer_id)
            self.schedule(self.config.churn_tick, tick)

        self.schedule(self.config.churn_tick, tick)
