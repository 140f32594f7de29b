"""Per-node routing state machine: discovery, selection and maintenance.

Discovery floods a route request only over links that pass the stability
gate. Every intermediate node buffers the copies it hears for one wait period
in its neighbor information table (NIT), forwards the single best copy, and
ignores the rest. The destination collects the surviving paths for a window,
keeps a node-disjoint subset ranked by cumulative bandwidth and replies along
each. Maintenance reports a degraded upstream link with NODEOFF; the
predecessor turns that into ROUTEDISABLE toward the source, which fails over
to a backup or rediscovers.

The ``net`` argument threaded through :class:`Node` is the simulation engine;
see :class:`ndmlnr.engine.Simulator` for the calls it must answer.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterable, Optional

from .kinematics import NodeKinematics
from .stability import LinkMetrics, carried_lsd, link_eligible

PRIMARY = "primary"
BACKUP = "backup"
DISABLED = "disabled"

RREQ = "RREQ"
RREP = "RREP"
NODEOFF = "NODEOFF"
ROUTEDISABLE = "ROUTEDISABLE"
DATA = "DATA"
MESSAGE_KINDS = (RREQ, RREP, NODEOFF, ROUTEDISABLE, DATA)


def path_str(path: Iterable[int]) -> str:
    return "-".join(str(n) for n in path)


@dataclass(frozen=True)
class RouteRequest:
    source: int
    destination: int
    request_id: int
    ttl: int = 0
    hops: int = 0
    bandwidth: float = 0.0
    lsd: float = 0.0
    path: tuple[int, ...] = ()
    fwd_velocity: float = 0.0
    fwd_heading: float = 0.0
    fwd_position: tuple[float, float] = (0.0, 0.0)
    packet_type: str = RREQ

    @property
    def key(self) -> tuple[int, int, int]:
        return (self.source, self.destination, self.request_id)


@dataclass(frozen=True)
class NeighborInfoEntry:
    source: int
    destination: int
    request_id: int
    hops: int
    lsd: float
    bandwidth: float
    previous_hop: int
    arrival_seq: int
    path: tuple[int, ...] = ()

    @property
    def key(self) -> tuple[int, int, int]:
        return (self.source, self.destination, self.request_id)

    def as_row(self) -> str:
        return f"({self.source},{self.destination},{self.request_id},{self.hops},{_num(self.lsd)},{_num(self.bandwidth)})"


@dataclass
class Route:
    path: tuple[int, ...]
    bandwidth: float
    status: str = PRIMARY
    request_id: int = 0
    installed_at: Optional[float] = None
    disabled_at: Optional[float] = None
    install_order: int = 0

    @property
    def source(self) -> int:
        return self.path[0]

    @property
    def destination(self) -> int:
        return self.path[-1]

    @property
    def key(self) -> tuple[int, tuple[int, ...]]:
        return (self.request_id, self.path)


@dataclass(frozen=True)
class ControlMessage:
    kind: str
    path: tuple[int, ...]
    bandwidth: float
    request_id: int
    reporter: int
    rank: int = 0

    @property
    def route_key(self) -> tuple[int, tuple[int, ...]]:
        return (self.request_id, self.path)


@dataclass(frozen=True)
class Candidate:
    path: tuple[int, ...]
    bandwidth: float
    arrival_seq: int

    @property
    def hops(self) -> int:
        return len(self.path) - 1


@dataclass(frozen=True)
class DataPacket:
    path: tuple[int, ...]
    request_id: int
    seq: int


def _num(v: float):
    return int(v) if float(v).is_integer() else v


# -- pure operations -------------------------------------------------------


def originate_discovery(
    source: int, destination: int, request_id: int, kin: NodeKinematics, ttl_limit: int = 0
) -> RouteRequest:
    if source == destination:
        raise ValueError("source and destination must differ")
    return RouteRequest(
        source=source,
        destination=destination,
        request_id=request_id,
        ttl=ttl_limit,
        path=(source,),
        fwd_velocity=kin.speed,
        fwd_heading=kin.heading,
        fwd_position=(kin.x, kin.y),
    )


def ttl_exhausted(rreq: RouteRequest, ttl_limit: int) -> bool:
    return ttl_limit > 0 and rreq.hops >= ttl_limit


def make_entry(rreq: RouteRequest, link: LinkMetrics, lsd_mode: str, arrival_seq: int) -> NeighborInfoEntry:
    """NIT row for ``rreq`` after it crossed ``link`` into this node."""
    return NeighborInfoEntry(
        source=rreq.source,
        destination=rreq.destination,
        request_id=rreq.request_id,
        hops=rreq.hops + 1,
        lsd=carried_lsd(rreq.lsd, link.lsd, rreq.hops, lsd_mode),
        bandwidth=rreq.bandwidth + link.bandwidth,
        previous_hop=rreq.path[-1],
        arrival_seq=arrival_seq,
        path=rreq.path,
    )


def _selection_key(e: NeighborInfoEntry):
    return (-e.lsd, e.hops, -e.bandwidth, e.arrival_seq)


def select_rreq(entries: list[NeighborInfoEntry]) -> NeighborInfoEntry:
    """Highest LSD wins; then fewer hops, higher bandwidth, earliest arrival."""
    if not entries:
        raise ValueError("cannot select from an empty NIT")
    return min(entries, key=_selection_key)


def forward_rreq(node: int, winner: NeighborInfoEntry, template: RouteRequest, kin: NodeKinematics) -> RouteRequest:
    path = winner.path + (node,)
    # ttl holds the remaining hop budget; 0 means unlimited
    limit = template.ttl + template.hops if template.ttl else 0
    ttl = max(limit - (len(path) - 1), 0) if limit else 0
    return replace(
        template,
        ttl=ttl,
        hops=len(path) - 1,
        bandwidth=winner.bandwidth,
        lsd=winner.lsd,
        path=path,
        fwd_velocity=kin.speed,
        fwd_heading=kin.heading,
        fwd_position=(kin.x, kin.y),
    )


def shared_intermediate(a: tuple[int, ...], b: tuple[int, ...]) -> Optional[int]:
    common = set(a[1:-1]) & set(b[1:-1])
    return min(common) if common else None


def candidate_order(c: Candidate):
    return (-c.bandwidth, c.hops, c.arrival_seq)


def destination_collect(candidates: list[Candidate]) -> tuple[list[Candidate], list[tuple[Candidate, int]]]:
    """Greedy node-disjoint selection by bandwidth.

    Returns the accepted candidates in acceptance order and the rejected ones
    paired with the first intermediate node they share with an accepted path.
    """
    accepted: list[Candidate] = []
    rejected: list[tuple[Candidate, int]] = []
    for cand in sorted(candidates, key=candidate_order):
        clash = None
        for other in accepted:
            clash = shared_intermediate(cand.path, other.path)
            if clash is not None:
                break
        if clash is None:
            accepted.append(cand)
        else:
            rejected.append((cand, clash))
    return accepted, rejected


# -- node state machine ----------------------------------------------------


@dataclass
class DestinationRound:
    started: float
    candidates: list[Candidate] = field(default_factory=list)
    closed: bool = False
    accepted: list[Candidate] = field(default_factory=list)
    rejected: list[tuple[Candidate, int]] = field(default_factory=list)


@dataclass
class Discovery:
    destination: int
    request_id: int
    started: float
    first_install: Optional[float] = None
    failed: bool = False


@dataclass
class Flow:
    index: int
    source: int
    destination: int
    start: float
    rate: float = 0.0
    jitter: float = 0.0
    sent: int = 0


class Node:
    def __init__(self, node_id: int):
        self.id = node_id
        self.nit: dict[tuple[int, int, int], list[NeighborInfoEntry]] = {}
        self.forwarded: set[tuple[int, int, int]] = set()
        self.arrival_counter = 0
        self.rounds: dict[tuple[int, int, int], DestinationRound] = {}
        # route key -> (path, active) for routes this node relays
        self.memberships: dict[tuple[int, tuple[int, ...]], list] = {}
        self.routes: dict[int, list[Route]] = {}
        self.discoveries: list[Discovery] = []
        self.next_request_id = 1
        self.installs = 0

    def __repr__(self):
        return f"Node({self.id})"

    def _next_arrival(self) -> int:
        self.arrival_counter += 1
        return self.arrival_counter

    def _eligible_neighbors(self, net, exclude: set[int]) -> dict[int, LinkMetrics]:
        out = {}
        for n in net.neighbors(self.id):
            if n in exclude:
                continue
            link = net.link(self.id, n)
            if link is not None and link_eligible(link, net.protocol):
                out[n] = link
        return out

    # discovery -----------------------------------------------------------

    def start_discovery(self, net, destination: int) -> Optional[Discovery]:
        rid = self.next_request_id
        self.next_request_id += 1
        rreq = originate_discovery(self.id, destination, rid, net.kinematics(self.id), net.protocol.ttl_limit)
        disc = Discovery(destination=destination, request_id=rid, started=net.now)
        self.discoveries.append(disc)
        net.record(self.id, "DISCOVERY_START", sa=self.id, da=destination, id=rid)
        targets = self._eligible_neighbors(net, {self.id})
        if not targets:
            disc.failed = True
            net.record(self.id, "DISCOVERY_FAIL", sa=self.id, da=destination, id=rid, reason="no_eligible_neighbor")
            return disc
        net.broadcast(self.id, RREQ, rreq, targets, **_rreq_detail(rreq))
        return disc

    def on_rreq(self, net, sender: int, rreq: RouteRequest, link: LinkMetrics) -> None:
        key = rreq.key
        base = dict(sa=rreq.source, da=rreq.destination, id=rreq.request_id)
        if self.id in rreq.path:
            net.record(self.id, "RREQ_DROP", **base, reason="loop")
            return
        if ttl_exhausted(rreq, net.protocol.ttl_limit):
            net.record(self.id, "RREQ_DROP", **base, reason="ttl")
            return
        if self.id == rreq.destination:
            self._collect_arrival(net, rreq, link)
            return
        if key in self.forwarded:
            net.record(self.id, "RREQ_DROP", **base, reason="late")
            return
        entry = make_entry(rreq, link, net.protocol.lsd_mode, self._next_arrival())
        entries = self.nit.setdefault(key, [])
        entries.append(entry)
        net.record(self.id, "NIT_ADD", **base, hops=entry.hops, lsd=entry.lsd, bw=entry.bandwidth,
                   prev=entry.previous_hop, seq=entry.arrival_seq)
        if len(entries) == 1:
            net.schedule("wait_timer", net.protocol.wait_period, (self.id, key, rreq))

    def on_wait_timer(self, net, key: tuple[int, int, int], template: RouteRequest) -> None:
        entries = self.nit.pop(key, [])
        if not entries or key in self.forwarded:
            return
        self.forwarded.add(key)
        winner = select_rreq(entries)
        net.record(self.id, "NIT_SELECT", sa=key[0], da=key[1], id=key[2], hops=winner.hops, lsd=winner.lsd,
                   bw=winner.bandwidth, prev=winner.previous_hop, seq=winner.arrival_seq, entries=len(entries),
                   table=";".join(e.as_row() for e in entries))
        out = forward_rreq(self.id, winner, template, net.kinematics(self.id))
        # nodes that sent us this round already forwarded it
        exclude = set(out.path) | {e.previous_hop for e in entries}
        targets = self._eligible_neighbors(net, exclude)
        if not targets:
            net.record(self.id, "RREQ_DEAD", sa=key[0], da=key[1], id=key[2], path=path_str(out.path))
            return
        net.broadcast(self.id, RREQ, out, targets, **_rreq_detail(out))

    def _collect_arrival(self, net, rreq: RouteRequest, link: LinkMetrics) -> None:
        key = rreq.key
        rnd = self.rounds.get(key)
        if rnd is None:
            rnd = self.rounds[key] = DestinationRound(started=net.now)
            net.schedule("window_close", net.protocol.dest_window, (self.id, key))
        if rnd.closed:
            net.record(self.id, "RREQ_DROP", sa=key[0], da=key[1], id=key[2], reason="closed")
            return
        cand = Candidate(path=rreq.path + (self.id,), bandwidth=rreq.bandwidth + link.bandwidth,
                         arrival_seq=self._next_arrival())
        rnd.candidates.append(cand)
        net.record(self.id, "CANDIDATE", sa=key[0], da=key[1], id=key[2], path=path_str(cand.path),
                   bw=cand.bandwidth, hops=cand.hops, seq=cand.arrival_seq)

    def on_window_close(self, net, key: tuple[int, int, int]) -> None:
        rnd = self.rounds[key]
        rnd.closed = True
        if not rnd.candidates:
            return
        rnd.accepted, rnd.rejected = destination_collect(rnd.candidates)
        base = dict(sa=key[0], da=key[1], id=key[2])
        for cand in rnd.accepted:
            net.record(self.id, "PATH_ACCEPT", **base, path=path_str(cand.path), bw=cand.bandwidth)
        for cand, node in rnd.rejected:
            net.record(self.id, "PATH_REJECT", **base, path=path_str(cand.path), bw=cand.bandwidth, shares=node)
        for rank, cand in enumerate(rnd.accepted):
            msg = ControlMessage(RREP, cand.path, cand.bandwidth, key[2], self.id, rank)
            net.unicast(self.id, RREP, msg, cand.path[-2], **_ctl_detail(msg))

    # replies and installation -------------------------------------------

    def on_rrep(self, net, sender: int, msg: ControlMessage) -> None:
        idx = msg.path.index(self.id)
        if idx == 0:
            self._install(net, msg)
            return
        self.memberships[msg.route_key] = [msg.path, True]
        net.unicast(self.id, RREP, msg, msg.path[idx - 1], **_ctl_detail(msg))

    def _install(self, net, msg: ControlMessage) -> None:
        table = self.routes.setdefault(msg.path[-1], [])
        if any(r.key == msg.route_key for r in table):
            return
        self.installs += 1
        route = Route(path=msg.path, bandwidth=msg.bandwidth, status=BACKUP, request_id=msg.request_id,
                      installed_at=net.now, install_order=self.installs)
        if msg.rank == 0:
            for r in table:
                if r.status == PRIMARY:
                    r.status = BACKUP
                    net.record(self.id, "ROUTE_DEMOTE", path=path_str(r.path), bw=r.bandwidth, id=r.request_id)
            route.status = PRIMARY
        table.append(route)
        for disc in self.discoveries:
            if disc.request_id == msg.request_id and disc.first_install is None:
                disc.first_install = net.now
        net.record(self.id, "ROUTE_INSTALL", path=path_str(route.path), bw=route.bandwidth, status=route.status,
                   id=route.request_id)

    def primary_route(self, destination: int) -> Optional[Route]:
        for r in self.routes.get(destination, []):
            if r.status == PRIMARY:
                return r
        return None

    def _promote_backup(self, net, destination: int) -> Optional[Route]:
        backups = [r for r in self.routes.get(destination, []) if r.status == BACKUP]
        if not backups:
            return None
        best = min(backups, key=lambda r: (-r.bandwidth, len(r.path), r.install_order))
        best.status = PRIMARY
        net.record(self.id, "ROUTE_PROMOTE", path=path_str(best.path), bw=best.bandwidth, id=best.request_id)
        return best

    # maintenance ----------------------------------------------------------

    def check_stability(self, net) -> None:
        """Report every active route whose upstream link has fallen below the threshold."""
        thr = net.protocol.lsd_threshold
        for route_key in sorted(self.memberships):
            path, active = self.memberships[route_key]
            if not active:
                continue
            idx = path.index(self.id)
            pred = path[idx - 1]
            link = net.link(pred, self.id)
            lsd = link.lsd if link is not None else 0.0
            if lsd < thr:
                self.memberships[route_key][1] = False
                msg = ControlMessage(NODEOFF, path, 0.0, route_key[0], self.id)
                net.unicast(self.id, NODEOFF, msg, pred, link_lsd=lsd, **_ctl_detail(msg))

    def on_nodeoff(self, net, sender: int, msg: ControlMessage) -> None:
        self._disable_and_relay(net, msg, "NODEOFF_IGNORED")

    def on_routedisable(self, net, sender: int, msg: ControlMessage) -> None:
        self._disable_and_relay(net, msg, "ROUTEDISABLE_IGNORED")

    def _disable_and_relay(self, net, msg: ControlMessage, ignored_event: str) -> None:
        idx = msg.path.index(self.id)
        if idx == 0:
            self._source_disable(net, msg, ignored_event)
            return
        member = self.memberships.get(msg.route_key)
        if member is None or not member[1]:
            net.record(self.id, ignored_event, path=path_str(msg.path), id=msg.request_id)
            return
        member[1] = False
        out = replace(msg, kind=ROUTEDISABLE)
        net.unicast(self.id, ROUTEDISABLE, out, msg.path[idx - 1], **_ctl_detail(out))

    def _source_disable(self, net, msg: ControlMessage, ignored_event: str) -> None:
        dest = msg.path[-1]
        route = next((r for r in self.routes.get(dest, []) if r.key == msg.route_key), None)
        if route is None or route.status == DISABLED:
            net.record(self.id, ignored_event, path=path_str(msg.path), id=msg.request_id)
            return
        was_primary = route.status == PRIMARY
        route.status = DISABLED
        route.disabled_at = net.now
        net.record(self.id, "ROUTE_DISABLE", path=path_str(route.path), bw=route.bandwidth, id=route.request_id,
                   reporter=msg.reporter)
        if was_primary and self._promote_backup(net, dest) is None:
            self.start_discovery(net, dest)

    # data plane -----------------------------------------------------------

    def emit_data(self, net, flow: Flow) -> None:
        route = self.primary_route(flow.destination)
        if route is None:
            route = self._promote_backup(net, flow.destination)
        if route is None:
            if not any(d.destination == flow.destination for d in self.discoveries):
                self.start_discovery(net, flow.destination)
            else:
                net.record(self.id, "DATA_DROP", da=flow.destination, reason="no_route")
            return
        flow.sent += 1
        pkt = DataPacket(route.path, route.request_id, flow.sent)
        net.unicast(self.id, DATA, pkt, route.path[1], path=path_str(pkt.path), seq=pkt.seq)

    def on_data(self, net, sender: int, pkt: DataPacket) -> None:
        idx = pkt.path.index(self.id)
        if idx == len(pkt.path) - 1:
            net.record(self.id, "DATA_DELIVERED", sa=pkt.path[0], path=path_str(pkt.path), seq=pkt.seq)
            return
        net.unicast(self.id, DATA, pkt, pkt.path[idx + 1], path=path_str(pkt.path), seq=pkt.seq)


def _rreq_detail(rreq: RouteRequest) -> dict:
    return dict(sa=rreq.source, da=rreq.destination, id=rreq.request_id, hops=rreq.hops, lsd=rreq.lsd,
                bw=rreq.bandwidth, path=path_str(rreq.path))


def _ctl_detail(msg: ControlMessage) -> dict:
    return dict(path=path_str(msg.path), bw=msg.bandwidth, id=msg.request_id, reporter=msg.reporter, rank=msg.rank)
