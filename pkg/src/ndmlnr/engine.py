"""Deterministic discrete-event core.

Events pop in ascending ``(time, kind rank, seq)``. At equal times, packet
deliveries run before wait timers, so a copy sent at the instant a neighbor's
timer expires still lands in that neighbor's table first.
"""

from __future__ import annotations

import heapq
import itertools
import logging
import random
from collections import Counter
from dataclasses import dataclass, field
from typing import Any, Optional

from . import energy as en
from .kinematics import NodeKinematics, advance, in_range
from .protocol import DATA, NODEOFF, RREP, RREQ, ROUTEDISABLE, Flow, MESSAGE_KINDS, Node
from .report import RunReport, report_from_nodes
from .scenario import Scenario, ScenarioError, semantic_errors
from .stability import LinkMetrics, link_lsd_source
from .trace import TraceRecord

log = logging.getLogger(__name__)

EVENT_KINDS = ("delivery", "wait_timer", "window_close", "sample_tick", "motion_tick", "data_emit")
KIND_RANK = {k: i for i, k in enumerate(EVENT_KINDS)}


@dataclass(order=True)
class Event:
    time: float
    rank: int
    seq: int
    kind: str = field(compare=False)
    payload: Any = field(compare=False, default=None)


@dataclass(frozen=True)
class Delivery:
    sender: int
    receiver: int
    kind: str
    message: Any
    addressed: bool
    link: Optional[LinkMetrics] = None


class Simulator:
    """One run of one scenario. Owns every node's state; not shared across threads."""

    def __init__(self, scenario: Scenario, seed: Optional[int] = None):
        errors = semantic_errors(scenario)
        if errors:
            raise ScenarioError(errors)
        self.scenario = scenario
        self.protocol = scenario.protocol
        self.radio = scenario.radio
        self.energy_cfg = scenario.energy
        self.seed = scenario.seed if seed is None else seed
        self.rng = random.Random(self.seed)
        self.ids = sorted(n.id for n in scenario.nodes)
        self.kin: dict[int, NodeKinematics] = {n.id: n.kinematics for n in scenario.nodes}
        self.initial_energy = {n.id: n.energy for n in scenario.nodes}
        self.energy = {n.id: en.initial_state(n.energy, self.energy_cfg) for n in scenario.nodes}
        self.nodes = {i: Node(i) for i in self.ids}
        self.flows = [Flow(idx, f.source, f.destination, f.time, f.rate, f.jitter)
                      for idx, f in enumerate(scenario.workload)]
        self.now = 0.0
        self.trace: list[TraceRecord] = []
        self.counts: Counter = Counter()
        self._queue: list[Event] = []
        self._seq = itertools.count()
        self._dead_reported: set[int] = set()

    # -- services used by protocol nodes ----------------------------------

    def kinematics(self, node: int) -> NodeKinematics:
        return self.kin[node]

    def alive(self, node: int) -> bool:
        return self.energy[node].alive

    def neighbors(self, node: int) -> list[int]:
        k = self.kin[node]
        return [m for m in self.ids if m != node and self.alive(m) and in_range(k, self.kin[m], self.radio)]

    def link(self, sender: int, receiver: int) -> Optional[LinkMetrics]:
        if not (self.alive(sender) and self.alive(receiver)):
            return None
        if not in_range(self.kin[sender], self.kin[receiver], self.radio):
            return None
        return link_lsd_source(
            sender, receiver, self.scenario.metric_mode,
            link_table=self.scenario.link_table,
            kinematics=self.kin,
            drain_rates={sender: self.energy[sender].drain_rate, receiver: self.energy[receiver].drain_rate},
            radio=self.radio,
        )

    def record(self, node, event: str, **detail) -> None:
        self.trace.append(TraceRecord(self.now, node, event, detail))

    def schedule(self, kind: str, delay: float, payload: Any = None) -> None:
        self._push(self.now + delay, kind, payload)

    def broadcast(self, sender: int, kind: str, message, targets: dict[int, LinkMetrics], **detail) -> None:
        self._transmit(sender, kind, message, targets, detail)

    def unicast(self, sender: int, kind: str, message, to: int, **detail) -> None:
        self._transmit(sender, kind, message, {to: None}, detail)

    # -- internals -----------------------------------------------------------

    def _push(self, time: float, kind: str, payload: Any) -> None:
        heapq.heappush(self._queue, Event(time, KIND_RANK[kind], next(self._seq), kind, payload))

    def _charge(self, node: int, amount: float) -> float:
        before = self.energy[node]
        self.energy[node] = en.charge(before, amount)
        return min(amount, before.residual)

    def _check_death(self, node: int) -> None:
        if not self.alive(node) and node not in self._dead_reported:
            self._dead_reported.add(node)
            self.record(node, "NODE_DEAD")

    def _transmit(self, sender: int, kind: str, message, targets: dict, detail: dict) -> None:
        if not self.alive(sender):
            self.record(sender, "SUPPRESSED", kind=kind)
            return
        receivers = self.neighbors(sender)
        cost = self._charge(sender, self.energy_cfg.tx_cost)
        self.counts[kind] += 1
        self.record(sender, kind, to=",".join(str(t) for t in sorted(targets)), **detail, cost=cost,
                    energy=self.energy[sender].residual)
        for t in sorted(targets):
            if t not in receivers:
                self.record(sender, f"{kind}_LOST", to=t)
        self._check_death(sender)
        at = self.now + self.radio.hop_delay
        for r in receivers:
            self._push(at, "delivery", Delivery(sender, r, kind, message, r in targets, targets.get(r)))

    def _deliver(self, d: Delivery) -> None:
        node = d.receiver
        if not self.alive(node):
            self.record(node, "SUPPRESSED", kind=d.kind, **{"from": d.sender})
            return
        if not d.addressed:
            cost = self._charge(node, self.energy_cfg.overhear_cost)
            self.record(node, "OVERHEAR", kind=d.kind, cost=cost, energy=self.energy[node].residual,
                        **{"from": d.sender})
            self._check_death(node)
            return
        cost = self._charge(node, self.energy_cfg.rx_cost)
        extra = {}
        if d.kind == RREQ:
            m = d.message
            extra = dict(sa=m.source, da=m.destination, id=m.request_id, path=_path(m.path),
                         link_lsd=d.link.lsd, link_bw=d.link.bandwidth)
        self.record(node, f"{d.kind}_RECV", **{"from": d.sender}, **extra, cost=cost,
                    energy=self.energy[node].residual)
        self._check_death(node)
        if not self.alive(node):
            return
        agent = self.nodes[node]
        if d.kind == RREQ:
            agent.on_rreq(self, d.sender, d.message, d.link)
        elif d.kind == RREP:
            agent.on_rrep(self, d.sender, d.message)
        elif d.kind == NODEOFF:
            agent.on_nodeoff(self, d.sender, d.message)
        elif d.kind == ROUTEDISABLE:
            agent.on_routedisable(self, d.sender, d.message)
        elif d.kind == DATA:
            agent.on_data(self, d.sender, d.message)

    def _sample_tick(self) -> None:
        cfg = self.energy_cfg
        T = cfg.sample_period
        for i in self.ids:
            if not self.alive(i):
                continue
            amount = cfg.idle_rate * T
            for load in self.scenario.loads:
                if load.node == i:
                    overlap = min(self.now, load.stop) - max(self.now - T, load.start)
                    if overlap > 0:
                        amount += load.rate * overlap
            cost = self._charge(i, amount)
            self.energy[i] = en.sample_drain_rate(self.energy[i], cfg)
            self.record(i, "ENERGY_SAMPLE", cost=cost, energy=self.energy[i].residual,
                        drain_rate=self.energy[i].drain_rate)
            self._check_death(i)

    def _motion_tick(self) -> None:
        T = self.energy_cfg.sample_period
        for i in self.ids:
            k = self.kin[i]
            if k.speed > 0 and self.alive(i):
                self.kin[i] = advance(k, T)
                self.record(i, "MOTION", x=self.kin[i].x, y=self.kin[i].y)
        for i in self.ids:
            if self.alive(i):
                self.nodes[i].check_stability(self)

    def _data_emit(self, flow: Flow) -> None:
        if not self.alive(flow.source):
            return
        self.nodes[flow.source].emit_data(self, flow)
        if flow.rate > 0:
            gap = 1.0 / flow.rate
            if flow.jitter > 0:
                gap += self.rng.uniform(0.0, flow.jitter)
            self.schedule("data_emit", gap, flow)

    def _dispatch(self, ev: Event) -> None:
        if ev.kind == "delivery":
            self._deliver(ev.payload)
        elif ev.kind == "wait_timer":
            node, key, template = ev.payload
            if self.alive(node):
                self.nodes[node].on_wait_timer(self, key, template)
        elif ev.kind == "window_close":
            node, key = ev.payload
            if self.alive(node):
                self.nodes[node].on_window_close(self, key)
        elif ev.kind == "sample_tick":
            self._sample_tick()
        elif ev.kind == "motion_tick":
            self._motion_tick()
        elif ev.kind == "data_emit":
            self._data_emit(ev.payload)

    def run(self) -> tuple[list[TraceRecord], RunReport]:
        s = self.scenario
        p = self.protocol
        self.record("-", "RUN_START", nodes=len(self.ids), metric_mode=s.metric_mode, lsd_mode=p.lsd_mode,
                    lsd_threshold=p.lsd_threshold, wait_period=p.wait_period, dest_window=p.dest_window,
                    hop_delay=self.radio.hop_delay, duration=s.duration, seed=self.seed)
        for i in self.ids:
            k = self.kin[i]
            self.record(i, "NODE_INIT", x=k.x, y=k.y, speed=k.speed, heading=k.heading,
                        energy=self.energy[i].residual, drain_rate=self.energy[i].drain_rate)
        T = self.energy_cfg.sample_period
        for k in itertools.count(1):
            t = k * T
            if t > s.duration:
                break
            self._push(t, "sample_tick", None)
            self._push(t, "motion_tick", None)
        for flow in self.flows:
            self._push(flow.start, "data_emit", flow)

        while self._queue and self._queue[0].time <= s.duration:
            ev = heapq.heappop(self._queue)
            self.now = ev.time
            self._dispatch(ev)
        self.now = s.duration
        self.record("-", "RUN_END", events=sum(self.counts[k] for k in MESSAGE_KINDS))
        log.debug("run finished: %d trace records", len(self.trace))
        return self.trace, report_from_nodes(self)


def _path(path) -> str:
    return "-".join(str(n) for n in path)


def run(scenario: Scenario, seed: Optional[int] = None) -> tuple[list[TraceRecord], RunReport]:
    """Run ``scenario`` to completion and return its trace and report."""
    return Simulator(scenario, seed).run()
