"""Run summary, built either from live simulator state or from a trace alone."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Iterable, Optional

from .protocol import MESSAGE_KINDS, path_str
from .trace import TraceRecord

COUNTED = MESSAGE_KINDS + ("DATA_DELIVERED",)


def _t(x: Optional[float]) -> Optional[float]:
    return None if x is None else round(x, 6)


def _span(end: Optional[float], start: Optional[float]) -> Optional[float]:
    if end is None or start is None:
        return None
    return round(_t(end) - _t(start), 6)


def _num(v):
    # integers and integral floats compare equal but serialize differently
    return float(v)


@dataclass
class RunReport:
    requests: list[dict] = field(default_factory=list)
    routes: list[dict] = field(default_factory=list)
    counts: dict[str, int] = field(default_factory=dict)
    residual_energy: dict[str, float] = field(default_factory=dict)
    end_time: float = 0.0

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "RunReport":
        return cls(**d)


def _request_entry(source, destination, rid, started) -> dict:
    return {
        "source": source,
        "destination": destination,
        "request_id": rid,
        "started": _t(started),
        "failed": False,
        "candidates": [],
        "accepted": [],
        "rejected": [],
        "installed": [],
        "latency": None,
    }


def report_from_nodes(sim) -> RunReport:
    """Report assembled from the simulator's node state after a run."""
    requests = []
    for src in sim.ids:
        node = sim.nodes[src]
        for disc in node.discoveries:
            req = _request_entry(src, disc.destination, disc.request_id, disc.started)
            req["failed"] = disc.failed
            rnd = sim.nodes[disc.destination].rounds.get((src, disc.destination, disc.request_id))
            if rnd is not None:
                req["candidates"] = [{"path": path_str(c.path), "bandwidth": _num(c.bandwidth), "hops": c.hops}
                                     for c in rnd.candidates]
                req["accepted"] = [{"path": path_str(c.path), "bandwidth": _num(c.bandwidth)} for c in rnd.accepted]
                req["rejected"] = [{"path": path_str(c.path), "bandwidth": _num(c.bandwidth), "shares": n}
                                   for c, n in rnd.rejected]
            installed = sorted((r for rs in node.routes.values() for r in rs if r.request_id == disc.request_id
                                and r.destination == disc.destination), key=lambda r: r.install_order)
            req["installed"] = [path_str(r.path) for r in installed]
            req["latency"] = _span(disc.first_install, disc.started)
            requests.append(req)
    requests.sort(key=lambda r: (r["started"], r["source"], r["request_id"]))

    routes = []
    for src in sim.ids:
        all_routes = sorted((r for rs in sim.nodes[src].routes.values() for r in rs), key=lambda r: r.install_order)
        for r in all_routes:
            end = r.disabled_at if r.disabled_at is not None else sim.scenario.duration
            routes.append({
                "source": src,
                "destination": r.destination,
                "request_id": r.request_id,
                "path": path_str(r.path),
                "bandwidth": _num(r.bandwidth),
                "installed_at": _t(r.installed_at),
                "disabled_at": _t(r.disabled_at),
                "lifetime": _span(end, r.installed_at),
                "status": r.status,
            })

    counts = {k: 0 for k in COUNTED}
    for k in MESSAGE_KINDS:
        counts[k] = sim.counts[k]
    counts["DATA_DELIVERED"] = sum(1 for rec in sim.trace if rec.event == "DATA_DELIVERED")
    residual = {str(i): sim.energy[i].residual for i in sim.ids}
    return RunReport(requests, routes, counts, residual, _t(sim.scenario.duration))


def report_from_trace(records: Iterable[TraceRecord]) -> RunReport:
    """Recompute the run report using nothing but the trace records."""
    requests: dict[tuple, dict] = {}
    order: list[tuple] = []
    routes: dict[tuple, dict] = {}
    route_order: list[tuple] = []
    counts = {k: 0 for k in COUNTED}
    residual: dict[int, float] = {}
    end_time = 0.0
    duration = None

    def req_for(sa, da, rid):
        return requests.get((sa, da, rid))

    for rec in records:
        d = rec.detail
        ev = rec.event
        if "energy" in d and isinstance(rec.node, int):
            residual[rec.node] = float(d["energy"])
        if ev in MESSAGE_KINDS or ev == "DATA_DELIVERED":
            counts[ev] += 1
        if ev == "RUN_START":
            duration = float(d["duration"])
        elif ev == "RUN_END":
            end_time = rec.time
        elif ev == "DISCOVERY_START":
            key = (d["sa"], d["da"], d["id"])
            requests[key] = _request_entry(d["sa"], d["da"], d["id"], rec.time)
            order.append(key)
        elif ev == "DISCOVERY_FAIL":
            requests[(d["sa"], d["da"], d["id"])]["failed"] = True
        elif ev == "CANDIDATE":
            req = req_for(d["sa"], d["da"], d["id"])
            req["candidates"].append({"path": d["path"], "bandwidth": _num(d["bw"]), "hops": d["hops"]})
        elif ev == "PATH_ACCEPT":
            req_for(d["sa"], d["da"], d["id"])["accepted"].append({"path": d["path"], "bandwidth": _num(d["bw"])})
        elif ev == "PATH_REJECT":
            req_for(d["sa"], d["da"], d["id"])["rejected"].append(
                {"path": d["path"], "bandwidth": _num(d["bw"]), "shares": d["shares"]})
        elif ev == "ROUTE_INSTALL":
            path = d["path"]
            src = rec.node
            dst = int(path.split("-")[-1])
            req = req_for(src, dst, d["id"])
            req["installed"].append(path)
            if req["latency"] is None:
                req["latency"] = _span(rec.time, req["started"])
            key = (src, d["id"], path)
            routes[key] = {
                "source": src,
                "destination": dst,
                "request_id": d["id"],
                "path": path,
                "bandwidth": _num(d["bw"]),
                "installed_at": _t(rec.time),
                "disabled_at": None,
                "lifetime": None,
                "status": d["status"],
            }
            route_order.append(key)
        elif ev in ("ROUTE_PROMOTE", "ROUTE_DEMOTE", "ROUTE_DISABLE"):
            r = routes[(rec.node, d["id"], d["path"])]
            r["status"] = {"ROUTE_PROMOTE": "primary", "ROUTE_DEMOTE": "backup", "ROUTE_DISABLE": "disabled"}[ev]
            if ev == "ROUTE_DISABLE":
                r["disabled_at"] = _t(rec.time)

    out_routes = []
    # install order in the trace is per source chronological; group by source like the live report
    rank = {k: i for i, k in enumerate(route_order)}
    for key in sorted(route_order, key=lambda k: (k[0], rank[k])):
        r = routes[key]
        end = r["disabled_at"] if r["disabled_at"] is not None else duration
        r["lifetime"] = _span(end, r["installed_at"])
        out_routes.append(r)
    reqs = [requests[k] for k in order]
    reqs.sort(key=lambda r: (r["started"], r["source"], r["request_id"]))
    return RunReport(reqs, out_routes, counts, {str(i): residual[i] for i in sorted(residual)}, _t(end_time))
