"""Scenario documents: parsing, validation and the bundled examples."""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Optional, Union

from .energy import EnergyConfig
from .kinematics import NodeKinematics, RadioModel, in_range
from .stability import LSD_MODES, METRIC_MODES, TABULATED, LinkRow, ProtocolConfig, link_key

TOP_LEVEL_KEYS = ("nodes", "radio", "protocol", "energy", "metric_mode", "link_table", "workload", "duration", "seed")
REQUIRED_KEYS = ("nodes", "duration")
NODE_KEYS = ("id", "x", "y", "speed", "heading", "energy")
RADIO_KEYS = ("range", "hop_delay", "default_bandwidth")
PROTOCOL_KEYS = ("lsd_threshold", "wait_period", "dest_window", "ttl_limit", "min_link_bandwidth", "lsd_mode")
ENERGY_KEYS = ("alpha", "sample_period", "tx_cost", "rx_cost", "overhear_cost", "idle_rate", "loads")
LINK_KEYS = ("i", "j", "lsd", "bandwidth")
FLOW_KEYS = ("time", "source", "destination", "rate", "jitter")
LOAD_KEYS = ("node", "start", "stop", "rate")

BUNDLED = ("figure4", "failover")


class ScenarioError(ValueError):
    def __init__(self, errors: list[str]):
        super().__init__("; ".join(errors))
        self.errors = errors


@dataclass(frozen=True)
class NodeSpec:
    id: int
    kinematics: NodeKinematics
    energy: float


@dataclass(frozen=True)
class FlowSpec:
    time: float
    source: int
    destination: int
    rate: float = 0.0
    jitter: float = 0.0


@dataclass(frozen=True)
class LoadSpec:
    node: int
    start: float
    stop: float
    rate: float


@dataclass
class Scenario:
    nodes: list[NodeSpec]
    radio: RadioModel
    protocol: ProtocolConfig = field(default_factory=ProtocolConfig)
    energy: EnergyConfig = field(default_factory=EnergyConfig)
    metric_mode: str = "computed"
    link_table: dict[tuple[int, int], LinkRow] = field(default_factory=dict)
    workload: list[FlowSpec] = field(default_factory=list)
    duration: float = 60.0
    seed: int = 0
    loads: list[LoadSpec] = field(default_factory=list)


# -- field helpers -----------------------------------------------------------


def _is_number(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _check_keys(obj, allowed, where, errors) -> bool:
    if not isinstance(obj, dict):
        errors.append(f"{where}: expected an object")
        return False
    for k in obj:
        if k not in allowed:
            errors.append(f"{where}: unknown key {k!r}")
    return True


def _num(obj, key, where, errors, default=None, *, lo=None, lo_open=False, hi=None, required=False, integer=False,
         nullable=False):
    if key not in obj or (obj[key] is None and nullable):
        if required and key not in obj:
            errors.append(f"{where}.{key}: missing")
        return default if key not in obj else None
    v = obj[key]
    if integer:
        if not isinstance(v, int) or isinstance(v, bool):
            errors.append(f"{where}.{key}: expected an integer, got {v!r}")
            return default
    elif not _is_number(v) or (isinstance(v, float) and math.isnan(v)):
        errors.append(f"{where}.{key}: expected a number, got {v!r}")
        return default
    if lo is not None and (v <= lo if lo_open else v < lo):
        errors.append(f"{where}.{key}: must be {'>' if lo_open else '>='} {lo}, got {v}")
    if hi is not None and v > hi:
        errors.append(f"{where}.{key}: must be <= {hi}, got {v}")
    return v


# -- parsing -------------------------------------------------------------------


def parse_scenario(doc: Any) -> Scenario:
    """Build a :class:`Scenario` from a decoded JSON document.

    Raises :class:`ScenarioError` carrying every violation found.
    """
    errors: list[str] = []
    scenario = _parse(doc, errors)
    if scenario is not None and not errors:
        errors.extend(semantic_errors(scenario))
    if errors:
        raise ScenarioError(errors)
    return scenario


def _parse(doc: Any, errors: list[str]) -> Optional[Scenario]:
    if not _check_keys(doc, TOP_LEVEL_KEYS, "scenario", errors):
        return None
    for k in REQUIRED_KEYS:
        if k not in doc:
            errors.append(f"scenario.{k}: missing")

    nodes = []
    raw_nodes = doc.get("nodes", [])
    if not isinstance(raw_nodes, list):
        errors.append("nodes: expected a list")
        raw_nodes = []
    for idx, raw in enumerate(raw_nodes):
        where = f"nodes[{idx}]"
        if not _check_keys(raw, NODE_KEYS, where, errors):
            continue
        nid = _num(raw, "id", where, errors, required=True, integer=True)
        x = _num(raw, "x", where, errors, required=True)
        y = _num(raw, "y", where, errors, required=True)
        speed = _num(raw, "speed", where, errors, 0.0, lo=0)
        heading = _num(raw, "heading", where, errors, 0.0)
        energy = _num(raw, "energy", where, errors, required=True, lo=0, lo_open=True)
        if None in (nid, x, y, speed, heading, energy) or speed < 0:
            continue
        nodes.append(NodeSpec(nid, NodeKinematics(float(x), float(y), float(speed), float(heading)), float(energy)))

    radio_doc = doc.get("radio", {})
    radio = None
    if _check_keys(radio_doc, RADIO_KEYS, "radio", errors):
        rng = _num(radio_doc, "range", "radio", errors, required=True, lo=0, lo_open=True)
        delay = _num(radio_doc, "hop_delay", "radio", errors, 0.001, lo=0)
        bw = _num(radio_doc, "default_bandwidth", "radio", errors, 1.0, lo=0)
        try:
            radio = RadioModel(float(rng), float(delay), float(bw))
        except (TypeError, ValueError):
            pass

    proto_doc = doc.get("protocol", {})
    protocol = None
    if _check_keys(proto_doc, PROTOCOL_KEYS, "protocol", errors):
        thr = _num(proto_doc, "lsd_threshold", "protocol", errors, 15.0, lo=0, lo_open=True)
        wait = _num(proto_doc, "wait_period", "protocol", errors, 5.0, lo=0, lo_open=True)
        window = _num(proto_doc, "dest_window", "protocol", errors, None, lo=0, lo_open=True, nullable=True)
        ttl = _num(proto_doc, "ttl_limit", "protocol", errors, 0, lo=0, integer=True)
        min_bw = _num(proto_doc, "min_link_bandwidth", "protocol", errors, None, lo=0, nullable=True)
        mode = proto_doc.get("lsd_mode", "last-hop")
        if mode not in LSD_MODES:
            errors.append(f"protocol.lsd_mode: must be one of {', '.join(LSD_MODES)}, got {mode!r}")
        try:
            protocol = ProtocolConfig(float(thr), float(wait), None if window is None else float(window), ttl,
                                      None if min_bw is None else float(min_bw), mode)
        except (TypeError, ValueError):
            pass

    energy_doc = doc.get("energy", {})
    energy = None
    loads: list[LoadSpec] = []
    if _check_keys(energy_doc, ENERGY_KEYS, "energy", errors):
        vals = {}
        vals["alpha"] = _num(energy_doc, "alpha", "energy", errors, 0.3, lo=0, hi=1)
        vals["sample_period"] = _num(energy_doc, "sample_period", "energy", errors, 1.0, lo=0, lo_open=True)
        for k, d in (("tx_cost", 0.02), ("rx_cost", 0.01), ("overhear_cost", 0.005), ("idle_rate", 0.001)):
            vals[k] = _num(energy_doc, k, "energy", errors, d, lo=0)
        try:
            energy = EnergyConfig(**{k: float(v) for k, v in vals.items()})
        except (TypeError, ValueError):
            pass
        raw_loads = energy_doc.get("loads", [])
        if not isinstance(raw_loads, list):
            errors.append("energy.loads: expected a list")
            raw_loads = []
        for idx, raw in enumerate(raw_loads):
            where = f"energy.loads[{idx}]"
            if not _check_keys(raw, LOAD_KEYS, where, errors):
                continue
            node = _num(raw, "node", where, errors, required=True, integer=True)
            start = _num(raw, "start", where, errors, required=True, lo=0)
            stop = _num(raw, "stop", where, errors, required=True, lo=0)
            rate = _num(raw, "rate", where, errors, required=True, lo=0)
            if None in (node, start, stop, rate):
                continue
            if stop <= start:
                errors.append(f"{where}: stop must be > start")
            loads.append(LoadSpec(node, float(start), float(stop), float(rate)))

    metric_mode = doc.get("metric_mode", "computed")
    if metric_mode not in METRIC_MODES:
        errors.append(f"metric_mode: must be one of {', '.join(METRIC_MODES)}, got {metric_mode!r}")

    link_table: dict[tuple[int, int], LinkRow] = {}
    raw_links = doc.get("link_table") or []
    if not isinstance(raw_links, list):
        errors.append("link_table: expected a list")
        raw_links = []
    for idx, raw in enumerate(raw_links):
        where = f"link_table[{idx}]"
        if not _check_keys(raw, LINK_KEYS, where, errors):
            continue
        i = _num(raw, "i", where, errors, required=True, integer=True)
        j = _num(raw, "j", where, errors, required=True, integer=True)
        lsd = raw.get("lsd")
        if lsd == "inf":
            lsd = math.inf
        elif lsd is not None:
            lsd = _num(raw, "lsd", where, errors, lo=0)
        bw = _num(raw, "bandwidth", where, errors, required=True, lo=0)
        if None in (i, j, bw):
            continue
        if i == j:
            errors.append(f"{where}: link endpoints must differ")
            continue
        key = link_key(i, j)
        if key in link_table:
            errors.append(f"{where}: duplicate row for link {key}")
        link_table[key] = LinkRow(None if lsd is None else float(lsd), float(bw))

    workload = []
    raw_flows = doc.get("workload", [])
    if not isinstance(raw_flows, list):
        errors.append("workload: expected a list")
        raw_flows = []
    for idx, raw in enumerate(raw_flows):
        where = f"workload[{idx}]"
        if not _check_keys(raw, FLOW_KEYS, where, errors):
            continue
        t = _num(raw, "time", where, errors, required=True, lo=0)
        src = _num(raw, "source", where, errors, required=True, integer=True)
        dst = _num(raw, "destination", where, errors, required=True, integer=True)
        rate = _num(raw, "rate", where, errors, 0.0, lo=0)
        jitter = _num(raw, "jitter", where, errors, 0.0, lo=0)
        if None in (t, src, dst, rate, jitter):
            continue
        workload.append(FlowSpec(float(t), src, dst, float(rate), float(jitter)))

    duration = _num(doc, "duration", "scenario", errors, None, lo=0, lo_open=True)
    seed = _num(doc, "seed", "scenario", errors, 0, integer=True)

    if None in (radio, protocol, energy, duration, seed):
        return None
    return Scenario(nodes=nodes, radio=radio, protocol=protocol, energy=energy, metric_mode=metric_mode,
                    link_table=link_table, workload=workload, duration=float(duration), seed=seed, loads=loads)


def semantic_errors(s: Scenario) -> list[str]:
    errors: list[str] = []
    if not s.nodes:
        errors.append("nodes: at least one node is required")
    seen: set[int] = set()
    for n in s.nodes:
        if n.id in seen:
            errors.append(f"nodes: duplicate node id {n.id}")
        seen.add(n.id)
    for key in s.link_table:
        for end in key:
            if end not in seen:
                errors.append(f"link_table: link {key} references unknown node {end}")
    for idx, f in enumerate(s.workload):
        for role in ("source", "destination"):
            if getattr(f, role) not in seen:
                errors.append(f"workload[{idx}].{role}: unknown node {getattr(f, role)}")
        if f.source == f.destination:
            errors.append(f"workload[{idx}]: source and destination must differ")
    for idx, load in enumerate(s.loads):
        if load.node not in seen:
            errors.append(f"energy.loads[{idx}].node: unknown node {load.node}")
    if s.metric_mode == TABULATED:
        by_id = {n.id: n for n in s.nodes}
        for a, b in itertools.combinations(sorted(by_id), 2):
            if in_range(by_id[a].kinematics, by_id[b].kinematics, s.radio):
                row = s.link_table.get((a, b))
                if row is None or row.lsd is None:
                    errors.append(f"link_table: tabulated mode needs an LSD row for in-range link ({a}, {b})")
    return errors


def validate(scenario: Union[Scenario, dict]) -> list[str]:
    """Every violation in ``scenario``; an empty list means it is runnable."""
    if isinstance(scenario, Scenario):
        return semantic_errors(scenario)
    try:
        parse_scenario(scenario)
    except ScenarioError as exc:
        return exc.errors
    return []


def load_document(path: Union[str, Path]) -> Any:
    """Read a scenario file. ``OSError`` propagates; bad JSON becomes a :class:`ScenarioError`."""
    text = Path(path).read_text()
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError([f"malformed JSON: {exc}"]) from None


def load_scenario(path: Union[str, Path]) -> Scenario:
    return parse_scenario(load_document(path))


def bundled_document(name: str) -> dict:
    if name not in BUNDLED:
        raise KeyError(name)
    text = resources.files("ndmlnr").joinpath("scenarios", f"{name}.json").read_text()
    return json.loads(text)


def bundled(name: str) -> Scenario:
    return parse_scenario(bundled_document(name))
