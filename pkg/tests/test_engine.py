import math
from collections import defaultdict
from dataclasses import replace

import pytest

from ndmlnr import trace as tr
from ndmlnr.engine import KIND_RANK, Simulator, run
from ndmlnr.kinematics import NodeKinematics
from ndmlnr.report import report_from_trace
from ndmlnr.scenario import LoadSpec, ScenarioError, bundled
from ndmlnr.stability import ConfigurationError

from builders import graph_scenario


def spent_by_node(records):
    spent = defaultdict(float)
    for r in records:
        if "cost" in r.detail and isinstance(r.node, int):
            spent[r.node] += r.detail["cost"]
    return spent


def test_kind_rank_order():
    kinds = sorted(KIND_RANK, key=KIND_RANK.get)
    assert kinds == ["delivery", "wait_timer", "window_close", "sample_tick", "motion_tick", "data_emit"]


@pytest.mark.parametrize("name", ["figure4", "failover"])
def test_energy_conservation(name):
    scenario = bundled(name)
    records, report = run(scenario)
    spent = spent_by_node(records)
    for n in scenario.nodes:
        final = report.residual_energy[str(n.id)]
        assert n.energy - final == pytest.approx(spent[n.id], rel=1e-9, abs=1e-12)


@pytest.mark.parametrize("name", ["figure4", "failover"])
def test_times_are_monotone(name):
    records, _ = run(bundled(name))
    times = [r.time for r in records]
    assert times == sorted(times)
    assert records[0].event == "RUN_START" and records[-1].event == "RUN_END"


def test_broadcast_charges_addressees_and_overhearers_separately():
    scenario = bundled("figure4")
    records, _ = run(scenario)
    cfg = scenario.energy
    rreq_sends = [r for r in records if r.event == "RREQ"]
    assert rreq_sends
    for send in rreq_sends:
        addressed = {int(x) for x in str(send.detail["to"]).split(",") if x}
        at = [r for r in records if r.time == send.time and r.detail.get("from") == send.node]
        recv = {r.node for r in at if r.event == "RREQ_RECV"}
        heard = {r.node for r in at if r.event == "OVERHEAR" and r.detail["kind"] == "RREQ"}
        assert recv == addressed
        assert not recv & heard
        assert send.detail["cost"] == cfg.tx_cost
        for r in at:
            if r.event == "RREQ_RECV":
                assert r.detail["cost"] == cfg.rx_cost
            elif r.event == "OVERHEAR":
                assert r.detail["cost"] == cfg.overhear_cost


def test_overhearers_are_exactly_in_range_non_addressees():
    scenario = bundled("figure4")
    sim = Simulator(scenario)
    records, _ = sim.run()
    send = next(r for r in records if r.event == "RREQ" and r.node == 1)
    heard = {r.node for r in records if r.event == "OVERHEAR" and r.time == send.time and r.detail["from"] == 1}
    assert heard == set(sim.neighbors(1)) - {2, 4}
    assert heard == {7}


def test_same_seed_is_byte_identical():
    a, _ = run(bundled("failover"))
    b, _ = run(bundled("failover"))
    assert tr.dumps(a) == tr.dumps(b)


def test_seed_without_jitter_only_changes_header():
    a, _ = run(bundled("failover"), seed=1)
    b, _ = run(bundled("failover"), seed=2)
    assert tr.dumps(a).splitlines()[1:] == tr.dumps(b).splitlines()[1:]


def test_empty_workload_runs_quietly():
    scenario = bundled("figure4")
    scenario.workload.clear()
    records, report = run(scenario)
    events = {r.event for r in records}
    assert "RREQ" not in events and "DISCOVERY_START" not in events
    assert report.requests == [] and report.routes == []
    assert all(v == 0 for v in report.counts.values())


@pytest.mark.parametrize("name", ["figure4", "failover"])
def test_report_recomputable_from_trace(name):
    records, report = run(bundled(name))
    reparsed = list(tr.iter_lines(tr.dumps(records)))
    assert report_from_trace(reparsed).to_dict() == report.to_dict()


def test_trace_lines_are_well_formed():
    records, _ = run(bundled("failover"))
    for line in tr.dumps(records).splitlines()[:200]:
        assert line.startswith('{"time": ')
        assert list(tr.parse_record(line).__dict__) == ["time", "node", "event", "detail"]


def test_dead_node_is_never_addressed_after_death():
    # node 2 burns out while its wait timer is pending
    edges = [(1, 2), (2, 3), (1, 4), (4, 3)]
    s = graph_scenario(4, edges, 1, 3, energy=1.0, sample_period=1.0,
                       loads=[LoadSpec(2, 0.0, 2.0, 5.0)], wait=5.0)
    sim = Simulator(s)
    records, _ = sim.run()
    died = next(r.time for r in records if r.event == "NODE_DEAD" and r.node == 2)
    for r in records:
        if r.time > died and r.node == 2:
            assert r.event in ("SUPPRESSED",)
        if r.time > died and r.event in ("RREQ", "RREP", "DATA") and "to" in r.detail:
            assert "2" not in str(r.detail["to"]).split(",")
    assert not sim.alive(2)


def test_rrep_lost_when_relay_dies():
    edges = [(1, 2), (2, 3)]
    s = graph_scenario(3, edges, 1, 3, energy=1.0, sample_period=1.0, wait=5.0, dest_window=5.0,
                       loads=[LoadSpec(2, 6.0, 8.0, 5.0)])
    records, report = run(s)
    assert any(r.event == "CANDIDATE" for r in records)
    assert not any(r.event == "ROUTE_INSTALL" for r in records)
    assert report.routes == []


def test_motion_moves_nodes_and_changes_links():
    scenario = bundled("failover")
    sim = Simulator(scenario)
    before = sim.link(8, 9)
    records, _ = sim.run()
    moves = [r for r in records if r.event == "MOTION" and r.node == 9]
    assert moves
    assert sim.kinematics(9) != scenario.nodes[8].kinematics
    after = sim.link(8, 9)
    assert before is not None
    assert after is not None and after.let_value != before.let_value


def test_unknown_reference_rejected_at_construction():
    s = graph_scenario(3, [(1, 2), (2, 3)], 1, 3)
    s.workload[0] = replace(s.workload[0], destination=42)
    with pytest.raises(ScenarioError):
        Simulator(s)


def test_tabulated_gap_after_motion_is_configuration_error():
    # node 3 drives into range of node 1, whose pair has no table row
    s = graph_scenario(3, [(1, 2)], 1, 2, sample_period=1.0)
    s.link_table.pop((1, 3))
    s.nodes[2] = replace(s.nodes[2], kinematics=NodeKinematics(30, 0, 2.0, math.pi))
    s.workload[0] = replace(s.workload[0], time=15.0)
    with pytest.raises(ConfigurationError):
        run(s)
