import math
import random

import pytest

from ndmlnr.kinematics import NodeKinematics, RadioModel
from ndmlnr.protocol import NeighborInfoEntry, select_rreq
from ndmlnr.scenario import bundled
from ndmlnr.stability import (
    DRAIN_RATE_FLOOR,
    ConfigurationError,
    LinkMetrics,
    LinkRow,
    ProtocolConfig,
    carried_lsd,
    compute_lsd,
    link_eligible,
    link_lsd_source,
)

CFG = ProtocolConfig(lsd_threshold=15)


def metrics(lsd, bw=1.0):
    return LinkMetrics(let_value=math.nan, drain_rate=1.0, lsd=lsd, bandwidth=bw)


def test_lsd_direct_division():
    assert compute_lsd(10.0, 2.0) == 5.0


def test_lsd_infinite_let():
    assert compute_lsd(math.inf, 3.0) == math.inf
    assert compute_lsd(math.inf, 0.0) == math.inf


def test_lsd_uses_drain_floor():
    assert compute_lsd(1.0, 0.0) == 1.0 / DRAIN_RATE_FLOOR


def test_lsd_monotonicity_sweep():
    rng = random.Random(11)
    for _ in range(500):
        let_a, let_b = sorted(rng.uniform(0.1, 1e3) for _ in range(2))
        dr_a, dr_b = sorted(rng.uniform(2 * DRAIN_RATE_FLOOR, 50) for _ in range(2))
        if let_a < let_b:
            assert compute_lsd(let_a, dr_a) < compute_lsd(let_b, dr_a)
        if dr_a < dr_b:
            assert compute_lsd(let_a, dr_a) > compute_lsd(let_a, dr_b)


@pytest.mark.parametrize("lsd, expected", [(9, False), (20, True), (15, False), (15.000001, True), (math.inf, True)])
def test_eligibility_threshold(lsd, expected):
    assert link_eligible(metrics(lsd), CFG) is expected


def test_eligibility_min_bandwidth():
    cfg = ProtocolConfig(lsd_threshold=15, min_link_bandwidth=5.0)
    assert link_eligible(metrics(20, bw=5.0), cfg)
    assert not link_eligible(metrics(20, bw=4.9), cfg)


def test_eligibility_monotone_in_lsd():
    rng = random.Random(5)
    for _ in range(1000):
        lo, hi = sorted(rng.uniform(0, 40) for _ in range(2))
        if link_eligible(metrics(lo), CFG):
            assert link_eligible(metrics(hi), CFG)


def test_carried_lsd_modes():
    assert carried_lsd(20.0, 17.0, 1, "last-hop") == 17.0
    assert carried_lsd(16.0, 18.0, 2, "last-hop") == 18.0
    assert carried_lsd(16.0, 18.0, 2, "bottleneck") == 16.0
    # origin packet carries 0, which is not a real bottleneck
    assert carried_lsd(0.0, 20.0, 0, "bottleneck") == 20.0


def _tabulated_lookup(i, j):
    s = bundled("figure4")
    kin = {n.id: n.kinematics for n in s.nodes}
    return link_lsd_source(i, j, "tabulated", link_table=s.link_table, kinematics=kin,
                           drain_rates={i: 1.0, j: 1.0}, radio=s.radio)


def test_tabulated_source_figure4():
    assert _tabulated_lookup(1, 7).lsd == 9
    assert _tabulated_lookup(4, 8).lsd == 18
    assert _tabulated_lookup(8, 4).lsd == 18


def test_tabulated_missing_row_is_configuration_error():
    kin = {1: NodeKinematics(0, 0), 2: NodeKinematics(1, 0)}
    with pytest.raises(ConfigurationError):
        link_lsd_source(1, 2, "tabulated", link_table={}, kinematics=kin, drain_rates={1: 1, 2: 1},
                        radio=RadioModel(10.0))


def test_computed_co_moving_at_floor_is_infinite():
    kin = {1: NodeKinematics(0, 0, 3, 1.0), 2: NodeKinematics(4, 0, 3, 1.0)}
    m = link_lsd_source(1, 2, "computed", link_table={}, kinematics=kin,
                        drain_rates={1: DRAIN_RATE_FLOOR, 2: DRAIN_RATE_FLOOR}, radio=RadioModel(10.0))
    assert m.lsd == math.inf


def test_computed_uses_receiver_drain_rate_and_table_bandwidth():
    kin = {1: NodeKinematics(0, 0), 2: NodeKinematics(0, 0, 1, 0)}
    m = link_lsd_source(1, 2, "computed", link_table={(1, 2): LinkRow(None, 6.0)}, kinematics=kin,
                        drain_rates={1: 100.0, 2: 2.0}, radio=RadioModel(10.0, default_bandwidth=1.0))
    assert m.let_value == pytest.approx(10.0)
    assert m.lsd == pytest.approx(5.0)
    assert m.bandwidth == 6.0


def test_argmax_invariance_under_metric_scaling():
    rng = random.Random(3)
    for _ in range(300):
        lets = [rng.uniform(1, 500) for _ in range(6)]
        drs = [rng.uniform(0.01, 5) for _ in range(6)]
        c_let, c_dr = 2.0 ** rng.randint(-4, 4), 2.0 ** rng.randint(-4, 4)
        thr = 15.0

        def entries(scale_let, scale_dr):
            return [NeighborInfoEntry(1, 9, 1, hops=rng_hops[k], lsd=compute_lsd(lets[k] * scale_let,
                                      drs[k] * scale_dr), bandwidth=float(k % 3), previous_hop=k + 2,
                                      arrival_seq=k + 1) for k in range(6)]

        rng_hops = [rng.randint(1, 3) for _ in range(6)]
        base = entries(1.0, 1.0)
        scaled = entries(c_let, c_dr)
        assert select_rreq(base).arrival_seq == select_rreq(scaled).arrival_seq
        cfg = ProtocolConfig(lsd_threshold=thr)
        cfg_scaled = ProtocolConfig(lsd_threshold=thr * c_let / c_dr)
        for b, s in zip(base, scaled):
            assert link_eligible(metrics(b.lsd), cfg) == link_eligible(metrics(s.lsd), cfg_scaled)


@pytest.mark.parametrize("kwargs", [dict(lsd_threshold=0), dict(wait_period=0), dict(dest_window=-1),
                                    dict(lsd_mode="max"), dict(ttl_limit=-1)])
def test_protocol_config_invariants(kwargs):
    with pytest.raises(ValueError):
        ProtocolConfig(**kwargs)


def test_dest_window_defaults_to_twice_wait():
    assert ProtocolConfig(wait_period=4).dest_window == 8
