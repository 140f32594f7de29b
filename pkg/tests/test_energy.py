import pytest
from hypothesis import given, strategies as st

from ndmlnr.energy import EnergyConfig, EnergyState, charge, initial_state, sample_drain_rate


def test_charge_subtracts():
    s = charge(EnergyState(10.0), 3.0)
    assert s.residual == 7.0 and s.alive
    assert s.window_consumed == 3.0


def test_charge_clamps_at_zero():
    s = charge(EnergyState(2.0, window_consumed=1.0), 5.0)
    assert s.residual == 0.0
    assert not s.alive
    assert s.window_consumed == 3.0


def test_charge_zero_is_identity():
    s = EnergyState(10.0, 0.5, 0.2)
    assert charge(s, 0.0) == s


def test_charge_rejects_negative():
    with pytest.raises(ValueError):
        charge(EnergyState(1.0), -1.0)


def test_sample_midpoint():
    s = sample_drain_rate(EnergyState(50.0, window_consumed=4.0, drain_rate=2.0),
                          EnergyConfig(alpha=0.5, sample_period=1.0))
    assert s.drain_rate == 3.0
    assert s.window_consumed == 0.0


def test_sample_alpha_one_keeps_rate():
    s = sample_drain_rate(EnergyState(50.0, window_consumed=40.0, drain_rate=2.0), EnergyConfig(alpha=1.0))
    assert s.drain_rate == 2.0


def test_sample_alpha_zero_takes_fresh_window():
    s = sample_drain_rate(EnergyState(50.0, window_consumed=3.0, drain_rate=2.0),
                          EnergyConfig(alpha=0.0, sample_period=2.0))
    assert s.drain_rate == 1.5


def test_initial_rate_is_idle_rate():
    cfg = EnergyConfig(idle_rate=0.004)
    assert initial_state(10.0, cfg).drain_rate == 0.004


@pytest.mark.parametrize("kwargs", [dict(alpha=-0.1), dict(alpha=1.1), dict(sample_period=0), dict(tx_cost=-1)])
def test_config_invariants(kwargs):
    with pytest.raises(ValueError):
        EnergyConfig(**kwargs)


ops = st.lists(st.one_of(st.tuples(st.just("charge"), st.floats(0, 50)), st.tuples(st.just("sample"), st.none())),
               max_size=60)


@given(st.floats(0, 500), ops, st.floats(0, 1))
def test_residual_never_increases_and_state_stays_valid(start, seq, alpha):
    cfg = EnergyConfig(alpha=alpha)
    s = initial_state(start, cfg)
    for op, amount in seq:
        before = s.residual
        s = charge(s, amount) if op == "charge" else sample_drain_rate(s, cfg)
        assert s.residual <= before
        assert s.residual >= 0 and s.window_consumed >= 0 and s.drain_rate >= 0
        assert s.alive == (s.residual > 0)


@given(st.floats(0, 100), st.floats(0, 100), st.floats(0, 1), st.floats(0.1, 10))
def test_blending_bound(old, consumed, alpha, period):
    cfg = EnergyConfig(alpha=alpha, sample_period=period)
    new = consumed / period
    s = sample_drain_rate(EnergyState(1e6, consumed, old), cfg)
    slack = 1e-12 * max(old, new, 1.0)
    assert min(old, new) - slack <= s.drain_rate <= max(old, new) + slack
