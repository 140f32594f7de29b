"""Per-node energy bookkeeping and the exponentially averaged drain rate."""

from __future__ import annotations

from dataclasses import dataclass, replace


@dataclass(frozen=True)
class EnergyConfig:
    alpha: float = 0.3
    sample_period: float = 1.0
    tx_cost: float = 0.02
    rx_cost: float = 0.01
    overhear_cost: float = 0.005
    idle_rate: float = 0.001

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")
        if self.sample_period <= 0:
            raise ValueError("sample_period must be > 0")
        for name in ("tx_cost", "rx_cost", "overhear_cost", "idle_rate"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")


@dataclass(frozen=True)
class EnergyState:
    residual: float
    window_consumed: float = 0.0
    drain_rate: float = 0.0

    @property
    def alive(self) -> bool:
        return self.residual > 0


def initial_state(residual: float, cfg: EnergyConfig) -> EnergyState:
    # start from the idle rate so the first LSD values are finite
    return EnergyState(residual=residual, drain_rate=cfg.idle_rate)


def charge(state: EnergyState, amount: float) -> EnergyState:
    """Draw ``amount`` joules, clamped to what is left in the battery."""
    if amount < 0:
        raise ValueError("charge amount must be >= 0")
    drawn = min(amount, state.residual)
    if drawn == 0:
        return state
    return replace(
        state,
        residual=max(0.0, state.residual - drawn),
        window_consumed=state.window_consumed + drawn,
    )


def sample_drain_rate(state: EnergyState, cfg: EnergyConfig) -> EnergyState:
    """Blend the consumption of the window that just ended into the drain rate."""
    fresh = state.window_consumed / cfg.sample_period
    blended = cfg.alpha * state.drain_rate + (1.0 - cfg.alpha) * fresh
    return replace(state, drain_rate=blended, window_consumed=0.0)
