"""Second-level flywheel control: droop plus virtual inertia on an
equivalent frequency deviation.

The residual left by the slower layers is mapped to an equivalent frequency
deviation through the aggregate power-frequency coefficient, and the
flywheel command applies a droop gain and a derivative (inertia) gain to
that deviation. Commands are charge-positive: a positive residual (unserved
load) yields a negative, discharge-direction command. Saturation against
rated power and the energy envelope happens in :func:`apply_fess`, never by
raising.
"""

from __future__ import annotations

from dataclasses import dataclass

from .devices.storage import EssState, ess_step
from .timeseries import TimeSeries


@dataclass
class VicParams:
    """Gains and timing of the flywheel layer.

    k_pf is the aggregate power-frequency coefficient (MW/Hz); k_p the droop
    gain (MW/Hz); k_d the inertia gain (MW*s/Hz); dt_s the tick length.
    baseline_mw is the exchange setpoint and target the acceptable
    unbalanced-power trajectory (zero unless configured).
    """

    k_pf: float = 15.0
    k_p: float = 120.0
    k_d: float = 25.0
    dt_s: float = 1.0
    baseline_mw: float = 0.0
    target: TimeSeries | None = None

    def __post_init__(self):
        if self.k_pf <= 0.0 or self.k_p <= 0.0 or self.k_d <= 0.0:
            raise ValueError("all gains must be positive")
        if self.dt_s <= 0.0:
            raise ValueError("dt_s must be positive")


def l4_residual(net_load_now: float, l1_out: float, l2_out: float,
                l3_out: float, target: float = 0.0) -> float:
    """Uncovered power after the three MPC layers, relative to the target."""
    return net_load_now - l1_out - l2_out - l3_out - target


def equivalent_frequency_deviation(r: float, k_pf: float) -> float:
    """Equivalent frequency deviation in Hz for a residual of r MW."""
    if k_pf <= 0.0:
        raise ValueError("k_pf must be positive")
    return r / k_pf


def vic_command(r_now: float, r_prev: float, params: VicParams) -> float:
    """Flywheel power request in MW (charge-positive, before saturation).

    Droop acts on the equivalent frequency deviation and the inertia term on
    its discrete derivative; a positive residual therefore produces a
    discharge-direction (negative) request for any positive gains.
    """
    df_now = r_now / params.k_pf
    df_prev = r_prev / params.k_pf
    return (
        params.baseline_mw
        - params.k_p * df_now
        - params.k_d * (df_now - df_prev) / params.dt_s
    )


def apply_fess(command: float, state: EssState, dt_s: float) -> tuple[float, EssState]:
    """Saturate a charge-positive command and advance the flywheel state.

    The command is clipped to rated power and to the envelope-respecting
    energy rate (including the standby drain), then applied through the
    standard storage step. Returns the realized charge-positive power and the
    new state; saturation is silent because this layer is the last line.
    """
    dt_h = dt_s / 3600.0
    lo, hi = state.envelope
    e_after_idle = state.energy
    if state.standby_loss > 0.0 and e_after_idle > lo:
        e_after_idle -= min(state.standby_loss * dt_h, e_after_idle - lo)
    p = command
    cap = state.power_cap
    if p > 0.0:
        room = max(0.0, hi - e_after_idle)
        p = min(p, cap, room / (state.eta_c * dt_h))
        actual = ess_step(state, p, 0.0, dt_h)
        return p, actual
    if p < 0.0:
        avail = max(0.0, e_after_idle - lo)
        p = max(p, -cap, -avail * state.eta_d / dt_h)
        actual = ess_step(state, 0.0, -p, dt_h)
        return p, actual
    return 0.0, ess_step(state, 0.0, 0.0, dt_h)
