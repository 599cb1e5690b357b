"""Generic storage energy state and the single-step dispatch update.

Every technology in the portfolio (flywheel, battery, compressed air,
hydrogen tank) advances through the same ledger rule: self-discharge on the
stored energy, a standby drain while spinning, charge scaled by eta_c and
discharge scaled by 1/eta_d. Charge and discharge are mutually exclusive
within a step; an update that would leave the envelope is an error, never a
silent clamp.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from ..errors import EnvelopeViolation, ExclusivityViolation

# Relative slack for float noise at the envelope edge; violations beyond this
# are real dispatch errors.
_EDGE_TOL = 1e-9


@dataclass(frozen=True)
class EssState:
    """Energy content plus the static limits of one storage device.

    energy and the envelope are MWh, power_cap is MW, self_discharge is the
    per-step loss fraction (zero for everything but batteries), standby_loss
    is MW drawn while the device is above its lower envelope (zero for
    everything but flywheels).
    """

    energy: float
    envelope: tuple[float, float]
    power_cap: float
    eta_c: float
    eta_d: float
    self_discharge: float = 0.0
    standby_loss: float = 0.0

    def __post_init__(self):
        lo, hi = self.envelope
        if not lo < hi:
            raise ValueError(f"envelope must satisfy lo < hi, got {self.envelope}")
        if not (0.0 < self.eta_c <= 1.0 and 0.0 < self.eta_d <= 1.0):
            raise ValueError("efficiencies must lie in (0, 1]")
        if not lo - _EDGE_TOL * max(1.0, hi) <= self.energy <= hi + _EDGE_TOL * max(1.0, hi):
            raise ValueError(
                f"energy {self.energy} outside envelope [{lo}, {hi}]"
            )

    @property
    def headroom_charge(self) -> float:
        """MWh that can still be stored."""
        return self.envelope[1] - self.energy

    @property
    def headroom_discharge(self) -> float:
        """MWh that can still be drawn."""
        return self.energy - self.envelope[0]


def step_energy(
    energy: float,
    lo: float,
    p_charge: float,
    p_discharge: float,
    dt_h: float,
    eta_c: float,
    eta_d: float,
    self_discharge: float,
    standby_loss: float,
) -> float:
    """Raw energy update shared by :func:`ess_step` and the engine hot loop.

    Standby loss only applies while the device is above its lower envelope
    and can at most coast the energy down to that floor; it never drives a
    violation on its own.
    """
    e = energy * (1.0 - self_discharge)
    if standby_loss > 0.0 and e > lo:
        e -= min(standby_loss * dt_h, e - lo)
    return e + p_charge * eta_c * dt_h - (p_discharge / eta_d) * dt_h


def ess_step(state: EssState, p_charge: float, p_discharge: float, dt_h: float) -> EssState:
    """Advance one dispatch step and return the new state.

    Parameters
    ----------
    state : EssState
    p_charge, p_discharge : float
        Non-negative powers in MW; at most one may be positive and both must
        respect the power cap.
    dt_h : float
        Step length in hours.

    Raises
    ------
    ExclusivityViolation
        If both powers are positive.
    EnvelopeViolation
        If the updated energy leaves the envelope. The state is not modified.
    """
    if p_charge < 0.0 or p_discharge < 0.0:
        raise ValueError("powers must be non-negative")
    if p_charge > 0.0 and p_discharge > 0.0:
        raise ExclusivityViolation(
            f"simultaneous charge {p_charge} MW and discharge {p_discharge} MW"
        )
    cap = state.power_cap * (1.0 + _EDGE_TOL)
    if p_charge > cap or p_discharge > cap:
        raise EnvelopeViolation(
            f"power {max(p_charge, p_discharge)} MW exceeds cap {state.power_cap} MW"
        )
    lo, hi = state.envelope
    e_next = step_energy(
        state.energy, lo, p_charge, p_discharge, dt_h,
        state.eta_c, state.eta_d, state.self_discharge, state.standby_loss,
    )
    tol = _EDGE_TOL * max(1.0, abs(hi))
    if e_next < lo - tol or e_next > hi + tol:
        raise EnvelopeViolation(
            f"energy {e_next:.9f} MWh outside envelope [{lo}, {hi}]"
        )
    return replace(state, energy=min(max(e_next, lo), hi))
