"""Receding-horizon layers: long-duration hydrogen/methanol (L1, hourly),
compressed-air (L2, 15 min) and battery (L3, 1 min) tracking controllers.

Each layer solves the same stacked tracking QP over its own horizon against
the residual left by its parents (zero-order held across child steps) and
applies only the first move. The hydrogen/methanol layer linearizes the
load-dependent device efficiencies by freezing them at the previous applied
operating point for the whole horizon, and maps its tank envelope into
per-step input bounds: exact headroom caps on the first (applied) move plus
conversion floors scheduled wherever the projected tank trajectory would hit
its cap — that floor is what routes surplus hydrogen into methanol, since
conversion never helps the tracking objective directly.

On an infeasible band the solver is retried once with the band collapsed to
its midpoint, then with the band dropped entirely (diagnosed, counted).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .devices.hydrogen import AweParams, PemfcParams, awe_hydrogen, pemfc_discharge_efficiency
from .devices.methanol import MeohParams, TurbineParams, meoh_conversion, turbine_efficiency
from .devices.storage import EssState
from .errors import AlignmentError, EnvelopeViolation
from .mtip import MtipBounds
from .qp import INFEASIBLE, QpProblem, QpSolution, assemble_tracking_qp, solve_qp

#: Lowest relative load at which the turbine efficiency curve is trusted.
TURBINE_LOAD_FLOOR = 0.2


@dataclass
class LayerSpec:
    """Static description of one MPC layer.

    dt_h is the step in hours, horizon the number of steps, tracking_weight
    and cost_weight the Q/R pair, cost_vec the per-actuator price
    (currency/MWh), output_row the grid-output map, u_max rated actuator
    powers (MW). norm_power keeps the flagged cubic-penalty switch.
    """

    layer_id: str
    dt_h: float
    horizon: int
    tracking_weight: float
    cost_weight: float
    cost_vec: np.ndarray
    output_row: np.ndarray
    u_max: np.ndarray
    norm_power: int = 2

    def __post_init__(self):
        self.cost_vec = np.asarray(self.cost_vec, dtype=np.float64)
        self.output_row = np.asarray(self.output_row, dtype=np.float64)
        self.u_max = np.asarray(self.u_max, dtype=np.float64)
        if self.tracking_weight <= 0.0:
            raise ValueError("tracking weight must be positive")
        if self.horizon < 1:
            raise ValueError("horizon must hold at least one step")
        if self.norm_power not in (2, 3):
            raise ValueError("norm_power must be 2 or 3")


@dataclass
class L1State:
    """Hydrogen tank and methanol store energies, MWh."""

    e_h: float
    e_m: float


@dataclass(frozen=True)
class FrozenEff:
    """Efficiencies held constant over one L1 horizon."""

    eta_hc: float
    eta_hd: float
    eta_mc: float
    eta_md: float
    clamped: bool = False


@dataclass
class LayerDecision:
    """First applied move of one layer solve."""

    u_applied: np.ndarray
    output: float
    predicted_residual: float
    solution: QpSolution
    band_clamped: bool = False
    band_dropped: bool = False


def b_matrix(eff: FrozenEff) -> np.ndarray:
    """Input matrix of the hydrogen/methanol state equations."""
    return np.array([
        [eff.eta_hc, -1.0 / eff.eta_hd, -1.0, 0.0],
        [0.0, 0.0, eff.eta_mc, -1.0 / eff.eta_md],
    ])


def l1_dynamics(
    x: L1State,
    u: np.ndarray,
    dt_h: float,
    eff: FrozenEff,
    tank_envelope: tuple[float, float],
) -> L1State:
    """Advance the two stores one step; envelope violations are errors."""
    u = np.asarray(u, dtype=np.float64)
    if u.size != 4 or np.any(u < -1e-12):
        raise ValueError("u must be four non-negative powers")
    delta = b_matrix(eff) @ u * dt_h
    e_h = x.e_h + delta[0]
    e_m = x.e_m + delta[1]
    lo, hi = tank_envelope
    tol = 1e-9 * max(1.0, hi)
    if e_h < lo - tol or e_h > hi + tol:
        raise EnvelopeViolation(
            f"hydrogen store {e_h:.6f} MWh outside [{lo}, {hi}]"
        )
    if e_m < -tol:
        raise EnvelopeViolation(f"methanol store {e_m:.6f} MWh negative")
    return L1State(e_h=min(max(e_h, lo), hi), e_m=max(e_m, 0.0))


def freeze_efficiencies(
    awe: AweParams,
    pemfc: PemfcParams,
    meoh: MeohParams,
    turbine: TurbineParams,
    loads: tuple[float, float, float, float] | None = None,
) -> FrozenEff:
    """Evaluate the device curves at an operating point and hold them.

    loads are the previous applied load fractions per actuator (charge,
    hydrogen discharge, conversion, turbine); None — for the whole tuple or
    any single entry — picks that device's rated-optimal point (the
    documented idle fallback). Out-of-range loads clamp to the nearest
    admissible point and set the clamped flag.
    """
    clamped = False
    if loads is None:
        loads = (None, None, None, None)

    raw = [
        loads[0] * awe.j_range[1] if loads[0] is not None else awe.j_nominal,
        loads[1] * pemfc.j_range[1] if loads[1] is not None else pemfc.j_nominal,
        loads[2] if loads[2] is not None else meoh.rho_star,
        loads[3] if loads[3] is not None else turbine.x_star,
    ]
    limits = (
        (awe.j_range[0], awe.j_range[1]),
        (pemfc.j_range[0], pemfc.j_range[1]),
        (meoh.rho_min, 1.0),
        (TURBINE_LOAD_FLOOR, 1.0),
    )
    for k, ((lo, hi), given) in enumerate(zip(limits, loads)):
        if given is not None and not lo <= raw[k] <= hi:
            clamped = True
        raw[k] = min(max(raw[k], lo), hi)
    j_awe, j_fc, rho, x_t = raw

    _, eta_hc = awe_hydrogen(j_awe * awe.area, awe)
    eta_hd = pemfc_discharge_efficiency(j_fc * pemfc.area, pemfc)
    _, _, eta_mc = meoh_conversion(rho, meoh)
    eta_md = turbine_efficiency(x_t, turbine)
    return FrozenEff(eta_hc, eta_hd, eta_mc, eta_md, clamped)


def conversion_relief_floors(
    e_h: float,
    tank_cap: float,
    forecast: np.ndarray,
    eff: FrozenEff,
    charge_cap: float,
    discharge_cap: float,
    conv_cap: float,
    dt_h: float,
) -> np.ndarray:
    """Minimum conversion schedule keeping the projected tank below its cap.

    Projects the tank under the tracking-implied charge/discharge wishes and
    raises the conversion floor exactly where the projection would overflow.
    The floors feed the QP's lower bounds, so the receding plan starts
    converting before the tank saturates.
    """
    n = forecast.size
    floors = np.zeros(n)
    charge_wish = np.clip(-forecast, 0.0, charge_cap) * eff.eta_hc * dt_h
    discharge_wish = np.clip(forecast, 0.0, discharge_cap) / eff.eta_hd * dt_h
    e = e_h
    for i in range(n):
        e_next = e + charge_wish[i] - discharge_wish[i]
        if e_next < 0.0:
            e_next = 0.0
        if e_next > tank_cap:
            conv = min((e_next - tank_cap) / dt_h, conv_cap)
            floors[i] = conv
            e_next = min(e_next - conv * dt_h, tank_cap)
        e = e_next
    return floors


def l1_bounds(
    spec: LayerSpec,
    state: L1State,
    eff: FrozenEff,
    tank_envelope: tuple[float, float],
    forecast: np.ndarray,
    conv_cap: float,
) -> tuple[np.ndarray, np.ndarray]:
    """Per-step input bounds for the hydrogen/methanol layer.

    Future steps carry rated caps plus the conversion relief floors; the
    first (applied) step is tightened exactly against the current stores so
    any solution inside the box is envelope-safe: the conversion floor is
    reserved first, discharge gets the remaining drain headroom, conversion's
    ceiling takes what discharge left, and the charge cap accounts for the
    floor's concurrent drain.
    """
    n = spec.horizon
    dt = spec.dt_h
    lo = np.zeros((n, 4))
    hi = np.tile(spec.u_max, (n, 1))
    hi[:, 2] = conv_cap
    env_lo, env_hi = tank_envelope

    floors = conversion_relief_floors(
        state.e_h, env_hi, forecast, eff,
        spec.u_max[0], spec.u_max[1], conv_cap, dt,
    )
    lo[:, 2] = np.minimum(floors, hi[:, 2])

    drain_total = max(0.0, (state.e_h - env_lo) / dt)
    floor3 = min(lo[0, 2], conv_cap, drain_total)
    remaining = drain_total - floor3
    hi[0, 1] = min(spec.u_max[1], remaining * eff.eta_hd)
    hi[0, 2] = min(conv_cap, floor3 + max(0.0, remaining - hi[0, 1] / eff.eta_hd))
    hi[0, 0] = min(spec.u_max[0], ((env_hi - state.e_h) / dt + floor3) / eff.eta_hc)
    hi[0, 3] = min(spec.u_max[3], max(0.0, state.e_m) * eff.eta_md / dt)
    lo[0, 2] = min(floor3, hi[0, 2])
    return lo, hi


def simple_bounds(spec: LayerSpec, state: EssState) -> tuple[np.ndarray, np.ndarray]:
    """Per-step (charge, discharge) bounds for a single-store layer; only the
    applied first step is tightened against the current energy."""
    n = spec.horizon
    dt = spec.dt_h
    lo = np.zeros((n, 2))
    hi = np.tile(spec.u_max, (n, 1))
    hi[0, 0] = min(hi[0, 0], max(0.0, state.headroom_charge) / (state.eta_c * dt))
    hi[0, 1] = min(hi[0, 1], max(0.0, state.headroom_discharge) * state.eta_d / dt)
    return lo, hi


def cascade_residual(parent_outputs, own_forecast: np.ndarray) -> np.ndarray:
    """Child residual: own forecast minus the held parent outputs."""
    fc = np.asarray(own_forecast, dtype=np.float64)
    if fc.size == 0:
        raise AlignmentError("forecast slice is empty")
    return fc - float(np.sum(parent_outputs))


def build_layer_problem(
    spec: LayerSpec,
    residual_forecast: np.ndarray,
    lo: np.ndarray,
    hi: np.ndarray,
    band: MtipBounds | None = None,
) -> QpProblem:
    """Assemble the layer QP; the band (when given) binds the first step."""
    n = spec.horizon
    rhat = np.asarray(residual_forecast, dtype=np.float64)
    if rhat.size != n:
        raise AlignmentError(
            f"forecast length {rhat.size} does not match horizon {n}"
        )
    band_lo = np.full(n, -np.inf)
    band_hi = np.full(n, np.inf)
    if band is not None:
        band_lo[0] = band.r_lower
        band_hi[0] = band.r_upper
    return assemble_tracking_qp(
        spec.tracking_weight, spec.output_row, spec.cost_vec, spec.cost_weight,
        rhat, spec.dt_h, lo, hi, band_lo, band_hi, norm_power=spec.norm_power,
    )


def receding_step(
    spec: LayerSpec,
    residual_forecast: np.ndarray,
    lo: np.ndarray,
    hi: np.ndarray,
    band: MtipBounds | None = None,
) -> LayerDecision:
    """Solve the layer QP and return only the first move.

    Infeasible bands fall back to the midpoint-collapsed band, then to a
    band-free solve; both fallbacks are flagged on the decision.
    """
    problem = build_layer_problem(spec, residual_forecast, lo, hi, band)
    sol = solve_qp(problem)
    band_clamped = False
    band_dropped = False
    if sol.status == INFEASIBLE and band is not None:
        mid = 0.5 * (band.r_lower + band.r_upper)
        collapsed = MtipBounds(
            r_lower=mid, r_upper=mid,
            phy_lower=band.phy_lower, phy_upper=band.phy_upper,
            gamma=band.gamma, clamped=True,
        )
        sol = solve_qp(build_layer_problem(spec, residual_forecast, lo, hi, collapsed))
        band_clamped = True
    if sol.status == INFEASIBLE:
        sol = solve_qp(build_layer_problem(spec, residual_forecast, lo, hi, None))
        band_dropped = True

    u0 = sol.u_star[: spec.output_row.size].copy()
    if __debug__:
        charge = u0[spec.output_row < 0]
        discharge = u0[spec.output_row > 0]
        if charge.size and discharge.size:
            assert float(charge.max()) * float(discharge.max()) <= 1e-6, \
                "simultaneous charge and discharge in an applied move"
    y = float(spec.output_row @ u0)
    return LayerDecision(
        u_applied=u0,
        output=y,
        predicted_residual=float(residual_forecast[0]) - y,
        solution=sol,
        band_clamped=band_clamped,
        band_dropped=band_dropped,
    )
