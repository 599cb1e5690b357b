"""Dense convex QP assembly and solving for the stacked tracking problems.

Every control layer produces the same shape of problem: a per-step tracking
penalty ``q * (rhat_i - c_y . u_i)^2``, a linear dispatch cost, box bounds on
the stacked input vector and optional two-sided residual-band rows. The
assembled problem carries that step structure alongside the dense standard
form (``H = 2 C' (I x Q) C``), and the solver dispatches on it:

* separable problems (block-diagonal Hessian, bands confined to single
  steps) are solved step-by-step in closed form, fully vectorized;
* problems with exactly one cross-step equality row (the periodic-SOC
  baseline) are solved by bisection on the scalar dual of that row;
* everything else goes through a dual active-set method on the dense form.

All paths are deterministic: identical problems yield bit-identical
solutions.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve

OPTIMAL = "optimal"
MAX_ITER = "max_iter"
INFEASIBLE = "infeasible"

_DROP_TOL = 1e-12


@dataclass
class StepStructure:
    """Per-step separable layout of a stacked tracking QP.

    c_y maps one step's inputs to its grid output; rhat is the residual
    forecast per step; cost the linear price per input and step (already
    scaled by the cost weight and the step length); band_lo/band_hi bound
    the post-dispatch residual per step (+-inf where absent). norm_power
    selects the tracking penalty exponent (2, or 3 for the flagged
    literal-cubic variant, which only the separable path supports).
    """

    c_y: np.ndarray
    q: float
    rhat: np.ndarray
    cost: np.ndarray          # (N, nu)
    band_lo: np.ndarray       # (N,)
    band_hi: np.ndarray       # (N,)
    norm_power: int = 2

    @property
    def n_steps(self) -> int:
        return self.rhat.size

    @property
    def nu(self) -> int:
        return self.c_y.size


@dataclass
class QpProblem:
    """Stacked QP in standard form, optionally carrying its step structure.

    ``var_lower``/``var_upper`` bound the stacked input U; ``coupling``
    holds cross-step rows as ``(a, lo, hi)`` triples. The dense Hessian and
    inequality blocks are materialized lazily from the structure when
    present. ``mu_hint`` warm-starts the coupling-row dual between
    consecutive receding solves and never changes the solution.
    """

    f: np.ndarray
    var_lower: np.ndarray
    var_upper: np.ndarray
    structure: StepStructure | None = None
    coupling: list[tuple[np.ndarray, float, float]] = field(default_factory=list)
    objective_const: float = 0.0
    mu_hint: float | None = None
    _hessian: np.ndarray | None = None

    def __post_init__(self):
        self.f = np.asarray(self.f, dtype=np.float64)
        self.var_lower = np.asarray(self.var_lower, dtype=np.float64)
        self.var_upper = np.asarray(self.var_upper, dtype=np.float64)
        n = self.f.size
        if self.var_lower.size != n or self.var_upper.size != n:
            raise ValueError("bound vectors must match the variable count")
        if np.any(self.var_lower > self.var_upper + 1e-12):
            raise ValueError("var_lower must not exceed var_upper")

    @property
    def n(self) -> int:
        return self.f.size

    @property
    def hessian(self) -> np.ndarray:
        if self._hessian is None:
            st = self.structure
            if st is None:
                raise ValueError("no Hessian given and no structure to build it from")
            if st.norm_power != 2:
                raise ValueError("dense form only exists for the quadratic penalty")
            block = 2.0 * st.q * np.outer(st.c_y, st.c_y)
            n = st.n_steps * st.nu
            h = np.zeros((n, n))
            for i in range(st.n_steps):
                h[i * st.nu : (i + 1) * st.nu, i * st.nu : (i + 1) * st.nu] = block
            self._hessian = h
        return self._hessian

    def ineq_rows(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Dense (G, lower, upper) with band rows first, coupling rows after."""
        rows: list[np.ndarray] = []
        lo: list[float] = []
        hi: list[float] = []
        st = self.structure
        if st is not None:
            for i in range(st.n_steps):
                blo, bhi = st.band_lo[i], st.band_hi[i]
                if np.isinf(blo) and np.isinf(bhi):
                    continue
                g = np.zeros(self.n)
                g[i * st.nu : (i + 1) * st.nu] = st.c_y
                # residual band: rhat - c_y.u in [blo, bhi] maps to
                # c_y.u in [rhat - bhi, rhat - blo]
                rows.append(g)
                lo.append(st.rhat[i] - bhi)
                hi.append(st.rhat[i] - blo)
        for a, alo, ahi in self.coupling:
            rows.append(np.asarray(a, dtype=np.float64))
            lo.append(alo)
            hi.append(ahi)
        if not rows:
            return np.zeros((0, self.n)), np.zeros(0), np.zeros(0)
        return np.vstack(rows), np.array(lo), np.array(hi)

    def validate(self, tol_sym: float = 1e-10, tol_psd: float = 1e-8) -> None:
        """Assert symmetry and positive semidefiniteness of the Hessian."""
        h = self.hessian
        asym = np.abs(h - h.T).max() if h.size else 0.0
        if asym > tol_sym:
            raise ValueError(f"Hessian asymmetry {asym} exceeds {tol_sym}")
        if h.size:
            w = np.linalg.eigvalsh(h)
            scale = max(np.abs(w).max(), 1.0)
            if w.min() < -tol_psd * scale:
                raise ValueError(f"Hessian indefinite: min eigenvalue {w.min()}")


@dataclass
class QpSolution:
    u_star: np.ndarray
    objective: float
    status: str
    kkt_residual: float
    iterations: int
    regularized: bool = False
    coupling_slack: float = 0.0


def assemble_tracking_qp(
    weight_q: float,
    output_row: np.ndarray,
    cost_vec: np.ndarray,
    cost_weight: float,
    forecast: np.ndarray,
    dt_h: float,
    u_lower: np.ndarray,
    u_upper: np.ndarray,
    band_lo: np.ndarray | None = None,
    band_hi: np.ndarray | None = None,
    norm_power: int = 2,
) -> QpProblem:
    """Build the stacked tracking QP for one receding-horizon solve.

    Parameters
    ----------
    weight_q : float
        Tracking weight, > 0.
    output_row : array (nu,)
        Maps one step's inputs to grid output.
    cost_vec : array (nu,)
        Dispatch cost per input, currency/MWh.
    cost_weight : float
        Scalar weight on the cost term, >= 0.
    forecast : array (N,)
        Residual net-load forecast over the horizon, MW.
    dt_h : float
        Step length in hours.
    u_lower, u_upper : array (N, nu) or (nu,)
        Per-step input bounds, broadcast across steps if one-dimensional.
    band_lo, band_hi : array (N,), optional
        Residual band per step; +-inf (the default) disables a side.
    """
    if weight_q <= 0.0:
        raise ValueError("tracking weight must be positive")
    if cost_weight < 0.0:
        raise ValueError("cost weight must be non-negative")
    c_y = np.asarray(output_row, dtype=np.float64)
    rhat = np.asarray(forecast, dtype=np.float64)
    n_steps = rhat.size
    if n_steps < 1:
        raise ValueError("horizon must contain at least one step")
    nu = c_y.size
    cvec = np.asarray(cost_vec, dtype=np.float64)
    if cvec.size != nu:
        raise ValueError(f"cost vector length {cvec.size} != output row length {nu}")
    lo = np.broadcast_to(np.asarray(u_lower, dtype=np.float64), (n_steps, nu)).copy()
    hi = np.broadcast_to(np.asarray(u_upper, dtype=np.float64), (n_steps, nu)).copy()
    cost = np.broadcast_to(cost_weight * cvec * dt_h, (n_steps, nu)).copy()
    if band_lo is None:
        band_lo = np.full(n_steps, -np.inf)
    if band_hi is None:
        band_hi = np.full(n_steps, np.inf)
    band_lo = np.asarray(band_lo, dtype=np.float64)
    band_hi = np.asarray(band_hi, dtype=np.float64)
    if band_lo.size != n_steps or band_hi.size != n_steps:
        raise ValueError("band arrays must have one entry per step")

    st = StepStructure(
        c_y=c_y, q=weight_q, rhat=rhat, cost=cost,
        band_lo=band_lo, band_hi=band_hi, norm_power=norm_power,
    )
    f = (-2.0 * weight_q * rhat[:, None] * c_y[None, :] + cost).ravel()
    const = weight_q * float(rhat @ rhat) if norm_power == 2 else 0.0
    return QpProblem(
        f=f,
        var_lower=lo.ravel(),
        var_upper=hi.ravel(),
        structure=st,
        objective_const=const,
    )


# ----------------------------------------------------------------------
# Separable closed-form path
# ----------------------------------------------------------------------

def _solve_charge_discharge(
    st: StepStructure, lo: np.ndarray, hi: np.ndarray, price: np.ndarray
) -> tuple[np.ndarray, np.ndarray, bool]:
    """Specialized path for one charge / one discharge input with zero
    floors and non-negative prices (every L2/L3 solve)."""
    cy = st.c_y
    i_d = 0 if cy[0] > 0 else 1
    i_c = 1 - i_d
    q = st.q
    rhat = st.rhat
    cap_d = hi[:, i_d]
    cap_c = hi[:, i_c]
    g_d, g_c = price[i_d], price[i_c]
    if st.norm_power == 2:
        shift_d = g_d / (2.0 * q)
        shift_c = g_c / (2.0 * q)
    else:
        shift_d = np.sqrt(g_d / (3.0 * q))
        shift_c = np.sqrt(g_c / (3.0 * q))

    y_up = np.minimum(np.maximum(rhat - shift_d, 0.0), cap_d)
    y_dn = np.maximum(np.minimum(rhat + shift_c, 0.0), -cap_c)
    d_up = rhat - y_up
    d_dn = rhat - y_dn
    if st.norm_power == 2:
        f_up = q * d_up * d_up + g_d * y_up
        f_dn = q * d_dn * d_dn - g_c * y_dn
    else:
        f_up = q * np.abs(d_up) ** 3 + g_d * y_up
        f_dn = q * np.abs(d_dn) ** 3 - g_c * y_dn
    y_star = np.where(f_up <= f_dn, y_up, y_dn)

    y_lo = np.maximum(-cap_c, rhat - st.band_hi)
    y_hi = np.minimum(cap_d, rhat - st.band_lo)
    if np.any(y_lo > y_hi + 1e-9):
        return np.zeros((st.n_steps, 2)), np.zeros(st.n_steps), False
    # Objective is convex in y, so clipping the global argmin into the
    # band window yields the constrained argmin.
    y_star = np.minimum(np.maximum(y_star, y_lo), y_hi)
    u = np.empty((st.n_steps, 2))
    u[:, i_d] = np.maximum(y_star, 0.0)
    u[:, i_c] = np.maximum(-y_star, 0.0)
    return u, y_star, True


def _solve_steps(
    st: StepStructure,
    lo: np.ndarray,
    hi: np.ndarray,
    extra_cost: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray, bool]:
    """Closed-form per-step minimization, vectorized across steps.

    lo/hi are (N, nu). extra_cost shifts the linear cost (used by the
    coupling-row dual); linear prices must be shared by all steps so one
    fill order covers the whole horizon. Returns (U as (N, nu), y per step,
    feasible flag); infeasible means a banded step's output window misses
    the achievable output range.
    """
    n, nu = st.n_steps, st.nu
    cy = st.c_y
    cost = st.cost if extra_cost is None else st.cost + extra_cost
    if np.abs(cost - cost[0]).max() > 1e-12 * max(1.0, np.abs(cost).max()):
        raise ValueError("per-step prices must not vary across the horizon")
    price = cost[0]
    if (
        nu == 2
        and cy[0] * cy[1] == -1.0
        and abs(cy[0]) == 1.0
        and price[0] >= 0.0
        and price[1] >= 0.0
        and not lo.any()
    ):
        return _solve_charge_discharge(st, lo, hi, price)
    q = st.q
    pw = st.norm_power

    # Cost-minimal base configuration: saturate negatively priced inputs.
    base = np.where(price < 0.0, hi, lo)                   # (N, nu)
    y_base = base @ cy                                     # (N,)

    # Moves away from base, each with a scalar price per unit |dy| and a
    # per-step capacity in y units. Only zero-capacity moves can carry a
    # negative rate (base is cost-minimal), so the piecewise cost is convex.
    up: list[tuple[float, np.ndarray, int, float]] = []    # (rate, cap_y, var, du per dy)
    dn: list[tuple[float, np.ndarray, int, float]] = []
    for k in range(nu):
        ck = cy[k]
        if ck == 0.0:
            continue
        pk = price[k]
        for u_dir, room in ((1.0, hi[:, k] - base[:, k]), (-1.0, base[:, k] - lo[:, k])):
            dy_per_u = u_dir * ck
            rate = u_dir * pk / abs(ck)
            cap_y = room * abs(ck)
            move = (rate, cap_y, k, u_dir / abs(ck))
            if dy_per_u > 0.0:
                up.append(move)
            else:
                dn.append(move)

    def _ordered(moves):
        moves = sorted(moves, key=lambda m: (m[0], m[2], m[3]))
        if not moves:
            return np.zeros((n, 0)), np.zeros(0), []
        caps = np.stack([m[1] for m in moves], axis=1)     # (N, S)
        rates = np.array([m[0] for m in moves])            # (S,)
        who = [(m[2], m[3]) for m in moves]
        return caps, rates, who

    up_caps, up_rates, up_who = _ordered(up)
    dn_caps, dn_rates, dn_who = _ordered(dn)
    up_edges = np.cumsum(up_caps, axis=1)
    dn_edges = np.cumsum(dn_caps, axis=1)
    y_max = y_base + (up_edges[:, -1] if up_edges.size else 0.0)
    y_min = y_base - (dn_edges[:, -1] if dn_edges.size else 0.0)

    # Residual band maps to a window on y.
    y_lo = np.maximum(y_min, st.rhat - st.band_hi)
    y_hi = np.minimum(y_max, st.rhat - st.band_lo)
    if np.any(y_lo > y_hi + 1e-9):
        return np.zeros((n, nu)), np.zeros(n), False

    rhat = st.rhat

    def _track(y):
        d = rhat - y
        return q * d * d if pw == 2 else q * np.abs(d) ** 3

    def _shift(rate):
        # Stationary offset of the tracking error for a cost slope `rate`.
        if pw == 2:
            return rate / (2.0 * q)
        return np.sqrt(max(rate, 0.0) / (3.0 * q))

    def _cost_at(y):
        dev = y - y_base
        c = np.zeros_like(y)
        pos = np.maximum(dev, 0.0)
        for sgi in range(up_edges.shape[1]):
            c += np.clip(pos - (up_edges[:, sgi - 1] if sgi else 0.0), 0.0,
                         up_caps[:, sgi]) * up_rates[sgi]
        neg = np.maximum(-dev, 0.0)
        for sgi in range(dn_edges.shape[1]):
            c += np.clip(neg - (dn_edges[:, sgi - 1] if sgi else 0.0), 0.0,
                         dn_caps[:, sgi]) * dn_rates[sgi]
        return c

    best_y = np.clip(y_base, y_lo, y_hi)
    best_obj = _track(best_y) + _cost_at(best_y)

    def _consider(cand):
        nonlocal best_y, best_obj
        obj = _track(cand) + _cost_at(cand)
        better = obj < best_obj
        best_y = np.where(better, cand, best_y)
        best_obj = np.where(better, obj, best_obj)

    for sgi in range(up_edges.shape[1]):
        seg_lo = y_base + (up_edges[:, sgi - 1] if sgi else 0.0)
        seg_hi = y_base + up_edges[:, sgi]
        cand = np.clip(np.clip(rhat - _shift(up_rates[sgi]), seg_lo, seg_hi), y_lo, y_hi)
        _consider(cand)
    for sgi in range(dn_edges.shape[1]):
        seg_hi = y_base - (dn_edges[:, sgi - 1] if sgi else 0.0)
        seg_lo = y_base - dn_edges[:, sgi]
        cand = np.clip(np.clip(rhat + _shift(dn_rates[sgi]), seg_lo, seg_hi), y_lo, y_hi)
        _consider(cand)
    _consider(np.where(np.isfinite(y_lo), y_lo, best_y))
    _consider(np.where(np.isfinite(y_hi), y_hi, best_y))

    # Decompose best_y back into inputs by walking the fill order.
    u = base.copy()
    need_pos = np.maximum(best_y - y_base, 0.0)
    for sgi, (k, du) in enumerate(up_who):
        prev = up_edges[:, sgi - 1] if sgi else 0.0
        amt = np.clip(need_pos - prev, 0.0, up_caps[:, sgi])
        u[:, k] += amt * du
    need_neg = np.maximum(y_base - best_y, 0.0)
    for sgi, (k, du) in enumerate(dn_who):
        prev = dn_edges[:, sgi - 1] if sgi else 0.0
        amt = np.clip(need_neg - prev, 0.0, dn_caps[:, sgi])
        u[:, k] += amt * du
    np.clip(u, lo, hi, out=u)
    return u, best_y, True


def _objective_from_structure(st: StepStructure, u: np.ndarray) -> float:
    y = u @ st.c_y
    d = st.rhat - y
    track = st.q * float((d * d).sum()) if st.norm_power == 2 else \
        st.q * float((np.abs(d) ** 3).sum())
    return track + float((st.cost * u).sum())


def _solve_separable(p: QpProblem) -> QpSolution:
    st = p.structure
    lo = p.var_lower.reshape(st.n_steps, st.nu)
    hi = p.var_upper.reshape(st.n_steps, st.nu)
    u, _, feasible = _solve_steps(st, lo, hi)
    if not feasible:
        return QpSolution(
            u_star=np.zeros(p.n), objective=np.inf, status=INFEASIBLE,
            kkt_residual=np.inf, iterations=0,
        )
    obj = _objective_from_structure(st, u)
    return QpSolution(
        u_star=u.ravel(), objective=obj, status=OPTIMAL,
        kkt_residual=0.0, iterations=st.n_steps,
    )


# ----------------------------------------------------------------------
# Single coupling row: scalar dual bisection
# ----------------------------------------------------------------------

def _solve_with_coupling(p: QpProblem, tol: float, max_iter: int) -> QpSolution:
    st = p.structure
    a, b_lo, b_hi = p.coupling[0]
    if b_lo != b_hi:
        raise ValueError("coupling path requires an equality row")
    b = b_lo
    lo = p.var_lower.reshape(st.n_steps, st.nu)
    hi = p.var_upper.reshape(st.n_steps, st.nu)
    a2 = np.asarray(a, dtype=np.float64).reshape(st.n_steps, st.nu)

    # Steps the row does not touch decouple from the dual and solve once.
    touched = np.abs(a2).sum(axis=1) > 0.0
    free = ~touched
    u_full = np.zeros((st.n_steps, st.nu))
    if free.any():
        st_free = StepStructure(
            c_y=st.c_y, q=st.q, rhat=st.rhat[free], cost=st.cost[free],
            band_lo=st.band_lo[free], band_hi=st.band_hi[free],
            norm_power=st.norm_power,
        )
        u_free, _, ok = _solve_steps(st_free, lo[free], hi[free])
        if not ok:
            raise ValueError("coupling path does not support band rows")
        u_full[free] = u_free
    st_t = StepStructure(
        c_y=st.c_y, q=st.q, rhat=st.rhat[touched], cost=st.cost[touched],
        band_lo=st.band_lo[touched], band_hi=st.band_hi[touched],
        norm_power=st.norm_power,
    )
    lo_t, hi_t, a_t = lo[touched], hi[touched], a2[touched]

    def inner(mu: float) -> tuple[np.ndarray, float]:
        u, _, ok = _solve_steps(st_t, lo_t, hi_t, extra_cost=mu * a_t)
        if not ok:
            raise ValueError("coupling path does not support band rows")
        return u, float((a_t * u).sum())

    # Achievable range of a.U under the box alone; a target outside it is
    # met at the nearest boundary with the gap reported as slack.
    hi_cfg = np.where(a_t > 0, hi_t, lo_t)
    lo_cfg = np.where(a_t > 0, lo_t, hi_t)
    h_max = float((hi_cfg * a_t).sum())
    h_min = float((lo_cfg * a_t).sum())
    span = max(abs(h_max), abs(h_min), 1.0)
    if b >= h_max - 1e-12 * span:
        u_t = hi_cfg
        slack = b - h_max
        it = 1
        h = h_max
    elif b <= h_min + 1e-12 * span:
        u_t = lo_cfg
        slack = b - h_min
        it = 1
        h = h_min
    else:
        slack = 0.0
        start = p.mu_hint if p.mu_hint is not None and np.isfinite(p.mu_hint) else 0.0
        u_t, h = inner(start)
        it = 1
        # The dual only needs to be resolved until the terminal-energy
        # mismatch is negligible, not to machine precision in mu.
        h_tol = max(tol, 1e-7 * span)
        if abs(h - b) > h_tol:
            width = max(1.0, abs(start))
            if h > b:
                mu_lo, h_lo = start, h
                mu_hi = start + width
                while it < max_iter:
                    u_t, h = inner(mu_hi)
                    it += 1
                    if h <= b:
                        h_hi = h
                        break
                    mu_lo, h_lo = mu_hi, h
                    mu_hi = mu_hi + (mu_hi - start + width) * 3.0
                else:
                    h_hi = h
            else:
                mu_hi, h_hi = start, h
                mu_lo = start - width
                while it < max_iter:
                    u_t, h = inner(mu_lo)
                    it += 1
                    if h >= b:
                        h_lo = h
                        break
                    mu_hi, h_hi = mu_lo, h
                    mu_lo = mu_lo - (start - mu_lo + width) * 3.0
                else:
                    h_lo = h
            # Illinois false position on the monotone piecewise-linear dual.
            side = 0
            while it < max_iter and abs(h - b) > h_tol and \
                    mu_hi - mu_lo > 1e-12 * max(1.0, abs(mu_hi), abs(mu_lo)):
                denom = h_hi - h_lo
                if denom >= 0.0:
                    mu_new = 0.5 * (mu_lo + mu_hi)
                else:
                    mu_new = (mu_lo * (h_hi - b) - mu_hi * (h_lo - b)) / denom
                    if not mu_lo < mu_new < mu_hi:
                        mu_new = 0.5 * (mu_lo + mu_hi)
                u_t, h = inner(mu_new)
                it += 1
                if h > b:
                    mu_lo, h_lo = mu_new, h
                    if side == -1:
                        h_hi = 0.5 * (h_hi - b) + b
                    side = -1
                else:
                    mu_hi, h_hi = mu_new, h
                    if side == 1:
                        h_lo = 0.5 * (h_lo - b) + b
                    side = 1
            if abs(h - b) > h_tol:
                # The dual response jumps where a mu-modified price changes
                # sign; both bracket endpoints minimize the same Lagrangian,
                # so the convex combination meeting the row exactly is
                # primal-optimal.
                u_lo_sol, h_lo2 = inner(mu_lo)
                u_hi_sol, h_hi2 = inner(mu_hi)
                it += 2
                if h_lo2 > h_hi2 + 1e-15:
                    theta = min(max((b - h_hi2) / (h_lo2 - h_hi2), 0.0), 1.0)
                    u_t = theta * u_lo_sol + (1.0 - theta) * u_hi_sol
                    h = theta * h_lo2 + (1.0 - theta) * h_hi2
                else:
                    u_t, h = u_hi_sol, h_hi2
            p.mu_hint = 0.5 * (mu_lo + mu_hi)

    u_full[touched] = u_t
    obj = _objective_from_structure(st, u_full)
    return QpSolution(
        u_star=u_full.ravel(), objective=obj,
        status=OPTIMAL if it < max_iter else MAX_ITER,
        kkt_residual=abs(h - (b - slack)), iterations=it,
        coupling_slack=slack,
    )


# ----------------------------------------------------------------------
# Generic dense dual active-set method
# ----------------------------------------------------------------------

def _constraint_rows(p: QpProblem) -> tuple[np.ndarray, np.ndarray]:
    """All constraints as c.x >= b rows (boxes first, then G rows)."""
    n = p.n
    rows: list[np.ndarray] = []
    rhs: list[float] = []
    eye = np.eye(n)
    for k in range(n):
        if np.isfinite(p.var_lower[k]):
            rows.append(eye[k]); rhs.append(p.var_lower[k])
        if np.isfinite(p.var_upper[k]):
            rows.append(-eye[k]); rhs.append(-p.var_upper[k])
    g, glo, ghi = p.ineq_rows()
    for i in range(g.shape[0]):
        if np.isfinite(glo[i]):
            rows.append(g[i]); rhs.append(glo[i])
        if np.isfinite(ghi[i]):
            rows.append(-g[i]); rhs.append(-ghi[i])
    if not rows:
        return np.zeros((0, n)), np.zeros(0)
    return np.vstack(rows), np.array(rhs)


def _solve_active_set(p: QpProblem, tol: float, max_iter: int) -> QpSolution:
    h = p.hessian.copy()
    n = p.n
    regularized = False
    w_min = float(np.linalg.eigvalsh(h).min()) if n else 0.0
    if w_min < 1e-10:
        h[np.diag_indices(n)] += 1e-9 * max(np.trace(h) / max(n, 1), 1.0)
        regularized = True
    chol = cho_factor(h)
    c_all, b_all = _constraint_rows(p)
    m = c_all.shape[0]

    x = cho_solve(chol, -p.f)
    active: list[int] = []
    mult: list[float] = []
    accepted: set[int] = set()
    iters = 0
    status = OPTIMAL
    feas_tol = max(tol, 1e-10)
    # Violations are judged relative to each row's right-hand-side scale so
    # float noise after large interior excursions cannot masquerade as
    # infeasibility.
    viol_scale = 1.0 + np.abs(b_all) if m else np.ones(0)

    while True:
        iters += 1
        if iters > max_iter:
            status = MAX_ITER
            break
        if m:
            s = (c_all @ x - b_all) / viol_scale
            if accepted:
                s = s.copy()
                s[list(accepted)] = 0.0
            pidx = int(np.argmin(s))
            viol = float(s[pidx])
        else:
            viol = 0.0
            pidx = -1
        if viol >= -feas_tol:
            break
        cp = c_all[pidx]
        u_p = 0.0
        infeasible = False
        while True:
            iters += 1
            if iters > max_iter:
                status = MAX_ITER
                break
            gi_cp = cho_solve(chol, cp)
            if active:
                ca = c_all[active]
                gi_ca = cho_solve(chol, ca.T)
                mgram = ca @ gi_ca
                rhsv = ca @ gi_cp
                try:
                    r = np.linalg.solve(mgram, rhsv)
                except np.linalg.LinAlgError:
                    r = np.linalg.lstsq(mgram, rhsv, rcond=None)[0]
                z = gi_cp - gi_ca @ r
            else:
                r = np.zeros(0)
                z = gi_cp
            t1 = np.inf
            k1 = -1
            for j in range(len(active)):
                if r[j] > _DROP_TOL:
                    ratio = mult[j] / r[j]
                    if ratio < t1:
                        t1 = ratio
                        k1 = j
            denom = float(z @ cp)
            if denom > _DROP_TOL:
                t2 = -(float(cp @ x) - b_all[pidx]) / denom
            else:
                t2 = np.inf
            t = min(t1, t2)
            if not np.isfinite(t):
                s_p = (float(cp @ x) - b_all[pidx]) / viol_scale[pidx]
                if s_p >= -1e-5:
                    # Dead end on a noise-level violation: accept the row as
                    # satisfied instead of declaring infeasibility.
                    accepted.add(pidx)
                    break
                infeasible = True
                break
            if np.isinf(t2):
                for j in range(len(active)):
                    mult[j] -= t * r[j]
                u_p += t
                active.pop(k1)
                mult.pop(k1)
                continue
            x = x + t * z
            for j in range(len(active)):
                mult[j] -= t * r[j]
            u_p += t
            if t == t2:
                active.append(pidx)
                mult.append(u_p)
                break
            active.pop(k1)
            mult.pop(k1)
        if infeasible:
            return QpSolution(
                u_star=x, objective=np.inf, status=INFEASIBLE,
                kkt_residual=np.inf, iterations=iters,
                regularized=regularized,
            )
        if status == MAX_ITER:
            break

    grad = h @ x + p.f
    if active:
        grad = grad - c_all[active].T @ np.array(mult)
    stat_res = float(np.abs(grad).max()) if n else 0.0
    feas_res = 0.0
    if m:
        feas_res = max(0.0, float(-(c_all @ x - b_all).min()))
    kkt = max(stat_res, feas_res)
    obj = 0.5 * float(x @ p.hessian @ x) + float(p.f @ x) + p.objective_const
    return QpSolution(
        u_star=x, objective=obj, status=status, kkt_residual=kkt,
        iterations=iters, regularized=regularized,
    )


def solve_qp(p: QpProblem, tol: float = 1e-8, max_iter: int | None = None) -> QpSolution:
    """Solve a QpProblem, dispatching on its structure.

    Structured problems without coupling rows take the closed-form separable
    path; a single equality coupling row (without band rows) takes the
    scalar-dual path; dense problems and everything else use the dual
    active-set method.
    """
    if max_iter is None:
        max_iter = 50 * (p.n + 10) + 200
    if p.structure is not None:
        if not p.coupling:
            return _solve_separable(p)
        if (
            len(p.coupling) == 1
            and p.coupling[0][1] == p.coupling[0][2]
            and not np.any(np.isfinite(p.structure.band_lo))
            and not np.any(np.isfinite(p.structure.band_hi))
        ):
            return _solve_with_coupling(p, tol, max_iter)
        if p.structure.norm_power != 2:
            raise ValueError("cubic penalty requires the separable path")
    return _solve_active_set(p, tol, max_iter)


def dump_problem(p: QpProblem, path) -> None:
    """Write the dense blocks as plain text matrices (debug interface)."""
    g, glo, ghi = p.ineq_rows()
    blocks = [
        ("H", np.atleast_2d(p.hessian)),
        ("f", p.f[None, :]),
        ("var_lower", p.var_lower[None, :]),
        ("var_upper", p.var_upper[None, :]),
        ("G", g if g.size else np.zeros((0, p.n))),
        ("ineq_lower", glo[None, :] if glo.size else np.zeros((1, 0))),
        ("ineq_upper", ghi[None, :] if ghi.size else np.zeros((1, 0))),
    ]
    with open(path, "w", encoding="utf-8") as fh:
        for name, mat in blocks:
            fh.write(f"# {name} {mat.shape[0]} {mat.shape[1]}\n")
            for row in mat:
                fh.write(" ".join(repr(float(v)) for v in row) + "\n")
