import numpy as np
import pytest

from hessmpc.devices import (
    LHV_H2, MOLAR_MASS_H2, MeohParams, TurbineParams, meoh_conversion,
    turbine_efficiency,
)
from hessmpc.errors import LoadOutOfRange

M = MeohParams()


def test_conversion_at_minimum_load_hits_max():
    x, _, _ = meoh_conversion(M.rho_min, M)
    assert x == pytest.approx(M.x_max)


def test_selectivity_peak_at_optimal_load():
    _, s, _ = meoh_conversion(M.rho_star, M)
    assert s == pytest.approx(M.s_max)
    _, s_off, _ = meoh_conversion(M.rho_star - 0.2, M)
    assert s_off < s


def test_conversion_monotone_decreasing():
    rhos = np.linspace(M.rho_min, 1.0, 50)
    xs = [meoh_conversion(float(r), M)[0] for r in rhos]
    assert all(b < a for a, b in zip(xs, xs[1:]))


def test_efficiency_factor_arithmetic():
    # eta = X * S * (M_M / 3 M_H) * (LHV_M / LHV_H)
    p = MeohParams(x_min=0.95, x_max=0.95, s_min=0.99, s_max=0.99)
    _, _, eta = meoh_conversion(0.5, p)
    expected = 0.95 * 0.99 * (p.molar_mass_meoh / (3 * MOLAR_MASS_H2)) * (p.lhv_meoh / LHV_H2)
    assert eta == pytest.approx(expected)
    assert eta == pytest.approx(0.910, abs=2e-3)


def test_load_out_of_range():
    with pytest.raises(LoadOutOfRange):
        meoh_conversion(M.rho_min - 0.01, M)
    with pytest.raises(LoadOutOfRange):
        meoh_conversion(1.01, M)


def test_efficiency_window():
    for rho in np.linspace(M.rho_min, 1.0, 30):
        _, _, eta = meoh_conversion(float(rho), M)
        assert 0.70 <= eta <= 0.80


def test_turbine_vertex():
    t = TurbineParams()
    assert turbine_efficiency(t.x_star, t) == pytest.approx(t.eta_max)


def test_turbine_reference_value():
    t = TurbineParams(eta_max=0.52, curvature=0.5, x_star=0.85)
    assert turbine_efficiency(0.35, t) == pytest.approx(0.52 * (1 - 0.125))
    assert turbine_efficiency(0.35, t) == pytest.approx(0.455)


def test_turbine_symmetry():
    t = TurbineParams()
    d = 0.1
    assert turbine_efficiency(t.x_star + d, t) == pytest.approx(
        turbine_efficiency(t.x_star - d, t))


def test_turbine_domain_errors():
    t = TurbineParams(curvature=50.0)
    with pytest.raises(ValueError):
        turbine_efficiency(0.2, t)
    with pytest.raises(ValueError):
        turbine_efficiency(0.0, TurbineParams())
    with pytest.raises(ValueError):
        turbine_efficiency(1.5, TurbineParams())
