import numpy as np
import pytest

from hessmpc.devices import (
    AweParams, PemfcParams, awe_cell_voltage, awe_hydrogen,
    faradaic_efficiency, pemfc_discharge_efficiency, pemfc_voltage,
    FARADAY, MOLAR_MASS_H2, LHV_VOLTAGE, HHV_VOLTAGE,
)

AWE = AweParams()
FC = PemfcParams()


def test_awe_voltage_at_zero_current():
    assert awe_cell_voltage(0.0, AWE) == pytest.approx(AWE.u_rev)


def test_awe_voltage_ohmic_only():
    p = AweParams(s=0.0)
    j = 0.5
    slope = (p.r1 + p.d1) + p.r2 * p.temp + p.d2 * p.pressure
    assert awe_cell_voltage(j * p.area, p) == pytest.approx(p.u_rev + slope * j)


def test_awe_voltage_strictly_increasing():
    js = np.linspace(0.01, 1.2, 200)
    vs = [awe_cell_voltage(j * AWE.area, AWE) for j in js]
    assert all(b > a for a, b in zip(vs, vs[1:]))


def test_awe_log_is_base_10():
    # With a unit log argument increment the activation term must follow
    # log10, not ln.
    p = AweParams(r1=0.0, r2=0.0, d1=0.0, d2=0.0, s=1.0,
                  t1=9.0, t2=0.0, t3=0.0, u_rev=0.0)
    v = awe_cell_voltage(1.0 * p.area, p)
    assert v == pytest.approx(1.0)   # log10(9*1 + 1) = 1


def test_faradaic_limits():
    p = AweParams(f1=0.0, f2=0.0)
    assert faradaic_efficiency(123.0, p) == pytest.approx(
        min(1.0, p.f3 + p.f4 * p.temp))
    p2 = AweParams(f1=1.0, f2=0.0, f3=1.0, f4=0.0)
    assert faradaic_efficiency(1.0 * p2.area, p2) == pytest.approx(0.5)


def test_faradaic_saturates_toward_ceiling():
    etas = [faradaic_efficiency(j * AWE.area, AWE) for j in (0.2, 0.5, 1.0, 3.0)]
    assert all(b > a for a, b in zip(etas, etas[1:]))
    assert etas[-1] <= 1.0


def test_hydrogen_rate_arithmetic():
    p = AweParams(n_cells=1, f1=0.0, f2=0.0, f3=1.0, f4=0.0)
    rate, _ = awe_hydrogen(1000.0, p)
    expected = 3600.0 * MOLAR_MASS_H2 * 1000.0 / (2.0 * FARADAY)
    assert rate == pytest.approx(expected)
    assert rate == pytest.approx(0.03761, rel=1e-3)


def test_lhv_breakeven_voltage():
    assert LHV_VOLTAGE == pytest.approx(1.2535, abs=1e-3)
    # A cell at exactly the LHV voltage with perfect Faradaic efficiency
    # charges at unit efficiency.
    eta = 1.0 * LHV_VOLTAGE / LHV_VOLTAGE
    assert eta == pytest.approx(1.0)


def test_charge_efficiency_formula():
    _, eta = awe_hydrogen(0.4 * AWE.area, AWE)
    u = awe_cell_voltage(0.4 * AWE.area, AWE)
    f = faradaic_efficiency(0.4 * AWE.area, AWE)
    assert eta == pytest.approx(f * LHV_VOLTAGE / u)
    # 0.95 Faradaic at 1.8 V lands near 0.6616.
    assert 0.95 * LHV_VOLTAGE / 1.8 == pytest.approx(0.6616, abs=2e-4)


def test_awe_efficiency_within_window():
    lo, hi = AWE.j_range
    for j in np.linspace(lo, hi, 30):
        _, eta = awe_hydrogen(j * AWE.area, AWE)
        assert 0.65 <= eta <= 0.85


def test_pemfc_voltage_decreasing():
    js = np.linspace(0.05, 1.4, 150)
    vs = [pemfc_voltage(j * FC.area, FC) for j in js]
    assert all(b < a for a, b in zip(vs, vs[1:]))


def test_pemfc_domain_error_at_jmax():
    with pytest.raises(ValueError):
        pemfc_voltage(FC.j_max * FC.area, FC)
    with pytest.raises(ValueError):
        pemfc_voltage(0.0, FC)


def test_pemfc_voltage_collapse_near_jmax():
    v_mid = pemfc_voltage(0.5 * FC.area, FC)
    v_edge = pemfc_voltage(0.999 * FC.j_max * FC.area, FC)
    assert v_edge < v_mid - 0.05


def test_hhv_breakeven_voltage():
    assert HHV_VOLTAGE == pytest.approx(1.4818, abs=1e-3)


def test_discharge_efficiency_linear_in_voltage():
    j = 0.5
    eta = pemfc_discharge_efficiency(j * FC.area, FC)
    v = pemfc_voltage(j * FC.area, FC)
    assert eta == pytest.approx(v / HHV_VOLTAGE)
    assert 0.741 / HHV_VOLTAGE == pytest.approx(0.50, abs=2e-3)


def test_pemfc_efficiency_within_window():
    lo, hi = FC.j_range
    for j in np.linspace(lo, hi, 30):
        eta = pemfc_discharge_efficiency(j * FC.area, FC)
        assert 0.62 <= eta <= 0.78
