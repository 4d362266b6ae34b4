import numpy as np
import pytest

from dislo.analysis import (
    BoundReport,
    Certificate,
    ToleranceModel,
    bound_constants,
    bound_report,
    check_comparison,
    check_link,
    check_lower_bound,
    check_time_bound,
    check_upper_bound,
    epsilon_continuation,
    link_gaps,
    slice_rates,
    step_size,
)
from dislo.core import DIRICHLET, LINE, ScalarField, build_grid, diff_array
from dislo.heat import ChannelHeat, Gaussian, LineHeat, SineModes, Zero
from dislo.hj import SchemeConfig, solve_hj
from dislo.regularize import RegularizedFlux, barrier_kappa
from dislo.scl import solve_scl

EPS = 0.1
TIMES = np.linspace(0.0, 0.25, 6)


def zero_run(slope=0.5):
    g = build_grid(-4.0, 4.0, 65)
    fl = RegularizedFlux(EPS, LineHeat(Zero(), g))
    k0 = ScalarField(g, slope * g.x)
    return fl, k0, solve_hj(k0, fl, TIMES)


def test_bound_constants_oracles():
    g = build_grid(-4.0, 4.0, 65)
    c1, c2 = bound_constants(LineHeat(Zero(), g).state(0.0), ScalarField(g, 2.0 * g.x))
    assert c1 == 0.0 and c2 == pytest.approx(9.0, rel=1e-14)
    I = build_grid(0.0, 1.0, 65, DIRICHLET)
    st = ChannelHeat(SineModes(((1, 1.0),)), I).state(0.0)
    c1, c2 = bound_constants(st, ScalarField(I, np.zeros(65)))
    assert c1 == pytest.approx(2 * np.pi**4, rel=1e-10) and c2 == 1.0
    with pytest.raises(ValueError):
        bound_constants(st, ScalarField(g, g.x))


def test_bounds_on_frozen_run():
    fl, k0, tr = zero_run()
    tol = 1e-12
    low = check_lower_bound(tr, fl, EPS, tol)
    assert low.passed and low.value == pytest.approx(0.5 - EPS)
    assert check_lower_bound(tr, fl, 0.0, tol).value == pytest.approx(0.5)
    tb = check_time_bound(tr, fl.heat.state(0.0), tol)
    assert tb.value == 0.0 and tb.passed and tb.detail["ratio"] == 0.0
    assert np.array_equal(slice_rates(tr), np.zeros((5, 65)))
    up = check_upper_bound(tr, 0.0, 1.5**2, tol)
    assert up.passed and up.value == pytest.approx(-1.0)


def test_time_bound_accepts_field_and_needs_slices():
    fl, k0, tr = zero_run()
    st = fl.heat.state(0.0)
    assert check_time_bound(tr, st.rho_xx, 0.0).value == check_time_bound(tr, st, 0.0).value
    short = solve_hj(k0, fl, [0.0])
    with pytest.raises(ValueError):
        check_time_bound(short, st, 0.0)


def test_broken_data_fail_lower_bound():
    g = build_grid(-8.0, 8.0, 129)
    fl = RegularizedFlux(EPS, LineHeat(Gaussian(), g))
    k0 = ScalarField(g, 0.5 * EPS * g.x)
    tr = solve_hj(k0, fl, TIMES, SchemeConfig(floor="global"), check_initial=False)
    tol = ToleranceModel.default(fl)(g.h, step_size(tr))
    low = check_lower_bound(tr, fl, EPS, tol)
    assert not low.passed and low.value < -tol
    assert "FAIL lower bound" in low.line()


def test_link_and_comparison():
    fl, k0, tr = zero_run()
    th = solve_scl(tr[0].kappa_x, fl, TIMES)
    gaps = link_gaps(tr, th)
    assert gaps[0] == 0.0 and np.all(gaps == 0.0)
    assert check_link(tr, th, 1e-12).passed
    delta = 1e-3
    up = solve_hj(ScalarField(k0.grid, k0.values + delta), fl, TIMES)
    c = check_comparison(tr, up)
    assert c.passed and c.value == 0.0
    # the raw signed gap is exactly -delta on shifted data
    assert max(float(np.max(a.kappa.values - b.kappa.values)) for a, b in zip(tr, up)) == pytest.approx(-delta)
    with pytest.raises(ValueError):
        check_comparison(up, tr)
    with pytest.raises(ValueError):
        check_comparison(tr, solve_hj(k0, fl, TIMES[:3]))


def test_bound_report_gaussian(gauss_flux):
    g = gauss_flux.grid
    k0 = barrier_kappa(g, lambda y: Gaussian().derivative(y, 1), EPS)
    ts = np.linspace(0.0, 0.5, 11)
    cfg = SchemeConfig(floor="barrier")
    kap = solve_hj(k0, gauss_flux, ts, cfg)
    th = solve_scl(kap[0].kappa_x, gauss_flux, ts, cfg)
    rep, certs = bound_report(kap, gauss_flux, gauss_flux.heat.state(0.0), k0, th)
    assert isinstance(rep, BoundReport) and rep.passed
    assert [c.name for c in certs] == ["lower bound", "time gradient", "upper bound", "viscosity-entropy link"]
    assert rep.tolerances["C"] == ToleranceModel.default(gauss_flux).C
    assert set(rep.to_dict()) >= {"c1", "c2", "passes"}


def test_report_rejects_bad_constants():
    with pytest.raises(ValueError):
        BoundReport(-1.0, 1.0, 0, 0, 0, 0, {}, {})
    with pytest.raises(ValueError):
        BoundReport(0.0, 0.5, 0, 0, 0, 0, {}, {})


def test_certificate_coerces():
    c = Certificate("x", np.float64(1.5), np.float32(0.25), np.bool_(True))
    assert type(c.value) is float and type(c.tol) is float and c.passed is True
    assert c.line() == "PASS x: value 1.5, tol 0.25"


def test_tolerance_model(gauss_flux):
    tm = ToleranceModel(3.0)
    assert tm(0.1, 0.02) == pytest.approx(0.36)
    sup_g = float(np.max(np.abs(gauss_flux.g(0.0))))
    assert ToleranceModel.default(gauss_flux).C == 10.0 * max(1.0, sup_g)


def test_continuation_single_and_invalid():
    g = build_grid(-8.0, 8.0, 129)
    heat = LineHeat(Gaussian(), g)
    k0 = barrier_kappa(g, lambda y: Gaussian().derivative(y, 1), 0.0)
    rows = epsilon_continuation(k0, heat, [0.2], TIMES)
    assert len(rows) == 1 and rows[0].sup_diff is None and rows[0].epsilon == 0.2
    assert rows[0].lower_margin >= -rows[0].tol
    for bad in ([], [0.2, 0.3], [1.2], [0.2, 0.2]):
        with pytest.raises(ValueError):
            epsilon_continuation(k0, heat, bad, TIMES)
    with pytest.raises(ValueError):
        epsilon_continuation(ScalarField(g, np.zeros(g.n)), heat, [0.2], TIMES)


def test_continuation_rows_ordered(monkeypatch):
    g = build_grid(-8.0, 8.0, 129)
    heat = LineHeat(Gaussian(), g)
    k0 = barrier_kappa(g, lambda y: Gaussian().derivative(y, 1), 0.0)
    serial = epsilon_continuation(k0, heat, [0.4, 0.2, 0.1], TIMES)
    monkeypatch.setenv("DISLO_THREADS", "3")
    threaded = epsilon_continuation(k0, heat, [0.4, 0.2, 0.1], TIMES)
    assert serial == threaded
    assert serial[1].sup_diff > serial[2].sup_diff
