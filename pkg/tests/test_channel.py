import numpy as np
import pytest

from dislo.analysis import ToleranceModel, check_lower_bound
from dislo.channel import (
    CONTINUATION,
    ChannelScenario,
    check_boundary_constancy,
    check_seams,
    check_wall_flux,
    density_trajectory,
    recover_densities,
    restrict,
    solve_channel,
    system_residual,
)
from dislo.core import DIRICHLET, LINE, ScalarField, build_grid
from dislo.heat import ChannelHeat, SineModes, Zero
from dislo.hj import SchemeConfig

EPS = 0.1
SINE = SineModes(((1, 0.1),))


def scenario(rho0=SINE, n=65, T=0.25, outputs=11, slope=None, **kw):
    I = build_grid(0.0, 1.0, n, DIRICHLET)
    s = 0.1 * np.pi + EPS if slope is None else slope
    return ChannelScenario(rho0, ScalarField(I, s * I.x), EPS, T, tuple(np.linspace(0, T, outputs)), **kw)


@pytest.fixture(scope="module")
def sine_run():
    return solve_channel(scenario(cfg=SchemeConfig(floor="barrier")))


def tol_of(run):
    return ToleranceModel.default(run.flux)(run.scenario.grid.h, run.kappa_window.dt_max)


def test_zero_density_freezes_kappa():
    run = solve_channel(scenario(Zero(), T=0.1, outputs=3, slope=0.5))
    for s in run.kappa:
        assert np.array_equal(s.kappa.values, run.scenario.kappa0.values)
    for s in run.theta_window:
        assert np.array_equal(s.theta.values, run.theta_window[0].theta.values)


def test_lower_bound_on_channel(sine_run):
    tr = sine_run.kappa
    flux_I = type(sine_run.flux)(EPS, sine_run.heat)
    low = check_lower_bound(tr, flux_I, EPS, tol_of(sine_run))
    assert low.passed


def test_wall_drift(sine_run):
    tol = tol_of(sine_run)
    rep = check_boundary_constancy(sine_run, tol * sine_run.scenario.T)
    assert rep.passed and rep.drift <= tol * sine_run.scenario.T
    assert rep.cone_excess <= tol


def test_wall_flux_two_modes():
    I = build_grid(0.0, 1.0, 65, DIRICHLET)
    heat = ChannelHeat(SineModes(((1, 1.0), (2, 0.3))), I)
    worst, ok = check_wall_flux([heat.state(t) for t in (0.0, 0.05, 0.3)])
    assert ok and worst <= 1e-10
    with pytest.raises(ValueError):
        check_wall_flux([type(heat.state(0.0))(0.0, *[ScalarField(build_grid(0, 1, 5), np.zeros(5))] * 4)])


def test_seams(sine_run):
    for t in (0.0, 0.1, 0.25):
        assert check_seams(sine_run, t) <= 1e-12


def test_recover_densities():
    g = build_grid(0.0, 1.0, 3, DIRICHLET)
    p = recover_densities(ScalarField(g, np.array([2.0, 3.0, 2.0])), ScalarField(g, np.array([0.0, 1.0, 2.0])))
    assert np.array_equal(p.theta_plus.values, [1.0, 2.0, 2.0])
    assert np.array_equal(p.theta_minus.values, [1.0, 1.0, 0.0])
    with pytest.raises(ValueError):
        recover_densities(ScalarField(g, np.zeros(3)), ScalarField(build_grid(0.0, 1.0, 3), np.zeros(3)))


def test_densities_nonnegative(sine_run):
    tol = tol_of(sine_run)
    for _, pair in density_trajectory(sine_run):
        assert pair.theta_plus.values.min() >= -tol and pair.theta_minus.values.min() >= -tol


def test_system_residual_zero_density():
    run = solve_channel(scenario(Zero(), T=0.1, outputs=3, slope=0.5))
    for _, rp, rm in system_residual(run):
        assert np.array_equal(rp, np.zeros_like(rp)) and np.array_equal(rm, np.zeros_like(rm))


def residual_size(n, T=0.1):
    outputs = 10 * (n - 1) // 32 + 1
    run = solve_channel(scenario(n=n, T=T, outputs=outputs, cfg=SchemeConfig(floor="barrier")))
    return max(max(np.abs(rp).max(), np.abs(rm).max()) for _, rp, rm in system_residual(run))


def test_system_residual_shrinks():
    r = [residual_size(n) for n in (33, 65, 129)]
    assert r[0] / r[1] >= 1.5 and r[1] / r[2] >= 1.5


def test_denominator_guard(sine_run):
    with pytest.raises(FloatingPointError):
        system_residual(sine_run, floor=10.0)


def test_restrict_shapes(sine_run):
    tr = restrict(sine_run.theta_window, sine_run.scenario)
    assert tr.grid == sine_run.scenario.grid and len(tr) == len(sine_run.kappa_window)
    k = sine_run.kappa[0]
    assert np.array_equal(k.kappa.values, sine_run.scenario.kappa0.values)


def test_scenario_validation():
    I = build_grid(0.0, 1.0, 65, DIRICHLET)
    k0 = ScalarField(I, I.x)
    ts = (0.0, 0.1)
    with pytest.raises(ValueError):
        ChannelScenario(SINE, ScalarField(build_grid(0.0, 1.0, 65), I.x), EPS, 0.1, ts)
    with pytest.raises(ValueError):
        ChannelScenario(SINE, k0, EPS, 0.1, ts, mode="other")
    with pytest.raises(ValueError):
        ChannelScenario(SINE, k0, 1.5, 0.1, ts)
    with pytest.raises(ValueError):
        ChannelScenario(_Offset(), k0, EPS, 0.1, ts)
    with pytest.raises(ValueError):
        ChannelScenario(SINE, k0, EPS, 0.1, ts, window=0.01 / 3)
    assert ChannelScenario(SINE, k0, EPS, 0.1, ts, mode=CONTINUATION).window_grid().n == 257


def test_solve_rejects_weak_data():
    with pytest.raises(ValueError):
        solve_channel(scenario(slope=0.5 * EPS))


class _Offset:
    def derivative(self, x, order):
        return np.full(np.shape(x), 1.0 if order == 0 else 0.0)
