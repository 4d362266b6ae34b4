import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dislo.analysis import bound_constants
from dislo.core import DIRICHLET, LINE, PERIODIC, ScalarField, build_grid, diff_array
from dislo.heat import ChannelHeat, Gaussian, LineHeat, SineModes, Zero
from dislo.hj import CFLViolation, SchemeConfig
from dislo.regularize import ExtendedChannelHeat, RegularizedFlux, eval_f
from dislo.scl import (
    BarrierField,
    CeilingField,
    EntropyAudit,
    TestBump,
    ThetaState,
    classical_residual,
    entropy_levels,
    entropy_residual,
    scl_dt,
    solve_scl,
    step_scl,
)

EPS = 0.1
SLOPE = np.sqrt(2.0) * np.exp(-0.5) + EPS


def periodic_flux(n, eps=EPS):
    return RegularizedFlux(eps, LineHeat(Gaussian(), build_grid(-8.0, 8.0, n, PERIODIC)))


def pstate(grid, vals):
    return ThetaState(0.0, ScalarField(grid, np.append(vals, vals[0])))


@pytest.mark.parametrize("topology", [PERIODIC, LINE])
def test_constant_state_stationary(topology):
    fl = RegularizedFlux(EPS, LineHeat(Gaussian(), build_grid(-8.0, 8.0, 33, topology)))
    s = ThetaState(0.0, ScalarField(fl.grid, np.full(33, 0.7)))
    out = step_scl(s, fl, SchemeConfig(), g=np.full(32, -0.4))
    assert np.array_equal(out.theta.values, s.theta.values)


def test_periodic_conservation_per_step(rng):
    fl = periodic_flux(65)
    s = pstate(fl.grid, rng.uniform(0.05, 2.0, size=64))
    h = fl.grid.h
    g = rng.uniform(-1, 1, size=64)
    m0 = h * s.theta.values[:-1].sum()
    for _ in range(20):
        s = step_scl(s, fl, SchemeConfig(), g=g)
    assert h * s.theta.values[:-1].sum() == pytest.approx(m0, abs=1e-12 * 20)


def godunov_flux(F, a, b, samples=20001):
    u = np.linspace(min(a, b), max(a, b), samples)
    return F(u).min() if a <= b else F(u).max()


def test_riemann_against_godunov():
    eps = 0.5
    grid = build_grid(0.0, 1.0, 64)
    fl = RegularizedFlux(eps, LineHeat(Zero(), grid))
    th = np.where(grid.x < 0.5, 1.0, 2.0)
    s = ThetaState(0.0, ScalarField(grid, th))
    g = np.full(63, -1.0)
    cfg = SchemeConfig()
    lam = np.abs(g) * cfg.lipschitz(fl)
    dt = scl_dt(lam, grid, cfg)
    out = step_scl(s, fl, cfg, dt=dt, g=g).theta.values
    F = lambda u: -eval_f(eps, u)
    q = np.array([godunov_flux(F, th[i], th[i + 1]) for i in range(63)])
    q = np.concatenate([[F(th[0])], q, [F(th[-1])]])
    god = th - dt / grid.h * (q[1:] - q[:-1])
    bound = lam.max() * abs(2.0 - 1.0) * dt / grid.h
    assert np.max(np.abs(out - god)) <= bound


def test_cfl_guard_and_floor():
    fl = periodic_flux(9)
    s = pstate(fl.grid, np.full(8, 1.0))
    g = np.full(8, 0.5)
    with pytest.raises(CFLViolation):
        step_scl(s, fl, SchemeConfig(), dt=1.0, g=g)
    grid = build_grid(-8.0, 8.0, 65)
    fl2 = RegularizedFlux(EPS, LineHeat(Gaussian(), grid))
    low = ThetaState(0.0, ScalarField(grid, np.full(65, 0.01)))
    with pytest.raises(CFLViolation):
        step_scl(low, fl2, SchemeConfig(floor="barrier"))


def test_zero_density_freezes_theta():
    g = build_grid(-4.0, 4.0, 65)
    fl = RegularizedFlux(EPS, LineHeat(Zero(), g))
    th0 = ScalarField(g, 0.2 + 0.1 * np.sin(g.x))
    for s in solve_scl(th0, fl, [0.0, 0.2, 0.4]):
        assert np.array_equal(s.theta.values, th0.values)


def test_solve_rejects_below_barrier():
    g = build_grid(-8.0, 8.0, 65)
    fl = RegularizedFlux(EPS, LineHeat(Gaussian(), g))
    with pytest.raises(ValueError):
        solve_scl(ScalarField(g, np.full(65, 0.05)), fl, [0.0, 0.1])


def certified_theta(n, T=0.5, outputs=11):
    g = build_grid(-8.0, 8.0, n)
    fl = RegularizedFlux(EPS, LineHeat(Gaussian(), g))
    th0 = ScalarField(g, diff_array(SLOPE * g.x, g, 1))
    return fl, solve_scl(th0, fl, np.linspace(0, T, outputs), SchemeConfig(floor="barrier"))


def test_certified_theta_stays_above_eps():
    fl, tr = certified_theta(257)
    tol = 10 * (fl.grid.h + tr.dt_max)
    assert min(s.theta.values.min() for s in tr) >= EPS - tol


def test_channel_extension_conservation():
    I = build_grid(0.0, 1.0, 65, DIRICHLET)
    ch = ChannelHeat(SineModes(((1, 0.1),)), I)
    grid = build_grid(0.0, 2.0, 129, PERIODIC)
    fl = RegularizedFlux(EPS, ExtendedChannelHeat(ch, grid))
    th0 = ScalarField(grid, np.full(129, 1.0))
    tr = solve_scl(th0, fl, [0.0, 0.1, 0.25, 0.5])
    h = grid.h
    m = [h * s.theta.values[:-1].sum() for s in tr]
    assert np.max(np.abs(np.array(m) - m[0])) <= 1e-10


def test_monotone_single_node(rng):
    fl = periodic_flux(9)
    cfg = SchemeConfig()
    for _ in range(100):
        vals = rng.uniform(-1.0, 3.0, size=8)
        g = rng.uniform(-1.0, 1.0, size=8)
        base = step_scl(pstate(fl.grid, vals), fl, cfg, g=g).theta.values
        for j in range(8):
            v = vals.copy()
            v[j] += 1e-3
            out = step_scl(pstate(fl.grid, v), fl, cfg, g=g).theta.values
            assert np.all(out >= base)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_ordered_pairs_stay_ordered(seed):
    r = np.random.default_rng(seed)
    fl = periodic_flux(65)
    cfg = SchemeConfig()
    x = fl.grid.x[:-1]
    g = 0.8 * np.sin(2 * np.pi * (x + r.uniform()) / 16.0) * r.uniform(0.2, 1.0)
    u = r.uniform(0.0, 2.0, size=64)
    v = u + r.uniform(0.0, 0.5, size=64)
    su, sv = pstate(fl.grid, u), pstate(fl.grid, v)
    for _ in range(50):
        su, sv = step_scl(su, fl, cfg, g=g), step_scl(sv, fl, cfg, g=g)
        assert np.all(su.theta.values <= sv.theta.values)


# -- entropy audit ---------------------------------------------------------


@pytest.fixture(scope="module")
def audited():
    fl, tr = certified_theta(257, outputs=17)
    return fl, tr, EntropyAudit(tr, fl)


BUMPS = [TestBump(0.0, 1.5, 0.25, 0.2), TestBump(0.7, 0.5, 0.2, 0.15), TestBump(0.0, 3.0, 0.25, 0.24)]


def test_levels_beyond_range_are_exactly_zero(audited):
    fl, tr, audit = audited
    hi = max(s.theta.values.max() for s in tr)
    lo = min(s.theta.values.min() for s in tr)
    for phi in BUMPS:
        assert audit.residual(hi, phi, "sub") == 0.0
        assert audit.residual(hi + 0.5, phi, "sub") == 0.0
        assert audit.residual(lo, phi, "super") == 0.0
        assert audit.residual(lo - 0.5, phi, "super") == 0.0


def test_weak_form_below_range(audited):
    fl, tr, audit = audited
    lo = min(s.theta.values.min() for s in tr)
    tol = 10 * (fl.grid.h + tr.dt_max)
    for phi in BUMPS:
        assert abs(audit.residual(lo - 0.3, phi, "sub")) <= tol


def test_midrange_deficit_small(audited):
    fl, tr, audit = audited
    tol = 10 * (fl.grid.h + tr.dt_max)
    for k in entropy_levels(tr):
        for phi in BUMPS:
            for side in ("sub", "super"):
                assert audit.residual(float(k), phi, side) >= -tol


def test_entropy_levels_layout(audited):
    _, tr, _ = audited
    ks = entropy_levels(tr)
    assert ks.size == 19
    lo = min(s.theta.values.min() for s in tr)
    assert ks[0] == pytest.approx(lo - 0.1) and ks[-2] == lo


def test_entropy_rejects(audited):
    fl, tr, audit = audited
    with pytest.raises(ValueError):
        audit.residual(1.0, TestBump(7.5, 1.0, 0.25, 0.2))
    with pytest.raises(ValueError):
        audit.residual(1.0, TestBump(0.0, 1.0, 0.4, 0.2))
    with pytest.raises(ValueError):
        audit.residual(1.0, BUMPS[0], "middle")
    with pytest.raises(ValueError):
        TestBump(0.0, 0.0, 0.2, 0.1)
    assert entropy_residual(tr, fl, 1.0, BUMPS[0]) == audit.residual(1.0, BUMPS[0])


def test_bump_parts():
    phi = TestBump(0.0, 1.0, 0.5, 0.25)
    x = np.linspace(-1.5, 1.5, 7)
    p, pt, px = phi.parts(x, 0.5)
    assert p[3] == 1.0 and pt[3] == 0.0 and px[3] == 0.0
    assert p[0] == 0.0 and p[-1] == 0.0
    d = 1e-6
    num = (phi.parts(x, 0.6 + d)[0] - phi.parts(x, 0.6 - d)[0]) / (2 * d)
    assert np.allclose(num, phi.parts(x, 0.6)[1], atol=1e-6)


# -- classical sub/super-solutions -----------------------------------------


def barrier_error(n, t=0.2):
    g = build_grid(-8.0, 8.0, n)
    fl = RegularizedFlux(EPS, LineHeat(Gaussian(), g))
    u = BarrierField(fl)
    (_, r), = classical_residual(u, fl, [t])
    return float(np.max(np.abs(r.values - u.expected(t))[1:-1]))


def test_barrier_residual_closed_form():
    # the constant is large (G'' ~ 1/eps), so start past the pre-asymptotic range
    errs = [barrier_error(n) for n in (513, 1025, 2049)]
    assert 3.7 <= errs[0] / errs[1] <= 4.3 and 3.7 <= errs[1] / errs[2] <= 4.3


def test_barrier_residual_signs(gauss_flux):
    u = BarrierField(gauss_flux)
    for t, r in classical_residual(u, gauss_flux, [0.05, 0.3], mode="analytic"):
        assert np.allclose(r.values, u.expected(t), atol=1e-12)
        assert np.all(u.expected(t) <= 0)


def test_residual_at_inflection_nodes():
    # rho_xx of the unit Gaussian vanishes at x = +-1/sqrt(2) at t = 0
    g = build_grid(-8.0, 8.0, 257)
    fl = RegularizedFlux(EPS, LineHeat(Gaussian(), g))
    x = np.array([-1.0, 1.0]) / np.sqrt(2.0)
    u = BarrierField(fl)
    val, ut, ux = u.parts(0.0)
    (_, r), = classical_residual(u, fl, [0.0], mode="analytic")
    i = np.argmin(np.abs(g.x[:, None] - x), axis=0)
    d2 = fl.fields(0.0, (2,))[2][i]
    assert np.all(np.abs(r.values[i]) <= 10 * np.abs(d2) + 1e-10)


def test_ceiling_residual(gauss_flux):
    k0 = ScalarField(gauss_flux.grid, SLOPE * gauss_flux.grid.x)
    c1, c2 = bound_constants(gauss_flux.heat.state(0.0), k0)
    u = CeilingField(gauss_flux, c1, c2)
    for t, r in classical_residual(u, gauss_flux, [0.0, 0.1, 0.4]):
        exp = u.expected(t)
        assert np.all(exp >= -1e-12)
        assert np.max(np.abs(r.values - exp)[1:-1]) <= 10 * gauss_flux.grid.h ** 2 * max(1.0, c1)
    with pytest.raises(ValueError):
        classical_residual(u, gauss_flux, [0.1], mode="other")


def test_barrier_ordering():
    g = build_grid(-8.0, 8.0, 257)
    fl = RegularizedFlux(EPS, LineHeat(Gaussian(), g))
    cfg = SchemeConfig(floor="barrier")
    ts = np.linspace(0, 0.5, 11)
    sub = solve_scl(ScalarField(g, fl.lower_barrier(0.0)), fl, ts, cfg)
    tol = 10 * (g.h + sub.dt_max)
    for s in sub:
        assert np.min(s.theta.values - fl.lower_barrier(s.t)) >= -tol
    k0 = ScalarField(g, SLOPE * g.x)
    c1, c2 = bound_constants(fl.heat.state(0.0), k0)
    sup = solve_scl(ScalarField(g, np.full(g.n, np.sqrt(c2))), fl, ts, cfg)
    for s in sup:
        assert np.max(s.theta.values) <= np.sqrt(2 * c1 * s.t + c2) + tol
