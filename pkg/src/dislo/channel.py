"""Bounded channel I = (0, 1) with impenetrable walls.

The channel data are extended to the whole line (odd reflection of ``rho``
about the walls, linear wings for ``kappa``), solved on a window
``[-W, 2 + W]`` and restricted back to I.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import DIRICHLET, LINE, Grid1D, ScalarField, build_grid, diff_array
from .heat import ChannelHeat, HeatState
from .hj import KappaState, SchemeConfig, Trajectory, solve_hj
from .regularize import (
    ExtendedChannelHeat,
    RegularizedFlux,
    extend_kappa0_channel,
    reflect_eval,
    validate_initial,
)
from .scl import ThetaState, solve_scl

CERTIFIED = "certified-eps"
CONTINUATION = "continuation-to-0"


@dataclass(frozen=True)
class ChannelScenario:
    """Channel problem data. ``kappa0`` is a field on the I grid."""

    rho0: object
    kappa0: ScalarField
    epsilon: float
    T: float
    output_times: tuple
    mode: str = CERTIFIED
    window: float = 1.0
    cfg: SchemeConfig = field(default_factory=SchemeConfig)

    def __post_init__(self):
        g = self.kappa0.grid
        if g.topology != DIRICHLET or g.x_min != 0.0 or g.x_max != 1.0:
            raise ValueError("channel data must live on an interval-dirichlet grid over (0, 1)")
        if self.mode not in (CERTIFIED, CONTINUATION):
            raise ValueError(f"unknown channel mode {self.mode!r}")
        if not 0 < self.epsilon < 1:
            raise ValueError("epsilon must lie in (0, 1)")
        walls = self.rho0.derivative(np.array([0.0, 1.0]), 0)
        if np.max(np.abs(walls)) > 1e-12:
            raise ValueError("rho0 must vanish at both walls")
        w = self.window / g.h
        if self.window < 0 or abs(w - round(w)) > 1e-9:
            raise ValueError("window width must be a nonnegative multiple of the spacing")

    @property
    def grid(self) -> Grid1D:
        return self.kappa0.grid

    def window_grid(self) -> Grid1D:
        g = self.grid
        n = int(round((2.0 + 2.0 * self.window) / g.h)) + 1
        return build_grid(-self.window, 2.0 + self.window, n, LINE)

    def restriction(self) -> np.ndarray:
        """Window node indices of the I nodes."""
        off = int(round(self.window / self.grid.h))
        return off + np.arange(self.grid.n)


@dataclass(frozen=True)
class DensityPair:
    theta_plus: ScalarField
    theta_minus: ScalarField


def recover_densities(kappa_x: ScalarField, rho_x: ScalarField) -> DensityPair:
    """``theta+- = (kappa_x +- rho_x) / 2``."""
    if kappa_x.grid != rho_x.grid:
        raise ValueError("fields live on different grids")
    k, r = kappa_x.values, rho_x.values
    return DensityPair(ScalarField(kappa_x.grid, 0.5 * (k + r)), ScalarField(kappa_x.grid, 0.5 * (k - r)))


@dataclass
class ChannelRun:
    scenario: ChannelScenario
    heat: ChannelHeat
    window_heat: ExtendedChannelHeat
    flux: RegularizedFlux
    kappa0_window: ScalarField
    kappa_window: Trajectory
    theta_window: Trajectory | None

    @property
    def kappa(self) -> Trajectory:
        """The window trajectory restricted to I."""
        return restrict(self.kappa_window, self.scenario)


def restrict(traj: Trajectory, sc: ChannelScenario) -> Trajectory:
    idx = sc.restriction()
    g = sc.grid
    out = Trajectory([], traj.steps, traj.dt_min, traj.dt_max)
    for s in traj:
        if isinstance(s, KappaState):
            v = s.kappa.values[idx]
            out.states.append(
                KappaState(
                    s.t,
                    ScalarField(g, v),
                    ScalarField(g, s.kappa_x.values[idx]),
                    ScalarField(g, s.kappa_t.values[idx]),
                    (float(sc.kappa0.values[0]), float(sc.kappa0.values[-1])),
                )
            )
        else:
            out.states.append(ThetaState(s.t, ScalarField(g, s.theta.values[idx])))
    return out


def prepare_channel(sc: ChannelScenario, epsilon: float | None = None, lifted: bool = False):
    """Heat solvers, flux and extended initial data on the window."""
    eps = sc.epsilon if epsilon is None else epsilon
    heat = ChannelHeat(sc.rho0, sc.grid)
    wgrid = sc.window_grid()
    wheat = ExtendedChannelHeat(heat, wgrid)
    flux = RegularizedFlux(eps, wheat)
    k0 = extend_kappa0_channel(sc.kappa0, heat.state(0.0), eps, lifted, wgrid)
    return heat, wheat, flux, k0


def solve_channel(sc: ChannelScenario, with_theta: bool = True) -> ChannelRun:
    """Certified run: unlifted extension, HJ (and SCL) solve on the window."""
    rep = validate_initial(sc.kappa0, ChannelHeat(sc.rho0, sc.grid).state(0.0), sc.epsilon)
    if not rep.passed:
        raise ValueError("channel data fail validation: " + rep.message())
    heat, wheat, flux, k0 = prepare_channel(sc)
    kap = solve_hj(k0, flux, sc.output_times, sc.cfg)
    th = solve_scl(kap[0].kappa_x, flux, sc.output_times, sc.cfg) if with_theta else None
    return ChannelRun(sc, heat, wheat, flux, k0, kap, th)


# --------------------------------------------------------------------------
# certificates
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class WallReport:
    drift: float
    tol: float
    passed: bool
    per_wall: tuple
    cone_excess: float
    cone_constant: float


def check_boundary_constancy(run: ChannelRun, tol: float, band: float = 0.1) -> WallReport:
    """Wall drift ``|kappa(wall, t) - kappa0(wall)|`` and the near-wall cone.

    The cone test checks ``|kappa(x, t) - kappa0(x)| <= (C d + tol) t`` for
    points at distance ``d < band`` from a wall, with ``C = sup |g_x| sup f``
    measured on the run.
    """
    sc = run.scenario
    traj = run.kappa_window
    wg = traj.grid
    idx = sc.restriction()
    walls = (idx[0], idx[-1])
    k0 = run.kappa0_window.values
    drift = [0.0, 0.0]
    x = wg.x
    dist = np.minimum(np.abs(x), np.abs(x - 1.0))
    near = dist < band
    gx_max = 0.0
    f_max = 0.0
    for s in traj:
        gx_max = max(gx_max, float(np.max(np.abs(run.flux.g_x(s.t)))))
        f_max = max(f_max, float(np.max(run.flux.f(s.kappa_x.values[near]))))
    C = gx_max * f_max
    cone = -np.inf
    for s in traj:
        v = s.kappa.values
        for j, w in enumerate(walls):
            drift[j] = max(drift[j], abs(float(v[w] - k0[w])))
        if s.t > 0:
            dev = np.abs(v - k0)[near]
            cone = max(cone, float(np.max(dev - (C * dist[near] + tol) * s.t)))
    worst = max(drift)
    return WallReport(worst, tol, worst <= tol, tuple(drift), float(max(cone, 0.0) if np.isfinite(cone) else 0.0), C)


def check_wall_flux(states, tol: float = 1e-10) -> tuple:
    """``max |rho_xx|`` at the walls over the given interval heat states."""
    worst = 0.0
    for s in states:
        if s.grid.topology != DIRICHLET:
            raise ValueError("wall flux check needs interval-dirichlet heat states")
        v = s.rho_xx.values
        worst = max(worst, abs(float(v[0])), abs(float(v[-1])))
    return worst, worst <= tol


def check_seams(run: ChannelRun, t: float) -> float:
    """Largest jump of ``rho``, ``rho_x`` across the seams ``x = 0, 1, 2``.

    Both branches of the reflection are evaluated at the seam itself: the
    direct branch gives ``(rho, rho_x)(y)`` and the reflected one gives
    ``(-rho, rho_x)(y)`` for ``y`` in {0, 1}.
    """
    vals = run.heat.evaluate_at(np.array([0.0, 1.0]), t, (0, 1))
    rho_jump = float(np.max(np.abs(vals[0] - (-vals[0]))))
    # the x-derivative branches coincide by construction; compare them anyway
    direct = reflect_eval(run.heat, np.array([0.0, 1.0]), t, (1,))[1]
    mirrored = reflect_eval(run.heat, np.array([2.0, 1.0]), t, (1,))[1]
    return max(rho_jump, float(np.max(np.abs(direct - mirrored))))


def density_trajectory(run: ChannelRun) -> list:
    """``(t, DensityPair)`` on I at each stored time."""
    sc = run.scenario
    out = []
    for s in run.kappa:
        rx = run.heat.evaluate(s.t, (1,))[1]
        out.append((s.t, recover_densities(s.kappa_x, ScalarField(sc.grid, rx))))
    return out


def system_residual(run: ChannelRun, floor: float | None = None) -> list:
    """Residuals of the two density equations between consecutive slices.

    Differences are centred in space (on the window, so the wall nodes have
    neighbours) and in time. Returns ``(t_half, r_plus, r_minus)`` on the I
    nodes.
    """
    sc = run.scenario
    traj = run.kappa_window
    wg = traj.grid
    idx = sc.restriction()
    eps = run.flux.epsilon
    floor = 0.5 * eps if floor is None else floor

    def spatial(s):
        kx = s.kappa_x.values
        rx = run.flux.fields(s.t, (1,))[1]
        tp, tm = 0.5 * (kx + rx), 0.5 * (kx - rx)
        tot = tp + tm
        if np.min(tot[idx]) < floor:
            raise FloatingPointError(f"total density {np.min(tot[idx]):.3g} below {floor:g}")
        phi = diff_array(tp - tm, wg, 1) / tot
        return tp, tm, diff_array(tp * phi, wg, 1), diff_array(tm * phi, wg, 1)

    parts = [spatial(s) for s in traj]
    out = []
    for (a, b), (sa, sb) in zip(zip(traj.states[:-1], traj.states[1:]), zip(parts[:-1], parts[1:])):
        dt = b.t - a.t
        rp = (sb[0] - sa[0]) / dt - 0.5 * (sa[2] + sb[2])
        rm = (sb[1] - sa[1]) / dt + 0.5 * (sa[3] + sb[3])
        out.append((0.5 * (a.t + b.t), rp[idx], rm[idx]))
    return out
