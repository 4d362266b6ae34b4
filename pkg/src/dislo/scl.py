"""Entropy solutions of ``theta_t + (g f_eps(theta))_x = 0``.

The solver is conservative with a Rusanov interface flux and ``g`` sampled
at the interfaces. The module also holds the entropy-inequality audit and the
pointwise residual of classical sub/super-solutions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import PERIODIC, Grid1D, ScalarField, diff_array, trapezoid
from .hj import CFLViolation, SchemeConfig, SchemeError, Trajectory, march
from .regularize import RegularizedFlux


@dataclass(frozen=True)
class ThetaState:
    t: float
    theta: ScalarField

    @property
    def grid(self) -> Grid1D:
        return self.theta.grid


# --------------------------------------------------------------------------
# stepping
# --------------------------------------------------------------------------


def _interfaces(flux: RegularizedFlux, t: float, cfg: SchemeConfig, g=None):
    """``g``, dissipation ``lambda`` and slope floor at the ``n - 1`` midpoints."""
    if g is not None:
        g = np.asarray(g, dtype=float)
        return g, np.abs(g) * cfg.lipschitz(flux), None
    d = flux.fields(t, (1, 2), 0.5)
    g = -d[1] * d[2]
    lam = np.abs(g) * cfg.lipschitz(flux, d[1])
    return g, lam, cfg.slope_floor(flux, d[1])


def _extend(arr: np.ndarray, periodic: bool) -> np.ndarray:
    """Interface values ``i - 1/2`` for ``i = 0..n-1`` (one ghost on the left)."""
    if periodic:
        return np.concatenate([[arr[-1]], arr])
    # outer ghost interfaces reuse the nearest interior coefficient
    return np.concatenate([[arr[0]], arr, [arr[-1]]])


def scl_fluxes(v: np.ndarray, grid: Grid1D, g: np.ndarray, lam: np.ndarray, f) -> np.ndarray:
    """Rusanov fluxes ``Q_{i-1/2}``, ``i = 0..n`` (``n + 1`` entries)."""
    if grid.topology == PERIODIC:
        u = v[:-1]
        left, right = u, np.roll(u, -1)
        q = 0.5 * g * (f(left) + f(right)) - 0.5 * lam * (right - left)
        return np.concatenate([[q[-1]], q])
    # zero-gradient ghosts: the boundary flux is the physical one
    fv = f(v)
    inner = 0.5 * g * (fv[:-1] + fv[1:]) - 0.5 * lam * (v[1:] - v[:-1])
    return np.concatenate([[g[0] * fv[0]], inner, [g[-1] * fv[-1]]])


def scl_dt(lam: np.ndarray, grid: Grid1D, cfg: SchemeConfig) -> float:
    ext = _extend(lam, grid.periodic)
    worst = float(np.max(ext[:-1] + ext[1:], initial=0.0))
    dt = np.inf if worst == 0 else cfg.cfl * grid.h / worst
    if cfg.dt_max is not None:
        dt = min(dt, cfg.dt_max)
    return dt


def _step(state: ThetaState, flux, cfg, coef, dt=None) -> ThetaState:
    g, lam, floor = coef
    grid = state.grid
    if cfg.alpha is not None:
        if np.max(lam, initial=0.0) > cfg.alpha * (1 + 1e-12):
            raise CFLViolation(f"dissipation {cfg.alpha:g} below required {np.max(lam):g}")
        lam = np.full_like(lam, cfg.alpha)
    limit = scl_dt(lam, grid, cfg)
    if dt is None:
        dt = limit
        if not np.isfinite(dt):
            raise SchemeError("no step size bound: pass dt explicitly")
    elif dt > limit * (1 + 1e-12):
        raise CFLViolation(f"dt = {dt:g} exceeds the monotone limit {limit:g}")
    v = state.theta.values
    if floor is not None:
        low = np.minimum(v[:-1], v[1:]) - floor
        if np.min(low) < 0:
            i = int(np.argmin(low))
            raise CFLViolation(f"theta {min(v[i], v[i + 1]):.4g} fell below the floor {floor[i]:.4g}")
    q = scl_fluxes(v, grid, g, lam, flux.f)
    r = dt / grid.h
    if grid.topology == PERIODIC:
        u = v[:-1] - r * (q[1:] - q[:-1])
        new = np.append(u, u[0])
    else:
        new = v - r * (q[1:] - q[:-1])
    if not np.all(np.isfinite(new)):
        raise SchemeError(f"non-finite theta at t = {state.t + dt:g}")
    return ThetaState(state.t + dt, ScalarField(grid, new))


def step_scl(
    state: ThetaState,
    flux: RegularizedFlux,
    cfg: SchemeConfig,
    dt: float | None = None,
    g: np.ndarray | None = None,
) -> ThetaState:
    """One conservative step. ``g`` (at the ``n - 1`` midpoints) overrides the flux."""
    return _step(state, flux, cfg, _interfaces(flux, state.t, cfg, g), dt)


def solve_scl(
    theta0: ScalarField,
    flux: RegularizedFlux,
    output_times,
    cfg: SchemeConfig = SchemeConfig(),
    check_initial: bool = True,
    tol: float = 1e-12,
) -> Trajectory:
    """March ``theta0``; ``g`` is refreshed at every step time."""
    grid = theta0.grid
    if grid != flux.grid:
        raise ValueError("theta0 and the flux live on different grids")
    if check_initial:
        rx = flux.fields(0.0, (1,))[1]
        gap = theta0.values - flux.barrier.value(rx)
        if np.min(gap) < -tol:
            i = int(np.argmin(gap))
            raise ValueError(f"theta0 below the barrier by {-gap[i]:.3e} at x = {grid.x[i]:.6g}")

    def advance(s, t_stop):
        coef = _interfaces(flux, s.t, cfg)
        dt = min(scl_dt(coef[1], grid, cfg), t_stop - s.t)
        new = _step(s, flux, cfg, coef, dt)
        if t_stop - new.t < 1e-13 * max(1.0, t_stop):
            new = ThetaState(t_stop, new.theta)
        return new, dt

    return march(ThetaState(0.0, theta0), advance, output_times, lambda s: s)


# --------------------------------------------------------------------------
# entropy audit
# --------------------------------------------------------------------------


def _bump(s, order):
    """``exp(1 - 1/(1 - s^2))`` and its first derivative (in ``s``)."""
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    m = np.abs(s) < 1.0
    w = 1.0 / (1.0 - s[m] ** 2)
    b = np.exp(1.0 - w)
    out[m] = b if order == 0 else -2.0 * s[m] * w * w * b
    return out


@dataclass(frozen=True)
class TestBump:
    """Product bump in ``x`` and ``t`` centred at ``(xc, tc)`` with radii ``(rx, rt)``."""

    xc: float
    rx: float
    tc: float
    rt: float

    __test__ = False

    def __post_init__(self):
        if self.rx <= 0 or self.rt <= 0:
            raise ValueError("bump radii must be positive")

    def parts(self, x, t):
        """``(phi, phi_t, phi_x)`` on the ``x`` nodes at time ``t``."""
        sx = (np.asarray(x) - self.xc) / self.rx
        st = (t - self.tc) / self.rt
        bx, dbx = _bump(sx, 0), _bump(sx, 1) / self.rx
        bt, dbt = float(_bump(st, 0)), float(_bump(st, 1)) / self.rt
        return bx * bt, bx * dbt, dbx * bt


def _heaviside(z, side):
    # sgn(0) is taken as 0 on both sides so the audit is identically 0 beyond the range
    return (z > 0).astype(float) if side == "sub" else -(z < 0).astype(float)


def _part(z, side):
    return np.maximum(z, 0.0) if side == "sub" else np.maximum(-z, 0.0)


class EntropyAudit:
    """Entropy-inequality evaluator for one trajectory.

    The coefficient ``g`` and its derivative are sampled once per slice, so
    many ``(k, phi)`` pairs are cheap.
    """

    def __init__(self, traj: Trajectory, flux: RegularizedFlux):
        self.traj, self.flux = traj, flux
        self.grid = traj.grid
        self.times = traj.times
        self.theta = np.array([s.theta.values for s in traj])
        g, gx = [], []
        for t in self.times:
            d = flux.fields(t, (1, 2, 3))
            g.append(-d[1] * d[2])
            gx.append(-(d[2] ** 2 + d[1] * d[3]))
        self.g, self.gx = np.array(g), np.array(gx)
        self.f_theta = flux.f(self.theta)

    def residual(self, k: float, phi: TestBump, side: str = "sub") -> float:
        """Discrete left side of the inequality for level ``k``.

        Space-time trapezoid over the stored slices; ``side="super"`` uses the
        negative parts. A value below ``-tol`` flags a violated inequality.
        """
        if side not in ("sub", "super"):
            raise ValueError("side must be 'sub' or 'super'")
        grid = self.grid
        if phi.xc - phi.rx < grid.x_min or phi.xc + phi.rx > grid.x_max:
            raise ValueError("test function support leaves the window")
        if phi.tc + phi.rt > self.times[-1] * (1 + 1e-12):
            raise ValueError("test function must vanish before the final time")
        x = grid.x
        fk = float(self.flux.f(k))
        space = np.zeros(self.times.size)
        for j, t in enumerate(self.times):
            p, pt, px = phi.parts(x, t)
            if not (np.any(p) or np.any(pt)):
                continue
            z = self.theta[j] - k
            sg = _heaviside(z, side)
            row = _part(z, side) * pt + sg * (self.f_theta[j] - fk) * self.g[j] * px - sg * fk * self.gx[j] * p
            space[j] = trapezoid(row, grid.h)
        total = float(np.sum(0.5 * (space[1:] + space[:-1]) * np.diff(self.times)))
        p0 = phi.parts(x, self.times[0])[0]
        return total + float(trapezoid(_part(self.theta[0] - k, side) * p0, grid.h))


def entropy_residual(traj: Trajectory, flux: RegularizedFlux, k: float, phi: TestBump, side: str = "sub") -> float:
    """Discrete left side of the entropy inequality (see :class:`EntropyAudit`)."""
    return EntropyAudit(traj, flux).residual(k, phi, side)


def entropy_levels(traj: Trajectory, count: int = 17, pad: float = 0.1) -> np.ndarray:
    """``count`` uniform levels over ``[min - pad, max + pad]`` plus the two extremes."""
    vals = np.array([s.theta.values for s in traj.states])
    lo, hi = float(vals.min()), float(vals.max())
    return np.concatenate([np.linspace(lo - pad, hi + pad, count), [lo, hi]])


# --------------------------------------------------------------------------
# classical sub/super-solutions
# --------------------------------------------------------------------------


class BarrierField:
    """``u = G(rho_x)``: a classical sub-solution."""

    def __init__(self, flux: RegularizedFlux):
        self.flux = flux

    def parts(self, t: float) -> tuple:
        """``(u, u_t, u_x)`` on the nodes, from analytic heat derivatives."""
        d = self.flux.fields(t, (1, 2, 3))
        b = self.flux.barrier
        gp = b.first(d[1])
        # rho_xt = rho_xxx
        return b.value(d[1]), gp * d[3], gp * d[2]

    def expected(self, t: float) -> np.ndarray:
        """Closed form of the residual: ``-rho_xx^2 G''(rho_x)``."""
        d = self.flux.fields(t, (1, 2))
        return -d[2] ** 2 * self.flux.barrier.second(d[1])


class CeilingField:
    """``u = S(t) = sqrt(2 c1 t + c2)``: a classical super-solution."""

    def __init__(self, flux: RegularizedFlux, c1: float, c2: float):
        self.flux, self.c1, self.c2 = flux, float(c1), float(c2)

    def parts(self, t: float) -> tuple:
        n = self.flux.grid.n
        S = np.sqrt(2.0 * self.c1 * t + self.c2)
        return np.full(n, S), np.full(n, self.c1 / S), np.zeros(n)

    def expected(self, t: float) -> np.ndarray:
        d = self.flux.fields(t, (1, 2, 3))
        S = np.sqrt(2.0 * self.c1 * t + self.c2)
        return (self.c1 - (d[2] ** 2 + d[1] * d[3])) / S


def classical_residual(u, flux: RegularizedFlux, times, mode: str = "stencil") -> list:
    """``u_t + (g f(u))_x`` on the nodes at each time.

    ``u_t`` is analytic. The flux divergence is differenced with the
    second-order stencil (``mode="stencil"``) or expanded with the analytic
    ``g_x`` and ``u_x`` (``mode="analytic"``). Returns ``(t, ScalarField)`` pairs.
    """
    grid = flux.grid
    out = []
    for t in np.atleast_1d(times):
        t = float(t)
        val, ut, ux = u.parts(t)
        if mode == "stencil":
            div = diff_array(flux.g(t) * flux.f(val), grid, 1)
        elif mode == "analytic":
            div = flux.g_x(t) * flux.f(val) + flux.g(t) * flux.f.prime(val) * ux
        else:
            raise ValueError(f"unknown mode {mode!r}")
        out.append((t, ScalarField(grid, ut + div)))
    return out
