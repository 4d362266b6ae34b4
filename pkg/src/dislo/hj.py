"""Monotone explicit solver for ``kappa_t + g(x, t) f_eps(kappa_x) = 0``.

The numerical Hamiltonian is the central-slope Lax-Friedrichs one,

    kappa_i <- kappa_i - dt * [g_i f(pbar) - alpha_i/2 (p+ - p-)],

with ``alpha_i = |g_i| * L`` where ``L`` bounds ``|f'|``. Because ``alpha_i``
does not depend on the state, the step map is order preserving for every
input as soon as ``dt * max(alpha) <= h``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import DIRICHLET, LINE, PERIODIC, Grid1D, ScalarField, diff_array
from .regularize import RegularizedFlux, mollify, validate_initial


class SchemeError(RuntimeError):
    """A solver could not take an admissible step."""


class CFLViolation(SchemeError):
    pass


@dataclass(frozen=True)
class SchemeConfig:
    """Knobs shared by the explicit steppers.

    ``alpha=None`` uses the local coefficient ``|g_i| L``; a number fixes a
    single global coefficient, and a step that would need more raises
    :class:`CFLViolation`. ``lf`` overrides the bound ``L`` on ``|f'|``.
    """

    cfl: float = 0.4
    alpha: float | None = None
    lf: float | None = None
    dt_max: float | None = None
    floor: str = "global"
    floor_factor: float = 0.5
    spread: bool = True

    def __post_init__(self):
        if not 0 < self.cfl < 1:
            raise ValueError("cfl must lie in (0, 1)")
        if self.alpha is not None and self.alpha < 0:
            raise ValueError("alpha must be nonnegative")
        if self.floor not in ("global", "barrier"):
            raise ValueError(f"unknown floor mode {self.floor!r}")
        if not 0 < self.floor_factor <= 1:
            raise ValueError("floor_factor must lie in (0, 1]")

    def slope_floor(self, flux: RegularizedFlux, rho_x: np.ndarray):
        """Lowest slope the bound on ``|f'|`` is valid for (``None``: all slopes)."""
        if self.floor == "global" or self.lf is not None:
            return None
        return self.floor_factor * flux.barrier.value(rho_x)

    def lipschitz(self, flux: RegularizedFlux, rho_x: np.ndarray | None = None):
        """Bound on ``|f'|``: global, or nodewise above the barrier floor."""
        if self.lf is not None:
            return float(self.lf)
        if self.floor == "global" or rho_x is None:
            return flux.f.sup_prime
        return flux.f.prime_bound(self.slope_floor(flux, rho_x))


@dataclass(frozen=True)
class KappaState:
    """``kappa`` at one time, with its discrete slope and time rate.

    ``edge`` carries the boundary data the stepper needs: the frozen ghost
    slopes on a truncated line, the pinned wall values on an interval.
    """

    t: float
    kappa: ScalarField
    kappa_x: ScalarField
    kappa_t: ScalarField
    edge: tuple = field(default=(), repr=False)

    @property
    def grid(self) -> Grid1D:
        return self.kappa.grid

    @property
    def lipschitz(self) -> float:
        """Largest one-sided slope magnitude."""
        g = self.grid
        return float(np.max(np.abs(np.diff(self.kappa.values)))) / g.h

    @classmethod
    def initial(cls, kappa0: ScalarField, rate=None, t: float = 0.0) -> "KappaState":
        g = kappa0.grid
        v = kappa0.values
        if g.topology == LINE:
            edge = ((v[1] - v[0]) / g.h, (v[-1] - v[-2]) / g.h)
        elif g.topology == DIRICHLET:
            edge = (float(v[0]), float(v[-1]))
        else:
            edge = ()
        r = np.zeros(g.n) if rate is None else rate
        return cls(t, kappa0, ScalarField(g, diff_array(v, g, 1)), ScalarField(g, r), edge)


@dataclass
class Trajectory:
    """States recorded at the requested output times."""

    states: list
    steps: int = 0
    dt_min: float = float("inf")
    dt_max: float = 0.0

    def __len__(self):
        return len(self.states)

    def __getitem__(self, i):
        return self.states[i]

    def __iter__(self):
        return iter(self.states)

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.states])

    @property
    def grid(self) -> Grid1D:
        return self.states[0].grid

    @property
    def final(self):
        return self.states[-1]


# --------------------------------------------------------------------------
# stepping
# --------------------------------------------------------------------------


def _slopes(v: np.ndarray, grid: Grid1D, edge: tuple):
    """One-sided slopes ``(p-, p+)`` at the nodes that move."""
    h = grid.h
    if grid.topology == PERIODIC:
        u = v[:-1]
        d = (np.roll(u, -1) - u) / h
        return np.roll(d, 1), d
    d = np.diff(v) / h
    if grid.topology == LINE:
        # ghost nodes continue the initial edge slopes
        return np.concatenate([[edge[0]], d]), np.concatenate([d, [edge[1]]])
    return d[:-1], d[1:]


def _nodes(arr: np.ndarray, grid: Grid1D) -> np.ndarray:
    """Restrict a node array to the nodes the stepper updates."""
    if grid.topology == PERIODIC:
        return arr[:-1]
    if grid.topology == DIRICHLET:
        return arr[1:-1]
    return arr


def _scatter(rate: np.ndarray, grid: Grid1D) -> np.ndarray:
    if grid.topology == PERIODIC:
        return np.append(rate, rate[0])
    if grid.topology == DIRICHLET:
        return np.concatenate([[0.0], rate, [0.0]])
    return rate


def hj_alpha(coef: tuple, flux: RegularizedFlux, cfg: SchemeConfig) -> np.ndarray:
    """Dissipation per node from the sampled ``(g, rho_x)``."""
    g, rho_x = coef
    need = np.abs(g) * cfg.lipschitz(flux, rho_x)
    if cfg.spread:
        # neighbour max: no node is left undamped where g changes sign
        if flux.grid.periodic:
            u = need[:-1]
            u = np.maximum(u, np.maximum(np.roll(u, 1), np.roll(u, -1)))
            need = np.append(u, u[0])
        else:
            wide = need.copy()
            wide[1:] = np.maximum(wide[1:], need[:-1])
            wide[:-1] = np.maximum(wide[:-1], need[1:])
            need = wide
    if cfg.alpha is None:
        return need
    if np.max(need, initial=0.0) > cfg.alpha * (1 + 1e-12):
        raise CFLViolation(f"dissipation {cfg.alpha:g} below required {np.max(need):g}")
    return np.full_like(g, cfg.alpha)


def hj_rate(v: np.ndarray, grid: Grid1D, edge: tuple, g: np.ndarray, alpha: np.ndarray, f, floor=None) -> np.ndarray:
    """``-H_i`` on every node (zero on pinned nodes).

    With a slope ``floor`` the central slopes must stay above it, since the
    dissipation was only sized for those slopes.
    """
    pm, pp = _slopes(v, grid, edge)
    pbar = 0.5 * (pp + pm)
    if floor is not None:
        low = pbar - _nodes(floor, grid)
        if np.min(low) < 0:
            i = int(np.argmin(low))
            raise CFLViolation(f"central slope {pbar[i]:.4g} fell below the floor {pbar[i] - low[i]:.4g}")
    gi = _nodes(g, grid)
    ai = _nodes(alpha, grid)
    ham = gi * f(pbar) - 0.5 * ai * (pp - pm)
    return _scatter(-ham, grid)


def hj_dt(alpha: np.ndarray, grid: Grid1D, cfg: SchemeConfig) -> float:
    amax = float(np.max(_nodes(alpha, grid), initial=0.0))
    dt = np.inf if amax == 0 else cfg.cfl * grid.h / amax
    if cfg.dt_max is not None:
        dt = min(dt, cfg.dt_max)
    return dt


def _coef(flux: RegularizedFlux, t: float, g=None, shift: float = 0.0) -> tuple:
    if g is not None:
        return np.asarray(g, dtype=float), None
    d = flux.fields(t, (1, 2), shift)
    return -d[1] * d[2], d[1]


def step_hj(
    state: KappaState,
    flux: RegularizedFlux,
    cfg: SchemeConfig,
    dt: float | None = None,
    g: np.ndarray | None = None,
) -> KappaState:
    """One forward-Euler step of the monotone scheme.

    ``g`` defaults to the flux coefficient at ``state.t``; ``dt`` defaults to
    the CFL step. A larger requested ``dt`` raises :class:`CFLViolation`.
    """
    return _step_hj(state, flux, cfg, _coef(flux, state.t, g), dt)


def _step_hj(state, flux, cfg, coef, dt=None):
    grid = state.grid
    alpha = hj_alpha(coef, flux, cfg)
    limit = hj_dt(alpha, grid, cfg)
    if dt is None:
        dt = limit
        if not np.isfinite(dt):
            raise SchemeError("no step size bound: pass dt explicitly")
    elif dt > limit * (1 + 1e-12):
        raise CFLViolation(f"dt = {dt:g} exceeds the monotone limit {limit:g}")
    floor = None if coef[1] is None else cfg.slope_floor(flux, coef[1])
    v = state.kappa.values
    rate = hj_rate(v, grid, state.edge, coef[0], alpha, flux.f, floor)
    new = v + dt * rate
    if not np.all(np.isfinite(new)):
        raise SchemeError(f"non-finite kappa at t = {state.t + dt:g}")
    return KappaState(
        state.t + dt,
        ScalarField(grid, new),
        ScalarField(grid, diff_array(new, grid, 1)),
        ScalarField(grid, (new - v) / dt),
        state.edge,
    )


def _output_times(output_times) -> np.ndarray:
    ts = np.asarray(sorted(float(t) for t in output_times))
    if ts.size == 0 or ts[0] < 0:
        raise ValueError("output times must be nonnegative and nonempty")
    if np.any(np.diff(ts) <= 0):
        raise ValueError("output times must be distinct")
    return ts


def march(state, advance, output_times, record) -> Trajectory:
    """Drive ``advance(state, t_stop) -> (state, dt)`` through the output times."""
    ts = _output_times(output_times)
    traj = Trajectory([])
    if ts[0] == state.t:
        traj.states.append(record(state))
        ts = ts[1:]
    for t_out in ts:
        while state.t < t_out:
            state, dt = advance(state, t_out)
            traj.steps += 1
            traj.dt_min = min(traj.dt_min, dt)
            traj.dt_max = max(traj.dt_max, dt)
        traj.states.append(record(state))
    return traj


def solve_hj(
    kappa0: ScalarField,
    flux: RegularizedFlux,
    output_times,
    cfg: SchemeConfig = SchemeConfig(),
    check_initial: bool = True,
    level: float | None = None,
) -> Trajectory:
    """March ``kappa0`` through ``output_times`` with ``g`` refreshed every step.

    With ``check_initial`` the data must dominate the barrier at ``level``
    (default: ``flux.epsilon``), otherwise ``ValueError`` is raised.
    """
    grid = kappa0.grid
    if grid != flux.grid:
        raise ValueError("kappa0 and the flux live on different grids")
    if check_initial:
        rep = validate_initial(kappa0, flux.heat.state(0.0), flux.epsilon if level is None else level)
        if not rep.passed:
            raise ValueError("initial data fails validation: " + rep.message())

    c0 = _coef(flux, 0.0)
    s0 = KappaState.initial(kappa0)
    rate0 = hj_rate(kappa0.values, grid, s0.edge, c0[0], hj_alpha(c0, flux, cfg), flux.f)
    state = KappaState.initial(kappa0, rate0)

    def advance(s, t_stop):
        coef = _coef(flux, s.t)
        dt = min(hj_dt(hj_alpha(coef, flux, cfg), grid, cfg), t_stop - s.t)
        new = _step_hj(s, flux, cfg, coef, dt)
        if t_stop - new.t < 1e-13 * max(1.0, t_stop):
            new = KappaState(t_stop, new.kappa, new.kappa_x, new.kappa_t, new.edge)
        return new, dt

    return march(state, advance, output_times, lambda s: s)


# --------------------------------------------------------------------------
# vanishing viscosity cross-check
# --------------------------------------------------------------------------


def viscous_rate(v, grid, edge, g, f, nu) -> np.ndarray:
    pm, pp = _slopes(v, grid, edge)
    gi = _nodes(g, grid)
    lap = (pp - pm) / grid.h
    return _scatter(-gi * f(0.5 * (pp + pm)) + nu * lap, grid)


def solve_viscous(
    kappa0: ScalarField,
    flux: RegularizedFlux,
    output_times,
    nu: float,
    delta: float | None = None,
    cfl: float = 0.4,
    dt: float | None = None,
) -> Trajectory:
    """Centered explicit scheme for ``u_t + g f(u_x) = nu u_xx``.

    The data are mollified with index ``delta`` first (skipped for ``None``).
    A fixed ``dt`` above ``cfl h^2 / (2 nu)`` is rejected.
    """
    if nu <= 0:
        raise ValueError("viscosity must be positive")
    grid = kappa0.grid
    h = grid.h
    limit = cfl * h * h / (2.0 * nu)
    if dt is not None and dt > limit:
        raise SchemeError(f"dt = {dt:g} exceeds the parabolic limit {limit:g}")
    u0 = kappa0 if delta is None else mollify(kappa0, delta)
    lf = flux.f.sup_prime
    state = KappaState.initial(u0)

    def advance(s, t_stop):
        g = flux.g(s.t)
        step = limit if dt is None else dt
        a = float(np.max(np.abs(g), initial=0.0)) * lf
        if dt is None and a > 0:
            # keeps the centered advection part stable
            step = min(step, cfl * 2.0 * nu / (a * a))
        step = min(step, t_stop - s.t)
        v = s.kappa.values
        new = v + step * viscous_rate(v, grid, s.edge, g, flux.f, nu)
        if not np.all(np.isfinite(new)):
            raise SchemeError(f"viscous solve blew up at t = {s.t + step:g}")
        t = t_stop if t_stop - (s.t + step) < 1e-13 * max(1.0, t_stop) else s.t + step
        return (
            KappaState(
                t,
                ScalarField(grid, new),
                ScalarField(grid, diff_array(new, grid, 1)),
                ScalarField(grid, (new - v) / step),
                s.edge,
            ),
            step,
        )

    return march(state, advance, output_times, lambda s: s)


# --------------------------------------------------------------------------
# diagnostics
# --------------------------------------------------------------------------


def sup_convolution(f: ScalarField, eps_sc: float, k: float = 0.0, t: float = 0.0) -> ScalarField:
    """``max_y f(y) - e^{kt} (x - y)^2 / (2 eps_sc)`` over grid nodes near ``x``."""
    if eps_sc <= 0:
        raise ValueError("eps_sc must be positive")
    grid = f.grid
    v = f.values
    w = np.exp(k * t) / (2.0 * eps_sc)
    spread = float(v.max() - v.min())
    radius = np.sqrt(2.0 * eps_sc * spread) * np.exp(-0.5 * k * t) + 2.0 * grid.h
    r = min(int(np.ceil(radius / grid.h)), grid.n - 1)
    out = v.copy()
    for j in range(1, r + 1):
        pen = w * (j * grid.h) ** 2
        out[:-j] = np.maximum(out[:-j], v[j:] - pen)
        out[j:] = np.maximum(out[j:], v[:-j] - pen)
    return ScalarField(grid, out)


def hj_residual(traj: Trajectory, flux: RegularizedFlux, form: str = "product") -> list:
    """Residuals between consecutive slices, centred at the half time.

    ``form="product"`` gives ``|D_t k D_x k - rho_x rho_xx|``; ``"flux"`` gives
    ``|D_t k + g f(D_x k)|``. Boundary nodes are reported as 0.
    Returns a list of ``(t_half, ScalarField)``.
    """
    if len(traj) < 2:
        raise ValueError("need at least two slices")
    grid = traj.grid
    out = []
    interior = np.zeros(grid.n, dtype=bool)
    interior[1:-1] = True
    for a, b in zip(traj.states[:-1], traj.states[1:]):
        tm = 0.5 * (a.t + b.t)
        kt = (b.kappa.values - a.kappa.values) / (b.t - a.t)
        kx = 0.5 * (a.kappa_x.values + b.kappa_x.values)
        d = flux.fields(tm, (1, 2))
        if form == "product":
            r = np.abs(kt * kx - d[1] * d[2])
        elif form == "flux":
            r = np.abs(kt - d[1] * d[2] * flux.f(kx))
        else:
            raise ValueError(f"unknown residual form {form!r}")
        out.append((tm, ScalarField(grid, np.where(interior, r, 0.0))))
    return out
