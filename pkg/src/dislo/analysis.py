"""Certificates over solver trajectories.

Each check returns a :class:`Certificate` holding the measured margin, the
tolerance it was judged against and the verdict. Tolerances follow the
first-order model ``C (h + dt)``.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .core import Grid1D, ScalarField, diff_array, sup_norm
from .heat import HeatState, derivative_bounds
from .hj import SchemeConfig, Trajectory, solve_hj
from .regularize import RegularizedFlux, interior_slice, lift_initial, validate_initial


@dataclass(frozen=True)
class ToleranceModel:
    """``tol = C (h + dt)``."""

    C: float

    @classmethod
    def default(cls, flux: RegularizedFlux) -> "ToleranceModel":
        return cls(10.0 * max(1.0, sup_norm(flux.g(0.0))))

    def __call__(self, h: float, dt: float) -> float:
        return self.C * (h + dt)


@dataclass(frozen=True)
class Certificate:
    name: str
    value: float
    tol: float
    passed: bool
    detail: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "value", float(self.value))
        object.__setattr__(self, "tol", float(self.tol))
        object.__setattr__(self, "passed", bool(self.passed))

    def line(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        return f"{verdict} {self.name}: value {self.value:.6g}, tol {self.tol:.3g}"


@dataclass(frozen=True)
class BoundReport:
    c1: float
    c2: float
    min_lower_margin: float
    max_time_excess: float
    max_upper_excess: float
    link_gap_L1: float
    tolerances: dict
    passes: dict

    def __post_init__(self):
        if self.c1 < 0 or self.c2 < 1:
            raise ValueError("bound constants out of range (need c1 >= 0, c2 >= 1)")

    @property
    def passed(self) -> bool:
        return all(self.passes.values())

    def to_dict(self) -> dict:
        return asdict(self)


def step_size(traj: Trajectory) -> float:
    """Largest step taken, 0 for a trajectory that never stepped."""
    return traj.dt_max if traj.steps else 0.0


def bound_constants(rho0: HeatState, kappa0: ScalarField) -> tuple:
    """``c1 = M2^2 + M1 M3`` and ``c2 = (sup |kappa0_x| + 1)^2``."""
    if kappa0.grid != rho0.grid:
        raise ValueError("rho0 and kappa0 must share a grid")
    M1, M2, M3 = derivative_bounds(rho0)
    slope = sup_norm(diff_array(kappa0.values, kappa0.grid, 1))
    return M2 * M2 + M1 * M3, (slope + 1.0) ** 2


def _rho_x(flux, t):
    return flux.fields(t, (1,))[1]


def check_lower_bound(traj: Trajectory, flux: RegularizedFlux, epsilon: float, tol: float) -> Certificate:
    """``min (D_x kappa - G(rho_x))`` over interior nodes and stored times.

    ``epsilon = 0`` measures against ``|rho_x|``.
    """
    sl = interior_slice(traj.grid)
    worst, where = np.inf, (0.0, 0.0)
    for s in traj:
        rx = _rho_x(flux, s.t)
        bar = np.abs(rx) if epsilon == 0 else np.sqrt(rx * rx + epsilon**2)
        m = (s.kappa_x.values - bar)[sl]
        i = int(np.argmin(m))
        if m[i] < worst:
            worst, where = float(m[i]), (s.t, float(traj.grid.x[i + (sl.start or 0)]))
    return Certificate("lower bound", worst, tol, worst >= -tol, {"t": where[0], "x": where[1], "level": epsilon})


def slice_rates(traj: Trajectory) -> np.ndarray:
    """Backward differences of ``kappa`` between consecutive stored slices."""
    vals = np.array([s.kappa.values for s in traj])
    return np.diff(vals, axis=0) / np.diff(traj.times)[:, None]


def check_time_bound(traj: Trajectory, rho0, tol: float) -> Certificate:
    """``max |D_t kappa| - ||rho_xx0||`` from the stored slices.

    ``rho0`` is the initial :class:`HeatState` or its ``rho_xx`` field.
    """
    if len(traj) < 2:
        raise ValueError("need at least two stored slices")
    kt = float(np.max(np.abs(slice_rates(traj))))
    bound = sup_norm(rho0.rho_xx if isinstance(rho0, HeatState) else rho0)
    excess = kt - bound
    ratio = kt / bound if bound > 0 else (0.0 if kt == 0 else np.inf)
    return Certificate("time gradient", excess, tol, excess <= tol, {"max_kt": kt, "bound": bound, "ratio": ratio})


def check_upper_bound(traj: Trajectory, c1: float, c2: float, tol: float) -> Certificate:
    """``max (D_x kappa - sqrt(2 c1 t + c2))``; also records the ``sqrt(c1 t + c2)`` ceiling."""
    sl = interior_slice(traj.grid)
    worst = -np.inf
    tight = -np.inf
    for s in traj:
        kx = s.kappa_x.values[sl]
        worst = max(worst, float(np.max(kx)) - np.sqrt(2.0 * c1 * s.t + c2))
        tight = max(tight, float(np.max(kx)) - np.sqrt(c1 * s.t + c2))
    return Certificate(
        "upper bound",
        worst,
        tol,
        worst <= tol,
        {"c1": c1, "c2": c2, "tight_excess": tight, "tight_holds": bool(tight <= tol)},
    )


def _check_pair(traj_a: Trajectory, traj_b: Trajectory):
    if traj_a.grid != traj_b.grid:
        raise ValueError("trajectories live on different grids")
    ta, tb = traj_a.times, traj_b.times
    if ta.shape != tb.shape or np.any(np.abs(ta - tb) > 1e-12 * max(1.0, ta[-1])):
        raise ValueError("trajectories were stored at different times")


def link_gaps(kappa: Trajectory, theta: Trajectory) -> np.ndarray:
    """``h sum |D_x kappa - theta|`` at each stored time."""
    _check_pair(kappa, theta)
    h = kappa.grid.h
    periodic = kappa.grid.periodic
    out = []
    for a, b in zip(kappa, theta):
        d = np.abs(a.kappa_x.values - b.theta.values)
        out.append(h * float(np.sum(d[:-1] if periodic else d)))
    return np.array(out)


def check_link(kappa: Trajectory, theta: Trajectory, tol: float) -> Certificate:
    gaps = link_gaps(kappa, theta)
    return Certificate(
        "viscosity-entropy link",
        float(gaps[-1]),
        tol,
        bool(gaps[0] == 0.0 and gaps[-1] <= tol),
        {"initial_gap": float(gaps[0]), "max_gap": float(gaps.max())},
    )


def _values(state) -> np.ndarray:
    return state.kappa.values if hasattr(state, "kappa") else state.theta.values


def check_comparison(traj_u: Trajectory, traj_v: Trajectory) -> Certificate:
    """``max (u - v)^+``; ordered data must stay ordered exactly."""
    _check_pair(traj_u, traj_v)
    if np.any(_values(traj_u[0]) > _values(traj_v[0])):
        raise ValueError("initial data are not ordered")
    worst = 0.0
    for a, b in zip(traj_u, traj_v):
        worst = max(worst, float(np.max(_values(a) - _values(b))))
    viol = max(worst, 0.0)
    return Certificate("comparison", viol, 0.0, viol == 0.0, {})


def bound_report(
    kappa: Trajectory,
    flux: RegularizedFlux,
    rho0: HeatState,
    kappa0: ScalarField,
    theta: Trajectory | None = None,
    tol_model: ToleranceModel | None = None,
    level: float | None = None,
) -> tuple:
    """All bound certificates for one run. Returns ``(BoundReport, [Certificate])``."""
    tol_model = tol_model or ToleranceModel.default(flux)
    h = kappa.grid.h
    tol = tol_model(h, step_size(kappa))
    c1, c2 = bound_constants(rho0, kappa0)
    eps = flux.epsilon if level is None else level
    certs = [
        check_lower_bound(kappa, flux, eps, tol),
        check_time_bound(kappa, rho0, tol),
        check_upper_bound(kappa, c1, c2, tol),
    ]
    gap = float("nan")
    if theta is not None:
        tl = tol_model(h, max(step_size(kappa), step_size(theta)))
        link = check_link(kappa, theta, tl)
        certs.append(link)
        gap = link.value
    report = BoundReport(
        c1=c1,
        c2=c2,
        min_lower_margin=certs[0].value,
        max_time_excess=certs[1].value,
        max_upper_excess=certs[2].value,
        link_gap_L1=gap,
        tolerances={c.name: c.tol for c in certs} | {"C": tol_model.C},
        passes={c.name: c.passed for c in certs},
    )
    return report, certs


# --------------------------------------------------------------------------
# eps -> 0
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ContinuationRow:
    epsilon: float
    sup_diff: float | None
    lower_margin: float
    max_kappa_x: float
    max_kappa_t: float
    tol: float


def workers() -> int:
    try:
        return max(1, int(os.environ.get("DISLO_THREADS", "1")))
    except ValueError:
        return 1


def epsilon_continuation(
    kappa0: ScalarField,
    heat,
    eps_list,
    output_times,
    cfg: SchemeConfig = SchemeConfig(),
    tol_constant: float | None = None,
    lift=lift_initial,
    rho0: HeatState | None = None,
) -> list:
    """Run the lifted problem for each ``eps`` and tabulate the Cauchy behaviour.

    ``kappa0`` must dominate ``|rho_x0|``; ``rho0`` (default ``heat.state(0)``)
    is the state it is validated against, and ``lift`` maps it onto the
    solver grid. Members run concurrently up to
    ``DISLO_THREADS`` workers; rows come back in ``eps_list`` order.
    """
    eps_list = [float(e) for e in eps_list]
    if not eps_list or any(not 0 < e < 1 for e in eps_list):
        raise ValueError("eps values must lie in (0, 1)")
    if any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        raise ValueError("eps_list must be strictly decreasing")
    rho0 = heat.state(0.0) if rho0 is None else rho0
    rep = validate_initial(kappa0, rho0, 0.0)
    if not rep.passed:
        raise ValueError("continuation data must satisfy kappa_x >= |rho_x|: " + rep.message())

    def member(eps):
        flux = RegularizedFlux(eps, heat)
        traj = solve_hj(lift(kappa0, eps), flux, output_times, cfg)
        return flux, traj

    with ThreadPoolExecutor(max_workers=workers()) as pool:
        runs = list(pool.map(member, eps_list))

    rows, prev = [], None
    for eps, (flux, traj) in zip(eps_list, runs):
        C = tol_constant if tol_constant is not None else ToleranceModel.default(flux).C
        tol = C * (traj.grid.h + step_size(traj))
        low = check_lower_bound(traj, flux, 0.0, tol)
        sl = interior_slice(traj.grid)
        kx = max(float(np.max(s.kappa_x.values[sl])) for s in traj)
        kt = float(np.max(np.abs(slice_rates(traj)))) if len(traj) > 1 else 0.0
        final = traj.final.kappa.values
        diff = None if prev is None else float(np.max(np.abs(final - prev)))
        rows.append(ContinuationRow(eps, diff, low.value, kx, kt, tol))
        prev = final
    return rows
