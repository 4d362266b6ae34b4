"""Scenario orchestration, trajectory archives and the certificate suite.

A run is flattened into a :class:`SliceTable` (the exact content of the
CSV archive). Bound certificates are always computed from the table, so a
run and a re-check of its archive give the same verdicts bit for bit.
"""

from __future__ import annotations

import csv
import json
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .analysis import (
    BoundReport,
    Certificate,
    ToleranceModel,
    bound_constants,
    check_comparison,
    check_link,
    check_lower_bound,
    check_time_bound,
    check_upper_bound,
    epsilon_continuation,
    step_size,
)
from .channel import (
    ChannelScenario,
    check_boundary_constancy,
    check_seams,
    check_wall_flux,
    restrict,
    solve_channel,
)
from .config import ConfigError, Scenario
from .core import Grid1D, ScalarField, build_grid
from .heat import ChannelHeat
from .hj import KappaState, Trajectory, solve_hj
from .regularize import (
    ExtendedChannelHeat,
    RegularizedFlux,
    extend_kappa0_channel,
    interior_slice,
    validate_initial,
)
from .scl import EntropyAudit, TestBump, ThetaState, entropy_levels, solve_scl

COLUMNS = ("t", "x", "rho", "rho_x", "rho_xx", "kappa", "kappa_x", "kappa_t", "theta", "theta_plus", "theta_minus")
SWEEP_COLUMNS = ("epsilon", "sup_diff", "lower_margin", "max_kappa_x", "max_kappa_t", "tol")


# --------------------------------------------------------------------------
# slice tables
# --------------------------------------------------------------------------


@dataclass
class SliceTable:
    """Per-time node data; ``cols[name]`` has shape ``(len(times), grid.n)``."""

    grid: Grid1D
    times: np.ndarray
    cols: dict

    def __post_init__(self):
        shape = (self.times.size, self.grid.n)
        for name in COLUMNS[2:]:
            if self.cols[name].shape != shape:
                raise ValueError(f"column {name} has shape {self.cols[name].shape}, expected {shape}")

    def field(self, name: str, j: int) -> ScalarField:
        return ScalarField(self.grid, self.cols[name][j])

    def kappa_trajectory(self, dt_max: float, steps: int = 1) -> Trajectory:
        states = [
            KappaState(float(t), self.field("kappa", j), self.field("kappa_x", j), self.field("kappa_t", j))
            for j, t in enumerate(self.times)
        ]
        return Trajectory(states, steps, dt_max, dt_max)

    def theta_trajectory(self, dt_max: float, steps: int = 1) -> Trajectory:
        states = [ThetaState(float(t), self.field("theta", j)) for j, t in enumerate(self.times)]
        return Trajectory(states, steps, dt_max, dt_max)


class TableFlux:
    """Stand-in for a flux that only serves the stored ``rho_x`` slices."""

    def __init__(self, table: SliceTable, epsilon: float):
        self.table, self.epsilon = table, float(epsilon)
        self._row = {float(t): j for j, t in enumerate(table.times)}

    @property
    def grid(self) -> Grid1D:
        return self.table.grid

    def fields(self, t: float, orders=(1,), shift: float = 0.0) -> dict:
        if shift != 0.0:
            raise ValueError("stored slices only hold node values")
        names = {0: "rho", 1: "rho_x", 2: "rho_xx"}
        j = self._row[float(t)]
        return {o: self.table.cols[names[o]][j] for o in orders}


def build_table(kappa: Trajectory, theta: Trajectory, rho: list) -> SliceTable:
    """``rho`` holds ``(rho, rho_x, rho_xx)`` arrays per stored time."""
    grid = kappa.grid
    cols = {
        "rho": np.array([r[0] for r in rho]),
        "rho_x": np.array([r[1] for r in rho]),
        "rho_xx": np.array([r[2] for r in rho]),
        "kappa": np.array([s.kappa.values for s in kappa]),
        "kappa_x": np.array([s.kappa_x.values for s in kappa]),
        "kappa_t": np.array([s.kappa_t.values for s in kappa]),
        "theta": np.array([s.theta.values for s in theta]),
    }
    cols["theta_plus"] = 0.5 * (cols["kappa_x"] + cols["rho_x"])
    cols["theta_minus"] = 0.5 * (cols["kappa_x"] - cols["rho_x"])
    return SliceTable(grid, np.array(kappa.times, dtype=float), cols)


# --------------------------------------------------------------------------
# metadata and table certificates
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class RunMeta:
    name: str
    domain: str
    epsilon: float
    C: float
    c1: float
    c2: float
    dt_hj: float
    dt_scl: float
    steps_hj: int
    steps_scl: int
    grid: dict

    def to_dict(self) -> dict:
        return dict(self.__dict__)

    @classmethod
    def from_dict(cls, d: dict) -> "RunMeta":
        return cls(**{k: d[k] for k in cls.__dataclass_fields__})


def grid_to_dict(g: Grid1D) -> dict:
    return {"x_min": g.x_min, "x_max": g.x_max, "n": g.n, "topology": g.topology}


def grid_from_dict(d: dict) -> Grid1D:
    return build_grid(float(d["x_min"]), float(d["x_max"]), int(d["n"]), d["topology"])


def table_certificates(table: SliceTable, meta: RunMeta) -> tuple:
    """Lower, time, upper and link certificates from the stored slices.

    Returns ``(BoundReport, [Certificate])``.
    """
    model = ToleranceModel(meta.C)
    h = table.grid.h
    kap = table.kappa_trajectory(meta.dt_hj, meta.steps_hj)
    th = table.theta_trajectory(meta.dt_scl, meta.steps_scl)
    tol = model(h, step_size(kap))
    certs = [
        check_lower_bound(kap, TableFlux(table, meta.epsilon), meta.epsilon, tol),
        check_time_bound(kap, table.field("rho_xx", 0), tol),
        check_upper_bound(kap, meta.c1, meta.c2, tol),
        check_link(kap, th, model(h, max(step_size(kap), step_size(th)))),
    ]
    report = BoundReport(
        c1=meta.c1,
        c2=meta.c2,
        min_lower_margin=certs[0].value,
        max_time_excess=certs[1].value,
        max_upper_excess=certs[2].value,
        link_gap_L1=certs[3].value,
        tolerances={c.name: c.tol for c in certs} | {"C": meta.C},
        passes={c.name: c.passed for c in certs},
    )
    return report, certs


# --------------------------------------------------------------------------
# running scenarios
# --------------------------------------------------------------------------


@dataclass
class RunOutput:
    scenario: Scenario
    table: SliceTable
    meta: RunMeta
    report: BoundReport
    certificates: list
    kappa: Trajectory
    theta: Trajectory
    flux: RegularizedFlux
    kappa0: ScalarField
    channel: object = None
    extra: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.certificates + self.extra)


def _need_epsilon(sc: Scenario) -> float:
    if sc.epsilon is None:
        raise ConfigError("this command needs a certified epsilon in the config")
    return float(sc.epsilon)


def run_scenario(sc: Scenario) -> RunOutput:
    """Solve heat, HJ and SCL tracks and certify the bounds from the table."""
    eps = _need_epsilon(sc)
    times = tuple(float(t) for t in sc.times())
    cfg = sc.scheme()
    if sc.domain == "channel":
        return _run_channel(sc, eps, times, cfg)
    grid = sc.grid()
    try:
        heat = sc.heat()
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    flux = RegularizedFlux(eps, heat)
    k0 = sc.kappa0_field()
    rho0 = heat.state(0.0)
    rep = validate_initial(k0, rho0, eps)
    if not rep.passed:
        raise ConfigError("kappa0 fails validation: " + rep.message())
    kap = solve_hj(k0, flux, times, cfg)
    th = solve_scl(kap[0].kappa_x, flux, times, cfg)
    rho = []
    for t in kap.times:
        d = flux.fields(t, (0, 1, 2))
        rho.append((d[0], d[1], d[2]))
    c1, c2 = bound_constants(rho0, k0)
    C = sc.tolerance_constant if sc.tolerance_constant is not None else ToleranceModel.default(flux).C
    meta = _meta(sc, eps, C, c1, c2, kap, th, grid)
    table = build_table(kap, th, rho)
    report, certs = table_certificates(table, meta)
    return RunOutput(sc, table, meta, report, certs, kap, th, flux, k0)


def channel_scenario(sc: Scenario, eps: float, times: tuple, cfg) -> ChannelScenario:
    try:
        return ChannelScenario(sc.rho0, sc.kappa0_field(), eps, sc.T, times, window=sc.window, cfg=cfg)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _run_channel(sc: Scenario, eps: float, times: tuple, cfg) -> RunOutput:
    csc = channel_scenario(sc, eps, times, cfg)
    try:
        run = solve_channel(csc)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    kap = run.kappa
    th = restrict(run.theta_window, csc)
    rho = []
    for t in kap.times:
        d = run.heat.evaluate(t, (0, 1, 2))
        rho.append((d[0], d[1], d[2]))
    c1, c2 = bound_constants(run.heat.state(0.0), csc.kappa0)
    C = sc.tolerance_constant if sc.tolerance_constant is not None else ToleranceModel.default(run.flux).C
    meta = _meta(sc, eps, C, c1, c2, run.kappa_window, run.theta_window, csc.grid)
    table = build_table(kap, th, rho)
    report, certs = table_certificates(table, meta)
    return RunOutput(sc, table, meta, report, certs, run.kappa_window, run.theta_window, run.flux, run.kappa0_window, run)


def _meta(sc, eps, C, c1, c2, kap, th, grid) -> RunMeta:
    return RunMeta(
        sc.name,
        sc.domain,
        eps,
        float(C),
        float(c1),
        float(c2),
        step_size(kap),
        step_size(th),
        kap.steps,
        th.steps,
        grid_to_dict(grid),
    )


# --------------------------------------------------------------------------
# the extended suite (needs the live run)
# --------------------------------------------------------------------------


def _tilt(grid: Grid1D, seed: int) -> np.ndarray:
    """Smooth positive perturbation in [1, 2] drawn from ``seed``."""
    r = np.random.default_rng(seed)
    w = 2.0 * np.pi * r.uniform(1.0, 4.0) / (grid.x_max - grid.x_min)
    return 1.5 + 0.5 * np.sin(w * grid.x + r.uniform(0.0, 2.0 * np.pi))


def comparison_certificates(out: RunOutput, delta: float = 1e-3) -> list:
    """Ordered pairs of HJ and SCL data, ``v0 = u0 + delta * tilt``."""
    cfg = out.scenario.scheme()
    grid = out.kappa.grid
    tilt = _tilt(grid, out.scenario.seed)
    times = out.kappa.times
    v0 = ScalarField(grid, out.kappa0.values + delta * tilt)
    v = solve_hj(v0, out.flux, times, cfg, check_initial=False)
    hj = check_comparison(out.kappa, v)
    th0 = out.theta[0].theta
    w = solve_scl(ScalarField(grid, th0.values + delta * tilt), out.flux, times, cfg)
    scl = check_comparison(out.theta, w)
    return [
        Certificate("comparison (kappa)", hj.value, 0.0, hj.passed, {"delta": delta}),
        Certificate("comparison (theta)", scl.value, 0.0, scl.passed, {"delta": delta}),
    ]


def audit_bumps(center: float, radius: float, T: float) -> list:
    """Five test functions spread over ``center +- 2 radius`` and ``(0, T)``."""
    c, R = center, radius
    return [
        TestBump(c, R, 0.5 * T, 0.4 * T),
        TestBump(c + 0.47 * R, R / 3.0, 0.4 * T, 0.3 * T),
        TestBump(c - 0.47 * R, R / 3.0, 0.6 * T, 0.3 * T),
        TestBump(c + 0.8 * R, 0.53 * R, 0.3 * T, 0.24 * T),
        TestBump(c, 2.0 * R, 0.5 * T, 0.48 * T),
    ]


def _audit_region(out: RunOutput) -> tuple:
    sc = out.scenario
    if sc.domain == "channel":
        return 0.5, 0.5
    c = float(getattr(sc.rho0, "center", 0.0))
    g = out.kappa.grid
    R = min(1.5 * float(getattr(sc.rho0, "scale", 1.0)), (g.x_max - c) / 2.2, (c - g.x_min) / 2.2)
    return c, R


def entropy_certificate(out: RunOutput, levels: int = 17) -> Certificate:
    """Worst entropy-inequality deficit over 5 bumps, ``levels`` levels and both sides."""
    audit = EntropyAudit(out.theta, out.flux)
    c, R = _audit_region(out)
    ks = entropy_levels(out.theta, levels)
    worst = np.inf
    for phi in audit_bumps(c, R, float(out.theta.times[-1])):
        for k in ks:
            for side in ("sub", "super"):
                worst = min(worst, audit.residual(float(k), phi, side))
    tol = ToleranceModel(out.meta.C)(out.theta.grid.h, step_size(out.theta))
    return Certificate("entropy audit", float(worst), tol, bool(worst >= -tol), {"levels": int(ks.size)})


def channel_certificates(out: RunOutput, seam_tol: float = 1e-12) -> list:
    run = out.channel
    T = float(out.kappa.times[-1])
    tol = ToleranceModel(out.meta.C)(out.table.grid.h, out.meta.dt_hj)
    wall = check_boundary_constancy(run, tol * T)
    flux_worst, flux_ok = check_wall_flux([run.heat.state(t) for t in out.table.times])
    seams = max(check_seams(run, float(t)) for t in out.table.times)
    dens = float(min(out.table.cols["theta_plus"].min(), out.table.cols["theta_minus"].min()))
    return [
        Certificate("wall drift", wall.drift, wall.tol, wall.passed, {"per_wall": list(wall.per_wall)}),
        Certificate("wall flux", flux_worst, 1e-10, flux_ok, {}),
        Certificate("extension seams", seams, seam_tol, seams <= seam_tol, {}),
        Certificate("density positivity", dens, tol, dens >= -tol, {}),
    ]


def full_suite(out: RunOutput) -> list:
    """All certificates for ``check``: bounds, comparison pair, entropy and walls."""
    extra = comparison_certificates(out) + [entropy_certificate(out)]
    if out.scenario.domain == "channel":
        extra += channel_certificates(out)
    out.extra = extra
    return out.certificates + extra


# --------------------------------------------------------------------------
# eps -> 0 sweep
# --------------------------------------------------------------------------


def run_sweep(sc: Scenario, eps_list) -> list:
    """Continuation table for level-0 data of ``sc``."""
    times = sc.times()
    cfg = sc.scheme()
    k0 = sc.kappa0_field(level=0.0)
    if sc.domain == "channel":
        I = sc.grid()
        ch = ChannelHeat(sc.rho0, I)
        csc = channel_scenario(sc, 0.5, tuple(times), cfg)
        wgrid = csc.window_grid()
        heat = ExtendedChannelHeat(ch, wgrid)
        rho0 = ch.state(0.0)
        lift = lambda k, e: extend_kappa0_channel(k, rho0, e, True, wgrid)
    else:
        heat = sc.heat()
        rho0 = heat.state(0.0)
        lift = None
    kwargs = {"tol_constant": sc.tolerance_constant, "rho0": rho0}
    if lift is not None:
        kwargs["lift"] = lift
    try:
        return epsilon_continuation(k0, heat, eps_list, times, cfg, **kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def sweep_passes(rows, rho_xx0_sup: float) -> bool:
    diffs = [r.sup_diff for r in rows if r.sup_diff is not None]
    ok = all(b < a for a, b in zip(diffs, diffs[1:]))
    return ok and all(r.lower_margin >= -r.tol and r.max_kappa_t <= rho_xx0_sup + r.tol for r in rows)


# --------------------------------------------------------------------------
# archives
# --------------------------------------------------------------------------


def atomic_write(path: Path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix="." + path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _fmt(v: float) -> str:
    return repr(float(v))


def slice_csv(table: SliceTable, j: int) -> str:
    t = _fmt(table.times[j])
    rows = [",".join(COLUMNS)]
    cols = [table.grid.x.tolist()] + [table.cols[c][j].tolist() for c in COLUMNS[2:]]
    for vals in zip(*cols):
        rows.append(",".join([t] + [repr(v) for v in vals]))
    return "\n".join(rows) + "\n"


def _plain(o):
    if isinstance(o, np.generic):
        return o.item()
    raise TypeError(f"cannot serialise {type(o).__name__}")


def _json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=_plain) + "\n"


def certificate_dict(c: Certificate) -> dict:
    return {"name": c.name, "value": c.value, "tol": c.tol, "passed": bool(c.passed), "detail": c.detail}


def write_run(out: RunOutput, directory) -> Path:
    """Write one CSV per stored time, ``index.csv`` and ``report.json``."""
    d = Path(directory)
    table = out.table
    index = ["index,t,file"]
    for j, t in enumerate(table.times):
        name = f"slice_{j:04d}.csv"
        atomic_write(d / name, slice_csv(table, j))
        index.append(f"{j},{_fmt(t)},{name}")
    atomic_write(d / "index.csv", "\n".join(index) + "\n")
    report = {
        "meta": out.meta.to_dict(),
        "report": out.report.to_dict(),
        "certificates": [certificate_dict(c) for c in out.certificates + out.extra],
        "passed": out.passed,
    }
    atomic_write(d / "report.json", _json(report))
    return d


def read_run(directory) -> tuple:
    """Read an archive back. Returns ``(SliceTable, RunMeta, report dict)``."""
    d = Path(directory)
    try:
        report = json.loads((d / "report.json").read_text())
        meta = RunMeta.from_dict(report["meta"])
        with open(d / "index.csv", newline="") as fh:
            index = list(csv.DictReader(fh))
    except (OSError, KeyError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read archive {d}: {exc}") from exc
    grid = grid_from_dict(meta.grid)
    times = np.array([float(r["t"]) for r in index])
    cols = {c: np.empty((times.size, grid.n)) for c in COLUMNS[2:]}
    for j, r in enumerate(index):
        with open(d / r["file"], newline="") as fh:
            rows = list(csv.reader(fh))
        if tuple(rows[0]) != COLUMNS:
            raise ConfigError(f"{r['file']}: unexpected header")
        data = np.array([[float(v) for v in row] for row in rows[1:]])
        if data.shape != (grid.n, len(COLUMNS)):
            raise ConfigError(f"{r['file']}: expected {grid.n} rows")
        if np.any(data[:, 0] != times[j]) or np.any(data[:, 1] != grid.x):
            raise ConfigError(f"{r['file']}: time or node column disagrees with the index")
        for i, c in enumerate(COLUMNS[2:], start=2):
            cols[c][j] = data[:, i]
    return SliceTable(grid, times, cols), meta, report


def sweep_csv(rows) -> str:
    lines = [",".join(SWEEP_COLUMNS)]
    for r in rows:
        diff = "" if r.sup_diff is None else _fmt(r.sup_diff)
        vals = [_fmt(r.epsilon), diff, _fmt(r.lower_margin), _fmt(r.max_kappa_x), _fmt(r.max_kappa_t), _fmt(r.tol)]
        lines.append(",".join(vals))
    return "\n".join(lines) + "\n"


def read_sweep(path) -> list:
    with open(path, newline="") as fh:
        return [
            {k: (None if v == "" else float(v)) for k, v in row.items()}
            for row in csv.DictReader(fh)
        ]
