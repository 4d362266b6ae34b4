"""Scenario configuration: a single JSON document, strictly validated."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields
from math import sqrt

import numpy as np

from .core import DIRICHLET, LINE, Grid1D, ScalarField, build_grid, sup_norm
from .heat import Bump, Gaussian, SineModes, Tabulated, Zero, make_heat
from .hj import SchemeConfig
from .regularize import barrier_kappa


class ConfigError(ValueError):
    """The configuration is malformed or its data fail validation."""


_RHO_KINDS = {
    "zero": (Zero, ()),
    "gaussian": (Gaussian, ("amplitude", "center", "width")),
    "bump": (Bump, ("amplitude", "center", "radius")),
    "sine": (SineModes, ("modes",)),
    "tabulated": (Tabulated, ("x", "values")),
}

_KAPPA_KINDS = {
    "zero": (),
    "linear": ("slope", "intercept"),
    "dominating": ("margin", "intercept"),
    "barrier": ("margin",),
    "tabulated": ("values",),
}


def _check_keys(d: dict, allowed, where: str) -> None:
    if not isinstance(d, dict):
        raise ConfigError(f"{where} must be an object")
    extra = sorted(set(d) - set(allowed))
    if extra:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(extra)}")


def parse_rho0(d: dict):
    kind = d.get("kind") if isinstance(d, dict) else None
    if kind not in _RHO_KINDS:
        raise ConfigError(f"rho0.kind must be one of {sorted(_RHO_KINDS)}")
    cls, keys = _RHO_KINDS[kind]
    _check_keys(d, ("kind",) + keys, "rho0")
    args = {k: d[k] for k in keys if k in d}
    if kind == "sine":
        args["modes"] = tuple(tuple(m) for m in args.get("modes", ((1, 1.0),)))
    try:
        return cls(**args)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad rho0: {exc}") from exc


@dataclass(frozen=True)
class KappaSpec:
    kind: str = "dominating"
    slope: float | None = None
    intercept: float = 0.0
    margin: float = 0.0
    values: tuple | None = None

    @classmethod
    def parse(cls, d: dict) -> "KappaSpec":
        kind = d.get("kind") if isinstance(d, dict) else None
        if kind not in _KAPPA_KINDS:
            raise ConfigError(f"kappa0.kind must be one of {sorted(_KAPPA_KINDS)}")
        _check_keys(d, ("kind",) + _KAPPA_KINDS[kind], "kappa0")
        if kind == "linear" and "slope" not in d:
            raise ConfigError("kappa0 of kind 'linear' needs a slope")
        if kind == "tabulated" and "values" not in d:
            raise ConfigError("kappa0 of kind 'tabulated' needs values")
        vals = tuple(float(v) for v in d["values"]) if "values" in d else None
        return cls(kind, d.get("slope"), float(d.get("intercept", 0.0)), float(d.get("margin", 0.0)), vals)

    def build(self, grid: Grid1D, rho0, level: float) -> ScalarField:
        """``kappa0`` on ``grid``; ``level`` is the barrier parameter it must dominate."""
        x = grid.x
        if self.kind == "zero":
            return ScalarField(grid, np.zeros(grid.n))
        if self.kind == "linear":
            return ScalarField(grid, self.slope * x + self.intercept)
        if self.kind == "dominating":
            M1 = sup_norm(rho0.derivative(x, 1))
            return ScalarField(grid, (M1 + level + self.margin) * x + self.intercept)
        if self.kind == "barrier":
            anchor = grid.x_min if grid.topology == DIRICHLET else 0.0
            return barrier_kappa(grid, lambda y: rho0.derivative(y, 1), level, self.margin, anchor)
        if len(self.values) != grid.n:
            raise ConfigError(f"kappa0 values must have {grid.n} entries")
        return ScalarField(grid, np.array(self.values))


@dataclass(frozen=True)
class Scenario:
    domain: str
    rho0: object
    kappa0: KappaSpec
    n: int
    T: float
    epsilon: float | None = None
    eps_list: tuple | None = None
    L: float | None = None
    window: float = 1.0
    output_times: tuple | None = None
    n_outputs: int = 21
    cfl: float = 0.4
    floor: str = "barrier"
    floor_factor: float = 0.5
    tolerance_constant: float | None = None
    seed: int = 0
    name: str = "scenario"

    def __post_init__(self):
        if self.domain not in ("line", "channel"):
            raise ConfigError("domain must be 'line' or 'channel'")
        if self.n < 3:
            raise ConfigError("n must be at least 3")
        if not self.T > 0:
            raise ConfigError("T must be positive")
        if self.epsilon is None and not self.eps_list:
            raise ConfigError("give epsilon in (0, 1) or an eps_list for continuation")
        if self.epsilon is not None and not 0 < self.epsilon < 1:
            raise ConfigError("epsilon must lie in (0, 1)")
        if self.eps_list is not None:
            check_eps_list(self.eps_list)
        if self.output_times is not None:
            ts = list(self.output_times)
            if ts != sorted(ts) or len(set(ts)) != len(ts):
                raise ConfigError("output_times must be strictly increasing")
            if ts and (ts[0] < 0 or ts[-1] > self.T):
                raise ConfigError("output_times must lie in [0, T]")
        if self.n_outputs < 2:
            raise ConfigError("n_outputs must be at least 2")
        try:
            self.scheme()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        if self.domain == "channel":
            walls = self.rho0.derivative(np.array([0.0, 1.0]), 0)
            if np.max(np.abs(walls)) > 1e-12:
                raise ConfigError("channel rho0 must vanish at x = 0 and x = 1")

    # -- derived objects ---------------------------------------------------

    @property
    def level(self) -> float:
        """Barrier level the initial data are checked at."""
        return 0.0 if self.epsilon is None else self.epsilon

    def half_width(self) -> float:
        if self.L is not None:
            return float(self.L)
        return 8.0 * (float(getattr(self.rho0, "scale", 1.0)) + sqrt(self.T))

    def grid(self) -> Grid1D:
        if self.domain == "channel":
            return build_grid(0.0, 1.0, self.n, DIRICHLET)
        L = self.half_width()
        return build_grid(-L, L, self.n, LINE)

    def times(self) -> np.ndarray:
        """Output times, always including 0 and T."""
        if self.output_times is None:
            return np.linspace(0.0, self.T, self.n_outputs)
        ts = sorted(set([0.0, float(self.T)] + [float(t) for t in self.output_times]))
        return np.array(ts)

    def scheme(self) -> SchemeConfig:
        return SchemeConfig(cfl=self.cfl, floor=self.floor, floor_factor=self.floor_factor)

    def heat(self):
        return make_heat(self.rho0, self.grid())

    def kappa0_field(self, level: float | None = None) -> ScalarField:
        return self.kappa0.build(self.grid(), self.rho0, self.level if level is None else level)


_SCENARIO_KEYS = {f.name for f in fields(Scenario)}


def check_eps_list(eps_list) -> tuple:
    try:
        eps = tuple(float(e) for e in eps_list)
    except (TypeError, ValueError) as exc:
        raise ConfigError("eps_list must be a list of numbers") from exc
    if not eps:
        raise ConfigError("eps_list is empty")
    if any(not 0 < e < 1 for e in eps):
        raise ConfigError("eps_list values must lie in (0, 1)")
    if any(b >= a for a, b in zip(eps, eps[1:])):
        raise ConfigError("eps_list must be strictly decreasing")
    return eps


def scenario_from_dict(d: dict) -> Scenario:
    _check_keys(d, _SCENARIO_KEYS, "config")
    for key in ("domain", "rho0", "kappa0", "n", "T"):
        if key not in d:
            raise ConfigError(f"missing required key {key!r}")
    args = dict(d)
    args["rho0"] = parse_rho0(d["rho0"])
    args["kappa0"] = KappaSpec.parse(d["kappa0"])
    if "eps_list" in args and args["eps_list"] is not None:
        args["eps_list"] = check_eps_list(args["eps_list"])
    if args.get("output_times") is not None:
        args["output_times"] = tuple(float(t) for t in args["output_times"])
    try:
        return Scenario(**args)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def load_scenario(path) -> Scenario:
    try:
        with open(path) as fh:
            d = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return scenario_from_dict(d)
