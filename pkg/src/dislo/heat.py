"""Heat equation ``rho_t = rho_xx`` on the line and on the Dirichlet interval.

Line solutions come from trapezoid quadrature of the heat kernel (and its
analytic x-derivatives) against the initial data. Interval solutions come
from a sine series differentiated term by term. Neither path finite
differences the solution.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import ceil, sqrt

import numpy as np
from scipy import fft as sfft
from scipy.signal import fftconvolve

from .core import DIRICHLET, Grid1D, ScalarField, _diff_values, sup_norm

# Gaussian tails below this relative level are treated as zero support.
_GAUSS_CUT = sqrt(np.log(1e17))


# --------------------------------------------------------------------------
# initial-data specs
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Zero:
    kind = "zero"

    def derivative(self, x, order=0):
        return np.zeros_like(np.asarray(x, dtype=float))

    @property
    def support(self):
        return None

    @property
    def compact(self):
        return True

    @property
    def scale(self):
        return 0.0


@dataclass(frozen=True)
class Gaussian:
    """``amplitude * exp(-((x - center) / width)**2)``."""

    amplitude: float = 1.0
    center: float = 0.0
    width: float = 1.0
    kind = "gaussian"

    def __post_init__(self):
        if self.width <= 0:
            raise ValueError("width must be positive")

    def derivative(self, x, order=0):
        z = (np.asarray(x, dtype=float) - self.center) / self.width
        e = self.amplitude * np.exp(-z * z)
        poly = {
            0: 1.0,
            1: -2.0 * z,
            2: 4.0 * z * z - 2.0,
            3: -8.0 * z**3 + 12.0 * z,
        }[order]
        return poly * e / self.width**order

    @property
    def support(self):
        r = _GAUSS_CUT * self.width
        return (self.center - r, self.center + r)

    @property
    def compact(self):
        return True

    @property
    def scale(self):
        return self.width


@dataclass(frozen=True)
class Bump:
    """Smoothed hat ``amplitude * exp(1 - 1/(1 - s^2))``, ``s = (x - center)/radius``.

    C-infinity with support ``[center - radius, center + radius]``.
    """

    amplitude: float = 1.0
    center: float = 0.0
    radius: float = 1.0
    kind = "bump"

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError("radius must be positive")

    def derivative(self, x, order=0):
        s = (np.asarray(x, dtype=float) - self.center) / self.radius
        out = np.zeros_like(s)
        inside = np.abs(s) < 1.0
        s = s[inside]
        w = 1.0 / (1.0 - s * s)
        phi = self.amplitude * np.exp(1.0 - w)
        # u = 1/(1-s^2); d^k/ds^k exp(-u) via Faa di Bruno
        u1 = 2.0 * s * w * w
        u2 = 2.0 * w * w + 8.0 * s * s * w**3
        u3 = 24.0 * s * w**3 + 48.0 * s**3 * w**4
        poly = {
            0: 1.0,
            1: -u1,
            2: u1 * u1 - u2,
            3: -(u1**3) + 3.0 * u1 * u2 - u3,
        }[order]
        out[inside] = poly * phi / self.radius**order
        return out

    @property
    def support(self):
        return (self.center - self.radius, self.center + self.radius)

    @property
    def compact(self):
        return True

    @property
    def scale(self):
        return self.radius


@dataclass(frozen=True)
class SineModes:
    """``sum_k a_k sin(pi k x)``; natural data for the channel (0, 1)."""

    modes: tuple = ((1, 1.0),)
    kind = "sine"

    def __post_init__(self):
        modes = tuple((int(k), float(a)) for k, a in self.modes)
        if any(k < 1 for k, _ in modes):
            raise ValueError("sine mode indices start at 1")
        object.__setattr__(self, "modes", modes)

    def derivative(self, x, order=0):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        for k, a in self.modes:
            w = np.pi * k
            trig = _sinpi(k * x) if order % 2 == 0 else _cospi(k * x)
            sign = (1.0, 1.0, -1.0, -1.0)[order]
            out += sign * a * w**order * trig
        return out

    @property
    def support(self):
        return None

    @property
    def compact(self):
        return False

    @property
    def scale(self):
        return 1.0


@dataclass(frozen=True, eq=False)
class Tabulated:
    """Samples on the nodes of a grid (linear interpolation in between)."""

    x: np.ndarray
    values: np.ndarray
    kind = "tabulated"

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if x.shape != v.shape or x.ndim != 1 or x.size < 3:
            raise ValueError("tabulated data needs matching 1D x and values")
        if np.any(np.diff(x) <= 0):
            raise ValueError("tabulated x must be strictly increasing")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_field(cls, f: ScalarField) -> "Tabulated":
        return cls(f.grid.x, f.values)

    def derivative(self, x, order=0):
        if order == 0:
            return np.interp(x, self.x, self.values, left=0.0, right=0.0)
        h = self.x[1] - self.x[0]
        d = np.asarray(self.values)
        return np.interp(x, self.x, _diff_values(d, h, order, False))

    @property
    def support(self):
        nz = np.nonzero(self.values)[0]
        if nz.size == 0:
            return None
        return (self.x[max(nz[0] - 1, 0)], self.x[min(nz[-1] + 1, self.x.size - 1)])

    @property
    def compact(self):
        return True

    @property
    def scale(self):
        s = self.support
        return 0.0 if s is None else 0.5 * (s[1] - s[0])


def _sinpi(y):
    """``sin(pi*y)`` with exact zeros at integers."""
    r = np.remainder(np.asarray(y, dtype=float), 2.0)
    out = np.sin(np.pi * r)
    out[(r == 0.0) | (r == 1.0)] = 0.0
    return out


def _cospi(y):
    r = np.remainder(np.asarray(y, dtype=float), 2.0)
    out = np.cos(np.pi * r)
    out[(r == 0.5) | (r == 1.5)] = 0.0
    return out


# --------------------------------------------------------------------------
# heat states
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class HeatState:
    t: float
    rho: ScalarField
    rho_x: ScalarField
    rho_xx: ScalarField
    rho_xxx: ScalarField

    def __post_init__(self):
        g = self.rho.grid
        if any(f.grid != g for f in (self.rho_x, self.rho_xx, self.rho_xxx)):
            raise ValueError("heat fields must share one grid")

    @property
    def grid(self) -> Grid1D:
        return self.rho.grid

    def field(self, order: int) -> ScalarField:
        return (self.rho, self.rho_x, self.rho_xx, self.rho_xxx)[order]


def _kernel(z, t, order):
    k = np.exp(-z * z / (4.0 * t)) / np.sqrt(4.0 * np.pi * t)
    if order == 0:
        return k
    if order == 1:
        return -z / (2.0 * t) * k
    if order == 2:
        return (z * z / (4.0 * t * t) - 1.0 / (2.0 * t)) * k
    return (-(z**3) / (8.0 * t**3) + 3.0 * z / (4.0 * t * t)) * k


class LineHeat:
    """Heat flow of compactly supported data on a truncated line.

    Quadrature points sit on a lattice of spacing ``h/m`` aligned with the
    grid, so each evaluation is a single discrete convolution. ``m`` grows
    for small ``t`` so the kernel stays resolved.
    """

    max_refine = 512

    def __init__(self, rho0, grid: Grid1D):
        if not getattr(rho0, "compact", False):
            raise ValueError("line heat solver needs compactly supported initial data")
        sup = rho0.support
        if sup is not None and (sup[0] < grid.x_min - 1e-12 or sup[1] > grid.x_max + 1e-12):
            raise ValueError(
                f"initial support [{sup[0]:.4g}, {sup[1]:.4g}] exceeds the window "
                f"[{grid.x_min:.4g}, {grid.x_max:.4g}]"
            )
        self.rho0 = rho0
        self.grid = grid
        self._support = sup

    def _lattice(self, t):
        h = self.grid.h
        if isinstance(self.rho0, Tabulated):
            return 1
        m = max(1, ceil(h / (0.6 * sqrt(2.0 * t))))
        return min(m, self.max_refine)

    def evaluate(self, t: float, orders=(0, 1, 2, 3), shift: float = 0.0) -> dict:
        """Fields at ``x_min + (i + shift) h`` for ``i`` over the nodes (or midpoints)."""
        g = self.grid
        count = g.n if shift == 0.0 else g.n - 1
        xs = g.x_min + g.h * (np.arange(count) + shift)
        if t < 0:
            raise ValueError("time must be nonnegative")
        if self._support is None:
            return {k: np.zeros(count) for k in orders}
        if t == 0.0:
            return {k: self.rho0.derivative(xs, k) for k in orders}

        m = self._lattice(t)
        q = g.h / m
        lo, hi = self._support
        j_lo = max(int(np.floor((lo - g.x_min) / q)), 0)
        j_hi = min(int(np.ceil((hi - g.x_min) / q)), (g.n - 1) * m)
        jj = np.arange(j_lo, j_hi + 1)
        a = self.rho0.derivative(g.x_min + q * jj, 0)
        a[0] *= 0.5
        a[-1] *= 0.5
        J = a.size
        d0 = -(J - 1) - j_lo
        nb = (count - 1) * m + J
        z = q * (np.arange(nb) + d0 + shift * m)
        out = {}
        idx = np.arange(count) * m + J - 1
        for k in orders:
            b = _kernel(z, t, k)
            if J * nb > 400_000:
                c = fftconvolve(a, b)
            else:
                c = np.convolve(a, b)
            out[k] = q * c[idx]
        return out

    def state(self, t: float) -> HeatState:
        f = self.evaluate(t)
        g = self.grid
        return HeatState(float(t), *(ScalarField(g, f[k]) for k in range(4)))


def solve_heat_line(rho0, grid: Grid1D, t: float) -> HeatState:
    if t < 0:
        raise ValueError("time must be nonnegative")
    return LineHeat(rho0, grid).state(t)


def sine_coefficients(rho0, modes: int, samples: int | None = None) -> np.ndarray:
    """Coefficients ``a_1..a_K`` of ``rho0`` on (0, 1)."""
    if isinstance(rho0, Zero):
        return np.zeros(modes)
    if isinstance(rho0, SineModes):
        kmax = max(modes, max(k for k, _ in rho0.modes))
        a = np.zeros(kmax)
        for k, c in rho0.modes:
            a[k - 1] += c
        return a
    if isinstance(rho0, Tabulated):
        N = rho0.x.size - 1
        vals = rho0.values[1:-1]
    else:
        N = samples or max(8192, 4 * modes)
        y = np.arange(1, N) / N
        vals = rho0.derivative(y, 0)
    a = sfft.dst(vals, type=1) / N
    if a.size < modes:
        a = np.concatenate([a, np.zeros(modes - a.size)])
    return a[:modes]


class ChannelHeat:
    """Sine-series heat flow on (0, 1) with ``rho = 0`` at both walls.

    ``evaluate_at`` accepts any points; the series is only meaningful on
    [0, 1] (the odd 2-periodic continuation is handled by the channel
    extension code).
    """

    def __init__(self, rho0, grid: Grid1D | None = None, modes: int | None = None, wall_tol: float = 1e-12):
        if grid is not None and (grid.x_min != 0.0 or grid.x_max != 1.0):
            raise ValueError("channel heat solver works on I = (0, 1)")
        walls = rho0.derivative(np.array([0.0, 1.0]), 0)
        if np.max(np.abs(walls)) > wall_tol:
            raise ValueError(f"initial data does not vanish at the walls: {walls}")
        self.rho0 = rho0
        self.grid = grid
        K = modes if modes is not None else (grid.n - 2 if grid is not None else 256)
        self.coef = sine_coefficients(rho0, K)
        self.k = np.arange(1, self.coef.size + 1, dtype=float)
        self._cache: dict = {}

    def _active(self, t):
        w = np.pi * self.k
        mag = np.abs(self.coef) * (1.0 + w) ** 3 * np.exp(-(w**2) * t)
        if not np.any(mag > 0):
            return 0
        cut = 1e-18 * mag.max()
        return int(np.nonzero(mag > cut)[0][-1]) + 1

    def _trig(self, x, K):
        key = (x.tobytes(), K)
        hit = self._cache.get(key)
        if hit is None:
            kx = np.outer(x, self.k[:K])
            hit = (_sinpi(kx), _cospi(kx))
            if len(self._cache) > 8:
                self._cache.clear()
            self._cache[key] = hit
        return hit

    def evaluate_at(self, x, t: float, orders=(0, 1, 2, 3)) -> dict:
        if t < 0:
            raise ValueError("time must be nonnegative")
        x = np.asarray(x, dtype=float)
        K = self._active(0.0)
        if K == 0:
            return {o: np.zeros_like(x) for o in orders}
        S, C = self._trig(x, K)
        w = np.pi * self.k[:K]
        b = self.coef[:K] * np.exp(-(w**2) * t)
        out = {}
        for o in orders:
            sign = (1.0, 1.0, -1.0, -1.0)[o]
            trig = S if o % 2 == 0 else C
            out[o] = sign * (trig @ (b * w**o))
        return out

    def evaluate(self, t: float, orders=(0, 1, 2, 3), shift: float = 0.0) -> dict:
        g = self.grid
        count = g.n if shift == 0.0 else g.n - 1
        xs = g.x if shift == 0.0 else g.midpoints
        return self.evaluate_at(xs[:count], t, orders)

    def state(self, t: float) -> HeatState:
        f = self.evaluate(t)
        return HeatState(float(t), *(ScalarField(self.grid, f[k]) for k in range(4)))


def solve_heat_channel(rho0, grid: Grid1D, t: float, modes: int | None = None) -> HeatState:
    if grid.topology != DIRICHLET:
        raise ValueError("channel heat solve needs an interval-dirichlet grid")
    if t < 0:
        raise ValueError("time must be nonnegative")
    return ChannelHeat(rho0, grid, modes).state(t)


def derivative_bounds(state0: HeatState) -> tuple:
    """Discrete sup norms ``(M1, M2, M3)`` of the first three derivatives."""
    return tuple(sup_norm(state0.field(s)) for s in (1, 2, 3))


def make_heat(rho0, grid: Grid1D):
    """Heat sampler matching the grid topology."""
    if grid.topology == DIRICHLET:
        return ChannelHeat(rho0, grid)
    return LineHeat(rho0, grid)
