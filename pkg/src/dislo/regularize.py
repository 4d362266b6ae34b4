"""Regularizing constructions: the cutoff ``f_a``, the barrier ``G^eps``,
the eps-lift of initial data, the channel extensions and mollifiers."""

from __future__ import annotations

from dataclasses import dataclass
from math import sqrt

import numpy as np
from scipy.integrate import quad

from .core import DIRICHLET, PERIODIC, Grid1D, ScalarField, diff_array, sup_norm
from .heat import ChannelHeat, HeatState


# --------------------------------------------------------------------------
# the cutoff f_a
# --------------------------------------------------------------------------


def eval_f(a: float, x):
    """C^1 bounded replacement for ``1/x``: exact for ``x >= a``."""
    if a <= 0:
        raise ValueError("cutoff a must be positive")
    x = np.asarray(x, dtype=float)
    # keep 1/x from warning on the unused branch
    safe = np.where(x >= a, x, a)
    below = (2.0 * a - x) / (a * a + a * a * (x - a) ** 2)
    out = np.where(x >= a, 1.0 / safe, below)
    return out if out.ndim else float(out)


def eval_f_prime(a: float, x):
    if a <= 0:
        raise ValueError("cutoff a must be positive")
    x = np.asarray(x, dtype=float)
    s = x - a
    safe = np.where(x >= a, x, a)
    below = (s * s - 2.0 * a * s - 1.0) / (a * a * (1.0 + s * s) ** 2)
    out = np.where(x >= a, -1.0 / (safe * safe), below)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class Cutoff:
    """``f_a`` with its derivative and the sup bounds the schemes need."""

    a: float

    def __post_init__(self):
        if self.a <= 0:
            raise ValueError("cutoff a must be positive")

    def __call__(self, x):
        return eval_f(self.a, x)

    def prime(self, x):
        return eval_f_prime(self.a, x)

    @property
    def sup(self) -> float:
        """``sup |f_a|``, attained at ``x = 2a - sqrt(a^2 + 1)``."""
        a = self.a
        return (a + sqrt(a * a + 1.0)) / (2.0 * a * a)

    @property
    def sup_prime(self) -> float:
        """``sup |f_a'|`` over the real line."""
        a = self.a
        best = 1.0 / (a * a)
        # interior extrema of f' on x < a: s^3 - 3 a s^2 - 3 s + a = 0, s = x - a < 0
        for s in np.roots([1.0, -3.0 * a, -3.0, a]):
            if abs(s.imag) < 1e-12 and s.real < 0:
                best = max(best, abs(float(eval_f_prime(a, a + s.real))))
        return best

    def prime_bound(self, floor):
        """Bound on ``|f_a'(p)|`` over ``p >= floor`` (elementwise)."""
        floor = np.asarray(floor, dtype=float)
        safe = np.where(floor >= self.a, floor, self.a)
        return np.where(floor >= self.a, 1.0 / (safe * safe), self.sup_prime)


# --------------------------------------------------------------------------
# the barrier G
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class SqrtBarrier:
    """``G(x) = sqrt(x^2 + eps^2)``; its companion ``H = G G'`` is ``x``.

    Any object with ``value``, ``first``, ``second`` and ``G0`` can stand in
    for it.
    """

    epsilon: float

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")

    @property
    def G0(self) -> float:
        return self.epsilon

    def value(self, x):
        return np.sqrt(np.asarray(x, dtype=float) ** 2 + self.epsilon**2)

    def first(self, x):
        x = np.asarray(x, dtype=float)
        return x / self.value(x)

    def second(self, x):
        x = np.asarray(x, dtype=float)
        return self.epsilon**2 / (x * x + self.epsilon**2) ** 1.5

    def H(self, x):
        return np.asarray(x, dtype=float)


def eval_G(epsilon: float, x):
    b = SqrtBarrier(epsilon)
    vals = (b.value(x), b.first(x), b.second(x))
    if np.ndim(x) == 0:
        return tuple(float(v) for v in vals)
    return vals


# --------------------------------------------------------------------------
# the regularized flux bound to a heat solution
# --------------------------------------------------------------------------


class RegularizedFlux:
    """``F(x, t, u) = g(x, t) f_eps(u)`` with ``g = -rho_x rho_xx``.

    ``heat`` is any sampler exposing ``grid`` and
    ``evaluate(t, orders, shift)``; the cutoff is pinned to ``a = eps``.
    """

    def __init__(self, epsilon: float, heat, a: float | None = None):
        if epsilon <= 0:
            raise ValueError("epsilon must be positive")
        a = epsilon if a is None else a
        if not 0 < a <= epsilon:
            raise ValueError("cutoff must satisfy 0 < a <= G(0) = eps")
        self.epsilon = float(epsilon)
        self.a = float(a)
        self.heat = heat
        self.f = Cutoff(self.a)
        self.barrier = SqrtBarrier(self.epsilon)

    @property
    def grid(self) -> Grid1D:
        return self.heat.grid

    def fields(self, t: float, orders=(1, 2), shift: float = 0.0) -> dict:
        return self.heat.evaluate(t, orders=orders, shift=shift)

    def g(self, t: float, shift: float = 0.0) -> np.ndarray:
        d = self.fields(t, (1, 2), shift)
        return -d[1] * d[2]

    def g_x(self, t: float, shift: float = 0.0) -> np.ndarray:
        d = self.fields(t, (1, 2, 3), shift)
        return -(d[2] ** 2 + d[1] * d[3])

    def lower_barrier(self, t: float, shift: float = 0.0) -> np.ndarray:
        """``G^eps(rho_x)`` sampled at time ``t``."""
        return self.barrier.value(self.fields(t, (1,), shift)[1])


# --------------------------------------------------------------------------
# initial data
# --------------------------------------------------------------------------


def lift_initial(kappa0: ScalarField, epsilon: float) -> ScalarField:
    """``kappa0 + eps * x``."""
    if not 0 < epsilon < 1:
        raise ValueError("lift needs 0 < eps < 1")
    return ScalarField(kappa0.grid, kappa0.values + epsilon * kappa0.grid.x)


@dataclass(frozen=True)
class ValidationReport:
    min_margin: float
    worst_index: int
    worst_x: float
    passed: bool
    level: float

    def message(self) -> str:
        return (
            f"initial slope margin {self.min_margin:.3e} at node {self.worst_index} "
            f"(x = {self.worst_x:.6g}) against level {self.level:g}"
        )


def interior_slice(grid: Grid1D) -> slice:
    return slice(0, grid.n - 1) if grid.topology == PERIODIC else slice(1, grid.n - 1)


def validate_initial(kappa0: ScalarField, rho0: HeatState, epsilon: float, tol: float = 1e-12) -> ValidationReport:
    """Check ``D_x kappa0 >= sqrt(rho_x0^2 + eps^2)`` at interior nodes.

    ``epsilon = 0`` checks the positivity condition ``D_x kappa0 >= |rho_x0|``.
    """
    g = kappa0.grid
    if rho0.grid != g:
        raise ValueError("kappa0 and rho0 must share a grid")
    slope = diff_array(kappa0.values, g, 1)
    rx = rho0.rho_x.values
    barrier = np.abs(rx) if epsilon == 0 else np.sqrt(rx * rx + epsilon**2)
    sl = interior_slice(g)
    margin = (slope - barrier)[sl]
    i = int(np.argmin(margin))
    idx = i + (sl.start or 0)
    m = float(margin[i])
    return ValidationReport(m, idx, float(g.x[idx]), m >= -tol, float(epsilon))


def barrier_kappa(grid: Grid1D, rho_x_fn, level: float, margin: float = 0.0, anchor: float = 0.0) -> ScalarField:
    """Initial data whose every discrete slope dominates ``G^level(rho_x0)``.

    Cell slopes are the max of ``sqrt(rho_x0^2 + level^2)`` over the cell
    ends and midpoint, plus ``margin``; ``level = 0`` gives ``|rho_x0|``.
    This is the sharpest data that passes :func:`validate_initial` exactly.
    ``kappa`` is pinned to 0 at the node nearest ``anchor``.
    """
    x = grid.x
    xm = grid.midpoints
    G = lambda p: np.sqrt(p * p + level * level)
    gl = G(rho_x_fn(x))
    gm = G(rho_x_fn(xm))
    slope = np.maximum(np.maximum(gl[:-1], gl[1:]), gm) + margin
    k = np.concatenate([[0.0], np.cumsum(slope * grid.h)])
    i0 = int(np.argmin(np.abs(x - anchor)))
    return ScalarField(grid, k - k[i0])


def integrated_kappa(grid: Grid1D, slope_fn, anchor: float = 0.0) -> ScalarField:
    """``kappa(x) = int_anchor^x slope_fn`` by adaptive quadrature per cell."""
    x = grid.x
    cells = np.array([quad(slope_fn, x[i], x[i + 1], epsabs=1e-14, epsrel=1e-13)[0] for i in range(grid.n - 1)])
    k = np.concatenate([[0.0], np.cumsum(cells)])
    i0 = int(np.argmin(np.abs(x - anchor)))
    return ScalarField(grid, k - k[i0])


# --------------------------------------------------------------------------
# channel extensions
# --------------------------------------------------------------------------


def _snap_integers(y, tol=1e-12):
    r = np.round(y)
    return np.where(np.abs(y - r) < tol, r, y)


def reflect_eval(channel: ChannelHeat, x, t: float, orders=(0, 1, 2, 3)) -> dict:
    """Odd reflection about x = 1 continued 2-periodically, from the channel series."""
    x = _snap_integers(np.asarray(x, dtype=float))
    y = np.remainder(x, 2.0)
    upper = y > 1.0
    src = np.where(upper, 2.0 - y, y)
    vals = channel.evaluate_at(src, t, orders)
    # rho and rho_xx flip sign on the reflected half, rho_x and rho_xxx do not
    out = {}
    for o in orders:
        v = vals[o]
        out[o] = np.where(upper, -v, v) if o % 2 == 0 else v
    return out


class ExtendedChannelHeat:
    """Sampler of the extended density on an arbitrary (window) grid."""

    def __init__(self, channel: ChannelHeat, grid: Grid1D):
        self.channel = channel
        self.grid = grid

    def evaluate(self, t: float, orders=(0, 1, 2, 3), shift: float = 0.0) -> dict:
        g = self.grid
        xs = g.x if shift == 0.0 else g.midpoints
        return reflect_eval(self.channel, xs, t, orders)

    def state(self, t: float) -> HeatState:
        f = self.evaluate(t)
        return HeatState(float(t), *(ScalarField(self.grid, f[k]) for k in range(4)))


def extend_rho_channel(source, grid: Grid1D, t: float | None = None) -> HeatState:
    """Extended density on ``grid`` from a channel series (or channel state).

    With a :class:`ChannelHeat` the extension is evaluated from the series at
    time ``t``. With a :class:`HeatState` on I the target nodes must map onto
    channel nodes under reflection.
    """
    if isinstance(source, ChannelHeat):
        if t is None:
            raise ValueError("extension from a series needs a time")
        return ExtendedChannelHeat(source, grid).state(t)
    if not isinstance(source, HeatState) or source.grid.topology != DIRICHLET:
        raise ValueError("extension needs interval-dirichlet channel data")
    src = source.grid
    if abs(src.x_min) > 0 or abs(src.x_max - 1.0) > 0:
        raise ValueError("channel data must live on I = (0, 1)")
    y = np.remainder(_snap_integers(grid.x), 2.0)
    upper = y > 1.0
    ref = np.where(upper, 2.0 - y, y)
    idx = np.rint(ref / src.h).astype(int)
    if np.max(np.abs(idx * src.h - ref)) > 1e-9 * max(1.0, src.h):
        raise ValueError("target nodes do not reflect onto channel nodes; extend from the series")
    fields = []
    for o in range(4):
        v = source.field(o).values[idx]
        fields.append(ScalarField(grid, np.where(upper, -v, v) if o % 2 == 0 else v))
    return HeatState(source.t, *fields)


def extend_kappa0_channel(
    kappa0: ScalarField,
    rho0: HeatState,
    epsilon: float,
    lifted: bool,
    grid: Grid1D,
) -> ScalarField:
    """Extension of channel data ``kappa0`` (on I) to ``grid`` with linear wings.

    Unlifted: interior copy, wing slope ``||rho_x0|| + eps``.
    Lifted: interior ``kappa0 + eps x``, wing slope ``||kappa_x0|| + eps`` and
    right anchor ``kappa0(1) + eps``.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    I = kappa0.grid
    if I.x_min != 0.0 or I.x_max != 1.0:
        raise ValueError("kappa0 must live on I = (0, 1)")
    k_left = float(kappa0.values[0])
    k_right = float(kappa0.values[-1])
    if lifted:
        slope = sup_norm(diff_array(kappa0.values, I, 1)) + epsilon
        right = k_right + epsilon
    else:
        slope = sup_norm(rho0.rho_x) + epsilon
        right = k_right
    x = _snap_integers(grid.x)
    inside = np.interp(np.clip(x, 0.0, 1.0), I.x, kappa0.values)
    if lifted:
        inside = inside + epsilon * np.clip(x, 0.0, 1.0)
    out = np.where(x > 1.0, slope * (x - 1.0) + right, np.where(x < 0.0, slope * x + k_left, inside))
    return ScalarField(grid, out)


# --------------------------------------------------------------------------
# mollifier
# --------------------------------------------------------------------------


def bump_profile(x):
    """Unnormalized ``exp(-1/(1 - x^2))`` on (-1, 1)."""
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    inside = np.abs(x) < 1.0
    out[inside] = np.exp(-1.0 / (1.0 - x[inside] ** 2))
    return out


def mollifier_weights(h: float, n: float) -> np.ndarray:
    """Discrete kernel ``xi^n`` on the lattice ``k h``, normalized to unit sum."""
    r = int(np.floor((1.0 / n) / h))
    k = np.arange(-r, r + 1)
    w = bump_profile(k * h * n)
    return w / w.sum()


def mollify(f: ScalarField, n: float) -> ScalarField:
    """Convolve with the unit-mass bump of support radius ``1/n``."""
    g = f.grid
    if n < 1:
        raise ValueError("smoothing index must be >= 1")
    if 1.0 / n < 2.0 * g.h:
        raise ValueError("kernel radius 1/n is below two grid spacings")
    w = mollifier_weights(g.h, n)
    r = (w.size - 1) // 2
    v = f.values
    if g.periodic:
        u = v[:-1]
        m = u.size
        ext = u[np.arange(-r, m + r) % m]
        out = np.convolve(ext, w, mode="valid")
        return ScalarField(g, np.append(out, out[0]))
    if r >= v.size:
        raise ValueError("kernel wider than the grid")
    # odd reflection through the end values; reproduces linear data exactly
    left = 2.0 * v[0] - v[r:0:-1]
    right = 2.0 * v[-1] - v[-2 : -r - 2 : -1]
    ext = np.concatenate([left, v, right])
    return ScalarField(g, np.convolve(ext, w, mode="valid"))
