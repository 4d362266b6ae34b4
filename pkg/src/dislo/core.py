"""Uniform 1D grids, scalar fields and finite-difference stencils."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from math import factorial

import numpy as np

LINE = "line-truncation"
PERIODIC = "periodic"
DIRICHLET = "interval-dirichlet"
TOPOLOGIES = (LINE, PERIODIC, DIRICHLET)


@dataclass(frozen=True)
class Grid1D:
    """Uniform node-centred grid on ``[x_min, x_max]``.

    On a periodic grid node ``n - 1`` is the same point as node 0, so the
    independent unknowns are the first ``n - 1`` nodes.
    """

    x_min: float
    x_max: float
    n: int
    topology: str = LINE

    def __post_init__(self) -> None:
        if self.topology not in TOPOLOGIES:
            raise ValueError(f"unknown topology {self.topology!r}")
        if self.n < 3:
            raise ValueError("a grid needs at least 3 nodes")
        if not (np.isfinite(self.x_min) and np.isfinite(self.x_max)):
            raise ValueError("grid bounds must be finite")
        if self.x_min >= self.x_max:
            raise ValueError("x_min must be smaller than x_max")

    @property
    def h(self) -> float:
        return (self.x_max - self.x_min) / (self.n - 1)

    @property
    def x(self) -> np.ndarray:
        return np.linspace(self.x_min, self.x_max, self.n)

    @property
    def midpoints(self) -> np.ndarray:
        """Interface points ``x_{i+1/2}``, ``n - 1`` of them."""
        return self.x_min + self.h * (np.arange(self.n - 1) + 0.5)

    @property
    def period(self) -> float:
        return self.x_max - self.x_min

    @property
    def periodic(self) -> bool:
        return self.topology == PERIODIC

    def index_of(self, x: float, tol: float = 1e-9) -> int:
        """Index of the node at ``x``; raises if ``x`` is not a node."""
        i = int(round((x - self.x_min) / self.h))
        if i < 0 or i >= self.n or abs(self.x_min + i * self.h - x) > tol * max(1.0, abs(x)):
            raise ValueError(f"{x} is not a grid node")
        return i

    def refined(self) -> "Grid1D":
        """Same interval with the spacing halved."""
        return Grid1D(self.x_min, self.x_max, 2 * self.n - 1, self.topology)


def build_grid(x_min: float, x_max: float, n: int, topology: str = LINE) -> Grid1D:
    return Grid1D(float(x_min), float(x_max), int(n), topology)


@dataclass(frozen=True, eq=False)
class ScalarField:
    """Node values on a grid. Values are copied and frozen on construction."""

    grid: Grid1D
    values: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        v = np.array(self.values, dtype=float)
        if v.shape != (self.grid.n,):
            raise ValueError(f"expected {self.grid.n} values, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("field contains non-finite values")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_function(cls, grid: Grid1D, fn) -> "ScalarField":
        return cls(grid, fn(grid.x))

    def _coerce(self, other):
        if isinstance(other, ScalarField):
            if other.grid != self.grid:
                raise ValueError("fields live on different grids")
            return other.values
        return other

    def __add__(self, other) -> "ScalarField":
        return ScalarField(self.grid, self.values + self._coerce(other))

    __radd__ = __add__

    def __sub__(self, other) -> "ScalarField":
        return ScalarField(self.grid, self.values - self._coerce(other))

    def __mul__(self, other) -> "ScalarField":
        return ScalarField(self.grid, self.values * self._coerce(other))

    __rmul__ = __mul__

    def __neg__(self) -> "ScalarField":
        return ScalarField(self.grid, -self.values)

    def __len__(self) -> int:
        return self.grid.n


@lru_cache(maxsize=None)
def stencil_weights(offsets: tuple, order: int) -> np.ndarray:
    """Finite-difference weights for ``d^order/dx^order`` at offset 0 (unit spacing)."""
    s = np.asarray(offsets, dtype=float)
    m = len(s)
    vander = np.array([s**k / factorial(k) for k in range(m)])
    rhs = np.zeros(m)
    rhs[order] = 1.0
    w = np.linalg.solve(vander, rhs)
    w.setflags(write=False)
    return w


_CENTRAL = {1: (-1, 0, 1), 2: (-1, 0, 1), 3: (-2, -1, 0, 1, 2)}


def _diff_values(v: np.ndarray, h: float, order: int, periodic: bool) -> np.ndarray:
    n = v.size
    offsets = _CENTRAL[order]
    r = max(offsets)
    if periodic:
        m = n - 1
        u = v[:m]
        if order == 1:
            d = (np.roll(u, -1) - np.roll(u, 1)) / (2.0 * h)
        elif order == 2:
            d = (np.roll(u, -1) - 2.0 * u + np.roll(u, 1)) / h**2
        else:
            d = (np.roll(u, -2) - 2.0 * np.roll(u, -1) + 2.0 * np.roll(u, 1) - np.roll(u, 2)) / (2.0 * h**3)
        return np.append(d, d[0])

    out = np.empty(n)
    if order == 1:
        out[1:-1] = (v[2:] - v[:-2]) / (2.0 * h)
    elif order == 2:
        out[1:-1] = (v[2:] - 2.0 * v[1:-1] + v[:-2]) / h**2
    else:
        out[2:-2] = (v[4:] - 2.0 * v[3:-1] + 2.0 * v[1:-3] - v[:-4]) / (2.0 * h**3)
    # one-sided, second-order stencils of length order + 2
    width = order + 2
    if n < width:
        raise ValueError(f"grid too coarse for order-{order} one-sided stencils")
    for i in list(range(r)) + list(range(n - r, n)):
        lo = 0 if i < r else n - width
        offs = tuple(range(lo - i, lo - i + width))
        w = stencil_weights(offs, order)
        # weights sum to zero; differencing against v[i] keeps constants exact
        out[i] = np.dot(w, v[lo : lo + width] - v[i]) / h**order
    return out


def diff_x(f: ScalarField, order: int = 1) -> ScalarField:
    """Second-order accurate derivative of ``f`` (order 1, 2 or 3).

    Central stencils in the interior; periodic grids wrap, other topologies
    use one-sided second-order stencils at the ends.
    """
    if order not in (1, 2, 3):
        raise ValueError("order must be 1, 2 or 3")
    g = f.grid
    return ScalarField(g, _diff_values(f.values, g.h, order, g.periodic))


def diff_array(values: np.ndarray, grid: Grid1D, order: int = 1) -> np.ndarray:
    """Array version of :func:`diff_x` for solver inner loops."""
    if order not in (1, 2, 3):
        raise ValueError("order must be 1, 2 or 3")
    return _diff_values(np.asarray(values, dtype=float), grid.h, order, grid.periodic)


def sup_norm(f) -> float:
    v = f.values if isinstance(f, ScalarField) else np.asarray(f)
    return float(np.max(np.abs(v))) if v.size else 0.0


def node_sum(f: ScalarField) -> float:
    """``h`` times the sum over independent nodes (a discrete integral on periodic grids)."""
    g = f.grid
    v = f.values[:-1] if g.periodic else f.values
    return float(g.h * np.sum(v))


def trapezoid(values: np.ndarray, h: float, axis: int = -1) -> np.ndarray:
    v = np.asarray(values, dtype=float)
    total = np.sum(v, axis=axis)
    first = np.take(v, 0, axis=axis)
    last = np.take(v, -1, axis=axis)
    return h * (total - 0.5 * (first + last))
