import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dislo.core import (
    DIRICHLET,
    LINE,
    PERIODIC,
    ScalarField,
    build_grid,
    diff_array,
    diff_x,
    node_sum,
    stencil_weights,
    sup_norm,
)

finite = st.floats(-1e3, 1e3, allow_nan=False)


def test_grid_examples():
    g = build_grid(0, 1, 11, DIRICHLET)
    assert g.h == pytest.approx(0.1)
    assert g.x[5] == pytest.approx(0.5)
    g = build_grid(-8, 8, 4097, LINE)
    assert g.h == 16 / 4096
    g = build_grid(0, 2, 3, PERIODIC)
    assert g.h == 1.0
    assert list(g.x) == [0.0, 1.0, 2.0]
    assert g.period == 2.0


@pytest.mark.parametrize("args", [(0, 1, 2), (1, 1, 5), (2, 1, 5)])
def test_grid_rejects(args):
    with pytest.raises(ValueError):
        build_grid(*args)


def test_grid_helpers():
    g = build_grid(-1, 1, 5)
    assert g.index_of(0.5) == 3
    with pytest.raises(ValueError):
        g.index_of(0.25)
    r = g.refined()
    assert r.n == 9 and r.h == g.h / 2
    assert np.allclose(g.midpoints, [-0.75, -0.25, 0.25, 0.75])


def test_field_validation():
    g = build_grid(0, 1, 5)
    with pytest.raises(ValueError):
        ScalarField(g, np.zeros(4))
    with pytest.raises(ValueError):
        ScalarField(g, [0, 1, np.nan, 0, 0])
    f = ScalarField(g, np.arange(5.0))
    with pytest.raises(ValueError):
        f.values[0] = 3.0


def test_field_arithmetic():
    g = build_grid(0, 1, 5)
    f = ScalarField(g, np.arange(5.0))
    assert np.array_equal((2 * f - f + 1).values, np.arange(5.0) + 1)
    with pytest.raises(ValueError):
        f + ScalarField(build_grid(0, 2, 5), np.zeros(5))


@pytest.mark.parametrize("topology", [LINE, PERIODIC, DIRICHLET])
@pytest.mark.parametrize("order", [1, 2, 3])
def test_diff_constant_is_zero(topology, order):
    g = build_grid(0, 1, 17, topology)
    d = diff_x(ScalarField(g, np.full(17, 3.7)), order)
    if order == 1:
        assert np.all(d.values == 0.0)
    else:
        assert np.max(np.abs(d.values)) < 1e-8


def test_diff_quadratic_second_order_exact():
    g = build_grid(-1, 2, 31)
    d = diff_x(ScalarField.from_function(g, lambda x: x * x), 2)
    assert np.allclose(d.values, 2.0, atol=1e-9)


def test_one_sided_stencils_exact_on_polynomials():
    g = build_grid(0, 1, 11)
    x = g.x
    cases = {1: (x**2, 2 * x), 2: (x**3, 6 * x), 3: (x**4, 24 * x)}
    for order, (p, exact) in cases.items():
        assert np.allclose(diff_array(p, g, order), exact, atol=1e-6)


def test_diff_sin_second_order():
    errs = []
    for n in (65, 129, 257):
        g = build_grid(0, 2 * np.pi, n)
        d = diff_x(ScalarField.from_function(g, np.sin), 1)
        errs.append(np.max(np.abs(d.values - np.cos(g.x))))
    assert 3.5 < errs[0] / errs[1] < 4.5
    assert 3.5 < errs[1] / errs[2] < 4.5


def test_diff_order_rejected():
    g = build_grid(0, 1, 5)
    with pytest.raises(ValueError):
        diff_x(ScalarField(g, np.zeros(5)), 4)


def test_stencil_weights_central():
    assert np.allclose(stencil_weights((-1, 0, 1), 1), [-0.5, 0.0, 0.5])
    assert np.allclose(stencil_weights((-1, 0, 1), 2), [1.0, -2.0, 1.0])


def test_sup_norm_examples():
    g = build_grid(0, 1, 3)
    assert sup_norm(ScalarField(g, np.zeros(3))) == 0.0
    assert sup_norm(ScalarField(g, [-3.0, 1.0, 2.0])) == 3.0
    g = build_grid(-8, 8, 2049)
    f = ScalarField.from_function(g, lambda x: np.exp(-x * x))
    assert abs(sup_norm(f) - 1.0) <= g.h**2


@settings(max_examples=50, deadline=None)
@given(st.lists(finite, min_size=9, max_size=9), st.lists(finite, min_size=9, max_size=9), finite, finite)
def test_diff_linear(u, v, a, b):
    g = build_grid(0, 1, 9)
    fu, fv = ScalarField(g, u), ScalarField(g, v)
    lhs = diff_x(a * fu + b * fv, 1).values
    rhs = a * diff_x(fu, 1).values + b * diff_x(fv, 1).values
    assert np.allclose(lhs, rhs, rtol=1e-9, atol=1e-6)


@settings(max_examples=50, deadline=None)
@given(st.lists(finite, min_size=16, max_size=16))
def test_periodic_telescoping(vals):
    g = build_grid(0, 1, 17, PERIODIC)
    v = np.append(vals, vals[0])
    d = diff_x(ScalarField(g, v), 1)
    assert abs(node_sum(d)) <= 1e-10 * max(1.0, np.max(np.abs(v)))


@settings(max_examples=50, deadline=None)
@given(st.lists(finite, min_size=5, max_size=5))
def test_sup_norm_zero_iff_zero(vals):
    g = build_grid(0, 1, 5)
    s = sup_norm(ScalarField(g, vals))
    assert s >= 0
    assert (s == 0) == all(v == 0 for v in vals)
