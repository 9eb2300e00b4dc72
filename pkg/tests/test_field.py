import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings, strategies as st

from helmsrc.field import (GridSpec, SourceField, cutoff, h2d_norm, l2_norm, laplacian_power,
                           make_bump, make_truncated_power, partial)


def _value_at(f: SourceField, point):
    idx = tuple(int(round(c / f.spec.h)) + (f.spec.m - 1) // 2 for c in point)
    return f.values[idx]


# -- grid and container ------------------------------------------------------

def test_grid_spec_geometry():
    g = GridSpec(2, 1.0, 257)
    assert g.h == pytest.approx(1 / 128)
    ax = g.axis()
    assert ax[0] == -1.0 and ax[-1] == 1.0 and ax[128] == 0.0
    np.testing.assert_array_equal(ax, -ax[::-1])
    assert g.nyquist == pytest.approx(128 * math.pi)


@pytest.mark.parametrize("args", [(1, 1.0, 11), (2, 1.0, 10), (2, 1.0, 1), (2, 0.0, 11), (2, -1.0, 11)])
def test_grid_spec_rejects(args):
    with pytest.raises(ValueError):
        GridSpec(*args)


def test_source_field_validation_and_immutability():
    g = GridSpec(2, 1.0, 11)
    vals = np.zeros(g.shape)
    vals[5, 5] = 1.0
    f = SourceField(g, vals)
    assert f.values.dtype == np.complex128
    with pytest.raises(ValueError):
        f.values[5, 5] = 2.0
    vals[5, 5] = 3.0  # the field owns a copy
    assert f.values[5, 5] == 1.0
    bad = np.zeros(g.shape)
    bad[0, 5] = 1.0  # |x| = R
    with pytest.raises(ValueError):
        SourceField(g, bad)
    with pytest.raises(ValueError):
        SourceField(g, np.zeros((11, 10)))
    g2 = (f + f.scaled(2.0)).values
    assert g2[5, 5] == 3.0


# -- generators --------------------------------------------------------------

def test_bump_examples():
    g = GridSpec(2, 1.0, 41)
    assert not np.any(make_bump(g, None, 0.2, amplitude=0.0).values)
    f = make_bump(g, None, 0.2)
    assert _value_at(f, (0.0, 0.0)) == 1.0
    assert _value_at(f, (1.0, 0.0)) == 0.0
    assert _value_at(f, (0.0, -1.0)) == 0.0
    assert abs(_value_at(f, (0.2, 0.0)) - math.exp(-0.5)) < 1e-15
    assert abs(_value_at(f, (0.2, 0.0)) - 0.60653) < 1e-5


def test_bump_support_and_centering():
    g = GridSpec(3, 1.0, 41)
    f = make_bump(g, [0.2, -0.1, 0.0], 0.1, amplitude=2 - 1j)
    assert np.all(f.values[g.outside_mask()] == 0)
    peak = np.unravel_index(np.argmax(np.abs(f.values)), g.shape)
    assert np.allclose(g.axis()[list(peak)], [0.2, -0.1, 0.0])
    with pytest.raises(ValueError):
        make_bump(g, [0.5, 0, 0], 0.2)
    with pytest.raises(ValueError):
        make_bump(g, [0, 0], 0.1)


def test_cutoff_profile():
    r = np.linspace(0, 1, 101)
    c = cutoff(r, 0.5, 0.8)
    assert np.all(c[r <= 0.5] == 1) and np.all(c[r >= 0.8] == 0)
    assert np.all(np.diff(c) <= 0)


def test_truncated_power_profile():
    g = GridSpec(2, 1.0, 41)
    f = make_truncated_power(g, 0.6, 1)
    assert _value_at(f, (0.0, 0.0)) == 1.0
    assert abs(_value_at(f, (0.3, 0.0)) - (1 - 0.25)) < 1e-15
    assert _value_at(f, (0.6, 0.0)) == 0.0
    with pytest.raises(ValueError):
        make_truncated_power(g, 1.2, 1)


# -- norms -------------------------------------------------------------------

def test_l2_norm_of_bump():
    sigma = 0.15
    f = make_bump(GridSpec(2, 1.0, 513), None, sigma)
    assert abs(l2_norm(f) - math.sqrt(math.pi * sigma**2)) < 1e-6
    assert l2_norm(f.scaled(0)) == 0


def test_l2_norm_of_indicator_converges_to_ball_volume():
    errs = []
    for m in (65, 129, 257):
        g = GridSpec(2, 1.0, m)
        inside = g.radius() < 0.7
        f = SourceField(g, inside.astype(float))
        errs.append(abs(l2_norm(f) ** 2 - math.pi * 0.49))
    # the rough edge converges at about O(h)
    assert errs[2] < errs[0]
    assert errs[2] < 3 * g.h


def test_laplacian_power_identity_and_gaussian():
    g = GridSpec(2, 1.0, 257)
    # exp(-|x|^2) times a cutoff far out; Delta f(0) = -2n = -4
    r = g.radius()
    vals = np.exp(-r**2) * cutoff(r, 0.8, 0.95)
    f = SourceField(g, vals, d=1)
    assert laplacian_power(f, 0).values is not f.values
    np.testing.assert_array_equal(laplacian_power(f, 0).values, f.values)
    lap = laplacian_power(f, 1)
    assert abs(_value_at(lap, (0, 0)) + 4) < 10 * g.h**2 * 4


def _bump_symbolic(width):
    x, y = sp.symbols("x y", real=True)
    return x, y, sp.exp(-(x**2 + y**2) / (2 * width**2))


def test_bilaplacian_of_bump_against_symbolic():
    width = 0.2
    g = GridSpec(2, 1.0, 513)
    f = make_bump(g, None, width, d=2)
    x, y, expr = _bump_symbolic(width)
    lap = lambda e: sp.diff(e, x, 2) + sp.diff(e, y, 2)
    ref = float(lap(lap(expr)).subs({x: 0, y: 0}))
    got = _value_at(laplacian_power(f, 2), (0, 0)).real
    assert abs(got - ref) <= 1e-3 * abs(ref)


def test_laplacian_power_rejections():
    g = GridSpec(2, 1.0, 65)
    f = make_bump(g, None, 0.15, d=1)
    with pytest.raises(ValueError):
        laplacian_power(f, 2)
    with pytest.raises(ValueError):
        laplacian_power(SourceField(GridSpec(2, 1.0, 3), np.zeros((3, 3)), d=1), 1)


@settings(max_examples=10, deadline=None)
@given(st.complex_numbers(max_magnitude=5, allow_nan=False, allow_infinity=False),
       st.complex_numbers(max_magnitude=5, allow_nan=False, allow_infinity=False))
def test_laplacian_linearity(a, b):
    g = GridSpec(2, 1.0, 33)
    f = make_bump(g, [0.125, 0.0], 0.15, d=2)
    h = make_truncated_power(g, 0.5, 3, d=2)
    lhs = laplacian_power(f.scaled(a) + h.scaled(b), 2).values
    rhs = a * laplacian_power(f, 2).values + b * laplacian_power(h, 2).values
    scale = max(1.0, np.max(np.abs(rhs)))
    assert np.max(np.abs(lhs - rhs)) <= 1e-12 * scale


def test_h2d_norm_basic_cases():
    g = GridSpec(2, 1.0, 65)
    f = make_bump(g, None, 0.15)
    assert h2d_norm(f.scaled(0)) == 0
    assert h2d_norm(f, 0) == pytest.approx(l2_norm(f), rel=1e-14)
    assert h2d_norm(f, 1) >= l2_norm(f)


def test_h2d_norm_against_symbolic_integrals():
    width = 0.2
    x, y, expr = _bump_symbolic(width)
    total = 0.0
    for a in range(3):
        for b in range(3 - a):
            d = sp.diff(expr, x, a, y, b) if (a or b) else expr
            # separable Gaussian moments integrate in closed form
            total += float(sp.integrate(d**2, (x, -sp.oo, sp.oo), (y, -sp.oo, sp.oo)))
    ref = math.sqrt(total)
    f = make_bump(GridSpec(2, 1.0, 513), None, width, d=1)
    assert abs(h2d_norm(f) - ref) <= 1e-3 * ref


def test_norm_refinement_rates():
    # second-order differences: the H^2 error shrinks at about h^2
    width = 0.2
    x, y, expr = _bump_symbolic(width)
    total = 0.0
    for a in range(3):
        for b in range(3 - a):
            d = sp.diff(expr, x, a, y, b) if (a or b) else expr
            total += float(sp.integrate(d**2, (x, -sp.oo, sp.oo), (y, -sp.oo, sp.oo)))
    ref = math.sqrt(total)
    hs, errs = [], []
    for m in (65, 129, 257):
        g = GridSpec(2, 1.0, m)
        hs.append(g.h)
        errs.append(abs(h2d_norm(make_bump(g, None, width, d=1)) - ref))
    slope = np.polyfit(np.log(hs), np.log(errs), 1)[0]
    assert slope >= 1.8


def test_partial_derivatives_of_polynomial():
    g = GridSpec(2, 1.0, 21)
    x, y = g.coords()
    vals = (x**3 * y) * np.ones(g.shape)
    d = partial(vals, 0, 2, g.h)
    interior = (slice(2, -2), slice(2, -2))
    np.testing.assert_allclose(d[interior], (6 * x * y * np.ones(g.shape))[interior], atol=1e-10)
