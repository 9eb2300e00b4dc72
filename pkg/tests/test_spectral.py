import csv
import io
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from helmsrc.field import GridSpec, SourceField, h2d_norm, l2_norm, make_bump, make_truncated_power
from helmsrc.forward import BoundaryDataset, make_sphere_rule, radial_rule, sweep
from helmsrc.quadrature import sphere_area
from helmsrc.spectral import (DirectionSet, SpectralSamples, assemble_spectra, data_bound_constant,
                              direct_spectra, fhat_direct, fhat_direct_many, fhat_from_boundary,
                              i1, i1_complex, i2, make_direction_set, random_directions,
                              reconstruct, spectra_csv, tail_bar, tail_energy, tail_slope)
from helmsrc.stability import epsilon_of_data

import _cases

SIGMA = _cases.SIGMA
PEAK = 2 * math.pi * SIGMA**2


def gaussian_fhat(k):
    return PEAK * np.exp(-SIGMA**2 * np.asarray(k) ** 2 / 2)


def gaussian_ball_energy(s):
    """Closed-form energy of the 2-D Gaussian transform inside ``|xi| <= s``."""
    return PEAK**2 * math.pi / SIGMA**2 * (-math.expm1(-SIGMA**2 * s**2))


# -- directions --------------------------------------------------------------

@pytest.mark.parametrize("n", [2, 3, 4])
def test_direction_sets(n):
    d = make_direction_set(n, 12)
    assert abs(d.weights.sum() - 2 * math.pi ** (n / 2) / math.gamma(n / 2)) < 1e-12
    r = random_directions(n, 10, seed=1)
    assert abs(r.weights.sum() - sphere_area(n)) < 1e-12
    np.testing.assert_array_equal(r.nodes, random_directions(n, 10, seed=1).nodes)
    with pytest.raises(ValueError):
        DirectionSet(n, 2 * d.nodes, d.weights)


# -- direct route ------------------------------------------------------------

def test_fhat_direct_at_zero_is_discrete_mass():
    f = make_truncated_power(GridSpec(3, 1.0, 21), 0.7, 2, amplitude=1 + 2j)
    assert abs(fhat_direct(f, np.zeros(3)) - f.values.sum() * f.spec.h**3) < 1e-14


def test_fhat_direct_gaussian_examples():
    f = _cases.bump()
    assert abs(PEAK - 0.141372) < 1e-6
    assert abs(fhat_direct(f, np.zeros(2)) - PEAK) < 1e-8
    xi = 10 * np.array([0.6, 0.8])
    assert abs(fhat_direct(f, xi) - gaussian_fhat(10.0)) < 1e-8
    # reference value 0.045898 holds to about 2e-6 (exact: 0.0458967)
    assert abs(gaussian_fhat(10.0) - 0.045898) < 2e-6


def test_fhat_direct_many_matches_naive_sum():
    spec = GridSpec(3, 1.0, 9)
    rng = np.random.default_rng(0)
    vals = rng.standard_normal(spec.shape) + 1j * rng.standard_normal(spec.shape)
    vals[spec.radius() >= 1.0] = 0
    f = SourceField(spec, vals)
    xs = np.stack([np.broadcast_to(c, spec.shape).ravel() for c in spec.coords()], axis=1)
    xis = rng.standard_normal((5, 3)) * 4 + 1j * rng.standard_normal((5, 3))
    ref = np.exp(-1j * xis @ xs.T) @ vals.ravel() * spec.h**3
    np.testing.assert_allclose(fhat_direct_many(f, xis), ref, rtol=1e-12)
    with pytest.raises(ValueError):
        fhat_direct(f, np.zeros(2))


# -- boundary route ------------------------------------------------------------

@pytest.fixture(scope="module")
def k4_data():
    return sweep(_cases.bump(), [4.0], _cases.rule(2, 256))


def test_boundary_route_zero_data():
    rule = make_sphere_rule(2, 1.0, 16)
    z = np.zeros((1, 16), dtype=complex)
    data = BoundaryDataset(rule, np.array([3.0]), z, z, 3.0)
    assert fhat_from_boundary(data, 0, [1.0, 0.0]) == 0


def test_boundary_route_matches_direct_at_k4(k4_data):
    f = _cases.bump()
    got = fhat_from_boundary(k4_data, 0, [1.0, 0.0])
    ref = fhat_direct(f, np.array([4.0, 0.0]))
    assert abs(got - ref) <= 1e-6 * abs(ref)


def test_conjugate_symmetry(k4_data):
    f = make_bump(GridSpec(2, 1.0, 129), [0.2, -0.1], 0.12)
    data = sweep(f, [4.0], make_sphere_rule(2, 1.0, 128))
    w = np.array([0.6, 0.8])
    a = fhat_from_boundary(data, 0, w)
    b = fhat_from_boundary(data, 0, -w)
    assert abs(a - np.conj(b)) <= 1e-10 * abs(a)
    with pytest.raises(IndexError):
        fhat_from_boundary(k4_data, 1, w)
    with pytest.raises(ValueError):
        fhat_from_boundary(k4_data, 0, [1.0, 1.0])


def test_boundary_route_converges_with_sphere_resolution():
    f = make_bump(GridSpec(2, 1.0, 129), [0.15, 0.1], 0.12)
    xi_dir = np.array([0.28, 0.96])
    ref = fhat_direct(f, 8.0 * xi_dir)
    errs = []
    for res in (16, 24, 32, 48):
        data = sweep(f, [8.0], make_sphere_rule(2, 1.0, res))
        errs.append(abs(fhat_from_boundary(data, 0, xi_dir) - ref))
    # trapezoidal rule on the circle: at least quadratic, in practice geometric
    for a, b in zip(errs, errs[1:]):
        assert b <= max(a / 4, 1e-13)
    assert errs[-1] < 1e-10


def test_assemble_dual_path_and_rows():
    data = _cases.dataset(8.0)
    f = _cases.bump()
    dirs = make_direction_set(2, 32)
    via_boundary = assemble_spectra(data, dirs)
    via_grid = assemble_spectra(f, dirs, data.freqs, data.kweights, data.K)
    scale = np.max(np.abs(via_grid.vals))
    assert np.max(np.abs(via_boundary.vals - via_grid.vals)) <= 1e-6 * scale
    assert via_boundary.source_meta["path"] == "boundary"
    assert via_grid.source_meta["path"] == "direct"
    row = [fhat_from_boundary(data, 0, w) for w in dirs.nodes]
    np.testing.assert_allclose(via_boundary.vals[0], row, rtol=1e-14, atol=1e-16)
    with pytest.raises(ValueError):
        assemble_spectra(data, dirs, data.freqs)
    with pytest.raises(ValueError):
        assemble_spectra(data, make_direction_set(3, 8))


def test_assemble_zero_input():
    spec = GridSpec(2, 1.0, 33)
    zero = SourceField(spec, np.zeros(spec.shape))
    s = direct_spectra(zero, make_direction_set(2, 8), 5.0, 8)
    assert not np.any(s.vals)
    assert i1(s, 5.0) == 0 and i1(s, 2.0) == 0


# -- energies ----------------------------------------------------------------

@pytest.fixture(scope="module")
def bump_samples_20():
    return direct_spectra(_cases.bump(), make_direction_set(2, 72), 20.0, 64)


def test_i1_closed_form(bump_samples_20):
    assert i1(bump_samples_20, 0.0) == 0.0
    for s in (5.0, 10.0, 20.0):
        ref = gaussian_ball_energy(s)
        assert abs(i1(bump_samples_20, s) - ref) <= 1e-6 * ref
    with pytest.raises(ValueError):
        i1(bump_samples_20, 21.0)


def test_i1_i2_monotone(bump_samples_20):
    s = np.linspace(0.5, 19.5, 20)
    a = [i1(bump_samples_20, x) for x in s]
    b = [i2(bump_samples_20, x, 20.0) for x in s]
    assert np.all(np.diff(a) >= 0)
    assert np.all(np.diff(b) <= 0)


def test_plancherel_split_and_i2_closed_form():
    f = _cases.bump()
    cutoff = 40 / SIGMA
    samples = direct_spectra(f, make_direction_set(2, 64), cutoff, 128)
    total = (2 * math.pi) ** 2 * l2_norm(f) ** 2
    for s in (5.0, 10.0, 20.0):
        split = i1(samples, s) + i2(samples, s, cutoff)
        assert abs(split - total) <= 1e-4 * total
    near = direct_spectra(f, make_direction_set(2, 72), 60.0, 128)
    ref = gaussian_ball_energy(60.0) - gaussian_ball_energy(10.0)
    assert abs(i2(near, 10.0, 60.0) - ref) <= 1e-6 * ref
    with pytest.raises(ValueError):
        i2(near, 10.0, 10.0)
    with pytest.raises(ValueError):
        i2(near, 10.0, 70.0)


def test_tail_bar():
    assert tail_bar(2.0, 10.0, 2, 1) == pytest.approx(4.0 / 100 / 2)
    with pytest.raises(ValueError):
        tail_bar(1.0, 10.0, 4, 1)


def test_samples_without_rule_refuse_energies():
    f = make_bump(GridSpec(2, 1.0, 33), None, 0.15)
    s = assemble_spectra(f, make_direction_set(2, 8), [1.0, 2.0])
    with pytest.raises(ValueError):
        i1(s, 1.0)


def test_data_bound_for_noiseless_data():
    data = _cases.dataset(8.0)
    samples = assemble_spectra(data, make_direction_set(2, 48))
    C = data_bound_constant(2, 1.0)
    assert C == pytest.approx(2 * (2 * math.pi) ** 2)
    eps = epsilon_of_data(data)
    for s in (1.0, 2.0, 4.0, 6.0, 8.0):
        assert i1(samples, s) <= C * eps**2


# -- complex extension -------------------------------------------------------

@pytest.fixture(scope="module")
def coarse_bump():
    return make_bump(GridSpec(2, 1.0, 65), None, SIGMA)


def test_i1_complex_real_axis(bump_samples_20):
    f = _cases.bump()
    dirs = make_direction_set(2, 72)
    val = i1_complex(f, dirs, 10.0)
    ref = i1(bump_samples_20, 10.0)
    assert abs(val - ref) <= 1e-6 * ref
    assert i1_complex(f, dirs, 0.0) == 0


def test_i1_complex_imaginary_axis_is_real(coarse_bump):
    dirs = make_direction_set(2, 32)
    for sigma in (0.5, 2.0, 5.0):
        v = i1_complex(coarse_bump, dirs, 1j * sigma, count=32)
        assert abs(v.imag) <= 1e-10 * abs(v)
    with pytest.raises(ValueError):
        i1_complex(coarse_bump, dirs, 1j * 701)


@settings(max_examples=25, deadline=None)
@given(st.floats(min_value=-1.0, max_value=math.log10(20.0)),
       st.floats(min_value=-math.pi / 2, max_value=math.pi / 2))
def test_i1_complex_growth_bound(log_r, theta):
    """``|I1(s)| e^{-2R|Im s|} / |s|^n`` stays within a fixed multiple of its value at s=1."""
    f = make_bump(GridSpec(2, 1.0, 65), None, SIGMA)
    dirs = make_direction_set(2, 32)
    s = 10.0**log_r * complex(math.cos(theta), math.sin(theta))
    if abs(s.imag) > 10:
        s = complex(s.real, math.copysign(10, s.imag))
    M = h2d_norm(f)
    C = abs(i1_complex(f, dirs, 1.0, count=32)) / M**2
    lhs = abs(i1_complex(f, dirs, s, count=32)) * math.exp(-2 * abs(s.imag)) / abs(s) ** 2
    assert lhs <= 10 * C * M**2


# -- tail decay --------------------------------------------------------------

S_TAIL = [10.0, 14.0, 18.0, 22.0, 26.0, 30.0]


def test_tail_slope_gaussian_is_steep():
    assert tail_slope(_cases.bump(), S_TAIL) <= -10


def test_tail_slope_of_two_derivative_source():
    f = make_truncated_power(GridSpec(2, 1.0, 257), 0.6, 1)
    slope = tail_slope(f, S_TAIL)
    assert -3.5 <= slope <= -2.5
    # contract: at most -(4d - n) + 0.5
    assert slope <= -2 + 0.5


def test_tail_energy_nonincreasing():
    f = make_truncated_power(GridSpec(2, 1.0, 129), 0.6, 1)
    e = tail_energy(f, [4.0, 8.0, 12.0, 16.0])
    assert np.all(np.diff(e) < 0) and np.all(e > 0)


def test_tail_slope_preconditions():
    f = make_bump(GridSpec(2, 1.0, 33), None, SIGMA)
    with pytest.raises(ValueError):
        tail_slope(f, [1.0, 2.0, 3.0])
    with pytest.raises(ValueError):
        tail_slope(f, [4.0, 8.0, 12.0, 16.0])  # h = 1/16, so s h >= 1 at 16


# -- inversion ---------------------------------------------------------------

@pytest.fixture(scope="module")
def bump_samples_40():
    return direct_spectra(_cases.bump(), make_direction_set(2, 112), 40.0, 64)


def _rel_error(rec, f):
    return l2_norm(rec.with_values(rec.values - f.values)) / l2_norm(f)


def test_reconstruct_from_clean_samples(bump_samples_40):
    f = _cases.bump()
    errs = [_rel_error(reconstruct(bump_samples_40, s, f.spec), f) for s in (8.0, 16.0, 32.0, 40.0)]
    assert errs[-1] <= 1e-3
    assert errs[0] >= errs[1] >= errs[2] >= errs[3]


def test_reconstruct_zero_and_errors(bump_samples_40):
    spec = GridSpec(2, 1.0, 33)
    dirs = make_direction_set(2, 8)
    k, w = radial_rule(5.0, 8)
    zero = SpectralSamples(dirs, k, np.zeros((8, dirs.size), dtype=complex), 5.0, w)
    rec = reconstruct(zero, 5.0, spec)
    assert not np.any(rec.values) and rec.meta["kind"] == "reconstruction"
    with pytest.raises(ValueError):
        reconstruct(bump_samples_40, 41.0, _cases.bump().spec)
    with pytest.raises(ValueError):
        reconstruct(bump_samples_40, 10.0, GridSpec(3, 1.0, 9))
    with pytest.raises(ValueError):
        reconstruct(bump_samples_40, 0.0, spec)


def test_reconstruct_clips_to_ball(bump_samples_40):
    spec = GridSpec(2, 1.0, 33)
    rec = reconstruct(bump_samples_40, 8.0, spec)
    assert np.all(rec.values[spec.outside_mask()] == 0)


# -- export ------------------------------------------------------------------

def test_spectra_csv_round_trip():
    f = make_bump(GridSpec(2, 1.0, 33), [0.1, 0.0], SIGMA)
    s = direct_spectra(f, make_direction_set(2, 4), 3.0, 3)
    rows = list(csv.reader(io.StringIO(spectra_csv(s))))
    assert rows[0] == ["k", "direction", "xi_hat_1", "xi_hat_2", "re_fhat", "im_fhat"]
    assert len(rows) == 1 + 3 * 4
    last = rows[-1]
    assert float(last[0]) == s.freqs[-1] and int(last[1]) == 3
    assert complex(float(last[4]), float(last[5])) == s.vals[-1, -1]
