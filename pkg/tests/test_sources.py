import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from frac_boussinesq.initial_data import (
    euler_eigen,
    gaussian_bump,
    random_block,
    random_field,
    shear_velocity,
    single_block,
)
from frac_boussinesq.littlewood_paley import DEFAULT_PARTITION, dyadic_block
from frac_boussinesq.solvers import evaluate_source
from frac_boussinesq.sources import MAX_ORDER, PolynomialMap, SineMap, SourceFunction, XCosMap
from frac_boussinesq.spectral import Grid, SpectralField, lp_norm

MAPS = [PolynomialMap((0.0, 1.0, -2.0, 0.5, 0.25)), SineMap(), XCosMap()]


# --- scalar maps ---------------------------------------------------------------

@pytest.mark.parametrize("fmap", MAPS, ids=["poly", "sin", "xcos"])
@pytest.mark.parametrize("order", range(1, MAX_ORDER + 1))
def test_derivatives_match_central_differences(fmap, order):
    x = np.linspace(-2.0, 2.0, 17)
    h = 1e-5
    fd = (fmap(x + h, order - 1) - fmap(x - h, order - 1)) / (2 * h)
    assert np.max(np.abs(fd - fmap(x, order))) <= 1e-6 * max(1.0, np.max(np.abs(fmap(x, order))))


@given(st.floats(-10, 10), st.integers(0, 3))
def test_xcos_closed_form(x, m):
    # derivatives of x cos x cycle with period four
    table = [x * math.cos(x), math.cos(x) - x * math.sin(x),
             -2 * math.sin(x) - x * math.cos(x), -3 * math.cos(x) + x * math.sin(x)]
    assert float(XCosMap()(x, m)) == pytest.approx(table[m], abs=1e-12)


@pytest.mark.parametrize("order", [-1, MAX_ORDER + 1])
def test_order_range(order):
    with pytest.raises(ValueError):
        SineMap()(0.0, order)


# --- source functions ------------------------------------------------------------

def test_presets_vanish_at_zero():
    for name in ("linear", "cubic", "sine"):
        F = SourceFunction.from_name(name)
        f1, f2 = F.evaluate(np.zeros(3))
        assert np.all(f1 == 0) and np.all(f2 == 0)


def test_nonzero_at_origin_rejected():
    with pytest.raises(ValueError, match="vanish"):
        SourceFunction.polynomial((1.0,), (0.0, 1.0))


def test_unknown_source_name():
    with pytest.raises(ValueError, match="unknown source"):
        SourceFunction.from_name("tanh")


def test_sup_derivative_cubic():
    F = SourceFunction.cubic()
    # F1'' = theta, F2'' = 0
    assert F.sup_derivative(2, 2.0) == pytest.approx(2.0)
    assert F.lipschitz(1.0) == pytest.approx(1.0)


def test_describe_is_plain_data():
    d = SourceFunction.cubic().describe()
    assert d["name"] == "cubic"
    assert d["F1"]["coeffs"] == [0.0, 0.0, 0.0, 1.0 / 6.0]


# --- evaluate_source ---------------------------------------------------------------

def test_vertical_buoyancy_of_horizontal_layering(grid32):
    _, x2 = grid32.coords
    theta = SpectralField.from_physical(grid32, np.sin(x2))
    out = evaluate_source(theta, SourceFunction.linear())
    assert lp_norm(out, np.inf) < 1e-14


def test_horizontal_source(grid32):
    _, x2 = grid32.coords
    theta = SpectralField.from_physical(grid32, np.sin(x2))
    F = SourceFunction.polynomial((0.0, 1.0), (0.0,))
    out = evaluate_source(theta, F)
    assert np.max(np.abs(out.physical() + np.cos(x2))) < 1e-13


def _fd4(vals, dx, axis):
    """Fourth-order periodic central difference."""
    r = lambda s: np.roll(vals, -s, axis=axis)  # noqa: E731
    return (-r(2) + 8 * r(1) - 8 * r(-1) + r(-2)) / (12 * dx)


def test_cubic_source_against_finite_differences():
    g = Grid(128)
    # smooth, low-band temperature so the cube stays inside the retained band
    theta = random_field(g, 17, slope=3.0, kmax=g.retained_radius / 3)
    vals = theta.physical()
    F = SourceFunction.polynomial((0.0,), (0.0, 0.0, 0.0, 1.0 / 6.0))
    out = evaluate_source(theta, F).physical()
    oracle = _fd4(vals**3 / 6.0, g.dx, axis=0)
    assert np.max(np.abs(out - oracle)) <= 1e-4


def test_source_requires_real_theta(grid32):
    c = np.zeros((32, 32), complex)
    c[1, 0] = 1.0
    with pytest.raises(ValueError):
        evaluate_source(SpectralField(grid32, c, real_flag=False), SourceFunction.linear())


# --- initial data --------------------------------------------------------------------

@given(st.integers(0, 2**32 - 1))
def test_random_field_properties(seed):
    g = Grid(32)
    f = random_field(g, seed)
    assert f.hermitian_defect() < 1e-12
    assert abs(f.mean) < 1e-15
    assert lp_norm(f, np.inf) == pytest.approx(1.0, rel=1e-12)
    assert np.all(f.coeffs[~g.dealias_mask] == 0)


def test_random_field_is_seeded(grid32):
    assert np.array_equal(random_field(grid32, 7).coeffs, random_field(grid32, 7).coeffs)
    assert not np.array_equal(random_field(grid32, 7).coeffs, random_field(grid32, 8).coeffs)


def test_single_block_lives_in_one_ring(grid64):
    f = single_block(grid64, 3, seed=1)
    resid = f - dyadic_block(f, 2) - dyadic_block(f, 3) - dyadic_block(f, 4)
    assert lp_norm(resid, 2) < 1e-13
    assert lp_norm(f, np.inf) == pytest.approx(1.0)
    lo, hi = DEFAULT_PARTITION.phi_support
    k = grid64.kmag[np.abs(f.coeffs) > 0]
    assert k.min() > lo * 8 and k.max() < hi * 8


def test_random_block_amplitude(grid64):
    assert lp_norm(random_block(grid64, 2, seed=3, amplitude=2.5), np.inf) == pytest.approx(2.5)


def test_euler_eigen_values(grid32):
    x1, x2 = grid32.coords
    assert np.max(np.abs(euler_eigen(grid32).physical() - np.sin(x1) * np.sin(x2))) < 1e-14


def test_gaussian_bump_peak(grid64):
    f = gaussian_bump(grid64, width=0.5)
    assert lp_norm(f, np.inf) == pytest.approx(1.0, abs=1e-3)


def test_shear_velocity(grid32):
    _, x2 = grid32.coords
    v = shear_velocity(grid32, 2.0)
    v1, v2 = v.physical()
    assert v.divergence_free
    assert np.max(np.abs(v1 - 2 * np.sin(x2))) < 1e-14
    assert np.max(np.abs(v2)) < 1e-14
