import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from frac_boussinesq.initial_data import random_field, single_block
from frac_boussinesq.littlewood_paley import (
    DEFAULT_PARTITION,
    BesovIndex,
    DyadicPartition,
    TimeSeriesNorm,
    besov_norm,
    besov_profile_rows,
    block_norms,
    block_time_series,
    bony_decompose,
    chemin_lerner_norm,
    commutator,
    decompose,
    dyadic_block,
    low_pass,
    mixed_time_norm,
    smooth_step,
    time_norm,
    write_besov_csv,
)
from frac_boussinesq.spectral import Grid, SpectralField, VectorField, biot_savart, gradient, lp_norm

P = DEFAULT_PARTITION
seeds = st.integers(min_value=0, max_value=2**32 - 1)


# --- partition of unity ------------------------------------------------------

def test_chi_at_origin():
    assert P.chi(0.0) == 1.0


def test_phi_plus_chi_at_one():
    assert P.phi(1.0) + P.chi(1.0) == pytest.approx(1.0, abs=1e-15)


def test_phi_support():
    lo, hi = P.phi_support
    assert (lo, hi) == (0.75, 8.0 / 3.0)
    r = np.concatenate([np.linspace(0, lo, 200), np.linspace(hi, 10, 200)])
    assert np.max(np.abs(P.phi(r))) == 0.0


def test_telescoping_sum_at_two():
    total = P.chi(2.0) + sum(P.phi(2.0 / 2.0**q) for q in range(0, 40))
    assert abs(total - 1.0) <= 1e-12


@given(st.floats(0.0, 1e4))
def test_telescoping_sum_everywhere(r):
    total = P.chi(r) + sum(P.phi(r / 2.0**q) for q in range(0, 20))
    assert abs(total - 1.0) <= 1e-12


@given(st.floats(-5, 5))
def test_smooth_step_range_and_symmetry(t):
    s = float(smooth_step(t))
    assert 0.0 <= s <= 1.0
    assert s + float(smooth_step(1 - t)) == pytest.approx(1.0, abs=1e-15)


@pytest.mark.parametrize("n", [16, 64, 256])
def test_partition_defect_on_grid(n):
    assert P.partition_defect(Grid(n)) <= 1e-12


@pytest.mark.parametrize("n, expected", [(16, 2), (64, 4), (128, 5), (256, 6)])
def test_highest_block(n, expected):
    assert P.q_max(Grid(n)) == expected


def test_partition_radii_validated():
    with pytest.raises(ValueError):
        DyadicPartition(0.75, 2.0)


@given(st.floats(0.0, 50.0), st.integers(0, 6), st.integers(0, 6))
def test_rings_disjoint_unless_adjacent(r, p, q):
    if abs(p - q) >= 2:
        assert P.phi(r / 2.0**p) * P.phi(r / 2.0**q) == 0.0


# --- blocks ------------------------------------------------------------------

def test_block_keeps_mode_inside_ring(grid64):
    # |k| = 11 sits where phi(2^{-3} |k|) = 1
    f = SpectralField.single_mode(grid64, 11, 0)
    assert np.max(np.abs(dyadic_block(f, 3).coeffs - f.coeffs)) < 1e-15


def test_block_index_checked(grid64):
    with pytest.raises(ValueError):
        dyadic_block(random_field(grid64, 0), 5)


@given(seeds)
def test_almost_orthogonality(seed):
    g = Grid(64)
    f = random_field(g, seed)
    for p in P.q_range(g):
        for q in P.q_range(g):
            if abs(p - q) >= 2:
                assert np.max(np.abs(dyadic_block(dyadic_block(f, q), p).coeffs)) == 0.0


@given(seeds)
def test_reconstruction(seed):
    g = Grid(64)
    f = random_field(g, seed)
    rebuilt = decompose(f).reconstruct()
    assert lp_norm(rebuilt - f, 2) <= 1e-10 * lp_norm(f, 2)


def test_low_pass_constant(grid64):
    c = SpectralField.constant(grid64, 2.5)
    for q in range(0, 5):
        assert np.array_equal(low_pass(c, q).coeffs, c.coeffs)


def test_low_pass_negative_is_zero(grid64):
    assert np.max(np.abs(low_pass(random_field(grid64, 1), -1).coeffs)) == 0.0


@given(seeds, st.integers(0, 4))
def test_low_pass_equals_sum_of_lower_blocks(seed, q):
    g = Grid(64)
    f = random_field(g, seed)
    lower = sum((dyadic_block(f, p).coeffs for p in range(-1, q)), np.zeros((64, 64), complex))
    assert np.max(np.abs(low_pass(f, q).coeffs - lower)) <= 1e-10 * np.max(np.abs(f.coeffs))


def test_vector_blocks(grid64):
    v = biot_savart(random_field(grid64, 3))
    b = dyadic_block(v, 2)
    assert isinstance(b, VectorField)
    assert np.array_equal(b.u1.coeffs, dyadic_block(v.u1, 2).coeffs)


# --- paraproducts ------------------------------------------------------------

def test_paraproduct_with_constant(grid64):
    c = SpectralField.constant(grid64, 3.0)
    v = random_field(grid64, 4)
    t_cv, t_vc, r = bony_decompose(c, v)
    expect = (v - dyadic_block(v, -1) - dyadic_block(v, 0)) * 3.0
    assert lp_norm(t_cv - expect, np.inf) < 1e-12
    total = t_cv + t_vc + r
    assert lp_norm(total - v * 3.0, np.inf) < 1e-8


def test_paraproduct_symmetric(grid64):
    u = random_field(grid64, 5)
    t1, t2, _ = bony_decompose(u, u)
    assert np.max(np.abs(t1.coeffs - t2.coeffs)) < 1e-14


@given(seeds)
def test_paraproduct_reconstruction(seed):
    g = Grid(64)
    # band-limit to a third of the retained radius so the product is alias free
    u = random_field(g, seed, kmax=g.retained_radius / 2)
    v = random_field(g, seed + 1, kmax=g.retained_radius / 2)
    parts = bony_decompose(u, v)
    exact = SpectralField.from_physical(g, u.physical() * v.physical())
    resid = lp_norm(parts[0] + parts[1] + parts[2] - exact, 2)
    assert resid <= 1e-8 * lp_norm(exact, 2)


# --- Besov norms -------------------------------------------------------------

def test_besov_of_zero(grid64):
    assert besov_norm(SpectralField.zeros(grid64), BesovIndex(1.0, 2.0, 1.0)) == 0.0


@given(seeds)
def test_b0_22_equivalent_to_l2(seed):
    g = Grid(64)
    f = random_field(g, seed)
    ratio = besov_norm(f, BesovIndex(0.0, 2.0, 2.0)) / lp_norm(f, 2)
    assert 1 / 4 <= ratio <= 4


@pytest.mark.parametrize("q, s, p", [(2, 1.0, 2.0), (3, 0.5, np.inf), (4, -0.5, 4.0)])
def test_single_mode_besov_norm(q, s, p):
    g = Grid(128)
    # |k| in [4/3, 3/2] * 2^q is where phi(2^{-q} k) = 1: only block q is occupied
    inside = SpectralField.single_mode(g, math.ceil(4 / 3 * 2**q), 0)
    expected = 2.0 ** (q * s) * lp_norm(inside, p)
    assert besov_norm(inside, BesovIndex(s, p, 1.0)) == pytest.approx(expected, rel=1e-12)
    # |k| = 2^q straddles blocks q-1 and q: within the two-block overlap factor
    edge = SpectralField.single_mode(g, 2**q, 0)
    expected = 2.0 ** (q * s) * lp_norm(edge, p)
    got = besov_norm(edge, BesovIndex(s, p, 1.0))
    assert expected / 2 <= got <= 2 * expected


def test_besov_index_validation():
    with pytest.raises(ValueError):
        BesovIndex(0.0, 0.5, 1.0)
    with pytest.raises(ValueError):
        BesovIndex(0.0, 2.0, 0.0)


@given(seeds, st.floats(-1.0, 2.0), st.sampled_from([1.0, 2.0, math.inf]))
def test_besov_monotone_in_s_and_r(seed, s, r):
    g = Grid(32)
    f = random_field(g, seed)
    # raising s only raises weights on q >= 1, so compare mean-free fields with no q = -1, 0 mass
    hi = f - dyadic_block(f, -1) - dyadic_block(f, 0)
    assert besov_norm(hi, BesovIndex(s, 2, r)) <= besov_norm(hi, BesovIndex(s + 0.5, 2, r)) * (1 + 1e-12)
    assert besov_norm(f, BesovIndex(s, 2, 2.0)) <= besov_norm(f, BesovIndex(s, 2, 1.0)) * (1 + 1e-12)


def test_block_norms_layout(grid64):
    f = random_field(grid64, 9)
    norms = block_norms(f, 2.0)
    assert norms.shape == (P.q_max(grid64) + 2,)
    assert norms[2] == pytest.approx(lp_norm(dyadic_block(f, 1), 2), rel=1e-14)


def test_besov_csv(tmp_path, grid64):
    f = random_field(grid64, 9)
    idx = BesovIndex(1.0, 2.0, 2.0)
    write_besov_csv(tmp_path / "b.csv", f, idx)
    lines = (tmp_path / "b.csv").read_text().splitlines()
    assert lines[0] == "q,weighted_block_norm"
    assert len(lines) == 1 + len(besov_profile_rows(f, idx))


# --- time norms --------------------------------------------------------------

def test_time_constant_series(grid64):
    f = random_field(grid64, 7)
    times = np.linspace(0.0, 2.0, 9)
    idx = BesovIndex(0.5, 2.0, 1.0)
    series = block_time_series([f] * len(times), times, 2.0, rho=3.0)
    expect = 2.0 ** (1 / 3) * besov_norm(f, idx)
    assert chemin_lerner_norm(series, idx) == pytest.approx(expect, rel=1e-12)
    assert mixed_time_norm(series, idx) == pytest.approx(expect, rel=1e-12)


def test_single_block_series_norms_coincide(grid64):
    f = single_block(grid64, 3, seed=2)
    times = np.linspace(0.0, 1.0, 6)
    fields = [f * math.exp(-t) for t in times]
    idx = BesovIndex(1.0, 2.0, 1.0)
    series = block_time_series(fields, times, 2.0, rho=2.0)
    assert chemin_lerner_norm(series, idx) == pytest.approx(mixed_time_norm(series, idx), rel=1e-12)


@given(st.integers(0, 2**31), st.sampled_from([1.0, 2.0, 3.0, math.inf]))
def test_chemin_lerner_dominates_mixed_norm_for_r1(seed, rho):
    # Minkowski: with r = 1 the time norm inside the block sum is the larger one
    rng = np.random.default_rng(seed)
    values = rng.random((6, 8))
    times = np.linspace(0.0, 1.0, 8)
    series = TimeSeriesNorm(times, values, 2.0, rho)
    idx = BesovIndex(0.0, 2.0, 1.0)
    assert chemin_lerner_norm(series, idx) >= mixed_time_norm(series, idx) * (1 - 1e-12)


def test_time_norm_validation():
    with pytest.raises(ValueError):
        time_norm(np.ones(3), np.arange(3.0), 0.5)
    with pytest.raises(ValueError):
        TimeSeriesNorm(np.array([0.0, 0.0]), np.ones((2, 2)), 2.0)
    with pytest.raises(ValueError):
        TimeSeriesNorm(np.array([0.0, 1.0]), -np.ones((2, 2)), 2.0)


def test_series_p_mismatch(grid64):
    f = random_field(grid64, 7)
    series = block_time_series([f, f], [0.0, 1.0], 2.0)
    with pytest.raises(ValueError):
        chemin_lerner_norm(series, BesovIndex(0.0, 4.0, 1.0))


# --- commutator --------------------------------------------------------------

def test_commutator_constant_velocity(grid64):
    v = VectorField.constant(grid64, 0.7, -1.3)
    u = random_field(grid64, 3)
    for q in range(-1, 5):
        assert lp_norm(commutator(q, v, u), np.inf) < 1e-9


def test_commutator_requires_solenoidal(grid64):
    f = random_field(grid64, 3)
    with pytest.raises(ValueError):
        commutator(2, VectorField(f, f), f)


def test_commutator_bounded_by_velocity_gradient():
    g = Grid(128)
    v = biot_savart(random_field(g, 8, slope=3.0))
    u = random_field(g, 9)
    d1, d2 = gradient(v.u1).physical(), gradient(v.u2).physical()
    grad = np.sqrt(d1[0] ** 2 + d1[1] ** 2 + d2[0] ** 2 + d2[1] ** 2)
    bound = lp_norm(grad, 2.0, g) * lp_norm(u, np.inf)
    ratios = [lp_norm(commutator(q, v, u), 2.0) / bound for q in range(0, 6)]
    assert max(ratios) < 10
