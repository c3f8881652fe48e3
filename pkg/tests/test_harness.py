import json
import math
from importlib import resources

import jsonschema
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from frac_boussinesq import harness as H
from frac_boussinesq.initial_data import euler_eigen, random_field, shear_velocity, single_block
from frac_boussinesq.solvers import IntegratorConfig, solve_boussinesq, solve_transport_diffusion
from frac_boussinesq.sources import SourceFunction
from frac_boussinesq.spectral import Grid, SpectralField, VectorField

SCHEMA = json.loads(resources.files("frac_boussinesq").joinpath("schemas/report.schema.json").read_text())
SMALL = H.EnsembleSpec(count=4, seed=3, n=64)
finite = st.floats(-1e6, 1e6, allow_nan=False)


# --- plumbing -------------------------------------------------------------------------

def test_safe_ratio_cases():
    assert H.safe_ratio(1.0, 2.0) == 0.5
    assert H.safe_ratio(0.0, 0.0) == 0.0
    assert H.safe_ratio(1e-20, 0.0, floor=1e-15) == 0.0
    assert H.safe_ratio(1.0, 0.0) == math.inf


@given(st.lists(finite, min_size=1), st.lists(finite, min_size=1))
def test_aggregate_monotone_under_union(a, b):
    A, U = H.aggregate(a), H.aggregate(a + b)
    assert U["min"] <= A["min"] and U["max"] >= A["max"]
    assert U["count"] == len(a) + len(b)
    assert A["min"] <= A["median"] <= A["max"]


def test_aggregate_nan_poisons():
    agg = H.aggregate([1.0, float("nan")])
    assert math.isnan(agg["max"]) and agg["count"] == 2


def test_aggregate_empty():
    assert H.aggregate([])["count"] == 0


@given(st.lists(finite, min_size=1), finite, finite)
def test_status_is_a_function_of_aggregates(vals, lo, hi):
    c = [H.Constraint("x", lower=min(lo, hi), upper=max(lo, hi))]
    agg = {"x": H.aggregate(vals)}
    status = H.decide_status(agg, c)
    inside = all(min(lo, hi) <= v <= max(lo, hi) for v in vals)
    assert status == (H.PASS if inside else H.FAIL)
    # shuffling the samples cannot change the verdict
    assert H.decide_status({"x": H.aggregate(list(reversed(vals)))}, c) == status


def test_status_precedence():
    c = [H.Constraint("x", upper=1.0)]
    bad = {"x": H.aggregate([math.inf]), "r": H.aggregate([5.0])}
    assert H.decide_status(bad, c, {"r": 1.0}) == H.FAIL
    noisy = {"x": H.aggregate([0.5]), "r": H.aggregate([5.0])}
    assert H.decide_status(noisy, c, {"r": 1.0}) == H.INCONCLUSIVE
    quiet = {"x": H.aggregate([0.5]), "r": H.aggregate([0.5])}
    assert H.decide_status(quiet, c, {"r": 1.0}) == H.PASS


def test_report_serialisation(tmp_path):
    rep = H.VerificationReport.build("demo", {"p": math.inf}, [{"v": 1.0}, {"v": math.inf}],
                                     [H.Constraint("v", upper=2.0)])
    d = rep.to_dict()
    assert rep.status == H.FAIL and d["hard_failure"] is True
    assert d["params"]["p"] is None  # non-finite values become null
    jsonschema.validate([d], SCHEMA)
    H.write_reports_json(tmp_path / "r.json", [rep])
    H.write_reports_csv(tmp_path / "r.csv", [rep])
    assert json.loads((tmp_path / "r.json").read_text())[0]["name"] == "demo"
    assert (tmp_path / "r.csv").read_text().splitlines() == ["check,v", "demo,1.0", "demo,inf"]


def test_ensemble_is_reproducible():
    a, b = SMALL.fields(), SMALL.fields()
    assert all(np.array_equal(x.coeffs, y.coeffs) for x, y in zip(a, b))
    assert not np.array_equal(a[0].coeffs, a[1].coeffs)


def test_ensemble_validation():
    with pytest.raises(ValueError):
        H.EnsembleSpec(count=0)
    with pytest.raises(ValueError):
        H.EnsembleSpec(n=48)


# --- ensemble checks ------------------------------------------------------------------

def test_almost_orthogonality_report():
    rep = H.check_almost_orthogonality(SMALL)
    assert rep.passed and rep.stat("relative_mass") <= 1e-12


def test_bernstein_sandwich_report():
    rep = H.check_bernstein_sandwich(SMALL, range(2, 5))
    assert rep.passed and rep.stat("C") < 10
    assert {r["family"] for r in rep.samples} == {"low_pass", "block_upper", "block_lower"}


@pytest.mark.parametrize("alpha", [1.1, 1.5, 2.0])
def test_generalized_bernstein_p2_floor(alpha):
    rep = H.check_generalized_bernstein(SMALL, alpha, 2.0, range(2, 5))
    assert rep.stat("ratio", "min") >= 0.75**alpha - 1e-9
    assert rep.fitted["analytic_floor"] == pytest.approx(0.75**alpha)


def test_generalized_bernstein_single_mode_ratio_one():
    # a single cosine at |k| = 2^j is its own block and |D|^a acts as 2^{ja}
    g = Grid(64)
    for j in (2, 3, 4):
        G = SpectralField.single_mode(g, 2**j, 0)
        vals = G.physical()
        for p in (1.5, 2.0, 3.0):
            dg = np.real(np.fft.ifft2(g.kmag**1.5 * G.coeffs)) * g.n**2
            ratio = np.sum(dg * H._signed_power(vals, p)) / (2 ** (1.5 * j) * np.sum(np.abs(vals) ** p))
            assert ratio == pytest.approx(1.0, rel=1e-12)


@pytest.mark.parametrize("p", [1.5, 3.0])
def test_generalized_bernstein_other_p(p):
    rep = H.check_generalized_bernstein(SMALL, 1.5, p, range(2, 5))
    assert rep.stat("ratio", "min") > 0.05


@pytest.mark.parametrize("alpha", [0.5, 1.0])
@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
def test_positivity_margins(alpha, p):
    rep = H.check_positivity_corollary(SMALL, alpha, p)
    assert rep.passed and rep.stat("margin", "min") >= -1e-8


def test_positivity_p2_identity_for_nonnegative_field():
    # for G >= 0 and p = 2 both sides are || |D|^{a/2} G ||_2^2
    g = Grid(64)
    G = random_field(g, 5) + SpectralField.constant(g, 1.0)
    assert np.min(G.physical()) >= 0
    lhs, rhs, margin = H.positivity_margin(G, 0.7, 2.0)
    assert abs(margin) < 1e-10


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
def test_positivity_single_mode(p):
    g = Grid(64)
    _, _, margin = H.positivity_margin(SpectralField.single_mode(g, 3, 2), 1.0, p)
    assert margin >= -1e-12


def test_positivity_rejects_p_one():
    with pytest.raises(ValueError):
        H.check_positivity_corollary(SMALL, 0.5, 1.0)


def test_semigroup_single_mode_is_exact():
    rep = H.check_semigroup_decay(SMALL, 2.0, math.inf, range(2, 5), single_mode=True)
    assert rep.name == "semigroup_decay_single_mode"
    assert max(abs(r["rate_ratio"] - 1) for r in rep.samples) < 1e-10
    assert max(abs(r["C"] - 1) for r in rep.samples) < 1e-10


def test_semigroup_p2_annulus_bounds():
    a = 1.5
    rep = H.check_semigroup_decay(SMALL, a, 2.0, range(2, 5))
    assert 0.75**a <= rep.stat("rate_ratio", "min") and rep.stat("rate_ratio") <= (8 / 3) ** a


def test_composition_linear_source():
    rep = H.check_composition(SMALL, SourceFunction.linear())
    assert rep.passed
    # F2 = theta, so ||F(theta)||_B = ||theta||_B and the bound is sharp
    assert rep.stat("C") == pytest.approx(1.0, rel=1e-12)


def test_run_check_dispatch():
    rep = H.run_check(H.CheckSpec("almost_orthogonality", SMALL, tolerance=1e-10))
    assert rep.params["tolerance"] == 1e-10
    with pytest.raises(ValueError):
        H.CheckSpec("nope")
    with pytest.raises(ValueError):
        H.CheckSpec("bernstein_sandwich", SMALL, {"q_range": range(2, 9)})


# --- trajectory checks -----------------------------------------------------------------

@pytest.fixture(scope="module")
def shear_run():
    g = Grid(64)
    return solve_transport_diffusion(random_field(g, 4), shear_velocity(g), None, 1.5,
                                     IntegratorConfig(dt=0.02, t_end=0.5))


@pytest.fixture(scope="module")
def bous_run():
    g = Grid(64)
    return solve_boussinesq(SpectralField.zeros(g), random_field(g, 6), SourceFunction.linear(), 1.5,
                            IntegratorConfig(dt=0.02, t_end=0.5))


def test_max_principle(shear_run):
    rep = H.check_max_principle(shear_run)
    assert rep.passed and rep.stat("identity_residual") <= 1e-6


def test_max_principle_forced_run_skips_identity():
    g = Grid(32)
    traj = solve_transport_diffusion(SpectralField.zeros(g), shear_velocity(g), single_block(g, 1), 1.5,
                                     IntegratorConfig(dt=0.05, t_end=0.3))
    rep = H.check_max_principle(traj)
    assert "identity_residual" not in rep.aggregates and rep.notes


@pytest.mark.parametrize("rho", [1.0, 2.0, math.inf])
def test_smoothing_lr(shear_run, rho):
    rep = H.check_smoothing_lr(shear_run, r=2.0, rho=rho)
    assert rep.passed and rep.stat("ratio") <= 20


def test_smoothing_lr_decay_only_case():
    g = Grid(64)
    traj = solve_transport_diffusion(single_block(g, 3), VectorField.constant(g, 0.0, 0.0), None, 1.5,
                                     IntegratorConfig(dt=0.02, t_end=0.3))
    rep = H.check_smoothing_lr(traj, r=2.0, rho=math.inf)
    assert rep.stat("ratio") <= 2 ** 1.5  # block constants only


def test_smoothing_lr_not_asserted_below_two(shear_run):
    rep = H.check_smoothing_lr(shear_run, r=1.5)
    assert rep.constraints == [] and rep.notes


def test_smoothing_linf(shear_run):
    rep = H.check_smoothing_linf(shear_run)
    assert rep.passed and rep.fitted["ratio_slope"] <= 0.1


def test_smoothing_linf_rejects_forcing():
    g = Grid(32)
    traj = solve_transport_diffusion(SpectralField.zeros(g), shear_velocity(g), single_block(g, 1), 1.5,
                                     IntegratorConfig(dt=0.05, t_end=0.1))
    with pytest.raises(ValueError):
        H.check_smoothing_linf(traj)


@pytest.mark.parametrize("s, gamma", [(0.5, False), (1.0, True)])
def test_besov_smoothing(shear_run, s, gamma):
    rep = H.check_besov_smoothing(shear_run, s)
    assert rep.passed and rep.fitted["gamma_included"] is gamma


def test_besov_smoothing_needs_dissipation():
    g = Grid(32)
    traj = solve_transport_diffusion(random_field(g, 1), shear_velocity(g), None, None,
                                     IntegratorConfig(dt=0.05, t_end=0.1))
    with pytest.raises(ValueError):
        H.check_besov_smoothing(traj, 0.5)


@pytest.mark.parametrize("level", [1, 2, 3])
def test_minimal_envelope_constant_is_tight(level):
    t = np.linspace(0, 1, 11)
    g = 1.0 + t**2
    C = H.minimal_envelope_constant(t, g, level)
    assert np.all(g <= H.envelope(C, t, level) * (1 + 1e-9))
    assert np.any(g > H.envelope(C * (1 - 1e-6), t, level))


def test_minimal_envelope_constant_non_finite():
    assert H.minimal_envelope_constant(np.array([0.0, 1.0]), np.array([1.0, math.inf]), 1) == math.inf


def test_cascade_on_boussinesq(bous_run):
    rep = H.track_apriori_cascade(bous_run)
    assert rep.passed
    assert rep.fitted["C0"] <= 50
    assert rep.fitted["C_double"] >= 0


def test_cascade_needs_boussinesq(shear_run):
    with pytest.raises(ValueError):
        H.track_apriori_cascade(shear_run)


def test_cascade_conservation_case():
    # theta0 = 0 leaves the Euler eigenfunction steady: vorticity norms stay put
    g = Grid(32)
    traj = solve_boussinesq(euler_eigen(g), SpectralField.zeros(g), SourceFunction.linear(), 1.5,
                            IntegratorConfig(dt=0.05, t_end=1.0))
    rep = H.track_apriori_cascade(traj)
    assert rep.passed
    w = [r["group1"] for r in rep.samples if "group1" in r]
    assert max(w) - min(w) <= 1e-6 * max(w)


def test_cascade_grows_with_amplitude():
    g = Grid(64)
    cfg = IntegratorConfig(dt=0.02, t_end=0.5)
    th = random_field(g, 6)
    c = [H.track_apriori_cascade(solve_boussinesq(SpectralField.zeros(g), th * a, SourceFunction.linear(),
                                                  1.5, cfg)).fitted["C0"] for a in (1.0, 2.0)]
    assert c[1] > c[0]


def test_transport_besov_zero_velocity():
    g = Grid(32)
    traj = solve_transport_diffusion(random_field(g, 2), VectorField.constant(g, 0.0, 0.0), None, None,
                                     IntegratorConfig(dt=0.05, t_end=0.3))
    rep = H.check_transport_besov(traj)
    assert rep.name == "transport_besov"
    assert rep.stat("ratio") == pytest.approx(1.0, rel=1e-12)


def test_transport_besov_shear(shear_run):
    rep = H.check_transport_besov(shear_run)
    assert rep.passed and rep.notes


def test_velocity_persistence_steady_state():
    g = Grid(32)
    traj = solve_boussinesq(euler_eigen(g), SpectralField.zeros(g), SourceFunction.linear(), 1.5,
                            IntegratorConfig(dt=0.05, t_end=1.0))
    rep = H.check_transport_besov(traj, H.BesovIndex(1.0, 2.0, 1.0))
    assert rep.name == "velocity_persistence"
    assert rep.passed and rep.stat("ratio") <= 1.0 + 1e-9


def test_suite_reports_are_schema_valid(shear_run, bous_run):
    reports = [H.check_max_principle(shear_run), H.check_smoothing_linf(shear_run),
               H.track_apriori_cascade(bous_run), H.check_almost_orthogonality(SMALL)]
    jsonschema.validate(json.loads(H.reports_to_json(reports)), SCHEMA)
