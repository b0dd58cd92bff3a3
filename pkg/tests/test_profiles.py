import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from inls_lab.core_model import Field, GridSpec, ModelParams, norm
from inls_lab.linear_ops import dilation, modulation
from inls_lab.profiles import (
    asymptotic_profile,
    asymptotic_profile_composed,
    datum_field,
    e_functionals,
    estimate_ratio,
    make_datum,
    phase_psi,
    scale_to_smallness,
    w_profile,
)

# E-functionals of the P1 datum, frozen from the first correct run
P1_E1 = 0.6505481973708679
P1_E2 = 0.853626033454736


def test_p1_datum_accepted(p1_datum):
    assert all(math.isfinite(v) for v in p1_datum.assumption_norms.values())
    assert p1_datum.theta == 0.42 and p1_datum.delta == 0.95


def test_theta_below_window_rejected(p1_params, p1_datum):
    with pytest.raises(ValueError, match="theta"):
        make_datum(p1_params, p1_datum.phi, 0.40, 0.95)


def test_delta_above_window_rejected(p1_params, p1_datum):
    with pytest.raises(ValueError, match="delta"):
        make_datum(p1_params, p1_datum.phi, 0.42, 1.5)


def test_zero_datum(p1_params, p1_grid):
    d = make_datum(p1_params, Field(p1_grid, np.zeros(p1_grid.points)), 0.42, 0.95)
    assert all(v == 0 for v in d.assumption_norms.values())
    e = e_functionals(p1_params, d)
    assert e.e1 == 0 and e.e2 == 0


# -- psi -------------------------------------------------------------------

def test_psi_of_zero(p1_params, p1_grid):
    assert np.all(phase_psi(p1_params, Field(p1_grid, np.zeros(p1_grid.points))).values == 0)


def test_psi_without_weight(p1_grid):
    p = ModelParams(1, 2, 0.0, 1.0, "short_range")
    phi = datum_field(p1_grid, "gauss")
    assert np.allclose(phase_psi(p, phi).values, np.abs(phi.values) ** 2, rtol=1e-15)


def test_psi_spot_values():
    p = ModelParams(2, 2 / 3, 1 / 3, 1.0)
    g = GridSpec("radial2d", 8, 256)
    phi = datum_field(g, "r_gauss")
    psi = phase_psi(p, phi).values
    for i in (3, 40, 90, 150, 200):
        r = g.nodes[i]
        assert psi[i] == pytest.approx(r ** (-1 / 3) * (r * math.exp(-r * r)) ** (2 / 3), rel=1e-13)


# -- w and u_ap ------------------------------------------------------------

def test_w_at_time_one_is_phi(p1_datum):
    assert np.array_equal(w_profile(1.0, p1_datum).values, p1_datum.phi.values)


def test_w_without_coupling(p1_datum, p1_params):
    free = ModelParams(1, 1.2, 0.4, 0.0)
    for t in (0.5, 3.0, 1e4):
        assert np.array_equal(w_profile(t, p1_datum, free).values, p1_datum.phi.values)


def test_w_phase_at_e(p1_datum, p1_params):
    w = w_profile(math.e, p1_datum).values
    phi = p1_datum.phi.values
    psi = p1_datum.psi.values.real
    for i in (1500, 2000, 2100, 2300):
        ratio = w[i] / phi[i]
        assert cmath.phase(ratio) == pytest.approx(-0.5 * p1_params.lam * psi[i], abs=1e-13)


@settings(max_examples=20, deadline=None)
@given(t=st.floats(1e-3, 1e6))
def test_w_modulus(t, p1_datum):
    assert np.allclose(np.abs(w_profile(t, p1_datum).values), np.abs(p1_datum.phi.values),
                       rtol=1e-15, atol=0)


def test_w_rejects_nonpositive_time(p1_datum):
    with pytest.raises(ValueError):
        w_profile(0.0, p1_datum)


@pytest.mark.parametrize("t", [1.0, 10.0, 100.0, 1000.0])
def test_profile_mass_constant(t, p1_datum):
    assert norm(asymptotic_profile(t, p1_datum)) == pytest.approx(norm(p1_datum.phi), rel=1e-8)


def test_profile_without_coupling_is_free_type(p1_datum):
    free = ModelParams(1, 1.2, 0.4, 0.0)
    t = 5.0
    a = asymptotic_profile(t, p1_datum, free)
    b = modulation(t, dilation(t, p1_datum.phi))
    assert norm(a - b) <= 1e-14 * norm(b)


def test_profile_composition_with_interpolation(p1_params, p1_grid):
    # psi is smooth when phi vanishes to second order at the origin
    phi = scale_to_smallness(p1_params, datum_field(p1_grid, "r2_gauss"), 0.3)
    datum = make_datum(p1_params, phi, 0.42, 0.95)
    t = 7.3
    target = GridSpec("line1d", 160, 2**12)
    a = asymptotic_profile(t, datum, target=target)
    b = asymptotic_profile_composed(t, datum, target=target)
    assert norm(a - b) / norm(a) <= 1e-8


def test_profile_composition_converges_for_cusped_psi(p1_params):
    # x e^{-x^2} gives psi ~ |x|^0.8: the two routes agree only up to interpolation error
    target = GridSpec("line1d", 160, 2**12)
    gaps = []
    for n in (4096, 8192):
        g = GridSpec("line1d", 40, n)
        phi = scale_to_smallness(p1_params, datum_field(g, "x_gauss"), 0.3)
        datum = make_datum(p1_params, phi, 0.42, 0.95)
        a = asymptotic_profile(7.3, datum, target=target)
        gaps.append(norm(a - asymptotic_profile_composed(7.3, datum, target=target)) / norm(a))
    assert gaps[1] < gaps[0] / 3


def test_profile_rejects_nonpositive_time(p1_datum):
    with pytest.raises(ValueError):
        asymptotic_profile(-1.0, p1_datum)


@settings(max_examples=15, deadline=None)
@given(c=st.floats(-math.pi, math.pi))
def test_gauge_covariance(c, p1_params, p1_datum):
    rot = make_datum(p1_params, p1_datum.phi * cmath.exp(1j * c), 0.42, 0.95)
    assert np.allclose(rot.psi.values, p1_datum.psi.values, rtol=1e-13)
    t = 12.0
    a = asymptotic_profile(t, rot)
    b = asymptotic_profile(t, p1_datum) * cmath.exp(1j * c)
    assert norm(a - b) <= 1e-13 * norm(b)
    e0, e1 = e_functionals(p1_params, p1_datum), e_functionals(p1_params, rot)
    assert e1.e1 == pytest.approx(e0.e1, rel=1e-12)
    assert e1.e2 == pytest.approx(e0.e2, rel=1e-12)
    for mu in (0.0, 3.0):
        r0, r1 = estimate_ratio(p1_params, p1_datum, mu), estimate_ratio(p1_params, rot, mu)
        assert r1["r_w"] == pytest.approx(r0["r_w"], rel=1e-12)
        assert r1["r_N"] == pytest.approx(r0["r_N"], rel=1e-12)


# -- E-functionals ---------------------------------------------------------

def test_p1_baselines(p1_params, p1_datum):
    e = e_functionals(p1_params, p1_datum)
    assert e.s is None
    assert e.e1 == pytest.approx(P1_E1, rel=1e-10)
    assert e.e2 == pytest.approx(P1_E2, rel=1e-10)


def test_p1_e1_against_closed_form(p1_datum):
    # phi = a x e^{-x^2}: |phi_hat|^2 = a^2 xi^2 e^{-xi^2/2} / 8
    x = p1_datum.phi.grid.nodes
    i = np.argmax(np.abs(p1_datum.phi.values))
    a = p1_datum.phi.values[i].real / (x[i] * math.exp(-x[i] ** 2))
    val = quad(lambda k: (1 + k * k) ** 0.95 * a * a * k * k * math.exp(-k * k / 2) / 8,
               -np.inf, np.inf)[0]
    assert P1_E1 == pytest.approx(math.sqrt(val), rel=1e-8)


def test_radial_branch_sets_s(radial_params, radial_datum):
    e = e_functionals(radial_params, radial_datum)
    assert e.s == pytest.approx(0.5 * (1 + 0.6 / (2 / 3)))
    assert e.e1 > 0 and e.e2 > 0


def test_sup_term_homogeneity(p1_params, p1_datum):
    phi = p1_datum.phi
    d1 = make_datum(p1_params, phi, 0.42, 0.95, check_windows=False)
    d2 = make_datum(p1_params, phi * 2, 0.42, 0.95, check_windows=False)
    e1, e2 = e_functionals(p1_params, d1), e_functionals(p1_params, d2)
    sup1 = norm(phi.like(phi.grid.clamped_radius ** (-1 / 3) * phi.values), "lp", p=math.inf)
    # E2 = sup^a + sup^{a-1} |.|_{Hdot}: both pieces are degree-a homogeneous
    assert sup1 ** 1.2 * 2 ** 1.2 == pytest.approx((2 * sup1) ** 1.2)
    assert e2.e2 == pytest.approx(2 ** 1.2 * e1.e2, rel=1e-12)


def test_delta_half_rejected(p1_params, p1_datum):
    d = make_datum(p1_params, p1_datum.phi, 0.42, 0.5, check_windows=False)
    with pytest.raises(ValueError):
        e_functionals(p1_params, d)


# -- estimate ratios -------------------------------------------------------

def test_ratio_at_zero_mu(p1_params, p1_datum):
    r = estimate_ratio(p1_params, p1_datum, 0.0)
    assert r["r_w"] <= 1 + 1e-12


@settings(max_examples=15, deadline=None)
@given(mu=st.floats(0, 30))
def test_ratio_symmetric_in_mu(mu, p1_params, p1_datum):
    a = estimate_ratio(p1_params, p1_datum, mu)
    b = estimate_ratio(p1_params, p1_datum, -mu)
    assert a["r_w"] == pytest.approx(b["r_w"], rel=1e-10)
    assert a["r_N"] == pytest.approx(b["r_N"], rel=1e-10)


def test_ratio_sweep_finite(p1_params, p1_datum):
    vals = [estimate_ratio(p1_params, p1_datum, float(m)) for m in range(21)]
    assert all(math.isfinite(v["r_w"]) and math.isfinite(v["r_N"]) for v in vals)


@settings(max_examples=15, deadline=None)
@given(amp=st.floats(0.05, 0.3), scale=st.floats(0.6, 1.6), mu=st.floats(0, 20),
       family=st.sampled_from(["x_gauss", "r2_gauss"]))
def test_ratio_bounded_over_random_data(amp, scale, mu, family, p1_params, p1_grid):
    phi = scale_to_smallness(p1_params, datum_field(p1_grid, family, 1.0, scale), amp)
    d = make_datum(p1_params, phi, 0.42, 0.95)
    r0 = estimate_ratio(p1_params, d, 0.0)
    r = estimate_ratio(p1_params, d, mu)
    assert r["r_w"] <= 3 * r0["r_w"]
    assert r["r_N"] <= 3 * r0["r_N"]
