import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from inls_lab.core_model import Field, GridSpec, fourier, inverse_fourier, norm
from inls_lab.linear_ops import (
    check_L_factorization,
    dilation,
    free_propagate,
    inverse_square_operator,
    lambda_adjoint,
    lambda_constant,
    lambda_forward,
    mdfm_factorize,
    modulation,
    r_operator,
    rn_norm,
    self_similar_grid,
)
from inls_lab.scattering_lab import decay_fit


@pytest.fixture
def gauss_line():
    g = GridSpec("line1d", 20, 1024)
    return g.sample(lambda x: np.exp(-x**2))


def bump(x, radius=1.0):
    r = np.abs(x) / radius
    out = np.zeros_like(r)
    inside = r < 1
    out[inside] = np.exp(1 - 1 / (1 - r[inside] ** 2))
    return out


# -- modulation ------------------------------------------------------------

def test_modulation_keeps_modulus(gauss_line):
    m = modulation(3.0, gauss_line)
    assert np.allclose(np.abs(m.values), np.abs(gauss_line.values), rtol=1e-15, atol=0)


def test_modulation_inverse_phase(gauss_line):
    back = modulation(2.0, modulation(2.0, gauss_line, +1), -1)
    assert np.allclose(back.values, gauss_line.values, rtol=0, atol=1e-15)


def test_modulation_rejects_zero_time(gauss_line):
    with pytest.raises(ValueError):
        modulation(0, gauss_line)


@pytest.mark.parametrize("delta", [0.5, 1.0, 2.0])
@pytest.mark.parametrize("t", [1.0, 10.0, 100.0])
def test_modulation_minus_one_bound(delta, t, gauss_line):
    # |e^{i theta} - 1| <= 2^{1-delta/2} theta^{delta/2} with theta = x^2/4t
    const = 2 ** (1 - 1.5 * delta)
    lhs = norm(modulation(t, gauss_line) - gauss_line)
    weighted = gauss_line.like(gauss_line.grid.radius**delta * gauss_line.values)
    assert lhs <= const * t ** (-delta / 2) * norm(weighted) * (1 + 1e-12)


# -- dilation --------------------------------------------------------------

@pytest.mark.parametrize("kind", ["line1d", "radial2d", "radial3d"])
def test_dilation_half_is_phase(kind):
    g = GridSpec(kind, 10, 128)
    f = g.sample(lambda r: np.exp(-r**2))
    out = dilation(0.5, f)
    assert out.grid.same_nodes(g)
    assert np.allclose(out.values, (1j) ** (-g.dim / 2) * f.values, atol=1e-15)


@pytest.mark.parametrize("t", [0.3, 1.0, 4.0])
def test_dilation_preserves_l2(t):
    g = GridSpec("line1d", 30, 2048)
    f = g.sample(lambda x: x * np.exp(-x**2))
    assert norm(dilation(t, f)) == pytest.approx(norm(f), rel=1e-12)
    target = GridSpec("line1d", 40, 2048)
    assert norm(dilation(t, f, target)) == pytest.approx(norm(f), rel=1e-8)


@pytest.mark.parametrize("t", [0.25, 2.0, 8.0])
def test_dilation_sup_scaling(t):
    g = GridSpec("line1d", 20, 1024)
    f = g.sample(lambda x: np.exp(-x**2))
    out = dilation(t, f)
    assert norm(out, "lp", p=math.inf) == pytest.approx(abs(2 * t) ** -0.5 * norm(f, "lp", p=math.inf))


def test_dilation_overflow_rejected():
    g = GridSpec("line1d", 20, 512)
    f = g.sample(lambda x: np.exp(-((x / 3) ** 2)))
    with pytest.raises(ValueError):
        dilation(10.0, f, GridSpec("line1d", 20, 512))


# -- free flow -------------------------------------------------------------

@pytest.mark.parametrize("t", [0.1, 1.0, 3.0])
def test_free_gaussian_closed_form(t):
    g = GridSpec("line1d", 100, 8192)
    f = g.sample(lambda x: np.exp(-x**2))
    x = g.nodes
    exact = (1 + 4j * t) ** -0.5 * np.exp(-x**2 / (1 + 4j * t))
    assert np.max(np.abs(free_propagate(t, f).values - exact)) <= 1e-9


def test_free_zero_time(gauss_line):
    assert free_propagate(0.0, gauss_line) is gauss_line


@settings(max_examples=25, deadline=None)
@given(s=st.floats(-5, 5), t=st.floats(-5, 5))
def test_free_group_law(s, t):
    g = GridSpec("line1d", 20, 512)
    f = g.sample(lambda x: x * np.exp(-x**2) + 0.3j * np.exp(-(x - 1) ** 2))
    lhs = free_propagate(s, free_propagate(t, f))
    rhs = free_propagate(s + t, f)
    assert norm(lhs - rhs) <= 1e-12 * norm(f)


@settings(max_examples=25, deadline=None)
@given(t=st.floats(-100, 100), kind=st.sampled_from(["line1d", "radial2d", "radial3d"]))
def test_free_flow_unitary(t, kind):
    g = GridSpec(kind, 15, 256)
    f = g.sample(lambda r: np.exp(-r**2) * (1 + r))
    assert abs(norm(free_propagate(t, f)) - norm(f)) <= 1e-13 * norm(f)


# -- MDFM ------------------------------------------------------------------

def test_mdfm_matches_free_flow():
    g = GridSpec("line1d", 40, 4096)
    f = g.sample(lambda x: np.exp(-x**2))
    a = mdfm_factorize(1.0, f)
    b = free_propagate(1.0, f)
    assert norm(a - b) / norm(b) <= 1e-8


def test_mdfm_refinement():
    res = []
    for n in (128, 256, 512):
        g = GridSpec("line1d", 30, n)
        f = g.sample(lambda x: np.exp(-x**2))
        res.append(norm(mdfm_factorize(1.0, f) - free_propagate(1.0, f)))
    floor = 1e-14
    for coarse, fine in zip(res, res[1:]):
        assert fine <= coarse / 2 or fine < floor


def test_mdfm_zero_and_bad_time():
    g = GridSpec("line1d", 10, 128)
    z = Field(g, np.zeros(128))
    assert norm(mdfm_factorize(1.0, z)) == 0
    with pytest.raises(ValueError):
        mdfm_factorize(-1.0, z)


# -- R(t) ------------------------------------------------------------------

def test_r_zero():
    g = self_similar_grid(5.0, 256)
    assert norm(r_operator(5.0, Field(g, np.zeros(256)))) == 0


@settings(max_examples=20, deadline=None)
@given(t=st.floats(0.5, 50),
       coeffs=st.lists(st.complex_numbers(max_magnitude=2, allow_nan=False, allow_infinity=False),
                       min_size=4, max_size=4),
       width=st.floats(0.4, 1.2))
def test_r_forms_agree(t, coeffs, width):
    g = self_similar_grid(t, 4096)
    x = g.nodes
    vals = sum(c * (x / width) ** k for k, c in enumerate(coeffs)) * np.exp(-((x / width) ** 2))
    f = Field(g, vals)
    if norm(f) < 1e-8:
        return
    a = r_operator(t, f, "subtraction")
    b = r_operator(t, f, "composition")
    assert norm(a - b) <= 1e-10 * norm(f)


def test_r_decay_rate():
    ts = np.geomspace(10, 1e3, 9)
    errs = []
    for t in ts:
        g = self_similar_grid(t, 65536)
        f = g.sample(lambda x: bump(x, 1.0))
        errs.append(norm(r_operator(t, f)))
    assert decay_fit(list(zip(ts, errs))).slope <= -1.4 / 2


def test_r_bad_form():
    g = self_similar_grid(1.0, 64)
    with pytest.raises(ValueError):
        r_operator(1.0, Field(g, np.zeros(64)), "other")


# -- Lambda ----------------------------------------------------------------

def test_lambda_two_dims_identity():
    g = GridSpec("radial2d", 8, 128)
    f = g.sample(lambda r: np.exp(-r**2))
    assert lambda_constant(2) == pytest.approx(1.0)
    assert np.allclose(lambda_forward(2, f).values, f.values, rtol=1e-15)


def test_lambda_three_dims_multiplier():
    g = GridSpec("radial2d", 8, 128)
    f = g.sample(lambda r: np.exp(-r**2))
    assert lambda_constant(3) == pytest.approx(math.sqrt(2))
    expected = math.sqrt(2) * np.sqrt(g.nodes) * f.values
    assert np.allclose(lambda_forward(3, f).values, expected, rtol=1e-14)


@pytest.mark.parametrize("n", [2, 3, 4, 5])
def test_lambda_adjoint_inverts(n):
    g = GridSpec("radial2d", 8, 128)
    f = g.sample(lambda r: np.exp(-r**2) * (1 + 1j * r))
    back = lambda_adjoint(n, lambda_forward(n, f))
    assert np.allclose(back.values, f.values, rtol=1e-15, atol=0)


@pytest.mark.parametrize("n", [3, 4, 5])
def test_lambda_pairing(n):
    g = GridSpec("radial2d", 12, 512)
    f = g.sample(lambda r: r**2 * np.exp(-r**2))
    assert abs(norm(lambda_forward(n, f)) ** 2 - rn_norm(f, n) ** 2) <= 1e-8 * rn_norm(f, n) ** 2


def test_lambda_rejects_low_dimension():
    g = GridSpec("radial2d", 8, 64)
    with pytest.raises(ValueError):
        lambda_forward(1, g.sample(lambda r: r))


# -- inverse-square factorization ------------------------------------------

def annulus(r):
    return bump(r - 5.0, 2.0)


def test_factorization_annulus():
    g = GridSpec("radial2d", 10, 1024)
    assert check_L_factorization(3, g.sample(annulus)) <= 1e-6


def test_resonance_profile_is_annihilated():
    # f = r^{-1/2} on a plateau: L f = 0 there
    g = GridSpec("radial2d", 20, 1024)
    r = g.nodes

    def smooth_step(s):
        out = np.zeros_like(s)
        inside = (s > 0) & (s < 1)
        a = np.exp(-1 / np.where(inside, s, 1))
        b = np.exp(-1 / np.where(inside, 1 - s, 1))
        out[inside] = (a / (a + b))[inside]
        out[s >= 1] = 1
        return out

    cut = smooth_step((r - 3) / 2) * smooth_step((15 - r) / 2)
    f = Field(g, cut / np.sqrt(r))
    lf = inverse_square_operator(3, f).values
    flat = (r > 6) & (r < 12)
    assert np.max(np.abs(lf[flat])) <= 1e-6 * np.max(np.abs(f.values))


def test_factorization_zero():
    g = GridSpec("radial2d", 10, 128)
    assert check_L_factorization(3, Field(g, np.zeros(128))) == 0


def test_factorization_rejects_origin_mass():
    g = GridSpec("radial2d", 10, 256)
    with pytest.raises(ValueError):
        check_L_factorization(3, g.sample(lambda r: np.exp(-r**2)))
