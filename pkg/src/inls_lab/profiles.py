"""Final-state data, the phase function psi, w(t), u_ap(t) and E1/E2."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core_model import (
    Field,
    GridSpec,
    ModelParams,
    derive_exponents,
    evaluate_at,
    norm,
)
from .linear_ops import dilation, dilation_prefactor, modulation

DATUM_FAMILIES = ("x_gauss", "r_gauss", "r2_gauss", "gauss", "bump")


def datum_field(grid: GridSpec, family: str, amplitude: float = 1.0, scale: float = 1.0) -> Field:
    """Sample a named datum family; ``scale`` is the support scale."""
    x = grid.nodes / scale
    r = np.abs(x)
    if family == "x_gauss":
        vals = x * np.exp(-(x**2))
    elif family == "r_gauss":
        vals = r * np.exp(-(r**2))
    elif family == "r2_gauss":
        vals = r**2 * np.exp(-(r**2))
    elif family == "gauss":
        vals = np.exp(-(r**2))
    elif family == "bump":
        inside = r < 1
        vals = np.zeros_like(r)
        vals[inside] = np.exp(1 - 1 / (1 - r[inside] ** 2))
    else:
        raise ValueError(f"unknown datum family {family!r}")
    return Field(grid, amplitude * vals)


def weighted_sup(params: ModelParams, phi: Field) -> float:
    return norm(phi, "sup_weighted", gamma=params.beta / params.alpha)


def scale_to_smallness(params: ModelParams, phi: Field, target: float = 0.3) -> Field:
    """Rescale phi so that sup |x|^{-beta/alpha}|phi| equals ``target``."""
    current = weighted_sup(params, phi)
    if current == 0:
        return phi
    return phi * (target / current)


def phase_psi(params: ModelParams, phi: Field) -> Field:
    """psi = |x|^{-beta}|phi|^alpha, with the radius clamped near the origin."""
    r = phi.grid.clamped_radius
    return phi.like(r ** (-params.beta) * np.abs(phi.values) ** params.alpha)


@dataclass(frozen=True, eq=False)
class ScatterDatum:
    phi: Field
    psi: Field
    params: ModelParams
    theta: float
    delta: float
    assumption_norms: dict = field(default_factory=dict)


@dataclass(frozen=True)
class EFunctionals:
    e1: float
    e2: float
    s: float | None = None


def _weighted(phi: Field, power: float) -> Field:
    return phi.like(phi.grid.clamped_radius ** (-power) * phi.values)


def assumption_norms(params: ModelParams, phi: Field, delta: float) -> dict:
    gamma = params.beta / params.alpha
    out = {f"sup |x|^-{gamma:.6g} phi": norm(phi, "sup_weighted", gamma=gamma)}
    if params.d == 1 and delta < 1:
        out[f"|x|^-{gamma:.6g} phi in Hdot^{delta:g}"] = norm(
            _weighted(phi, gamma), "homogeneous_sobolev", s=delta
        )
    else:
        out[f"|x|^-1 phi in H^{delta - 1:g}"] = norm(_weighted(phi, 1.0), "sobolev", s=delta - 1)
    return out


def make_datum(params: ModelParams, phi: Field, theta: float, delta: float,
               check_windows: bool = True) -> ScatterDatum:
    exps = derive_exponents(params)
    if phi.space != "physical":
        raise ValueError("datum must be a physical-space field")
    if check_windows:
        lower = params.d / 2 + params.beta / params.alpha
        if theta not in exps.theta_window:
            raise ValueError(
                f"theta={theta} outside ({exps.theta_window.lo:.6g}, {exps.theta_window.hi:.6g}); "
                f"2*theta must exceed d/2+beta/alpha={lower:.6g}"
            )
        if delta not in exps.delta_window or not 2 * theta < delta:
            raise ValueError(
                f"delta={delta} must satisfy 2*theta < delta in "
                f"({exps.delta_window.lo:.6g}, {exps.delta_window.hi:.6g})"
            )
    norms = assumption_norms(params, phi, delta)
    for name, value in norms.items():
        if not math.isfinite(value):
            raise ValueError(f"assumption norm {name} is not finite")
    return ScatterDatum(phi, phase_psi(params, phi), params, theta, delta, norms)


def w_profile(t: float, datum: ScatterDatum, params: ModelParams | None = None) -> Field:
    """w(t) = phi exp(-(i/2) lambda psi log t)."""
    if t <= 0:
        raise ValueError("w_profile needs t > 0")
    params = params or datum.params
    phase = np.exp(-0.5j * params.lam * datum.psi.values.real * math.log(t))
    return datum.phi.like(datum.phi.values * phase)


def asymptotic_profile(t: float, datum: ScatterDatum, params: ModelParams | None = None,
                       target: GridSpec | None = None) -> Field:
    """u_ap(t) evaluated directly from its closed form.

    Default output grid is the datum grid scaled by 2t, where phi(x/2t)
    is read off the samples without interpolation.
    """
    if t <= 0:
        raise ValueError("asymptotic_profile needs t > 0")
    params = params or datum.params
    g = datum.phi.grid
    if target is None or target.same_nodes(g.scaled(2 * t)):
        target = g.scaled(2 * t) if target is None else target
        y = g.nodes
        phi_y = datum.phi.values
    else:
        y = target.nodes / (2 * t)
        phi_y = evaluate_at(datum.phi, y)
    ry = np.maximum(np.abs(y), 0.5 * g.spacing)
    psi_y = ry ** (-params.beta) * np.abs(phi_y) ** params.alpha
    x = target.radius
    phase = x**2 / (4 * t) - 0.5 * params.lam * psi_y * math.log(t)
    return Field(target, dilation_prefactor(t, g.dim) * phi_y * np.exp(1j * phase))


def asymptotic_profile_composed(t: float, datum: ScatterDatum, params: ModelParams | None = None,
                                target: GridSpec | None = None) -> Field:
    """M(t) D(t) w(t): the operator route to u_ap(t)."""
    return modulation(t, dilation(t, w_profile(t, datum, params), target))


def lens_profile(tau: float, datum: ScatterDatum, params: ModelParams | None = None) -> Field:
    """Image of u_ap(1/4tau) under the lens transform: conj(phi) e^{i mu psi}.

    The dilations cancel, so this lives on the datum grid itself.
    """
    params = params or datum.params
    mu = 0.5 * params.lam * math.log(1 / (4 * tau))
    phi = datum.phi
    return phi.like(np.conj(phi.values) * np.exp(1j * mu * datum.psi.values.real))


# --------------------------------------------------------------------------
# E-functionals

def e_functionals(params: ModelParams, datum: ScatterDatum) -> EFunctionals:
    delta = datum.delta
    if delta <= 0.5:
        raise ValueError("E-functionals need delta > 1/2")
    phi = datum.phi
    a, b = params.alpha, params.beta
    weighted = _weighted(phi, b / a)
    sup = norm(weighted, "lp", p=math.inf)
    if delta < 1:
        e1 = norm(phi, "sobolev", s=delta)
        hom = norm(weighted, "homogeneous_sobolev", s=delta)
        e2 = sup**a + (sup ** (a - 1) * hom if sup > 0 else 0.0)
        return EFunctionals(e1, e2, None)
    s = 0.5 * (1 + (delta - 1) / a)
    e1 = norm(phi, "sobolev", s=delta) + abs(b) * norm(_weighted(phi, 1.0), "sobolev", s=delta - 1)
    expo = (delta - 1) / s
    e2 = sup**a + (sup ** (a - expo) * e1**expo if sup > 0 else 0.0)
    return EFunctionals(e1, e2, s)


def estimate_ratio(params: ModelParams, datum: ScatterDatum, mu: float,
                   funcs: EFunctionals | None = None) -> dict:
    """Ratios of the twisted-profile norms to their E1/E2 bounds.

    The bound's power of (1 + |mu| E2) is 1 in d=1 and 2 in d=2,3; the
    nonlinear bound uses <mu> = sqrt(1+mu^2) in d=2,3.
    """
    funcs = funcs or e_functionals(params, datum)
    phi, psi = datum.phi, datum.psi.values.real
    twist = np.exp(1j * mu * psi)
    num_w = norm(phi.like(phi.values * twist), "sobolev", s=datum.delta)
    nonlin = params.lam * psi * phi.values
    num_n = norm(phi.like(nonlin * twist), "sobolev", s=datum.delta)
    if params.d == 1:
        k, mu_n = 1, abs(mu)
    else:
        k, mu_n = 2, math.sqrt(1 + mu**2)
    den_w = funcs.e1 * (1 + abs(mu) * funcs.e2) ** k
    den_n = funcs.e1 * funcs.e2 * (1 + mu_n * funcs.e2) ** k
    if (den_w == 0 and num_w > 0) or (den_n == 0 and num_n > 0):
        raise ValueError("vanishing E-functional with nonzero numerator")
    r_w = num_w / den_w if den_w > 0 else 0.0
    r_n = num_n / den_n if den_n > 0 else 0.0
    return {"r_w": r_w, "r_N": r_n}
