"""Linear operator algebra: modulation, dilation, free flow, R(t), Lambda."""

from __future__ import annotations

import math

import numpy as np

from .core_model import (
    Field,
    GridSpec,
    evaluate_at,
    fourier,
    inverse_fourier,
    mass_outside,
    norm,
    radial_derivative,
    spectral_forward,
    spectral_inverse,
    sphere_area,
)

OVERFLOW_TOL = 1e-6


def _check_time(t, strict_positive=False):
    if t == 0 or (strict_positive and t <= 0):
        raise ValueError(f"invalid time t={t}")


def modulation(t: float, f: Field, sign: int = 1) -> Field:
    """Multiply by exp(sign * i|x|^2/4t)."""
    _check_time(t)
    phase = np.exp(sign * 1j * f.grid.radius**2 / (4 * t))
    return f.like(f.values * phase)


def dilation_prefactor(t: float, d: int) -> complex:
    return complex((2j * t) ** (-d / 2))


def dilation(t: float, f: Field, target: GridSpec | None = None) -> Field:
    """(2it)^{-d/2} f(x/2t).

    Without a target the samples are relabelled onto the grid scaled by
    2|t|, which is exact.  With a target grid the band-limited interpolant
    of ``f`` is evaluated at target_nodes/2t; mass of ``f`` that would land
    outside the target raises ``ValueError``.
    """
    _check_time(t)
    g = f.grid
    pref = dilation_prefactor(t, g.dim)
    natural = g.scaled(2 * t)
    if target is None or target.same_nodes(natural):
        vals = f.values
        if t < 0 and g.kind == "line1d":
            vals = _reflect(vals)
        return Field(natural if target is None else target, pref * vals)
    if target.kind != g.kind:
        raise ValueError("dilation cannot change the grid kind")
    lost = mass_outside(f, target.extent / (2 * abs(t)))
    if lost > OVERFLOW_TOL:
        raise ValueError(f"target grid too small: {lost:.2e} of the mass falls outside")
    vals = evaluate_at(f, target.nodes / (2 * t))
    return Field(target, pref * vals)


def _reflect(vals: np.ndarray) -> np.ndarray:
    # x -> -x on the grid (j - N/2)h: node 0 maps to itself, the rest reverse
    out = np.empty_like(vals)
    out[0] = vals[0]
    out[1:] = vals[1:][::-1]
    return out


def free_propagate(t: float, f: Field) -> Field:
    """e^{it Delta} f via the spectral multiplier exp(-it|xi|^2)."""
    if t == 0:
        return f
    s = spectral_forward(f)
    return spectral_inverse(s.like(s.values * np.exp(-1j * t * f.grid.eigenvalues)))


def mdfm_factorize(t: float, f: Field, target: GridSpec | None = None) -> Field:
    """M(t) D(t) F M(t) f, an independent route to e^{it Delta} f.

    The result lives on ``target`` (default: the input grid, reached by
    interpolating the smooth envelope before the final modulation).
    """
    _check_time(t, strict_positive=True)
    target = f.grid if target is None else target
    envelope = dilation(t, fourier(modulation(t, f)), target)
    return modulation(t, envelope)


def r_operator(t: float, g: Field, form: str = "subtraction") -> Field:
    """R(t) g on the grid where F^{-1} g lives (``g.grid.dual()``).

    ``subtraction``: e^{it Delta} F^{-1} g - M(t) D(t) g.
    ``composition``: M(t) D(t) F (M(t) - 1) F^{-1} g.
    """
    _check_time(t, strict_positive=True)
    out_grid = g.grid.dual()
    if form == "subtraction":
        propagated = free_propagate(t, inverse_fourier(g))
        profile = modulation(t, dilation(t, g, out_grid))
        return Field(out_grid, propagated.values - profile.values)
    if form == "composition":
        h = inverse_fourier(g)
        h = h.like(modulation(t, h).values - h.values)
        return modulation(t, dilation(t, fourier(h), out_grid))
    raise ValueError(f"unknown form {form!r}")


def self_similar_grid(t: float, points: int, kind: str = "line1d") -> GridSpec:
    """Grid Y with Y.dual() equal to Y scaled by 2t, so D(t) needs no interpolation."""
    if kind == "line1d":
        h = math.sqrt(math.pi / (t * points))
        return GridSpec(kind, points * h / 2, points)
    if kind == "radial2d":
        from .core_model import _bessel_zeros
        s = _bessel_zeros(points)[1]
        return GridSpec(kind, math.sqrt(s / (2 * t)), points)
    return GridSpec(kind, math.sqrt((points + 1) * math.pi / (2 * t)), points)


# --------------------------------------------------------------------------
# ground-state representation

def lambda_constant(n: int) -> float:
    """c_n = (2 pi)^{-1/2} |S^{n-1}|^{1/2}."""
    return math.sqrt(sphere_area(n) / (2 * math.pi))


def _check_radial_line(n: int, f: Field):
    if n < 2:
        raise ValueError("Lambda needs n >= 2")
    if f.grid.kind != "radial2d":
        raise ValueError("Lambda acts on samples over radial2d nodes")


def lambda_forward(n: int, f: Field) -> Field:
    """Lambda f = c_n r^{(n-2)/2} f, taking radial R^n samples to R^2."""
    _check_radial_line(n, f)
    r = f.grid.nodes
    return f.like(lambda_constant(n) * r ** ((n - 2) / 2) * f.values)


def lambda_adjoint(n: int, f: Field) -> Field:
    _check_radial_line(n, f)
    r = f.grid.nodes
    return f.like(f.values / (lambda_constant(n) * r ** ((n - 2) / 2)))


def rn_weights(grid: GridSpec, n: int) -> np.ndarray:
    """Quadrature weights for radial functions on R^n at radial2d nodes."""
    if grid.kind != "radial2d":
        raise ValueError("R^n weights are defined on radial2d nodes")
    return grid.weights * lambda_constant(n) ** 2 * grid.nodes ** (n - 2)


def rn_norm(f: Field, n: int) -> float:
    return float(math.sqrt(np.sum(rn_weights(f.grid, n) * np.abs(f.values) ** 2)))


def fd_weights(z: float, x: np.ndarray, m: int) -> np.ndarray:
    """Finite-difference weights on arbitrary nodes (Fornberg's recursion).

    Returns an array of shape (m+1, len(x)); row k holds the weights for
    the k-th derivative at z.
    """
    n = len(x)
    c = np.zeros((m + 1, n))
    c1, c4 = 1.0, x[0] - z
    c[0, 0] = 1.0
    for i in range(1, n):
        mn = min(i, m)
        c2, c5, c4 = 1.0, c4, x[i] - z
        for j in range(i):
            c3 = x[i] - x[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[k, i] = c1 * (k * c[k - 1, i - 1] - c5 * c[k, i - 1]) / c2
                c[0, i] = -c1 * c5 * c[0, i - 1] / c2
            for k in range(mn, 0, -1):
                c[k, j] = (c4 * c[k, j] - k * c[k - 1, j]) / c3
            c[0, j] = c4 * c[0, j] / c3
        c1 = c2
    return c


def _fd_radial_operator(n: int, f: Field, half_width: int = 5) -> np.ndarray:
    """-f'' - (n-1)/r f' - (n-2)^2/(4r^2) f by local polynomial stencils."""
    r = f.grid.nodes
    vals = f.values
    out = np.zeros_like(vals)
    for i in range(half_width, len(r) - half_width):
        sl = slice(i - half_width, i + half_width + 1)
        w = fd_weights(r[i], r[sl], 2)
        d1 = w[1] @ vals[sl]
        d2 = w[2] @ vals[sl]
        out[i] = -d2 - (n - 1) / r[i] * d1 - (n - 2) ** 2 / (4 * r[i] ** 2) * vals[i]
    return out


def inverse_square_operator(n: int, f: Field) -> Field:
    """-Lambda^* Delta_{R^2} Lambda f with the spectral radial Laplacian."""
    g = lambda_forward(n, f)
    s = spectral_forward(g)
    lap = spectral_inverse(s.like(-s.values * f.grid.eigenvalues))
    return lambda_adjoint(n, lap) * -1


def check_L_factorization(n: int, f: Field, inner: float = 0.1, outer: float = 0.9) -> float:
    """Relative L^2 mismatch of two discretizations of the inverse-square operator."""
    if n < 3:
        raise ValueError("factorization check needs n >= 3")
    r = f.grid.nodes
    if norm(f) == 0:
        return 0.0
    near = r < inner * f.grid.extent
    if np.sum(np.abs(f.values[near]) ** 2 * f.grid.weights[near]) > 1e-12 * norm(f) ** 2:
        raise ValueError("field carries mass near the origin")
    band = (r > inner * f.grid.extent) & (r < outer * f.grid.extent)
    fd = _fd_radial_operator(n, f)
    spec = inverse_square_operator(n, f).values
    w = rn_weights(f.grid, n)[band]
    den = math.sqrt(np.sum(w * np.abs(fd[band]) ** 2))
    num = math.sqrt(np.sum(w * np.abs(fd[band] - spec[band]) ** 2))
    return num / den if den > 0 else num

