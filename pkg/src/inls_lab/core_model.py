"""Equation parameters, grids, spectral transforms and norms.

Every field lives on a :class:`GridSpec`.  Three kinds are supported:

* ``line1d``   uniform nodes on [-L, L), exponential transform via FFT
* ``radial2d`` Bessel-zero nodes on (0, R), order-0 Hankel transform
* ``radial3d`` uniform nodes on (0, R), sine transform of r*u

All transforms are unitary for the discrete L^2 inner product defined by
``GridSpec.weights`` (physical side) and ``GridSpec.freq_weights``
(spectral side), with the continuous convention
``F f(xi) = (2 pi)^{-d/2} int exp(-i x.xi) f(x) dx``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import cached_property, lru_cache

import numpy as np
import scipy.fft as sfft
from scipy import special

CRITICAL_TOL = 1e-12
WINDOW_MARGIN = 1e-9
GRID_KINDS = ("line1d", "radial2d", "radial3d")
REGIMES = ("long_range", "short_range")


# --------------------------------------------------------------------------
# parameters

@dataclass(frozen=True)
class ModelParams:
    d: int
    alpha: float
    beta: float
    lam: float
    regime: str = "long_range"

    @property
    def criticality(self) -> float:
        """alpha*d/2 + beta, equal to 1 in the critical long-range case."""
        return self.alpha * self.d / 2 + self.beta


@dataclass(frozen=True)
class Window:
    """Interval of admissible exponents; lower end always open."""
    lo: float
    hi: float
    hi_closed: bool = False

    @property
    def empty(self) -> bool:
        return not self.hi - self.lo > 2 * WINDOW_MARGIN

    def __contains__(self, x: float) -> bool:
        if x <= self.lo + WINDOW_MARGIN:
            return False
        if self.hi_closed:
            return x <= self.hi + WINDOW_MARGIN
        return x < self.hi - WINDOW_MARGIN


@dataclass(frozen=True)
class DerivedExponents:
    s_c: float
    sigma: float
    beta_d: float
    theta_window: Window
    delta_window: Window
    lam: float = 0.0

    def mu_of_t(self, t):
        """Phase-rate mu(t) = (lambda/2) log t."""
        return 0.5 * self.lam * np.log(t)


@dataclass(frozen=True)
class ValidationReport:
    ok: bool
    violated: tuple
    checked: tuple
    derived: DerivedExponents | None = None


def beta_threshold(d: int) -> float:
    return min(d / 2, (d + 4 - d * math.sqrt(5)) / 4)


def _exponents(p: ModelParams) -> DerivedExponents:
    a, b, d = p.alpha, p.beta, p.d
    lower = d / 2 + b / a
    if a + 1 > d:
        delta = Window(lower, float(d), hi_closed=True)
    else:
        delta = Window(lower, a + 1.0)
    theta = Window(lower / 2, delta.hi / 2)
    return DerivedExponents(
        s_c=d / 2 - (2 - b) / a,
        sigma=a * d / 2 + b - 2,
        beta_d=beta_threshold(d),
        theta_window=theta,
        delta_window=delta,
        lam=p.lam,
    )


def _checks(p: ModelParams) -> list:
    a, b, d, lam = p.alpha, p.beta, p.d, p.lam
    crit = a * d / 2 + b
    checks = [("d in {1,2,3}", d in (1, 2, 3)), ("alpha > 0", a > 0)]
    if p.regime == "long_range":
        checks += [
            ("beta > 0", b > 0),
            ("beta < min(d/2, 1)", b < min(d / 2, 1)),
            ("d/2 + beta/alpha < alpha + 1", a > 0 and d / 2 + b / a < a + 1),
            ("alpha*d/2 + beta = 1", abs(crit - 1) <= CRITICAL_TOL),
        ]
    elif p.regime == "short_range":
        checks += [
            ("alpha <= 4/d", a <= 4 / d),
            ("beta >= 0", b >= 0),
            ("beta < min(2, d)", b < min(2, d)),
            ("alpha*d/2 + beta > 1", crit > 1 + CRITICAL_TOL),
            ("alpha*d/2 + beta <= 2", crit <= 2 + CRITICAL_TOL),
            ("lambda > 0", lam > 0),
        ]
    else:
        checks.append((f"regime in {REGIMES}", False))
    return checks


def validate_params(p: ModelParams) -> ValidationReport:
    values = (p.d, p.alpha, p.beta, p.lam)
    if not all(math.isfinite(float(v)) for v in values):
        return ValidationReport(False, ("finite parameters",), ("finite parameters",))
    checks = _checks(p)
    violated = tuple(name for name, good in checks if not good)
    names = tuple(name for name, _ in checks)
    derived = _exponents(p) if not violated else None
    return ValidationReport(not violated, violated, names, derived)


def derive_exponents(p: ModelParams) -> DerivedExponents:
    report = validate_params(p)
    if not report.ok:
        raise ValueError(f"invalid parameters: {', '.join(report.violated)}")
    return report.derived


def admissible_pair(d: int):
    pairs = {1: (4.0, math.inf), 2: (3.0, 6.0), 3: (2.0, 6.0)}
    if d not in pairs:
        raise ValueError(f"unsupported dimension d={d}")
    p, q = pairs[d]
    assert abs(2 / p - d * (0.5 - 1 / q)) < 1e-14
    return p, q


# --------------------------------------------------------------------------
# grids

@lru_cache(maxsize=8)
def _bessel_zeros(n: int):
    z = special.jn_zeros(0, n + 1)
    return z[:-1], z[-1]


@lru_cache(maxsize=4)
def _hankel_kernel(n: int) -> np.ndarray:
    """Symmetric orthogonal kernel of the quasi-discrete Hankel transform.

    The textbook kernel is orthogonal only to ~1e-12; its polar factor is
    used instead so that the transform is exactly unitary (mass drift of
    long radial runs would otherwise accumulate).
    """
    zeros, s = _bessel_zeros(n)
    j1 = np.abs(special.j1(zeros))
    kernel = 2 * special.j0(np.outer(zeros, zeros) / s) / (s * np.outer(j1, j1))
    u, _, vt = np.linalg.svd(kernel)
    polar = u @ vt
    polar = 0.5 * (polar + polar.T)
    polar.setflags(write=False)
    return polar


@dataclass(frozen=True)
class GridSpec:
    kind: str
    extent: float
    points: int

    def __post_init__(self):
        if self.kind not in GRID_KINDS:
            raise ValueError(f"unknown grid kind {self.kind!r}")
        if not self.extent > 0:
            raise ValueError("grid extent must be positive")
        if self.points < 4:
            raise ValueError("grid needs at least 4 points")
        if self.kind == "line1d" and self.points & (self.points - 1):
            raise ValueError("line1d grids need a power-of-two point count")

    @property
    def dim(self) -> int:
        return {"line1d": 1, "radial2d": 2, "radial3d": 3}[self.kind]

    @cached_property
    def nodes(self) -> np.ndarray:
        n, ext = self.points, self.extent
        if self.kind == "line1d":
            h = 2 * ext / n
            x = (np.arange(n) - n // 2) * h
        elif self.kind == "radial2d":
            zeros, s = _bessel_zeros(n)
            x = zeros * ext / s
        else:
            x = np.arange(1, n + 1) * ext / (n + 1)
        x.setflags(write=False)
        return x

    @cached_property
    def freqs(self) -> np.ndarray:
        n, ext = self.points, self.extent
        if self.kind == "line1d":
            k = (np.arange(n) - n // 2) * (math.pi / ext)
        elif self.kind == "radial2d":
            zeros, _ = _bessel_zeros(n)
            k = zeros / ext
        else:
            k = np.arange(1, n + 1) * (math.pi / ext)
        k.setflags(write=False)
        return k

    @cached_property
    def spacing(self) -> float:
        if self.kind == "line1d":
            return 2 * self.extent / self.points
        if self.kind == "radial3d":
            return self.extent / (self.points + 1)
        return float(self.nodes[1] - self.nodes[0])

    @cached_property
    def radius(self) -> np.ndarray:
        return np.abs(self.nodes)

    @cached_property
    def clamped_radius(self) -> np.ndarray:
        """|x| with values below half a grid spacing raised to that floor."""
        r = np.maximum(self.radius, 0.5 * self.spacing)
        r.setflags(write=False)
        return r

    @cached_property
    def weights(self) -> np.ndarray:
        return self._weights(self.nodes, physical=True)

    @cached_property
    def freq_weights(self) -> np.ndarray:
        return self._weights(self.freqs, physical=False)

    def _weights(self, pts, physical: bool) -> np.ndarray:
        n = self.points
        if self.kind == "line1d":
            step = self.spacing if physical else math.pi / self.extent
            w = np.full(n, step)
        elif self.kind == "radial2d":
            zeros, s = _bessel_zeros(n)
            j1sq = special.j1(zeros) ** 2
            scale = self.extent if physical else s / self.extent
            w = 4 * math.pi * scale**2 / (s**2 * j1sq)
        else:
            step = self.spacing if physical else math.pi / self.extent
            w = 4 * math.pi * pts**2 * step
        w.setflags(write=False)
        return w

    @cached_property
    def eigenvalues(self) -> np.ndarray:
        """|xi|^2 per spectral mode: minus the Laplacian's symbol."""
        e = self.freqs**2
        e.setflags(write=False)
        return e

    def dual(self) -> "GridSpec":
        """Grid whose nodes are this grid's frequencies (and vice versa)."""
        n = self.points
        if self.kind == "line1d":
            ext = n * math.pi / (2 * self.extent)
        elif self.kind == "radial2d":
            ext = _bessel_zeros(n)[1] / self.extent
        else:
            ext = (n + 1) * math.pi / self.extent
        return GridSpec(self.kind, ext, n)

    def scaled(self, factor: float) -> "GridSpec":
        """Same grid with every node multiplied by |factor|."""
        return replace(self, extent=self.extent * abs(factor))

    def same_nodes(self, other: "GridSpec", rtol: float = 1e-12) -> bool:
        return (
            self.kind == other.kind
            and self.points == other.points
            and abs(self.extent - other.extent) <= rtol * self.extent
        )

    @property
    def measure(self) -> float:
        """Lebesgue measure of the truncated domain."""
        if self.kind == "line1d":
            return 2 * self.extent
        if self.kind == "radial2d":
            return math.pi * self.extent**2
        return 4 * math.pi * self.extent**3 / 3

    def sample(self, func) -> "Field":
        return Field(self, np.asarray(func(self.nodes), dtype=complex))


# --------------------------------------------------------------------------
# fields

@dataclass(frozen=True, eq=False)
class Field:
    grid: GridSpec
    values: np.ndarray
    space: str = "physical"

    def __post_init__(self):
        vals = np.array(self.values, dtype=complex, copy=True).reshape(-1)
        if vals.size != self.grid.points:
            raise ValueError(
                f"field has {vals.size} values but grid has {self.grid.points} points"
            )
        if self.space not in ("physical", "spectral"):
            raise ValueError(f"unknown space {self.space!r}")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    def like(self, values, grid: GridSpec | None = None) -> "Field":
        return Field(grid or self.grid, values, self.space)

    @property
    def weights(self) -> np.ndarray:
        return self.grid.weights if self.space == "physical" else self.grid.freq_weights

    @property
    def points(self) -> np.ndarray:
        return self.grid.nodes if self.space == "physical" else self.grid.freqs

    def inner(self, other: "Field") -> complex:
        _same_layout(self, other)
        return complex(np.sum(self.weights * np.conj(self.values) * other.values))

    def __add__(self, other: "Field") -> "Field":
        _same_layout(self, other)
        return self.like(self.values + other.values)

    def __sub__(self, other: "Field") -> "Field":
        _same_layout(self, other)
        return self.like(self.values - other.values)

    def __mul__(self, c) -> "Field":
        return self.like(self.values * c)

    __rmul__ = __mul__

    def conj(self) -> "Field":
        return self.like(np.conj(self.values))


def _same_layout(a: Field, b: Field):
    if a.space != b.space or not a.grid.same_nodes(b.grid):
        raise ValueError("fields live on different grids or spaces")


def zero_field(grid: GridSpec) -> Field:
    return Field(grid, np.zeros(grid.points, complex))


# --------------------------------------------------------------------------
# spectral transforms

def _line_scale(grid: GridSpec) -> float:
    return math.sqrt(grid.spacing / (math.pi / grid.extent))


def spectral_forward(f: Field) -> Field:
    if f.space != "physical":
        raise ValueError("spectral_forward expects a physical-space field")
    g = f.grid
    if g.kind == "line1d":
        out = sfft.fftshift(sfft.fft(sfft.ifftshift(f.values), norm="ortho"))
        out = out * _line_scale(g)
    elif g.kind == "radial2d":
        a = np.sqrt(g.weights) * f.values
        out = (_hankel_kernel(g.points) @ a) / np.sqrt(g.freq_weights)
    else:
        dk = math.pi / g.extent
        rv = g.nodes * f.values
        out = math.sqrt(g.spacing / dk) * _dst(rv) / g.freqs
    return Field(g, out, "spectral")


def spectral_inverse(f: Field) -> Field:
    if f.space != "spectral":
        raise ValueError("spectral_inverse expects a spectral-space field")
    g = f.grid
    if g.kind == "line1d":
        out = sfft.fftshift(sfft.ifft(sfft.ifftshift(f.values), norm="ortho"))
        out = out / _line_scale(g)
    elif g.kind == "radial2d":
        b = np.sqrt(g.freq_weights) * f.values
        out = (_hankel_kernel(g.points) @ b) / np.sqrt(g.weights)
    else:
        dk = math.pi / g.extent
        rv = math.sqrt(dk / g.spacing) * _dst(g.freqs * f.values)
        out = rv / g.nodes
    return Field(g, out, "physical")


def _dst(x: np.ndarray) -> np.ndarray:
    return sfft.dst(x.real, type=1, norm="ortho") + 1j * sfft.dst(x.imag, type=1, norm="ortho")


def fourier(f: Field) -> Field:
    """F f as a physical-space field on the dual grid."""
    s = spectral_forward(f)
    return Field(f.grid.dual(), s.values)


def inverse_fourier(f: Field) -> Field:
    """F^{-1} f, with f read as a function of the frequency variable."""
    s = Field(f.grid.dual(), f.values, "spectral")
    return spectral_inverse(s)


def apply_multiplier(f: Field, symbol) -> Field:
    """Apply a radial Fourier multiplier symbol(|xi|) to a physical field."""
    s = spectral_forward(f)
    return spectral_inverse(s.like(s.values * symbol(np.abs(f.grid.freqs))))


# --------------------------------------------------------------------------
# band-limited evaluation off the grid

def evaluate_at(f: Field, points, chunk: int = 512) -> np.ndarray:
    """Evaluate the band-limited interpolant of ``f`` at arbitrary points.

    Points outside the grid's domain evaluate to zero.
    """
    g = f.grid
    pts = np.asarray(points, dtype=float)
    s = spectral_forward(f).values
    out = np.zeros(pts.shape, complex)
    flat = pts.reshape(-1)
    res = out.reshape(-1)
    if g.kind == "line1d":
        inside = (flat >= -g.extent) & (flat < g.extent)
        coef = s * (math.pi / g.extent) / math.sqrt(2 * math.pi)
        kern = lambda y: np.exp(1j * np.outer(y, g.freqs))
    elif g.kind == "radial2d":
        inside = np.abs(flat) < g.extent
        coef = s * g.freq_weights / (2 * math.pi)
        kern = lambda y: special.j0(np.outer(np.abs(y), g.freqs))
    else:
        inside = np.abs(flat) < g.extent
        dk = math.pi / g.extent
        coef = s * g.freqs * dk * math.sqrt(2 / math.pi)
        kern = lambda y: _sinc_kernel(np.abs(y), g.freqs)
    idx = np.nonzero(inside)[0]
    for start in range(0, idx.size, chunk):
        sel = idx[start:start + chunk]
        res[sel] = kern(flat[sel]) @ coef
    return out


def _sinc_kernel(r, k):
    rk = np.outer(r, k)
    safe = np.where(r > 0, r, 1.0)[:, None]
    body = np.sin(rk) / safe
    return np.where(r[:, None] > 0, body, k[None, :])


def resample(f: Field, target: GridSpec) -> Field:
    """Band-limited interpolation of ``f`` onto ``target``."""
    if f.grid.same_nodes(target):
        return Field(target, f.values)
    return Field(target, evaluate_at(f, target.nodes))


def mass_outside(f: Field, radius: float) -> float:
    """Fraction of the L^2 mass of f located at |x| >= radius."""
    dens = f.grid.weights * np.abs(f.values) ** 2
    total = dens.sum()
    if total == 0:
        return 0.0
    return float(dens[f.grid.radius >= radius].sum() / total)


def boundary_mass(f: Field, fraction: float = 0.1) -> float:
    """Relative mass in the outer ``fraction`` of the domain."""
    return mass_outside(f, (1 - fraction) * f.grid.extent)


# --------------------------------------------------------------------------
# norms

def norm(f: Field, kind: str = "l2", *, p: float | None = None,
         gamma: float | None = None, s: float | None = None) -> float:
    """Grid norms: l2, lp, sup_weighted, sobolev, homogeneous_sobolev."""
    vals = f.values
    if np.isnan(vals).any():
        raise ValueError("field contains NaN samples")
    if kind == "l2":
        return float(math.sqrt(np.sum(f.weights * np.abs(vals) ** 2)))
    if f.space != "physical":
        raise ValueError(f"norm kind {kind!r} expects a physical-space field")
    if kind == "lp":
        if p is None or p < 1:
            raise ValueError("lp norm needs p >= 1")
        if math.isinf(p):
            return float(np.max(np.abs(vals)))
        return float(np.sum(f.weights * np.abs(vals) ** p) ** (1 / p))
    if kind == "sup_weighted":
        gamma = 0.0 if gamma is None else gamma
        r = f.grid.radius
        keep = r > 0
        return float(np.max(r[keep] ** (-gamma) * np.abs(vals[keep])))
    if kind in ("sobolev", "homogeneous_sobolev"):
        if s is None or s < 0:
            raise ValueError("Sobolev norms need s >= 0")
        k = np.abs(f.grid.freqs)
        if kind == "sobolev":
            mult = (1 + k**2) ** (s / 2)
        else:
            mult = np.where(k > 0, k, 0.0) ** s if s > 0 else np.ones_like(k)
        spec = spectral_forward(f)
        return norm(spec.like(spec.values * mult), "l2")
    raise ValueError(f"unknown norm kind {kind!r}")


# --------------------------------------------------------------------------
# radial calculus

@lru_cache(maxsize=4)
def _hankel_derivative_matrix(n: int) -> np.ndarray:
    # d/dr of sum_m c_m J0(k_m r) at the nodes, in units where R = 1
    zeros, s = _bessel_zeros(n)
    j1sq = special.j1(zeros) ** 2
    wk = 4 * math.pi * s**2 / (s**2 * j1sq)  # spectral weights for R = 1
    r = zeros / s
    m = -(wk * zeros)[None, :] * special.j1(np.outer(r, zeros)) / (2 * math.pi)
    m.setflags(write=False)
    return m


def radial_derivative(f: Field) -> Field:
    """Spectrally exact d/dr of a radial (or, for line1d, any) field."""
    g = f.grid
    spec = spectral_forward(f).values
    if g.kind == "line1d":
        return spectral_inverse(Field(g, 1j * g.freqs * spec, "spectral"))
    if g.kind == "radial2d":
        # unit-radius matrix; f' carries units of F/R^3
        mat = _hankel_derivative_matrix(g.points)
        return Field(g, (mat @ spec) / g.extent**3)
    n, h = g.points, g.spacing
    dk = math.pi / g.extent
    coef = math.sqrt(2 / (n + 1)) * math.sqrt(dk / h) * g.freqs * spec
    v = math.sqrt(dk / h) * _dst(g.freqs * spec)
    dv = _cos_series(coef * g.freqs)
    r = g.nodes
    return Field(g, dv / r - v / r**2)


def _cos_series(c: np.ndarray) -> np.ndarray:
    # sum_m c_m cos(pi j m/(n+1)) for j = 1..n, via a type-1 DCT
    padded = np.concatenate([[0.0], c, [0.0]])
    re = sfft.dct(padded.real, type=1)
    im = sfft.dct(padded.imag, type=1)
    return 0.5 * (re + 1j * im)[1:-1]


def value_at_origin(f: Field) -> complex:
    """Band-limited value of a radial field at r = 0."""
    return complex(evaluate_at(f, np.array([0.0]))[0])


def _radial_integral(grid: GridSpec, integrand: np.ndarray, at_origin: float = 0.0) -> float:
    """int_0^R integrand(r) dr by the quadrature native to the grid."""
    if grid.kind == "line1d":
        return float(0.5 * grid.spacing * np.sum(integrand))
    if grid.kind == "radial2d":
        return float(np.sum(grid.weights / (2 * math.pi) * integrand / grid.nodes))
    return float(grid.spacing * (0.5 * at_origin + np.sum(integrand)))


def hardy_ratio(f: Field, n: int) -> float:
    """((n-2)^2/4) int |f|^2/|x|^2 over int |grad f|^2, both on R^n.

    ``f`` holds samples of a radial profile; on a line1d grid it must be
    even, and both halves are averaged.
    """
    if n < 3:
        raise ValueError("Hardy ratio needs n >= 3")
    g = f.grid
    r = g.radius
    df = radial_derivative(f).values
    origin = 0.0
    if n == 3 and g.kind == "radial3d":
        origin = abs(value_at_origin(f)) ** 2
    safe = np.where(r > 0, r, 1.0)
    num_int = np.where(r > 0, np.abs(f.values) ** 2 * safe ** (n - 3), 0.0)
    if n == 3 and g.kind == "line1d":
        num_int = np.abs(f.values) ** 2
    den_int = np.abs(df) ** 2 * r ** (n - 1)
    den = _radial_integral(g, den_int)
    if not den > 0:
        raise ValueError("field has zero Dirichlet energy")
    num = _radial_integral(g, num_int, at_origin=origin)
    return (n - 2) ** 2 / 4 * num / den


def sphere_area(n: int) -> float:
    return 2 * math.pi ** (n / 2) / math.gamma(n / 2)
