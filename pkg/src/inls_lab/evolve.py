"""Strang-split time stepping in the original and pseudo-conformal frames."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .core_model import Field, GridSpec, ModelParams, boundary_mass, spectral_forward, spectral_inverse
from .linear_ops import dilation, modulation

BOUNDARY_TOL = 1e-6


class SolverAbort(RuntimeError):
    """Raised when a run violates its mass or boundary tolerances."""

    def __init__(self, message, log=None, state=None):
        super().__init__(message)
        self.log = log
        self.state = state


@dataclass(frozen=True)
class EvolveControls:
    dt_rule: str = "log_spaced"
    dt: float = 1e-3
    steps_per_decade: int = 256
    tolerance: float = 1e-8
    boundary_tolerance: float = BOUNDARY_TOL
    frame: str = "original"

    def __post_init__(self):
        if self.dt_rule not in ("fixed", "log_spaced"):
            raise ValueError(f"unknown dt rule {self.dt_rule!r}")
        if self.dt_rule == "fixed" and not self.dt > 0:
            raise ValueError("fixed steps need dt > 0")
        if self.dt_rule == "log_spaced" and self.steps_per_decade < 16:
            raise ValueError("steps_per_decade must be at least 16")
        if self.frame not in ("original", "lens"):
            raise ValueError(f"unknown frame {self.frame!r}")


@dataclass
class ConservationLog:
    times: list = field(default_factory=list)
    mass: list = field(default_factory=list)
    energy: list = field(default_factory=list)
    boundary_mass: list = field(default_factory=list)
    steps: int = 0

    def record(self, t, mass, energy, bmass):
        self.times.append(float(t))
        self.mass.append(float(mass))
        self.energy.append(float(energy))
        self.boundary_mass.append(float(bmass))

    def extend(self, other: "ConservationLog"):
        skip = 1 if self.times and other.times and other.times[0] == self.times[-1] else 0
        self.times += other.times[skip:]
        self.mass += other.mass[skip:]
        self.energy += other.energy[skip:]
        self.boundary_mass += other.boundary_mass[skip:]
        self.steps += other.steps

    @property
    def mass_drift(self) -> float:
        if not self.mass or self.mass[0] == 0:
            return 0.0
        m = np.asarray(self.mass)
        return float(np.max(np.abs(m - m[0])) / m[0])

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "mass", "energy", "boundary_mass"])
            for row in zip(self.times, self.mass, self.energy, self.boundary_mass):
                w.writerow([repr(v) for v in row])


def _potential(grid: GridSpec, params: ModelParams) -> np.ndarray:
    return params.lam * grid.clamped_radius ** (-params.beta)


def _rotate(vals, pot, alpha, c_dt):
    return vals * np.exp(-1j * c_dt * pot * np.abs(vals) ** alpha)


def strang_step(state: Field, t: float, dt: float, params: ModelParams,
                coefficient: float = 1.0) -> Field:
    """One step of i u_t + Delta u = c N(u): half rotation, free flow, half rotation.

    ``t`` is unused by the step itself; time-dependent coefficients are
    supplied by the caller (already evaluated at the step midpoint).
    """
    pot = _potential(state.grid, params)
    half = 0.5 * coefficient * dt
    vals = _rotate(state.values, pot, params.alpha, half)
    s = spectral_forward(state.like(vals))
    s = s.like(s.values * np.exp(-1j * dt * state.grid.eigenvalues))
    vals = spectral_inverse(s).values
    return state.like(_rotate(vals, pot, params.alpha, half))


def energy(v: Field, t: float, params: ModelParams, sigma: float) -> float:
    """(2t)^{-sigma}/2 |grad v|^2 + lambda/(alpha+2) int |x|^{-beta}|v|^{alpha+2}."""
    s = spectral_forward(v)
    grad2 = float(np.sum(v.grid.freq_weights * v.grid.eigenvalues * np.abs(s.values) ** 2))
    pot = float(np.sum(v.grid.weights * _potential(v.grid, params)
                       * np.abs(v.values) ** (params.alpha + 2)))
    return (2 * t) ** (-sigma) * 0.5 * grad2 + pot / (params.alpha + 2)


def gradient_norm(v: Field) -> float:
    s = spectral_forward(v)
    return math.sqrt(float(np.sum(v.grid.freq_weights * v.grid.eigenvalues * np.abs(s.values) ** 2)))


def _mass(f: Field) -> float:
    return math.sqrt(float(np.sum(f.grid.weights * np.abs(f.values) ** 2)))


def time_nodes(t0: float, t1: float, controls: EvolveControls) -> np.ndarray:
    """Step boundaries from t0 to t1 (either direction) under the dt rule."""
    if t0 == t1:
        raise ValueError("empty time interval")
    if controls.dt_rule == "fixed":
        n = max(1, int(math.ceil(abs(t1 - t0) / controls.dt - 1e-9)))
        return np.linspace(t0, t1, n + 1)
    if t0 <= 0 or t1 <= 0:
        raise ValueError("log-spaced steps need positive times")
    n = max(1, int(math.ceil(controls.steps_per_decade * abs(math.log10(t1 / t0)) - 1e-9)))
    return np.geomspace(t0, t1, n + 1)


def _integrate(state, nodes, params, controls, coeff, sigma=None):
    log = ConservationLog()
    pot = _potential(state.grid, params)
    eig = state.grid.eigenvalues
    m0 = _mass(state)
    vals = state.values

    def snapshot(t, f):
        e = energy(f, t, params, sigma) if sigma is not None else math.nan
        log.record(t, _mass(f), e, boundary_mass(f))

    snapshot(nodes[0], state)
    for a, b in zip(nodes[:-1], nodes[1:]):
        dt = b - a
        half = 0.5 * coeff(0.5 * (a + b)) * dt
        vals = _rotate(vals, pot, params.alpha, half)
        s = spectral_forward(state.like(vals))
        vals = spectral_inverse(s.like(s.values * np.exp(-1j * dt * eig))).values
        vals = _rotate(vals, pot, params.alpha, half)
        log.steps += 1
        cur = state.like(vals)
        snapshot(b, cur)
        drift = abs(log.mass[-1] - m0) / m0 if m0 > 0 else 0.0
        if drift > controls.tolerance:
            raise SolverAbort(f"mass drift {drift:.2e} at t={b:.6g}", log, cur)
        if log.boundary_mass[-1] > controls.boundary_tolerance:
            raise SolverAbort(
                f"boundary mass {log.boundary_mass[-1]:.2e} at t={b:.6g}", log, cur
            )
    return state.like(vals), log


def evolve_interval(state: Field, t0: float, t1: float, params: ModelParams,
                    controls: EvolveControls | None = None):
    """Integrate i u_t + Delta u = N(u) from t0 to t1 (original frame)."""
    controls = controls or EvolveControls(dt_rule="fixed")
    nodes = time_nodes(t0, t1, controls)
    return _integrate(state, nodes, params, controls, lambda t: 1.0)


def lens_sigma(params: ModelParams) -> float:
    return params.alpha * params.d / 2 + params.beta - 2


def evolve_lens(state: Field, t0: float, t1: float, params: ModelParams,
                controls: EvolveControls | None = None):
    """Integrate i v_t + Delta v = |2t|^sigma N(v) between positive times."""
    if t0 <= 0 or t1 <= 0:
        raise ValueError("lens-frame times must be positive")
    controls = controls or EvolveControls(frame="lens")
    sigma = lens_sigma(params)
    nodes = time_nodes(t0, t1, controls)
    return _integrate(state, nodes, params, controls,
                      lambda t: abs(2 * t) ** sigma, sigma=sigma)


def lens_forward(t: float, u: Field, params: ModelParams | None = None) -> Field:
    """v(t) = (2it)^{-d/2} e^{i|x|^2/4t} conj(u)(1/4t, x/2t).

    ``u`` holds the original-frame state at time 1/(4t); the result lives
    on the input grid scaled by 2t.
    """
    if t <= 0:
        raise ValueError("lens transform needs t > 0")
    return modulation(t, dilation(t, u.conj()))


def lens_inverse(t: float, v: Field, params: ModelParams | None = None) -> Field:
    """Original-frame state at time 1/(4t) from the lens state v(t)."""
    if t <= 0:
        raise ValueError("lens transform needs t > 0")
    return lens_forward(1 / (4 * t), v)


def lens_time(t: float) -> float:
    return 1 / (4 * t)
