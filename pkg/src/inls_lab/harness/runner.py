"""Run configured experiments, sweep them, and persist records and series."""

from __future__ import annotations

import csv
import io
import itertools
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict

import numpy as np

from ..core_model import GridSpec, ModelParams, norm, validate_params
from ..evolve import SolverAbort, energy, lens_sigma
from ..linear_ops import self_similar_grid
from ..profiles import datum_field, make_datum, scale_to_smallness, weighted_sup
from ..scattering_lab import (
    PicardDivergence,
    checkpoint_times,
    construct_final_state,
    decay_fit,
    discriminate,
    inverse_square_reduce,
    long_range_flags,
    pulled_back_series,
    short_range_outcome,
)
from .config import RunConfig, config_hash, serialize_config

SERIES_COLUMNS = ("t", "err_corrected", "err_ablated", "mass", "energy")
POSITIVE = {
    "modified_scattering_confirmed",
    "short_range_scattering_confirmed",
    "trivial_free_case",
    "not_fitted",
}
EXIT_POSITIVE, EXIT_NEGATIVE, EXIT_INVALID, EXIT_ABORT = 0, 1, 2, 3


class InvalidInput(ValueError):
    pass


def exit_code(record: dict) -> int:
    verdict = record["verdict"]
    if verdict == "invalid_input":
        return EXIT_INVALID
    if verdict in ("solver_abort", "picard_divergence"):
        return EXIT_ABORT
    return EXIT_POSITIVE if verdict in POSITIVE else EXIT_NEGATIVE


def build_grid(cfg: RunConfig) -> GridSpec:
    g = cfg.grid
    if g.extent == "auto":
        # dual grid equals the grid scaled by 2: transforms at t = 1 need no interpolation
        return self_similar_grid(1.0, g.points, g.kind)
    return GridSpec(g.kind, float(g.extent), g.points)


def model_params(cfg: RunConfig) -> ModelParams:
    p = cfg.params
    regime = "long_range" if p.regime == "auto" else p.regime
    return ModelParams(p.d, p.alpha, p.beta, p.lam, regime)


def _raw_datum(cfg, grid):
    d = cfg.datum
    amp = 1.0 if d.amplitude == "auto" else float(d.amplitude)
    return datum_field(grid, d.family, amp, d.support_scale)


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, float)):
        v = float(x)
        return v if math.isfinite(v) else None
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


# --------------------------------------------------------------------------
# pipelines; each returns (verdict, fit-or-None, series dict, flags, extra, mass_drift)

def _long_range(cfg, params, grid, phi):
    s = cfg.schedule
    d = cfg.datum
    if d.theta is None or d.delta is None:
        raise InvalidInput("long-range runs need datum.theta and datum.delta")
    if d.amplitude == "auto":
        phi = scale_to_smallness(params, phi, d.smallness)
    datum = make_datum(params, phi, d.theta, d.delta)
    times = checkpoint_times(s.t_end, s.t_fit_max, s.checkpoints_per_decade)
    traj, out = construct_final_state(
        params, datum, s.T_max, s.t_end, method=s.method, times=times,
        steps_per_decade=s.steps_per_decade, picard_iterations=s.picard_iterations,
        quad_per_decade=s.quad_per_decade,
    )
    sigma = lens_sigma(params)
    series = _series(out.times, out.err_corrected, out.err_ablated,
                     [norm(v) for v in traj.states],
                     [energy(v, 1 / (4 * t), params, sigma) for t, v in zip(traj.times, traj.states)])
    extra = dict(out.extra, datum=out.datum, grid=out.grid,
                 smallness=weighted_sup(params, datum.phi))
    return out.verdict, out.decay_fit, series, out.flags, extra, out.conservation["mass_drift"]


def _inverse_square(cfg, grid, phi_tilde):
    p, d, s = cfg.params, cfg.datum, cfg.schedule
    n = p.potential_dim
    if grid.kind != "radial2d":
        raise InvalidInput("inverse-square runs sample the R^n datum on radial2d nodes")
    if d.theta is None or d.delta is None:
        raise InvalidInput("long-range runs need datum.theta and datum.delta")
    tilde = (p.alpha, p.beta, p.lam)
    mapped, phi = inverse_square_reduce(n, tilde, phi_tilde)
    if d.amplitude == "auto":
        factor = d.smallness / weighted_sup(mapped, phi)
        phi_tilde = phi_tilde * factor
    mapped, datum = inverse_square_reduce(n, tilde, phi_tilde, d.theta, d.delta)
    times = checkpoint_times(s.t_end, s.t_fit_max, s.checkpoints_per_decade)
    traj, out = construct_final_state(
        mapped, datum, s.T_max, s.t_end, method=s.method, times=times,
        steps_per_decade=s.steps_per_decade, picard_iterations=s.picard_iterations,
        quad_per_decade=s.quad_per_decade,
    )
    pulled = pulled_back_series(n, traj, tilde, phi_tilde)
    flat = np.asarray(out.err_corrected)
    mismatch = float(np.max(np.abs(pulled - flat) / np.abs(flat))) if np.all(flat > 0) else 0.0
    sigma = lens_sigma(mapped)
    series = _series(out.times, list(pulled), out.err_ablated,
                     [norm(v) for v in traj.states],
                     [energy(v, 1 / (4 * t), mapped, sigma) for t, v in zip(traj.times, traj.states)])
    series["err_corrected_2d"] = list(out.err_corrected)
    extra = dict(out.extra, mapped_params=asdict(mapped), transfer_mismatch=mismatch)
    if out.verdict == "trivial_free_case":
        return out.verdict, None, series, out.flags, extra, out.conservation["mass_drift"]
    fit = decay_fit(list(zip(out.times, pulled)))
    flags = long_range_flags(out.times, pulled, out.err_ablated, d.theta, fit, 2)
    flags["mass_ok"] = out.flags.get("mass_ok", False)
    flags["transfer_ok"] = mismatch <= 1e-10
    ok = all(flags[k] for k in ("slope_ok", "r_squared_ok", "decades_decreasing",
                                "ablated_non_decaying", "mass_ok", "transfer_ok"))
    verdict = "modified_scattering_confirmed" if ok else "modified_scattering_not_confirmed"
    return verdict, fit, series, flags, extra, out.conservation["mass_drift"]


def _short_range(cfg, params, grid, u0):
    s = cfg.schedule
    res, out = short_range_outcome(params, u0, s.t_end, steps_per_decade=s.steps_per_decade,
                                   per_decade=s.checkpoints_per_decade, dt=s.dt)
    series = _series(out.times, out.err_corrected, out.err_ablated,
                     out.extra["mass"], out.extra["energy"])
    series["cauchy"] = [math.nan] + list(out.extra["cauchy_series"])
    series["distance_sq"] = list(map(float, res.distance_sq))
    extra = {"richardson_ratio": res.ratio, "u_plus_l2": norm(res.u_plus)}
    return out.verdict, out.decay_fit, series, out.flags, extra, out.conservation["mass_drift"]


def _auto(cfg, grid, phi):
    s, d = cfg.schedule, cfg.datum
    params = model_params(cfg)
    if d.amplitude == "auto":
        phi = scale_to_smallness(params, phi, d.smallness)
    verdict, fit, times, values, log = discriminate(
        params, phi, tol=s.discriminator_tol, t_lo=s.t_end, t_hi=s.t_fit_max, T_max=s.T_max,
        steps_per_decade=s.steps_per_decade, per_decade=s.checkpoints_per_decade,
    )
    nan = [math.nan] * len(times)
    series = _series(list(times), nan, nan, nan, nan)
    series["potential_sup"] = list(map(float, values))
    flags = {"decay_exponent": fit.slope, "integrable": fit.slope < -1 - s.discriminator_tol,
             "criticality": params.criticality}
    return verdict, fit, series, flags, {}, log.mass_drift


def _series(t, corrected, ablated, mass, en):
    return {"t": list(map(float, t)), "err_corrected": list(map(float, corrected)),
            "err_ablated": list(map(float, ablated)), "mass": list(map(float, mass)),
            "energy": list(map(float, en))}


def execute(cfg: RunConfig) -> dict:
    """Run the pipeline a config names and return its record (nothing written)."""
    h = config_hash(cfg)
    record = {"run_id": h[:12], "config_hash": h, "config": serialize_config(cfg)}
    start = time.perf_counter()
    try:
        grid = build_grid(cfg)
        raw = _raw_datum(cfg, grid)
        if cfg.params.regime == "auto":
            result = _auto(cfg, grid, raw)
        elif cfg.params.potential_dim:
            result = _inverse_square(cfg, grid, raw)
        else:
            params = model_params(cfg)
            report = validate_params(params)
            if not report.ok and not (params.lam == 0 and report.violated == ("lambda > 0",)):
                raise InvalidInput(f"parameters fail: {', '.join(report.violated)}")
            if params.d != grid.dim:
                raise InvalidInput(f"grid kind {grid.kind} does not match d={params.d}")
            if params.regime == "short_range":
                result = _short_range(cfg, params, grid, raw)
            else:
                result = _long_range(cfg, params, grid, raw)
        verdict, fit, series, flags, extra, drift = result
        record.update(verdict=verdict,
                      slope=fit.slope if fit else None,
                      r_squared=fit.r_squared if fit else None,
                      mass_drift=drift, flags=flags, extra=extra, series=series)
    except SolverAbort as exc:
        record.update(verdict="solver_abort", error=str(exc), slope=None, r_squared=None,
                      mass_drift=exc.log.mass_drift if exc.log else None)
    except PicardDivergence as exc:
        record.update(verdict="picard_divergence", error=str(exc), slope=None, r_squared=None,
                      mass_drift=None)
    except ValueError as exc:
        record.update(verdict="invalid_input", error=str(exc), slope=None, r_squared=None,
                      mass_drift=None)
    record["timings"] = {"wall_s": time.perf_counter() - start}
    return _jsonable(record)


def series_csv(record: dict) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SERIES_COLUMNS)
    series = record.get("series") or {}
    for row in zip(*(series.get(c, []) for c in SERIES_COLUMNS)):
        w.writerow([repr(math.nan if v is None else float(v)) for v in row])
    return buf.getvalue()


def persist(record: dict, cfg: RunConfig, base_dir=None) -> str:
    """Write the series CSV and append the JSON line; return the record path."""
    out_dir = os.path.join(base_dir or "", cfg.output.directory)
    os.makedirs(out_dir, exist_ok=True)
    if record.get("series"):
        with open(os.path.join(out_dir, f"{record['run_id']}.csv"), "w", newline="") as fh:
            fh.write(series_csv(record))
    path = os.path.join(out_dir, cfg.output.record_file)
    with open(path, "a", encoding="utf-8") as fh:
        fh.write(json.dumps(record, sort_keys=True) + "\n")
    return path


def run_experiment(cfg: RunConfig, base_dir=None, write: bool = True) -> dict:
    record = execute(cfg)
    if write:
        persist(record, cfg, base_dir)
    return record


def expand_axes(template: RunConfig, axes) -> list:
    configs = []
    keys = [k for k, _ in axes]
    for k in keys:
        template.get(k)  # raises on unknown keys
    for combo in itertools.product(*(vals for _, vals in axes)):
        cfg = template
        for k, v in zip(keys, combo):
            cfg = cfg.with_value(k, v)
        configs.append(cfg)
    return configs


def sweep(template: RunConfig, axes, workers: int = 1, base_dir=None, write: bool = True) -> list:
    """One run per point of the Cartesian product of ``axes``; records keep axis order."""
    configs = expand_axes(template, axes)
    if workers > 1 and len(configs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(execute, configs))
    else:
        records = [execute(c) for c in configs]
    if write:
        for cfg, rec in zip(configs, records):
            persist(rec, cfg, base_dir)
    return records


def read_records(path) -> list:
    with open(path, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


def emit_plot_csv(records, quantity: str, path=None) -> str:
    """Long-format ``run_id,t,value`` rows sorted by (run_id, t)."""
    rows = []
    for rec in records:
        series = rec.get("series") or {}
        if quantity not in series:
            raise KeyError(f"record {rec.get('run_id')} has no quantity {quantity!r}")
        rows += [(rec["run_id"], float(t), float(v)) for t, v in zip(series["t"], series[quantity])]
    rows.sort(key=lambda r: (r[0], r[1]))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["run_id", "t", "value"])
    for run_id, t, v in rows:
        w.writerow([run_id, repr(t), repr(v)])
    text = buf.getvalue()
    if path is not None:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    return text


def summary_table(records) -> str:
    head = f"{'run_id':12}  {'verdict':36}  {'slope':>9}  {'r^2':>8}  {'mass drift':>10}"
    lines = [head, "-" * len(head)]
    for r in records:
        slope = "-" if r.get("slope") is None else f"{r['slope']:.4f}"
        r2 = "-" if r.get("r_squared") is None else f"{r['r_squared']:.5f}"
        drift = "-" if r.get("mass_drift") is None else f"{r['mass_drift']:.2e}"
        lines.append(f"{r['run_id']:12}  {r['verdict']:36}  {slope:>9}  {r2:>8}  {drift:>10}")
    return "\n".join(lines)
