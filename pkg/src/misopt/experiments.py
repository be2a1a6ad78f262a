"""Experiment harness: scheme runners, sweeps, robustness injections, emission.

Every (sweep value, seed, scheme) cell produces one CSV row; the manifest
records the fully resolved config so a run is reproducible from its output
directory alone.
"""

from __future__ import annotations

import csv
import io
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .benchmarks import dynamic_ris_baseline, pso_solve, quantized_search, single_layer_baseline
from .bcd import solve_max_min
from .channel import build_stats, draw_channels, rician_weights
from .geometry import effective_phase
from .manifold import solve_elementwise, solve_throughput
from .rate import PhaseProfile, rate_matrix
from .scenario import ConfigError, Scenario, build_instance, make_scenario

SWEEP_COLUMNS = ("scheme", "sweep_axis", "sweep_value", "seed", "objective_bits_hz",
                 "min_rate", "throughput", "iters", "wall_ms", "converged", "notes")
ROBUSTNESS_COLUMNS = ("family", "magnitude", "trials", "seed", "scheme",
                      "nominal_objective", "perturbed_objective", "degradation")


@dataclass
class ResultsTable:
    columns: tuple
    rows: list = field(default_factory=list)


@dataclass
class SchemeOutcome:
    min_rate: float
    throughput: float
    iters: int
    converged: bool
    notes: str = ""
    profile: PhaseProfile | None = None
    assignment: np.ndarray | None = None   # per-user pattern index
    placements: np.ndarray | None = None
    trace: list = field(default_factory=list)


def trace_table(scheme: str, outcome: SchemeOutcome) -> ResultsTable:
    """Per-iteration solver trace as a writable table.

    The penalty solver reports (outer, inner, rho, objective, violation,
    wall seconds); the manifold solvers report their objective sequence.
    """
    if scheme == "bcd":
        cols = ("outer", "inner", "rho", "objective", "violation", "wall_s")
        return ResultsTable(columns=cols, rows=list(outcome.trace))
    cols = ("iteration", "objective")
    return ResultsTable(columns=cols, rows=[(i, v) for i, v in enumerate(outcome.trace)])


def _from_rates(per_user: np.ndarray, total_time: float) -> tuple[float, float]:
    k = per_user.shape[0]
    return float(per_user.min()), float(total_time / k * per_user.sum())


def run_scheme(scheme: str, scn: Scenario, stats, patterns, seed: int) -> SchemeOutcome:
    """Solve one scheme on a built instance and report both objectives."""
    objective = scn.objective
    total_time = scn.total_time
    no_ms2 = patterns[0].num_ms2 == 0
    if scheme == "bcd":
        res = solve_max_min(stats, patterns, scn.bcd_config(), seed=seed,
                            objective=objective, total_time=total_time)
        return SchemeOutcome(res.min_rate, res.throughput, res.inner_iterations,
                             res.converged, res.notes, res.profile,
                             np.argmax(res.schedule.x, axis=1), trace=res.trace)
    if scheme == "rcg" or (scheme == "rcg-elementwise" and no_ms2):
        if no_ms2:
            base = single_layer_baseline(stats, "rcg", seed=seed, objective="throughput",
                                         rcg_config=scn.rcg_config())
            per_user = rate_matrix(stats, patterns, base.profile)[:, 0]
            mr, thr = _from_rates(per_user, total_time)
            return SchemeOutcome(mr, thr, 0, True, "single-layer (no MS2)",
                                 base.profile, np.zeros(stats.num_users, dtype=int))
        res = solve_throughput(stats, patterns, scn.rcg_config(), seed=seed,
                               total_time=total_time)
        return SchemeOutcome(res.min_rate, res.throughput, res.iterations,
                             res.converged, res.notes, res.profile,
                             np.argmax(res.schedule.x, axis=1), trace=res.trace)
    if scheme == "rcg-elementwise":
        res = solve_elementwise(stats, patterns[0].num_ms2, scn.rcg_config(),
                                seed=seed, total_time=total_time)
        return SchemeOutcome(res.min_rate, res.throughput, res.iterations,
                             res.converged, res.notes, res.profile,
                             placements=res.placements, trace=res.trace)
    if scheme == "pso":
        res = pso_solve(stats, patterns, scn.pso_config(seed))
        per_user = np.einsum("ku,ku->k", res.schedule.x,
                             rate_matrix(stats, patterns, res.profile))
        mr, thr = _from_rates(per_user, total_time)
        return SchemeOutcome(mr, thr, len(res.trace) - 1, True, res.notes,
                             res.profile, np.argmax(res.schedule.x, axis=1))
    if scheme == "qsearch":
        res = quantized_search(stats, patterns, scn.qsearch_config(), seed=seed)
        per_user = np.einsum("ku,ku->k", res.schedule.x,
                             rate_matrix(stats, patterns, res.profile))
        mr, thr = _from_rates(per_user, total_time)
        return SchemeOutcome(mr, thr, res.evaluations, True, res.notes,
                             res.profile, np.argmax(res.schedule.x, axis=1))
    if scheme == "single":
        solver = "bcd" if objective == "min_rate" else "rcg"
        res = single_layer_baseline(stats, solver, seed=seed, objective=objective,
                                    bcd_config=scn.bcd_config(), rcg_config=scn.rcg_config())
        mr, thr = _from_rates(_single_rates(stats, res.profile), total_time)
        return SchemeOutcome(mr, thr, 0, True, res.notes, res.profile,
                             np.zeros(stats.num_users, dtype=int))
    if scheme == "dynamic":
        res = dynamic_ris_baseline(stats, seed=seed, objective=objective,
                                   starts=int(scn.solver_cfg["dynamic"]["starts"]))
        mr, thr = _from_rates(res.per_user_rates, total_time)
        return SchemeOutcome(mr, thr, 0, True, res.notes, res.profile)
    raise ConfigError(f"unknown scheme {scheme!r}")


def _single_rates(stats, profile: PhaseProfile) -> np.ndarray:
    v = profile.phi
    y = np.einsum("kmp,p->km", stats.xi, v)
    return np.log2(1.0 + np.maximum(np.real(np.einsum("m,km->k", v.conj(), y)), 0.0))


def _run_cell(raw_cfg: dict, value, seed: int, scheme: str, trace_dir=None):
    scn = make_scenario(raw_cfg)
    _, stats, patterns = build_instance(scn, value, seed)
    t0 = time.process_time()
    notes = ""
    try:
        out = run_scheme(scheme, scn, stats, patterns, seed)
        converged = out.converged
        mr, thr, iters, notes = out.min_rate, out.throughput, out.iters, out.notes
        if trace_dir is not None and out.trace:
            path = Path(trace_dir) / f"trace_{scheme}_{value}_{seed}.csv"
            path.write_text(render_csv(trace_table(scheme, out)))
    except Exception as err:  # record per-row, keep the sweep running
        converged, mr, thr, iters = False, float("nan"), float("nan"), 0
        notes = f"error: {err}"
    wall_ms = (time.process_time() - t0) * 1e3
    objective = mr if scn.objective == "min_rate" else thr
    return (scheme, scn.sweep_axis, value, seed, objective, mr, thr,
            iters, wall_ms, converged, notes)


def run_sweep(scn: Scenario, workers: int = 1, trace_dir=None) -> ResultsTable:
    """All (sweep value, seed, scheme) cells, deterministically ordered."""
    cells = [(value, seed, scheme)
             for value in scn.sweep_values
             for seed in scn.seeds
             for scheme in scn.schemes]
    raw = scn.resolved()
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_run_cell_star, [(raw, *c, trace_dir) for c in cells]))
    else:
        rows = [_run_cell(raw, *c, trace_dir=trace_dir) for c in cells]
    return ResultsTable(columns=SWEEP_COLUMNS, rows=rows)


def _run_cell_star(args):
    return _run_cell(*args)


# ---------------------------------------------------------------------------
# robustness injections


@dataclass
class RobustnessSpec:
    """One error family with its magnitude grid and per-point trial count."""

    family: str
    magnitudes: list
    trials: int = 200
    scheme: str = "rcg"

    def __post_init__(self):
        if self.family not in ("location_gaussian", "location_bounded", "csi_mix",
                               "csi_bounded", "phase_gaussian", "phase_bounded"):
            raise ConfigError(f"unknown robustness family {self.family!r}")
        if any(m < 0 for m in self.magnitudes):
            raise ConfigError("robustness magnitudes must be nonnegative")
        if self.family == "csi_mix" and any(m > 1 for m in self.magnitudes):
            raise ConfigError("csi_mix magnitudes are mixing weights in [0, 1]")


def _objective_from_rates(per_user: np.ndarray, objective: str, total_time: float) -> float:
    if objective == "min_rate":
        return float(per_user.min())
    return float(total_time / per_user.shape[0] * per_user.sum())


def _user_positions(geo) -> np.ndarray:
    d = geo.distances if geo.distances is not None else np.full(geo.num_users, 30.0)
    az, el = geo.user_azimuths, geo.user_elevations
    k = np.stack([np.cos(el) * np.cos(az), np.cos(el) * np.sin(az), np.sin(el)], axis=1)
    return d[:, None] * k


def _eval_location(layout, geo, scn, design, magnitude, bounded, trials, rng, base_iota):
    """Mean objective after re-aiming the LoS statistics at drifted positions."""
    import dataclasses as _dc

    pos0 = _user_positions(geo)
    vals = np.zeros(trials)
    beta1 = design["beta1"]
    beta2 = design["beta2"]
    for t in range(trials):
        if bounded:
            raw = rng.standard_normal(pos0.shape)
            raw /= np.linalg.norm(raw, axis=1, keepdims=True)
            radii = magnitude * rng.random(pos0.shape[0]) ** (1.0 / 3.0)
            delta = raw * radii[:, None]
        else:
            delta = magnitude * rng.standard_normal(pos0.shape)
        pos = pos0 + delta
        r = np.linalg.norm(pos, axis=1)
        geo_t = _dc.replace(
            geo,
            user_azimuths=np.arctan2(pos[:, 1], pos[:, 0]),
            user_elevations=np.arcsin(np.clip(pos[:, 2] / np.maximum(r, 1e-9), -1.0, 1.0)),
        )
        stats_t = build_stats(layout, geo_t, beta1=beta1, beta2=beta2, iota=base_iota)
        vals[t] = _design_objective(stats_t, design)
    return float(vals.mean())


def _design_objective(stats, design) -> float:
    profile, assignment = design["profile"], design["assignment"]
    if design["placements"] is not None:
        s = design["placements"]
        tbar = np.einsum("kmn,n->km", s, profile.theta) + 1.0 - s.sum(axis=2)
        v = tbar * profile.phi[None, :]
    else:
        v = np.stack([effective_phase(design["patterns"][u], profile.theta, profile.phi)
                      for u in assignment])
    y = np.einsum("kmp,kp->km", stats.xi, v)
    per_user = np.log2(1.0 + np.maximum(np.real(np.einsum("km,km->k", v.conj(), y)), 0.0))
    return _objective_from_rates(per_user, design["objective"], design["total_time"])


def _eval_phase(stats, design, magnitude, bounded, trials, rng) -> float:
    """Mean objective with per-element phase jitter applied to the frozen design."""
    profile = design["profile"]
    vals = np.zeros(trials)
    for t in range(trials):
        if bounded:
            d_phi = rng.uniform(-magnitude, magnitude, profile.phi.shape[0])
            d_theta = rng.uniform(-magnitude, magnitude, profile.theta.shape[0])
        else:
            d_phi = np.zeros(profile.phi.shape[0])
            d_theta = magnitude * rng.standard_normal(profile.theta.shape[0])
        jittered = {
            **design,
            "profile": PhaseProfile(phi=profile.phi * np.exp(1j * d_phi),
                                    theta=profile.theta * np.exp(1j * d_theta)),
        }
        vals[t] = _design_objective(stats, jittered)
    return float(vals.mean())


def _eval_csi(stats, design, magnitude, bounded, trials, rng) -> float:
    """MC objective when the transmit beamformer points at a mismatched channel."""
    profile, assignment = design["profile"], design["assignment"]
    if design["placements"] is not None:
        s = design["placements"]
        tbar = np.einsum("kmn,n->km", s, profile.theta) + 1.0 - s.sum(axis=2)
        v = tbar * profile.phi[None, :]
    else:
        v = np.stack([effective_phase(design["patterns"][u], profile.theta, profile.phi)
                      for u in assignment])
    k, m = v.shape
    w2 = np.array([rician_weights(b) for b in np.broadcast_to(stats.beta2, (k,))])
    cov_scale = np.sqrt(stats.alpha2 * w2[:, 1])
    g_all, h_all = draw_channels(stats, trials, rng)
    noise = (rng.standard_normal((trials, k, m)) + 1j * rng.standard_normal((trials, k, m))) / np.sqrt(2.0)
    err = np.einsum("mp,tkp->tkm", stats.sqrt_mt, noise) * cov_scale[None, :, None]
    if bounded:
        scale = magnitude * np.linalg.norm(h_all, axis=2) / np.maximum(
            np.linalg.norm(err, axis=2), 1e-300)
        h_true = h_all + err * scale[:, :, None]
    else:
        h_true = np.sqrt(1.0 - magnitude) * h_all + np.sqrt(magnitude) * err
    c_est = np.einsum("tml,tkm->tkl", g_all.conj(), h_all * v[None, :, :])
    c_true = np.einsum("tml,tkm->tkl", g_all.conj(), h_true * v[None, :, :])
    num = np.abs(np.einsum("tkl,tkl->tk", c_true.conj(), c_est)) ** 2
    den = np.maximum(np.real(np.einsum("tkl,tkl->tk", c_est.conj(), c_est)), 1e-300)
    snr = stats.iota[None, :] * num / den
    rates = np.log2(1.0 + snr).mean(axis=0)
    return _objective_from_rates(rates, design["objective"], design["total_time"])


def run_robustness(scn: Scenario, spec: RobustnessSpec | None = None,
                   seed: int | None = None) -> ResultsTable:
    """Degradation of a frozen nominal design under one injected error family.

    The same random draws evaluate every magnitude (common random numbers),
    so zero magnitude reproduces the nominal value exactly and degradation
    curves are smooth in the magnitude.
    """
    rb = scn.raw["robustness"]
    spec = spec or RobustnessSpec(family=rb["family"], magnitudes=list(rb["magnitudes"]),
                                  trials=int(rb["trials"]), scheme=rb["scheme"])
    if spec.scheme not in ("bcd", "rcg"):
        raise ConfigError("robustness supports the bcd and rcg schemes")
    seed = scn.seeds[0] if seed is None else seed
    value = scn.sweep_values[0]
    layout, stats, patterns = build_instance(scn, value, seed)
    out = run_scheme(spec.scheme, scn, stats, patterns, seed)
    from .scenario import _rician_linear

    beta1, beta2 = _rician_linear(scn.channel_cfg)
    design = {
        "profile": out.profile,
        "assignment": out.assignment,
        "placements": out.placements,
        "patterns": patterns,
        "objective": scn.objective,
        "total_time": scn.total_time,
        "beta1": beta1,
        "beta2": beta2,
    }
    geo = _geo_of(scn, value, seed)
    base_iota = float(stats.iota[0])
    bounded = spec.family in ("location_bounded", "csi_bounded", "phase_bounded")

    def evaluate(mag: float) -> float:
        rng = np.random.default_rng(seed + 104729)  # common random numbers
        if spec.family in ("location_gaussian", "location_bounded"):
            return _eval_location(layout, geo, scn, design, mag, bounded,
                                  spec.trials, rng, base_iota)
        if spec.family in ("csi_mix", "csi_bounded"):
            return _eval_csi(stats, design, mag, bounded, spec.trials, rng)
        return _eval_phase(stats, design, mag, bounded, spec.trials, rng)

    nominal = evaluate(0.0)
    rows = []
    for mag in spec.magnitudes:
        perturbed = evaluate(float(mag))
        degradation = (nominal - perturbed) / abs(nominal) if nominal else 0.0
        rows.append((spec.family, float(mag), spec.trials, seed, spec.scheme,
                     nominal, perturbed, degradation))
    return ResultsTable(columns=ROBUSTNESS_COLUMNS, rows=rows)


def _geo_of(scn: Scenario, value, seed):
    import dataclasses as _dc

    from .channel import even_user_angles, random_user_angles
    from .scenario import _apply_axis

    lay_cfg, ch_cfg = _apply_axis(scn, value)
    k = int(ch_cfg["users"])
    lo, hi = ch_cfg["azimuth_range_rad"]
    if ch_cfg["placement"] == "even":
        geo = even_user_angles(k, ch_cfg["elevation_rad"], lo, hi)
    else:
        geo = random_user_angles(k, np.random.default_rng(seed), ch_cfg["elevation_rad"], lo, hi)
    return _dc.replace(geo, distances=np.full(k, float(ch_cfg["distance_m"])))


# ---------------------------------------------------------------------------
# emission


def _format_cell(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return str(value)


def render_csv(table: ResultsTable) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(table.columns)
    for row in table.rows:
        writer.writerow([_format_cell(v) for v in row])
    return buf.getvalue()


def emit_results(table: ResultsTable, out_dir, scn: Scenario | None = None,
                 name: str = "results") -> dict:
    """Write the CSV plus a JSON manifest; output is byte-stable for a table.

    The manifest holds the fully resolved config (every default filled in),
    the package version and the seed list; no timestamps are embedded.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / f"{name}.csv"
    csv_path.write_text(render_csv(table))
    manifest = {
        "package_version": __version__,
        "columns": list(table.columns),
        "rows": len(table.rows),
        "config": scn.resolved() if scn is not None else None,
        "seeds": scn.seeds if scn is not None else None,
    }
    manifest_path = out / f"{name}.manifest.json"
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True, default=_json_default) + "\n")
    return {"csv": str(csv_path), "manifest": str(manifest_path)}


def _json_default(obj):
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj)}")


def ensure_writable(out_dir) -> None:
    """Fail before any solver work if the output directory cannot be written."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    probe = out / ".write_probe"
    probe.write_text("")
    probe.unlink()
