"""Monte Carlo orchestration and result files.

Trials are keyed by ``(trial index, sweep value)``.  Each trial derives its
own seed from the scenario seed, so rows do not depend on how trials are
spread over worker processes; the collector sorts rows before writing.
"""
from __future__ import annotations

import csv
import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from ..channels import LinkBudget, link_snr, sample_channels
from ..cell_model import PhaseProfile
from ..errors import ConfigurationError
from ..optimize import estimate_cascaded, ideal_profile, optimize_modes, pilot_observations, single_mode_probes
from .phase_grid import emit_phase_profile, write_grid_csv

RESULTS_SCHEMA = "wavris.results/1"
RESULT_COLUMNS = ("scenario_id", "trial_seed", "swept_value", "ideal_snr_db", "achieved_snr_db",
                  "gap_db", "iterations", "metric")


@dataclass
class ResultRow:
    scenario_id: str
    trial_seed: int
    swept_value: float
    ideal_snr_db: float
    achieved_snr_db: float
    gap_db: float
    iterations: int
    metric: float = float("nan")
    wall_time_ms: float = field(default=0.0, compare=False)
    # sort keys, not written
    value_index: int = field(default=0, compare=False, repr=False)
    trial_index: int = field(default=0, compare=False, repr=False)


@dataclass
class RunResult:
    scenario_id: str
    rows: list
    summary: dict
    phase_grid: np.ndarray | None = None


def db(x):
    return 10 * np.log10(x) if x > 0 else float("-inf")


def trial_seed(scenario_seed, trial_index):
    return int(np.random.SeedSequence([scenario_seed, trial_index]).generate_state(1)[0])


def _budget_for(s, value):
    if s.sweep_variable == "snr":
        return LinkBudget(s.budget.noise_power * 10 ** (value / 10), s.budget.noise_power)
    return s.budget


def _estimation_trial(s, geom, line, chans, budget, n_pilots, seed):
    c = chans.cascaded()[:, 0]
    probes = single_mode_probes(n_pilots, geom, line, s.cell.varactor, seed=seed)
    noise = float(np.vdot(c, c).real) / 10 ** (s.pilot_snr_db / 10)
    y = pilot_observations(chans, probes, s.cell, line, geom, noise, seed=seed + 1)
    est = estimate_cascaded(probes, y, s.cell, line, geom, noise)
    rel_err = float(np.linalg.norm(est.coefficients - c) / np.linalg.norm(c))
    profile = PhaseProfile(np.exp(-1j * np.angle(est.coefficients)))
    return link_snr(chans, profile, budget), rel_err


def _run_trial(s, t):
    """Run every sweep value for trial ``t``; returns ``(rows, phase_grid)``."""
    seed = trial_seed(s.seed, t)
    rows = []
    grid = None
    warm = None
    for idx, value in enumerate(s.sweep_values):
        if s.sweep_variable == "trials" and t >= value:
            continue
        start = time.perf_counter()
        geom = s.geometry_for(value)
        line = s.line_for(geom)
        budget = _budget_for(s, value)
        chans = sample_channels(geom, seed, s.bs_spec, s.ue_spec, s.bs_antennas, s.direct)
        ideal, ideal_snr = ideal_profile(chans, budget)
        metric = float("nan")
        if s.smoothness or (s.phase_grid and t == 0 and idx == 0):
            g, m = emit_phase_profile(ideal, geom)
            if s.smoothness:
                metric = m
            if s.phase_grid and t == 0 and idx == 0:
                grid = g
        if s.sweep_variable == "pilots":
            achieved, metric = _estimation_trial(s, geom, line, chans, budget, int(value), seed)
            iterations = int(value)
        elif s.optimize:
            n_modes = int(value) if s.sweep_variable == "P" else s.modes
            use_warm = warm if (s.warm_start and s.sweep_variable == "P") else None
            res = optimize_modes(chans, s.cell, line, geom, n_modes, budget,
                                 replace(s.optimizer, seed=seed), warm_start=use_warm)
            warm = res.best_config
            achieved, iterations = res.achieved_snr, res.iterations_used
        else:
            achieved, iterations = float("nan"), 0
        ideal_db = db(ideal_snr)
        achieved_db = db(achieved) if achieved == achieved else float("nan")
        rows.append(ResultRow(s.id, seed, value, ideal_db, achieved_db, ideal_db - achieved_db,
                              iterations, metric, 1e3 * (time.perf_counter() - start), idx, t))
    return rows, grid


def _n_trials(s):
    return max(s.sweep_values) if s.sweep_variable == "trials" else s.trials


def _percentiles(vals):
    vals = np.asarray([v for v in vals if v == v], dtype=float)
    if vals.size == 0:
        return None
    return {"median": float(np.median(vals)), "p10": float(np.percentile(vals, 10)),
            "p90": float(np.percentile(vals, 90)), "mean": float(np.mean(vals))}


def summarize(s, rows):
    per_value = []
    for idx, value in enumerate(s.sweep_values):
        sub = [r for r in rows if r.value_index == idx]
        entry = {
            "swept_value": value,
            "n": len(sub),
            "gap_db": _percentiles([r.gap_db for r in sub]),
            "ideal_snr_db": _percentiles([r.ideal_snr_db for r in sub]),
            "achieved_snr_db": _percentiles([r.achieved_snr_db for r in sub]),
            "metric": _percentiles([r.metric for r in sub]),
        }
        if s.sweep_variable == "pilots":
            errs = np.array([r.metric for r in sub])
            entry["mean_squared_relative_error"] = float(np.mean(errs ** 2))
        if s.sweep_variable == "n_x":
            entry["n_elements"] = s.geometry_for(value).n
        per_value.append(entry)
    summary = {"results_schema": RESULTS_SCHEMA, "scenario_id": s.id, "seed": s.seed,
               "sweep_variable": s.sweep_variable, "per_value": per_value}
    if s.sweep_variable == "n_x" and len({s.geometry_for(v).n for v in s.sweep_values}) >= 3:
        summary["scaling"] = scaling_fit(s, rows)
    return summary


def run_scenario(s, workers=1):
    """Run all trials and sweep values of a scenario.

    Returns a RunResult whose rows are sorted by (sweep value, trial) and whose
    summary holds median/10th/90th percentiles per sweep value.
    """
    n = _n_trials(s)
    if workers > 1 and n > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outputs = list(pool.map(_run_trial, [s] * n, range(n), chunksize=max(1, n // (4 * workers))))
    else:
        outputs = [_run_trial(s, t) for t in range(n)]
    rows = [r for rows, _ in outputs for r in rows]
    rows.sort(key=lambda r: (r.value_index, r.trial_index))
    grid = outputs[0][1] if outputs else None
    return RunResult(s.id, rows, summarize(s, rows), grid)


def scaling_fit(s, rows):
    """Least-squares slope of log10(median ideal SNR) against log10(N)."""
    n_vals, snr_db = [], []
    for idx, value in enumerate(s.sweep_values):
        sub = [r.ideal_snr_db for r in rows if r.value_index == idx]
        n_vals.append(s.geometry_for(value).n)
        snr_db.append(float(np.median(sub)))
    x = np.log10(n_vals)
    y = np.asarray(snr_db) / 10
    slope, intercept = np.polyfit(x, y, 1)
    los = s.bs_spec.n_paths == 1 and s.ue_spec.n_paths == 1
    return {"slope": float(slope), "intercept": float(intercept), "n_elements": n_vals,
            "median_ideal_snr_db": snr_db, "line_of_sight": los}


def run_scaling(s, workers=1):
    """Fit the SNR-vs-N power law over an ``n_x`` sweep (needs >= 3 distinct N)."""
    if s.sweep_variable != "n_x":
        raise ConfigurationError("run_scaling needs an n_x sweep")
    if len({s.geometry_for(v).n for v in s.sweep_values}) < 3:
        raise ConfigurationError("run_scaling needs at least 3 distinct element counts")
    result = run_scenario(s, workers)
    return result.summary["scaling"], result


def _fmt(v):
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def write_outputs(result, out_dir, scenario=None):
    """Write results.csv, summary.json, timings.csv and (if present) phase_grid.csv."""
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "results.csv"), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RESULT_COLUMNS)
        for r in result.rows:
            w.writerow([r.scenario_id, r.trial_seed, _fmt(r.swept_value), _fmt(r.ideal_snr_db),
                        _fmt(r.achieved_snr_db), _fmt(r.gap_db), r.iterations, _fmt(r.metric)])
    with open(os.path.join(out_dir, "timings.csv"), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("scenario_id", "trial_seed", "swept_value", "wall_time_ms"))
        for r in result.rows:
            w.writerow([r.scenario_id, r.trial_seed, _fmt(r.swept_value), f"{r.wall_time_ms:.3f}"])
    summary = dict(result.summary)
    if scenario is not None:
        summary["scenario"] = scenario.raw
    with open(os.path.join(out_dir, "summary.json"), "w") as fh:
        json.dump(_clean(summary), fh, indent=2, sort_keys=True)
        fh.write("\n")
    if result.phase_grid is not None:
        write_grid_csv(os.path.join(out_dir, "phase_grid.csv"), result.phase_grid)


def _clean(obj):
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (float, np.floating)):
        return float(obj) if np.isfinite(obj) else None
    if isinstance(obj, np.integer):
        return int(obj)
    return obj
