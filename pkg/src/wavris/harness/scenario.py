"""Scenario files: parsing, whole-document validation and shipped presets.

A scenario is a JSON document tagged ``"schema": "wavris.scenario/1"``.
Every section is optional except ``sweep``; missing values take the
defaults below.  Validation collects every problem before failing.
"""
from __future__ import annotations

import copy
import json
from dataclasses import dataclass, replace

import numpy as np

from ..bias_wave import BiasLineConfig
from ..cell_model import CellResonatorParams, CouplingKernel, UnitCellModel, VaractorParams
from ..channels import SPEED_OF_LIGHT, ChannelSpec, LinkBudget, RisGeometry
from ..errors import ScenarioError
from ..optimize import OptimizerConfig

SCHEMA = "wavris.scenario/1"
SWEEP_VARIABLES = ("P", "n_x", "snr", "trials", "pilots")
DEFAULT_FREQUENCY = 3.5e9
TOP_LEVEL_KEYS = frozenset({"schema", "id", "seed", "trials", "frequency", "geometry", "bias_line", "cell",
                            "channel", "link", "optimizer", "modes", "warm_start", "optimize",
                            "estimation", "sweep", "outputs", "description"})


@dataclass(frozen=True)
class Scenario:
    id: str
    seed: int
    trials: int
    frequency: float
    geometry: RisGeometry
    line_l_e: float | None
    line_phase_velocity: float
    line_boundary: str
    cell: UnitCellModel
    bs_spec: ChannelSpec
    ue_spec: ChannelSpec
    bs_antennas: int
    direct: float
    budget: LinkBudget
    optimizer: OptimizerConfig
    modes: int
    warm_start: bool
    optimize: bool
    pilot_snr_db: float
    sweep_variable: str
    sweep_values: tuple
    square: bool
    phase_grid: bool
    smoothness: bool
    verbose: bool
    raw: dict

    def line_for(self, geom):
        return BiasLineConfig.for_geometry(geom, self.line_l_e, self.line_phase_velocity, self.line_boundary)

    def geometry_for(self, value):
        """Geometry for a sweep value (only an ``n_x`` sweep changes it)."""
        if self.sweep_variable != "n_x":
            return self.geometry
        n_y = int(value) if self.square else self.geometry.n_y
        return replace(self.geometry, n_x=int(value), n_y=n_y)

    def with_overrides(self, seed=None, trials=None):
        raw = copy.deepcopy(self.raw)
        if seed is not None:
            raw["seed"] = int(seed)
        if trials is not None:
            raw["trials"] = int(trials)
        return scenario_from_dict(raw)


def _section(d, key, errors):
    val = d.get(key, {})
    if val is None:
        return {}
    if not isinstance(val, dict):
        errors.append(f"{key}: expected an object")
        return {}
    return val


def _build(errors, label, factory, *args, **kwargs):
    try:
        return factory(*args, **kwargs)
    except (TypeError, ValueError) as exc:
        errors.append(f"{label}: {exc}")
        return None


def _geometry(g, frequency, errors):
    n_x = g.get("n_x", 16)
    n_y = g.get("n_y", 1)
    wavelength = g.get("wavelength", SPEED_OF_LIGHT / frequency if frequency else None)
    if "d_x" in g or "d_y" in g:
        d_x = g.get("d_x")
        d_y = g.get("d_y", d_x)
    else:
        pitch = g.get("pitch_wavelengths", 0.2)
        if wavelength is None:
            return None
        d_x = d_y = pitch * wavelength
    return _build(errors, "geometry", RisGeometry, n_x, n_y, d_x, d_y, wavelength)


def _coupling(spec, errors):
    if spec is None:
        return None
    if isinstance(spec, dict) and "binomial" in spec:
        return _build(errors, "cell.coupling", CouplingKernel.binomial, int(spec["binomial"]))
    if isinstance(spec, dict) and "taps" in spec:
        return _build(errors, "cell.coupling", CouplingKernel, spec["taps"])
    errors.append("cell.coupling: expected null, {'binomial': w} or {'taps': [...]}")
    return None


def _channel_spec(d, label, errors):
    kwargs = {}
    for key in ("n_paths", "gain_model", "azimuth_range", "elevation_range", "distance"):
        if key in d:
            kwargs[key] = tuple(d[key]) if key.endswith("_range") else d[key]
    return _build(errors, label, ChannelSpec, **kwargs)


def scenario_from_dict(d):
    """Validate a scenario document; raise ScenarioError listing every violation."""
    errors = []
    if not isinstance(d, dict):
        raise ScenarioError(["document: expected a JSON object"])
    if d.get("schema") != SCHEMA:
        errors.append(f"schema: expected {SCHEMA!r}, got {d.get('schema')!r}")
    for key in sorted(set(d) - TOP_LEVEL_KEYS):
        errors.append(f"{key}: unknown key")

    frequency = d.get("frequency", DEFAULT_FREQUENCY)
    if not isinstance(frequency, (int, float)) or not frequency > 0:
        errors.append(f"frequency: must be > 0, got {frequency!r}")
        frequency = None

    seed = d.get("seed", 0)
    if not isinstance(seed, int) or seed < 0:
        errors.append(f"seed: must be a nonnegative integer, got {seed!r}")
    trials = d.get("trials", 1)
    if not isinstance(trials, int) or trials < 1:
        errors.append(f"trials: must be a positive integer, got {trials!r}")

    geom = _geometry(_section(d, "geometry", errors), frequency, errors)

    line = _section(d, "bias_line", errors)
    l_e = line.get("l_e")
    pv = line.get("phase_velocity", SPEED_OF_LIGHT / 2)
    boundary = line.get("boundary", "short")
    if geom is not None:
        _build(errors, "bias_line", BiasLineConfig.for_geometry, geom, l_e, pv, boundary)

    cell_d = _section(d, "cell", errors)
    model = cell_d.get("model", "physical")
    varactor = _build(errors, "cell.varactor", VaractorParams, **cell_d.get("varactor", {}))
    res_kwargs = dict(cell_d.get("resonator", {}))
    if frequency:
        res_kwargs.setdefault("rf_frequency", frequency)
    resonator = _build(errors, "cell.resonator", CellResonatorParams, **res_kwargs)
    coupling = _coupling(cell_d.get("coupling"), errors)
    cell = None
    if model not in ("ideal", "physical"):
        errors.append(f"cell.model: expected 'ideal' or 'physical', got {model!r}")
    elif varactor is not None and (model == "ideal" or resonator is not None):
        cell = _build(errors, "cell", UnitCellModel, varactor,
                      resonator if model == "physical" else None, coupling)

    ch = _section(d, "channel", errors)
    bs_spec = _channel_spec(ch.get("bs", {}), "channel.bs", errors)
    ue_spec = _channel_spec(ch.get("ue", ch.get("bs", {})), "channel.ue", errors)
    bs_antennas = ch.get("bs_antennas", 1)
    if not isinstance(bs_antennas, int) or bs_antennas < 1:
        errors.append(f"channel.bs_antennas: must be a positive integer, got {bs_antennas!r}")
    direct = ch.get("direct", 0.0)
    if not isinstance(direct, (int, float)) or direct < 0:
        errors.append(f"channel.direct: must be >= 0, got {direct!r}")

    budget = _build(errors, "link", LinkBudget, **_section(d, "link", errors))
    optimizer = _build(errors, "optimizer", OptimizerConfig, **_section(d, "optimizer", errors))

    modes = d.get("modes", 4)
    if not isinstance(modes, int) or modes < 0:
        errors.append(f"modes: must be a nonnegative integer, got {modes!r}")
    elif geom is not None and modes > geom.n_x:
        errors.append(f"modes: {modes} exceeds n_x={geom.n_x}")

    est = _section(d, "estimation", errors)
    pilot_snr_db = est.get("pilot_snr_db", 20.0)

    sweep = d.get("sweep")
    variable, values, square = None, (), False
    if not isinstance(sweep, dict):
        errors.append("sweep: required object {variable, values}")
    else:
        variable = sweep.get("variable")
        values = sweep.get("values")
        square = bool(sweep.get("square", False))
        if variable not in SWEEP_VARIABLES:
            errors.append(f"sweep.variable: expected one of {SWEEP_VARIABLES}, got {variable!r}")
        if not isinstance(values, list) or not values:
            errors.append("sweep.values: must be a non-empty list")
            values = ()
        elif any(not isinstance(v, (int, float)) for v in values):
            errors.append("sweep.values: must be numbers")
            values = ()
        elif list(values) != sorted(values):
            errors.append("sweep.values: must be sorted ascending")
        values = tuple(values)
        if variable in ("P", "n_x", "trials", "pilots") and any(int(v) != v or v < 0 for v in values):
            errors.append(f"sweep.values: {variable} values must be nonnegative integers")
        elif variable in ("n_x", "trials", "pilots") and any(v < 1 for v in values):
            errors.append(f"sweep.values: {variable} values must be >= 1")
        if variable == "P" and geom is not None and any(v > geom.n_x for v in values):
            errors.append(f"sweep.values: mode counts exceed n_x={geom.n_x}")
        if variable == "n_x" and geom is not None and isinstance(modes, int) and values \
                and d.get("optimize", True) and modes > min(values):
            errors.append(f"modes: {modes} exceeds smallest swept n_x={min(values)}")

    out = _section(d, "outputs", errors)

    if errors:
        raise ScenarioError(errors)
    if variable in ("P", "n_x", "trials", "pilots"):
        values = tuple(int(v) for v in values)
    return Scenario(
        id=str(d.get("id", "scenario")), seed=seed, trials=trials, frequency=frequency,
        geometry=geom, line_l_e=l_e, line_phase_velocity=pv, line_boundary=boundary,
        cell=cell, bs_spec=bs_spec, ue_spec=ue_spec, bs_antennas=bs_antennas, direct=float(direct),
        budget=budget, optimizer=optimizer, modes=modes,
        warm_start=bool(d.get("warm_start", True)), optimize=bool(d.get("optimize", True)),
        pilot_snr_db=float(pilot_snr_db), sweep_variable=variable, sweep_values=values,
        square=square, phase_grid=bool(out.get("phase_grid", False)),
        smoothness=bool(out.get("smoothness", False)), verbose=bool(out.get("verbose", False)),
        raw=copy.deepcopy(d),
    )


def load_scenario(path):
    try:
        with open(path) as fh:
            d = json.load(fh)
    except OSError as exc:
        raise ScenarioError([f"file: {exc}"]) from exc
    except json.JSONDecodeError as exc:
        raise ScenarioError([f"file: invalid JSON ({exc})"]) from exc
    return scenario_from_dict(d)


PRESETS = {
    "fig3": {
        "schema": SCHEMA, "id": "fig3", "seed": 3, "trials": 100,
        "geometry": {"n_x": 16, "n_y": 16, "pitch_wavelengths": 0.2},
        "cell": {"model": "physical", "coupling": {"binomial": 1}},
        "channel": {"bs": {"n_paths": 5, "gain_model": "equal"}, "bs_antennas": 1},
        "optimizer": {"restarts": 2, "max_iters": 300},
        "modes": 4,
        "sweep": {"variable": "P", "values": [4]},
        "outputs": {"phase_grid": True, "smoothness": True},
    },
    "snr_vs_p": {
        "schema": SCHEMA, "id": "snr_vs_p", "seed": 5, "trials": 100,
        "geometry": {"n_x": 16, "n_y": 16, "pitch_wavelengths": 0.2},
        "cell": {"model": "physical", "coupling": {"binomial": 1}},
        "channel": {"bs": {"n_paths": 5, "gain_model": "equal"}},
        "optimizer": {"restarts": 2, "max_iters": 300},
        "warm_start": True,
        "sweep": {"variable": "P", "values": [0, 1, 2, 4, 8, 16]},
    },
    "n2_scaling": {
        "schema": SCHEMA, "id": "n2_scaling", "seed": 2, "trials": 5,
        "geometry": {"n_x": 4, "n_y": 4, "pitch_wavelengths": 0.2},
        "cell": {"model": "ideal"},
        "channel": {"bs": {"n_paths": 1, "gain_model": "unit"}},
        "optimize": False,
        "modes": 0,
        "sweep": {"variable": "n_x", "values": [4, 8, 16], "square": True},
    },
    "chanest": {
        "schema": SCHEMA, "id": "chanest", "seed": 9, "trials": 50,
        "geometry": {"n_x": 16, "n_y": 1, "pitch_wavelengths": 0.2},
        "cell": {"model": "ideal"},
        "channel": {"bs": {"n_paths": 5, "gain_model": "equal"}},
        "estimation": {"pilot_snr_db": 20.0},
        "sweep": {"variable": "pilots", "values": [16, 32, 64]},
    },
}


def preset(name):
    if name not in PRESETS:
        raise ScenarioError([f"preset: unknown name {name!r}; choose from {sorted(PRESETS)}"])
    return scenario_from_dict(copy.deepcopy(PRESETS[name]))


def default_scenario_dict():
    """A complete scenario document with every default spelled out."""
    return {
        "schema": SCHEMA, "id": "example", "seed": 0, "trials": 10,
        "frequency": DEFAULT_FREQUENCY,
        "geometry": {"n_x": 16, "n_y": 1, "pitch_wavelengths": 0.2},
        "bias_line": {"l_e": None, "phase_velocity": SPEED_OF_LIGHT / 2, "boundary": "short"},
        "cell": {"model": "physical", "varactor": {"c_j0": 2e-12, "v_j": 0.7, "grading": 0.5,
                                                   "v_min": 0.0, "v_max": 12.0},
                 "resonator": {"inductance": 2.5e-9, "loss_resistance": 0.5},
                 "coupling": {"taps": [0.25, 0.5, 0.25]}},
        "channel": {"bs": {"n_paths": 5, "gain_model": "equal",
                           "azimuth_range": [-np.pi / 3, np.pi / 3],
                           "elevation_range": [-np.pi / 4, np.pi / 4]},
                    "bs_antennas": 1, "direct": 0.0},
        "link": {"tx_power": 1.0, "noise_power": 1.0},
        "optimizer": {"restarts": 3, "max_iters": 2000, "tolerance": 1e-8, "seed": 0,
                      "method": "simplex-descent"},
        "modes": 4, "warm_start": True, "optimize": True,
        "estimation": {"pilot_snr_db": 20.0},
        "sweep": {"variable": "P", "values": [0, 1, 2, 4, 8]},
        "outputs": {"phase_grid": True, "smoothness": False, "verbose": False},
    }
