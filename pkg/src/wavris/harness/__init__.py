"""Scenario files, experiment presets, Monte Carlo runs and result emission."""
from .phase_grid import emit_phase_profile, smoothness_metric, unwrap_phase_grid, white_phase_baseline
from .runner import ResultRow, RunResult, run_scaling, run_scenario, write_outputs
from .scenario import PRESETS, Scenario, default_scenario_dict, load_scenario, preset, scenario_from_dict
