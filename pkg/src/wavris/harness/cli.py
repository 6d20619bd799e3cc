"""Command-line entry point: ``wavris run | preset | validate``."""
from __future__ import annotations

import argparse
import logging
import sys
import warnings

from ..bias_wave import check_mode_frequencies
from ..errors import ScenarioError
from .runner import run_scenario, write_outputs
from .scenario import PRESETS, load_scenario, preset

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_RUNTIME = 3

log = logging.getLogger("wavris")


def _mode_notes(s):
    top = max(s.sweep_values) if s.sweep_variable == "P" else s.modes
    geoms = [s.geometry_for(v) for v in s.sweep_values]
    notes = []
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        for geom in {g.n_x: g for g in geoms}.values():
            check_mode_frequencies(min(top, geom.n_x), s.line_for(geom), s.frequency)
    notes.extend(str(w.message) for w in caught)
    return notes


def _execute(s, out, workers):
    log.info("running %s: %d trial(s), sweep %s=%s, %d worker(s)",
             s.id, s.trials, s.sweep_variable, list(s.sweep_values), workers)
    result = run_scenario(s, workers=workers)
    write_outputs(result, out, s)
    for entry in result.summary["per_value"]:
        gap = entry["gap_db"]
        log.info("  %s=%s  median gap %s", s.sweep_variable, entry["swept_value"],
                 "n/a" if gap is None else f"{gap['median']:.3f} dB")
    if "scaling" in result.summary:
        log.info("  log-log slope %.4f", result.summary["scaling"]["slope"])
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="wavris", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a scenario file")
    run.add_argument("--scenario", required=True)
    run.add_argument("--out", required=True)
    run.add_argument("--seed", type=int)
    run.add_argument("--workers", type=int, default=1)

    pre = sub.add_parser("preset", help="run a shipped preset")
    pre.add_argument("--name", required=True, choices=sorted(PRESETS))
    pre.add_argument("--out", required=True)
    pre.add_argument("--seed", type=int)
    pre.add_argument("--trials", type=int)
    pre.add_argument("--workers", type=int, default=1)

    val = sub.add_parser("validate", help="validate a scenario file")
    val.add_argument("--scenario", required=True)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(message)s")
    try:
        if args.command == "validate":
            s = load_scenario(args.scenario)
            print(f"{args.scenario}: valid ({s.id})")
            for note in _mode_notes(s):
                print(f"note: {note}")
            return EXIT_OK
        if args.command == "run":
            s = load_scenario(args.scenario)
            if args.seed is not None:
                s = s.with_overrides(seed=args.seed)
        else:
            s = preset(args.name).with_overrides(seed=args.seed, trials=args.trials)
    except ScenarioError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_INVALID
    try:
        return _execute(s, args.out, max(1, args.workers))
    except Exception as exc:  # noqa: BLE001 - any runtime failure maps to exit code 3
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
