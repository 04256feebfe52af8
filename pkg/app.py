"""
radreact: radiation-reaction equations of motion, command-line entry point.

Run with:
    python app.py run scenarios/fo_constant_force.json
    python app.py compare runs/fo_sinusoid_sweep runs/ald_sinusoid_sweep --metric max_position_deviation
    python app.py poles series --order 12

Exit status: 0 success, 1 software error, 2 physics verdict.
"""

import argparse
import json
import sys
from pathlib import Path

from loguru import logger

from core.comparison import METRICS
from core.config import OUT_DIR
from core.exceptions import EXIT_OK, EXIT_VERDICT, NonCausalModel, RadReactError, exit_code_for
from core.logging import setup_logging
from core.models import NONREL_KINDS, ModelNR, Verdict
from core.physics import electron, tau_e
from dynamics.causality import find_poles, pole_survey, susceptibility_of
from services.runner import compare_runs, run_scenario
from services.scenario import load_scenario
from services.storage import pole_report_dict, to_jsonable, write_report

POLE_MODELS = NONREL_KINDS + ("all",)


def _print_json(payload) -> None:
    print(json.dumps(to_jsonable(payload), sort_keys=True, indent=2))


def _cmd_run(args: argparse.Namespace) -> int:
    scenario = load_scenario(args.scenario, seed=args.seed)
    result = run_scenario(scenario, args.out_dir, strict_causal=args.strict_causal)
    print(f"[radreact] {result.name}: artifacts in {result.directory}")
    return EXIT_OK


def _cmd_compare(args: argparse.Namespace) -> int:
    report = compare_runs(args.run_a, args.run_b, args.metric)
    if args.out is not None:
        write_report(args.out, report)
    _print_json(report)
    # a computed comparison that misses its tolerance is a physics answer, not a crash
    return EXIT_VERDICT if report.passed is False else EXIT_OK


def _cmd_poles(args: argparse.Namespace) -> int:
    cutoff = None
    if args.cutoff_ratio is not None:
        cutoff = args.cutoff_ratio / tau_e(electron())
    particle = electron(cutoff_omega=cutoff)
    if args.model == "all":
        reports = pole_survey(particle, args.order or 30, args.spring_constant)
    else:
        model = ModelNR(
            args.model,
            particle,
            order=args.order if args.model == "series" else None,
            spring_constant=args.spring_constant if args.model == "oscillator" else None,
        )
        reports = [find_poles(susceptibility_of(model))]
    _print_json([pole_report_dict(r) for r in reports])
    flagged = [r.model for r in reports if r.verdict is Verdict.NON_CAUSAL]
    if args.strict_causal and flagged:
        raise NonCausalModel(flagged)
    return EXIT_OK


def _parse_args(argv: list[str] | None = None) -> argparse.Namespace:
    parser = argparse.ArgumentParser(
        prog="radreact",
        description="Integrate and compare radiation-reaction equations of motion.",
    )
    parser.add_argument("--log-level", default=None, help="override RADREACT_LOG_LEVEL")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a scenario file")
    run.add_argument("scenario", type=Path)
    run.add_argument("--out-dir", type=Path, default=Path(OUT_DIR))
    run.add_argument("--strict-causal", action="store_true", help="exit 2 when the model has upper half-plane poles")
    run.add_argument("--seed", type=int, default=None, help="override every seed in the scenario")
    run.set_defaults(handler=_cmd_run)

    compare = sub.add_parser("compare", help="compare two run directories")
    compare.add_argument("run_a", type=Path)
    compare.add_argument("run_b", type=Path, nargs="?", default=None)
    compare.add_argument("--metric", required=True, choices=METRICS)
    compare.add_argument("--out", type=Path, default=None, help="also write the report here")
    compare.set_defaults(handler=_cmd_compare)

    poles = sub.add_parser("poles", help="susceptibility poles of a model (electron constants)")
    poles.add_argument("model", choices=POLE_MODELS)
    poles.add_argument("--order", type=int, default=None, help="series truncation N (max order for 'all')")
    poles.add_argument("--spring-constant", type=float, default=None, help="oscillator K, dyn/cm")
    poles.add_argument("--cutoff-ratio", type=float, default=None, help="tau_e * Omega of the structured electron")
    poles.add_argument("--strict-causal", action="store_true")
    poles.set_defaults(handler=_cmd_poles)
    return parser.parse_args(argv)


def main(argv: list[str] | None = None) -> int:
    args = _parse_args(argv)
    setup_logging(args.log_level)
    try:
        return args.handler(args)
    except RadReactError as exc:
        code = exit_code_for(exc)
        if code == EXIT_VERDICT:
            logger.warning(f"[radreact] ⚠️ {exc}")
        else:
            logger.error(f"[radreact] {type(exc).__name__}: {exc}")
        return code


if __name__ == "__main__":
    sys.exit(main())
