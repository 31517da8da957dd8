"""Command-line front end.

Exit codes: 0 success (a singular ``inf`` bound is a valid answer), 2 invalid
input or usage, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .bounds import BiasTerm, Theorem, bound_asymptotic, bound_biased, bound_biased_simplified, bound_unbiased
from .correlation import Flavor, r_continuous, r_discrete
from .errors import NumericalError, ValidationError
from .scenario import load_scenario
from .scheduler import optimize, sweep_2d
from .signatures import load_catalog
from .simulate import empirical_bias, generate, monte_carlo

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_NUMERICAL = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_INVALID)


def _write(path, text):
    if path is None:
        return
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def _emit(record, out):
    text = json.dumps(record, indent=2)
    print(text)
    _write(out, text + "\n")


def _require_tau(scenario):
    if scenario.tau is None:
        raise ValidationError("scenario has no 'schedule'; this command needs one")
    return scenario.tau


def _bias_model(scenario, args):
    if scenario.bias is None:
        raise ValidationError(f"--theorem {args.theorem} needs a 'bias' section in the scenario")
    if isinstance(scenario.bias, dict):
        emp = scenario.bias["empirical"]
        return empirical_bias(
            scenario.catalog, scenario.grid, scenario.noise, scenario.feasible,
            trials=emp["trials"], seed=emp["seed"], step=emp["step"], config=scenario.estimator,
        )
    return scenario.bias


def cmd_bound(args, scenario):
    tau = _require_tau(scenario)
    iw = scenario.noise.fisher_information()
    theorem = Theorem(args.theorem)
    flavor = Flavor(args.flavor)
    if theorem is Theorem.COR2 or (theorem is Theorem.THM1 and flavor is Flavor.CONTINUOUS):
        rc = r_continuous(scenario.catalog, tau, scenario.quadrature)
        # scaled by the grid step so the value is comparable with the discrete bound
        spacing = scenario.grid.spacing if scenario.grid.is_uniform else None
        result = bound_asymptotic(rc, scenario.weights, iw, spacing)
    else:
        r = r_discrete(scenario.catalog, tau, scenario.grid)
        if theorem is Theorem.THM1:
            result = bound_unbiased(r, scenario.weights, iw)
        elif theorem is Theorem.THM2:
            result = bound_biased(r, scenario.weights, iw, _bias_model(scenario, args), tau, args.bias_term)
        else:
            result, _, _ = bound_biased_simplified(
                r, scenario.weights, iw, _bias_model(scenario, args), tau, args.bias_term
            )
    _emit(result.to_record(), args.out or scenario.output_path("bound"))
    return EXIT_OK


def _progress(done, total):
    print(f"\rsweep: row {done}/{total}", end="" if done < total else "\n", file=sys.stderr)


def cmd_sweep(args, scenario):
    spec = scenario.sweep
    i, j = args.axes if args.axes else spec.axes
    lo, hi = scenario.feasible.effective_bounds()
    range_i = args.range_i or spec.range_i or (lo[i], hi[i])
    range_j = args.range_j or spec.range_j or (lo[j], hi[j])
    res = args.resolution or spec.resolution
    if res < 1:
        raise ValidationError("sweep resolution must be at least 1")
    if spec.fixed is not None:
        fixed = np.array(spec.fixed)
    elif scenario.tau is not None:
        fixed = scenario.tau
    else:
        fixed = lo.copy()
    result = sweep_2d(
        scenario.problem(args.flavor), i, j, fixed,
        np.linspace(*range_i, res), np.linspace(*range_j, res),
        cap=args.cap or spec.cap, workers=args.threads, progress=_progress,
    )
    out = args.out or scenario.output_path("sweep")
    if out is None:
        print(result.to_csv(), end="")
    else:
        out = Path(out)
        out.parent.mkdir(parents=True, exist_ok=True)
        result.write(out)
    meta = result.metadata()
    print(
        f"sweep {res}x{res} ({result.flavor.value}): {meta['capped_count']} capped cells, "
        f"{meta['singular_count']} singular",
        file=sys.stderr,
    )
    return EXIT_OK


def cmd_schedule(args, scenario):
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.starts is not None:
        overrides["starts"] = args.starts
    if args.threads:
        overrides["workers"] = args.threads
    config = replace(scenario.ascent, **overrides)
    solution = optimize(scenario.problem(args.flavor), config)
    record = solution.to_record()
    _write(args.out or scenario.output_path("schedule"), json.dumps(record, indent=2) + "\n")
    labels = scenario.catalog.labels
    tau = ", ".join(f"{lab}={t:.4f}" for lab, t in zip(labels, solution.tau))
    print(f"best schedule: {tau}")
    print(f"objective trace(Pi R^-1) = {record['objective']}  bound = {record['bound']}")
    print(f"termination: {solution.termination} (start {solution.start_index} of {config.starts})")
    return EXIT_OK


def cmd_simulate(args, scenario):
    tau = _require_tau(scenario)
    trials = args.trials or scenario.trials
    seed = scenario.seed if args.seed is None else args.seed
    report, bound = monte_carlo(
        scenario.catalog, tau, scenario.grid, scenario.noise, scenario.weights,
        trials=trials, seed=seed, search=scenario.feasible, config=scenario.estimator,
        workers=args.threads,
    )
    record = {"report": report.to_record(), "bound": bound.to_record()}
    _write(args.out or scenario.output_path("simulate"), json.dumps(record, indent=2) + "\n")
    _write(args.trials_out or scenario.output_path("trials"), report.trials_csv())
    trace_path = args.trace or scenario.output_path("trace")
    if trace_path is not None:
        _write(trace_path, generate(scenario.catalog, tau, scenario.grid, scenario.noise, seed).trace_csv())
    print(
        f"empirical weighted MSE {report.mse:.6g} +/- {report.mse_standard_error:.2g} (SE) "
        f"vs lower bound {bound.value:.6g} over {trials} trials"
    )
    return EXIT_OK


def cmd_catalog_validate(args):
    catalog = load_catalog(args.path)
    for label, sig in zip(catalog.labels, catalog.signatures):
        print(f"{label}: {sig.kind}, duration {sig.duration:g}")
    print(f"ok: {len(catalog)} signatures")
    return EXIT_OK


def build_parser():
    parser = _Parser(prog="nilmbound", description="Estimation-error bounds for NILM and privacy scheduling.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, flavor=True):
        p.add_argument("--scenario", required=True, help="scenario YAML file")
        if flavor:
            p.add_argument("--flavor", choices=[f.value for f in Flavor], default="discrete")
        p.add_argument("--threads", type=int, default=1, help="worker cap")
        p.add_argument("--out", help="output path (overrides the scenario)")

    p = sub.add_parser("bound", help="evaluate a lower bound at the scenario schedule")
    common(p)
    p.add_argument("--theorem", choices=[t.value for t in Theorem], default="thm1")
    p.add_argument("--bias-term", choices=[b.value for b in BiasTerm], default="as_stated")
    p.set_defaults(func=cmd_bound)

    p = sub.add_parser("sweep", help="bound surface over two start times")
    common(p)
    p.add_argument("--axes", type=int, nargs=2, metavar=("I", "J"), help="0-based appliance indices")
    p.add_argument("--range-i", type=float, nargs=2, metavar=("LO", "HI"))
    p.add_argument("--range-j", type=float, nargs=2, metavar=("LO", "HI"))
    p.add_argument("--resolution", type=int)
    p.add_argument("--cap", type=float)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("schedule", help="privacy-optimal schedule by projected gradient ascent")
    common(p)
    p.add_argument("--seed", type=int)
    p.add_argument("--starts", type=int)
    p.set_defaults(func=cmd_schedule)

    p = sub.add_parser("simulate", help="Monte Carlo ML attacker versus the bound")
    common(p, flavor=False)
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--trials-out", help="per-trial CSV dump")
    p.add_argument("--trace", help="write one noiseless/noisy aggregate time series as CSV")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("catalog", help="signature catalog utilities")
    csub = p.add_subparsers(dest="catalog_command", required=True, parser_class=_Parser)
    v = csub.add_parser("validate", help="parse and validate a catalog file")
    v.add_argument("path")
    v.set_defaults(func=None, catalog_func=cmd_catalog_validate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "catalog":
            return args.catalog_func(args)
        scenario = load_scenario(args.scenario)
        return args.func(args, scenario)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
