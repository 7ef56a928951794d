"""Command-line entry point.

Exit status: 0 success, 1 bad configuration, 2 solver failure, 3 a sign or
oracle check failed.
"""

from __future__ import annotations

import argparse
import os
import sys

from . import oracle, scenarios
from .equilibrium import aggregates
from .errors import ParseError, ValidationError

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_CHECK = 0, 1, 2, 3


def _config(args):
    config = scenarios.load_config(args.config) if args.config else scenarios.ScenarioConfig()
    return scenarios.with_overrides(config, out=args.out, resolution=args.resolution)


def cmd_solve(config, args):
    state, files = scenarios.run_benchmark(config)
    rows = dict(scenarios.summary_rows(state))
    print(" ".join(f"{k}={rows[k]:.6g}" for k in ("w", "v", "H", "M", "Y/L")))
    return EXIT_OK


def cmd_compare(config, args):
    report = scenarios.run_comparative(config)
    for r in [report.benchmark] + report.scenarios:
        status = "ok" if r.state is not None else f"FAILED: {r.error}"
        print(f"{r.label:<16} {r.description:<20} {status}")
    for c in report.checks:
        print(f"{'pass' if c.passed else 'FAIL'}  {c.proposition} [{c.scenario}] {c.claim}: "
              f"expected {c.expected}, observed {c.observed}")
    if report.solver_failed:
        return EXIT_SOLVER
    return EXIT_OK if report.checks_passed else EXIT_CHECK


def cmd_region(config, args):
    os.makedirs(config.output.dir, exist_ok=True)
    scenarios.write_effective_config(config, config.output.dir)
    state = scenarios.solve(config)
    path = scenarios.emit_region_data(state, config)
    print(path)
    return EXIT_OK


def cmd_transition(config, args):
    state, path, file = scenarios.run_transition(config)
    print(f"M* = {state.M:.6g}, H* = {state.H:.6g}; M_T = {path.M[-1]:.6g}, H_T = {path.H[-1]:.6g}")
    return EXIT_OK


def cmd_verify(config, args):
    out = config.output.dir
    os.makedirs(out, exist_ok=True)
    scenarios.write_effective_config(config, out)
    grid = config.grid.build()
    state = scenarios.solve(config, grid=grid)
    params, prices = config.params, state.prices
    points = oracle.default_points(config.grid)
    reports = (
        oracle.bank_effort_reports(points, prices.w, params)
        + oracle.vc_effort_reports(points, prices, params)
        + oracle.fd_sign_report(params, prices, oracle.default_lattice(prices, config.grid))
    )
    scenarios.write_table(
        os.path.join(out, "oracle.csv"),
        ("case", "closed_form", "oracle", "rel_error", "tolerance", "passed", "advisory"),
        [(r.case, r.closed_form, r.oracle, r.rel_error, r.tolerance, r.passed, r.advisory) for r in reports],
    )

    agg = aggregates(prices, grid, params)
    mc = oracle.monte_carlo_demand(prices, config.grid, params, seed=args.seed)
    mc_rows = []
    for name, grid_value in (("effort", agg.effort), ("labor", agg.labor),
                             ("value_e", agg.value_e), ("value_v", agg.value_v)):
        est = mc[name]
        z = (grid_value - est.mean) / est.std_error
        mc_rows.append((name, grid_value, est.mean, est.std_error, z, abs(z) <= 3.0))
    scenarios.write_table(os.path.join(out, "montecarlo.csv"),
                          ("quantity", "grid", "mc_mean", "mc_std_error", "z_score", "passed"), mc_rows)

    failed = [r for r in reports if not r.passed and not r.advisory]
    failed_mc = [row for row in mc_rows if not row[-1]]
    print(f"{len(reports) - len(failed)}/{len(reports)} oracle checks passed; "
          f"{len(mc_rows) - len(failed_mc)}/{len(mc_rows)} Monte Carlo checks within 3 standard errors")
    return EXIT_CHECK if failed or failed_mc else EXIT_OK


COMMANDS = {
    "solve": (cmd_solve, "solve the benchmark steady state"),
    "compare": (cmd_compare, "benchmark plus perturbed economies and sign checks"),
    "region": (cmd_region, "financing-region boundaries of the benchmark"),
    "transition": (cmd_transition, "mass path toward the benchmark steady state"),
    "verify": (cmd_verify, "brute-force oracle and Monte Carlo checks"),
}


def build_parser():
    parser = argparse.ArgumentParser(prog="vcequilibrium", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="scenario config file (defaults if omitted)")
        p.add_argument("--out", help="output directory (overrides output.dir)")
        p.add_argument("--resolution", type=int, help="grid nodes per axis (overrides grid.nz, grid.nc)")
        p.add_argument("--seed", type=int, default=0, help="seed for the Monte Carlo checks")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = _config(args)
    except (ParseError, ValidationError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    handler = COMMANDS[args.command][0]
    try:
        return handler(config, args)
    except scenarios.SOLVER_ERRORS as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
