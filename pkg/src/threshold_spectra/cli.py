"""Command line entry point: ``threshold-spectra threshold|converge|check``.

Exit codes: 0 success, 1 numeric failure (non-convergence or a failed check),
2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__, diagnostics
from .birman_schwinger import extrapolate_threshold, lambda_curve
from .config import ConfigError, RunConfig, load_config
from .errors import (
    ContractViolation,
    DegenerateOperator,
    DomainError,
    InadmissibleWeight,
    InconsistencyError,
    InvalidTestFunction,
    IterationLimitError,
)
from .kinetic import DIRAC, LOWER
from .threshold_state import (
    build_threshold_state,
    gaussian_test_function,
    resonance_criterion,
    weak_residual,
)
from .weights import certify_convergence

OUT_ENV = "THRESHOLD_SPECTRA_OUT"
THREADS_ENV = "THRESHOLD_SPECTRA_THREADS"

EXIT_OK = 0
EXIT_NUMERIC = 1
EXIT_USAGE = 2

THRESHOLD_COLUMNS = ("E", "lambda", "alpha", "mu_cauchy_residual")
CONVERGENCE_COLUMNS = ("E", "weighted_distance", "smallp_factor", "largep_factor")


class UsageError(Exception):
    pass


def _number(x):
    if isinstance(x, complex):
        return {"re": x.real, "im": x.imag}
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    return x


def write_csv(path, columns, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([repr(float(row[c])) for c in columns])


def write_json(path, payload):
    with open(path, "w") as fh:
        json.dump(diagnostics._jsonable(payload), fh, indent=2, sort_keys=True, default=_number)
        fh.write("\n")


def _out_dir(args, cfg):
    out = args.out or os.environ.get(OUT_ENV) or (cfg.output.directory if cfg else "results")
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _load(args):
    if args.config is None:
        cfg = RunConfig()
    else:
        cfg = load_config(args.config)
        table = cfg.potential.table_path
        if table and not Path(table).is_absolute():
            resolved = str(Path(args.config).resolve().parent / table)
            cfg = cfg.model_copy(update={"potential": cfg.potential.model_copy(update={"table_path": resolved})})
    if args.seed is not None:
        cfg = cfg.model_copy(update={"seed": args.seed})
    return cfg


def _tags(cfg):
    tags = {"branch": cfg.branch, "model": cfg.model.kind}
    if cfg.model.kind == DIRAC and cfg.branch == LOWER:
        tags["lower_branch"] = "T - lambda V near -2m; equivalent to the mirrored upper-branch problem T + lambda V"
    return tags


def run_threshold(cfg):
    model = cfg.kinetic_model()
    grid = cfg.grid3()
    potential = cfg.potential_spec()
    result = lambda_curve(model, potential, cfg.energies(), grid, branch=cfg.branch, tol=cfg.solver.tol,
                          max_iter=cfg.solver.max_iter, method=cfg.solver.method, seed=cfg.seed)
    extrapolate_threshold(result, rungs=cfg.diagnostics.rungs, tol=cfg.solver.tol, method=cfg.solver.method,
                          seed=cfg.seed)
    return result, potential


def threshold_summary(result):
    return {
        "lambda_c": result.lambda_c,
        "lambda_c_direct": result.lambda_c_direct,
        "fit": result.fit,
        "eigen_relation_residual": result.eigen_relation_residual,
        "multiplicities": result.multiplicities,
        "mu_0_source": result.mu_0_source,
    }


def cmd_threshold(cfg, out):
    result, _ = run_threshold(cfg)
    if "csv" in cfg.output.formats:
        write_csv(out / "threshold.csv", THRESHOLD_COLUMNS, result.table())
    summary = _summary(cfg, "threshold", threshold=threshold_summary(result))
    if "json" in cfg.output.formats:
        write_json(out / "summary.json", summary)
    return EXIT_OK, summary


def _test_pack(grid, components):
    pack = []
    for center in ((0.0, 0.0, 0.0), (0.5, 0.0, 0.0), (0.0, 0.7, -0.3), (-0.4, 0.4, 0.4)):
        for comp in range(components):
            pack.append(gaussian_test_function(grid, center, 0.7, components, comp))
    return pack


def cmd_converge(cfg, out):
    model = cfg.kinetic_model()
    result, potential = run_threshold(cfg)
    state = build_threshold_state(model, potential, result.mu_0, result.lambda_c, branch=cfg.branch,
                                  subsample=cfg.diagnostics.subsample, seed=cfg.seed)
    resonance_criterion(state, potential, tol_c=cfg.diagnostics.tol_c)
    try:
        residual = weak_residual(state, model, potential, _test_pack(state.phi_position.grid, model.components))
    except InvalidTestFunction as exc:
        residual = None
        residual_error = str(exc)
    else:
        residual_error = None
    weights_out = []
    failed = False
    for weight in cfg.weight_list():
        try:
            rep = certify_convergence(model, potential, weight, result, state, rungs=cfg.diagnostics.rungs,
                                      floor=cfg.diagnostics.floor)
        except InadmissibleWeight as exc:
            weights_out.append({"weight": weight.name, "admissible": False, "verdict": exc.verdict.as_dict()})
            continue
        if "csv" in cfg.output.formats:
            write_csv(out / f"convergence_{weight.name}.csv", CONVERGENCE_COLUMNS, rep.table())
        failed = failed or not rep.passed
        weights_out.append({
            "weight": weight.name, "admissible": True, "verdict": rep.verdict.as_dict(), "passed": rep.passed,
            "decreasing": rep.decreasing, "d_last": rep.distances[-1],
            "d_last_relative": rep.relative_distances[-1], "floor": rep.floor,
            "smallp_factor_threshold": rep.smallp_factor_threshold,
            "largep_factor_threshold": rep.largep_factor_threshold,
        })
    if "csv" in cfg.output.formats:
        write_csv(out / "threshold.csv", THRESHOLD_COLUMNS, result.table())
    crit = state.criterion_value
    state_summary = {
        "lambda_c": state.lambda_c,
        "classification": state.classification,
        "criterion_value": np.atleast_1d(crit).tolist(),
        "criterion_threshold": state.criterion_threshold,
        "weak_residual": residual,
        "weak_residual_error": residual_error,
        "route_discrepancy": state.route_discrepancy,
        "meta": state.meta,
    }
    summary = _summary(cfg, "converge", threshold=threshold_summary(result), state=state_summary,
                       weights=weights_out)
    if "json" in cfg.output.formats:
        write_json(out / "summary.json", summary)
    return (EXIT_NUMERIC if failed else EXIT_OK), summary


def _suite_config(cfg, explicit, seed):
    if not explicit:
        return diagnostics.SuiteConfig() if seed is None else diagnostics.SuiteConfig(seed=seed)
    return diagnostics.SuiteConfig(n=cfg.grid.n, box_length=cfg.grid.box_length, mass=cfg.model.mass,
                                   seed=cfg.seed, ladder_first=cfg.energy_ladder.E0,
                                   ladder_ratio=cfg.energy_ladder.ratio, ladder_count=cfg.energy_ladder.count)


def cmd_check(cfg, out, suite, explicit_config, seed=None):
    names = diagnostics.SUITES if suite == "all" else (suite,)
    if any(n not in diagnostics.SUITES for n in names):
        raise UsageError(f"unknown suite {suite!r}; choose from {', '.join(diagnostics.SUITES)} or all")
    sc = _suite_config(cfg, explicit_config, seed)
    with ThreadPoolExecutor(max_workers=len(names)) as pool:
        results = dict(zip(names, pool.map(lambda n: diagnostics.run_suite(n, sc), names)))
    reports = [r.as_dict() for n in names for r in results[n]]
    failed = [r["check_name"] for r in reports if not r["passed"]]
    for r in reports:
        print(f"{'PASS' if r['passed'] else 'FAIL'} {r['check_name']}: measured={r['measured']} target={r['target']}")
    summary = _summary(cfg, "check", suite=suite, checks=reports, failed=failed)
    if "json" in cfg.output.formats:
        write_json(out / f"checks_{suite}.json", summary)
    return (EXIT_NUMERIC if failed else EXIT_OK), summary


def _summary(cfg, command, **sections):
    return {
        "command": command,
        "version": __version__,
        "tags": _tags(cfg),
        "conventions": {"zero_node": "p = 0 node of zero-energy multipliers set to 0"},
        "config": cfg.model_dump(mode="json"),
        **sections,
    }


def build_parser():
    parser = argparse.ArgumentParser(prog="threshold-spectra", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, helptext in (("threshold", "lambda curve and threshold extrapolation"),
                           ("converge", "threshold state, resonance test and weighted convergence"),
                           ("check", "diagnostic suite")):
        p = sub.add_parser(name, help=helptext)
        if name == "check":
            p.add_argument("suite", help=f"one of {', '.join(diagnostics.SUITES)} or all")
        p.add_argument("--config", help="JSON run configuration")
        p.add_argument("--out", help=f"output directory (overrides {OUT_ENV} and the config)")
        p.add_argument("--seed", type=int, help="random seed (overrides the config)")
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        cfg = _load(args)
        out = _out_dir(args, cfg)
        if args.command == "threshold":
            code, _ = cmd_threshold(cfg, out)
        elif args.command == "converge":
            code, _ = cmd_converge(cfg, out)
        else:
            code, _ = cmd_check(cfg, out, args.suite, args.config is not None, args.seed)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (UsageError, ContractViolation, DomainError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (IterationLimitError, InconsistencyError, DegenerateOperator) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    print(f"results written to {out}")
    return code


if __name__ == "__main__":
    sys.exit(main())
