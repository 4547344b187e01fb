"""Command-line front end.

Subcommands:

* ``solve``  - build the polynomial system from a scenario file, find all
  solutions, print them with feasibility verdicts.
* ``fdoar``  - run the consensus estimator on a scenario file.
* ``sweep``  - Monte Carlo noise sweep, writes results/summary CSVs.
* ``bounds`` - verify the measurement-count finiteness bound for one cell.

Exit codes: 0 success, 1 input error, 2 no feasible solution. Units in
all files are fixed (m, m/s, s).
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import kernels
from ._io import atomic_write_text
from .errors import FdoalocError, NoFeasibleSolutionError, ScenarioFormatError
from .filtering import feasible_candidates
from .ransac import RansacConfig, run_fdoar, write_trace_csv
from .scenario_io import load_scenario
from .simulate import (
    ExperimentConfig,
    edge_interior_medians,
    run_noise_sweep,
    verify_measurement_bounds,
    write_results_csv,
    write_summary_csv,
)
from .systems import (
    GeoSystemSpec,
    add_altitude_constraint,
    build_fdoa,
    build_geo_system,
    build_tdoa,
)
from .tracking import solve


class _Parser(argparse.ArgumentParser):
    """argparse with exit code 1 on bad input (2 is 'no solution' here)."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _add_common(p):
    p.add_argument("--seed", type=int, default=0, help="RNG seed (full determinism)")
    p.add_argument(
        "--threads", type=int, default=0,
        help="solver threads, 0 = auto (all cores)",
    )


def _apply_threads(n: int):
    if n > 0 and kernels.NUMBA_ENABLED:
        import numba

        numba.set_num_threads(n)


def build_parser() -> _Parser:
    parser = _Parser(prog="fdoaloc", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("solve", help="solve a scenario's polynomial system")
    p.add_argument("scenario", help="scenario file (.json or line format)")
    p.add_argument("--dim", type=int, choices=(2, 3), default=3)
    p.add_argument("--alt", type=float, default=None,
                   help="known-altitude constraint value (meters)")
    p.add_argument("--alt-kind", choices=("flat", "sphere"), default="flat")
    p.add_argument("--verbose", action="store_true",
                   help="also print rejected endpoints and path statistics")
    _add_common(p)

    p = sub.add_parser("fdoar", help="consensus emitter estimate")
    p.add_argument("scenario")
    p.add_argument("--maxiter", type=int, default=20)
    p.add_argument("--epsilon", type=float, default=0.03,
                   help="inlier tolerance in m/s")
    p.add_argument("--sample-size", type=int, default=3)
    p.add_argument("--trace-csv", default=None,
                   help="write the per-iteration trace to this CSV file")
    _add_common(p)

    p = sub.add_parser("sweep", help="Monte Carlo noise sweep")
    p.add_argument("--config", default=None,
                   help="JSON experiment config; defaults to the standard "
                        "100 m cube, 40 pairs, 20 iterations, eps 0.03, "
                        "50 trials per level")
    p.add_argument("--out", default=".", help="output directory for CSVs")
    p.add_argument("--progress", action="store_true")
    _add_common(p)

    p = sub.add_parser("bounds", help="verify a measurement-count bound")
    p.add_argument("--mode", choices=("fdoa", "tdoa", "tdoa+fdoa"), required=True)
    p.add_argument("--dim", type=int, choices=(2, 3), default=3)
    p.add_argument("--alt", action="store_true",
                   help="include the known-altitude constraint")
    p.add_argument("--repeats", type=int, default=5)
    _add_common(p)
    return parser


def _cmd_solve(args) -> int:
    scenario = load_scenario(args.scenario)
    fdoa = scenario.fdoa_measurements
    tdoa = scenario.tdoa_measurements
    if fdoa and tdoa:
        spec = GeoSystemSpec(mode="tdoa+fdoa", dimension=args.dim)
        system = build_geo_system(fdoa, tdoa, spec)
    elif fdoa:
        system = build_fdoa(fdoa, GeoSystemSpec(mode="fdoa", dimension=args.dim))
    else:
        system = build_tdoa(tdoa, GeoSystemSpec(mode="tdoa", dimension=args.dim))
    if args.alt is not None:
        system = add_altitude_constraint(system, args.alt, kind=args.alt_kind)
    concrete = system.bind_measurements(fdoa, tdoa)
    result = solve(concrete, seed=args.seed)
    candidates, rejections = feasible_candidates(result, system)

    n = result.distinct_solutions.shape[0]
    print(f"distinct solutions: {n} "
          f"(finiteness: {result.finiteness_flag}, gamma seed {args.seed})")
    feasible_prov = {c.provenance: c for c in candidates}
    for i in range(n):
        vec = result.distinct_solutions[i]
        prov = result.cluster_path_indices[i]
        res = result.paths[prov].final_residual
        coord = ", ".join(f"{v.real:.6f}{v.imag:+.2e}i" for v in vec[: args.dim])
        if prov in feasible_prov:
            cand = feasible_prov[prov]
            pos = ", ".join(f"{v:.6f}" for v in cand.emitter)
            print(f"  [{i}] FEASIBLE emitter=({pos}) m residual={res:.2e}")
        else:
            print(f"  [{i}] infeasible ({coord}) residual={res:.2e}")
    if args.verbose:
        for rej in rejections:
            print(f"  rejected path {rej.provenance}: {rej.reason} ({rej.detail})")
        statuses = {}
        for p in result.paths:
            statuses[p.status] = statuses.get(p.status, 0) + 1
        print(f"  paths: {statuses}")
    if scenario.truth is not None and candidates:
        best = min(
            np.linalg.norm(c.emitter - scenario.truth.position[: args.dim])
            for c in candidates
        )
        print(f"best candidate error vs truth: {best:.3e} m")
    return 0 if candidates else 2


def _cmd_fdoar(args) -> int:
    scenario = load_scenario(args.scenario)
    config = RansacConfig(
        maxiter=args.maxiter,
        epsilon=args.epsilon,
        sample_size=args.sample_size,
        rng_seed=args.seed,
    )
    estimate = run_fdoar(scenario, config)
    pos = ", ".join(f"{v:.6f}" for v in estimate.emitter)
    n = len(estimate.inlier_mask)
    print(f"estimate: ({pos}) m")
    print(f"score: {estimate.score}/{n} inliers")
    outliers = [str(i) for i, ok in enumerate(estimate.inlier_mask) if not ok]
    print("outlier measurements: " + (" ".join(outliers) if outliers else "none"))
    if scenario.truth is not None:
        err = float(np.linalg.norm(estimate.emitter - scenario.truth.position))
        print(f"error vs truth: {err:.3e} m")
    if args.trace_csv:
        write_trace_csv(estimate, args.trace_csv)
        print(f"trace written to {args.trace_csv}")
    return 0


_CONFIG_KEYS = {
    "cube_side", "n_pairs", "velocity_range", "noise_levels",
    "trials_per_level", "rng_seed", "ransac",
}
_RANSAC_KEYS = {"maxiter", "epsilon", "sample_size", "rng_seed"}


def _load_experiment_config(path, seed) -> ExperimentConfig:
    if path is None:
        return ExperimentConfig(rng_seed=seed)
    with open(path) as fh:
        doc = json.load(fh)
    if not isinstance(doc, dict):
        raise ScenarioFormatError("experiment config must be a JSON object")
    unknown = set(doc) - _CONFIG_KEYS
    if unknown:
        raise ScenarioFormatError(f"unknown config field(s): {sorted(unknown)}")
    ransac_doc = doc.pop("ransac", {})
    unknown = set(ransac_doc) - _RANSAC_KEYS
    if unknown:
        raise ScenarioFormatError(f"unknown ransac field(s): {sorted(unknown)}")
    ransac = RansacConfig(**ransac_doc)
    if "velocity_range" in doc:
        doc["velocity_range"] = tuple(doc["velocity_range"])
    if "noise_levels" in doc:
        doc["noise_levels"] = tuple(doc["noise_levels"])
    doc.setdefault("rng_seed", seed)
    return ExperimentConfig(ransac=ransac, **doc)


def _cmd_sweep(args) -> int:
    config = _load_experiment_config(args.config, args.seed)
    result = run_noise_sweep(config, progress=args.progress)
    os.makedirs(args.out, exist_ok=True)
    results_path = os.path.join(args.out, "results.csv")
    summary_path = os.path.join(args.out, "summary.csv")
    write_results_csv(result.records, results_path)
    write_summary_csv(result, summary_path)
    print("noise_level_pct  median_error_m")
    for level, median in result.medians:
        print(f"{level:>14g}  {median:.6g}")
    split = edge_interior_medians(result.records, config)
    for level, (edge, interior, n_edge, n_int) in split.items():
        if edge is not None and interior is not None:
            print(
                f"level {level:g}%: edge median {edge:.4g} m (n={n_edge}), "
                f"interior median {interior:.4g} m (n={n_int})"
            )
    print(f"wrote {results_path} and {summary_path}")
    return 0


def _cmd_bounds(args) -> int:
    report = verify_measurement_bounds(
        args.mode, args.dim, args.alt, seed=args.seed, repeats=args.repeats
    )
    alt = "+alt" if args.alt else ""
    print(f"mode {args.mode}{alt} {args.dim}D: minimum = {report.minimum}")
    for v in report.at_minimum:
        print(
            f"  m={v.m}: {v.verdict} (truth found: {v.truth_found}, "
            f"{v.n_distinct} candidates) [{v.note}]"
        )
    for v in report.below_minimum:
        print(f"  m={v.m}: {v.verdict} [{v.note}]")
    print("consistent with the bound" if report.consistent
          else "INCONSISTENT with the bound")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    _apply_threads(args.threads)
    try:
        if args.command == "solve":
            return _cmd_solve(args)
        if args.command == "fdoar":
            return _cmd_fdoar(args)
        if args.command == "sweep":
            return _cmd_sweep(args)
        return _cmd_bounds(args)
    except NoFeasibleSolutionError as exc:
        print(f"no feasible solution: {exc}", file=sys.stderr)
        return 2
    except (FdoalocError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
