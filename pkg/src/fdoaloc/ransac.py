"""Consensus-driven FDOA geolocation.

Each iteration draws a minimal sample of measurements, solves the induced
polynomial system, gates the endpoints, and scores every feasible
candidate against all measurements. The family is solved once at a random
complex parameter point and every iteration reuses that basis through a
parameter homotopy; a fresh total-degree solve only happens when a
continuation loses too many paths.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .errors import NoFeasibleSolutionError
from .filtering import FeasibleCandidate, feasible_candidates, gate_measurements
from .geometry import Scenario, fdoa_forward
from .systems import build_fdoa_family, table1_minimum
from .tracking import ParameterHomotopy, TrackerConfig, solve
from ._io import atomic_write_text

# a continuation that converges fewer than this fraction of the basis
# triggers a fresh total-degree solve for that iteration
FRESH_SOLVE_FRACTION = 0.5
_MAX_RESAMPLE = 200


@dataclass(frozen=True)
class RansacConfig:
    """Iteration count, inlier tolerance and sampling controls."""

    maxiter: int = 20
    epsilon: float = 0.03  # m/s
    sample_size: int = 3
    rng_seed: int = 0

    def __post_init__(self):
        if self.maxiter < 1:
            raise ValueError("maxiter must be >= 1")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    sample_indices: Tuple[int, ...]
    n_candidates: int
    best_score_so_far: int
    resamples: int
    fresh_solve: bool


@dataclass(frozen=True)
class RansacEstimate:
    """Best consensus candidate over all iterations."""

    emitter: np.ndarray
    inlier_mask: np.ndarray  # bool per FDOA measurement, scenario order
    score: int
    iterations_trace: Tuple[IterationRecord, ...]
    candidate: FeasibleCandidate

    def __post_init__(self):
        object.__setattr__(self, "emitter", np.asarray(self.emitter, float))
        object.__setattr__(self, "inlier_mask", np.asarray(self.inlier_mask, bool))


def count_inliers(candidate, scenario: Scenario, epsilon: float):
    """Score a candidate emitter against every FDOA measurement.

    A measurement is an inlier iff |predicted - measured| < epsilon
    (strict). Returns (score, boolean mask in scenario order).
    """
    point = np.asarray(candidate, dtype=np.float64)
    if point.shape[0] == 2:
        point = np.array([point[0], point[1], 0.0])
    meas = scenario.fdoa_measurements
    mask = np.zeros(len(meas), dtype=bool)
    for i, m in enumerate(meas):
        predicted = fdoa_forward(point, m.pair)
        mask[i] = abs(predicted - m.value) < epsilon
    return int(mask.sum()), mask


def _mean_inlier_residual(candidate, scenario, mask) -> float:
    point = np.asarray(candidate, dtype=np.float64)
    if point.shape[0] == 2:
        point = np.array([point[0], point[1], 0.0])
    meas = scenario.fdoa_measurements
    residuals = [
        abs(fdoa_forward(point, m.pair) - m.value)
        for i, m in enumerate(meas)
        if mask[i]
    ]
    return float(np.mean(residuals)) if residuals else float("inf")


def solve_family_basis(
    scenario: Scenario,
    config: RansacConfig,
    tracker_config: Optional[TrackerConfig] = None,
    dimension: int = 3,
    seed: Optional[int] = None,
) -> ParameterHomotopy:
    """Generic solve of the sampling family, reusable across runs.

    The complex start parameters are scaled to the scenario's magnitudes
    so the continuation segments stay well conditioned.
    """
    family = build_fdoa_family(config.sample_size, dimension)
    meas = scenario.fdoa_measurements
    eligible, _ = gate_measurements(meas)
    if len(eligible) < config.sample_size:
        raise NoFeasibleSolutionError(
            f"only {len(eligible)} measurements pass the FDOA bound, "
            f"need {config.sample_size}"
        )
    template = [meas[i] for i in eligible[: config.sample_size]]
    scale = 1.0 + np.abs(family.parameter_values(template))
    return ParameterHomotopy(
        family,
        config=tracker_config,
        seed=config.rng_seed if seed is None else seed,
        p0_scale=scale.real,
    )


def run_fdoar(
    scenario: Scenario,
    config: Optional[RansacConfig] = None,
    tracker_config: Optional[TrackerConfig] = None,
    basis: Optional[ParameterHomotopy] = None,
    dimension: int = 3,
) -> RansacEstimate:
    """Estimate the emitter location by sampled solves and consensus.

    Deterministic given (scenario, config, basis): sampling, solving and
    the final argmax all derive from the seeded generator, and ties are
    broken by smaller mean inlier residual, then iteration order.

    Raises NoFeasibleSolutionError (carrying the trace) when no iteration
    produces a feasible candidate.
    """
    config = config or RansacConfig()
    if config.sample_size < table1_minimum("fdoa", dimension):
        raise ValueError(
            f"sample_size {config.sample_size} below the finiteness minimum "
            f"{table1_minimum('fdoa', dimension)} for {dimension}D FDOA"
        )
    meas = scenario.fdoa_measurements
    eligible, _ = gate_measurements(meas)
    if len(eligible) < config.sample_size:
        raise NoFeasibleSolutionError(
            f"only {len(eligible)} measurements pass the FDOA bound, "
            f"need {config.sample_size}"
        )
    rng = np.random.default_rng(config.rng_seed)
    if basis is None:
        basis = solve_family_basis(
            scenario, config, tracker_config, dimension,
            seed=int(rng.integers(2**63)),
        )
    family = basis.family
    tracker = tracker_config or basis.config

    best = None  # (score, mean_resid, iteration, candidate, mask)
    trace: List[IterationRecord] = []
    for iteration in range(config.maxiter):
        resamples = 0
        while True:
            idx = rng.choice(eligible, size=config.sample_size, replace=False)
            epochs = {meas[i].epoch for i in idx}
            if len(epochs) == config.sample_size:
                break
            resamples += 1
            if resamples > _MAX_RESAMPLE:
                raise NoFeasibleSolutionError(
                    "could not draw a sample with distinct epochs", trace
                )
        sample = [meas[int(i)] for i in idx]
        p_target = family.parameter_values(sample)
        result = basis.track_to(p_target)
        fresh = False
        if result.n_converged < FRESH_SOLVE_FRACTION * basis.generic_root_count:
            target = family.bind(p_target).normalized()
            result = solve(target, tracker, seed=int(rng.integers(2**63)))
            fresh = True

        candidates, _ = feasible_candidates(
            result, family, states=family.slot_states(sample)
        )
        for cand in candidates:
            score, mask = count_inliers(cand.emitter, scenario, config.epsilon)
            mean_resid = _mean_inlier_residual(cand.emitter, scenario, mask)
            key = (-score, mean_resid)
            if best is None or key < (-best[0], best[1]):
                best = (score, mean_resid, iteration, cand, mask)
        trace.append(
            IterationRecord(
                iteration=iteration,
                sample_indices=tuple(int(i) for i in idx),
                n_candidates=len(candidates),
                best_score_so_far=best[0] if best else 0,
                resamples=resamples,
                fresh_solve=fresh,
            )
        )
    if best is None:
        raise NoFeasibleSolutionError(
            "no feasible candidate in any iteration", trace
        )
    score, _, _, cand, mask = best
    return RansacEstimate(
        emitter=cand.emitter,
        inlier_mask=mask,
        score=score,
        iterations_trace=tuple(trace),
        candidate=cand,
    )


def write_trace_csv(estimate: RansacEstimate, path: str):
    """Per-iteration trace as CSV (iteration, samples, candidates, best)."""
    import io

    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["iteration", "sample_indices", "n_candidates",
                     "best_score_so_far", "resamples", "fresh_solve"])
    for rec in estimate.iterations_trace:
        writer.writerow([
            rec.iteration,
            ";".join(str(i) for i in rec.sample_indices),
            rec.n_candidates,
            rec.best_score_so_far,
            rec.resamples,
            int(rec.fresh_solve),
        ])
    atomic_write_text(path, buf.getvalue())
