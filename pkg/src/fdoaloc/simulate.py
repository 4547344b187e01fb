"""Scenario generation, noise injection and Monte Carlo experiments.

The main experiment mirrors a cube-of-space setup: receiver pairs and a
stationary emitter drawn uniformly in a cube, FDOA measured per epoch,
zero-mean Gaussian noise scaled to a percentage of the observed FDOA
variance, and the consensus estimator run per trial. Everything derives
from one master seed; trial k can be re-run alone and reproduces its
record exactly.
"""

from __future__ import annotations

import csv
import io
import warnings
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from ._io import atomic_write_text
from .errors import InvalidSystemError
from .filtering import feasible_candidates
from .geometry import (
    Emitter,
    FdoaMeasurement,
    ReceiverState,
    Scenario,
    TdoaMeasurement,
    fdoa_forward,
    tdoa_forward,
)
from .polynomials import ConcreteSystem, Polynomial
from .ransac import RansacConfig, run_fdoar, solve_family_basis
from .systems import (
    GeoSystemSpec,
    add_altitude_constraint,
    build_fdoa,
    build_geo_system,
    build_tdoa,
    table1_minimum,
)
from .tracking import ParameterHomotopy, TrackerConfig, solve


@dataclass(frozen=True)
class ExperimentConfig:
    """Noise-sweep experiment parameters."""

    cube_side: float = 100.0
    n_pairs: int = 40
    velocity_range: Tuple[float, float] = (-2.0, 2.0)
    noise_levels: Tuple[float, ...] = (0.0, 5.0, 10.0, 20.0, 40.0)
    trials_per_level: int = 50
    ransac: RansacConfig = field(default_factory=RansacConfig)
    rng_seed: int = 0

    def __post_init__(self):
        if self.cube_side <= 0 or self.n_pairs <= 0 or self.trials_per_level <= 0:
            raise ValueError("cube_side, n_pairs, trials_per_level must be positive")
        if any(level < 0 for level in self.noise_levels):
            raise ValueError("noise levels must be >= 0")


@dataclass(frozen=True)
class TrialRecord:
    noise_level: float
    trial_index: int
    seed: int
    truth: np.ndarray
    estimate: np.ndarray
    error: float
    score: int
    trace_summary: str


@dataclass(frozen=True)
class SweepResult:
    medians: Tuple[Tuple[float, float], ...]  # (noise_level, median_error)
    records: Tuple[TrialRecord, ...]


def lower_median(values: Sequence[float]) -> float:
    """Median as the lower of the two middle values for even counts."""
    ordered = sorted(values)
    if not ordered:
        raise ValueError("median of empty sequence")
    return float(ordered[(len(ordered) - 1) // 2])


def _trial_seeds(master_seed: int, level: float, trial_index: int):
    """Independent child seeds for (scenario, noise, ransac) per trial."""
    seq = np.random.SeedSequence(
        entropy=(int(master_seed), int(round(level * 1000)), int(trial_index))
    )
    state = seq.generate_state(3, dtype=np.uint64)
    return int(state[0]), int(state[1]), int(state[2])


def _basis_seed(master_seed: int) -> int:
    seq = np.random.SeedSequence(entropy=(int(master_seed), 0x_BA515))
    return int(seq.generate_state(1, dtype=np.uint64)[0])


def generate_scenario(config: ExperimentConfig, trial_seed: int) -> Scenario:
    """One random noiseless scenario: emitter and receiver pairs uniform in
    the cube, velocity components uniform in the configured range."""
    rng = np.random.default_rng(trial_seed)
    half = config.cube_side / 2.0
    lo, hi = config.velocity_range
    truth = rng.uniform(-half, half, 3)
    measurements = []
    for epoch in range(config.n_pairs):
        pos_a = rng.uniform(-half, half, 3)
        pos_b = rng.uniform(-half, half, 3)
        vel_a = rng.uniform(lo, hi, 3)
        vel_b = rng.uniform(lo, hi, 3)
        a = ReceiverState(position=pos_a, velocity=vel_a, id="rx1", epoch=epoch)
        b = ReceiverState(position=pos_b, velocity=vel_b, id="rx2", epoch=epoch)
        measurements.append(
            FdoaMeasurement(pair=(a, b), value=fdoa_forward(truth, (a, b)))
        )
    return Scenario(
        measurements=tuple(measurements), truth=Emitter(truth), rng_seed=trial_seed
    )


def add_noise(scenario: Scenario, relative_level: float, seed: int = 0) -> Scenario:
    """Add Gaussian noise sized by the relative-variance rule.

    ``relative_level`` is a percentage: the injected noise has variance
    (level / 100) * var(observed FDOA), with the sample variance taken
    over the scenario's noiseless FDOA values. Level 0 returns the
    scenario unchanged. TDOA measurements, if any, are left untouched.
    """
    if relative_level == 0:
        return scenario
    fdoa = scenario.fdoa_measurements
    if len(fdoa) < 2:
        raise InvalidSystemError(
            "relative noise needs >= 2 FDOA values to define a variance"
        )
    values = np.array([m.value for m in fdoa])
    sigma2 = float(np.var(values, ddof=1))
    sd = float(np.sqrt(relative_level / 100.0 * sigma2))
    rng = np.random.default_rng(seed)
    noisy = iter(values + rng.normal(0.0, sd, len(values)))
    measurements = []
    for m in scenario.measurements:
        if isinstance(m, FdoaMeasurement):
            measurements.append(FdoaMeasurement(pair=m.pair, value=float(next(noisy))))
        else:
            measurements.append(m)
    return Scenario(
        measurements=tuple(measurements), truth=scenario.truth, rng_seed=seed
    )


def run_trial(
    config: ExperimentConfig,
    level: float,
    trial_index: int,
    basis: Optional[ParameterHomotopy] = None,
    tracker_config: Optional[TrackerConfig] = None,
) -> TrialRecord:
    """One generate -> noise -> estimate trial, fully seed-derived."""
    scen_seed, noise_seed, ransac_seed = _trial_seeds(
        config.rng_seed, level, trial_index
    )
    scenario = generate_scenario(config, scen_seed)
    noisy = add_noise(scenario, level, noise_seed)
    rconfig = RansacConfig(
        maxiter=config.ransac.maxiter,
        epsilon=config.ransac.epsilon,
        sample_size=config.ransac.sample_size,
        rng_seed=ransac_seed,
    )
    if basis is None:
        basis = solve_family_basis(
            noisy, rconfig, tracker_config, seed=_basis_seed(config.rng_seed)
        )
    estimate = run_fdoar(noisy, rconfig, tracker_config, basis=basis)
    truth = scenario.truth.position
    error = float(np.linalg.norm(estimate.emitter - truth))
    fresh = sum(1 for r in estimate.iterations_trace if r.fresh_solve)
    resamples = sum(r.resamples for r in estimate.iterations_trace)
    return TrialRecord(
        noise_level=level,
        trial_index=trial_index,
        seed=scen_seed,
        truth=truth,
        estimate=estimate.emitter,
        error=error,
        score=estimate.score,
        trace_summary=f"fresh={fresh};resamples={resamples}",
    )


def run_noise_sweep(
    config: Optional[ExperimentConfig] = None,
    tracker_config: Optional[TrackerConfig] = None,
    progress: bool = False,
) -> SweepResult:
    """Median estimate error per relative noise level.

    The family basis is solved once (from the master seed) and shared by
    all trials; each trial stays independently reproducible because the
    basis itself is a pure function of the master seed.
    """
    config = config or ExperimentConfig()
    template = generate_scenario(config, _trial_seeds(config.rng_seed, 0.0, 0)[0])
    basis = solve_family_basis(
        template, config.ransac, tracker_config, seed=_basis_seed(config.rng_seed)
    )
    records: List[TrialRecord] = []
    medians = []
    for level in config.noise_levels:
        errors = []
        for trial in range(config.trials_per_level):
            record = run_trial(config, level, trial, basis, tracker_config)
            records.append(record)
            errors.append(record.error)
            if progress:
                print(
                    f"level {level:g}% trial {trial}: error {record.error:.4g} m "
                    f"score {record.score}",
                    flush=True,
                )
        medians.append((level, lower_median(errors)))
    return SweepResult(medians=tuple(medians), records=tuple(records))


def edge_interior_medians(
    records: Sequence[TrialRecord], config: ExperimentConfig, margin: float = 5.0
):
    """Median error split by truth's distance to the cube boundary.

    Returns {level: (edge_median, interior_median, n_edge, n_interior)},
    with None medians for empty groups. Reported for inspection; the
    edge-vs-interior contrast is a qualitative expectation, not a gate.
    """
    half = config.cube_side / 2.0
    out = {}
    levels = sorted({r.noise_level for r in records})
    for level in levels:
        edge, interior = [], []
        for r in records:
            if r.noise_level != level:
                continue
            boundary_distance = float(np.min(half - np.abs(r.truth)))
            (edge if boundary_distance < margin else interior).append(r.error)
        out[level] = (
            lower_median(edge) if edge else None,
            lower_median(interior) if interior else None,
            len(edge),
            len(interior),
        )
    return out


def write_results_csv(records: Sequence[TrialRecord], path: str):
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow([
        "noise_level_pct", "trial", "seed",
        "truth_x", "truth_y", "truth_z",
        "est_x", "est_y", "est_z", "error_m", "score",
    ])
    for r in records:
        writer.writerow([
            f"{r.noise_level:g}", r.trial_index, r.seed,
            *(f"{v:.17g}" for v in r.truth),
            *(f"{v:.17g}" for v in r.estimate),
            f"{r.error:.17g}", r.score,
        ])
    atomic_write_text(path, buf.getvalue())


def write_summary_csv(result: SweepResult, path: str):
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["noise_level_pct", "median_error_m", "trials"])
    counts = {}
    for r in result.records:
        counts[r.noise_level] = counts.get(r.noise_level, 0) + 1
    for level, median in result.medians:
        writer.writerow([f"{level:g}", f"{median:.17g}", counts.get(level, 0)])
    atomic_write_text(path, buf.getvalue())


# ---------------------------------------------------------------------------
# measurement-count bound verification


@dataclass(frozen=True)
class CellVerdict:
    m: int
    verdict: str  # "finite" | "non-finite"
    truth_found: bool
    n_distinct: int
    note: str


@dataclass(frozen=True)
class BoundsReport:
    mode: str
    dimension: int
    altitude: bool
    minimum: int
    at_minimum: Tuple[CellVerdict, ...]
    below_minimum: Tuple[CellVerdict, ...]

    @property
    def consistent(self) -> bool:
        return (
            all(v.verdict == "finite" and v.truth_found for v in self.at_minimum)
            and all(v.verdict == "non-finite" for v in self.below_minimum)
        )


def _random_state(rng, side, vmax, epoch, rxid, dimension, moving=True):
    pos = rng.uniform(-side / 2, side / 2, 3)
    vel = rng.uniform(-vmax, vmax, 3) if moving else np.zeros(3)
    if dimension == 2:
        pos[2] = 0.0
        vel[2] = 0.0
    return ReceiverState(position=pos, velocity=vel, id=rxid, epoch=epoch)


def _random_bounds_scenario(mode, dimension, m, rng, side=100.0, vmax=2.0):
    """Truth plus m measurements of the requested kind(s)."""
    truth = rng.uniform(-side / 2, side / 2, 3)
    if dimension == 2:
        truth[2] = 0.0
    fdoa, tdoa = [], []
    if mode == "tdoa":
        ref = _random_state(rng, side, vmax, 0, "ref", dimension, moving=False)
        for j in range(m):
            other = _random_state(rng, side, vmax, 0, f"rx{j}", dimension, moving=False)
            pair = (ref, other)
            tdoa.append(TdoaMeasurement(pair=pair, value=tdoa_forward(truth, pair)))
    else:
        for j in range(m):
            a = _random_state(rng, side, vmax, j, "rx1", dimension)
            b = _random_state(rng, side, vmax, j, "rx2", dimension)
            pair = (a, b)
            fdoa.append(FdoaMeasurement(pair=pair, value=fdoa_forward(truth, pair)))
            if mode == "tdoa+fdoa":
                tdoa.append(TdoaMeasurement(pair=pair, value=tdoa_forward(truth, pair)))
    return truth, fdoa, tdoa


def _build_bounds_system(mode, dimension, altitude, truth, fdoa, tdoa):
    spec = GeoSystemSpec(mode=mode, dimension=dimension)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        if mode == "fdoa":
            system = build_fdoa(fdoa, spec)
        elif mode == "tdoa":
            system = build_tdoa(tdoa, spec)
        else:
            system = build_geo_system(fdoa, tdoa, spec)
        if altitude:
            system = add_altitude_constraint(system, float(truth[2]), kind="flat")
    return system


def _random_affine_slices(n_slices, unknowns, rng):
    nv = len(unknowns)
    polys = []
    for _ in range(n_slices):
        terms = []
        for j in range(nv):
            e = [0] * nv
            e[j] = 1
            c = complex(rng.standard_normal(), rng.standard_normal())
            terms.append((c, tuple(e), ()))
        c0 = complex(rng.standard_normal(), rng.standard_normal())
        terms.append((c0, (0,) * nv, ()))
        polys.append(Polynomial(nv, 0, terms))
    return polys


def _randomize_to_square(concrete: ConcreteSystem, rng) -> ConcreteSystem:
    """Replace an overdetermined system by n generic complex combinations
    of its equations; isolated solutions survive, extras are filtered by
    residual against the original."""
    nv = concrete.n_unknowns
    ne = concrete.n_equations
    A = rng.standard_normal((nv, ne)) + 1j * rng.standard_normal((nv, ne))
    polys = []
    for i in range(nv):
        terms = []
        for j, poly in enumerate(concrete.polynomials):
            for c, zex, _ in poly.terms:
                terms.append((A[i, j] * c, zex, ()))
        polys.append(Polynomial(nv, 0, terms))
    return ConcreteSystem(polys, concrete.unknowns)


def _truth_among_candidates(result, system, truth, tol=1e-5) -> Tuple[bool, int]:
    candidates, _ = feasible_candidates(result, system)
    d = system.spec.dimension
    found = any(
        np.linalg.norm(c.emitter - truth[:d]) <= tol for c in candidates
    )
    return found, len(candidates)


def verify_measurement_bounds(
    mode: str,
    dimension: int,
    altitude: bool = False,
    seed: int = 0,
    repeats: int = 5,
    tracker_config: Optional[TrackerConfig] = None,
) -> BoundsReport:
    """Check the finiteness bound for one (mode, dimension, altitude) cell.

    At the tabulated minimum m the solve must report a finite solution set
    containing the truth; at m-1 the system must betray a positive-
    dimensional set. Under-determined systems are probed with random
    complex hyperplane slices: a finite set misses a random slice, so any
    on-variety solution found there certifies positive dimension.
    Over-determined (consistent) systems are first randomized down to
    square and the extraneous roots filtered by residual.
    """
    minimum = table1_minimum(mode, dimension, altitude)
    rng = np.random.default_rng(seed)
    tracker = tracker_config or TrackerConfig()

    def one_case(m: int) -> CellVerdict:
        truth, fdoa, tdoa = _random_bounds_scenario(mode, dimension, m, rng)
        if m == 0:
            return CellVerdict(
                m=0, verdict="non-finite", truth_found=False, n_distinct=0,
                note="no measurements: solution set is all of space",
            )
        system = _build_bounds_system(mode, dimension, altitude, truth, fdoa, tdoa)
        concrete = system.bind_measurements(fdoa, tdoa)
        ne, nv = concrete.n_equations, concrete.n_unknowns
        solve_seed = int(rng.integers(2**63))

        if ne == nv:
            result = solve(concrete, tracker, seed=solve_seed)
            found, n_cand = _truth_among_candidates(result, system, truth)
            finite = result.finiteness_flag == "finite" and found
            return CellVerdict(
                m=m,
                verdict="finite" if finite else "non-finite",
                truth_found=found,
                n_distinct=result.distinct_solutions.shape[0],
                note=f"square {ne}x{nv}, flag={result.finiteness_flag}",
            )
        if ne < nv:
            slices = _random_affine_slices(nv - ne, concrete.unknowns, rng)
            sliced = ConcreteSystem(
                list(concrete.polynomials) + slices, concrete.unknowns
            )
            result = solve(sliced, tracker, seed=solve_seed)
            pts = result.distinct_solutions
            on_variety = 0
            if pts.shape[0]:
                residuals = np.array(
                    [float(np.abs(concrete.evaluate(p)).max()) for p in pts]
                )
                on_variety = int((residuals <= 1e-6).sum())
            note = (
                f"underdetermined {ne}x{nv}: {on_variety} on-variety points on a "
                "random slice"
            )
            return CellVerdict(
                m=m, verdict="non-finite", truth_found=False,
                n_distinct=on_variety, note=note,
            )
        randomized = _randomize_to_square(concrete, rng)
        result = solve(randomized, tracker, seed=solve_seed)
        pts = result.distinct_solutions
        keep = []
        for i in range(pts.shape[0]):
            if float(np.abs(concrete.evaluate(pts[i])).max()) <= 1e-6:
                keep.append(i)
        d = system.spec.dimension
        found = False
        for i in keep:
            vec = pts[i]
            if float(np.abs(vec.imag).max()) <= 1e-6 * max(1.0, np.abs(vec.real).max()):
                if np.linalg.norm(vec.real[:d] - truth[:d]) <= 1e-5:
                    found = True
        return CellVerdict(
            m=m,
            verdict="finite" if found else "non-finite",
            truth_found=found,
            n_distinct=len(keep),
            note=f"overdetermined {ne}x{nv}, randomized to square",
        )

    at_min = tuple(one_case(minimum) for _ in range(repeats))
    below = tuple(one_case(minimum - 1) for _ in range(repeats))
    return BoundsReport(
        mode=mode, dimension=dimension, altitude=altitude, minimum=minimum,
        at_minimum=at_min, below_minimum=below,
    )
