"""Classify raw solver endpoints into physically feasible candidates.

A feasible emitter candidate must come from a (numerically) real endpoint,
carry strictly positive range values, and have ranges consistent with its
own coordinates. The absolute range floor also removes the well-known
spurious solution family where a reference range collapses to zero, which
can never be physical.

The measurement-side bound |f| <= |v_a| + |v_b| is applied before solving:
samples containing a bound-violating measurement are never sent to the
solver. (A real candidate's predicted FDOAs satisfy the bound identically,
so no post-solve counterpart is needed.)
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .geometry import FdoaMeasurement
from .systems import GeoSystem, UnknownLayout
from .tracking import SolveResult

REAL_TOLERANCE = 1e-6
RANGE_FLOOR = 1e-6  # meters, absolute: kills the zero-range component
RANGE_CONSISTENCY_TOL = 1e-6  # relative

REJECT_COMPLEX = "complex"
REJECT_NONPOSITIVE_RANGE = "nonpositive-range"
REJECT_RANGE_INCONSISTENT = "range-inconsistent"
REJECT_FDOA_BOUND = "fdoa-bound"


@dataclass(frozen=True)
class FeasibleCandidate:
    """A gate-passing emitter hypothesis."""

    emitter: np.ndarray  # (dimension,) meters
    ranges: np.ndarray  # recomputed from the emitter, all > 0
    residual: float  # solver residual of the originating endpoint
    provenance: int  # path index of the endpoint

    def __post_init__(self):
        object.__setattr__(self, "emitter", np.asarray(self.emitter, float))
        object.__setattr__(self, "ranges", np.asarray(self.ranges, float))


@dataclass(frozen=True)
class Rejection:
    reason: str
    detail: str
    provenance: int


def extract_real(
    solutions: Sequence[np.ndarray], real_tolerance: float = REAL_TOLERANCE
) -> Tuple[np.ndarray, np.ndarray]:
    """Keep endpoints whose imaginary parts are small relative to the
    endpoint's real magnitude; returns (real vectors, kept indices)."""
    kept = []
    idx = []
    for i, z in enumerate(solutions):
        z = np.asarray(z, dtype=np.complex128)
        scale = float(np.abs(z.real).max()) if z.size else 0.0
        imag = float(np.abs(z.imag).max()) if z.size else 0.0
        if imag <= real_tolerance * scale or imag == 0.0:
            kept.append(z.real.copy())
            idx.append(i)
    if kept:
        return np.stack(kept), np.array(idx, dtype=np.int64)
    return np.zeros((0, 0)), np.array([], dtype=np.int64)


def feasibility_gate(
    candidate,
    layout: UnknownLayout,
    states=None,
    residual: float = 0.0,
    provenance: int = -1,
    range_floor: float = RANGE_FLOOR,
    range_consistency_tol: float = RANGE_CONSISTENCY_TOL,
):
    """Gate one real candidate vector (coordinates then ranges).

    Returns a FeasibleCandidate, or a Rejection whose reason is one of
    ``nonpositive-range`` (any range at or below the absolute floor) and
    ``range-inconsistent`` (a range disagreeing with the emitter's actual
    distance to that receiver). Ranges on the returned candidate are
    recomputed from the emitter for downstream use.

    ``states`` overrides the layout's receiver states; required when the
    system came from a structural family whose layout holds placeholders.
    """
    vec = np.asarray(candidate, dtype=np.float64)
    d = layout.dimension
    emitter, ranges = vec[:d], vec[d:]
    if ranges.size and ranges.min() <= range_floor:
        return Rejection(
            REJECT_NONPOSITIVE_RANGE,
            f"min range {ranges.min():.3e} m at/below floor {range_floor:.0e} m",
            provenance,
        )
    if states is None:
        states = layout.states
    true_ranges = np.array(
        [np.linalg.norm(s.position[:d] - emitter) for s in states]
    )
    err = np.abs(ranges - true_ranges)
    bad = err > range_consistency_tol * (1.0 + true_ranges)
    if bad.any():
        k = int(np.argmax(err))
        return Rejection(
            REJECT_RANGE_INCONSISTENT,
            f"range {layout.range_names[k]} off by {err[k]:.3e} m",
            provenance,
        )
    return FeasibleCandidate(
        emitter=emitter, ranges=true_ranges, residual=residual,
        provenance=provenance,
    )


def feasible_candidates(
    result: SolveResult,
    system: GeoSystem,
    states=None,
    real_tolerance: float = REAL_TOLERANCE,
    range_floor: float = RANGE_FLOOR,
    range_consistency_tol: float = RANGE_CONSISTENCY_TOL,
) -> Tuple[List[FeasibleCandidate], List[Rejection]]:
    """Run the whole endpoint-classification pipeline on a solve result."""
    layout = system.layout
    candidates: List[FeasibleCandidate] = []
    rejections: List[Rejection] = []
    solutions = result.distinct_solutions
    reals, kept = extract_real(solutions, real_tolerance)
    kept_set = set(int(i) for i in kept)
    for i in range(solutions.shape[0]):
        prov = result.cluster_path_indices[i]
        if i not in kept_set:
            imag = float(np.abs(solutions[i].imag).max())
            rejections.append(
                Rejection(REJECT_COMPLEX, f"max imaginary part {imag:.3e}", prov)
            )
    for row, i in zip(reals, kept):
        prov = result.cluster_path_indices[int(i)]
        residual = result.paths[prov].final_residual
        out = feasibility_gate(
            row, layout, states=states, residual=residual, provenance=prov,
            range_floor=range_floor, range_consistency_tol=range_consistency_tol,
        )
        if isinstance(out, FeasibleCandidate):
            candidates.append(out)
        else:
            rejections.append(out)
    return candidates, rejections


def fdoa_bound_check(measurement: FdoaMeasurement, slack: float = 0.0) -> bool:
    """True iff |value| <= |v_a| + |v_b| + slack (speed-sum bound)."""
    a, b = measurement.pair
    return abs(measurement.value) <= a.speed() + b.speed() + slack


def gate_measurements(
    measurements: Sequence[FdoaMeasurement], slack: float = 0.0
) -> Tuple[np.ndarray, List[Rejection]]:
    """Pre-solve measurement gate: indices passing the speed-sum bound."""
    ok = []
    rejections = []
    for i, m in enumerate(measurements):
        if fdoa_bound_check(m, slack):
            ok.append(i)
        else:
            a, b = m.pair
            rejections.append(
                Rejection(
                    REJECT_FDOA_BOUND,
                    f"|f|={abs(m.value):.4g} m/s exceeds bound "
                    f"{a.speed() + b.speed():.4g} m/s",
                    i,
                )
            )
    return np.array(ok, dtype=np.int64), rejections
