"""Homotopy continuation: total-degree solves and parameter homotopies.

The march runs the gamma-twisted convex homotopy

    H(z, t) = gamma * t * g(z) + (1 - t) * f(z),    t: 1 -> 0

with a total-degree start system g_i = z_i^(d_i) - 1, or a parameter
segment homotopy H(z, t) = F(z; t*p0 + (1-t)*p_target) for a bound family.
Both reduce to coefficient-path systems handled by ``kernels.track_many``.
"""

from __future__ import annotations

import csv
import dataclasses
import itertools
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from . import kernels
from .errors import InvalidSystemError
from .polynomials import ConcreteSystem, ParameterizedSystem, Polynomial, total_degree

STATUS_NAMES = {
    kernels.STATUS_CONVERGED: "converged",
    kernels.STATUS_DIVERGED: "diverged",
    kernels.STATUS_STALLED: "stalled",
    kernels.STATUS_MAX_STEPS: "max-steps",
}

# Jacobian rcond proxy below this marks an endpoint as (numerically) singular
SINGULAR_RCOND = 1e-8
# fraction of paths that must pile onto one singular cluster before the
# solve is flagged suspect-positive-dimensional
SUSPECT_CLUSTER_FRACTION = 0.2
_REFINE_ROUNDS = 2


@dataclass(frozen=True)
class TrackerConfig:
    """Step-control and acceptance knobs for the path tracker.

    All values are engineering defaults, overridable per call. Tolerances
    are quoted against systems whose rows are scaled to unit max
    coefficient magnitude.
    """

    initial_step: float = 0.1
    min_step: float = 1e-7
    max_step: float = 0.2
    newton_tolerance: float = 1e-10
    max_newton_iters: int = 4
    divergence_norm: float = 1e8
    t_end: float = 0.0
    success_residual: float = 1e-8
    step_shrink: float = 0.5
    step_grow: float = 1.5
    max_steps: int = 2000
    correction_ratio: float = 0.25
    dedup_radius: float = 1e-6

    def __post_init__(self):
        if not (0 < self.min_step < self.max_step):
            raise ValueError("need 0 < min_step < max_step")
        for name in (
            "initial_step", "newton_tolerance", "divergence_norm",
            "success_residual", "step_shrink", "step_grow",
            "correction_ratio", "dedup_radius",
        ):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")

    def as_array(self) -> np.ndarray:
        cfg = np.empty(kernels.CFG_LEN, dtype=np.float64)
        cfg[kernels.CFG_INITIAL_STEP] = self.initial_step
        cfg[kernels.CFG_MIN_STEP] = self.min_step
        cfg[kernels.CFG_MAX_STEP] = self.max_step
        cfg[kernels.CFG_NEWTON_TOL] = self.newton_tolerance
        cfg[kernels.CFG_MAX_NEWTON] = self.max_newton_iters
        cfg[kernels.CFG_DIVERGENCE_NORM] = self.divergence_norm
        cfg[kernels.CFG_SUCCESS_RESIDUAL] = self.success_residual
        cfg[kernels.CFG_STEP_SHRINK] = self.step_shrink
        cfg[kernels.CFG_STEP_GROW] = self.step_grow
        cfg[kernels.CFG_MAX_STEPS] = self.max_steps
        cfg[kernels.CFG_CORRECTION_RATIO] = self.correction_ratio
        cfg[kernels.CFG_T_END] = self.t_end
        return cfg

    def tightened(self, round_index: int) -> "TrackerConfig":
        """Stricter settings used when re-tracking problem paths."""
        factor = 4.0 ** (round_index + 1)
        return dataclasses.replace(
            self,
            initial_step=self.initial_step / factor,
            max_step=self.max_step / factor,
            min_step=self.min_step / 10.0,
            correction_ratio=self.correction_ratio / factor,
            max_steps=self.max_steps * 2,
        )


@dataclass(frozen=True)
class PathResult:
    """Endpoint and bookkeeping for one tracked path."""

    endpoint: np.ndarray
    status: str
    final_residual: float
    steps_taken: int
    min_jacobian_condition_proxy: float

    @property
    def converged(self) -> bool:
        return self.status == "converged"


@dataclass(frozen=True)
class SolveResult:
    """All paths of one solve plus the deduplicated solution set."""

    paths: Tuple[PathResult, ...]
    distinct_solutions: np.ndarray  # complex (k, n), canonically sorted
    finiteness_flag: str  # "finite" | "suspect-positive-dimensional"
    gamma: complex
    cluster_sizes: Tuple[int, ...]
    cluster_path_indices: Tuple[int, ...]  # lowest-residual path per cluster

    @property
    def n_converged(self) -> int:
        return sum(1 for p in self.paths if p.converged)


def _sparsify(exps_rows, n_unknowns: int):
    """Exponent rows -> (var index, var exponent, CSR offsets) arrays."""
    vidx, vexp, voffs = [], [], [0]
    for row in exps_rows:
        for j in range(n_unknowns):
            if row[j]:
                vidx.append(j)
                vexp.append(int(row[j]))
        voffs.append(len(vidx))
    return (
        np.asarray(vidx, dtype=np.int64),
        np.asarray(vexp, dtype=np.int64),
        np.asarray(voffs, dtype=np.int64),
    )


class _PathArrays:
    """Packed coefficient-path system plus its Jacobian structure."""

    __slots__ = ("h", "jac", "dmax", "n_unknowns")

    def __init__(self, tc, exps_rows, eq_offs, jtc, jexps_rows, jrow_offs,
                 dmax, n_unknowns):
        vidx, vexp, voffs = _sparsify(exps_rows, n_unknowns)
        jvidx, jvexp, jvoffs = _sparsify(jexps_rows, n_unknowns)
        self.h = (tc, vidx, vexp, voffs, eq_offs)
        self.jac = (jtc, jvidx, jvexp, jvoffs, jrow_offs)
        self.dmax = dmax
        self.n_unknowns = n_unknowns

    def track_many(self, starts, config: TrackerConfig):
        return kernels.track_many(
            *self.h, *self.jac, self.dmax, starts, config.as_array(),
        )

    def track_one(self, start, config: TrackerConfig, trace_rows: int = 0):
        trace = np.empty((trace_rows, 3), dtype=np.float64)
        out = kernels.track_one(
            *self.h, *self.jac, self.dmax,
            np.asarray(start, dtype=np.complex128).copy(),
            config.as_array(), trace, trace_rows > 0,
        )
        return out, trace

    def residuals_at(self, points, t: float) -> np.ndarray:
        pts = np.ascontiguousarray(points, dtype=np.complex128)
        return kernels.eval_many(*self.h, pts, t)


def start_system(target: ConcreteSystem) -> Tuple[ConcreteSystem, np.ndarray]:
    """Total-degree start system and its full grid of start points.

    g_i = z_i^(d_i) - 1 with d_i the degree of the i-th target equation;
    start points are all combinations of d_i-th roots of unity, one path
    per unit of the Bezout number.
    """
    _require_square(target)
    nv = target.n_unknowns
    degrees = target.degrees()
    polys = []
    for i, d in enumerate(degrees):
        if d == 0:
            raise InvalidSystemError(f"equation {i} has degree 0")
        lead = [0] * nv
        lead[i] = d
        polys.append(
            Polynomial(nv, 0, [(1.0, tuple(lead), ()), (-1.0, (0,) * nv, ())])
        )
    g = ConcreteSystem(polys, target.unknowns)
    grids = [np.exp(2j * np.pi * np.arange(d) / d) for d in degrees]
    starts = np.array(
        [list(combo) for combo in itertools.product(*grids)], dtype=np.complex128
    )
    return g, starts


def _require_square(system: ConcreteSystem):
    if system.n_equations != system.n_unknowns:
        raise InvalidSystemError(
            f"solver needs a square system, got {system.n_equations} equations "
            f"in {system.n_unknowns} unknowns"
        )


def _convex_homotopy_arrays(
    g: ConcreteSystem, f: ConcreteSystem, gamma: complex
) -> _PathArrays:
    """Coefficient paths for H = gamma*t*g + (1-t)*f."""
    pg = g.packed()
    pf = f.packed()
    nv = f.n_unknowns
    n_eq = f.n_equations

    def merge(cf, ef, of, cg, eg, og, rows):
        tcl, exl, offs = [], [], [0]
        for r in range(rows):
            for k in range(of[r], of[r + 1]):
                tcl.append((cf[k], -cf[k], 0.0))
                exl.append(ef[k])
            for k in range(og[r], og[r + 1]):
                tcl.append((0.0, gamma * cg[k], 0.0))
                exl.append(eg[k])
            offs.append(len(tcl))
        return (
            np.asarray(tcl, dtype=np.complex128).reshape(len(tcl), 3),
            exl,
            np.asarray(offs, dtype=np.int64),
        )

    tc, ex, offs = merge(
        pf.coeffs, pf.exps, pf.offsets, pg.coeffs, pg.exps, pg.offsets, n_eq
    )
    jtc, jex, joff = merge(
        pf.jac_coeffs, pf.jac_exps, pf.jac_offsets,
        pg.jac_coeffs, pg.jac_exps, pg.jac_offsets, n_eq * nv,
    )
    dmax = int(max(max(pf.degrees), max(pg.degrees)))
    return _PathArrays(tc, ex, offs, jtc, jex, joff, dmax, nv)


def _expand_t_poly(coeff: complex, pex, p_end, p_diff) -> np.ndarray:
    """Coefficient of one family term along p(t) = p_end + t*(p0 - p_end).

    Returns the polynomial in t (ascending powers); degree equals the
    term's total parameter degree.
    """
    poly = np.zeros(1, dtype=np.complex128)
    poly[0] = coeff
    for j, e in enumerate(pex):
        for _ in range(e):
            new = np.zeros(len(poly) + 1, dtype=np.complex128)
            new[: len(poly)] += poly * p_end[j]
            new[1:] += poly * p_diff[j]
            poly = new
    return poly


def _segment_homotopy_arrays(
    family: ParameterizedSystem,
    p0: np.ndarray,
    p_target: np.ndarray,
    row_scales: np.ndarray,
) -> _PathArrays:
    """Coefficient paths for H(z,t) = F(z; t*p0 + (1-t)*p_target).

    Rows are divided by ``row_scales`` (taken from the bound target) so
    tolerances mean the same thing as in a direct solve of the target.
    """
    nv = family.n_unknowns
    p_diff = np.asarray(p0) - np.asarray(p_target)
    max_pdeg = 0
    for poly in family.polynomials:
        for _, _, pex in poly.terms:
            max_pdeg = max(max_pdeg, sum(pex))
    n_cols = max_pdeg + 1

    def build(rows_of_terms):
        tcl, exl, offs = [], [], [0]
        for terms, s in rows_of_terms:
            acc = {}
            for coeff, zex, pex in terms:
                tp = _expand_t_poly(coeff, pex, p_target, p_diff)
                cur = acc.get(zex)
                if cur is None:
                    cur = np.zeros(n_cols, dtype=np.complex128)
                    acc[zex] = cur
                cur[: len(tp)] += tp
            for zex in sorted(acc.keys()):
                tcl.append(acc[zex] / s)
                exl.append(zex)
            offs.append(len(tcl))
        return (
            np.asarray(tcl, dtype=np.complex128).reshape(len(tcl), n_cols),
            exl,
            np.asarray(offs, dtype=np.int64),
        )

    rows = [(poly.terms, s) for poly, s in zip(family.polynomials, row_scales)]
    tc, ex, offs = build(rows)
    jrows = []
    for poly, s in zip(family.polynomials, row_scales):
        for var in range(nv):
            jrows.append((poly.diff(var).terms, s))
    jtc, jex, joff = build(jrows)
    dmax = max(p.degree() for p in family.polynomials)
    return _PathArrays(tc, ex, offs, jtc, jex, joff, int(dmax), nv)


def _canonical_order(points: np.ndarray) -> np.ndarray:
    """Indices sorting endpoint vectors lexicographically by (re, im)."""
    keys = [
        tuple(x for c in row for x in (c.real, c.imag)) for row in points
    ]
    return np.array(sorted(range(len(keys)), key=keys.__getitem__), dtype=np.int64)


def _cluster(
    ends: np.ndarray, conv_idx: np.ndarray, resid: np.ndarray, radius: float
):
    """Greedy dedup of converged endpoints.

    Metric is Euclidean distance over (1 + max of the two norms); returns
    a list of clusters, each a list of path indices, ordered canonically
    by representative (first member).
    """
    if len(conv_idx) == 0:
        return []
    ordered = conv_idx[_canonical_order(ends[conv_idx])]
    P = ends[ordered]
    Pn = np.linalg.norm(P, axis=1)
    reps = np.empty_like(P)
    rep_norms = np.empty(len(ordered))
    members: list = []
    k = 0
    for i in range(len(ordered)):
        v = P[i]
        if k:
            d = np.linalg.norm(reps[:k] - v, axis=1)
            d /= 1.0 + np.maximum(rep_norms[:k], Pn[i])
            hits = np.nonzero(d <= radius)[0]
            if hits.size:
                members[int(hits[0])].append(int(ordered[i]))
                continue
        reps[k] = v
        rep_norms[k] = Pn[i]
        members.append([int(ordered[i])])
        k += 1
    return [sorted(ms, key=lambda i: (resid[i], i)) for ms in members]


def _assemble_result(
    arrays: _PathArrays,
    ends, status, resid, steps, cond,
    gamma: complex,
    config: TrackerConfig,
) -> SolveResult:
    paths = tuple(
        PathResult(
            endpoint=ends[i].copy(),
            status=STATUS_NAMES[int(status[i])],
            final_residual=float(resid[i]),
            steps_taken=int(steps[i]),
            min_jacobian_condition_proxy=float(cond[i]),
        )
        for i in range(len(status))
    )
    conv_idx = np.nonzero(status == kernels.STATUS_CONVERGED)[0]
    clusters = _cluster(ends, conv_idx, resid, config.dedup_radius)
    if clusters:
        rep_idx = [c[0] for c in clusters]
        distinct = np.stack([ends[i] for i in rep_idx])
        order = _canonical_order(distinct)
        distinct = distinct[order]
        clusters = [clusters[i] for i in order]
        rep_idx = [c[0] for c in clusters]
    else:
        distinct = np.zeros((0, arrays.n_unknowns), dtype=np.complex128)
        rep_idx = []

    flag = "finite"
    n_paths = len(paths)
    for members in clusters:
        if len(members) > SUSPECT_CLUSTER_FRACTION * n_paths:
            if cond[members[0]] < SINGULAR_RCOND:
                flag = "suspect-positive-dimensional"
                break
    return SolveResult(
        paths=paths,
        distinct_solutions=distinct,
        finiteness_flag=flag,
        gamma=gamma,
        cluster_sizes=tuple(len(c) for c in clusters),
        cluster_path_indices=tuple(rep_idx),
    )


def _track_with_refinement(
    arrays: _PathArrays, starts: np.ndarray, config: TrackerConfig
):
    """Track all paths, then re-track failures and collided paths.

    A collision (two paths on one endpoint at a nonsingular target) means
    a path was jumped; re-running the loser with tighter steps recovers
    the lost root. Two bounded rounds keep genuinely singular targets from
    looping.
    """
    ends, status, resid, steps, cond = arrays.track_many(starts, config)
    for round_index in range(_REFINE_ROUNDS):
        conv_idx = np.nonzero(status == kernels.STATUS_CONVERGED)[0]
        clusters = _cluster(ends, conv_idx, resid, config.dedup_radius)
        retrack = [
            i for i in range(len(status))
            if status[i] in (kernels.STATUS_STALLED, kernels.STATUS_MAX_STEPS)
        ]
        for members in clusters:
            retrack.extend(members[1:])
        if not retrack:
            break
        retrack = np.array(sorted(set(retrack)), dtype=np.int64)
        tight = config.tightened(round_index)
        e2, s2, r2, st2, c2 = arrays.track_many(starts[retrack], tight)
        improved = 0
        for j, i in enumerate(retrack):
            # prefer the re-tracked result when it converged
            if s2[j] == kernels.STATUS_CONVERGED:
                ends[i] = e2[j]
                status[i] = s2[j]
                resid[i] = r2[j]
                steps[i] = st2[j]
                cond[i] = c2[j]
                improved += 1
        if improved == 0:
            break
    return ends, status, resid, steps, cond


def track_path(
    start,
    g: ConcreteSystem,
    f: ConcreteSystem,
    config: Optional[TrackerConfig] = None,
    gamma: complex = 1.0,
    trace_path: Optional[str] = None,
) -> PathResult:
    """Track a single path of H = gamma*t*g + (1-t)*f from a root of g.

    ``start`` must satisfy g to residual 1e-10. When ``trace_path`` is
    given, per-step rows (t, |z|, step) are written there as CSV.
    """
    config = config or TrackerConfig()
    start = np.asarray(start, dtype=np.complex128)
    g_res = float(np.abs(g.evaluate(start)).max())
    if g_res > 1e-10:
        raise ValueError(f"start point is not a root of g (residual {g_res:.2e})")
    arrays = _convex_homotopy_arrays(g, f, gamma)
    trace_rows = config.max_steps if trace_path else 0
    (z, st, fr, sp, cm, n_trace), trace = arrays.track_one(start, config, trace_rows)
    if trace_path:
        with open(trace_path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t", "z_norm", "step"])
            for row in trace[:n_trace]:
                writer.writerow([f"{row[0]:.17g}", f"{row[1]:.17g}", f"{row[2]:.17g}"])
    return PathResult(
        endpoint=z,
        status=STATUS_NAMES[int(st)],
        final_residual=float(fr),
        steps_taken=int(sp),
        min_jacobian_condition_proxy=float(cm),
    )


def solve(
    target: ConcreteSystem,
    config: Optional[TrackerConfig] = None,
    seed: int = 0,
    gamma: Optional[complex] = None,
) -> SolveResult:
    """Find all isolated solutions of a square system by total degree.

    Deterministic given (seed, gamma): results are reduced in a canonical
    order regardless of tracking schedule.
    """
    config = config or TrackerConfig()
    _require_square(target)
    g, starts = start_system(target)
    if gamma is None:
        rng = np.random.default_rng(seed)
        gamma = complex(np.exp(2j * np.pi * rng.uniform()))
    arrays = _convex_homotopy_arrays(g, target, gamma)
    out = _track_with_refinement(arrays, starts, config)
    return _assemble_result(arrays, *out, gamma=gamma, config=config)


class ParameterHomotopy:
    """One generic solve of a family, reusable for many parameter targets.

    The family is solved once at a random complex parameter point p0; each
    later target tracks only the finite solutions found there along the
    segment p(t) = t*p0 + (1-t)*p_target.
    """

    def __init__(
        self,
        family: ParameterizedSystem,
        config: Optional[TrackerConfig] = None,
        seed: int = 0,
        p0: Optional[np.ndarray] = None,
        p0_scale=None,
    ):
        self.family = family
        self.config = config or TrackerConfig()
        rng = np.random.default_rng(seed)
        if p0 is None:
            n = family.n_parameters
            scale = np.ones(n) if p0_scale is None else np.asarray(p0_scale, float)
            p0 = (scale + 0j) * (
                rng.standard_normal(n) + 1j * rng.standard_normal(n)
            ) / np.sqrt(2.0)
        self.p0 = np.asarray(p0, dtype=np.complex128)
        concrete0 = family.bind(self.p0).normalized()
        self.generic_result = solve(
            concrete0, self.config, seed=int(rng.integers(2**63))
        )
        if self.generic_result.distinct_solutions.shape[0] == 0:
            raise InvalidSystemError("no finite solutions at the generic point p0")
        self.basis = self.generic_result.distinct_solutions

    @property
    def generic_root_count(self) -> int:
        return self.basis.shape[0]

    def track_to(self, p_target) -> SolveResult:
        """Solve the family at one real/complex target parameter vector."""
        p_target = np.asarray(p_target, dtype=np.complex128)
        bound = self.family.bind(p_target)
        scales = bound.row_scales()
        arrays = _segment_homotopy_arrays(self.family, self.p0, p_target, scales)
        out = _track_with_refinement(arrays, self.basis.copy(), self.config)
        return _assemble_result(arrays, *out, gamma=1.0 + 0j, config=self.config)


def parameter_solve(
    family: ParameterizedSystem,
    p_targets: Sequence,
    config: Optional[TrackerConfig] = None,
    seed: int = 0,
    p0: Optional[np.ndarray] = None,
) -> list:
    """Solve a parameterized family at each target parameter vector.

    Solves once at a random complex p0 (total degree), then continues the
    generic finite roots to every target. Per-target solution counts never
    exceed the generic count.
    """
    targets = [np.asarray(p, dtype=np.complex128) for p in p_targets]
    scale = None
    if targets and p0 is None:
        scale = 1.0 + np.mean([np.abs(p) for p in targets], axis=0)
    hom = ParameterHomotopy(family, config=config, seed=seed, p0=p0, p0_scale=scale)
    return [hom.track_to(p) for p in targets]
