"""Hot numerical kernels for path tracking.

Everything here is written as plain Python over numpy arrays and compiled
with numba's ``@njit`` when available. Setting the environment variable
``FDOALOC_NO_NUMBA=1`` (or numba failing to import) selects the uncompiled
pure-numpy path instead; results are identical, just slower. The
benchmark under ``benchmarks/`` compares the two.

A homotopy is represented as a "coefficient path" system: every term
carries a small polynomial in the deformation parameter t (columns of
``tcoeffs``) and a sparse list of (variable, exponent) factors addressed
CSR-style by ``term_offsets``. Both the total-degree homotopy
(coefficients linear in t) and parameter-segment homotopies (quadratic in
t for these systems) fit this form, so one tracker serves both. The
Jacobian has the same layout with one CSR row per (equation, unknown).
"""

import os
import warnings

import numpy as np

_ENV_FLAG = "FDOALOC_NO_NUMBA"


def _numba_requested() -> bool:
    return os.environ.get(_ENV_FLAG, "0").lower() not in ("1", "true", "yes")


NUMBA_ENABLED = False
if _numba_requested():
    try:
        from numba import njit, prange

        NUMBA_ENABLED = True
    except ImportError:  # pragma: no cover - exercised via the env flag
        warnings.warn("numba unavailable, falling back to pure numpy kernels")

if not NUMBA_ENABLED:
    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]):
            return args[0]

        def wrap(func):
            return func

        return wrap

    prange = range


# path statuses
STATUS_CONVERGED = 0
STATUS_DIVERGED = 1
STATUS_STALLED = 2
STATUS_MAX_STEPS = 3

# config vector layout (see tracking.TrackerConfig.as_array)
CFG_INITIAL_STEP = 0
CFG_MIN_STEP = 1
CFG_MAX_STEP = 2
CFG_NEWTON_TOL = 3
CFG_MAX_NEWTON = 4
CFG_DIVERGENCE_NORM = 5
CFG_SUCCESS_RESIDUAL = 6
CFG_STEP_SHRINK = 7
CFG_STEP_GROW = 8
CFG_MAX_STEPS = 9
CFG_CORRECTION_RATIO = 10
CFG_T_END = 11
CFG_LEN = 12

# the march stops at T_STOP above t_end and finishes with a Newton polish
# on the target; below TAIL_START the step is capped at TAIL_FRAC of the
# remaining interval so the approach to t=0 is geometric
T_STOP = 1e-9
TAIL_START = 0.1
TAIL_FRAC = 0.8
POLISH_ITERS = 12


@njit(cache=True)
def lu_solve(A, b):
    """Partial-pivot LU solve of a small dense complex system.

    Returns (x, ok, rcond_proxy) where rcond_proxy is the ratio of the
    smallest to largest pivot magnitude seen during elimination.
    """
    n = A.shape[0]
    M = A.copy()
    x = b.copy()
    minp = 1e300
    maxp = 0.0
    for k in range(n):
        piv = k
        pm = abs(M[k, k])
        for i in range(k + 1, n):
            m = abs(M[i, k])
            if m > pm:
                pm = m
                piv = i
        if pm < 1e-300 or not np.isfinite(pm):
            return x, False, 0.0
        if piv != k:
            for j in range(n):
                tmp = M[k, j]
                M[k, j] = M[piv, j]
                M[piv, j] = tmp
            tmpb = x[k]
            x[k] = x[piv]
            x[piv] = tmpb
        if pm < minp:
            minp = pm
        if pm > maxp:
            maxp = pm
        for i in range(k + 1, n):
            fac = M[i, k] / M[k, k]
            for j in range(k + 1, n):
                M[i, j] -= fac * M[k, j]
            x[i] -= fac * x[k]
    for i in range(n - 1, -1, -1):
        acc = x[i]
        for j in range(i + 1, n):
            acc -= M[i, j] * x[j]
        x[i] = acc / M[i, i]
    return x, True, minp / maxp


@njit(cache=True)
def inf_norm(v):
    m = 0.0
    for i in range(v.shape[0]):
        a = abs(v[i])
        if a > m:
            m = a
    return m


@njit(cache=True)
def eval_h(tc, vidx, vexp, voffs, eq_offs, z, t, out):
    """H(z, t) for a coefficient-path system, one value per equation."""
    n_eq = eq_offs.shape[0] - 1
    n_m = tc.shape[1]
    for i in range(n_eq):
        acc = 0.0 + 0.0j
        for k in range(eq_offs[i], eq_offs[i + 1]):
            c = tc[k, n_m - 1]
            for m in range(n_m - 2, -1, -1):
                c = c * t + tc[k, m]
            for q in range(voffs[k], voffs[k + 1]):
                zj = z[vidx[q]]
                for _ in range(vexp[q]):
                    c *= zj
            acc += c
        out[i] = acc


@njit(cache=True)
def eval_ht(tc, vidx, vexp, voffs, eq_offs, z, t, out):
    """dH/dt at (z, t)."""
    n_eq = eq_offs.shape[0] - 1
    n_m = tc.shape[1]
    for i in range(n_eq):
        acc = 0.0 + 0.0j
        for k in range(eq_offs[i], eq_offs[i + 1]):
            c = 0.0 + 0.0j
            for m in range(n_m - 1, 0, -1):
                c = c * t + m * tc[k, m]
            for q in range(voffs[k], voffs[k + 1]):
                zj = z[vidx[q]]
                for _ in range(vexp[q]):
                    c *= zj
            acc += c
        out[i] = acc


@njit(cache=True)
def eval_hz(jtc, jvidx, jvexp, jvoffs, jrow_offs, n_unknowns, z, t, out):
    """dH/dz as a dense matrix; CSR rows are (equation, unknown) pairs."""
    n_eq = out.shape[0]
    n_m = jtc.shape[1]
    for i in range(n_eq):
        for l in range(n_unknowns):
            row = i * n_unknowns + l
            acc = 0.0 + 0.0j
            for k in range(jrow_offs[row], jrow_offs[row + 1]):
                c = jtc[k, n_m - 1]
                for m in range(n_m - 2, -1, -1):
                    c = c * t + jtc[k, m]
                for q in range(jvoffs[k], jvoffs[k + 1]):
                    zj = z[jvidx[q]]
                    for _ in range(jvexp[q]):
                        c *= zj
                acc += c
            out[i, l] = acc


@njit(cache=True)
def eval_many(tc, vidx, vexp, voffs, eq_offs, points, t):
    """Max-magnitude residual of H(., t) at each row of ``points``."""
    n_pts = points.shape[0]
    n_eq = eq_offs.shape[0] - 1
    out = np.empty(n_pts, dtype=np.float64)
    scratch = np.empty(n_eq, dtype=np.complex128)
    for p in range(n_pts):
        eval_h(tc, vidx, vexp, voffs, eq_offs, points[p], t, scratch)
        out[p] = inf_norm(scratch)
    return out


@njit(cache=True)
def _tangent(tc, vidx, vexp, voffs, eq_offs,
             jtc, jvidx, jvexp, jvoffs, jrow_offs, nv, z, t, J, rhs):
    """Path tangent w.r.t. DECREASING t: dz/d(-t) = Hz^-1 Ht.

    Davidenko gives dz/dt = -Hz^-1 Ht; the march runs t: 1 -> 0, so the
    sign folds in here and every RK4 update below is a plain plus.
    """
    eval_hz(jtc, jvidx, jvexp, jvoffs, jrow_offs, nv, z, t, J)
    eval_ht(tc, vidx, vexp, voffs, eq_offs, z, t, rhs)
    v, ok, rc = lu_solve(J, rhs)
    return v, ok, rc


@njit(cache=True)
def track_one(tc, vidx, vexp, voffs, eq_offs,
              jtc, jvidx, jvexp, jvoffs, jrow_offs,
              max_degree, z0, cfg, trace_out, record_trace):
    """Track one path of H(z, t) = 0 from t=1 down to t_end.

    The predictor is a classical 4th-order Runge-Kutta step on the
    Davidenko ODE; the corrector is Newton at fixed t. A step is accepted
    only when the corrector converges quickly AND moves the predicted
    point by at most a fraction of the predicted advance (this guards
    against hopping onto a neighboring path).

    Returns (endpoint, status, final_residual, accepted_steps,
    min_rcond_proxy, trace_rows).
    """
    nv = z0.shape[0]
    neq = eq_offs.shape[0] - 1
    z = z0.copy()
    J = np.empty((neq, nv), dtype=np.complex128)
    rhs = np.empty(neq, dtype=np.complex128)
    scratch = np.empty(neq, dtype=np.complex128)

    h = cfg[CFG_INITIAL_STEP]
    hmin = cfg[CFG_MIN_STEP]
    hmax = cfg[CFG_MAX_STEP]
    newton_tol = cfg[CFG_NEWTON_TOL]
    max_newton = int(cfg[CFG_MAX_NEWTON])
    divnorm = cfg[CFG_DIVERGENCE_NORM]
    success_resid = cfg[CFG_SUCCESS_RESIDUAL]
    shrink = cfg[CFG_STEP_SHRINK]
    grow = cfg[CFG_STEP_GROW]
    max_steps = int(cfg[CFG_MAX_STEPS])
    corr_ratio = cfg[CFG_CORRECTION_RATIO]
    t_end = cfg[CFG_T_END]

    t_stop = t_end + T_STOP
    t = 1.0
    steps = 0
    attempts = 0
    condmin = 1e300
    status = STATUS_MAX_STEPS
    n_trace = 0
    failed = False

    while t > t_stop:
        if attempts >= max_steps:
            status = STATUS_MAX_STEPS
            failed = True
            break
        attempts += 1
        heff = h
        rem = t - t_end
        if rem < TAIL_START:
            cap = TAIL_FRAC * rem
            if heff > cap:
                heff = cap
        if heff > t - t_stop:
            heff = t - t_stop

        k1, ok, rc0 = _tangent(tc, vidx, vexp, voffs, eq_offs,
                               jtc, jvidx, jvexp, jvoffs, jrow_offs,
                               nv, z, t, J, rhs)
        if ok:
            k2, ok, _ = _tangent(tc, vidx, vexp, voffs, eq_offs,
                                 jtc, jvidx, jvexp, jvoffs, jrow_offs,
                                 nv, z + 0.5 * heff * k1, t - 0.5 * heff, J, rhs)
        if ok:
            k3, ok, _ = _tangent(tc, vidx, vexp, voffs, eq_offs,
                                 jtc, jvidx, jvexp, jvoffs, jrow_offs,
                                 nv, z + 0.5 * heff * k2, t - 0.5 * heff, J, rhs)
        if ok:
            k4, ok, _ = _tangent(tc, vidx, vexp, voffs, eq_offs,
                                 jtc, jvidx, jvexp, jvoffs, jrow_offs,
                                 nv, z + heff * k3, t - heff, J, rhs)

        accepted = False
        if ok:
            zpred = z + (heff / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            zp = zpred.copy()
            tn = t - heff
            dpred = inf_norm(zpred - z)
            converged = False
            used = 0
            rc_step = rc0
            for it in range(max_newton):
                eval_h(tc, vidx, vexp, voffs, eq_offs, zp, tn, scratch)
                if not np.isfinite(inf_norm(scratch)):
                    break
                eval_hz(jtc, jvidx, jvexp, jvoffs, jrow_offs, nv, zp, tn, J)
                dz, okn, rcn = lu_solve(J, scratch)
                if not okn:
                    break
                if rcn < rc_step:
                    rc_step = rcn
                zp = zp - dz
                used = it + 1
                zn = inf_norm(zp)
                scale = 1.0
                zpow = zn
                for _ in range(max_degree - 1):
                    zpow *= zn
                if zpow > scale:
                    scale = zpow
                eval_h(tc, vidx, vexp, voffs, eq_offs, zp, tn, scratch)
                rn = inf_norm(scratch)
                if inf_norm(dz) <= 1e-9 * (1.0 + zn) and rn <= newton_tol * scale:
                    converged = True
                    break
            if converged:
                dcorr = inf_norm(zp - zpred)
                limit = corr_ratio * dpred
                floor = 1e-9 * (1.0 + inf_norm(z))
                if floor > limit:
                    limit = floor
                zn = inf_norm(zp)
                if np.isfinite(zn) and dcorr <= limit:
                    if zn > divnorm:
                        status = STATUS_DIVERGED
                        z = zp
                        failed = True
                        break
                    z = zp
                    t = tn
                    steps += 1
                    if rc_step < condmin:
                        condmin = rc_step
                    accepted = True
                    if record_trace and n_trace < trace_out.shape[0]:
                        trace_out[n_trace, 0] = t
                        trace_out[n_trace, 1] = inf_norm(z)
                        trace_out[n_trace, 2] = heff
                        n_trace += 1
                    if used <= 2:
                        h = h * grow
                        if h > hmax:
                            h = hmax
        if not accepted:
            h *= shrink
            if h < hmin:
                status = STATUS_STALLED
                failed = True
                break

    final_res = 1e300
    if not failed:
        # reached t_stop: Newton polish on the target system at t_end
        zn = inf_norm(z)
        prev = 1e300
        if zn <= divnorm:
            for _ in range(POLISH_ITERS):
                eval_h(tc, vidx, vexp, voffs, eq_offs, z, t_end, scratch)
                rn = inf_norm(scratch)
                final_res = rn
                if rn <= 1e-13 or rn > 10.0 * prev or not np.isfinite(rn):
                    break
                if rn < prev:
                    prev = rn
                eval_hz(jtc, jvidx, jvexp, jvoffs, jrow_offs, nv, z, t_end, J)
                dz, okn, rcn = lu_solve(J, scratch)
                if not okn:
                    break
                z = z - dz
            eval_h(tc, vidx, vexp, voffs, eq_offs, z, t_end, scratch)
            final_res = inf_norm(scratch)
        status = STATUS_CONVERGED if final_res <= success_resid else STATUS_STALLED
    else:
        eval_h(tc, vidx, vexp, voffs, eq_offs, z, t_end, scratch)
        final_res = inf_norm(scratch)
        if not np.isfinite(final_res):
            final_res = 1e300
    return z, status, final_res, steps, condmin, n_trace


@njit(cache=True, parallel=True)
def track_many(tc, vidx, vexp, voffs, eq_offs,
               jtc, jvidx, jvexp, jvoffs, jrow_offs,
               max_degree, starts, cfg):
    """Track every row of ``starts`` independently (parallel over paths)."""
    n_paths = starts.shape[0]
    nv = starts.shape[1]
    ends = np.empty((n_paths, nv), dtype=np.complex128)
    status = np.empty(n_paths, dtype=np.int64)
    resid = np.empty(n_paths, dtype=np.float64)
    steps = np.empty(n_paths, dtype=np.int64)
    cond = np.empty(n_paths, dtype=np.float64)
    dummy = np.empty((0, 3), dtype=np.float64)
    for p in prange(n_paths):
        z, st, fr, sp, cm, _ = track_one(
            tc, vidx, vexp, voffs, eq_offs,
            jtc, jvidx, jvexp, jvoffs, jrow_offs,
            max_degree, starts[p].copy(), cfg, dummy, False)
        ends[p] = z
        status[p] = st
        resid[p] = fr
        steps[p] = sp
        cond[p] = cm
    return ends, status, resid, steps, cond
