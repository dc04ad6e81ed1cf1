"""Proximal-step solvers behind the mirror-descent learners.

* :func:`mset_prox` -- the m-set step: one scalar dual variable for the
  cardinality constraint, monotone per-coordinate solves, box handling by
  clipping with complementary slackness.  A scalar kernel is compiled with
  numba when available; the vectorized numpy implementation is always
  present and the two agree to solver tolerance.
* :func:`flow_prox_newton` -- damped Newton on the equality-constrained
  KKT system over a flow polytope.  Used as the numeric oracle that keeps
  the fast weight-pushing path honest, and as the cross-check for the
  entropy projection.
* :func:`sinkhorn_flow_projection` -- Bregman projection (negative
  entropy) onto the flow polytope by cyclic coordinate ascent on vertex
  potentials.
"""

import numpy as np

from .domain import flow_check
from .errors import SolverFailure

SUM_TOL = 1e-12
INNER_TOL = 1e-14


# ---------------------------------------------------------------------------
# m-set proximal step
# ---------------------------------------------------------------------------
#
# The step solves  min_x  <step, x> + D_phi(x || x_old)  over the scaled
# simplex {0 <= x <= 1, sum x = m} with phi the m-set regularizer.  With
# g(x) = 2x + (ln x + 1)/m the stationarity condition reads
#     g(x_i) = c_i - lam,      c_i = g(x_old_i) - step_i,
# clipped at the box: x_i = 1 whenever c_i - lam >= g(1).  Coordinates never
# reach 0 because g -> -inf there.  In the substitution u = ln x the
# per-coordinate equation 2 e^u + (u + 1)/m = t is convex in u, so plain
# Newton converges globally; the outer scalar equation sum x(lam) = m is
# solved by safeguarded Newton (or bisection, kept as the reference mode).

def _solve_coords_numpy(t, m, u0):
    """Solve 2 e^u + (u+1)/m = t per coordinate; returns u (= ln x) <= 0."""
    u = np.minimum(u0, 0.0)
    for _ in range(100):
        eu = np.exp(u)
        h = 2.0 * eu + (u + 1.0) / m - t
        if np.all(np.abs(h) <= INNER_TOL):
            break
        u = np.minimum(u - h / (2.0 * eu + 1.0 / m), 0.0)
    return u


def mset_prox_numpy(x_old, step, m, lam_init=0.0, method="newton",
                    sum_tol=SUM_TOL, max_outer=500):
    """Vectorized m-set proximal step.

    Parameters
    ----------
    x_old : interior point of the polytope (all coordinates in (0, 1]).
    step : learning-rate-scaled loss vector (eta * y).
    m : cardinality of the set.
    lam_init : warm start for the scalar dual variable.
    method : "newton" (safeguarded) or "bisect" (pure bisection reference).

    Returns
    -------
    (x, lam) with ``|sum(x) - m| <= sum_tol``.
    """
    x_old = np.asarray(x_old, dtype=float)
    step = np.asarray(step, dtype=float)
    c = 2.0 * x_old + (np.log(x_old) + 1.0) / m - step
    g_at_one = 2.0 + 1.0 / m
    u = np.minimum(np.log(x_old), 0.0)

    def evaluate(lam, u_warm):
        t = np.minimum(c - lam, g_at_one)
        u_new = _solve_coords_numpy(t, m, u_warm)
        x = np.exp(u_new)
        return x, u_new

    lam = float(lam_init)
    lo = hi = None  # s(lo) > 0 > s(hi); s is decreasing in lam
    for _ in range(max_outer):
        x, u = evaluate(lam, u)
        s = float(x.sum()) - m
        if abs(s) <= sum_tol:
            return x, lam
        if s > 0:
            lo = lam
        else:
            hi = lam
        if method == "bisect" and lo is not None and hi is not None:
            lam = 0.5 * (lo + hi)
            continue
        uncapped = (c - lam) < g_at_one
        slope = -float(np.sum(1.0 / (2.0 + 1.0 / (m * x[uncapped])))) \
            if uncapped.any() else 0.0
        if slope < 0.0:
            cand = lam - s / slope
        else:
            cand = lam + (1.0 if s > 0 else -1.0)
        if lo is not None and hi is not None and not (lo < cand < hi):
            cand = 0.5 * (lo + hi)
        elif lo is not None and hi is None and cand <= lo:
            cand = lo + max(1.0, 2.0 * (lam - lo) if lam > lo else 1.0)
        elif hi is not None and lo is None and cand >= hi:
            cand = hi - max(1.0, 2.0 * (hi - lam) if hi > lam else 1.0)
        lam = cand
    raise SolverFailure("m-set proximal step did not meet the sum tolerance",
                        residual=abs(s), iterations=max_outer)


def _mset_prox_scalar(x_old, step, m, lam, sum_tol, max_outer):
    """Scalar-loop twin of :func:`mset_prox_numpy` (newton mode), for numba."""
    d = x_old.shape[0]
    c = np.empty(d)
    u = np.empty(d)
    for i in range(d):
        li = np.log(x_old[i])
        c[i] = 2.0 * x_old[i] + (li + 1.0) / m - step[i]
        u[i] = li if li < 0.0 else 0.0
    g_at_one = 2.0 + 1.0 / m
    x = np.empty(d)
    lo_set = False
    hi_set = False
    lo = 0.0
    hi = 0.0
    s = 0.0
    for _ in range(max_outer):
        s = -float(m)
        slope = 0.0
        for i in range(d):
            t = c[i] - lam
            if t > g_at_one:
                t = g_at_one
            ui = u[i]
            for _ in range(100):
                eu = np.exp(ui)
                h = 2.0 * eu + (ui + 1.0) / m - t
                if abs(h) <= 1e-14:
                    break
                ui -= h / (2.0 * eu + 1.0 / m)
                if ui > 0.0:
                    ui = 0.0
            u[i] = ui
            xi = np.exp(ui)
            x[i] = xi
            s += xi
            if c[i] - lam < g_at_one:
                slope -= 1.0 / (2.0 + 1.0 / (m * xi))
        if abs(s) <= sum_tol:
            return x, lam, s
        if s > 0.0:
            lo = lam
            lo_set = True
        else:
            hi = lam
            hi_set = True
        if slope < 0.0:
            cand = lam - s / slope
        else:
            cand = lam + (1.0 if s > 0.0 else -1.0)
        if lo_set and hi_set and not (lo < cand < hi):
            cand = 0.5 * (lo + hi)
        elif lo_set and not hi_set and cand <= lo:
            cand = lo + (2.0 * (lam - lo) if lam - lo > 0.5 else 1.0)
        elif hi_set and not lo_set and cand >= hi:
            cand = hi - (2.0 * (hi - lam) if hi - lam > 0.5 else 1.0)
        lam = cand
    return x, lam, s


try:  # optional acceleration; the numpy path is the behavioural reference
    from numba import njit

    _mset_prox_compiled = njit(cache=True)(_mset_prox_scalar)
except ImportError:  # pragma: no cover
    _mset_prox_compiled = None


def mset_prox(x_old, step, m, lam_init=0.0, method="newton",
              sum_tol=SUM_TOL, max_outer=500):
    """Fastest available m-set proximal step (numba kernel when importable)."""
    if _mset_prox_compiled is not None and method == "newton":
        x, lam, s = _mset_prox_compiled(
            np.ascontiguousarray(x_old, dtype=float),
            np.ascontiguousarray(step, dtype=float),
            float(m), float(lam_init), float(sum_tol), int(max_outer))
        if abs(s) > sum_tol:
            raise SolverFailure("m-set proximal step did not meet the sum "
                                "tolerance", residual=abs(s))
        return x, lam
    return mset_prox_numpy(x_old, step, m, lam_init=lam_init, method=method,
                           sum_tol=sum_tol, max_outer=max_outer)


def mset_prox_kkt_residual(x_new, x_old, step, m, lam):
    """Stationarity residual of the returned point (excludes capped coords'
    slack, which is non-negative by construction)."""
    g_new = 2.0 * x_new + (np.log(x_new) + 1.0) / m
    g_old = 2.0 * x_old + (np.log(x_old) + 1.0) / m
    res = g_new - g_old + step + lam
    capped = x_new >= 1.0 - 1e-12
    res = np.where(capped, np.minimum(res, 0.0), res)  # slack mu >= 0 at cap
    return float(np.max(np.abs(res))), float(abs(x_new.sum() - m))


# ---------------------------------------------------------------------------
# Flow-polytope constraint matrix
# ---------------------------------------------------------------------------

def flow_constraints(dag):
    """Equality system ``A x = b`` of the unit-flow polytope.

    Rows: source outflow equals one, conservation at every vertex other
    than source and sink.  The sink row is implied and omitted so that A
    has full row rank on connected graphs.
    """
    rows = []
    b = []
    row = np.zeros(dag.n_edges)
    row[dag.out_edges[dag.source]] = 1.0
    rows.append(row)
    b.append(1.0)
    for v in range(dag.n_vertices):
        if v in (dag.source, dag.sink):
            continue
        row = np.zeros(dag.n_edges)
        row[dag.in_edges[v]] += 1.0
        row[dag.out_edges[v]] -= 1.0
        rows.append(row)
        b.append(0.0)
    return np.array(rows), np.array(b)


def flow_prox_newton(dag, reg, x_start, linear, tol=1e-10, max_iter=500):
    """Minimize ``<linear, x> + reg(x)`` over the flow polytope.

    Damped Newton on the KKT system from a feasible interior start.  A
    proximal step is obtained with ``linear = eta*y - reg.grad(x_old)``;
    the plain regularizer minimizer with ``linear = 0``.

    Returns ``(x, info)`` where info carries the final residual and
    iteration count.  Raises :class:`SolverFailure` if the KKT residual
    does not reach ``tol`` within ``max_iter`` iterations.
    """
    a_mat, b_vec = flow_constraints(dag)
    n_rows = a_mat.shape[0]
    x = np.asarray(x_start, dtype=float).copy()
    linear = np.asarray(linear, dtype=float)

    def objective(pt):
        return float(linear @ pt) + reg.value(pt)

    residual = np.inf
    for iteration in range(max_iter):
        grad = linear + reg.grad(x)
        # Stationarity is measured against the best multiplier for the
        # CURRENT point (least squares), not the one riding along with the
        # Newton step, which is conditioning-limited near the optimum.
        nu_ls = np.linalg.lstsq(a_mat.T, -grad, rcond=None)[0]
        residual = max(float(np.max(np.abs(grad + a_mat.T @ nu_ls))),
                       float(np.max(np.abs(a_mat @ x - b_vec))))
        if residual <= tol:
            return x, {"residual": residual, "iterations": iteration}
        hess = reg.hessian_matrix(x)
        kkt = np.zeros((dag.n_edges + n_rows, dag.n_edges + n_rows))
        kkt[: dag.n_edges, : dag.n_edges] = hess
        kkt[: dag.n_edges, dag.n_edges:] = a_mat.T
        kkt[dag.n_edges:, : dag.n_edges] = a_mat
        rhs = np.concatenate([-grad, np.zeros(n_rows)])
        try:
            sol = np.linalg.solve(kkt, rhs)
        except np.linalg.LinAlgError:
            kkt[: dag.n_edges, : dag.n_edges] += 1e-12 * np.eye(dag.n_edges)
            sol = np.linalg.lstsq(kkt, rhs, rcond=None)[0]
        p = sol[: dag.n_edges]
        negative = p < 0
        alpha = 1.0
        if negative.any():
            alpha = min(1.0, float(0.995 * np.min(x[negative] / -p[negative])))
        slope = float(grad @ p)
        base = objective(x)
        if abs(slope) > 1e-12 * (1.0 + abs(base)):
            # Armijo backtracking; below that scale the predicted decrease
            # drowns in float round-off, so the safeguarded step is taken as is.
            while alpha > 1e-16:
                cand = x + alpha * p
                if cand.min() > 0 and objective(cand) <= base + 1e-4 * alpha * slope:
                    break
                alpha *= 0.5
            if alpha <= 1e-16:
                raise SolverFailure("flow Newton line search stalled",
                                    residual=residual, iterations=iteration)
        x = x + alpha * p
    raise SolverFailure("flow Newton did not reach tolerance",
                        residual=residual, iterations=max_iter)


def sinkhorn_flow_projection(dag, log_w, tol=1e-10, max_iter=500):
    """Negative-entropy Bregman projection of weights ``exp(log_w)`` onto
    the flow polytope.

    Coordinate ascent over one potential per vertex (sink pinned to zero):
    the stationary point has ``x_e = w_e * exp(nu_tail - nu_head)``, and a
    vertex update restores its own conservation constraint exactly.  Runs
    in the log domain throughout.
    """
    log_w = np.asarray(log_w, dtype=float)
    nu = np.zeros(dag.n_vertices)
    order = dag.topological_order()

    def lse(values):
        m = np.max(values)
        if not np.isfinite(m):
            return -np.inf
        return m + np.log(np.sum(np.exp(values - m)))

    tails = np.array([u for u, _ in dag.edges])
    heads = np.array([v for _, v in dag.edges])
    for sweep in range(max_iter):
        for v in order:
            if v == dag.sink:
                continue
            out = dag.out_edges[v]
            b = lse(log_w[out] - nu[heads[out]])
            if v == dag.source:
                nu[v] = -b
            else:
                a = lse(log_w[dag.in_edges[v]] + nu[tails[dag.in_edges[v]]])
                nu[v] = 0.5 * (a - b)
        x = np.exp(log_w + nu[tails] - nu[heads])
        ok, residual = flow_check(dag, x)
        if residual <= tol:
            return x, {"residual": residual, "iterations": sweep}
    raise SolverFailure("entropy projection did not reach tolerance",
                        residual=residual, iterations=max_iter)
