"""Distance-generating functions used by the mirror-descent learners.

Three regularizers are implemented:

* :class:`MSetRegularizer` -- ``sum_i x_i^2 + (1/m) x_i ln x_i`` on the
  scaled-simplex hull of an m-set,
* :class:`DilatedEntropy` -- ``sum_E x_e ln x_e - sum_V x_v ln x_v`` on a
  flow polytope, with vertex loads ``x_v`` computed from outgoing edges
  (the sink load is pinned to one),
* :class:`NegativeEntropy` -- ``sum_e (x_e ln x_e - x_e)``.

Everywhere ``0 ln 0 = 0``.  Values accept boundary points; gradients and
Hessians require strictly positive coordinates.
"""

import numpy as np

from .errors import DomainError, InternalConsistencyError

# Floor inside logs so diagnostics at exact zeros return -inf-free numbers.
EPS_CLAMP = 1e-300
NEG_BREGMAN_TOL = 1e-10


def _xlogx(x):
    return np.where(x > 0.0, x * np.log(np.maximum(x, EPS_CLAMP)), 0.0)


def _check_nonneg(x):
    if np.min(x, initial=0.0) < -1e-12:
        raise DomainError(f"negative coordinate {np.min(x)!r}")


def _check_positive(x):
    if np.min(x) <= 0.0:
        raise DomainError("gradient/Hessian need strictly positive coordinates")


class Regularizer:
    """Interface: value, gradient, Hessian quadratic form, Bregman divergence."""

    def value(self, x):
        raise NotImplementedError

    def grad(self, x):
        raise NotImplementedError

    def hessian_quadform(self, x, z):
        """``z' H(x) z`` with the exact Hessian at ``x``."""
        raise NotImplementedError

    def hessian_matrix(self, x):
        """Dense Hessian; desk-scale helper for the numeric KKT solvers."""
        raise NotImplementedError

    def bregman(self, x_new, x_old):
        """``value(x_new) - value(x_old) - <grad(x_old), x_new - x_old>``.

        Round-off below 1e-10 is clamped to zero; anything more negative is
        a bug (Bregman divergences are non-negative by convexity) and raises.
        """
        x_new = np.asarray(x_new, dtype=float)
        x_old = np.asarray(x_old, dtype=float)
        div = self.value(x_new) - self.value(x_old) \
            - float(self.grad(x_old) @ (x_new - x_old))
        if div < -NEG_BREGMAN_TOL:
            raise InternalConsistencyError(f"negative Bregman divergence {div!r}")
        return max(div, 0.0)

    def minimizer(self):
        """Argmin over the regularizer's domain polytope, in closed form."""
        raise NotImplementedError


class MSetRegularizer(Regularizer):
    """Quadratic-plus-scaled-entropy regularizer for exactly-m-of-d sets."""

    def __init__(self, d, m):
        self.d = int(d)
        self.m = int(m)

    def value(self, x):
        x = np.asarray(x, dtype=float)
        _check_nonneg(x)
        return float(np.sum(x * x) + _xlogx(x).sum() / self.m)

    def grad(self, x):
        x = np.asarray(x, dtype=float)
        _check_positive(x)
        return 2.0 * x + (np.log(x) + 1.0) / self.m

    def hessian_quadform(self, x, z):
        x = np.asarray(x, dtype=float)
        z = np.asarray(z, dtype=float)
        _check_positive(x)
        return float(np.sum(z * z * (2.0 + 1.0 / (self.m * x))))

    def hessian_matrix(self, x):
        x = np.asarray(x, dtype=float)
        _check_positive(x)
        return np.diag(2.0 + 1.0 / (self.m * x))

    def minimizer(self):
        # Symmetric strictly convex function on a permutation-symmetric
        # polytope: the uniform point m/d minimizes.
        return np.full(self.d, self.m / self.d)


class NegativeEntropy(Regularizer):
    """``sum_e (x_e ln x_e - x_e)``; domain is the non-negative orthant."""

    def value(self, x):
        x = np.asarray(x, dtype=float)
        _check_nonneg(x)
        return float(_xlogx(x).sum() - x.sum())

    def grad(self, x):
        x = np.asarray(x, dtype=float)
        _check_positive(x)
        return np.log(x)

    def hessian_quadform(self, x, z):
        x = np.asarray(x, dtype=float)
        z = np.asarray(z, dtype=float)
        _check_positive(x)
        return float(np.sum(z * z / x))

    def hessian_matrix(self, x):
        x = np.asarray(x, dtype=float)
        _check_positive(x)
        return np.diag(1.0 / x)


class DilatedEntropy(Regularizer):
    """Entropy dilated along a DAG's out-stars.

    Evaluated in the two-sum edge/vertex form with vertex loads computed
    from the point itself, so the function (and its derivatives) extend
    smoothly to all positive edge vectors, not only exact unit flows.  On
    the flow polytope it equals the negative Shannon entropy of the induced
    path distribution.
    """

    def __init__(self, dag):
        self.dag = dag
        # Out-stars partition the edges across non-sink vertices.
        self._stars = [(v, dag.out_edges[v]) for v in range(dag.n_vertices)
                       if v != dag.sink and len(dag.out_edges[v])]

    def _loads(self, x):
        return np.array([x[idx].sum() for _, idx in self._stars])

    def value(self, x):
        x = np.asarray(x, dtype=float)
        _check_nonneg(x)
        loads = self._loads(x)
        return float(_xlogx(x).sum() - _xlogx(loads).sum())

    def grad(self, x):
        x = np.asarray(x, dtype=float)
        _check_positive(x)
        g = np.log(x)
        for _, idx in self._stars:
            g[idx] -= np.log(x[idx].sum())
        return g

    def hessian_quadform(self, x, z):
        x = np.asarray(x, dtype=float)
        z = np.asarray(z, dtype=float)
        _check_positive(x)
        total = float(np.sum(z * z / x))
        for _, idx in self._stars:
            total -= float(z[idx].sum()) ** 2 / float(x[idx].sum())
        return total

    def hessian_matrix(self, x):
        x = np.asarray(x, dtype=float)
        _check_positive(x)
        h = np.diag(1.0 / x)
        for _, idx in self._stars:
            load = x[idx].sum()
            h[np.ix_(idx, idx)] -= 1.0 / load
        return h

    def minimizer(self):
        """The flow induced by the uniform distribution over s-t paths."""
        return uniform_path_flow(self.dag)


def uniform_path_flow(dag):
    """Edge marginals of the uniform distribution over all s-t paths."""
    order = dag.topological_order()
    to_sink = [0] * dag.n_vertices
    to_sink[dag.sink] = 1
    for u in reversed(order):
        if u != dag.sink:
            to_sink[u] = sum(to_sink[dag.edges[e][1]] for e in dag.out_edges[u])
    from_source = [0] * dag.n_vertices
    from_source[dag.source] = 1
    for u in order:
        for e in dag.out_edges[u]:
            from_source[dag.edges[e][1]] += from_source[u]
    n_paths = to_sink[dag.source]
    flow = np.empty(dag.n_edges)
    for e, (u, v) in enumerate(dag.edges):
        flow[e] = from_source[u] * to_sink[v] / n_paths
    return flow


def path_distribution(dag, flow):
    """All s-t paths with their Markovian-sampling probabilities under ``flow``.

    Returns ``(paths, probs)``; probabilities multiply the conditional edge
    choices ``flow[e] / flow[tail(e)]`` along each path.
    """
    flow = np.asarray(flow, dtype=float)
    loads = dag.vertex_loads(flow)
    paths = dag.enumerate_paths()
    probs = []
    for x in paths:
        p = 1.0
        for e in np.flatnonzero(x):
            p *= flow[e] / loads[dag.edges[e][0]]
        probs.append(p)
    return paths, np.array(probs)


def path_entropy_sum(dag, flow):
    """``sum_p P(p) ln P(p)`` by path enumeration (oracle for the dilated form)."""
    _, probs = path_distribution(dag, flow)
    return float(np.sum(_xlogx(probs)))
