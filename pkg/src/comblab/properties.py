"""Registered invariant checks, runnable by scope with fixed seeds.

Each property draws its own randomness from a seeded stream, records the
worst margin it observed (positive margin = slack, negative = violation),
and never raises on failure: failures are data for the report.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import adversaries as adv
from .domain import DagPathSet, MSet, MultitaskSet, flow_check, primal_norm_bruteforce
from .errors import ComblabError
from .harness import ExperimentConfig, csv_text, run_experiment
from .instances import (diamond_dag, hypercube_set, random_feasible_loss,
                        random_interior_flow, random_layered_dag,
                        random_mset_interior, random_span_direction)
from .learners import (DagHedge, EntropyDagOmd, ExplicitHedge, MSetOmd,
                       MultitaskHedge, shift_losses)
from .proximal import flow_prox_newton
from .regularizers import (DilatedEntropy, MSetRegularizer, NegativeEntropy,
                           path_entropy_sum, uniform_path_flow)
from .sampling import RngStream, sample_explicit, sample_mset, sample_path


@dataclass
class PropertyResult:
    name: str
    scope: str
    samples: int
    worst_margin: float
    passed: bool
    detail: str = ""

    def line(self):
        flag = "pass" if self.passed else "FAIL"
        return (f"[{flag}] {self.scope}/{self.name}: {self.samples} samples, "
                f"worst margin {self.worst_margin:.3e} {self.detail}")


def _result(name, scope, samples, margins, threshold=0.0, detail=""):
    worst = float(np.min(margins)) if len(margins) else float("inf")
    return PropertyResult(name, scope, samples, worst, worst >= -abs(threshold),
                          detail)


# ---------------------------------------------------------------------------
# domain
# ---------------------------------------------------------------------------

def _sets_for_norm_checks(rng):
    dag = random_layered_dag(rng, max_edges=12)
    explicit = hypercube_set(4)
    return [MSet(8, 3), MSet(12, 5), MultitaskSet([2, 3, 2]),
            DagPathSet(dag), explicit]


def prop_dual_norm_enumeration(seed):
    rng = RngStream(seed, 101)
    gen = rng.generator
    margins = []
    total = 0
    for dset in _sets_for_norm_checks(rng):
        mat = np.asarray(dset.enumerate_vertices())
        for _ in range(200):
            z = gen.standard_normal(dset.dimension)
            closed = dset.dual_norm(z)
            brute = float(np.max(np.abs(mat @ z)))
            margins.append(1e-12 - abs(closed - brute))
            total += 1
    return _result("dual_norm_matches_enumeration", "domain", total, margins)


def prop_primal_norm_bound(seed):
    rng = RngStream(seed, 102)
    gen = rng.generator
    margins = []
    total = 0
    for d, m in ((6, 2), (9, 3), (12, 4)):
        dset = MSet(d, m)
        for _ in range(67):
            z = gen.standard_normal(d) * gen.uniform(0.3, 3.0)
            lhs = primal_norm_bruteforce(dset, z)
            rhs = 3.0 * np.max(np.abs(z)) + np.sum(np.abs(z)) / m
            margins.append(rhs + 1e-8 - lhs)
            total += 1
    return _result("primal_norm_linf_l1_bound", "domain", total, margins)


def prop_norm_duality(seed):
    rng = RngStream(seed, 103)
    gen = rng.generator
    dset = MSet(10, 3)
    margins = []
    for _ in range(100):
        y = random_feasible_loss(dset, rng)
        z = gen.standard_normal(dset.dimension)
        margins.append(primal_norm_bruteforce(dset, z) + 1e-8 - float(y @ z))
    return _result("pairing_below_primal_norm", "domain", 100, margins)


# ---------------------------------------------------------------------------
# regularizers
# ---------------------------------------------------------------------------

def _central_diff(fn, x, h=1e-6):
    grad = np.zeros_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        grad[i] = (fn(x + e) - fn(x - e)) / (2.0 * h)
    return grad


def prop_gradient_finite_diff(seed):
    rng = RngStream(seed, 201)
    margins = []
    total = 0
    mset = MSet(6, 2)
    phi = MSetRegularizer(6, 2)
    for _ in range(34):
        x = random_mset_interior(mset, rng)
        rel = _rel_gap(phi.grad(x), _central_diff(phi.value, x))
        margins.append(1e-5 - rel)
        total += 1
    dag = diamond_dag()
    psi = DilatedEntropy(dag)
    neg = NegativeEntropy()
    for _ in range(33):
        x = random_interior_flow(dag, rng)
        margins.append(1e-5 - _rel_gap(psi.grad(x), _central_diff(psi.value, x)))
        margins.append(1e-5 - _rel_gap(neg.grad(x), _central_diff(neg.value, x)))
        total += 2
    for _ in range(33):
        d2 = random_layered_dag(rng, max_edges=10)
        psi2 = DilatedEntropy(d2)
        x = random_interior_flow(d2, rng)
        margins.append(1e-5 - _rel_gap(psi2.grad(x), _central_diff(psi2.value, x)))
        total += 1
    return _result("gradient_matches_finite_differences", "regularizers",
                   total, margins)


def _rel_gap(a, b):
    scale = max(1.0, float(np.max(np.abs(a))))
    return float(np.max(np.abs(a - b))) / scale


def prop_mset_strong_convexity(seed):
    rng = RngStream(seed, 202)
    gen = rng.generator
    margins = []
    for i in range(500):
        d = int(gen.integers(4, 11))
        m = int(gen.integers(1, d // 2 + 1))
        mset = MSet(d, m)
        phi = MSetRegularizer(d, m)
        x = random_mset_interior(mset, rng)
        z = gen.standard_normal(d)
        y = random_feasible_loss(mset, rng, scale=1.0)
        lhs = phi.hessian_quadform(x, z)
        rhs = float(y @ z) ** 2 / 9.0
        margins.append(lhs - rhs + 1e-9)
    return _result("mset_regularizer_ninth_strong_convexity", "regularizers",
                   500, margins)


def prop_dilated_strong_convexity(seed):
    rng = RngStream(seed, 203)
    gen = rng.generator
    margins = []
    count = 0
    while count < 500:
        dag = random_layered_dag(rng, max_edges=12)
        psi = DilatedEntropy(dag)
        dset = DagPathSet(dag)
        for _ in range(25):
            x = random_interior_flow(dag, rng)
            z = random_span_direction(dag, rng) * gen.uniform(0.2, 2.0)
            y = random_feasible_loss(dset, rng, scale=1.0)
            lhs = 10.0 * psi.hessian_quadform(x, z)
            rhs = float(y @ z) ** 2
            margins.append(lhs - rhs + 1e-9)
            count += 1
            if count >= 500:
                break
    return _result("dilated_entropy_tenth_strong_convexity", "regularizers",
                   count, margins)


def prop_entropy_equality(seed):
    rng = RngStream(seed, 204)
    margins = []
    for _ in range(50):
        dag = random_layered_dag(rng, max_edges=14, max_paths=20)
        psi = DilatedEntropy(dag)
        x = random_interior_flow(dag, rng)
        gap = abs(psi.value(x) - path_entropy_sum(dag, x))
        margins.append(1e-10 - gap)
    return _result("dilated_equals_path_entropy", "regularizers", 50, margins)


def prop_bregman_range(seed):
    margins = []
    total = 0
    for d in range(2, 11):
        for m in range(1, d // 2 + 1):
            mset = MSet(d, m)
            phi = MSetRegularizer(d, m)
            centre = phi.minimizer()
            bound = m + math.log(d / m) + 1e-9
            for v in mset.enumerate_vertices():
                margins.append(bound - phi.bregman(v, centre))
                total += 1
    return _result("bregman_range_at_most_m_plus_log", "regularizers",
                   total, margins)


def prop_dilated_minimizer(seed):
    rng = RngStream(seed, 205)
    margins = []
    for _ in range(20):
        dag = random_layered_dag(rng, max_edges=12)
        psi = DilatedEntropy(dag)
        uniform = uniform_path_flow(dag)
        numeric, _ = flow_prox_newton(dag, psi, uniform_path_flow(dag),
                                      np.zeros(dag.n_edges))
        margins.append(1e-8 - abs(psi.value(uniform) - psi.value(numeric)))
        margins.append(1e-10 - abs(psi.value(uniform) + math.log(dag.path_count())))
    return _result("dilated_minimizer_is_uniform_paths", "regularizers",
                   20, margins)


# ---------------------------------------------------------------------------
# learners
# ---------------------------------------------------------------------------

def prop_dag_hedge_vs_explicit(seed):
    rng = RngStream(seed, 301)
    margins = []
    for rep in range(10):
        dag = random_layered_dag(rng, max_edges=14, max_paths=50)
        dset = DagPathSet(dag)
        eta = 0.4
        fast = DagHedge(dset, eta)
        slow = ExplicitHedge(dset, eta)
        for _ in range(50):
            y = random_feasible_loss(dset, rng)
            gap = float(np.max(np.abs(fast.step(y) - slow.step(y))))
            margins.append(1e-12 - gap)
    return _result("weight_pushing_matches_explicit_hedge", "learners",
                   500, margins)


def prop_multitask_factorization(seed):
    rng = RngStream(seed, 302)
    dset = MultitaskSet([2, 3, 2])
    eta = 0.5
    block = MultitaskHedge(dset, eta)
    flat = ExplicitHedge(dset, eta)
    margins = []
    for _ in range(60):
        y = random_feasible_loss(dset, rng)
        gap = float(np.max(np.abs(block.step(y) - flat.step(y))))
        margins.append(1e-12 - gap)
    return _result("product_hedge_factorizes", "learners", 60, margins)


def prop_omd_interiority_and_kkt(seed):
    rng = RngStream(seed, 303)
    dset = MSet(12, 4)
    learner = MSetOmd(dset, 0.15)
    margins = []
    kkt_margins = []
    for _ in range(300):
        y = random_feasible_loss(dset, rng)
        learner.step(y)
        margins.append(float(learner.iterate.min()))
        stat, card = learner.kkt_residual()
        kkt_margins.append(1e-9 - stat)
        kkt_margins.append(1e-9 - card)
        ok = abs(learner.iterate.sum() - dset.m) <= 1e-9
        kkt_margins.append(0.0 if ok else -1.0)
    worst = min(min(margins), min(kkt_margins))
    return PropertyResult("mset_omd_interior_and_kkt", "learners", 300,
                          worst, min(margins) > 0 and min(kkt_margins) >= 0)


def prop_shift_losses(seed):
    rng = RngStream(seed, 304)
    margins = []
    total = 0
    for _ in range(40):
        dag = random_layered_dag(rng, max_edges=14, max_paths=40)
        dset = DagPathSet(dag)
        paths = np.asarray(dag.enumerate_paths())
        for _ in range(25):
            y = random_feasible_loss(dset, rng)
            shifted, alpha = shift_losses(dag, y)
            margins.append(float(shifted.min()) + 1e-12)
            deltas = paths @ shifted - paths @ y
            margins.append(1e-12 - float(np.max(np.abs(deltas - alpha))))
            margins.append(4.0 + 1e-9 - float(np.max(paths @ (shifted ** 2))))
            total += 1
    return _result("loss_shift_nonneg_constant_bounded", "learners",
                   total, margins)


def prop_entropy_omd_matches_newton(seed):
    rng = RngStream(seed, 305)
    dag = diamond_dag()
    dset = DagPathSet(dag)
    eta = 0.7
    fast = EntropyDagOmd(dset, eta, solver="sinkhorn")
    oracle = EntropyDagOmd(dset, eta, solver="newton")
    margins = []
    for _ in range(40):
        y = random_feasible_loss(dset, rng)
        gap = float(np.max(np.abs(fast.step(y) - oracle.step(y))))
        margins.append(1e-8 - gap)
        ok, res = flow_check(dag, fast.iterate)
        margins.append(1e-9 - res)
    return _result("entropy_projection_matches_newton", "learners", 40, margins)


# ---------------------------------------------------------------------------
# sampling
# ---------------------------------------------------------------------------

def prop_sampler_marginals(seed):
    n = 100_000
    margins = []
    # m-set sampler, including a capped coordinate
    policy = np.array([1.0, 0.6, 0.4])
    rng = RngStream(seed, 401)
    counts = np.zeros(3)
    for _ in range(n):
        x = sample_mset(policy, 2, rng)
        counts += x
    emp = counts / n
    band = 4.0 * np.sqrt(policy * (1 - policy) / n)
    margins.extend((band + 1e-12 - np.abs(emp - policy)).tolist())
    # path sampler on the diamond
    dag = diamond_dag()
    flow = np.array([0.3, 0.7, 0.3, 0.7])
    rng = RngStream(seed, 402)
    counts = np.zeros(4)
    for _ in range(n):
        counts += sample_path(dag, flow, rng)
    emp = counts / n
    band = 4.0 * np.sqrt(flow * (1 - flow) / n)
    margins.extend((band + 1e-12 - np.abs(emp - flow)).tolist())
    # categorical over two vertices, weights (1, e)
    verts = np.array([[1.0, 0.0], [0.0, 1.0]])
    w = np.array([1.0, math.e])
    rng = RngStream(seed, 403)
    counts = np.zeros(2)
    for _ in range(n):
        counts += sample_explicit(verts, w, rng)
    emp = counts / n
    target = w / w.sum()
    band = 4.0 * np.sqrt(target * (1 - target) / n)
    margins.extend((band - np.abs(emp - target)).tolist())
    return _result("sampler_marginals_within_4_sigma", "sampling",
                   3 * n, margins)


def prop_sampler_exactness(seed):
    rng = RngStream(seed, 404)
    gen = rng.generator
    margins = []
    dag = random_layered_dag(rng, max_edges=12)
    dset = DagPathSet(dag)
    flow = random_interior_flow(dag, rng)
    for _ in range(2000):
        x = sample_path(dag, flow, rng)
        ok, res = flow_check(dag, x)
        margins.append(0.0 if ok else -res)
    mset = MSet(9, 3)
    policy = random_mset_interior(mset, rng)
    for _ in range(2000):
        x = sample_mset(policy, 3, rng)
        margins.append(0.0 if int(x.sum()) == 3 else -1.0)
    return _result("samplers_emit_exact_vertices", "sampling", 4000, margins)


def prop_sampler_determinism(seed):
    margins = []
    policy = np.array([0.5, 0.5, 0.7, 0.3])
    a = [sample_mset(policy, 2, RngStream(seed, 405, i)) for i in range(50)]
    b = [sample_mset(policy, 2, RngStream(seed, 405, i)) for i in range(50)]
    same = all(np.array_equal(x, y) for x, y in zip(a, b))
    margins.append(0.0 if same else -1.0)
    return _result("identical_seed_identical_draws", "sampling", 50, margins)


# ---------------------------------------------------------------------------
# adversaries
# ---------------------------------------------------------------------------

def prop_adversary_feasibility(seed):
    rng = RngStream(seed, 501)
    margins = []
    total = 0
    streams = []
    mset = MSet(12, 3)
    streams.append((mset, adv.MSetLbStream(12, 3, 2500, rng.substream(1))))
    streams.append((mset, adv.HedgeKillerStream(12, 3, 2500, 0.01)))
    streams.append((mset, adv.HedgeKillerStream(12, 3, 2500, 1.5)))
    streams.append((mset, adv.UniversalStream(mset, 2500, rng.substream(2))))
    mt = MultitaskSet([2, 4, 3])
    streams.append((mt, adv.MultitaskPhaseStream([2, 4, 3], 2500,
                                                 rng.substream(3))))
    dag, factory, _ = adv.dag_hard_instance(16, 32, 2500)
    streams.append((DagPathSet(dag), factory(rng.substream(4))))
    for dset, stream in streams:
        for t in range(1, stream.horizon + 1):
            report = dset.validate_loss(stream.loss(t))
            margins.append(1.0 + 1e-9 - report.value)
            total += 1
    return _result("every_emitted_loss_is_feasible", "adversaries",
                   total, margins)


def prop_adversary_zero_mean(seed):
    rng = RngStream(seed, 502)
    margins = []
    reps = 400
    horizon = 50
    mset = MSet(12, 3)
    dag, layered_factory, _ = adv.dag_hard_instance(16, 32, horizon)
    makers = [
        (1.0 / 3.0, lambda r: adv.MSetLbStream(12, 3, horizon, r)),
        (1.0, lambda r: adv.UniversalStream(mset, horizon, r)),
        (1.0, lambda r: adv.MultitaskPhaseStream([2, 3], horizon, r)),
        (1.0, layered_factory),
    ]
    for i, (entry_scale, make) in enumerate(makers):
        acc = None
        for r in range(reps):
            stream = make(rng.substream(i, r))
            total = sum(stream.loss(t) for t in range(1, horizon + 1))
            acc = total if acc is None else acc + total
        mean = acc / (reps * horizon)
        band = 4.0 * entry_scale / math.sqrt(reps * horizon)
        margins.extend((band - np.abs(mean)).tolist())
    return _result("randomized_streams_are_zero_mean", "adversaries",
                   4 * reps * horizon, margins)


def prop_khintchine_sandwich(seed):
    gen = RngStream(seed, 503).generator
    horizon, reps = 400, 100_000
    signs = gen.integers(0, 2, size=(reps, horizon)) * 2.0 - 1.0
    est = float(np.mean(np.abs(signs.sum(axis=1))))
    se = float(np.std(np.abs(signs.sum(axis=1)), ddof=1) / math.sqrt(reps))
    lo, hi = math.sqrt(horizon / 2.0), math.sqrt(horizon)
    margins = [est - (lo - 3 * se), (hi + 3 * se) - est]
    return _result("khintchine_sandwich", "adversaries", reps, margins,
                   detail=f"estimate {est:.3f} in [{lo:.3f}, {hi:.3f}]")


def prop_shattered_witnesses(seed):
    margins = []
    cases = [
        (hypercube_set(3), 3),
        (MSet(8, 3), 3),
        (MSet(40, 8), 8),
        (hypercube_set(2), 2),
    ]
    for dset, k in cases:
        sset = adv.find_shattered_set(dset, k)
        margins.append(0.0 if sset.verify() and sset.size == k else -1.0)
    return _result("shattered_witness_maps_check", "adversaries",
                   len(cases), margins)


# ---------------------------------------------------------------------------
# harness
# ---------------------------------------------------------------------------

def prop_harness_reproducibility(seed):
    cfg = ExperimentConfig("mset:8:2", ["hedge", "omd-mset"], "mset-lb",
                           horizon=60, trials=3, seed=seed, mode="sampled")
    a = csv_text(run_experiment(cfg))
    b = csv_text(run_experiment(cfg))
    return _result("identical_config_identical_csv", "harness", 2,
                   [0.0 if a == b else -1.0])


def prop_ledger_consistency(seed):
    cfg = ExperimentConfig("mset:8:2", ["hedge"], "universal",
                           horizon=80, trials=2, seed=seed)
    res = run_experiment(cfg)
    margins = []
    for trials in res.ledgers.values():
        for led in trials:
            gap = np.max(np.abs(led.regret - (led.cum_loss - led.cum_best)))
            margins.append(1e-12 - float(gap))
            gap2 = np.max(np.abs(np.cumsum(led.loss) - led.cum_loss))
            margins.append(1e-12 - float(gap2))
    return _result("regret_is_difference_of_cumulatives", "harness",
                   len(margins), margins)


PROPERTIES = [
    ("domain", prop_dual_norm_enumeration),
    ("domain", prop_primal_norm_bound),
    ("domain", prop_norm_duality),
    ("regularizers", prop_gradient_finite_diff),
    ("regularizers", prop_mset_strong_convexity),
    ("regularizers", prop_dilated_strong_convexity),
    ("regularizers", prop_entropy_equality),
    ("regularizers", prop_bregman_range),
    ("regularizers", prop_dilated_minimizer),
    ("learners", prop_dag_hedge_vs_explicit),
    ("learners", prop_multitask_factorization),
    ("learners", prop_omd_interiority_and_kkt),
    ("learners", prop_shift_losses),
    ("learners", prop_entropy_omd_matches_newton),
    ("sampling", prop_sampler_marginals),
    ("sampling", prop_sampler_exactness),
    ("sampling", prop_sampler_determinism),
    ("adversaries", prop_adversary_feasibility),
    ("adversaries", prop_adversary_zero_mean),
    ("adversaries", prop_khintchine_sandwich),
    ("adversaries", prop_shattered_witnesses),
    ("harness", prop_harness_reproducibility),
    ("harness", prop_ledger_consistency),
]


def run_property_suite(scope=None, seed=0):
    """Run the registered invariants (optionally only one module's scope);
    returns the list of :class:`PropertyResult`."""
    results = []
    for prop_scope, prop in PROPERTIES:
        if scope is not None and prop_scope != scope:
            continue
        try:
            res = prop(seed)
        except ComblabError as err:  # a property crashing is a failure, not an abort
            res = PropertyResult(prop.__name__, prop_scope, 0, float("-inf"),
                                 False, detail=f"raised {err!r}")
        results.append(res)
    return results
