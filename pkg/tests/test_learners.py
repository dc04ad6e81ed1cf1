import math

import numpy as np
import pytest

import comblab as cl
from comblab.instances import (chain_dag, diamond_dag, hypercube_set,
                               random_feasible_loss, random_layered_dag)
from comblab.proximal import mset_prox, mset_prox_numpy
from comblab.sampling import RngStream


# ---------------------------------------------------------------------------
# learning rates
# ---------------------------------------------------------------------------

def test_default_rate_examples():
    assert cl.default_learning_rate(cl.MSet(4, 2), 100) == pytest.approx(
        math.sqrt(math.log(6) / 100), abs=1e-12)
    dset = cl.DagPathSet(diamond_dag())
    assert cl.default_learning_rate(dset, 4) == pytest.approx(
        math.sqrt(math.log(2) / 4), abs=1e-12)
    with pytest.raises(cl.PreconditionError):
        cl.default_learning_rate(dset, 0)


def test_prescribed_rates():
    assert cl.mset_omd_rate(16, 4, 4096) == pytest.approx(
        math.sqrt(2 * (4 + math.log(4)) / (9 * 4096)))
    dset = cl.DagPathSet(diamond_dag())
    assert cl.dag_entropy_rate(dset, 100) == pytest.approx(
        math.sqrt(math.log(2) * math.log(4) / 100))


# ---------------------------------------------------------------------------
# Hedge
# ---------------------------------------------------------------------------

def test_hedge_first_round_uniform():
    for dset in (cl.MSet(6, 2), cl.MultitaskSet([2, 3]), hypercube_set(3),
                 cl.DagPathSet(diamond_dag())):
        learner = cl.make_hedge(dset, 0.5)
        policy = learner.propose()
        mat = np.asarray(dset.enumerate_vertices())
        assert np.allclose(policy, mat.mean(axis=0), atol=1e-12)


def test_hedge_two_experts_closed_form():
    learner = cl.ExplicitHedge(cl.ExplicitSet([[1, 0], [0, 1]]), 1.0)
    learner.step(np.array([1.0, 0.0]))
    p = learner.propose()
    assert p[0] == pytest.approx(math.exp(-1) / (1 + math.exp(-1)), abs=1e-12)


def test_dag_hedge_matches_explicit_on_diamond():
    dset = cl.DagPathSet(diamond_dag())
    fast, slow = cl.DagHedge(dset, 1.0), cl.ExplicitHedge(dset, 1.0)
    y = np.array([0.5, 0.0, 0.5, 0.0])  # top path penalised by 1 total
    fast.step(y)
    slow.step(y)
    assert fast.propose()[0] == pytest.approx(math.exp(-1) / (1 + math.exp(-1)),
                                              abs=1e-12)
    assert np.max(np.abs(fast.propose() - slow.propose())) <= 1e-12


def test_dag_hedge_matches_explicit_random():
    rng = RngStream(21, 0)
    for _ in range(6):
        dag = random_layered_dag(rng, max_edges=14, max_paths=50)
        dset = cl.DagPathSet(dag)
        fast, slow = cl.DagHedge(dset, 0.6), cl.ExplicitHedge(dset, 0.6)
        for _ in range(50):
            y = random_feasible_loss(dset, rng)
            assert np.max(np.abs(fast.step(y) - slow.step(y))) <= 1e-12


def test_mset_hedge_matches_explicit():
    rng = RngStream(22, 0)
    dset = cl.MSet(7, 3)
    fast, slow = cl.MSetHedge(dset, 0.8), cl.ExplicitHedge(dset, 0.8)
    for _ in range(60):
        y = random_feasible_loss(dset, rng)
        assert np.max(np.abs(fast.step(y) - slow.step(y))) <= 1e-12


def test_mset_hedge_no_overflow_at_large_eta_t():
    dset = cl.MSet(12, 3)
    learner = cl.MSetHedge(dset, 5.0)
    y = np.zeros(12)
    y[0] = 1.0
    for _ in range(500):
        learner.step(y)
    p = learner.propose()
    assert np.all(np.isfinite(p)) and p[0] <= 1e-10
    assert p.sum() == pytest.approx(3.0, abs=1e-9)


def test_multitask_hedge_factorizes():
    rng = RngStream(23, 0)
    dset = cl.MultitaskSet([2, 3, 2])
    block, flat = cl.MultitaskHedge(dset, 0.5), cl.ExplicitHedge(dset, 0.5)
    for _ in range(50):
        y = random_feasible_loss(dset, rng)
        assert np.max(np.abs(block.step(y) - flat.step(y))) <= 1e-12


def test_multitask_omd_equals_blockwise_hedge():
    # The closed-form multiplicative step on simplex blocks reproduces the
    # per-block exponential-weights distribution round for round.
    rng = RngStream(30, 0)
    dset = cl.MultitaskSet([2, 4, 3])
    omd = cl.MultitaskOmd(dset, 0.6)
    hedge = cl.MultitaskHedge(dset, 0.6)
    for _ in range(60):
        y = random_feasible_loss(dset, rng)
        assert np.max(np.abs(omd.step(y) - hedge.step(y))) <= 1e-12
        for sl in dset.block_slices:
            assert omd.iterate[sl].sum() == pytest.approx(1.0, abs=1e-12)


def test_hedge_rejects_infeasible_loss():
    learner = cl.make_hedge(cl.MSet(4, 2), 0.5)
    with pytest.raises(cl.ValidationError):
        learner.step(np.array([1.0, 1.0, 0.0, 0.0]))


# ---------------------------------------------------------------------------
# m-set mirror descent
# ---------------------------------------------------------------------------

def test_omd_zero_loss_is_identity():
    learner = cl.MSetOmd(cl.MSet(4, 2), 0.1)
    learner.step(np.zeros(4))
    assert np.allclose(learner.iterate, 0.5, atol=1e-15)


def test_omd_mset_example_step():
    learner = cl.MSetOmd(cl.MSet(4, 2), 0.1)
    learner.step(np.array([0.5, 0.0, 0.0, 0.0]))
    it = learner.iterate
    assert it[0] < 0.5
    assert it[1] == pytest.approx(it[2], abs=1e-14)
    assert it[2] == pytest.approx(it[3], abs=1e-14)
    assert it.sum() == pytest.approx(2.0, abs=1e-12)
    stat, card = learner.kkt_residual()
    assert stat <= 1e-9 and card <= 1e-12


def test_prox_newton_vs_bisection_vs_compiled():
    rng = RngStream(24, 0)
    gen = rng.generator
    dset = cl.MSet(10, 4)
    x = np.full(10, 0.4)
    lam = 0.0
    for _ in range(50):
        y = random_feasible_loss(dset, rng)
        step = 0.2 * y
        a, _ = mset_prox(x, step, 4)
        b, _ = mset_prox_numpy(x, step, 4, method="newton")
        c, _ = mset_prox_numpy(x, step, 4, method="bisect")
        assert np.max(np.abs(a - b)) <= 1e-11
        assert np.max(np.abs(b - c)) <= 1e-10
        x = a


def test_prox_handles_box_cap():
    # A steep pull toward one coordinate must clip at 1 and keep the sum.
    x = np.full(4, 0.5)
    step = np.array([-8.0, 0.0, 0.0, 0.0])
    out, lam = mset_prox(x, step, 2)
    assert out[0] == pytest.approx(1.0, abs=1e-12)
    assert out.sum() == pytest.approx(2.0, abs=1e-12)
    assert np.all(out > 0)


def test_omd_iterates_stay_interior_under_attack():
    rng = RngStream(25, 0)
    dset = cl.MSet(8, 2)
    learner = cl.MSetOmd(dset, 0.4)
    killer = cl.HedgeKillerStream(8, 2, 400, 0.4)
    for t in range(1, 401):
        learner.step(killer.loss(t))
        assert learner.iterate.min() > 0
        assert abs(learner.iterate.sum() - 2) <= 1e-9


# ---------------------------------------------------------------------------
# dilated-entropy mirror descent on DAGs
# ---------------------------------------------------------------------------

def test_dilated_fast_path_equals_hedge_on_diamond():
    dag = diamond_dag()
    dset = cl.DagPathSet(dag)
    omd = cl.DilatedOmd(dset, 1.0)
    hedge = cl.DagHedge(dset, 1.0)
    y = np.array([0.5, 0.0, 0.5, 0.0])
    for _ in range(5):
        assert np.max(np.abs(omd.step(y) - hedge.step(y))) == 0.0


def test_dilated_numeric_matches_fast_path():
    rng = RngStream(26, 0)
    dag = diamond_dag()
    dset = cl.DagPathSet(dag)
    numeric = cl.DilatedOmd(dset, 1.0, numeric=True)
    fast = cl.DilatedOmd(dset, 1.0)
    for _ in range(25):
        y = random_feasible_loss(dset, rng)
        gap = np.max(np.abs(numeric.step(y) - fast.step(y)))
        assert gap <= 1e-9


# ---------------------------------------------------------------------------
# shifted-loss entropy learner
# ---------------------------------------------------------------------------

def test_shift_losses_zero():
    shifted, alpha = cl.shift_losses(diamond_dag(), np.zeros(4))
    assert np.allclose(shifted, 0.0) and alpha == 0.0


def test_shift_losses_single_path_telescopes():
    dag = chain_dag(4)
    rng = RngStream(27, 0)
    y = rng.generator.uniform(-0.2, 0.2, size=4)
    shifted, alpha = cl.shift_losses(dag, y)
    assert np.max(np.abs(shifted)) <= 1e-12
    assert alpha == pytest.approx(-float(y.sum()), abs=1e-12)


def test_shift_losses_diamond_example():
    dag = diamond_dag()
    y = np.array([0.5, -0.5, 0.5, -0.5])  # top path weight 1, bottom -1
    shifted, alpha = cl.shift_losses(dag, y)
    assert shifted[1] == 0.0 and shifted[3] == 0.0
    assert shifted[0] + shifted[2] == pytest.approx(2.0)
    assert alpha == pytest.approx(1.0)
    for path in dag.enumerate_paths():
        assert path @ (shifted ** 2) <= 4.0 + 1e-9


def test_entropy_omd_zero_loss_fixed_point():
    dset = cl.DagPathSet(diamond_dag())
    learner = cl.EntropyDagOmd(dset, 1.0)
    before = learner.iterate.copy()
    learner.step(np.zeros(4))
    assert np.max(np.abs(learner.iterate - before)) <= 1e-9


def test_entropy_omd_single_path_pinned():
    dset = cl.DagPathSet(chain_dag(3))
    learner = cl.EntropyDagOmd(dset, 0.9)
    for t in range(5):
        learner.step(np.array([0.2, -0.1, 0.1]))
        assert np.allclose(learner.iterate, 1.0, atol=1e-9)


def test_entropy_omd_moves_away_from_loss():
    dag = diamond_dag()
    dset = cl.DagPathSet(dag)
    learner = cl.EntropyDagOmd(dset, 1.0)
    learner.step(np.array([0.5, 0.0, 0.5, 0.0]))
    assert learner.iterate[0] < 0.5 < learner.iterate[1]
    ok, res = cl.flow_check(dag, learner.iterate)
    assert res <= 1e-9


def test_entropy_omd_sinkhorn_vs_newton():
    rng = RngStream(28, 0)
    for _ in range(3):
        dag = random_layered_dag(rng, max_edges=12)
        dset = cl.DagPathSet(dag)
        fast = cl.EntropyDagOmd(dset, 0.8, solver="sinkhorn")
        oracle = cl.EntropyDagOmd(dset, 0.8, solver="newton")
        for _ in range(10):
            y = random_feasible_loss(dset, rng)
            gap = np.max(np.abs(fast.step(y) - oracle.step(y)))
            assert gap <= 1e-8


# ---------------------------------------------------------------------------
# best in hindsight
# ---------------------------------------------------------------------------

def test_every_dag_learner_iterate_is_a_flow():
    # Integration invariant: each learner's policy passes the flow check
    # at every round of a random feasible stream.
    rng = RngStream(29, 0)
    dag = random_layered_dag(rng, max_edges=12)
    dset = cl.DagPathSet(dag)
    learners = [cl.DagHedge(dset, 0.5), cl.DilatedOmd(dset, 0.5),
                cl.DilatedOmd(dset, 0.5, numeric=True),
                cl.EntropyDagOmd(dset, 0.5)]
    for _ in range(20):
        y = random_feasible_loss(dset, rng)
        for learner in learners:
            policy = learner.step(y)
            _, res = cl.flow_check(dag, policy)
            assert res <= 1e-9
            assert policy.min() > 0  # interiority


def test_best_in_hindsight_examples():
    v, val = cl.best_in_hindsight(cl.MSet(4, 2),
                                  [np.zeros(4), np.zeros(4)])
    assert v.tolist() == [1.0, 1.0, 0.0, 0.0] and val == 0.0
    losses = [np.array([1.5, 0.5, 1.0, 0.0]), np.array([1.5, 0.5, 1.0, 0.0])]
    v, val = cl.best_in_hindsight(cl.MSet(4, 2), losses)
    assert v.tolist() == [0.0, 1.0, 0.0, 1.0] and val == 1.0
    with pytest.raises(cl.PreconditionError):
        cl.best_in_hindsight(cl.MSet(4, 2), [])
