import math

import numpy as np
import pytest

import comblab as cl
from comblab.instances import chain_dag, diamond_dag, parallel_dag
from comblab.sampling import RngStream, sample_explicit, sample_mset, sample_path


def test_rng_stream_determinism_and_independence():
    a = RngStream(42, 1).generator.uniform(size=5)
    b = RngStream(42, 1).generator.uniform(size=5)
    c = RngStream(42, 2).generator.uniform(size=5)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
    sub = RngStream(42, 1).substream(7)
    assert sub.key == (1, 7)


# ---------------------------------------------------------------------------
# path sampler
# ---------------------------------------------------------------------------

def test_sample_path_single_path():
    dag = chain_dag(3)
    x = sample_path(dag, np.ones(3), RngStream(0, 0))
    assert x.tolist() == [1.0, 1.0, 1.0]


def test_sample_path_diamond_symmetric():
    dag = diamond_dag()
    rng = RngStream(1, 0)
    n = 100_000
    acc = np.zeros(4)
    for _ in range(n):
        acc += sample_path(dag, np.full(4, 0.5), rng)
    emp = acc / n
    band = 3.0 * math.sqrt(0.25 / n)
    assert np.all(np.abs(emp - 0.5) <= band)


def test_sample_path_three_parallel_edges():
    dag = parallel_dag(3)
    flow = np.array([0.2, 0.3, 0.5])
    rng = RngStream(2, 0)
    n = 100_000
    acc = np.zeros(3)
    for _ in range(n):
        x = sample_path(dag, flow, rng)
        assert x.sum() == 1.0
        acc += x
    emp = acc / n
    band = 3.0 * np.sqrt(flow * (1 - flow) / n)
    assert np.all(np.abs(emp - flow) <= band)


def test_sample_path_degenerate_vertex():
    dag = diamond_dag()
    with pytest.raises(cl.DegenerateVertex):
        sample_path(dag, np.zeros(4), RngStream(0, 0))


def test_sample_path_always_valid():
    dag = diamond_dag()
    rng = RngStream(3, 0)
    flow = np.array([0.25, 0.75, 0.25, 0.75])
    for _ in range(500):
        x = sample_path(dag, flow, rng)
        ok, _ = cl.flow_check(dag, x)
        assert ok


# ---------------------------------------------------------------------------
# m-set sampler
# ---------------------------------------------------------------------------

def test_sample_mset_vertex_passthrough():
    x = np.array([1.0, 0.0, 1.0, 0.0])
    for i in range(20):
        assert np.array_equal(sample_mset(x, 2, RngStream(4, i)), x)


def test_sample_mset_uniform_marginals():
    rng = RngStream(5, 0)
    n = 100_000
    acc = np.zeros(4)
    for _ in range(n):
        x = sample_mset(np.full(4, 0.5), 2, rng)
        assert x.sum() == 2.0
        acc += x
    emp = acc / n
    band = 3.0 * math.sqrt(0.25 / n)
    assert np.all(np.abs(emp - 0.5) <= band)


def test_sample_mset_capped_coordinate():
    policy = np.array([1.0, 0.6, 0.4])
    rng = RngStream(6, 0)
    n = 100_000
    acc = np.zeros(3)
    for _ in range(n):
        x = sample_mset(policy, 2, rng)
        assert x[0] == 1.0 and x.sum() == 2.0
        acc += x
    emp = acc / n
    band = 3.0 * np.sqrt(policy * (1 - policy) / n) + 1e-12
    assert np.all(np.abs(emp - policy) <= band)


def test_sample_mset_rejects_bad_sum():
    with pytest.raises(cl.PreconditionError):
        sample_mset(np.array([0.5, 0.5, 0.5]), 2, RngStream(0, 0))
    with pytest.raises(cl.PreconditionError):
        sample_mset(np.array([1.5, 0.5]), 2, RngStream(0, 0))


# ---------------------------------------------------------------------------
# categorical sampler
# ---------------------------------------------------------------------------

def test_sample_explicit_point_mass():
    verts = np.array([[1.0, 0.0], [0.0, 1.0]])
    for i in range(10):
        x = sample_explicit(verts, np.array([0.0, 3.0]), RngStream(7, i))
        assert x.tolist() == [0.0, 1.0]


def test_sample_explicit_even_and_weighted():
    verts = np.array([[1.0, 0.0], [0.0, 1.0]])
    n = 100_000
    rng = RngStream(8, 0)
    acc = np.zeros(2)
    for _ in range(n):
        acc += sample_explicit(verts, np.array([1.0, 1.0]), rng)
    assert np.all(np.abs(acc / n - 0.5) <= 3.0 * math.sqrt(0.25 / n))
    rng = RngStream(8, 1)
    acc = np.zeros(2)
    w = np.array([1.0, math.e])
    for _ in range(n):
        acc += sample_explicit(verts, w, rng)
    target = w / w.sum()
    band = 3.0 * np.sqrt(target * (1 - target) / n)
    assert np.all(np.abs(acc / n - target) <= band)


def test_sample_explicit_rejects_degenerate_weights():
    verts = np.array([[1.0], [0.0]])
    with pytest.raises(cl.PreconditionError):
        sample_explicit(verts, np.zeros(2), RngStream(0, 0))
    with pytest.raises(cl.PreconditionError):
        sample_explicit(verts, np.array([1.0, -0.5]), RngStream(0, 0))


# ---------------------------------------------------------------------------
# learner samplers match their policies
# ---------------------------------------------------------------------------

def test_learner_samplers_are_expectation_matched():
    rng = RngStream(9, 0)
    n = 40_000
    dset = cl.MSet(5, 2)
    learner = cl.MSetOmd(dset, 0.3)
    learner.step(np.array([0.4, -0.2, 0.0, 0.1, -0.3]))
    policy = learner.propose()
    acc = np.zeros(5)
    for i in range(n):
        acc += learner.sample(rng)
    band = 4.0 * np.sqrt(policy * (1 - policy) / n)
    assert np.all(np.abs(acc / n - policy) <= band)


def test_mset_hedge_sampler_matches_marginals():
    rng = RngStream(10, 0)
    n = 40_000
    dset = cl.MSet(6, 2)
    learner = cl.MSetHedge(dset, 0.9)
    learner.step(np.array([0.5, -0.3, 0.2, 0.0, -0.1, 0.1]))
    policy = learner.propose()
    acc = np.zeros(6)
    for _ in range(n):
        x = learner.sample(rng)
        assert x.sum() == 2.0
        acc += x
    band = 4.0 * np.sqrt(policy * (1 - policy) / n)
    assert np.all(np.abs(acc / n - policy) <= band)
