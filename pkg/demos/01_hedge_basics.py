"""Decision sets, feasible losses, and exact Hedge.

Walks through the package's core objects: building decision sets, checking
the unit action-loss bound, running Hedge in its exact representations, and
reading regret off the experiment ledger.
"""

import math

import numpy as np

import comblab as cl

# ---------------------------------------------------------------------------
# Decision sets and the dual norm
# ---------------------------------------------------------------------------

mset = cl.MSet(8, 3)            # all 8-bit vectors with exactly three ones
multi = cl.MultitaskSet([2, 3])  # one expert from each block
print(f"m-set count: {mset.count()},  multitask count: {multi.count()}")

# A loss vector is feasible when every action's loss lies in [-1, 1]:
y = np.array([0.3, -0.2, 0.1, 0.0, 0.0, -0.1, 0.2, 0.05])
print("dual norm of y:", mset.dual_norm(y))
print("feasible:", bool(mset.validate_loss(y)))

bad = np.ones(8)
rep = mset.validate_loss(bad)
print(f"all-ones rejected: value {rep.value}, witness {rep.witness}")

# ---------------------------------------------------------------------------
# Hedge on two experts: the textbook picture
# ---------------------------------------------------------------------------

experts = cl.ExplicitSet([[1, 0], [0, 1]])
horizon = 400
eta = cl.default_learning_rate(experts, horizon)
print(f"\ntwo experts, T={horizon}, eta={eta:.4f}")

cfg = cl.ExperimentConfig("explicit:<two-experts>", [f"hedge:eta={eta}"],
                          "constant:zero", horizon=horizon, trials=1, seed=0)
# swap in a fixed loss stream by hand: expert 1 always loses
learner = cl.ExplicitHedge(experts, eta)
loss = np.array([1.0, 0.0])
total = 0.0
for t in range(horizon):
    policy = learner.step(loss)
    total += float(policy @ loss)
regret = total - 0.0  # best expert never loses
print(f"measured regret {regret:.3f} vs classical bound "
      f"{math.log(2) / eta + eta * horizon / 2:.3f}")

# ---------------------------------------------------------------------------
# Hedge on an m-set without enumerating it
# ---------------------------------------------------------------------------

big = cl.MSet(64, 8)
print(f"\nm-set(64, 8) has {big.count():,} vertices -- Hedge still runs "
      f"exactly via the select/skip DAG:")
learner = cl.make_hedge(big, 0.05)
rng = cl.RngStream(7, 0)
for t in range(5):
    y = 0.9 * rng.generator.standard_normal(64)
    y /= max(1.0, big.dual_norm(y))
    policy = learner.step(y)
print("policy sums to m:", policy.sum())
print("a sampled action:", np.flatnonzero(learner.sample(rng)))

# ---------------------------------------------------------------------------
# The harness does the bookkeeping
# ---------------------------------------------------------------------------

cfg = cl.ExperimentConfig("mset:16:4", ["hedge", "omd-mset"], "mset-lb",
                          horizon=512, trials=20, seed=3)
res = cl.run_experiment(cfg)
print("\nblockwise adversary on m-set(16,4), 20 trials:")
print(res.summary_json())
