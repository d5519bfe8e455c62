"""
A feedback controller against the exact front
==============================================

The controller ranks by relevance plus a bonus for groups that are behind
their exposure target.  Each gain gives one (nDCG, unfairness) point after
T deliveries.  We place those points next to the exact front, normalized
the same way: utility over the PRP utility, unfairness over the PRP
unfairness.
"""
import numpy as np

from expofront import ctrl_simulate, pexpo_front, utility_at_unfairness
from expofront.harness import gen_synthetic

inst = gen_synthetic("Ds", 1, seed=3)[0]
print(f"query {inst.query_id}: {inst.n} items in {inst.n_groups} groups")

exact = pexpo_front(inst)
u_prp, f_prp = exact.utilities[-1], exact.unfairnesses[-1]
print(f"exact front: {len(exact)} break points, unfairness from "
      f"{exact.unfairnesses[0] / f_prp:.3f} to 1")

T = 500
for lam in (0.0, 0.5, 2.0, 10.0, 50.0):
    res = ctrl_simulate(inst, lam, T)
    ndcg, unfair = res.final
    # the best utility any distribution reaches at the same unfairness
    best = utility_at_unfairness(exact, max(unfair, exact.unfairnesses[0]), inst) / u_prp
    print(f"lambda={lam:5.1f}  nDCG={ndcg:.5f}  F/F_prp={unfair / f_prp:.4f}  "
          f"front at that unfairness {best:.5f}")

# the trajectory shows how quickly the running unfairness settles
res = ctrl_simulate(inst, 10.0, T)
for t in (1, 10, 100, T):
    step, ndcg, unfair = res.trajectory[t - 1]
    print(f"t={int(step):4d}  nDCG={ndcg:.4f}  unfairness={unfair:.5f}")
