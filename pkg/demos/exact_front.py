"""
Exact and approximate fronts for a three-item query
====================================================

Two items belong to group 0 and one to group 1.  Exposure follows DCG
position weights, and each group should receive exposure in proportion to
its size.  We walk the exact front, compare the sphere approximation at a
few refinement levels, and turn one front point into a delivery schedule.
"""
import numpy as np

from expofront import (QueryInstance, caratheodory_decompose, empirical_exposure,
                       expected_exposure, front_gap, hypervolume, pexpo_front,
                       sample_deliveries, sphere_expo_front, unfairness_of)

inst = QueryInstance.create([0.9, 0.6, 0.1], [0, 0, 1], query_id="toy3")
print("position weights", np.round(inst.gamma, 4))
print("group targets   ", np.round(inst.target, 4))

# the exact front starts at the least unfair exposure and ends at the PRP ranking
exact = pexpo_front(inst)
for p in exact.points:
    print(f"U={p.utility:.5f}  F={p.unfairness:.5f}  x={np.round(p.exposure, 4)}")

# each refinement round splits every arc once, so K rounds cost 2^K - 1 solves
u_ref, f_ref = exact.utilities.min(), exact.unfairnesses.max()
hv = hypervolume(exact, u_ref, f_ref, inst)
for K in range(4):
    approx = sphere_expo_front(inst, K=K)
    gap = front_gap(approx, exact, inst)
    print(f"K={K}: {len(approx)} points, hypervolume gap {gap.hypervolume_gap / hv:.2%}, "
          f"max utility gap {gap.max_utility_gap:.2e}")

# a point halfway along the front, as a distribution over rankings
x = 0.5 * (exact.exposures[0] + exact.exposures[-1])
dist = caratheodory_decompose(x, inst.gamma)
for w, perm in dist.atoms:
    print(f"weight {w:.4f}  ranking {perm.order}")
print("reconstruction error", np.abs(expected_exposure(dist, inst.gamma) - x).max())

# deliver 100 rankings; the schedule keeps each ranking within one of its quota
deliveries = sample_deliveries(dist, 100)
emp = empirical_exposure(deliveries, inst.gamma)
print("empirical exposure", np.round(emp, 4), "unfairness", round(unfairness_of(emp, inst), 5))
