"""Greedy feedback baseline: rank by relevance plus a bonus for under-exposed groups."""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import NamedTuple

import numpy as np

from .core import Permutation, QueryInstance
from .expohedron import max_utility_vertex


@dataclass
class CtrlState:
    """Running totals of a simulation; O(g) memory."""

    cumulative_group_exposure: np.ndarray
    deliveries_done: int = 0

    @classmethod
    def empty(cls, n_groups: int) -> "CtrlState":
        return cls(np.zeros(n_groups))


class CtrlResult(NamedTuple):
    deliveries: list
    trajectory: np.ndarray   # rows (step, nDCG so far, unfairness so far)
    final: tuple             # (nDCG, unfairness)
    state: CtrlState


@dataclass
class _Totals:
    utility: Fraction = Fraction(0)   # exact, so all-PRP runs give nDCG == 1
    rows: list = field(default_factory=list)


def ctrl_scores(instance: QueryInstance, state: CtrlState, lam: float) -> np.ndarray:
    """Relevance plus ``lam`` times the group's exposure deficit, spread over its items.

    A group's expected cumulative exposure after t deliveries is ``t * target``.
    """
    deficit = instance.target * state.deliveries_done - state.cumulative_group_exposure
    return instance.relevance + lam * (deficit / instance.group_sizes)[instance.groups]


def ctrl_simulate(instance: QueryInstance, lam: float, T: int,
                  keep_deliveries: bool = True) -> CtrlResult:
    """Deliver ``T`` rankings, each sorting items by their current score.

    Ties go to the lower item index.  The reported nDCG is the mean utility
    per delivery divided by the PRP utility; unfairness is the distance of
    the mean group exposure to the target.
    """
    if T < 1:
        raise ValueError("T must be at least 1")
    if lam < 0:
        raise ValueError("gain must be non-negative")
    gamma, rho = instance.gamma, instance.relevance
    u_prp = float(rho @ max_utility_vertex(rho, gamma))
    state = CtrlState.empty(instance.n_groups)
    G = instance.G
    deliveries = []
    totals = _Totals()
    for t in range(1, T + 1):
        order = np.argsort(-ctrl_scores(instance, state, lam), kind="stable")
        perm = Permutation(order)
        x = perm.exposure(gamma)
        state.cumulative_group_exposure = state.cumulative_group_exposure + G @ x
        state.deliveries_done = t
        totals.utility += Fraction(float(rho @ x))
        unfair = float(np.linalg.norm(state.cumulative_group_exposure / t - instance.target))
        totals.rows.append((t, float(totals.utility) / (t * u_prp), unfair))
        if keep_deliveries:
            deliveries.append(perm)
    traj = np.array(totals.rows)
    return CtrlResult(deliveries, traj, (float(traj[-1, 1]), float(traj[-1, 2])), state)
