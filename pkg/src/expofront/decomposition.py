"""From exposure points and bistochastic matrices to deliverable rankings."""
from __future__ import annotations

from typing import Optional

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import maximum_bipartite_matching

from .core import Permutation, RankingDistribution
from .errors import EmptyDistribution, MatchingNotFound, NotBistochastic, NotInPolytope
from .expohedron import (MEMBERSHIP_TOL, descending_order, majorization_check,
                         ray_boundary_intersection, scale_of, vertex_like)

SUPPORT_TOL = 1e-12


def caratheodory_decompose(x, gamma, tol: float = MEMBERSHIP_TOL) -> RankingDistribution:
    """Write ``x`` as a mixture of at most n rankings by peeling off vertices.

    At each step take the vertex v ordered like the current point, walk from
    the point away from v to the boundary, and split the point between v and
    the exit.  The exit keeps every tight level and gains at least one, so
    the loop ends at a vertex after at most n - 1 splits.
    """
    x = np.asarray(x, dtype=float)
    gamma = np.sort(np.asarray(gamma, dtype=float))[::-1]
    if majorization_check(x, gamma, tol).status == "outside":
        raise NotInPolytope("point is not an attainable exposure")
    atol = tol * scale_of(gamma)
    atoms = []
    mass = 1.0
    y = x
    for _ in range(x.size):
        v = vertex_like(y, gamma)
        rank = Permutation(descending_order(y))
        if np.linalg.norm(y - v) <= atol:
            atoms.append((mass, rank))
            break
        z = ray_boundary_intersection(y, y - v, gamma, tol).point
        # y = lam v + (1 - lam) z, refit against the snapped exit
        vz = v - z
        lam = float(np.clip((y - z) @ vz / (vz @ vz), 0.0, 1.0))
        atoms.append((mass * lam, rank))
        mass *= 1.0 - lam
        y = z
    else:
        atoms.append((mass, Permutation(descending_order(y))))
    merged = {}
    for w, p in atoms:
        merged[p] = merged.get(p, 0.0) + w
    return RankingDistribution.normalized(((w, p) for p, w in merged.items()),
                                          drop_below=SUPPORT_TOL)


def check_bistochastic(B, tol: float = 1e-9) -> np.ndarray:
    B = np.asarray(B, dtype=float)
    if B.ndim != 2 or B.shape[0] != B.shape[1]:
        raise NotBistochastic(f"expected a square matrix, got shape {B.shape}")
    if B.min() < -tol:
        raise NotBistochastic(f"negative entry {B.min():.3g}")
    worst = max(np.abs(B.sum(axis=0) - 1).max(), np.abs(B.sum(axis=1) - 1).max())
    if worst > tol:
        raise NotBistochastic(f"row/column sums off by {worst:.3g}")
    return B


def bvn_decompose(B, tol: float = 1e-9) -> list:
    """Birkhoff-von Neumann decomposition into ``(weight, Permutation)`` pairs.

    Greedy: find a perfect matching on the positive support of the residual,
    subtract its smallest entry along the matching, repeat.  Every step zeroes
    at least one entry.  Entries below 1e-12 are treated as zero; weights are
    renormalized to sum to one.
    """
    R = check_bistochastic(B, tol).copy()
    n = R.shape[0]
    R[R < SUPPORT_TOL] = 0.0
    rows = np.arange(n)
    atoms = []
    while True:
        remaining = R.sum() / n
        if remaining <= SUPPORT_TOL:
            break
        match = maximum_bipartite_matching(csr_matrix(R > SUPPORT_TOL), perm_type="column")
        if np.any(match < 0):
            if remaining <= tol:
                break
            raise MatchingNotFound(f"no perfect matching with {remaining:.3g} mass left")
        entries = R[rows, match]
        w = float(entries.min())
        atoms.append((w, Permutation.from_positions(match)))
        entries = entries - w
        entries[entries < SUPPORT_TOL] = 0.0
        R[rows, match] = entries
    if not atoms:
        raise NotBistochastic("matrix has no mass")
    total = sum(w for w, _ in atoms)
    return [(w / total, p) for w, p in atoms]


def expected_exposure(dist: RankingDistribution, gamma) -> np.ndarray:
    """Exposure vector averaged over the atoms of ``dist``."""
    if dist is None or len(dist) == 0:
        raise EmptyDistribution("empty distribution")
    gamma = np.asarray(gamma, dtype=float)
    return sum(w * p.exposure(gamma) for w, p in dist.atoms)


def sample_deliveries(dist: RankingDistribution, T: int, strategy: str = "low-discrepancy",
                      seed: Optional[int] = None, rng: Optional[np.random.Generator] = None) -> list:
    """Schedule ``T`` rankings from a distribution.

    ``low-discrepancy`` serves at each step the atom furthest behind its
    quota ``t * w``, first atom on ties, which keeps every count within one of
    its quota.  ``iid`` draws independently from a seeded generator.
    """
    if dist is None or len(dist) == 0:
        raise EmptyDistribution("empty distribution")
    if T < 0:
        raise ValueError("T must be non-negative")
    w = dist.weights
    if strategy == "iid":
        rng = np.random.default_rng(seed) if rng is None else rng
        picks = rng.choice(len(w), size=T, p=w / w.sum())
    elif strategy in ("low-discrepancy", "lowDiscrepancy"):
        counts = np.zeros(len(w))
        picks = np.empty(T, dtype=int)
        for t in range(1, T + 1):
            k = int(np.argmax(t * w - counts))
            counts[k] += 1
            picks[t - 1] = k
    else:
        raise ValueError(f"unknown delivery strategy {strategy!r}")
    perms = dist.rankings
    return [perms[k] for k in picks]


def empirical_exposure(deliveries, gamma) -> np.ndarray:
    gamma = np.asarray(gamma, dtype=float)
    if not deliveries:
        return np.zeros_like(gamma)
    return sum(p.exposure(gamma) for p in deliveries) / len(deliveries)
