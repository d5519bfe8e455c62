"""Geometry of the expohedron, the permutahedron spanned by a position-weight vector.

A point ``x`` is attainable as an expected exposure iff it is majorized by
``gamma``: every top-k partial sum of ``x`` is at most the sum of the k
largest weights, with equality at ``k = n``.  All tolerances given to this
module are multiplied by ``max(1, ||gamma||_1)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import (CenterProjection, DegenerateSphere, DimensionError, NotInPolytope,
                     NotOnSumHyperplane, OffHyperplaneDirection, ZeroDirection)

MEMBERSHIP_TOL = 1e-9
SNAP_TOL = 1e-9
FEAS_TOL = 1e-12


def scale_of(gamma) -> float:
    return max(1.0, float(np.abs(gamma).sum()))


def top_sums(gamma) -> np.ndarray:
    """``G[k]`` = sum of the k largest entries of gamma, for ``k = 0..n``."""
    g = np.sort(np.asarray(gamma, dtype=float))[::-1]
    return np.concatenate(([0.0], np.cumsum(g)))


def descending_order(x) -> np.ndarray:
    """Item indices by decreasing value; equal values keep index order."""
    return np.argsort(-np.asarray(x, dtype=float), kind="stable")


def prefix_gaps(x, G_hat) -> tuple:
    """Return ``(order, S_k - G_k)`` for ``k = 1..n`` along the descending order."""
    order = descending_order(x)
    return order, np.cumsum(np.asarray(x)[order]) - G_hat[1:]


def vertex_like(x, gamma) -> np.ndarray:
    """The vertex that orders gamma like ``x`` (ties broken by item index)."""
    v = np.empty(len(gamma))
    v[descending_order(x)] = np.sort(np.asarray(gamma, dtype=float))[::-1]
    return v


def max_utility_vertex(relevance, gamma) -> np.ndarray:
    """Exposure of the relevance-sorted ranking: largest weight to largest relevance."""
    relevance = np.asarray(relevance, dtype=float)
    if relevance.shape != np.shape(gamma):
        raise DimensionError("relevance and gamma differ in length")
    return vertex_like(relevance, gamma)


class Membership(NamedTuple):
    status: str           # "interior" | "boundary" | "outside"
    levels: tuple         # tight levels (boundary) or violated levels (outside), 1-based k


def majorization_check(x, gamma, tol: float = MEMBERSHIP_TOL) -> Membership:
    """Classify ``x`` against the expohedron of ``gamma``."""
    x = np.asarray(x, dtype=float)
    gamma = np.asarray(gamma, dtype=float)
    if x.shape != gamma.shape:
        raise DimensionError(f"x has shape {x.shape}, gamma {gamma.shape}")
    atol = tol * scale_of(gamma)
    G_hat = top_sums(gamma)
    _, gaps = prefix_gaps(x, G_hat)
    if abs(gaps[-1]) > atol:
        raise NotOnSumHyperplane(f"sum(x) - sum(gamma) = {gaps[-1]:.3g}")
    gaps = gaps[:-1]
    violated = np.flatnonzero(gaps > atol) + 1
    if violated.size:
        return Membership("outside", tuple(int(k) for k in violated))
    tight = np.flatnonzero(np.abs(gaps) <= atol) + 1
    if tight.size:
        return Membership("boundary", tuple(int(k) for k in tight))
    return Membership("interior", ())


def is_feasible(x, gamma, tol: float = MEMBERSHIP_TOL) -> bool:
    try:
        return majorization_check(x, gamma, tol).status != "outside"
    except NotOnSumHyperplane:
        return False


@dataclass(frozen=True)
class FaceDescriptor:
    """Ordered partition of the items describing a face of the expohedron.

    The union of the first j blocks is a tight top-set of size
    ``tight_levels[j-1]``.  One block means the whole polytope, n blocks a
    vertex.
    """

    blocks: tuple
    tight_levels: tuple

    @classmethod
    def from_blocks(cls, blocks) -> "FaceDescriptor":
        blocks = tuple(tuple(sorted(int(i) for i in b)) for b in blocks)
        levels = tuple(int(k) for k in np.cumsum([len(b) for b in blocks])[:-1])
        return cls(blocks, levels)

    @property
    def n(self) -> int:
        return sum(len(b) for b in self.blocks)

    @property
    def dim(self) -> int:
        return self.n - len(self.blocks)

    @property
    def is_vertex(self) -> bool:
        return len(self.blocks) == self.n

    def block_index(self) -> np.ndarray:
        """``idx[i]`` is the block containing item i."""
        idx = np.empty(self.n, dtype=int)
        for j, b in enumerate(self.blocks):
            idx[list(b)] = j
        return idx

    def project(self, v) -> np.ndarray:
        """Orthogonal projection onto the tangent space (zero sum on each block)."""
        v = np.asarray(v, dtype=float)
        idx = self.block_index()
        means = np.bincount(idx, weights=v) / np.bincount(idx)
        return v - means[idx]

    def tangent_basis(self) -> np.ndarray:
        """Orthonormal basis (columns) of the tangent space."""
        n = self.n
        cols = []
        for b in self.blocks:
            m = len(b)
            if m < 2:
                continue
            # Helmert-style orthonormal contrasts within the block
            for k in range(1, m):
                c = np.zeros(n)
                c[list(b[:k])] = 1.0
                c[b[k]] = -k
                cols.append(c / np.sqrt(k * (k + 1)))
        if not cols:
            return np.zeros((n, 0))
        return np.column_stack(cols)

    def merged(self, j: int) -> "FaceDescriptor":
        """The adjacent face obtained by dropping tight level j (merging blocks j, j+1)."""
        b = list(self.blocks)
        b[j:j + 2] = [b[j] + b[j + 1]]
        return FaceDescriptor.from_blocks(b)

    def level_sets(self) -> list:
        """Index arrays of the tight top-sets, smallest first."""
        out, acc = [], []
        for b in self.blocks[:-1]:
            acc = acc + list(b)
            out.append(np.array(acc, dtype=int))
        return out


def face_of(x, gamma, tol: float = MEMBERSHIP_TOL) -> FaceDescriptor:
    """Smallest face containing ``x`` (levels tight within ``tol``)."""
    x = np.asarray(x, dtype=float)
    status, levels = majorization_check(x, gamma, tol)
    if status == "outside":
        raise NotInPolytope(f"prefix constraints violated at levels {levels}")
    order = descending_order(x)
    cuts = [0, *levels, x.size]
    return FaceDescriptor.from_blocks(order[a:b] for a, b in zip(cuts[:-1], cuts[1:]))


def snap_to_levels(x, gamma, tol: float = SNAP_TOL) -> np.ndarray:
    """Make every nearly tight top-k constraint exactly tight.

    Shifts each block of the face by a constant, which is the orthogonal
    projection onto the affine hull of that face.
    """
    x = np.asarray(x, dtype=float)
    G_hat = top_sums(gamma)
    atol = tol * scale_of(gamma)
    order, gaps = prefix_gaps(x, G_hat)
    tight = [k for k in range(1, x.size) if abs(gaps[k - 1]) <= atol]
    cuts = [0, *tight, x.size]
    y = x.copy()
    for a, b in zip(cuts[:-1], cuts[1:]):
        block = order[a:b]
        want = G_hat[b] - G_hat[a]
        y[block] += (want - y[block].sum()) / (b - a)
    return y


def exit_step(x, d, G_hat, feas_tol: float, t_hi: float | None = None):
    """Largest ``t >= 0`` keeping ``x + t d`` majorized, plus the blocking top-set.

    The violation ``phi(t) = max_k (S_k(x + t d) - G_k)`` is convex and
    piecewise linear in t.  A doubling search brackets the exit, then Newton
    steps on the active piece walk down to its root from the right; each step
    lands exactly on a linear piece, so the result is exact up to rounding.
    Bisection takes over if Newton does not settle.
    """
    n = x.size

    def phi(t):
        y = x + t * d
        order = descending_order(y)
        v = np.cumsum(y[order])[:-1] - G_hat[1:n]
        k = int(np.argmax(v))
        return v[k], order[:k + 1]

    dn = float(np.linalg.norm(d))
    t_lo = 0.0
    if t_hi is None:
        t_hi = 1.0 / dn
    v_hi, S = phi(t_hi)
    while v_hi <= feas_tol:
        t_lo, t_hi = t_hi, 2.0 * t_hi
        v_hi, S = phi(t_hi)
    t = t_hi
    for _ in range(4 * n + 20):
        slope = d[S].sum()
        if slope <= 0:
            break
        t_new = max(t_lo, t - v_hi / slope)
        v_new, S_new = phi(t_new)
        if v_new <= feas_tol:
            return t_new, S
        t, v_hi, S = t_new, v_new, S_new
    lo, hi = t_lo, t
    while hi - lo > 1e-15 * max(1.0, hi):
        mid = 0.5 * (lo + hi)
        if phi(mid)[0] <= feas_tol:
            lo = mid
        else:
            hi = mid
    return lo, phi(hi)[1]


class RayHit(NamedTuple):
    step: float
    point: np.ndarray
    blocking: np.ndarray   # items of the top-set whose constraint stops the ray


def ray_boundary_intersection(x, d, gamma, tol: float = MEMBERSHIP_TOL) -> RayHit:
    """Walk from ``x`` along ``d`` to the boundary of the expohedron.

    Returns the exit step, the exit point snapped onto its tight levels, and
    the blocking top-set.
    """
    x = np.asarray(x, dtype=float)
    d = np.asarray(d, dtype=float)
    gamma = np.asarray(gamma, dtype=float)
    if x.shape != gamma.shape or d.shape != gamma.shape:
        raise DimensionError("x, d and gamma must have the same length")
    scale = scale_of(gamma)
    if np.linalg.norm(d) <= tol * scale:
        raise ZeroDirection("direction is (numerically) zero")
    if abs(d.sum()) > tol * scale:
        raise OffHyperplaneDirection(f"direction sums to {d.sum():.3g}, must be 0")
    if majorization_check(x, gamma, tol).status == "outside":
        raise NotInPolytope("ray must start inside the expohedron")
    d = d - d.mean()
    G_hat = top_sums(gamma)
    t, S = exit_step(x, d, G_hat, FEAS_TOL * scale)
    return RayHit(t, snap_to_levels(x + t * d, gamma), np.sort(S))


@dataclass(frozen=True)
class SphereFrame:
    """Circumscribed sphere of the expohedron within the sum hyperplane."""

    center: np.ndarray
    radius: float


def sphere_frame(gamma) -> SphereFrame:
    gamma = np.asarray(gamma, dtype=float)
    c = np.full(gamma.size, gamma.sum() / gamma.size)
    R = float(np.linalg.norm(gamma - c))
    if R <= MEMBERSHIP_TOL * scale_of(gamma):
        raise DegenerateSphere("constant gamma spans a single point")
    c.setflags(write=False)
    return SphereFrame(c, R)


def project_to_sphere(x, frame: SphereFrame, tol: float = MEMBERSHIP_TOL) -> np.ndarray:
    """Central projection of ``x`` onto the circumscribed sphere."""
    v = np.asarray(x, dtype=float) - frame.center
    r = np.linalg.norm(v)
    if r <= tol * max(1.0, frame.radius):
        raise CenterProjection("the center has no central projection")
    return frame.center + frame.radius * v / r


def project_sphere_to_boundary(p, frame: SphereFrame, gamma) -> np.ndarray:
    """Boundary point of the expohedron on the ray from the center through ``p``."""
    d = np.asarray(p, dtype=float) - frame.center
    if np.linalg.norm(d) <= MEMBERSHIP_TOL * max(1.0, frame.radius):
        raise CenterProjection("the center has no central projection")
    gamma = np.asarray(gamma, dtype=float)
    d = d - d.mean()
    c = np.asarray(frame.center, dtype=float)
    # every vertex is at distance R, so the exit lies within one radius
    t, _ = exit_step(c, d, top_sums(gamma), FEAS_TOL * scale_of(gamma),
                     t_hi=1.000001 * frame.radius / np.linalg.norm(d))
    return snap_to_levels(c + t * d, gamma)
