"""Utility/unfairness Pareto fronts on the expohedron.

Three ways to get a front:

* :func:`pexpo_front` walks the exact front face by face.  Within a face the
  unfairness level sets are concentric ellipsoids, so the optimal points form
  a ray; the walk follows rays and switches face at every break point.
* :func:`sphere_expo_front` approximates it with great-circle arcs on the
  circumscribed sphere, refined by bisection at exact "marked" points.
* :func:`qp_sweep_front` solves the fixed-utility problem on a utility grid.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np
from scipy import integrate, optimize

from .convex import BirkhoffQP, min_unfairness_at_utility, start_point
from .core import QueryInstance, group_exposure, unfairness_of, utility_of
from .errors import CenterProjection, DegenerateArc, EmptyFront, NonTermination
from .expohedron import (FaceDescriptor, SphereFrame, exit_step, face_of,
                         max_utility_vertex, project_sphere_to_boundary, project_to_sphere,
                         snap_to_levels, sphere_frame, top_sums)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ParetoPoint:
    exposure: np.ndarray
    utility: float
    unfairness: float
    param: Optional[float] = None     # alpha, grid index, ... of the producing method


def evaluate(instance: QueryInstance, x, param=None) -> ParetoPoint:
    x = np.asarray(x, dtype=float)
    return ParetoPoint(x, utility_of(x, instance.relevance), unfairness_of(x, instance), param)


@dataclass
class ParetoFront:
    """Non-dominated points ordered by increasing unfairness.

    ``exact`` marks fronts whose consecutive exposures are joined by
    Pareto-optimal segments (the facet walk); hypervolume then integrates
    along those segments instead of the chords between points.
    """

    points: list
    method: str = ""
    exact: bool = False
    marked: list = field(default_factory=list)
    info: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.points)

    @property
    def utilities(self) -> np.ndarray:
        return np.array([p.utility for p in self.points])

    @property
    def unfairnesses(self) -> np.ndarray:
        return np.array([p.unfairness for p in self.points])

    @property
    def exposures(self) -> np.ndarray:
        return np.array([p.exposure for p in self.points])


def non_dominated(points, tol: float = 1e-12) -> list:
    """Sort by unfairness and keep points that strictly improve utility."""
    pts = sorted(points, key=lambda p: (p.unfairness, -p.utility))
    out = []
    for p in pts:
        if out and p.utility <= out[-1].utility + tol:
            continue
        if out and p.unfairness <= out[-1].unfairness + tol:
            out[-1] = p if p.utility > out[-1].utility else out[-1]
            continue
        out.append(p)
    return out


# -- exact front: walking faces ---------------------------------------------------

class Direction(NamedTuple):
    d: np.ndarray
    slope: float


def optimal_direction_on_face(instance: QueryInstance, x, face: FaceDescriptor,
                              tol: float = 1e-10) -> Optional[Direction]:
    """Best utility-per-unfairness direction from ``x`` inside ``face``.

    If utility can grow along a direction that leaves every group exposure
    unchanged, that direction wins outright (slope inf).  Otherwise the
    direction is ``M^+ rho_V``, where the utility hyperplanes touch the
    concentric unfairness ellipsoids of the face.  The slope is ``dU/dF`` at
    ``x``, or ``rho.d / |G d|`` when ``x`` is perfectly fair.  Returns None at
    a vertex, when utility cannot grow, or when unfairness would drop.
    """
    x = np.asarray(x, dtype=float)
    B = face.tangent_basis()
    if B.shape[1] == 0:
        return None
    G = instance.G
    rho = instance.relevance
    GB = G @ B
    rz = B.T @ rho
    _, s, Vt = np.linalg.svd(GB, full_matrices=True)
    r = int(np.sum(s > 1e-10 * max(1.0, s[0] if s.size else 0.0)))
    N = Vt[r:].T
    free = N @ (N.T @ rz)
    if np.linalg.norm(free) > tol * max(1.0, np.linalg.norm(rho)):
        d = B @ free
        return Direction(d / np.linalg.norm(d), np.inf)
    Vr = Vt[:r].T
    d = B @ (Vr @ ((Vr.T @ rz) / s[:r] ** 2))
    nd = np.linalg.norm(d)
    if nd <= tol:
        return None
    d /= nd
    gain = float(rho @ d)
    if gain <= tol:
        return None
    Gd = G @ d
    res = group_exposure(x, instance) - instance.target
    nr = np.linalg.norm(res)
    if nr <= tol * instance.scale:
        return Direction(d, gain / np.linalg.norm(Gd))
    dF = float(res @ Gd)
    if dF < -1e-9 * nr * np.linalg.norm(Gd):
        return None
    return Direction(d, gain * nr / dF if dF > 0 else np.inf)


def _cone_qp(H, E, e, C, z, tol=1e-10, max_iter=500):
    """Primal active set for ``min 1/2 z'Hz`` s.t. ``Ez = e``, ``Cz <= 0``, from feasible z.

    H is PSD; the reduced model is solved with a pseudo-inverse, which is
    exact because the gradient ``Hz`` always lies in the range of H.
    """
    work = [i for i in range(C.shape[0]) if C[i] @ z >= -tol * max(1.0, np.abs(C[i]).sum())]
    for _ in range(max_iter):
        A = np.vstack([E, C[work]]) if work else E
        _, s, Vt = np.linalg.svd(A)
        rank = int(np.sum(s > 1e-12 * max(1.0, s[0])))
        Z = Vt[rank:].T
        g = H @ z
        if Z.shape[1]:
            p = -Z @ (np.linalg.pinv(Z.T @ H @ Z, rcond=1e-12) @ (Z.T @ g))
        else:
            p = np.zeros_like(z)
        if np.linalg.norm(p) <= tol * max(1.0, np.linalg.norm(z)):
            mult = np.linalg.lstsq(A.T, -g, rcond=None)[0][E.shape[0]:]
            if not work or mult.min() >= -tol * max(1.0, np.abs(mult).max()):
                return z
            work.pop(int(np.argmin(mult)))
            continue
        Cp = C @ p
        alpha, block = 1.0, None
        for i in np.flatnonzero(Cp > tol * np.linalg.norm(p)):
            if i in work:
                continue
            a = max(-(C[i] @ z), 0.0) / Cp[i]
            if a < alpha:
                alpha, block = a, int(i)
        z = z + alpha * p
        if block is not None:
            work.append(block)
    return z


def _level_rows(face: FaceDescriptor) -> np.ndarray:
    n = face.n
    rows = np.zeros((len(face.blocks) - 1, n))
    for j, S in enumerate(face.level_sets()):
        rows[j, S] = 1.0
    return rows


def pareto_direction(instance: QueryInstance, x, face: FaceDescriptor):
    """Direction of the exact front leaving the Pareto point ``x``.

    Among directions that keep every tight level feasible and raise utility
    by one unit, first minimize the first-order growth of squared unfairness
    (a linear program), then the curvature ``|G d|^2`` on the optimal set.
    Returns ``(d, face)``: the unit direction and the face it moves in, or
    None when utility cannot grow.
    """
    x = np.asarray(x, dtype=float)
    n = instance.n
    G, rho = instance.G, instance.relevance
    g = G.T @ (G @ x - instance.target)
    C = _level_rows(face)
    E = np.vstack([np.ones(n), rho])
    e = np.array([0.0, 1.0])
    lp = optimize.linprog(g, A_ub=C if C.size else None, b_ub=np.zeros(len(C)) if C.size else None,
                          A_eq=E, b_eq=e, bounds=[(None, None)] * n, method="highs")
    if lp.status != 0:
        return None
    z = lp.x
    if np.linalg.norm(g) > 1e-12 * instance.scale:
        E = np.vstack([E, g])
        e = np.append(e, g @ z)
    z = _cone_qp(G.T @ G, E, e, C, z)
    tight = np.abs(C @ z) <= 1e-9 * max(1.0, np.linalg.norm(z))
    blocks, cur = [], []
    for j, b in enumerate(face.blocks):
        cur += list(b)
        if j == len(face.blocks) - 1 or tight[j]:
            blocks.append(cur)
            cur = []
    sub = FaceDescriptor.from_blocks(blocks)
    dirn = optimal_direction_on_face(instance, x, sub)
    G_hat = top_sums(instance.gamma)
    if dirn is not None and exit_step(x, dirn.d, G_hat, 1e-12 * instance.scale)[0] > 1e-12:
        return dirn.d, sub
    nz = np.linalg.norm(z)
    if rho @ z <= 0 or nz == 0:
        return None
    return z / nz, sub


def release_step(instance: QueryInstance, x, d, face: FaceDescriptor) -> float:
    """Distance along ``d`` until a tight level of ``face`` stops paying off.

    The KKT multipliers of the tight levels are affine along a ray inside the
    face; the first one to reach zero marks a break point where the front
    leaves the face without touching a new constraint.
    """
    C = _level_rows(face)
    if not C.size:
        return np.inf
    G, rho = instance.G, instance.relevance
    A = np.column_stack([rho, -C.T, -np.ones(instance.n)])
    g0 = G.T @ (G @ x - instance.target)
    g1 = G.T @ (G @ d)
    lam0 = np.linalg.lstsq(A, g0, rcond=None)[0][1:-1]
    lam1 = np.linalg.lstsq(A, g1, rcond=None)[0][1:-1]
    t = np.inf
    for l0, l1 in zip(lam0, lam1):
        if l1 < -1e-12 and l0 > 1e-12 * max(1.0, abs(l1)):
            t = min(t, l0 / -l1)
    return t


def pexpo_front(instance: QueryInstance, tol: float = 1e-9) -> ParetoFront:
    """Exact front by walking across faces from the fairness optimum to the PRP vertex.

    Each segment follows the optimal ray of one face and ends at a break
    point: either the ray reaches a new tight level, or a tight level's
    multiplier vanishes and the front moves into a larger face.
    """
    gamma, rho = instance.gamma, instance.relevance
    scale = instance.scale
    G_hat = top_sums(gamma)
    prp = max_utility_vertex(rho, gamma)
    u_max = utility_of(prp, rho)
    x = start_point(instance)
    path = [x]
    visited = []
    guard = 4 * instance.n ** 2
    for _ in range(guard):
        if utility_of(x, rho) >= u_max - tol:
            break
        face = face_of(x, gamma, tol)
        found = pareto_direction(instance, x, face)
        if found is None:
            logger.debug("facet walk stopped early at U=%.6g", utility_of(x, rho))
            break
        d, sub = found
        visited.append(sub)
        t, _ = exit_step(x, d, G_hat, 1e-12 * scale)
        t = min(t, release_step(instance, x, d, sub))
        x = snap_to_levels(x + t * d, gamma, tol)
        path.append(x)
    else:
        raise NonTermination(f"facet walk exceeded {guard} steps", visited)
    if np.linalg.norm(path[-1] - prp) <= 1e-8 * scale:
        path[-1] = prp
    pts = [evaluate(instance, p) for p in path]
    return ParetoFront(non_dominated(pts), method="pexpo", exact=True,
                       info={"breakPoints": len(pts), "faces": len(visited)})


# -- approximate front: geodesics on the circumscribed sphere --------------------

class GeodesicArc:
    """Great-circle arc between two points of the circumscribed sphere."""

    def __init__(self, p, q, frame: SphereFrame, tol: float = 1e-12):
        self.frame = frame
        c, R = frame.center, frame.radius
        self.u = (np.asarray(p, dtype=float) - c) / R
        self.w = (np.asarray(q, dtype=float) - c) / R
        cos = float(np.clip(self.u @ self.w, -1.0, 1.0))
        if 1.0 - cos <= tol:
            raise DegenerateArc("arc endpoints coincide")
        if 1.0 + cos <= tol:
            raise DegenerateArc("arc endpoints are antipodal")
        self.omega = float(np.arccos(cos))

    def sample(self, t: float) -> np.ndarray:
        o = self.omega
        v = (np.sin((1 - t) * o) * self.u + np.sin(t * o) * self.w) / np.sin(o)
        return self.frame.center + self.frame.radius * v

    def midpoint(self) -> np.ndarray:
        return self.sample(0.5)


def _sphere_point(x, toward, frame):
    try:
        return project_to_sphere(x, frame)
    except CenterProjection:
        return project_to_sphere(x + 1e-6 * (toward - x), frame)


def sphere_expo_front(instance: QueryInstance, K: int = 3, n_sample: int = 5,
                      start: Optional[np.ndarray] = None) -> ParetoFront:
    """Approximate front from geodesic arcs split at exact marked points.

    Each of the K rounds splits every arc once: the geodesic midpoint is
    projected onto the polytope, its utility fixes a level, and the least
    unfair point at that level becomes a marked point.  K rounds give
    ``2**K - 1`` marked points.  Each final arc contributes ``n_sample``
    points (its exact endpoints plus interior samples projected onto the
    polytope).
    """
    if K < 0 or n_sample < 2:
        raise ValueError("need K >= 0 and n_sample >= 2")
    gamma, rho = instance.gamma, instance.relevance
    xs = start_point(instance) if start is None else np.asarray(start, dtype=float)
    xe = max_utility_vertex(rho, gamma)
    info = {"K": K, "nSample": n_sample, "startSolves": 1, "markedSolves": 0}
    if instance.n == 2:
        front = pexpo_front(instance)
        front.method = "sphere-expo"
        front.marked = list(front.points)
        front.info.update(info)
        return front
    frame = sphere_frame(gamma)
    if np.linalg.norm(xs - xe) <= 1e-9 * instance.scale:
        p = evaluate(instance, xs)
        return ParetoFront([p], "sphere-expo", marked=[p], info=info)

    arcs = [(xs, xe)]
    for _ in range(K):
        nxt = []
        for a, b in arcs:
            try:
                arc = GeodesicArc(_sphere_point(a, b, frame), _sphere_point(b, a, frame), frame)
            except DegenerateArc:
                nxt.append((a, b))
                continue
            mid = project_sphere_to_boundary(arc.midpoint(), frame, gamma)
            u_a, u_b, u_mid = rho @ a, rho @ b, rho @ mid
            if not u_a < u_mid < u_b:
                u_mid = 0.5 * (u_a + u_b)
            xm = min_unfairness_at_utility(instance, u_mid, start=xs)
            info["markedSolves"] += 1
            nxt += [(a, xm), (xm, b)]
        arcs = nxt

    samples = []
    marked = [xs]
    ts = np.linspace(0.0, 1.0, n_sample)[1:-1]
    for a, b in arcs:
        samples.append(a)
        marked.append(b)
        try:
            arc = GeodesicArc(_sphere_point(a, b, frame), _sphere_point(b, a, frame), frame)
        except DegenerateArc:
            continue
        samples += [project_sphere_to_boundary(arc.sample(t), frame, gamma) for t in ts]
    samples.append(xe)
    pts = non_dominated([evaluate(instance, s) for s in samples])
    return ParetoFront(pts, "sphere-expo", marked=[evaluate(instance, m) for m in marked],
                       info=info)


# -- oracle front: fixed-utility sweep ---------------------------------------------

def qp_sweep_front(instance: QueryInstance, n_points: int = 20,
                   start: Optional[np.ndarray] = None) -> ParetoFront:
    """Solve the least-unfair problem on an even utility grid from the fairness
    optimum up to the PRP utility."""
    if n_points < 2:
        raise ValueError("need at least two grid points")
    rho, gamma = instance.relevance, instance.gamma
    xs = start_point(instance) if start is None else np.asarray(start, dtype=float)
    xe = max_utility_vertex(rho, gamma)
    grid = np.linspace(rho @ xs, rho @ xe, n_points)
    xs_list = [xs]
    for u in grid[1:-1]:
        xs_list.append(min_unfairness_at_utility(instance, u, start=xs))
    xs_list.append(xe)
    pts = non_dominated([evaluate(instance, x, i) for i, x in enumerate(xs_list)])
    return ParetoFront(pts, "qp-sweep", info={"nPoints": n_points})


def birkhoff_qp_front(instance: QueryInstance, alphas, budget: int = 200):
    """Front of the scalarized bistochastic QP over a grid of trade-off weights.

    Returns the front and the solver results (one per alpha, in grid order),
    whose matrices feed a Birkhoff-von Neumann decomposition.
    """
    alphas = [float(a) for a in alphas]
    if not alphas:
        raise ValueError("empty alpha grid")
    qp = BirkhoffQP(instance, budget)
    results = [qp.solve(a) for a in alphas]
    pts = [evaluate(instance, r.B @ instance.gamma, a) for a, r in zip(alphas, results)]
    front = ParetoFront(non_dominated(pts), "birkhoff-qp",
                        info={"alphas": alphas,
                              "nonConverged": sum(r.non_converged for r in results)})
    return front, results


# -- comparing fronts ----------------------------------------------------------------

def _segment_profile(instance_like, a: ParetoPoint, b: ParetoPoint):
    """Coefficients of ``F(s)^2 = A s^2 + 2 B s + C`` along the exposure segment a->b."""
    G, eps = instance_like
    r0 = G @ a.exposure - eps
    gd = G @ (b.exposure - a.exposure)
    return float(gd @ gd), float(r0 @ gd), float(r0 @ r0)


def _envelope(F, U):
    """Upper concave envelope of points (F, U), sorted by F."""
    hull = []
    for f, u in sorted(zip(F, U)):
        while len(hull) >= 2:
            (f1, u1), (f2, u2) = hull[-2], hull[-1]
            if (u2 - u1) * (f - f1) <= (u - u1) * (f2 - f1):
                hull.pop()
            else:
                break
        if hull and f - hull[-1][0] <= 1e-15:
            if u > hull[-1][1]:
                hull[-1] = (f, u)
            continue
        hull.append((f, u))
    # only the rising part matters for domination
    best = []
    for f, u in hull:
        if not best or u > best[-1][1]:
            best.append((f, u))
    return np.array(best)


class FrontCurve:
    """Best utility reachable at unfairness at most F, as a function of F.

    Exact fronts are evaluated along their exposure segments; others through
    the concave envelope of their points, which mixtures of the points attain.
    """

    def __init__(self, front: ParetoFront, instance: Optional[QueryInstance] = None):
        if not front.points:
            raise EmptyFront("front has no points")
        self.front = front
        self.exact = front.exact and instance is not None and len(front) > 1
        if self.exact:
            self._ge = (instance.G, instance.target)
        env = _envelope(front.unfairnesses, front.utilities)
        self.F, self.U = env[:, 0], env[:, 1]
        if self.exact:
            self.F = front.unfairnesses
            self.U = front.utilities

    @property
    def f_min(self):
        return float(self.F[0])

    @property
    def f_max(self):
        return float(self.F[-1])

    def __call__(self, f: float) -> float:
        F, U = self.F, self.U
        if f <= F[0]:
            return float(U[0])
        if f >= F[-1]:
            return float(U[-1])
        j = int(np.searchsorted(F, f, side="right")) - 1
        if not self.exact:
            lam = (f - F[j]) / (F[j + 1] - F[j])
            return float(U[j] + lam * (U[j + 1] - U[j]))
        a, b = self.front.points[j], self.front.points[j + 1]
        A, B, C = _segment_profile(self._ge, a, b)
        # root of A s^2 + 2 B s + C - f^2 on [0, 1]
        disc = max(B * B - A * (C - f * f), 0.0)
        s = (-B + np.sqrt(disc)) / A if A > 0 else 0.0
        s = min(max(s, 0.0), 1.0)
        return float(a.utility + s * (b.utility - a.utility))

    def area(self, u_ref: float, f_ref: float) -> float:
        """Area between the curve and the reference point (utility up, unfairness down)."""
        F, U = self.F, self.U
        total = 0.0
        for j in range(len(F) - 1):
            if self.exact:
                a, b = self.front.points[j], self.front.points[j + 1]
                A, B, C = _segment_profile(self._ge, a, b)
                mean_f = integrate.quad(lambda s: np.sqrt(max(A * s * s + 2 * B * s + C, 0.0)),
                                        0.0, 1.0, epsabs=1e-14, epsrel=1e-13, limit=200)[0]
                # integral of (U - u_ref) dF, integrated by parts
                du = U[j + 1] - U[j]
                total += (U[j + 1] - u_ref) * F[j + 1] - (U[j] - u_ref) * F[j] - du * mean_f
            else:
                total += 0.5 * (U[j] + U[j + 1] - 2 * u_ref) * (F[j + 1] - F[j])
        total += (U[-1] - u_ref) * max(f_ref - F[-1], 0.0)
        return float(total)


class FrontGap(NamedTuple):
    hypervolume_gap: float
    max_utility_gap: float


def front_gap(approx: ParetoFront, exact: ParetoFront,
              instance: Optional[QueryInstance] = None) -> FrontGap:
    """Hypervolume and worst utility shortfall of ``approx`` against ``exact``.

    The reference point is (lowest utility, highest unfairness) over both
    fronts.  Pass ``instance`` to integrate exact fronts along their segments.
    """
    if not approx.points or not exact.points:
        raise EmptyFront("both fronts need points")
    ca, ce = FrontCurve(approx, instance), FrontCurve(exact, instance)
    u_ref = min(approx.utilities.min(), exact.utilities.min())
    f_ref = max(approx.unfairnesses.max(), exact.unfairnesses.max())
    hv_gap = abs(ce.area(u_ref, f_ref) - ca.area(u_ref, f_ref))
    gaps = [ce(f) - ca(f) for f in approx.unfairnesses]
    return FrontGap(float(hv_gap), float(max(gaps)))


def hypervolume(front: ParetoFront, u_ref: float, f_ref: float,
                instance: Optional[QueryInstance] = None) -> float:
    return FrontCurve(front, instance).area(u_ref, f_ref)


def utility_at_unfairness(front: ParetoFront, f: float,
                          instance: Optional[QueryInstance] = None) -> float:
    return FrontCurve(front, instance)(f)
