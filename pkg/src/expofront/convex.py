"""Convex subproblems over the expohedron and the Birkhoff polytope.

The expohedron has one facet per item subset, far too many to list.  The
solvers here keep a pool of generated subset cuts and run a primal active-set
method: iterates always stay inside the polytope, and the ratio test along a
search direction is the exact exit step over *all* top-k constraints, so the
cut that blocks a step is produced on demand by the sorting separation oracle.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import QueryInstance, utility_of, unfairness_of
from .errors import SolverStalled, UtilityInfeasible
from .expohedron import (FEAS_TOL, descending_order, exit_step, max_utility_vertex,
                         prefix_gaps, scale_of, top_sums)

logger = logging.getLogger(__name__)


@dataclass
class CutSet:
    """Pool of generated majorization cuts ``sum(x[S]) <= G_hat[|S|]``."""

    cuts: list = field(default_factory=list)        # sorted index arrays
    bounds: list = field(default_factory=list)
    eq_rows: Optional[np.ndarray] = None
    eq_rhs: Optional[np.ndarray] = None
    _index: dict = field(default_factory=dict, repr=False)

    def add(self, S, bound) -> int:
        S = np.sort(np.asarray(S, dtype=int))
        key = S.tobytes()
        if key not in self._index:
            self._index[key] = len(self.cuts)
            self.cuts.append(S)
            self.bounds.append(float(bound))
        return self._index[key]

    def __len__(self):
        return len(self.cuts)


@dataclass
class QPResult:
    x: np.ndarray
    objective: float
    iterations: int
    cutset: CutSet
    working: list


def _independent_rows(A, tol=1e-10):
    """Indices of a maximal linearly independent subset of the rows of A."""
    keep = []
    basis = np.zeros((0, A.shape[1]))
    for i, row in enumerate(A):
        nrm = np.linalg.norm(row)
        if nrm == 0:
            continue
        r = row - basis.T @ (basis @ row) if len(basis) else row.copy()
        if np.linalg.norm(r) > tol * nrm:
            keep.append(i)
            basis = np.vstack([basis, r / np.linalg.norm(r)])
    return keep


class ExpohedronQP:
    """``min 0.5 x'Qx + c'x`` s.t. ``A_eq x = b_eq`` and ``x`` majorized by gamma.

    Q must be positive semidefinite.  ``x0`` must be feasible; it seeds the
    working set with its tight levels.
    """

    def __init__(self, Q, c, A_eq, b_eq, gamma, *, max_cuts=None, max_iter=None):
        self.Q = np.asarray(Q, dtype=float)
        self.c = np.asarray(c, dtype=float)
        self.gamma = np.asarray(gamma, dtype=float)
        self.n = self.gamma.size
        self.G_hat = top_sums(self.gamma)
        self.scale = scale_of(self.gamma)
        A_eq = np.atleast_2d(np.asarray(A_eq, dtype=float))
        b_eq = np.atleast_1d(np.asarray(b_eq, dtype=float))
        keep = _independent_rows(A_eq)
        self.A_eq, self.b_eq = A_eq[keep], b_eq[keep]
        self.max_cuts = 50 * self.n if max_cuts is None else max_cuts
        self.max_iter = 100 * self.n + 500 if max_iter is None else max_iter

    def objective(self, x) -> float:
        return float(0.5 * x @ self.Q @ x + self.c @ x)

    def _row(self, S):
        r = np.zeros(self.n)
        r[S] = 1.0
        return r

    def solve(self, x0) -> QPResult:
        n, scale = self.n, self.scale
        x = np.array(x0, dtype=float)
        eq_res = self.A_eq @ x - self.b_eq
        if np.max(np.abs(eq_res), initial=0.0) > 1e-8 * scale:
            raise ValueError(f"starting point violates equalities by {np.abs(eq_res).max():.3g}")
        pool = CutSet(eq_rows=self.A_eq, eq_rhs=self.b_eq)
        feas_tol = FEAS_TOL * scale

        # seed the working set with the tight chain at x0
        working, rows = [], list(self.A_eq)
        order, gaps = prefix_gaps(x, self.G_hat)
        for k in np.flatnonzero(np.abs(gaps[:-1]) <= 1e-10 * scale) + 1:
            row = self._row(order[:k])
            if len(_independent_rows(np.vstack(rows + [row]))) == len(rows) + 1:
                working.append(pool.add(order[:k], self.G_hat[k]))
                rows.append(row)

        bland = False
        stalls = 0
        for it in range(self.max_iter):
            A = np.vstack([self.A_eq] + [self._row(pool.cuts[j]) for j in working]) \
                if (len(self.A_eq) or working) else np.zeros((0, n))
            m = A.shape[0]
            g = self.Q @ x + self.c
            if m:
                Qf, R = np.linalg.qr(A.T, mode="complete")
            else:
                Qf, R = np.eye(n), np.zeros((n, 0))
            Z = Qf[:, m:]
            p, unbounded = self._eqp_step(Z, g)
            if np.linalg.norm(p) <= 1e-13 * scale:
                lam = -np.linalg.solve(R[:m, :m], Qf[:, :m].T @ g) if m else np.zeros(0)
                lam_w = lam[len(self.A_eq):]
                tol = 1e-10 * max(1.0, np.abs(g).max())
                neg = np.flatnonzero(lam_w < -tol)
                if neg.size == 0:
                    return QPResult(x, self.objective(x), it, pool, working)
                if bland:
                    drop = min(neg, key=lambda i: working[i])
                else:
                    drop = int(neg[np.argmin(lam_w[neg])])
                working.pop(drop)
                continue
            if unbounded:
                t, S = exit_step(x, p, self.G_hat, feas_tol)
            else:
                t, S = self._capped_exit(x, p, feas_tol)
            x = x + t * p
            if S is not None:
                if len(pool) >= self.max_cuts and S.tobytes() not in pool._index:
                    raise SolverStalled(f"cut budget {self.max_cuts} exhausted")
                working.append(pool.add(S, self.G_hat[len(S)]))
            # switch to the smallest-index rule while steps are degenerate
            if t * np.linalg.norm(p) <= 1e-14 * scale:
                stalls += 1
                bland = stalls > 3
            else:
                stalls, bland = 0, False
        raise SolverStalled(f"active-set iteration limit {self.max_iter} reached")

    def _capped_exit(self, x, p, feas_tol):
        """Exit step capped at the full Newton step ``t = 1``."""
        y = x + p
        order = descending_order(y)
        if np.max(np.cumsum(y[order])[:-1] - self.G_hat[1:self.n], initial=-np.inf) <= feas_tol:
            return 1.0, None
        return exit_step(x, p, self.G_hat, feas_tol, t_hi=1.0)

    def _eqp_step(self, Z, g):
        """Minimise the model over the null space of the active rows.

        If the reduced gradient has a component along a zero-curvature
        direction the model is unbounded there; step along it instead.
        """
        if Z.shape[1] == 0:
            return np.zeros(self.n), False
        z = Z.T @ g
        H = Z.T @ self.Q @ Z
        lam, U = np.linalg.eigh(0.5 * (H + H.T))
        big = max(1.0, float(np.abs(lam).max(initial=0.0)))
        pos = lam > 1e-10 * big
        Un = U[:, ~pos]
        zn = Un @ (Un.T @ z)
        if np.linalg.norm(zn) > 1e-12 * max(1.0, np.linalg.norm(g)):
            return -Z @ zn, True
        Up = U[:, pos]
        return -Z @ (Up @ ((Up.T @ z) / lam[pos])), False


def _fairness_qp(instance: QueryInstance, A_eq, b_eq, **kw) -> ExpohedronQP:
    G = instance.G
    return ExpohedronQP(2.0 * G.T @ G, -2.0 * G.T @ instance.target, A_eq, b_eq,
                        instance.gamma, **kw)


def start_point(instance: QueryInstance) -> np.ndarray:
    """Fairness-optimal exposure, with the highest utility among fairness optima.

    Stage one projects the targets onto the attainable group exposures
    (least squares over the expohedron); stage two maximises utility with the
    group exposures pinned to that projection.
    """
    gamma = instance.gamma
    n = instance.n
    center = np.full(n, gamma.sum() / n)
    stage1 = _fairness_qp(instance, np.ones((1, n)), [gamma.sum()]).solve(center)
    x1 = stage1.x
    G = instance.G
    lp = ExpohedronQP(np.zeros((n, n)), -instance.relevance, G, G @ x1, gamma)
    stage2 = lp.solve(x1)
    logger.debug("start point: F=%.3g U=%.6g (%d + %d iterations)",
                 unfairness_of(stage2.x, instance), utility_of(stage2.x, instance.relevance),
                 stage1.iterations, stage2.iterations)
    return stage2.x


def utility_range(instance: QueryInstance) -> tuple:
    """Smallest and largest utility over the expohedron."""
    rho, gamma = instance.relevance, instance.gamma
    return (utility_of(max_utility_vertex(-rho, gamma), rho),
            utility_of(max_utility_vertex(rho, gamma), rho))


def min_unfairness_at_utility(instance: QueryInstance, u: float,
                              start: Optional[np.ndarray] = None) -> np.ndarray:
    """Least unfair exposure among those with utility exactly ``u``.

    ``start`` is the fairness-optimal point (computed when omitted); it and a
    utility-extreme vertex bracket ``u``, which gives a feasible first iterate.
    """
    rho, gamma = instance.relevance, instance.gamma
    scale = instance.scale
    u_lo, u_hi = utility_range(instance)
    tol = 1e-9 * scale
    if u > u_hi + tol or u < u_lo - tol:
        raise UtilityInfeasible(f"utility {u!r} outside attainable [{u_lo!r}, {u_hi!r}]")
    u = min(max(u, u_lo), u_hi)
    if start is None:
        start = start_point(instance)
    u_s = utility_of(start, rho)
    far = max_utility_vertex(rho if u >= u_s else -rho, gamma)
    u_far = utility_of(far, rho)
    lam = 0.0 if abs(u_far - u_s) <= 1e-15 else (u - u_s) / (u_far - u_s)
    x0 = (1.0 - lam) * start + lam * far
    qp = _fairness_qp(instance, np.vstack([np.ones(instance.n), rho]), [gamma.sum(), u])
    return qp.solve(x0).x


# -- scalarized baseline on bistochastic matrices --------------------------------

@dataclass
class BirkhoffResult:
    B: np.ndarray
    converged: bool
    iterations: int
    objective: float

    @property
    def non_converged(self) -> bool:
        return not self.converged


def round_to_bistochastic(B) -> np.ndarray:
    """Nearby doubly stochastic matrix for a nonnegative, nearly doubly stochastic ``B``.

    Rows and then columns are scaled down to sum at most one, and the
    remaining row and column deficits are added back as a rank-one
    nonnegative term.  The change is of the order of the sum violations.
    """
    B = np.maximum(np.asarray(B, dtype=float), 0.0)
    B = B / np.maximum(B.sum(axis=1), 1.0)[:, None]
    B = B / np.maximum(B.sum(axis=0), 1.0)[None, :]
    dr = 1.0 - B.sum(axis=1)
    dc = 1.0 - B.sum(axis=0)
    mass = dr.sum()
    if mass > 0:
        B = B + np.outer(dr, dc) / mass
    return B


class BirkhoffQP:
    """Scalarized problem ``min -alpha U + (1 - alpha) F^2`` over n x n bistochastic matrices.

    Solved with a general-purpose interior-point solver on all n^2 entries,
    the usual way to get a fair ranking policy as a bistochastic matrix.  The
    problem is compiled once per instance; alpha is a parameter.  Solutions
    are rounded onto the doubly stochastic matrices so that they decompose
    exactly.
    """

    def __init__(self, instance: QueryInstance, budget: int = 200, tol: float = 1e-10):
        import cvxpy as cp

        self.instance = instance
        self.budget = budget
        self.tol = tol
        n = instance.n
        self._B = cp.Variable((n, n), nonneg=True)
        self._a = cp.Parameter(nonneg=True)
        self._b = cp.Parameter(nonneg=True)
        x = self._B @ instance.gamma
        obj = -self._a * (instance.relevance @ x) + self._b * cp.sum_squares(instance.G @ x - instance.target)
        self._problem = cp.Problem(cp.Minimize(obj), [cp.sum(self._B, axis=0) == 1,
                                                      cp.sum(self._B, axis=1) == 1])
        self._cp = cp

    def solve(self, alpha: float) -> BirkhoffResult:
        if not 0.0 <= alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")
        cp = self._cp
        self._a.value, self._b.value = alpha, 1.0 - alpha
        t = self.tol
        try:
            self._problem.solve(solver=cp.CLARABEL, max_iter=self.budget, tol_feas=t,
                                tol_gap_abs=t, tol_gap_rel=t)
        except cp.SolverError as exc:
            raise SolverStalled(f"interior-point solve failed: {exc}") from exc
        if self._B.value is None:
            raise SolverStalled(f"interior-point solve ended with status {self._problem.status}")
        B = round_to_bistochastic(self._B.value)
        converged = self._problem.status == cp.OPTIMAL
        stats = self._problem.solver_stats
        iters = int(stats.num_iters) if stats and stats.num_iters is not None else -1
        if not converged:
            logger.warning("Birkhoff QP stopped with status %s", self._problem.status)
        return BirkhoffResult(B, converged, iters, float(self._problem.value))


def scalarized_birkhoff_qp(instance: QueryInstance, alpha: float, budget: int = 200) -> BirkhoffResult:
    """One-off solve of the scalarized bistochastic QP; see :class:`BirkhoffQP`."""
    return BirkhoffQP(instance, budget).solve(alpha)
