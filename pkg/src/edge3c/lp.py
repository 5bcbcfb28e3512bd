"""Bounded-variable primal simplex.

Solves ``min c@x  s.t.  row_lo <= A@x <= row_hi,  lb <= x <= ub`` and always
returns a basic (vertex) solution.  Row activities are carried as slack
variables ``s = A@x`` so that bounds on rows and columns are treated alike;
no conversion to standard form takes place.

Two engines sit behind :func:`simplex_solve`:

``"bounded"``
    the revised simplex implemented here, with an explicit dense basis
    inverse updated in product form and refactorised periodically.
``"highs"``
    the dual simplex of HiGHS (through :func:`scipy.optimize.linprog`),
    used for instances too large for the dense basis inverse.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, replace

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

logger = logging.getLogger(__name__)

FEAS_TOL = 1e-7
OPT_TOL = 1e-9
PIVOT_TOL = 1e-9

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"


class IterationLimit(RuntimeError):
    """Raised when the pivot cap is hit (usually a sign of cycling)."""


@dataclass(frozen=True)
class LpInstance:
    c: np.ndarray
    A: sp.csr_matrix
    row_lo: np.ndarray
    row_hi: np.ndarray
    lb: np.ndarray
    ub: np.ndarray

    @property
    def n(self) -> int:
        return len(self.c)

    @property
    def m(self) -> int:
        return self.A.shape[0]

    def with_bounds(self, lb=None, ub=None) -> "LpInstance":
        return replace(self, lb=self.lb if lb is None else lb, ub=self.ub if ub is None else ub)


@dataclass(frozen=True)
class LpSolution:
    """Result of a solve.

    ``basis`` lists the basic variables of the final tableau in the extended
    numbering (structural ``0..n-1``, then one slack per row); it is ``None``
    for the HiGHS engine, which does not report it through scipy.
    """

    status: str
    x: np.ndarray | None
    objective: float
    basis: tuple[int, ...] | None = None
    iterations: int = 0
    engine: str = "bounded"

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL


def as_lp(inst) -> LpInstance:
    """View anything with ``c, A, row_lo, row_hi, lb, ub`` as an :class:`LpInstance`."""
    if isinstance(inst, LpInstance):
        return inst
    return LpInstance(inst.c, inst.A, inst.row_lo, inst.row_hi, inst.lb, inst.ub)


# ---------------------------------------------------------------------------


class _Tableau:
    """State of the revised simplex on ``[A  -I  art] w = 0``."""

    def __init__(self, lp: LpInstance, refactor_every: int):
        A = sp.csr_matrix(lp.A, dtype=float)
        m, n = A.shape
        self.m, self.n = m, n
        self.refactor_every = refactor_every

        x = np.where(np.isfinite(lp.lb), lp.lb, np.where(np.isfinite(lp.ub), lp.ub, 0.0)).astype(float)
        act = A @ x
        lo, hi = np.asarray(lp.row_lo, float), np.asarray(lp.row_hi, float)
        below, above = act < lo - FEAS_TOL, act > hi + FEAS_TOL
        need = below | above
        target = np.where(below, lo, np.where(above, hi, act))
        art_rows = np.flatnonzero(need)
        sign = np.sign(target[art_rows] - act[art_rows])
        na = len(art_rows)

        cols = [A, -sp.identity(m, format="csr")]
        if na:
            cols.append(sp.csr_matrix((sign, (art_rows, np.arange(na))), shape=(m, na)))
        self.M = sp.hstack(cols, format="csc")
        self.ntot = n + m + na
        self.lb = np.concatenate([lp.lb, lo, np.zeros(na)]).astype(float)
        self.ub = np.concatenate([lp.ub, hi, np.full(na, np.inf)]).astype(float)
        self.val = np.concatenate([x, target, np.abs(target[art_rows] - act[art_rows])])
        self.art = np.arange(n + m, self.ntot)

        # slack of a row basic unless it needed an artificial
        basis = np.arange(n, n + m)
        basis[art_rows] = self.art
        self.basis = basis
        self.is_basic = np.zeros(self.ntot, dtype=bool)
        self.is_basic[basis] = True
        diag = -np.ones(m)
        diag[art_rows] = sign
        self.Binv = np.diag(1.0 / diag) if m else np.zeros((0, 0))
        self.since_refactor = 0

    def column(self, j: int) -> np.ndarray:
        col = np.zeros(self.m)
        lo, hi = self.M.indptr[j], self.M.indptr[j + 1]
        col[self.M.indices[lo:hi]] = self.M.data[lo:hi]
        return col

    def refactor(self):
        B = self.M[:, self.basis].toarray()
        self.Binv = np.linalg.inv(B)
        nb = ~self.is_basic
        rhs = -(self.M[:, np.flatnonzero(nb)] @ self.val[nb])
        self.val[self.basis] = self.Binv @ rhs
        self.since_refactor = 0

    def run(self, cost: np.ndarray, max_iter: int, bland_after: int, counter: list[int]) -> str:
        degenerate = 0
        bland = False
        MT = self.M.T.tocsr()
        while True:
            if counter[0] >= max_iter:
                raise IterationLimit(f"simplex exceeded {max_iter} pivots")
            y = self.Binv.T @ cost[self.basis] if self.m else np.zeros(0)
            d = cost - MT @ y
            d[self.basis] = 0.0
            v = self.val
            up_ok = (d < -OPT_TOL) & (v < self.ub - FEAS_TOL)
            dn_ok = (d > OPT_TOL) & (v > self.lb + FEAS_TOL)
            elig = (up_ok | dn_ok) & ~self.is_basic
            cand = np.flatnonzero(elig)
            if cand.size == 0:
                return OPTIMAL
            if bland:
                j = int(cand[0])
            else:
                j = int(cand[np.argmax(np.abs(d[cand]))])
            delta = 1.0 if d[j] < 0 else -1.0

            alpha = self.Binv @ self.column(j) if self.m else np.zeros(0)
            # basic values move by -theta * delta * alpha
            step = delta * alpha
            xb = v[self.basis]
            lbb, ubb = self.lb[self.basis], self.ub[self.basis]
            with np.errstate(divide="ignore", invalid="ignore"):
                ratio = np.where(
                    step > PIVOT_TOL,
                    (xb - lbb) / step,
                    np.where(step < -PIVOT_TOL, (ubb - xb) / -step, np.inf),
                )
            ratio = np.maximum(ratio, 0.0)
            flip = self.ub[j] - self.lb[j]
            theta = min(ratio.min(initial=np.inf), flip)
            if not np.isfinite(theta):
                return UNBOUNDED
            tie = theta + 1e-12 * max(1.0, theta)
            rows = np.flatnonzero(ratio <= tie)
            # smallest variable index among tied blocking candidates
            p = None
            if rows.size:
                p = int(rows[np.argmin(self.basis[rows])])
            if flip <= tie and (p is None or j < self.basis[p]):
                p = None

            counter[0] += 1
            if theta <= 1e-12:
                degenerate += 1
                if degenerate >= bland_after and not bland:
                    logger.debug("switching to Bland's rule after %d degenerate pivots", degenerate)
                    bland = True
            else:
                degenerate = 0

            v[self.basis] = xb - theta * step
            v[j] += delta * theta
            if p is None:
                v[j] = self.ub[j] if delta > 0 else self.lb[j]
                continue
            leave = int(self.basis[p])
            v[leave] = self.lb[leave] if step[p] > 0 else self.ub[leave]
            piv = alpha[p]
            row_p = self.Binv[p] / piv
            self.Binv -= np.outer(alpha, row_p)
            self.Binv[p] = row_p
            self.basis[p] = j
            self.is_basic[leave] = False
            self.is_basic[j] = True
            self.since_refactor += 1
            if self.since_refactor >= self.refactor_every:
                self.refactor()


def _solve_bounded(lp: LpInstance, max_iter: int, bland_after: int, refactor_every: int) -> LpSolution:
    if np.any(lp.lb > lp.ub + FEAS_TOL) or np.any(lp.row_lo > lp.row_hi + FEAS_TOL):
        return LpSolution(INFEASIBLE, None, np.nan)
    t = _Tableau(lp, refactor_every)
    counter = [0]
    n, m = t.n, t.m
    if t.art.size:
        cost1 = np.zeros(t.ntot)
        cost1[t.art] = 1.0
        t.run(cost1, max_iter, bland_after, counter)
        t.refactor()
        infeas = t.val[t.art].sum()
        if infeas > FEAS_TOL * max(1.0, m):
            return LpSolution(INFEASIBLE, None, np.nan, iterations=counter[0])
        t.ub[t.art] = 0.0
        t.val[t.art] = np.clip(t.val[t.art], 0.0, 0.0)
    cost2 = np.zeros(t.ntot)
    cost2[:n] = lp.c
    status = t.run(cost2, max_iter, bland_after, counter)
    if status == UNBOUNDED:
        return LpSolution(UNBOUNDED, None, -np.inf, iterations=counter[0])
    t.refactor()
    x = np.clip(t.val[:n], lp.lb, lp.ub)
    basis = tuple(int(b) for b in t.basis)
    return LpSolution(OPTIMAL, x, float(lp.c @ x), basis, counter[0], "bounded")


def _solve_highs(lp: LpInstance) -> LpSolution:
    A = sp.csr_matrix(lp.A)
    lo, hi = np.asarray(lp.row_lo, float), np.asarray(lp.row_hi, float)
    eq = np.isfinite(lo) & np.isfinite(hi) & (lo == hi)
    has_hi = np.isfinite(hi) & ~eq
    has_lo = np.isfinite(lo) & ~eq
    A_ub = sp.vstack([A[has_hi], -A[has_lo]], format="csr")
    b_ub = np.concatenate([hi[has_hi], -lo[has_lo]])
    kw = {}
    if A_ub.shape[0]:
        kw.update(A_ub=A_ub, b_ub=b_ub)
    if eq.any():
        kw.update(A_eq=A[eq], b_eq=lo[eq])
    res = linprog(lp.c, bounds=np.column_stack([lp.lb, lp.ub]), method="highs-ds", **kw)
    if res.status == 2:
        return LpSolution(INFEASIBLE, None, np.nan, engine="highs")
    if res.status == 3:
        return LpSolution(UNBOUNDED, None, -np.inf, engine="highs")
    if res.status != 0:
        raise RuntimeError(f"HiGHS failed: {res.message}")
    x = np.clip(res.x, lp.lb, lp.ub)
    return LpSolution(OPTIMAL, x, float(lp.c @ x), None, int(res.nit), "highs")


# Instances with more rows than this go to HiGHS under ``engine="auto"``.
AUTO_MAX_ROWS = 250


def simplex_solve(
    inst,
    engine: str = "auto",
    max_iter: int = 1_000_000,
    bland_after: int = 10_000,
    refactor_every: int = 64,
) -> LpSolution:
    """Solve a bounded LP to a vertex.

    Parameters
    ----------
    inst
        :class:`LpInstance` or any object with the same attributes (for
        example a :class:`~edge3c.milp.MilpInstance`; integrality is ignored).
    engine
        ``"bounded"``, ``"highs"`` or ``"auto"`` (bounded simplex up to
        :data:`AUTO_MAX_ROWS` rows after dropping fixed columns).
    max_iter
        Pivot cap; :class:`IterationLimit` is raised when it is reached.
    bland_after
        Consecutive degenerate pivots after which pricing switches from
        Dantzig's rule to Bland's rule.
    """
    lp = as_lp(inst)
    if engine not in ("auto", "bounded", "highs"):
        raise ValueError(f"unknown engine {engine!r}")

    # Columns fixed by their bounds never move; solve the reduced problem.
    fixed = lp.lb == lp.ub
    keep = np.flatnonzero(~fixed)
    A = sp.csr_matrix(lp.A)
    shift = A[:, np.flatnonzero(fixed)] @ lp.lb[fixed] if fixed.any() else np.zeros(lp.m)
    Ak = A[:, keep]
    live = np.diff(Ak.indptr) > 0
    if not live.all():
        act = shift[~live]
        if np.any(act < lp.row_lo[~live] - FEAS_TOL) or np.any(act > lp.row_hi[~live] + FEAS_TOL):
            return LpSolution(INFEASIBLE, None, np.nan)
    red = LpInstance(
        lp.c[keep], Ak[live], lp.row_lo[live] - shift[live], lp.row_hi[live] - shift[live], lp.lb[keep], lp.ub[keep]
    )
    if engine == "auto":
        engine = "bounded" if red.m <= AUTO_MAX_ROWS else "highs"
    if engine == "bounded":
        sol = _solve_bounded(red, max_iter, bland_after, refactor_every)
    else:
        sol = _solve_highs(red)
    if not sol.optimal:
        return sol
    x = lp.lb.astype(float).copy()
    x[keep] = sol.x
    basis = None
    if sol.basis is not None:
        # map back to the full numbering: structural, then slacks of live rows
        rows = np.flatnonzero(live)
        nk = len(keep)
        basis = tuple(
            int(keep[b]) if b < nk else lp.n + int(rows[b - nk]) for b in sol.basis if b < nk + len(rows)
        )
    return LpSolution(OPTIMAL, x, float(lp.c @ x), basis, sol.iterations, sol.engine)


def strictly_interior(inst, x: np.ndarray, tol: float = 1e-7) -> int:
    """Number of variables strictly between their bounds."""
    lp = as_lp(inst)
    return int(np.sum((x > lp.lb + tol) & (x < lp.ub - tol)))


def tight_rows(inst, x: np.ndarray, tol: float = 1e-7) -> int:
    """Number of rows whose activity sits at one of its bounds."""
    lp = as_lp(inst)
    act = sp.csr_matrix(lp.A) @ x
    return int(np.sum((np.abs(act - lp.row_lo) <= tol) | (np.abs(act - lp.row_hi) <= tol)))
