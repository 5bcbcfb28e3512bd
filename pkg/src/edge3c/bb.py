"""Exact solvers: LP-based branch-and-bound and a brute-force oracle."""
from __future__ import annotations

import heapq
import itertools
import math
from dataclasses import dataclass

import numpy as np

from .lp import simplex_solve
from .milp import INT_TOL, MilpInstance, assignment_vector, extract_assignment
from .model import (
    Assignment,
    Scenario,
    assignment_energy,
    check_feasible,
    noncooperation_assignment,
)

__all__ = [
    "Infeasible",
    "NodeLimit",
    "TooLarge",
    "BBResult",
    "branch_and_bound",
    "enumerate_bruteforce",
]

PRUNE_RTOL = 1e-10
BOUND_TOL = 1e-9


class Infeasible(RuntimeError):
    pass


class NodeLimit(RuntimeError):
    """Raised when the node budget runs out.

    Attributes
    ----------
    assignment, objective
        Best integral schedule found so far (``None`` and ``inf`` if none).
    lower_bound
        Smallest LP bound among the open nodes, a valid bound on the optimum.
    """

    def __init__(self, msg, assignment=None, objective=math.inf, lower_bound=-math.inf):
        super().__init__(msg)
        self.assignment = assignment
        self.objective = objective
        self.lower_bound = lower_bound


class TooLarge(ValueError):
    pass


@dataclass(frozen=True)
class BBResult:
    """Unpacks as ``(assignment, objective)``."""

    assignment: Assignment
    objective: float
    nodes: int
    root_bound: float

    def __iter__(self):
        return iter((self.assignment, self.objective))


_FAMILY_RANK = {"x_in": 0, "x_down": 0, "x_cpu": 0, "x_up": 0, "y_down": 1, "y_up": 1, "z_in": 2, "z_up": 2, "z_ca": 2}


def _rank_vector(inst: MilpInstance) -> np.ndarray:
    rank = np.empty(inst.n, dtype=int)
    for name, off in inst.varmap.offset.items():
        size = int(np.prod(inst.varmap.shapes[name]))
        rank[off : off + size] = _FAMILY_RANK[name]
    return rank


def _branch_var(x: np.ndarray, integ: np.ndarray, rank: np.ndarray) -> int | None:
    frac = np.abs(x - np.rint(x))
    cand = integ & (frac > INT_TOL)
    if not cand.any():
        return None
    best_rank = rank[cand].min()
    pool = np.flatnonzero(cand & (rank == best_rank))
    dist = np.minimum(x[pool] - np.floor(x[pool]), np.ceil(x[pool]) - x[pool])
    # argmax returns the first index on ties, i.e. the smallest variable index
    return int(pool[np.argmax(dist)])


def branch_and_bound(
    inst: MilpInstance,
    node_limit: int = 1_000_000,
    engine: str = "auto",
    incumbent: Assignment | None = None,
) -> BBResult:
    """Solve an integer program from :func:`~edge3c.milp.build_opt_linear`.

    Nodes are explored best-bound first, and each popped node starts a
    depth-first dive that follows the child on the rounding side of the
    branching variable.

    Parameters
    ----------
    inst
        Integer program; if it carries its scenario, the noncooperation
        schedule seeds the incumbent.
    node_limit
        Number of LP solves after which :class:`NodeLimit` is raised.
    incumbent
        Optional starting schedule (overrides the noncooperation seed).
    """
    integ = inst.integrality.astype(bool)
    rank = _rank_vector(inst)
    vm = inst.varmap

    best_x: np.ndarray | None = None
    best = math.inf
    seed = incumbent
    if seed is None and inst.scenario is not None:
        seed = noncooperation_assignment(inst.scenario)
    if seed is not None and inst.scenario is not None:
        x0 = assignment_vector(vm, inst.scenario, seed)
        if _satisfies(inst, x0):
            best_x, best = x0, float(inst.c @ x0)

    nodes = 0

    def solve(lb, ub):
        nonlocal nodes
        if nodes >= node_limit:
            raise NodeLimit(f"node limit {node_limit} reached")
        nodes += 1
        return simplex_solve(inst.with_bounds(lb, ub) if hasattr(inst, "with_bounds") else _Bounded(inst, lb, ub), engine=engine)

    root = solve(inst.lb, inst.ub)
    if not root.optimal:
        if best_x is not None:
            raise RuntimeError("root relaxation infeasible although a feasible schedule is known")
        raise Infeasible("the integer program has no feasible point")
    root_bound = root.objective

    def cutoff():
        return best - PRUNE_RTOL * max(1.0, abs(best))

    tick = itertools.count()
    heap: list = [(root_bound, next(tick), inst.lb, inst.ub, root)]
    open_bound = root_bound
    try:
        while heap:
            bound, _, lb, ub, sol = heapq.heappop(heap)
            if bound >= cutoff():
                continue
            open_bound = bound
            while sol is not None:
                if sol.objective < root_bound - BOUND_TOL * max(1.0, abs(root_bound)):
                    raise AssertionError("node bound below the root bound")
                if sol.objective >= cutoff():
                    break
                j = _branch_var(sol.x, integ, rank)
                if j is None:
                    xr = np.rint(sol.x)
                    best_x, best = xr, float(inst.c @ xr)
                    break
                v = sol.x[j]
                down_ub = ub.copy()
                down_ub[j] = math.floor(v)
                up_lb = lb.copy()
                up_lb[j] = math.ceil(v)
                kids = [(lb, down_ub), (up_lb, ub)]
                if v - math.floor(v) >= 0.5:
                    kids.reverse()
                sol = None
                results = []
                for clb, cub in kids:
                    r = solve(clb, cub)
                    if r.optimal and r.objective < cutoff():
                        results.append((r, clb, cub))
                if not results:
                    break
                # dive into the preferred child, shelve the other
                sol, lb, ub = results[0]
                for r, clb, cub in results[1:]:
                    heapq.heappush(heap, (r.objective, next(tick), clb, cub, r))
    except NodeLimit as exc:
        open_bound = min([open_bound] + [h[0] for h in heap])
        a = extract_assignment(vm, best_x) if best_x is not None else None
        raise NodeLimit(str(exc), a, best, min(open_bound, best)) from None

    if best_x is None:
        raise Infeasible("the integer program has no feasible point")
    return BBResult(extract_assignment(vm, best_x), best, nodes, root_bound)


class _Bounded:
    def __init__(self, inst, lb, ub):
        self.c, self.A, self.row_lo, self.row_hi = inst.c, inst.A, inst.row_lo, inst.row_hi
        self.lb, self.ub = lb, ub


def _satisfies(inst: MilpInstance, x: np.ndarray, tol: float = 1e-9) -> bool:
    if np.any(x < inst.lb - tol) or np.any(x > inst.ub + tol):
        return False
    ax = inst.A @ x
    scale = tol * np.maximum(1.0, np.abs(ax))
    return bool(np.all(ax >= inst.row_lo - scale) and np.all(ax <= inst.row_hi + scale))


# ---------------------------------------------------------------------------
# brute force

GUARD = {"N": 4, "S": 4, "K": 3}


def _shortest_paths(s: Scenario):
    """All-pairs cheapest D2D routes per unit of content size."""
    N = s.N
    dist = np.full((N, N), math.inf)
    nxt = -np.ones((N, N), dtype=int)
    edge_of = {}
    np.fill_diagonal(dist, 0.0)
    for e, (i, j) in enumerate(s.graph.edges):
        if i == j:
            continue
        w = s.c_d2d[e] / s.q_d2d[e]
        if w < dist[i, j]:
            dist[i, j] = w
            nxt[i, j] = j
            edge_of[(i, j)] = e
    for n in range(N):
        nxt[n, n] = n
    for m in range(N):
        for i in range(N):
            for j in range(N):
                if dist[i, m] + dist[m, j] < dist[i, j]:
                    dist[i, j] = dist[i, m] + dist[m, j]
                    nxt[i, j] = nxt[i, m]
    return dist, nxt, edge_of


def _route(i, j, nxt, edge_of):
    out = []
    while i != j:
        h = nxt[i, j]
        out.append(edge_of[(i, h)])
        i = h
    return out


def enumerate_bruteforce(s: Scenario) -> tuple[Assignment, float]:
    """Exhaustive search over subtask placements for tiny scenarios.

    Every computation, input and upload subtask is tried on every device.
    Each content needed at a device that does not cache it is downloaded
    there once, and D2D traffic follows the cheapest route.  Partial
    placements are cut when a delay bound is already exceeded (delays only
    grow as placements are added) or when a lower bound on the finished
    energy reaches the best value found.
    """
    if s.N > GUARD["N"] or s.S > GUARD["S"] or s.K > GUARD["K"]:
        raise TooLarge(f"brute force limited to N<={GUARD['N']}, S<={GUARD['S']}, K<={GUARD['K']}")
    N, S, K = s.N, s.S, s.K
    L = s.L
    dist, nxt, edge_of = _shortest_paths(s)
    cache = s.cache.astype(bool)
    d_cpu = s.d_cpu
    bounds = s.bounds
    e_down = L[:, None] * (s.c_down / s.q_down)[None, :]  # (K, N)
    e_up = L[:, None] * (s.c_up / s.q_up)[None, :]
    e_cpu = d_cpu[:, None] * (s.c_cpu / s.q_cpu)[None, :]  # (S, N)
    t_down = L[:, None] / s.q_down[None, :]
    t_up = L[:, None] / s.q_up[None, :]
    t_cpu = d_cpu[:, None] / s.q_cpu[None, :]

    # item = (kind, task, content); kinds: 0 cpu, 1 input, 2 upload
    items = []
    for t in range(S):
        items.append((0, t, -1))
        items += [(1, t, int(k)) for k in np.flatnonzero(s.d_in[t])]
        items += [(2, t, int(k)) for k in np.flatnonzero(s.d_up[t])]
    n_items = len(items)

    cpu_at = -np.ones(S, dtype=int)
    tau_down = np.zeros(N)
    tau_cpu = np.zeros(N)
    tau_up = np.zeros(N)
    downloaded = np.zeros((K, N), dtype=int)  # reference counts
    y_down = np.zeros((S, N), dtype=int)
    y_up = np.zeros((S, N), dtype=int)
    place = [-1] * n_items

    def delays_ok(t_set):
        for t in t_set:
            if cpu_at[t] >= 0 and tau_cpu[cpu_at[t]] > bounds[t, 1] * (1 + 1e-9):
                return False
            if y_down[t].any() and tau_down[y_down[t] > 0].max() > bounds[t, 0] * (1 + 1e-9):
                return False
            if y_up[t].any() and tau_up[y_up[t] > 0].max() > bounds[t, 2] * (1 + 1e-9):
                return False
        return True

    # tasks touched by a change on device n (through y sets or cpu placement)
    def affected(n):
        return [t for t in range(S) if y_down[t, n] or y_up[t, n] or cpu_at[t] == n]

    # remaining-energy floor: cpu items at their cheapest device; every input
    # content needs at least its cheapest provider; D2D costs are >= 0
    rem_cpu = np.zeros(n_items + 1)
    for idx in range(n_items - 1, -1, -1):
        kind, t, k = items[idx]
        add = e_cpu[t].min() if kind == 0 else (e_up[k].min() if kind == 2 else 0.0)
        rem_cpu[idx] = rem_cpu[idx + 1] + add

    def input_floor(idx):
        need = {items[j][2] for j in range(idx, n_items) if items[j][0] == 1}
        tot = 0.0
        for k in need:
            free = cache[:, k] | (downloaded[k] > 0)
            tot += 0.0 if free.any() else float(e_down[k].min())
        return tot

    # the local schedule is feasible, so its energy bounds the optimum; the start
    # value sits above it by twice the pruning margin so the schedule itself survives
    e_nc = assignment_energy(s, noncooperation_assignment(s)).total
    best = [e_nc + 2 * PRUNE_RTOL * max(1.0, e_nc), None]
    energy = [0.0]

    def dfs(idx):
        cut = best[0] - PRUNE_RTOL * max(1.0, abs(best[0]))
        if energy[0] + rem_cpu[idx] + input_floor(idx) >= cut:
            return
        if idx == n_items:
            best[0], best[1] = energy[0], list(place)
            return
        kind, t, k = items[idx]
        for n in range(N):
            if kind == 0:
                extra = e_cpu[t, n]
                flows = [(n, int(s.owner[t]), kk) for kk in np.flatnonzero(s.d_ca[t])]
                cost = extra + sum(L[kk] * dist[a, b] for a, b, kk in flows)
                if not math.isfinite(cost):
                    continue
                cpu_at[t] = n
                tau_cpu[n] += t_cpu[t, n]
                energy[0] += cost
                place[idx] = n
                if delays_ok(affected(n)):
                    dfs(idx + 1)
                energy[0] -= cost
                tau_cpu[n] -= t_cpu[t, n]
                cpu_at[t] = -1
            elif kind == 1:
                c = cpu_at[t]
                route = L[k] * dist[n, c]
                if not math.isfinite(route):
                    continue
                need_dl = not cache[n, k]
                new_dl = need_dl and downloaded[k, n] == 0
                cost = route + (e_down[k, n] if new_dl else 0.0)
                prev_y = y_down[t, n]
                if need_dl:
                    downloaded[k, n] += 1
                    y_down[t, n] += 1
                    if new_dl:
                        tau_down[n] += t_down[k, n]
                energy[0] += cost
                place[idx] = n
                if not need_dl or delays_ok(affected(n)):
                    dfs(idx + 1)
                energy[0] -= cost
                if need_dl:
                    downloaded[k, n] -= 1
                    y_down[t, n] = prev_y
                    if new_dl:
                        tau_down[n] -= t_down[k, n]
            else:
                c = cpu_at[t]
                route = L[k] * dist[c, n]
                if not math.isfinite(route):
                    continue
                cost = route + e_up[k, n]
                y_up[t, n] += 1
                tau_up[n] += t_up[k, n]
                energy[0] += cost
                place[idx] = n
                if delays_ok(affected(n)):
                    dfs(idx + 1)
                energy[0] -= cost
                tau_up[n] -= t_up[k, n]
                y_up[t, n] -= 1
            place[idx] = -1

    dfs(0)
    if best[1] is None:
        raise Infeasible("no placement satisfies the delay bounds")

    a = _materialise(s, items, best[1], nxt, edge_of)
    bad = check_feasible(s, a)
    if bad:
        raise AssertionError(f"brute-force optimum fails feasibility: {bad}")
    return a, assignment_energy(s, a).total


def _materialise(s: Scenario, items, place, nxt, edge_of) -> Assignment:
    S, K, N, E = s.S, s.K, s.N, s.E
    x_in = np.zeros((S, K, N), dtype=np.int64)
    x_down = np.zeros_like(x_in)
    x_up = np.zeros_like(x_in)
    x_cpu = np.zeros((S, N), dtype=np.int64)
    z_in = np.zeros((S, K, E), dtype=np.int64)
    z_up = np.zeros_like(z_in)
    z_ca = np.zeros_like(z_in)
    cpu = {}
    for (kind, t, k), n in zip(items, place):
        if kind == 0:
            cpu[t] = n
            x_cpu[t, n] = 1
            for kk in np.flatnonzero(s.d_ca[t]):
                for e in _route(n, int(s.owner[t]), nxt, edge_of):
                    z_ca[t, kk, e] += 1
    have = set()
    for (kind, t, k), n in zip(items, place):
        if kind == 1:
            x_in[t, k, n] = 1
            if not s.cache[n, k] and (k, n) not in have:
                x_down[t, k, n] = 1
                have.add((k, n))
            for e in _route(n, cpu[t], nxt, edge_of):
                z_in[t, k, e] += 1
        elif kind == 2:
            x_up[t, k, n] = 1
            for e in _route(cpu[t], n, nxt, edge_of):
                z_up[t, k, e] += 1
    return Assignment(x_in, x_down, x_cpu, x_up, z_in, z_up, z_ca)
