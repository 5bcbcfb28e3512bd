"""Iterative LP heuristic with allocation prevention.

Each round solves the delay-free relaxation under the current prevention
masks, then, for every task whose worst-case delay exceeds its bound,
forbids one helper allocation on the device causing the largest delay.
Masks only ever move from 1 to 0 and a task's own device is never
forbidden, so running everything locally stays available and the loop
ends.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Callable, TextIO

import numpy as np

from .bb import branch_and_bound
from .lp import simplex_solve
from .milp import INT_TOL, ControlParams, apply_controls, extract_assignment, relax_base
from .model import (
    Assignment,
    Scenario,
    assignment_energy,
    subtask_times,
    worst_case_delays,
)
from .model import _exceeds

__all__ = ["NoPreventableTask", "HeuristicResult", "prevention_step", "run_heuristic"]


class NoPreventableTask(RuntimeError):
    """A delay violation with no helper allocation left to forbid."""


@dataclass(frozen=True)
class HeuristicResult:
    """Unpacks as ``(assignment, iterations, energy)``.

    ``max_fraction`` holds, per LP solve, the largest distance of any
    variable to the nearest integer; ``repaired`` counts the solves whose
    vertex was fractional and had to be replaced by an integer solve.
    """

    assignment: Assignment
    iterations: int
    energy: float
    max_fraction: tuple[float, ...] = ()
    repaired: int = 0
    controls: ControlParams | None = field(default=None, compare=False)

    def __iter__(self):
        return iter((self.assignment, self.iterations, self.energy))


def _violations(s: Scenario, a: Assignment) -> np.ndarray:
    return _exceeds(worst_case_delays(s, a).as_array(), s.bounds)


def prevention_step(
    s: Scenario,
    a: Assignment,
    c: ControlParams,
    flipped: list | None = None,
) -> ControlParams:
    """One sweep over the tasks, forbidding allocations behind each violation.

    Returns new masks; ``c`` is left untouched.  When ``flipped`` is a
    list, ``(family, s, k, n)`` tuples of the zeroed bits are appended
    (``k`` is ``-1`` for computation).
    """
    viol = _violations(s, a)
    if not viol.any():
        raise ValueError("no delay bound is violated")
    out = c.copy()
    times = subtask_times(s, a)
    owner = s.owner
    unc = (1 - s.cache).T[None, :, :]  # (1, K, N)
    y_down = a.y_down(s)
    y_up = a.y_up()
    x_in = a.x_in
    log = flipped if flipped is not None else []
    before = out.zeros_count()

    for t in range(s.S):
        if viol[t, 0]:
            n_hat = int(np.argmax(times.down * y_down[t]))
            own = np.flatnonzero(owner == n_hat)
            shared = (x_in[own, :, n_hat].sum(axis=0) > 0).astype(int)  # contents n_hat's own tasks take at n_hat
            in_I = (x_in[:, :, n_hat] * shared[None, :]).sum(axis=1) >= 1
            helpers = np.flatnonzero((y_down[:, n_hat] != 0) & (owner != n_hat))
            order = sorted(helpers, key=lambda u: (s.bounds[u, 0], u))
            done = False
            for u in [u for u in order if not in_I[u]]:
                K_bar = np.flatnonzero(x_in[u, :, n_hat] * unc[0, :, n_hat] == 1)
                users = [(v, k) for k in K_bar for v in np.flatnonzero(x_in[:, k, n_hat] == 1)]
                fresh = [(v, k) for v, k in users if out.n_in[v, k, n_hat]]
                if fresh:
                    for v, k in fresh:
                        out.n_in[v, k, n_hat] = 0
                        log.append(("in", int(v), int(k), n_hat))
                    done = True
                    break
            if not done:
                # every helper shares a content with n_hat's own tasks: drop the
                # helper's own uncached inputs there (tightest bound first)
                for u in [u for u in order if in_I[u]]:
                    K_bar = np.flatnonzero((x_in[u, :, n_hat] * unc[0, :, n_hat] == 1) & (out.n_in[u, :, n_hat] == 1))
                    if K_bar.size:
                        out.n_in[u, K_bar, n_hat] = 0
                        log += [("in", int(u), int(k), n_hat) for k in K_bar]
                        done = True
                        break
            if not done and not helpers.size:
                raise NoPreventableTask(f"download delay of task {t} on device {n_hat}")
        if viol[t, 1]:
            n_hat = int(np.argmax(times.cpu * a.x_cpu[t]))
            cand = np.flatnonzero((a.x_cpu[:, n_hat] != 0) & (owner != n_hat))
            if not cand.size:
                raise NoPreventableTask(f"computation delay of task {t} on device {n_hat}")
            for u in sorted(cand, key=lambda u: (s.bounds[u, 1], u)):
                if out.n_cpu[u, n_hat]:
                    out.n_cpu[u, n_hat] = 0
                    log.append(("cpu", int(u), -1, n_hat))
                    break
        if viol[t, 2]:
            n_hat = int(np.argmax(times.up * y_up[t]))
            cand = np.flatnonzero((y_up[:, n_hat] != 0) & (owner != n_hat))
            if not cand.size:
                raise NoPreventableTask(f"upload delay of task {t} on device {n_hat}")
            for u in sorted(cand, key=lambda u: (s.bounds[u, 2], u)):
                if (out.n_up[u, :, n_hat] * s.d_up[u]).any():
                    ks = np.flatnonzero(out.n_up[u, :, n_hat])
                    out.n_up[u, :, n_hat] = 0
                    log += [("up", int(u), int(k), n_hat) for k in ks]
                    break
    if out.zeros_count() == before:
        raise NoPreventableTask("the sweep could not forbid any further allocation")
    return out


def run_heuristic(
    s: Scenario,
    engine: str = "auto",
    trace: TextIO | Callable[[dict], None] | None = None,
    max_iterations: int | None = None,
    on_fractional: str = "integer",
) -> HeuristicResult:
    """Solve, check the delay bounds, prevent, and repeat.

    Parameters
    ----------
    s
        Scenario whose local schedule meets every delay bound.
    engine
        LP engine passed to :func:`~edge3c.lp.simplex_solve`.
    trace
        Optional text stream (one JSON object per line) or callable that
        receives ``{"iteration", "violated", "flipped", "objective"}``.
    max_iterations
        Safety cap on LP solves; ``None`` means no cap.
    on_fractional
        What to do when a relaxation vertex is not integral: ``"integer"``
        re-solves that same relaxation with integrality enforced by
        :func:`~edge3c.bb.branch_and_bound`; ``"raise"`` raises
        :class:`~edge3c.milp.FractionalSolution`.

    Returns
    -------
    HeuristicResult
        ``iterations`` counts LP solves, so a run without violations
        reports 1.
    """
    if on_fractional not in ("integer", "raise"):
        raise ValueError(f"unknown on_fractional {on_fractional!r}")
    base = relax_base(s)
    repaired = 0
    ctl = ControlParams.ones(s)
    fractions = []
    it = 0
    while True:
        it += 1
        inst = apply_controls(base, s, ctl)
        sol = simplex_solve(inst, engine=engine)
        if not sol.optimal:
            raise RuntimeError(f"relaxation reported {sol.status} although local execution is allowed")
        frac = float(np.max(np.abs(sol.x - np.rint(sol.x)), initial=0.0))
        fractions.append(frac)
        if frac > INT_TOL and on_fractional == "integer":
            # the relaxation polytope can have fractional optimal vertices
            whole = replace(inst, integrality=np.ones(inst.n, dtype=bool))
            exact = branch_and_bound(whole, engine=engine)
            a, objective = exact.assignment, exact.objective
            repaired += 1
        else:
            a, objective = extract_assignment(inst.varmap, sol.x), float(sol.objective)
        viol = _violations(s, a)
        flipped: list = []
        if viol.any():
            if max_iterations is not None and it >= max_iterations:
                raise RuntimeError(f"no feasible schedule within {max_iterations} iterations")
            ctl = prevention_step(s, a, ctl, flipped)
        if trace is not None:
            rec = {
                "iteration": it,
                "violated": [int(t) for t in np.flatnonzero(viol.any(axis=1))],
                "flipped": [list(f) for f in flipped],
                "objective": objective,
            }
            if callable(trace):
                trace(rec)
            else:
                trace.write(json.dumps(rec) + "\n")
        if not viol.any():
            return HeuristicResult(a, it, assignment_energy(s, a).total, tuple(fractions), repaired, ctl)
