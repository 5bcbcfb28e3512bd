"""Linear programs for the 3C energy minimisation.

:func:`build_opt_linear` gives the exact integer program, where every
worst-case delay bound has been rewritten as a big-M row over helper
indicators ``y``.  :func:`build_opt_relax` gives the delay-free continuous
relaxation with allocation-prevention controls, the problem that the
heuristic solves repeatedly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np
import scipy.sparse as sp

from .model import Assignment, Scenario, validate_scenario

__all__ = [
    "VarMap",
    "LinearConstraint",
    "MilpInstance",
    "ControlParams",
    "BigM",
    "InvalidScenario",
    "InvalidControls",
    "FractionalSolution",
    "big_m_values",
    "build_opt_linear",
    "build_opt_relax",
    "extract_assignment",
    "assignment_vector",
    "write_mps",
]

INT_TOL = 1e-6


class InvalidScenario(ValueError):
    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class InvalidControls(ValueError):
    """Controls that forbid a task's own device; noncooperation must stay feasible."""


class FractionalSolution(ValueError):
    pass


# ---------------------------------------------------------------------------
# variable numbering


class VarMap:
    """Dense numbering of the decision variables.

    Families and shapes: ``x_in, x_down, x_up`` ``(S, K, N)``; ``x_cpu``
    ``(S, N)``; ``z_in, z_up, z_ca`` ``(S, K, E)`` over the directed edges;
    ``y_down, y_up`` ``(S, N)`` (only when ``with_y``).
    """

    def __init__(self, S: int, K: int, N: int, edges, with_y: bool = True):
        self.S, self.K, self.N = S, K, N
        self.edges = tuple(tuple(e) for e in edges)
        self.E = len(self.edges)
        shapes = {
            "x_in": (S, K, N),
            "x_down": (S, K, N),
            "x_cpu": (S, N),
            "x_up": (S, K, N),
            "z_in": (S, K, self.E),
            "z_up": (S, K, self.E),
            "z_ca": (S, K, self.E),
        }
        if with_y:
            shapes["y_down"] = (S, N)
            shapes["y_up"] = (S, N)
        self.with_y = with_y
        self.shapes = shapes
        self.offset: dict[str, int] = {}
        start = 0
        for name, shp in shapes.items():
            self.offset[name] = start
            start += int(np.prod(shp))
        self.size = start

    @classmethod
    def for_scenario(cls, s: Scenario, with_y: bool = True) -> "VarMap":
        return cls(s.S, s.K, s.N, s.graph.edges, with_y)

    def block(self, name: str) -> np.ndarray:
        """Indices of a whole family, shaped like the family."""
        shp = self.shapes[name]
        return self.offset[name] + np.arange(int(np.prod(shp))).reshape(shp)

    def index(self, name: str, *idx) -> int:
        return self.offset[name] + int(np.ravel_multi_index(idx, self.shapes[name]))

    def lookup(self, i: int) -> tuple:
        """``(family, s, k, n)``, ``(family, s, n)`` or ``(family, s, k, i, j)`` for z."""
        if not 0 <= i < self.size:
            raise IndexError(i)
        for name in reversed(list(self.shapes)):
            if i >= self.offset[name]:
                idx = np.unravel_index(i - self.offset[name], self.shapes[name])
                idx = tuple(int(v) for v in idx)
                if name.startswith("z_"):
                    return (name, idx[0], idx[1]) + self.edges[idx[2]]
                return (name,) + idx
        raise AssertionError

    def split(self, x: np.ndarray) -> dict[str, np.ndarray]:
        return {name: x[self.block(name)] for name in self.shapes}


@dataclass(frozen=True)
class LinearConstraint:
    """One row ``lower <= sum(coef * x[var]) <= upper``."""

    vars: tuple[int, ...]
    coefs: tuple[float, ...]
    lower: float
    upper: float


@dataclass(frozen=True)
class MilpInstance:
    """``min c@x`` subject to ``row_lo <= A@x <= row_hi`` and ``lb <= x <= ub``.

    ``row_kind`` tags each row with the constraint family it comes from:
    ``cpu_once``, ``input_once``, ``upload_once`` (one device per subtask),
    ``input_held``, the flow balances ``input_flow``, ``cache_flow``,
    ``upload_flow``, the indicator links ``y_down_upper``/``y_down_lower``/
    ``y_up_upper``/``y_up_lower`` and the big-M delay rows ``delay_down``,
    ``delay_cpu``, ``delay_up``.
    """

    c: np.ndarray
    A: sp.csr_matrix
    row_lo: np.ndarray
    row_hi: np.ndarray
    lb: np.ndarray
    ub: np.ndarray
    integrality: np.ndarray
    varmap: VarMap
    row_kind: tuple[str, ...] = field(default=())
    scenario: Scenario | None = field(default=None, compare=False, repr=False)

    @property
    def n(self) -> int:
        return len(self.c)

    @property
    def m(self) -> int:
        return self.A.shape[0]

    @property
    def constraints(self) -> Iterator[LinearConstraint]:
        for r in range(self.m):
            lo, hi = self.A.indptr[r], self.A.indptr[r + 1]
            yield LinearConstraint(
                tuple(int(v) for v in self.A.indices[lo:hi]),
                tuple(float(v) for v in self.A.data[lo:hi]),
                float(self.row_lo[r]),
                float(self.row_hi[r]),
            )

    def rows_of(self, kind: str) -> np.ndarray:
        return np.flatnonzero(np.asarray(self.row_kind) == kind)

    def relaxed(self) -> "MilpInstance":
        return MilpInstance(
            self.c, self.A, self.row_lo, self.row_hi, self.lb, self.ub,
            np.zeros(self.n, dtype=bool), self.varmap, self.row_kind, self.scenario,
        )


@dataclass
class ControlParams:
    """Allocation masks; a zero forbids the subtask on that device."""

    n_in: np.ndarray
    n_cpu: np.ndarray
    n_up: np.ndarray

    @classmethod
    def ones(cls, s: Scenario) -> "ControlParams":
        return cls(
            np.ones((s.S, s.K, s.N), dtype=int),
            np.ones((s.S, s.N), dtype=int),
            np.ones((s.S, s.K, s.N), dtype=int),
        )

    def copy(self) -> "ControlParams":
        return ControlParams(self.n_in.copy(), self.n_cpu.copy(), self.n_up.copy())

    def zeros_count(self) -> int:
        return int((self.n_in == 0).sum() + (self.n_cpu == 0).sum() + (self.n_up == 0).sum())

    def admits_noncooperation(self, s: Scenario) -> bool:
        t = np.arange(s.S)
        u = s.owner
        if (self.n_cpu[t, u] == 0).any():
            return False
        if ((self.n_in[t, :, u] == 0) & (s.d_in == 1)).any():
            return False
        return not ((self.n_up[t, :, u] == 0) & (s.d_up == 1)).any()


# ---------------------------------------------------------------------------
# big-M


@dataclass(frozen=True)
class BigM:
    """Per-device constants for the three delay families.

    ``None`` marks a family whose bounds are all infinite, so its rows are
    omitted.
    """

    down: np.ndarray | None
    cpu: np.ndarray | None
    up: np.ndarray | None


def big_m_values(s: Scenario) -> BigM:
    """The largest finite bound of each family, shared by every device."""
    if s.S == 0:
        raise ValueError("scenario has no tasks")
    out = []
    for col in range(3):
        b = s.bounds[:, col]
        finite = b[np.isfinite(b)]
        out.append(None if finite.size == 0 else np.full(s.N, finite.max()))
    return BigM(*out)


def _busy_ceiling(s: Scenario) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    # time each device would need if it took every subtask of the scenario
    down = float((s.d_in * s.L[None, :]).sum()) / s.q_down
    cpu = float(s.d_cpu.sum()) / s.q_cpu
    up = float((s.d_up * s.L[None, :]).sum()) / s.q_up
    return down, cpu, up


# ---------------------------------------------------------------------------
# construction


class _Rows:
    def __init__(self):
        self.r, self.c, self.v = [], [], []
        self.lo, self.hi, self.kind = [], [], []

    def add(self, cols, coefs, lo, hi, kind):
        cols = np.asarray(cols, dtype=np.int64).ravel()
        coefs = np.broadcast_to(np.asarray(coefs, dtype=float), cols.shape).ravel()
        keep = coefs != 0
        r = len(self.lo)
        self.r.append(np.full(int(keep.sum()), r))
        self.c.append(cols[keep])
        self.v.append(coefs[keep])
        self.lo.append(lo)
        self.hi.append(hi)
        self.kind.append(kind)

    def matrix(self, n):
        if not self.lo:
            return sp.csr_matrix((0, n)), np.zeros(0), np.zeros(0), ()
        A = sp.csr_matrix(
            (np.concatenate(self.v), (np.concatenate(self.r), np.concatenate(self.c))), shape=(len(self.lo), n)
        )
        A.sum_duplicates()
        return A, np.array(self.lo, float), np.array(self.hi, float), tuple(self.kind)


def _objective(s: Scenario, vm: VarMap) -> np.ndarray:
    c = np.zeros(vm.size)
    c[vm.block("x_down")] = (s.L[None, :, None] * (s.c_down / s.q_down)[None, None, :]) * np.ones((s.S, 1, 1))
    c[vm.block("x_up")] = (s.L[None, :, None] * (s.c_up / s.q_up)[None, None, :]) * np.ones((s.S, 1, 1))
    c[vm.block("x_cpu")] = s.d_cpu[:, None] * (s.c_cpu / s.q_cpu)[None, :]
    if s.E:
        link = s.c_d2d / s.q_d2d
        per = s.L[None, :, None] * link[None, None, :] * np.ones((s.S, 1, 1))
        for name in ("z_in", "z_up", "z_ca"):
            c[vm.block(name)] = per
    return c


def _core(s: Scenario, vm: VarMap, rows: _Rows) -> tuple[np.ndarray, np.ndarray]:
    """Rows shared by both programs (allocation, cache, flow) and default bounds."""
    S, K, N = s.S, s.K, s.N
    lb = np.zeros(vm.size)
    ub = np.ones(vm.size)
    z_max = float(max(1, S * K))

    X_in, X_down, X_up = vm.block("x_in"), vm.block("x_down"), vm.block("x_up")
    X_cpu = vm.block("x_cpu")
    Z = {name: vm.block(name) for name in ("z_in", "z_up", "z_ca")}

    # zero-demand pairs: fix every related variable at 0
    ub[X_in[s.d_in == 0]] = 0
    ub[X_down[s.d_in == 0]] = 0
    ub[X_up[s.d_up == 0]] = 0
    for name, dem in (("z_in", s.d_in), ("z_up", s.d_up), ("z_ca", s.d_ca)):
        blk = Z[name]
        ub[blk] = z_max
        ub[blk[dem == 0]] = 0

    for t in range(S):
        rows.add(X_cpu[t], 1.0, 1.0, 1.0, "cpu_once")
    for t, k in zip(*np.nonzero(s.d_in)):
        rows.add(X_in[t, k], 1.0, 1.0, 1.0, "input_once")
    for t, k in zip(*np.nonzero(s.d_up)):
        rows.add(X_up[t, k], 1.0, 1.0, 1.0, "upload_once")

    needers = [np.flatnonzero(s.d_in[:, k]) for k in range(K)]
    for t, k in zip(*np.nonzero(s.d_in)):
        for n in range(N):
            cols = np.concatenate([[X_in[t, k, n]], X_down[needers[k], k, n]])
            coefs = np.concatenate([[1.0], -np.ones(len(needers[k]))])
            rows.add(cols, coefs, -np.inf, float(s.cache[n, k]), "input_held")

    src = s.edge_array[:, 0] if s.E else np.zeros(0, int)
    dst = s.edge_array[:, 1] if s.E else np.zeros(0, int)
    in_edges = [np.flatnonzero(dst == i) for i in range(N)]
    out_edges = [np.flatnonzero(src == i) for i in range(N)]

    def flow(name, t, k, i):
        blk = Z[name][t, k]
        cols = np.concatenate([blk[in_edges[i]], blk[out_edges[i]]])
        coefs = np.concatenate([np.ones(len(in_edges[i])), -np.ones(len(out_edges[i]))])
        return cols, coefs

    for t, k in zip(*np.nonzero(s.d_in)):
        for i in range(N):
            cols, coefs = flow("z_in", t, k, i)
            rows.add(np.r_[cols, X_in[t, k, i], X_cpu[t, i]], np.r_[coefs, 1.0, -1.0], 0.0, 0.0, "input_flow")
    for t, k in zip(*np.nonzero(s.d_ca)):
        for i in range(N):
            cols, coefs = flow("z_ca", t, k, i)
            rhs = 1.0 if s.owner[t] == i else 0.0
            rows.add(np.r_[cols, X_cpu[t, i]], np.r_[coefs, 1.0], rhs, rhs, "cache_flow")
    for t, k in zip(*np.nonzero(s.d_up)):
        for i in range(N):
            cols, coefs = flow("z_up", t, k, i)
            rows.add(np.r_[cols, X_cpu[t, i], X_up[t, k, i]], np.r_[coefs, 1.0, -1.0], 0.0, 0.0, "upload_flow")
    return lb, ub


def build_opt_linear(s: Scenario) -> MilpInstance:
    """Exact integer linear program, delay bounds included."""
    bad = validate_scenario(s)
    if bad:
        raise InvalidScenario(bad)
    S, K, N = s.S, s.K, s.N
    vm = VarMap.for_scenario(s, with_y=True)
    rows = _Rows()
    lb, ub = _core(s, vm, rows)

    X_in, X_down, X_up, X_cpu = vm.block("x_in"), vm.block("x_down"), vm.block("x_up"), vm.block("x_cpu")
    Y_down, Y_up = vm.block("y_down"), vm.block("y_up")
    unc = 1 - s.cache  # (N, K)

    for t in range(S):
        for n in range(N):
            ks = np.flatnonzero(s.d_in[t] * unc[n])
            rows.add(np.r_[Y_down[t, n], X_in[t, ks, n]], np.r_[1.0, -np.ones(len(ks))], -np.inf, 0.0, "y_down_upper")
            for k in ks:
                rows.add([X_in[t, k, n], Y_down[t, n]], [1.0, -1.0], -np.inf, 0.0, "y_down_lower")
            ks_up = np.flatnonzero(s.d_up[t])
            rows.add(np.r_[Y_up[t, n], X_up[t, ks_up, n]], np.r_[1.0, -np.ones(len(ks_up))], -np.inf, 0.0, "y_up_upper")
            for k in ks_up:
                rows.add([X_up[t, k, n], Y_up[t, n]], [1.0, -1.0], -np.inf, 0.0, "y_up_lower")

    M = big_m_values(s)
    ceil_down, ceil_cpu, ceil_up = _busy_ceiling(s)
    for col, (Mx, ceil, kind) in enumerate(
        ((M.down, ceil_down, "delay_down"), (M.cpu, ceil_cpu, "delay_cpu"), (M.up, ceil_up, "delay_up"))
    ):
        if Mx is None:
            continue
        # with the indicator off a row must still admit every feasible load, and no load
        # exceeds the ceiling; M = ceiling - bound is the smallest constant that does this
        for n in range(N):
            if kind == "delay_down":
                load_cols = X_down[:, :, n].ravel()
                load = np.repeat(s.L[None, :], S, axis=0).ravel() / s.q_down[n]
                live = s.d_in.ravel() > 0
            elif kind == "delay_cpu":
                load_cols = X_cpu[:, n]
                load = s.d_cpu / s.q_cpu[n]
                live = s.d_cpu > 0
            else:
                load_cols = X_up[:, :, n].ravel()
                load = np.repeat(s.L[None, :], S, axis=0).ravel() / s.q_up[n]
                live = s.d_up.ravel() > 0
            load_cols, load = load_cols[live], load[live]
            for t in range(S):
                bound = s.bounds[t, col]
                if not math.isfinite(bound):
                    continue
                Mtn = max(ceil[n] - bound, 0.0)
                ind = {"delay_down": Y_down[t, n], "delay_cpu": X_cpu[t, n], "delay_up": Y_up[t, n]}[kind]
                cols = np.r_[load_cols, ind]
                coefs = np.r_[load, Mtn]
                rows.add(cols, coefs, -np.inf, bound + Mtn, kind)

    A, lo, hi, kind = rows.matrix(vm.size)
    return MilpInstance(_objective(s, vm), A, lo, hi, lb, ub, np.ones(vm.size, dtype=bool), vm, kind, s)


@dataclass(frozen=True)
class _RelaxBase:
    inst: MilpInstance
    ub0: np.ndarray


def relax_base(s: Scenario) -> _RelaxBase:
    """Structure of the relaxation with all controls at one (reusable)."""
    bad = validate_scenario(s)
    if bad:
        raise InvalidScenario(bad)
    vm = VarMap.for_scenario(s, with_y=False)
    rows = _Rows()
    lb, ub = _core(s, vm, rows)
    A, lo, hi, kind = rows.matrix(vm.size)
    inst = MilpInstance(_objective(s, vm), A, lo, hi, lb, ub, np.zeros(vm.size, dtype=bool), vm, kind, s)
    return _RelaxBase(inst, ub)


def apply_controls(base: _RelaxBase, s: Scenario, ctl: ControlParams) -> MilpInstance:
    if not ctl.admits_noncooperation(s):
        raise InvalidControls("controls forbid a task on its own device")
    vm = base.inst.varmap
    ub = base.ub0.copy()
    ub[vm.block("x_in")] *= ctl.n_in
    ub[vm.block("x_cpu")] *= ctl.n_cpu
    ub[vm.block("x_up")] *= ctl.n_up
    i = base.inst
    return MilpInstance(i.c, i.A, i.row_lo, i.row_hi, i.lb, ub, i.integrality, vm, i.row_kind, s)


def build_opt_relax(s: Scenario, ctl: ControlParams | None = None) -> MilpInstance:
    """Delay-free relaxation with the prevention controls as upper bounds."""
    if ctl is None:
        ctl = ControlParams.ones(s)
    return apply_controls(relax_base(s), s, ctl)


# ---------------------------------------------------------------------------


def extract_assignment(vm: VarMap, x: np.ndarray) -> Assignment:
    """Round a solution vector into an :class:`Assignment`.

    Raises :class:`FractionalSolution` when any entry is more than
    ``1e-6`` away from an integer.  ``y`` entries are dropped.
    """
    x = np.asarray(x, dtype=float)
    if x.shape != (vm.size,):
        raise ValueError(f"expected a vector of length {vm.size}")
    r = np.rint(x)
    far = np.abs(x - r) > INT_TOL
    if far.any():
        i = int(np.flatnonzero(far)[0])
        raise FractionalSolution(f"{vm.lookup(i)} = {x[i]!r} is not integral")
    parts = vm.split(r.astype(np.int64))
    return Assignment(**{name: parts[name] for name in Assignment.FIELDS})


def assignment_vector(vm: VarMap, s: Scenario, a: Assignment) -> np.ndarray:
    """Inverse of :func:`extract_assignment`; ``y`` is derived from ``x``."""
    x = np.zeros(vm.size)
    for name in Assignment.FIELDS:
        x[vm.block(name)] = getattr(a, name)
    if vm.with_y:
        x[vm.block("y_down")] = a.y_down(s)
        x[vm.block("y_up")] = a.y_up()
    return x


def write_mps(inst: MilpInstance, path, name: str = "EDGE3C") -> None:
    """Write ``inst`` in fixed-column MPS layout (12 significant digits).

    Columns are ``C<j>``, rows ``R<i>``; ranged rows use a RANGES entry and
    integer columns are wrapped in MARKER lines.
    """

    def num(v: float) -> str:
        return f"{v:.12g}"

    lines = [f"NAME          {name}", "ROWS", " N  COST"]
    lo, hi = inst.row_lo, inst.row_hi
    types = []
    for r in range(inst.m):
        if lo[r] == hi[r]:
            t = "E"
        elif np.isfinite(hi[r]):
            t = "L"
        else:
            t = "G"
        types.append(t)
        lines.append(f" {t}  R{r}")
    lines.append("COLUMNS")
    A = inst.A.tocsc()
    in_int = False
    for j in range(inst.n):
        if inst.integrality[j] and not in_int:
            lines.append("    MARKER                 'MARKER'                 'INTORG'")
            in_int = True
        elif not inst.integrality[j] and in_int:
            lines.append("    MARKER                 'MARKER'                 'INTEND'")
            in_int = False
        entries = [("COST", inst.c[j])] if inst.c[j] != 0 else []
        for p in range(A.indptr[j], A.indptr[j + 1]):
            entries.append((f"R{A.indices[p]}", A.data[p]))
        if not entries:
            entries = [("COST", 0.0)]
        for rname, v in entries:
            lines.append(f"    {'C' + str(j):<8}  {rname:<8}  {num(v):>12}")
    if in_int:
        lines.append("    MARKER                 'MARKER'                 'INTEND'")
    lines.append("RHS")
    ranges = []
    for r, t in enumerate(types):
        rhs = hi[r] if t in ("E", "L") else lo[r]
        if rhs != 0:
            lines.append(f"    {'RHS':<8}  {'R' + str(r):<8}  {num(rhs):>12}")
        if t == "L" and np.isfinite(lo[r]):
            ranges.append((r, hi[r] - lo[r]))
    if ranges:
        lines.append("RANGES")
        for r, width in ranges:
            lines.append(f"    {'RNG':<8}  {'R' + str(r):<8}  {num(width):>12}")
    lines.append("BOUNDS")
    for j in range(inst.n):
        col = "C" + str(j)
        l, u = inst.lb[j], inst.ub[j]
        if l == u:
            lines.append(f" FX {'BND':<8}  {col:<8}  {num(l):>12}")
            continue
        if l != 0:
            lines.append(f" LO {'BND':<8}  {col:<8}  {num(l):>12}")
        if np.isfinite(u):
            lines.append(f" UP {'BND':<8}  {col:<8}  {num(u):>12}")
        else:
            lines.append(f" PL {'BND':<8}  {col:<8}")
    lines.append("ENDATA")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_mps(path) -> dict:
    """Parse what :func:`write_mps` emits back into arrays (for cross-checks)."""
    rows, types, section = {}, [], None
    cols: dict[str, dict[str, float]] = {}
    rhs, rng, bnd = {}, {}, {}
    ints, in_int = set(), False
    for line in open(path):
        if not line.strip():
            continue
        if not line.startswith(" "):
            section = line.split()[0]
            continue
        f = line.split()
        if section == "ROWS":
            if f[0] != "N":
                rows[f[1]] = len(types)
                types.append(f[0])
        elif section == "COLUMNS":
            if f[1] == "'MARKER'":
                in_int = f[2] == "'INTORG'"
                continue
            cols.setdefault(f[0], {})[f[1]] = float(f[2])
            if in_int:
                ints.add(f[0])
        elif section == "RHS":
            rhs[f[1]] = float(f[2])
        elif section == "RANGES":
            rng[f[1]] = float(f[2])
        elif section == "BOUNDS":
            bnd.setdefault(f[2], {})[f[0]] = float(f[3]) if len(f) > 3 else None
    n, m = len(cols), len(types)
    names = sorted(cols, key=lambda c: int(c[1:]))
    c = np.zeros(n)
    A = np.zeros((m, n))
    for j, cname in enumerate(names):
        for rname, v in cols[cname].items():
            if rname == "COST":
                c[j] = v
            else:
                A[rows[rname], j] = v
    lo, hi = np.full(m, -np.inf), np.full(m, np.inf)
    for rname, r in rows.items():
        b = rhs.get(rname, 0.0)
        t = types[r]
        if t == "E":
            lo[r] = hi[r] = b
        elif t == "L":
            hi[r] = b
            if rname in rng:
                lo[r] = b - rng[rname]
        else:
            lo[r] = b
    lb, ub = np.zeros(n), np.full(n, np.inf)
    for j, cname in enumerate(names):
        for kind, v in bnd.get(cname, {}).items():
            if kind == "FX":
                lb[j] = ub[j] = v
            elif kind == "LO":
                lb[j] = v
            elif kind == "UP":
                ub[j] = v
    integ = np.array([cname in ints for cname in names])
    return dict(c=c, A=A, row_lo=lo, row_hi=hi, lb=lb, ub=ub, integrality=integ)
