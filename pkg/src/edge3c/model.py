"""Devices, tasks, contents and the D2D graph, plus evaluation of schedules.

Indices are zero-based everywhere: contents ``0..K-1``, devices ``0..N-1``,
tasks ``0..S-1``.  Directed D2D edges are stored in a fixed order and the
``z`` flow arrays of an :class:`Assignment` are indexed by that edge order.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable

import numpy as np

__all__ = [
    "Content",
    "Device",
    "D2DGraph",
    "Task",
    "Scenario",
    "Assignment",
    "EnergyBreakdown",
    "SubtaskTimes",
    "WorstCaseDelays",
    "DELAY_RTOL",
    "validate_scenario",
    "noncooperation_assignment",
    "check_feasible",
    "subtask_times",
    "worst_case_delays",
    "assignment_energy",
    "scenario_to_dict",
    "scenario_from_dict",
    "dumps_scenario",
    "loads_scenario",
    "assignment_to_dict",
    "assignment_from_dict",
]

# Relative slack used when comparing a worst-case delay against its bound.
DELAY_RTOL = 1e-9


def _bits(values: Iterable, K: int | None = None) -> tuple[int, ...]:
    out = tuple(int(v) for v in values)
    if K is not None and len(out) != K:
        raise ValueError(f"expected a 0/1 vector of length {K}, got {len(out)}")
    return out


@dataclass(frozen=True)
class Content:
    id: int
    size: float = 1.0


@dataclass(frozen=True)
class Device:
    """Resources of one device.

    Capacities are in bits/s (``down_cap``, ``up_cap``) and cycles/s
    (``cpu_cap``); ``c_*`` are energy per second of the matching operation.
    ``cache`` is a 0/1 tuple over contents.
    """

    id: int
    own_tasks: tuple[int, ...]
    down_cap: float
    cpu_cap: float
    up_cap: float
    cache: tuple[int, ...]
    c_down: float
    c_cpu: float
    c_up: float

    def __post_init__(self):
        object.__setattr__(self, "own_tasks", tuple(int(t) for t in self.own_tasks))
        object.__setattr__(self, "cache", _bits(self.cache))


@dataclass(frozen=True)
class Task:
    """One task ``(owner, input, cpu_demand, upload, cache_out)`` with delay bounds.

    ``kind`` is an optional generation tag (``"downloading"``, ``"sharing"``,
    ``"analysis"``) used when restricting cooperation to same-kind devices.
    """

    id: int
    owner: int
    input: tuple[int, ...]
    cpu_demand: float
    upload: tuple[int, ...]
    cache_out: tuple[int, ...]
    delay_down: float = math.inf
    delay_cpu: float = math.inf
    delay_up: float = math.inf
    kind: str | None = None

    def __post_init__(self):
        for name in ("input", "upload", "cache_out"):
            object.__setattr__(self, name, _bits(getattr(self, name)))


@dataclass(frozen=True)
class D2DGraph:
    """Directed D2D links with per-link capacity (bits/s) and energy per second."""

    edges: tuple[tuple[int, int], ...] = ()
    d2d_cap: tuple[float, ...] = ()
    d2d_cost: tuple[float, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "edges", tuple((int(i), int(j)) for i, j in self.edges))
        object.__setattr__(self, "d2d_cap", tuple(float(q) for q in self.d2d_cap))
        object.__setattr__(self, "d2d_cost", tuple(float(c) for c in self.d2d_cost))
        if not (len(self.edges) == len(self.d2d_cap) == len(self.d2d_cost)):
            raise ValueError("edges, d2d_cap and d2d_cost must have equal length")

    @classmethod
    def symmetric(cls, pairs, cap, cost) -> "D2DGraph":
        """Both directions of every undirected pair, sharing ``cap``/``cost``.

        ``cap`` and ``cost`` are scalars or sequences aligned with ``pairs``.
        """
        pairs = list(pairs)
        caps = np.broadcast_to(np.asarray(cap, dtype=float), (len(pairs),))
        costs = np.broadcast_to(np.asarray(cost, dtype=float), (len(pairs),))
        edges, q, c = [], [], []
        for (i, j), qi, ci in zip(pairs, caps, costs):
            edges += [(i, j), (j, i)]
            q += [qi, qi]
            c += [ci, ci]
        return cls(tuple(edges), tuple(q), tuple(c))

    @cached_property
    def index(self) -> dict[tuple[int, int], int]:
        return {e: k for k, e in enumerate(self.edges)}

    def neighborhood(self, n: int) -> set[int]:
        """``E(n)``: devices linked to ``n`` in either direction, plus ``n``."""
        out = {n}
        for i, j in self.edges:
            if i == n:
                out.add(j)
            elif j == n:
                out.add(i)
        return out

    def without(self, drop) -> "D2DGraph":
        """Copy with the edges for which ``drop(i, j)`` is true removed."""
        keep = [k for k, (i, j) in enumerate(self.edges) if not drop(i, j)]
        return D2DGraph(
            tuple(self.edges[k] for k in keep),
            tuple(self.d2d_cap[k] for k in keep),
            tuple(self.d2d_cost[k] for k in keep),
        )


def _frozen(a) -> np.ndarray:
    a = np.array(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Scenario:
    contents: tuple[Content, ...]
    devices: tuple[Device, ...]
    tasks: tuple[Task, ...]
    graph: D2DGraph = field(default_factory=D2DGraph)

    def __post_init__(self):
        object.__setattr__(self, "contents", tuple(self.contents))
        object.__setattr__(self, "devices", tuple(self.devices))
        object.__setattr__(self, "tasks", tuple(self.tasks))

    @property
    def N(self) -> int:
        return len(self.devices)

    @property
    def S(self) -> int:
        return len(self.tasks)

    @property
    def K(self) -> int:
        return len(self.contents)

    @property
    def E(self) -> int:
        return len(self.graph.edges)

    # Array views used by the numerical code.  Read-only.
    @cached_property
    def L(self) -> np.ndarray:
        return _frozen([c.size for c in self.contents])

    @cached_property
    def q_down(self) -> np.ndarray:
        return _frozen([d.down_cap for d in self.devices])

    @cached_property
    def q_cpu(self) -> np.ndarray:
        return _frozen([d.cpu_cap for d in self.devices])

    @cached_property
    def q_up(self) -> np.ndarray:
        return _frozen([d.up_cap for d in self.devices])

    @cached_property
    def c_down(self) -> np.ndarray:
        return _frozen([d.c_down for d in self.devices])

    @cached_property
    def c_cpu(self) -> np.ndarray:
        return _frozen([d.c_cpu for d in self.devices])

    @cached_property
    def c_up(self) -> np.ndarray:
        return _frozen([d.c_up for d in self.devices])

    @cached_property
    def cache(self) -> np.ndarray:
        """``(N, K)`` 0/1 cache matrix."""
        return _frozen(np.array([d.cache for d in self.devices], dtype=int).reshape(self.N, self.K))

    @cached_property
    def owner(self) -> np.ndarray:
        return _frozen(np.array([t.owner for t in self.tasks], dtype=int))

    @cached_property
    def d_in(self) -> np.ndarray:
        return _frozen(np.array([t.input for t in self.tasks], dtype=int).reshape(self.S, self.K))

    @cached_property
    def d_up(self) -> np.ndarray:
        return _frozen(np.array([t.upload for t in self.tasks], dtype=int).reshape(self.S, self.K))

    @cached_property
    def d_ca(self) -> np.ndarray:
        return _frozen(np.array([t.cache_out for t in self.tasks], dtype=int).reshape(self.S, self.K))

    @cached_property
    def d_cpu(self) -> np.ndarray:
        return _frozen([t.cpu_demand for t in self.tasks])

    @cached_property
    def bounds(self) -> np.ndarray:
        """``(S, 3)`` delay bounds in the order down, cpu, up."""
        return _frozen(
            np.array([(t.delay_down, t.delay_cpu, t.delay_up) for t in self.tasks], dtype=float).reshape(self.S, 3)
        )

    @cached_property
    def edge_array(self) -> np.ndarray:
        return _frozen(np.array(self.graph.edges, dtype=int).reshape(self.E, 2))

    @cached_property
    def q_d2d(self) -> np.ndarray:
        return _frozen(self.graph.d2d_cap)

    @cached_property
    def c_d2d(self) -> np.ndarray:
        return _frozen(self.graph.d2d_cost)

    @cached_property
    def own_mask(self) -> np.ndarray:
        """``(S, N)`` indicator of the task owner."""
        m = np.zeros((self.S, self.N), dtype=bool)
        m[np.arange(self.S), self.owner] = True
        m.setflags(write=False)
        return m

    def replace(self, **changes) -> "Scenario":
        kw = dict(contents=self.contents, devices=self.devices, tasks=self.tasks, graph=self.graph)
        kw.update(changes)
        return Scenario(**kw)


@dataclass(frozen=True, eq=False)
class Assignment:
    """Values of all decision variables.

    Shapes: ``x_in, x_down, x_up`` are ``(S, K, N)``, ``x_cpu`` is ``(S, N)``
    and the flows ``z_in, z_up, z_ca`` are ``(S, K, E)`` over the scenario's
    edge order.
    """

    x_in: np.ndarray
    x_down: np.ndarray
    x_cpu: np.ndarray
    x_up: np.ndarray
    z_in: np.ndarray
    z_up: np.ndarray
    z_ca: np.ndarray

    FIELDS = ("x_in", "x_down", "x_cpu", "x_up", "z_in", "z_up", "z_ca")

    def __post_init__(self):
        for name in self.FIELDS:
            object.__setattr__(self, name, _frozen(np.asarray(getattr(self, name), dtype=np.int64)))

    @classmethod
    def zeros(cls, s: Scenario) -> "Assignment":
        S, K, N, E = s.S, s.K, s.N, s.E
        return cls(
            np.zeros((S, K, N)),
            np.zeros((S, K, N)),
            np.zeros((S, N)),
            np.zeros((S, K, N)),
            np.zeros((S, K, E)),
            np.zeros((S, K, E)),
            np.zeros((S, K, E)),
        )

    def arrays(self) -> dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in self.FIELDS}

    def __eq__(self, other):
        if not isinstance(other, Assignment):
            return NotImplemented
        return all(np.array_equal(getattr(self, f), getattr(other, f)) for f in self.FIELDS)

    def y_down(self, s: Scenario) -> np.ndarray:
        """``(S, N)`` indicator that device n downloads an uncached input of task s."""
        return (np.einsum("skn,nk->sn", self.x_in, 1 - s.cache) > 0).astype(int)

    def y_up(self) -> np.ndarray:
        return (self.x_up.sum(axis=1) > 0).astype(int)


@dataclass(frozen=True)
class SubtaskTimes:
    down: np.ndarray
    cpu: np.ndarray
    up: np.ndarray


@dataclass(frozen=True)
class WorstCaseDelays:
    down: np.ndarray
    cpu: np.ndarray
    up: np.ndarray

    def as_array(self) -> np.ndarray:
        return np.stack([self.down, self.cpu, self.up], axis=1)


@dataclass(frozen=True)
class EnergyBreakdown:
    down: np.ndarray
    cpu: np.ndarray
    up: np.ndarray
    d2d: np.ndarray

    @property
    def per_task(self) -> np.ndarray:
        return self.down + self.cpu + self.up + self.d2d

    @property
    def total(self) -> float:
        return float(self.per_task.sum())


# ---------------------------------------------------------------------------
# evaluation


def subtask_times(s: Scenario, a: Assignment) -> SubtaskTimes:
    """Per-device busy time for downloading, computing and uploading."""
    down = np.einsum("skn,k->n", a.x_down, s.L) / s.q_down
    up = np.einsum("skn,k->n", a.x_up, s.L) / s.q_up
    cpu = (a.x_cpu * s.d_cpu[:, None]).sum(axis=0) / s.q_cpu
    return SubtaskTimes(down, cpu, up)


def _masked_max(tau: np.ndarray, mask: np.ndarray) -> np.ndarray:
    # rows of ``mask`` select devices; an empty selection gives 0
    return np.where(mask, tau[None, :], 0.0).max(axis=1, initial=0.0)


def worst_case_delays(s: Scenario, a: Assignment, times: SubtaskTimes | None = None) -> WorstCaseDelays:
    """Worst-case downloading, computation and uploading delay of every task."""
    t = times or subtask_times(s, a)
    down = _masked_max(t.down, a.y_down(s).astype(bool))
    cpu = (a.x_cpu * t.cpu[None, :]).sum(axis=1)
    up = _masked_max(t.up, a.y_up().astype(bool))
    return WorstCaseDelays(down, cpu, up)


def assignment_energy(s: Scenario, a: Assignment) -> EnergyBreakdown:
    down_rate = s.c_down / s.q_down
    up_rate = s.c_up / s.q_up
    cpu_rate = s.c_cpu / s.q_cpu
    down = np.einsum("skn,k,n->s", a.x_down, s.L, down_rate)
    up = np.einsum("skn,k,n->s", a.x_up, s.L, up_rate)
    cpu = (a.x_cpu * cpu_rate[None, :]).sum(axis=1) * s.d_cpu
    if s.E:
        link = s.c_d2d / s.q_d2d
        flows = a.z_in + a.z_up + a.z_ca
        d2d = np.einsum("ske,k,e->s", flows, s.L, link)
    else:
        d2d = np.zeros(s.S)
    return EnergyBreakdown(down, cpu, up, d2d)


def _exceeds(value: np.ndarray, bound: np.ndarray) -> np.ndarray:
    return value > bound * (1 + DELAY_RTOL) + DELAY_RTOL


def _incidence(s: Scenario) -> tuple[np.ndarray, np.ndarray]:
    """``(N, E)`` matrices selecting edges entering / leaving each device."""
    into = np.zeros((s.N, s.E))
    out = np.zeros((s.N, s.E))
    if s.E:
        e = np.arange(s.E)
        out[s.edge_array[:, 0], e] = 1
        into[s.edge_array[:, 1], e] = 1
    return into, out


def check_feasible(s: Scenario, a: Assignment) -> list[str]:
    """Identifiers of the violated constraint families (empty when feasible).

    ``"cpu_once"``, ``"input_once"``, ``"upload_once"`` are the allocation
    families, ``"input_held"`` the cache/download rule, ``"input_flow"``,
    ``"cache_flow"``, ``"upload_flow"`` the flow balances and ``"delay"`` the
    delay bounds.  ``"domain"`` flags non-binary ``x`` or negative ``z`` and
    ``"shape"`` wrong array shapes.
    """
    S, K, N, E = s.S, s.K, s.N, s.E
    shapes = {
        "x_in": (S, K, N),
        "x_down": (S, K, N),
        "x_cpu": (S, N),
        "x_up": (S, K, N),
        "z_in": (S, K, E),
        "z_up": (S, K, E),
        "z_ca": (S, K, E),
    }
    if any(getattr(a, f).shape != shp for f, shp in shapes.items()):
        return ["shape"]

    bad: list[str] = []
    xs = (a.x_in, a.x_down, a.x_cpu, a.x_up)
    if any(((x != 0) & (x != 1)).any() for x in xs) or any((z < 0).any() for z in (a.z_in, a.z_up, a.z_ca)):
        bad.append("domain")
    if (a.x_cpu.sum(axis=1) != 1).any():
        bad.append("cpu_once")
    if (a.x_in.sum(axis=2) != s.d_in).any():
        bad.append("input_once")
    if (a.x_up.sum(axis=2) != s.d_up).any():
        bad.append("upload_once")
    held = s.cache.T[None, :, :] + a.x_down.sum(axis=0)[None, :, :]
    if (a.x_in > held).any():
        bad.append("input_held")

    into, out = _incidence(s)

    def net_in(z):
        # (S, K, N): received minus transmitted
        return np.einsum("ske,ne->skn", z, into) - np.einsum("ske,ne->skn", z, out)

    cpu = a.x_cpu[:, None, :]
    if (net_in(a.z_in) + a.x_in * s.d_in[:, :, None] - cpu * s.d_in[:, :, None] != 0).any():
        bad.append("input_flow")
    owner = s.own_mask[:, None, :].astype(int)
    if (net_in(a.z_ca) + cpu * s.d_ca[:, :, None] - owner * s.d_ca[:, :, None] != 0).any():
        bad.append("cache_flow")
    if (net_in(a.z_up) + cpu * s.d_up[:, :, None] - a.x_up * s.d_up[:, :, None] != 0).any():
        bad.append("upload_flow")
    if "cpu_once" not in bad:
        T = worst_case_delays(s, a).as_array()
        if _exceeds(T, s.bounds).any():
            bad.append("delay")
    return bad


def noncooperation_assignment(s: Scenario) -> Assignment:
    """Every task runs entirely on its owner; no D2D traffic."""
    a = Assignment.zeros(s)
    x_in = np.zeros((s.S, s.K, s.N), dtype=int)
    x_down = np.zeros_like(x_in)
    x_up = np.zeros_like(x_in)
    x_cpu = s.own_mask.astype(int)
    for t in s.tasks:
        u = t.owner
        x_in[t.id, :, u] = s.d_in[t.id]
        x_up[t.id, :, u] = s.d_up[t.id]
        x_down[t.id, :, u] = s.d_in[t.id] * (1 - s.cache[u])
    return Assignment(x_in, x_down, x_cpu, x_up, a.z_in, a.z_up, a.z_ca)


def validate_scenario(s: Scenario) -> list[str]:
    """Human-readable violations of the model invariants (empty when valid)."""
    out: list[str] = []
    K, N, S = s.K, s.N, s.S
    for k, c in enumerate(s.contents):
        if c.id != k:
            out.append(f"index: content at position {k} has id {c.id}")
        if not c.size > 0:
            out.append(f"content: size of content {k} must be positive")
    for n, d in enumerate(s.devices):
        if d.id != n:
            out.append(f"index: device at position {n} has id {d.id}")
        for name in ("down_cap", "cpu_cap", "up_cap"):
            if not getattr(d, name) > 0:
                out.append(f"capacity: device {n} {name}={getattr(d, name)} must be positive")
        for name in ("c_down", "c_cpu", "c_up"):
            if not getattr(d, name) >= 0:
                out.append(f"energy: device {n} {name} must be nonnegative")
        if len(d.cache) != K or any(v not in (0, 1) for v in d.cache):
            out.append(f"cache: device {n} cache must be a 0/1 vector of length {K}")
        for t in d.own_tasks:
            if not 0 <= t < S or s.tasks[t].owner != n:
                out.append(f"index: device {n} lists task {t} it does not own")
    for i, t in enumerate(s.tasks):
        if t.id != i:
            out.append(f"index: task at position {i} has id {t.id}")
        if not 0 <= t.owner < N:
            out.append(f"index: task {i} has invalid owner {t.owner}")
        elif i not in s.devices[t.owner].own_tasks:
            out.append(f"index: owner {t.owner} does not list task {i}")
        for name in ("input", "upload", "cache_out"):
            v = getattr(t, name)
            if len(v) != K or any(b not in (0, 1) for b in v):
                out.append(f"task: {name} of task {i} must be a 0/1 vector of length {K}")
        if not t.cpu_demand >= 0:
            out.append(f"task: cpu_demand of task {i} must be nonnegative")
        for name in ("delay_down", "delay_cpu", "delay_up"):
            if not getattr(t, name) > 0:
                out.append(f"task: {name} of task {i} must be positive")
    seen = set()
    for e, (i, j) in enumerate(s.graph.edges):
        if i == j or not (0 <= i < N and 0 <= j < N):
            out.append(f"graph: invalid edge {(i, j)}")
        if (i, j) in seen:
            out.append(f"graph: duplicate edge {(i, j)}")
        seen.add((i, j))
        if not s.graph.d2d_cap[e] > 0:
            out.append(f"capacity: edge {(i, j)} d2d_cap must be positive")
        if not s.graph.d2d_cost[e] >= 0:
            out.append(f"energy: edge {(i, j)} d2d_cost must be nonnegative")
    if out:
        return out

    a = noncooperation_assignment(s)
    T = worst_case_delays(s, a).as_array()
    over = _exceeds(T, s.bounds)
    for i, col in zip(*np.nonzero(over)):
        name = ("down", "cpu", "up")[col]
        out.append(
            f"local execution: task {i} noncooperative {name} delay {T[i, col]:.6g} exceeds bound {s.bounds[i, col]:.6g}"
        )
    return out


# ---------------------------------------------------------------------------
# JSON


def _enc(x: float):
    return "inf" if x == math.inf else x


def _dec(x) -> float:
    return math.inf if x == "inf" else float(x)


def scenario_to_dict(s: Scenario) -> dict:
    return {
        "contents": [{"id": c.id, "size": c.size} for c in s.contents],
        "devices": [
            {
                "id": d.id,
                "own_tasks": list(d.own_tasks),
                "down_cap": d.down_cap,
                "cpu_cap": d.cpu_cap,
                "up_cap": d.up_cap,
                "cache": list(d.cache),
                "c_down": d.c_down,
                "c_cpu": d.c_cpu,
                "c_up": d.c_up,
            }
            for d in s.devices
        ],
        "tasks": [
            {
                "id": t.id,
                "owner": t.owner,
                "input": list(t.input),
                "cpu_demand": t.cpu_demand,
                "upload": list(t.upload),
                "cache_out": list(t.cache_out),
                "delay_bounds": {"down": _enc(t.delay_down), "cpu": _enc(t.delay_cpu), "up": _enc(t.delay_up)},
                "kind": t.kind,
            }
            for t in s.tasks
        ],
        "edges": [
            {"src": i, "dst": j, "d2d_cap": q, "d2d_cost": c}
            for (i, j), q, c in zip(s.graph.edges, s.graph.d2d_cap, s.graph.d2d_cost)
        ],
    }


def scenario_from_dict(d: dict) -> Scenario:
    contents = tuple(Content(int(c["id"]), float(c["size"])) for c in d["contents"])
    devices = tuple(
        Device(
            int(v["id"]),
            tuple(v["own_tasks"]),
            float(v["down_cap"]),
            float(v["cpu_cap"]),
            float(v["up_cap"]),
            tuple(v["cache"]),
            float(v["c_down"]),
            float(v["c_cpu"]),
            float(v["c_up"]),
        )
        for v in d["devices"]
    )
    tasks = []
    for t in d["tasks"]:
        b = t.get("delay_bounds", {})
        tasks.append(
            Task(
                int(t["id"]),
                int(t["owner"]),
                tuple(t["input"]),
                float(t["cpu_demand"]),
                tuple(t["upload"]),
                tuple(t["cache_out"]),
                _dec(b.get("down", "inf")),
                _dec(b.get("cpu", "inf")),
                _dec(b.get("up", "inf")),
                t.get("kind"),
            )
        )
    edges = d.get("edges", [])
    graph = D2DGraph(
        tuple((int(e["src"]), int(e["dst"])) for e in edges),
        tuple(float(e["d2d_cap"]) for e in edges),
        tuple(float(e["d2d_cost"]) for e in edges),
    )
    return Scenario(contents, devices, tuple(tasks), graph)


def dumps_scenario(s: Scenario, indent: int | None = 1) -> str:
    return json.dumps(scenario_to_dict(s), indent=indent)


def loads_scenario(text: str) -> Scenario:
    return scenario_from_dict(json.loads(text))


def assignment_to_dict(s: Scenario, a: Assignment) -> dict:
    """Sparse listing of the nonzero decision variables."""

    def nz(arr, labels):
        return [dict(zip(labels, map(int, idx)), value=int(arr[idx])) for idx in zip(*np.nonzero(arr))]

    def nz_edges(arr):
        rows = []
        for si, k, e in zip(*np.nonzero(arr)):
            i, j = s.graph.edges[e]
            rows.append({"s": int(si), "k": int(k), "i": i, "j": j, "value": int(arr[si, k, e])})
        return rows

    return {
        "x_in": nz(a.x_in, ("s", "k", "n")),
        "x_down": nz(a.x_down, ("s", "k", "n")),
        "x_cpu": nz(a.x_cpu, ("s", "n")),
        "x_up": nz(a.x_up, ("s", "k", "n")),
        "z_in": nz_edges(a.z_in),
        "z_up": nz_edges(a.z_up),
        "z_ca": nz_edges(a.z_ca),
    }


def assignment_from_dict(s: Scenario, d: dict) -> Assignment:
    a = {name: np.array(arr, dtype=np.int64) for name, arr in Assignment.zeros(s).arrays().items()}
    for name in ("x_in", "x_down", "x_up"):
        for r in d.get(name, []):
            a[name][r["s"], r["k"], r["n"]] = r["value"]
    for r in d.get("x_cpu", []):
        a["x_cpu"][r["s"], r["n"]] = r["value"]
    idx = s.graph.index
    for name in ("z_in", "z_up", "z_ca"):
        for r in d.get(name, []):
            a[name][r["s"], r["k"], idx[(r["i"], r["j"])]] = r["value"]
    return Assignment(**a)
