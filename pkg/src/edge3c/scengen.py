"""Random scenarios for the simulation studies.

Every scalar parameter is drawn from a normal law truncated to its range
``(a, b)``, centred at ``(a + b) / 2``, with spread ``sigma * (b - a) / ref_width``.
With the default ``ref_width = 1`` and ``sigma = 1`` the draws are close to
uniform on ``(a, b)``.
Each device owns exactly one task; task kinds follow three patterns:

``downloading``
    fetch some contents and keep them (input = cache output, no CPU).
``sharing``
    the same shape, with inputs drawn from a small popular set.
``analysis``
    inputs, a CPU demand, and outputs that are uploaded or cached.

Delay bounds are the noncooperation times scaled by a random slack >= 1,
so running everything locally always stays feasible.
"""
from __future__ import annotations

import json
import math
import sys
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np
from scipy.stats import truncnorm

from .model import (
    Content,
    D2DGraph,
    Device,
    Scenario,
    Task,
    noncooperation_assignment,
    validate_scenario,
    worst_case_delays,
)

__all__ = [
    "KINDS",
    "ParamRanges",
    "GenConfig",
    "RetryExhausted",
    "draw_parameter",
    "generate",
    "restrict_cooperation",
    "load_config",
]

KINDS = ("downloading", "sharing", "analysis")
REF_WIDTH = 1.0
MAX_ATTEMPTS = 100


class RetryExhausted(RuntimeError):
    pass


@dataclass(frozen=True)
class ParamRanges:
    q_down: tuple[float, float] = (0.0, 10.0)
    q_up: tuple[float, float] = (0.0, 4.0)
    q_d2d: tuple[float, float] = (0.0, 50.0)
    q_cpu: tuple[float, float] = (0.0, 10.0)
    d_cpu: tuple[float, float] = (0.0, 10.0)
    c_down: tuple[float, float] = (0.0, 2.8)
    c_cpu: tuple[float, float] = (0.0, 1.2)
    c_up: tuple[float, float] = (0.0, 2.8)
    c_d2d: tuple[float, float] = (0.0, 0.8)

    def __post_init__(self):
        for f in fields(self):
            a, b = getattr(self, f.name)
            if not a < b:
                raise ValueError(f"range for {f.name} must satisfy a < b")


@dataclass(frozen=True)
class GenConfig:
    """Knobs of :func:`generate`.

    ``beta=None`` draws D2D energy from its own range; a number replaces it
    with ``beta`` times the sender's downloading energy.  ``n_popular`` is
    the size of the popular set used by sharing tasks (capped at ``K``).
    """

    N: int = 20
    p: float = 0.3
    sigma: float = 1.0
    beta: float | None = None
    K: int = 8
    weights: tuple[float, float, float] = (1 / 3, 1 / 3, 1 / 3)
    slack: tuple[float, float] = (1.0, 3.0)
    seed: int = 0
    n_popular: int = 3
    max_items: int = 3
    ref_width: float = REF_WIDTH
    ranges: ParamRanges = field(default_factory=ParamRanges)

    def __post_init__(self):
        if self.N < 1 or self.K < 1:
            raise ValueError("N and K must be positive")
        if not 0 < self.p <= 1:
            raise ValueError("p must lie in (0, 1]")
        if self.beta is not None and self.beta < 0:
            raise ValueError("beta must be nonnegative")
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")
        w = np.asarray(self.weights, float)
        if w.shape != (3,) or (w < 0).any() or abs(w.sum() - 1) > 1e-9:
            raise ValueError("weights must be three nonnegative numbers summing to 1")
        lo, hi = self.slack
        if not 1 <= lo <= hi:
            raise ValueError("slack range must satisfy 1 <= lo <= hi")
        if self.ref_width <= 0:
            raise ValueError("ref_width must be positive")
        if self.n_popular < 1:
            raise ValueError("n_popular must be positive")


def load_config(path) -> GenConfig:
    """Read a :class:`GenConfig` from a ``.json`` or ``.toml`` file."""
    path = str(path)
    if path.endswith(".toml"):
        if sys.version_info >= (3, 11):
            import tomllib
        else:
            import tomli as tomllib
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    else:
        with open(path) as fh:
            raw = json.load(fh)
    known = {f.name for f in fields(GenConfig)}
    extra = set(raw) - known
    if extra:
        raise ValueError(f"unknown config keys: {sorted(extra)}")
    if "ranges" in raw:
        raw["ranges"] = ParamRanges(**{k: tuple(v) for k, v in raw["ranges"].items()})
    for key in ("weights", "slack"):
        if key in raw:
            raw[key] = tuple(raw[key])
    return GenConfig(**raw)


def draw_parameter(rng: np.random.Generator, rng_ab: tuple[float, float], sigma: float, size=None,
                   ref_width: float = REF_WIDTH):
    """Truncated-normal draw on ``(a, b)`` centred in the middle."""
    a, b = rng_ab
    mu = 0.5 * (a + b)
    sd = sigma * (b - a) / ref_width
    x = truncnorm.rvs((a - mu) / sd, (b - mu) / sd, loc=mu, scale=sd, size=size, random_state=rng)
    # the open range matters for capacities; nudge draws that round onto an end
    eps = 1e-9 * (b - a)
    return np.clip(x, a + eps, b - eps)


def _pick(rng, pool, lo, hi):
    pool = np.asarray(pool)
    m = int(rng.integers(lo, min(hi, len(pool)) + 1))
    return np.sort(rng.choice(pool, size=m, replace=False))


_draw = draw_parameter


def _attempt(cfg: GenConfig, rng: np.random.Generator) -> Scenario:
    N, K, R, sig = cfg.N, cfg.K, cfg.ranges, cfg.sigma

    def draw_parameter(rng, rng_ab, sigma, size):
        return _draw(rng, rng_ab, sigma, size, cfg.ref_width)
    q_down = draw_parameter(rng, R.q_down, sig, N)
    q_cpu = draw_parameter(rng, R.q_cpu, sig, N)
    q_up = draw_parameter(rng, R.q_up, sig, N)
    c_down = draw_parameter(rng, R.c_down, sig, N)
    c_cpu = draw_parameter(rng, R.c_cpu, sig, N)
    c_up = draw_parameter(rng, R.c_up, sig, N)

    cache = np.zeros((N, K), dtype=int)
    m_max = math.ceil(K / 4)
    for n in range(N):
        m = int(rng.integers(0, m_max + 1))
        cache[n, rng.choice(K, size=m, replace=False)] = 1

    iu, ju = np.triu_indices(N, k=1)
    linked = rng.random(len(iu)) < cfg.p
    pairs = list(zip(iu[linked].tolist(), ju[linked].tolist()))
    edges = [e for i, j in pairs for e in ((i, j), (j, i))]
    q_d2d = draw_parameter(rng, R.q_d2d, sig, len(edges)) if edges else np.zeros(0)
    if cfg.beta is None:
        c_d2d = draw_parameter(rng, R.c_d2d, sig, len(edges)) if edges else np.zeros(0)
    else:
        c_d2d = np.array([cfg.beta * c_down[i] for i, _ in edges])

    kinds = rng.choice(len(KINDS), size=N, p=np.asarray(cfg.weights, float))
    d_cpu = draw_parameter(rng, R.d_cpu, sig, N)
    every = np.arange(K)
    popular = np.arange(min(cfg.n_popular, cfg.K))
    tasks = []
    for n in range(N):
        kind = KINDS[kinds[n]]
        inp = np.zeros(K, dtype=int)
        up = np.zeros(K, dtype=int)
        ca = np.zeros(K, dtype=int)
        cpu = 0.0
        if kind == "analysis":
            inp[_pick(rng, every, 1, cfg.max_items)] = 1
            rest = np.flatnonzero(inp == 0)
            outs = _pick(rng, rest if rest.size else every, 1, cfg.max_items)
            to_up = rng.random(len(outs)) < 0.5
            up[outs[to_up]] = 1
            ca[outs[~to_up]] = 1
            cpu = float(d_cpu[n])
        else:
            pool = popular if kind == "sharing" else every
            inp[_pick(rng, pool, 1, cfg.max_items)] = 1
            ca[:] = inp
        tasks.append(Task(n, n, tuple(inp), cpu, tuple(up), tuple(ca), kind=kind))

    devices = tuple(
        Device(n, (n,), float(q_down[n]), float(q_cpu[n]), float(q_up[n]), tuple(cache[n]),
               float(c_down[n]), float(c_cpu[n]), float(c_up[n]))
        for n in range(N)
    )
    graph = D2DGraph(tuple(edges), tuple(float(q) for q in q_d2d), tuple(float(c) for c in c_d2d))
    contents = tuple(Content(k, 1.0) for k in range(K))
    loose = Scenario(contents, devices, tuple(tasks), graph)

    # bounds from the local schedule; a zero local time leaves that family unbounded
    base = worst_case_delays(loose, noncooperation_assignment(loose)).as_array()
    slack = rng.uniform(cfg.slack[0], cfg.slack[1], size=base.shape)
    bounds = np.where(base > 0, base * slack, math.inf)
    final = tuple(
        replace(t, delay_down=float(bounds[t.id, 0]), delay_cpu=float(bounds[t.id, 1]), delay_up=float(bounds[t.id, 2]))
        for t in tasks
    )
    return loose.replace(tasks=final)


def generate(cfg: GenConfig) -> Scenario:
    """Draw one scenario; deterministic in ``cfg`` (including ``cfg.seed``)."""
    rng = np.random.default_rng(cfg.seed)
    last: list[str] = []
    for _ in range(MAX_ATTEMPTS):
        s = _attempt(cfg, rng)
        last = validate_scenario(s)
        if not last:
            return s
    raise RetryExhausted(f"no valid scenario after {MAX_ATTEMPTS} attempts: {last[:3]}")


def restrict_cooperation(s: Scenario, mode: str) -> Scenario:
    """``"3C"`` keeps every link; ``"1C2C"`` keeps only links between same-kind devices."""
    if mode == "3C":
        return s
    if mode != "1C2C":
        raise ValueError(f"unknown cooperation mode {mode!r}")
    kind = {}
    for t in s.tasks:
        if t.kind is None:
            raise ValueError("restricting cooperation needs tagged tasks")
        kind.setdefault(t.owner, set()).add(t.kind)
    return s.replace(graph=s.graph.without(lambda i, j: kind.get(i, set()) != kind.get(j, set())))


def config_dict(cfg: GenConfig) -> dict:
    return asdict(cfg)
