"""Hand-built scenarios shared by the test modules."""
import math

from edge3c.model import Content, D2DGraph, Device, Scenario, Task


def device(n, tasks, K, cache=(), q=(10.0, 10.0, 4.0), c=(2.0, 1.0, 2.0)):
    bits = tuple(1 if k in cache else 0 for k in range(K))
    return Device(n, tuple(tasks), q[0], q[1], q[2], bits, c[0], c[1], c[2])


def task(t, owner, K, inp=(), cpu=0.0, up=(), ca=(), bounds=(math.inf, math.inf, math.inf), kind=None):
    vec = lambda ks: tuple(1 if k in ks else 0 for k in range(K))
    return Task(t, owner, vec(inp), cpu, vec(up), vec(ca), *bounds, kind=kind)


def build(devices, tasks, K, pairs=(), cap=50.0, cost=0.8, sizes=None):
    sizes = sizes or [1.0] * K
    contents = tuple(Content(k, sizes[k]) for k in range(K))
    graph = D2DGraph.symmetric(pairs, cap, cost) if pairs else D2DGraph()
    return Scenario(contents, tuple(devices), tuple(tasks), graph)


def owner_only():
    """One device, one task: download content 0, compute 10 cycles, upload content 0."""
    K = 1
    d = device(0, [0], K)
    t = task(0, 0, K, inp=(0,), cpu=10.0, up=(0,))
    return build([d], [t], K)


def two_devices(cheap_cpu=10.0, bounds=(math.inf, math.inf, math.inf), cost=0.0):
    """Device 1 has a ``cheap_cpu`` times cheaper processor and caches the input."""
    K = 1
    d0 = device(0, [0], K)
    d1 = device(1, [], K, cache=(0,), c=(2.0, 1.0 / cheap_cpu, 2.0))
    t = task(0, 0, K, inp=(0,), cpu=10.0, ca=(0,), bounds=bounds)
    return build([d0, d1], [t], K, pairs=[(0, 1)], cost=cost)


def unbounded(s):
    """Copy of ``s`` with every delay bound removed."""
    from dataclasses import replace

    inf = math.inf
    return s.replace(tasks=tuple(replace(t, delay_down=inf, delay_cpu=inf, delay_up=inf) for t in s.tasks))
