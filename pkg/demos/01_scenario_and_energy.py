"""
Scenarios, schedules and their energy
=====================================

A scenario lists devices (capacities, energy prices, cache), tasks (input
contents, CPU demand, output contents, delay bounds) and the D2D links.  A
schedule says which device downloads, computes and uploads each part of a
task and how contents travel over the links.
"""
import numpy as np

from edge3c import Content, D2DGraph, Device, Scenario, Task
from edge3c.model import (
    Assignment,
    assignment_energy,
    check_feasible,
    noncooperation_assignment,
    worst_case_delays,
)
from edge3c.scengen import GenConfig, generate

# two devices, one content; device 1 caches it and has a cheap processor
d0 = Device(0, (0,), down_cap=10.0, cpu_cap=10.0, up_cap=4.0, cache=(0,), c_down=2.0, c_cpu=1.0, c_up=2.0)
d1 = Device(1, (), down_cap=10.0, cpu_cap=10.0, up_cap=4.0, cache=(1,), c_down=2.0, c_cpu=0.1, c_up=2.0)
t0 = Task(0, 0, input=(1,), cpu_demand=10.0, upload=(0,), cache_out=(1,), delay_down=0.5, delay_cpu=2.0)
s = Scenario((Content(0, 1.0),), (d0, d1), (t0,), D2DGraph.symmetric([(0, 1)], 50.0, 0.8))

# running everything on the owner
local = noncooperation_assignment(s)
e = assignment_energy(s, local)
print("local schedule")
print("  energy (down, cpu, up, d2d):", e.down, e.cpu, e.up, e.d2d, "total", e.total)
print("  worst-case delays:", worst_case_delays(s, local).as_array())

# computing on device 1, which already holds the input, and sending the
# cached output back over the link
z = np.zeros((1, 1, s.E), int)
z[0, 0, s.graph.index[(1, 0)]] = 1
x_in = np.zeros((1, 1, 2), int)
x_in[0, 0, 1] = 1
helped = Assignment(
    x_in=x_in,
    x_down=np.zeros((1, 1, 2), int),
    x_cpu=np.array([[0, 1]]),
    x_up=np.zeros((1, 1, 2), int),
    z_in=np.zeros((1, 1, s.E), int),
    z_up=np.zeros((1, 1, s.E), int),
    z_ca=z,
)
print("helped schedule")
print("  violated constraints:", check_feasible(s, helped) or "none")
print("  energy:", assignment_energy(s, helped).total)

# random scenarios come from the generator; the local schedule always meets
# the delay bounds
g = generate(GenConfig(N=8, seed=1))
print("random scenario: N=%d, links=%d, task kinds %s" % (g.N, g.E // 2, [t.kind for t in g.tasks]))
print("  local energy", assignment_energy(g, noncooperation_assignment(g)).total)
