"""
Exact solver against the heuristic as the network grows
=======================================================

The exact search grows quickly with the number of devices while the
heuristic stays a handful of LP solves.  Searches that hit the node budget
report their best schedule and a proven lower bound, so the gap is known
to lie between ``gap`` and ``gap_bound``.
"""
from edge3c.cli import SCALING_HEADER, scaling_rows
from edge3c.scengen import GenConfig

rows = scaling_rows(GenConfig(), [4, 6, 8], rounds=4, seed=0, node_limit=300)
print(" ".join(f"{h:>13}" for h in SCALING_HEADER))
for r in rows:
    print(" ".join(f"{v:13.4g}" for v in r))
