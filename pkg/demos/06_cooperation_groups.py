"""
Full cooperation against same-kind groups
=========================================

Earlier sharing schemes let devices cooperate only with devices running the
same kind of task.  Dropping the links between different kinds and solving
both versions of the same scenarios shows what sharing every resource buys,
and how the gain shrinks as D2D transfers get more expensive (beta).
"""
from edge3c.cli import coop_rows
from edge3c.scengen import GenConfig

rows = coop_rows(GenConfig(N=20, sigma=1.0), "beta", [0.0, 1.0, 2.0], rounds=10, seed=0)
print("beta  same-kind  full   reduction")
for _, beta, e12, e3, red in rows:
    print(f"{beta:4.1f}  {e12:9.3f}  {e3:5.3f}  {100 * red:5.1f}%")
