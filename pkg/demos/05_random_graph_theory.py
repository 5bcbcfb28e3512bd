"""
Expected energy on random graphs
================================

With capacities drawn from a law F and helpers joining with probability
alpha on a G(N, lam/N) graph, a task served by the strongest participating
neighbour costs W(alpha, lam) per unit of work on average.  Raising the
participation from alpha to r alpha gives the 3C reduction, largest at
alpha = 1/r and a particular mean degree.
"""
from edge3c import analysis as an

d = an.truncated_normal(2.0, 10.0, 1.0, 100.0)
print("W(0, 0) noncooperation:", an.expected_task_energy(d, 0.0, 0.0))
for alpha, lam in [(0.5, 2.0), (1.0, 5.0)]:
    w = an.expected_task_energy(d, alpha, lam)
    mc, se = an.monte_carlo_task_energy(d, alpha, lam, N=2000, trials=30)
    print(f"W({alpha}, {lam}) = {w:.5f}, simulated {mc:.5f} +- {se:.5f}")

print("largest normalised capacity reduction (sigma=10, support (1, 100)):")
for r in (1.5, 2.0, 3.0, 5.0):
    m = an.max_reduction_capacity(d, r)
    print(f"  r={r}: {100 * m.normalized:.2f}% at mean degree {m.lam:.3f}")

# the reduction depends on where the capacities sit, not only on their spread
for mu in (2.0, 50.0, 80.0):
    m = an.max_reduction_capacity(an.truncated_normal(mu, 10.0, 1.0, 100.0), 2.0)
    print(f"  mu={mu}: {100 * m.normalized:.2f}%")

print("largest normalised caching reduction:")
for r in (2.0, 3.0):
    print(f"  r={r}:", [round(an.max_reduction_caching(rho, r).normalized, 6) for rho in (0.1, 0.5, 0.9)])
