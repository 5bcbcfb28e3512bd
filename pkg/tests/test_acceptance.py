"""Acceptance criteria, one PASS/FAIL line each.

Run with ``pytest -v tests/test_acceptance.py``; the verdict lines are
printed to the terminal even when output capture is on.  A criterion that
fails is reported as it measured, never relaxed.
"""
import csv
import time

import numpy as np
import pytest

from builders import unbounded
from edge3c import analysis as an
from edge3c.bb import branch_and_bound, enumerate_bruteforce
from edge3c.cli import main
from edge3c.heuristic import run_heuristic
from edge3c.milp import build_opt_linear
from edge3c.model import assignment_energy, check_feasible, noncooperation_assignment
from edge3c.scengen import GenConfig, generate

# node budget per exact solve in the device-count sweep; searches that run
# out report their best schedule and proven bound
SCALING_NODE_LIMIT = 200
SCALING_N = (6, 12, 18, 24, 27)

_heuristic_runs: list = []


@pytest.fixture
def report(capsys):
    def emit(num, ok, detail, table=None):
        with capsys.disabled():
            print(f"\n{'PASS' if ok else 'FAIL'} criterion {num}: {detail}", flush=True)
            if table is not None:
                print(table, end="", flush=True)
        return ok

    return emit


def _csv(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def _tiny(seed):
    rng = np.random.default_rng([seed, 1])
    return generate(GenConfig(N=int(rng.integers(1, 5)), K=int(rng.integers(1, 4)), p=0.6, seed=seed))


def test_criterion_01_oracle_equivalence(report):
    t0 = time.perf_counter()
    worst, mismatches = 0.0, 0
    for seed in range(100):
        s = _tiny(seed)
        e_bb = branch_and_bound(build_opt_linear(s)).objective
        e_bf = enumerate_bruteforce(s)[1]
        rel = abs(e_bb - e_bf) / max(abs(e_bf), 1e-300) if e_bf else abs(e_bb)
        worst = max(worst, rel)
        mismatches += rel > 1e-9
    dt = time.perf_counter() - t0
    ok = mismatches == 0 and dt < 300
    assert report(1, ok, f"100 scenarios, {mismatches} mismatches, worst rel diff {worst:.2e}, {dt:.0f} s (< 300 s)")


def test_criterion_02_unbounded_heuristic_is_optimal(report):
    bad_obj, bad_it, worst = 0, 0, 0.0
    for seed in range(50):
        s = unbounded(generate(GenConfig(N=1 + seed % 10, seed=2000 + seed)))
        h = run_heuristic(s)
        e = branch_and_bound(build_opt_linear(s)).objective
        rel = abs(h.energy - e) / max(e, 1e-300) if e else abs(h.energy)
        worst = max(worst, rel)
        bad_obj += rel > 1e-9
        bad_it += h.iterations != 1
    ok = bad_obj == 0 and bad_it == 0
    assert report(2, ok, f"50 scenarios N<=10, {bad_obj} objective mismatches (worst {worst:.2e}), {bad_it} runs with >1 iteration")


def _criterion_3_runs():
    if not _heuristic_runs:
        for seed in range(200):
            s = generate(GenConfig(N=2 + seed % 14, seed=3000 + seed))
            _heuristic_runs.append((s, run_heuristic(s)))
    return _heuristic_runs


def test_criterion_03_heuristic_feasible_and_bounded(report):
    above, infeasible, too_long = 0, 0, 0
    for s, h in _criterion_3_runs():
        nc = assignment_energy(s, noncooperation_assignment(s)).total
        above += h.energy > nc * (1 + 1e-9)
        infeasible += bool(check_feasible(s, h.assignment))
        too_long += h.iterations > max(1, s.S * (s.N - 1))
    ok = above == 0 and infeasible == 0 and too_long == 0
    iters = max(h.iterations for _, h in _criterion_3_runs())
    assert report(
        3, ok,
        f"200 scenarios N<=15, {above} above noncooperation, {infeasible} infeasible, {too_long} over S(N-1) iterations (max {iters})",
    )


def test_criterion_04_relaxation_integrality(report):
    fr = [f for _, h in _criterion_3_runs() for f in h.max_fraction]
    bad = [f for f in fr if f > 1e-6]
    ok = not bad
    detail = f"{len(fr)} relaxation solves, {len(bad)} fractional"
    if bad:
        detail += f" (largest distance to an integer {max(bad):.3g}; the relaxation is not totally unimodular)"
    assert report(4, ok, detail)


def test_criterion_05_closed_form_vs_simulation(report):
    t0 = time.perf_counter()
    dists = [an.uniform(1.0, 2.0), an.truncated_normal(2.0, 2.0, 1.0, 10.0)]
    worst, fails = 0.0, 0
    for d in dists:
        for alpha in (0.25, 0.5, 1.0):
            for lam in (1.0, 5.0, 10.0):
                w = an.expected_task_energy(d, alpha, lam)
                mc, se = an.monte_carlo_task_energy(d, alpha, lam, N=2000, trials=50, seed=5)
                tol = max(3 * se, 0.02 * abs(w))
                worst = max(worst, abs(w - mc) / tol)
                fails += abs(w - mc) > tol
    dt = time.perf_counter() - t0
    ok = fails == 0 and dt < 120
    assert report(5, ok, f"18 points, {fails} outside max(3 se, 2%), worst |diff|/tol {worst:.2f}, {dt:.0f} s (< 120 s)")


def test_criterion_06_caching_reduction(report):
    v = an.max_reduction_caching(0.5, 2.0).normalized
    vals = [an.max_reduction_caching(rho, 2.0).normalized for rho in (0.1, 0.5, 0.9)]
    spread = max(vals) - min(vals)
    ok = abs(v - 0.25) <= 1e-9 and spread <= 1e-12
    assert report(6, ok, f"normalized reduction at r=2 is {v:.12f}, spread over cache ratios {spread:.1e}")


def test_criterion_07_capacity_reduction_curves(report):
    r_grid = np.arange(1.0, 5.0001, 0.5)
    curve_r = [an.max_reduction_capacity(an.truncated_normal(2.0, 10.0, 1.0, 100.0), r).normalized for r in r_grid]
    curve_s = [an.max_reduction_capacity(an.truncated_normal(2.0, sg, 1.0, 100.0), 2.0).normalized for sg in (2, 4, 6, 8, 10)]
    curve_mu = [an.max_reduction_capacity(an.truncated_normal(mu, 10.0, 1.0, 100.0), 2.0).normalized for mu in (2, 50, 80)]
    mono_r = bool(np.all(np.diff(curve_r) >= -1e-12))
    mono_s = bool(np.all(np.diff(curve_s) >= -1e-12))
    mu_spread = max(curve_mu) - min(curve_mu)
    spot = curve_r[2]
    parts = [
        ("nondecreasing in r", mono_r),
        ("nondecreasing in sigma", mono_s),
        (f"mu-invariant within 1e-3 (spread {mu_spread:.4f}: " + "/".join(f"{v:.4f}" for v in curve_mu) + ")", mu_spread <= 1e-3),
        (f"value {spot:.5f} in [0.15, 0.25]", 0.15 <= spot <= 0.25),
    ]
    ok = all(p for _, p in parts)
    assert report(7, ok, "; ".join(f"{name} {'ok' if p else 'NO'}" for name, p in parts))


@pytest.mark.slow
def test_criterion_08_cooperation_groups_over_beta(report, tmp_path):
    out = tmp_path / "coop.csv"
    t0 = time.perf_counter()
    assert main(["compare-3c", "--grid", "beta", "--values", "0,0.5,1,1.5,2", "--N", "20", "--p", "0.3",
                 "--rounds", "100", "--seed", "0", "--solver", "heu", "--out", str(out)]) == 0
    dt = time.perf_counter() - t0
    red = [float(r["reduction"]) for r in _csv(out)]
    mono = bool(np.all(np.diff(red) <= 1e-12))
    ok = mono and red[0] >= 0.60 and red[-1] >= 0.15 and dt < 1800
    pct = "/".join(f"{100 * v:.1f}" for v in red)
    assert report(8, ok, f"reduction {pct}% over beta 0..2, nonincreasing {mono}, {dt / 60:.1f} min (< 30 min)",
                  out.read_text())


def _fit_r2(x, y):
    coef = np.polyfit(x, y, 1)
    resid = y - np.polyval(coef, x)
    return coef[0], 1 - resid @ resid / np.sum((y - y.mean()) ** 2)


@pytest.mark.slow
def test_criterion_09_scaling(report, tmp_path):
    out = tmp_path / "scaling.csv"
    assert main(["compare-scaling", "--n-values", ",".join(map(str, SCALING_N)), "--p", "0.3", "--rounds", "20",
                 "--seed", "0", "--node-limit", str(SCALING_NODE_LIMIT), "--out", str(out)]) == 0
    rows = _csv(out)
    N = np.array([float(r["N"]) for r in rows])
    t_heu = np.array([float(r["time_heu_s"]) for r in rows])
    t_opt = np.array([float(r["time_opt_s"]) for r in rows])
    solved = [float(r["solved"]) for r in rows]
    slope_heu, _ = _fit_r2(np.log(N), np.log(t_heu))
    _, r2_power = _fit_r2(np.log(N), np.log(t_opt))
    _, r2_exp = _fit_r2(N, np.log(t_opt))
    last = rows[-1]
    gap, gap_ub = float(last["gap"]), float(last["gap_bound"])
    # gap uses the best schedule found (a lower estimate of the true gap when
    # searches were cut short); gap_bound uses the proven bound (an upper one)
    gap_ok = gap_ub <= 0.20 if solved[-1] < 1 else gap <= 0.20
    parts = [
        (f"heuristic time exponent {slope_heu:.2f} <= 3", slope_heu <= 3),
        (f"exact time fits exponential better (R2 {r2_exp:.3f} vs power {r2_power:.3f})", r2_exp > r2_power),
        (f"gap at N=27 {100 * gap:.1f}% (proven upper estimate {100 * gap_ub:.1f}%) <= 20%", gap_ok),
    ]
    ok = all(p for _, p in parts)
    frac = "/".join(f"{v:.2f}" for v in solved)
    detail = "; ".join(f"{name} {'ok' if p else 'NO'}" for name, p in parts)
    assert report(9, ok, f"{detail}; exact searches finished within {SCALING_NODE_LIMIT} nodes: {frac}",
                  out.read_text())


def test_criterion_10_determinism(report, tmp_path):
    runs = {
        "theory": ["theory", "--curve", "capacity", "--sigma", "2,4,6,8,10"],
        "compare-3c": ["compare-3c", "--grid", "beta", "--values", "0,1,2", "--N", "20", "--rounds", "5", "--seed", "0"],
        "compare-scaling": ["compare-scaling", "--n-values", "6,12", "--rounds", "3", "--seed", "0", "--node-limit",
                            str(SCALING_NODE_LIMIT), "--no-timing"],
    }
    same = {}
    for name, argv in runs.items():
        a, b = tmp_path / f"{name}.a.csv", tmp_path / f"{name}.b.csv"
        assert main(argv + ["--out", str(a)]) == 0 and main(argv + ["--out", str(b)]) == 0
        same[name] = a.read_bytes() == b.read_bytes()
    ok = all(same.values())
    assert report(10, ok, ", ".join(f"{k} {'identical' if v else 'DIFFERENT'}" for k, v in same.items())
                  + " (wall-time columns excluded)")
