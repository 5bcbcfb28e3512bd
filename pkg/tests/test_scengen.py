import json

import numpy as np
import pytest
from scipy import stats

from edge3c.bb import branch_and_bound, enumerate_bruteforce
from edge3c.milp import build_opt_linear
from edge3c.model import (
    assignment_energy,
    check_feasible,
    dumps_scenario,
    noncooperation_assignment,
    validate_scenario,
    worst_case_delays,
)
from edge3c.scengen import (
    KINDS,
    GenConfig,
    ParamRanges,
    RetryExhausted,
    draw_parameter,
    generate,
    load_config,
    restrict_cooperation,
)


def test_single_device():
    s = generate(GenConfig(N=1, seed=3))
    assert s.N == 1 and s.S == 1 and s.E == 0
    assert validate_scenario(s) == []


def test_same_seed_gives_identical_json():
    cfg = GenConfig(N=9, seed=42)
    assert dumps_scenario(generate(cfg)) == dumps_scenario(generate(cfg))
    assert dumps_scenario(generate(GenConfig(N=9, seed=43))) != dumps_scenario(generate(cfg))


@pytest.mark.parametrize("seed", range(5))
def test_draws_stay_inside_their_ranges(seed):
    s = generate(GenConfig(N=15, sigma=4.0, seed=seed))
    R = ParamRanges()
    checks = [
        (s.q_down, R.q_down), (s.q_cpu, R.q_cpu), (s.q_up, R.q_up),
        (s.c_down, R.c_down), (s.c_cpu, R.c_cpu), (s.c_up, R.c_up),
        (np.asarray(s.graph.d2d_cap), R.q_d2d), (np.asarray(s.graph.d2d_cost), R.c_d2d),
    ]
    for vals, (a, b) in checks:
        assert np.all((vals > a) & (vals < b))
    cpu = s.d_cpu[s.d_cpu > 0]
    assert np.all((cpu > R.d_cpu[0]) & (cpu < R.d_cpu[1]))


@pytest.mark.parametrize("seed", range(5))
def test_generated_scenarios_admit_local_execution(seed):
    s = generate(GenConfig(N=12, seed=seed))
    assert validate_scenario(s) == []
    assert check_feasible(s, noncooperation_assignment(s)) == []
    assert [t.owner for t in s.tasks] == list(range(s.N))
    assert {t.kind for t in s.tasks} <= set(KINDS)


def test_task_shapes():
    s = generate(GenConfig(N=30, K=8, seed=1))
    for t, row_in, row_up, row_ca, cpu in zip(s.tasks, s.d_in, s.d_up, s.d_ca, s.d_cpu):
        if t.kind == "analysis":
            assert cpu > 0 and row_in.any() and (row_up.any() or row_ca.any())
        else:
            assert cpu == 0 and not row_up.any() and np.array_equal(row_in > 0, row_ca > 0)
        if t.kind == "sharing":
            assert not row_in[3:].any()


def test_beta_ties_d2d_energy_to_the_sender():
    s = generate(GenConfig(N=8, p=0.6, beta=0.5, seed=2))
    for (i, _), c in zip(s.graph.edges, s.graph.d2d_cost):
        assert c == pytest.approx(0.5 * s.c_down[i], rel=1e-15)


def test_edge_density_is_p():
    # the edge count of each draw is Binomial(N(N-1)/2, p)
    N, p, draws = 8, 0.3, 1000
    M = N * (N - 1) // 2
    counts = np.array([generate(GenConfig(N=N, K=2, p=p, seed=k)).E // 2 for k in range(draws)])
    edges = np.arange(M + 1)
    pmf = stats.binom.pmf(edges, M, p)
    # merge the tails so every expected bin count is at least 5
    bins = [(0, 4)] + [(m, m) for m in range(5, 13)] + [(13, M)]
    obs = [np.sum((counts >= lo) & (counts <= hi)) for lo, hi in bins]
    exp = [draws * pmf[lo:hi + 1].sum() for lo, hi in bins]
    assert min(exp) >= 5
    assert stats.chisquare(obs, exp).pvalue > 0.05


def test_spread_increases_the_sample_variance():
    variances = [np.var(draw_parameter(np.random.default_rng(11), (0.0, 10.0), s, 10**4)) for s in (0.5, 1, 2, 4)]
    assert np.all(np.diff(variances) > 0)
    assert variances[-1] == pytest.approx(100 / 12, rel=0.03)


def test_reference_width_scales_the_spread():
    narrow = np.var(draw_parameter(np.random.default_rng(0), (0.0, 10.0), 1.0, 10**4, ref_width=10.0))
    wide = np.var(draw_parameter(np.random.default_rng(0), (0.0, 10.0), 1.0, 10**4, ref_width=1.0))
    assert narrow < wide


@pytest.mark.parametrize(
    "bad",
    [dict(p=0.0), dict(p=1.5), dict(beta=-1.0), dict(weights=(0.5, 0.5, 0.5)), dict(slack=(0.5, 2.0)), dict(N=0)],
)
def test_invalid_configs(bad):
    with pytest.raises(ValueError):
        GenConfig(**bad)


def test_invalid_ranges():
    with pytest.raises(ValueError):
        ParamRanges(q_up=(4.0, 4.0))


def test_retries_are_bounded(monkeypatch):
    import edge3c.scengen as sg

    monkeypatch.setattr(sg, "validate_scenario", lambda s: ["always broken"])
    with pytest.raises(RetryExhausted):
        generate(GenConfig(N=2))


# -- cooperation groups --------------------------------------------------------------------


def test_same_kind_devices_keep_every_link():
    s = generate(GenConfig(N=6, p=0.8, weights=(0.0, 1.0, 0.0), seed=4))
    assert restrict_cooperation(s, "1C2C").graph.edges == s.graph.edges
    assert restrict_cooperation(s, "3C") is s


def test_mixed_pair_loses_its_link():
    for seed in range(50):
        s = generate(GenConfig(N=2, p=1.0, seed=seed))
        if s.tasks[0].kind != s.tasks[1].kind:
            break
    assert s.E == 2
    assert restrict_cooperation(s, "1C2C").E == 0


def test_unknown_mode():
    with pytest.raises(ValueError):
        restrict_cooperation(generate(GenConfig(N=2)), "2C")


@pytest.mark.parametrize("seed", range(8))
def test_full_cooperation_never_costs_more(seed):
    s = generate(GenConfig(N=4, K=3, p=0.8, seed=seed))
    e3 = enumerate_bruteforce(s)[1]
    e12 = branch_and_bound(build_opt_linear(restrict_cooperation(s, "1C2C"))).objective
    nc = assignment_energy(s, noncooperation_assignment(s)).total
    assert e3 <= e12 * (1 + 1e-9) <= nc * (1 + 2e-9)


# -- config files -----------------------------------------------------------------------


def test_load_json_and_toml(tmp_path):
    j = tmp_path / "c.json"
    j.write_text(json.dumps({"N": 5, "beta": 0.2, "slack": [1, 2], "ranges": {"q_up": [1, 3]}}))
    cfg = load_config(j)
    assert cfg.N == 5 and cfg.beta == 0.2 and cfg.slack == (1, 2) and cfg.ranges.q_up == (1, 3)
    t = tmp_path / "c.toml"
    t.write_text('N = 5\nbeta = 0.2\nslack = [1, 2]\n[ranges]\nq_up = [1, 3]\n')
    assert load_config(t) == cfg


def test_unknown_config_key(tmp_path):
    j = tmp_path / "c.json"
    j.write_text(json.dumps({"N": 5, "colour": "red"}))
    with pytest.raises(ValueError, match="colour"):
        load_config(j)


def test_infinite_bounds_only_where_the_local_time_is_zero():
    s = generate(GenConfig(N=12, seed=8))
    base = worst_case_delays(s, noncooperation_assignment(s)).as_array()
    assert np.array_equal(~np.isfinite(s.bounds), base == 0)
    finite = np.isfinite(s.bounds)
    assert np.all(s.bounds[finite] >= base[finite]) and np.all(s.bounds[finite] <= 3 * base[finite] * (1 + 1e-12))
