import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from builders import build, device, owner_only, task, two_devices
from edge3c.model import (
    Assignment,
    assignment_energy,
    assignment_from_dict,
    assignment_to_dict,
    check_feasible,
    dumps_scenario,
    loads_scenario,
    noncooperation_assignment,
    subtask_times,
    validate_scenario,
    worst_case_delays,
)
from edge3c.scengen import GenConfig, generate


def _with(a: Assignment, **arrays) -> Assignment:
    d = {k: np.array(v) for k, v in a.arrays().items()}
    d.update(arrays)
    return Assignment(**d)


# -- validate_scenario ---------------------------------------------------------


def test_well_formed_two_device_scenario_is_valid():
    assert validate_scenario(two_devices()) == []


def test_infeasible_local_execution_is_reported():
    # owner downloads one unit at 10 bits/s, i.e. 0.1 s, against a bound of 0.05
    K = 1
    s = build([device(0, [0], K)], [task(0, 0, K, inp=(0,), bounds=(0.05, math.inf, math.inf))], K)
    bad = validate_scenario(s)
    assert bad and all(v.startswith("local execution") for v in bad)


def test_zero_cpu_capacity_is_a_capacity_violation():
    K = 1
    s = build([device(0, [0], K, q=(10.0, 0.0, 4.0))], [task(0, 0, K, cpu=5.0)], K)
    assert any(v.startswith("capacity") for v in validate_scenario(s))


def test_owner_must_list_its_task():
    K = 1
    s = build([device(0, [], K)], [task(0, 0, K)], K)
    assert any("does not list" in v for v in validate_scenario(s))


# -- noncooperation_assignment -----------------------------------------------------


def test_noncooperation_single_device_downloads_uncached_input():
    s = owner_only()
    a = noncooperation_assignment(s)
    assert a.x_down[0, 0, 0] == 1 and a.x_cpu[0, 0] == 1
    assert a.z_in.sum() == a.z_up.sum() == a.z_ca.sum() == 0


def test_noncooperation_cached_input_needs_no_download():
    K = 1
    s = build([device(0, [0], K, cache=(0,))], [task(0, 0, K, inp=(0,))], K)
    a = noncooperation_assignment(s)
    assert a.x_down.sum() == 0 and a.x_in[0, 0, 0] == 1


def test_noncooperation_three_devices_is_feasible():
    s = generate(GenConfig(N=3, K=3, seed=11))
    assert check_feasible(s, noncooperation_assignment(s)) == []


# -- check_feasible ----------------------------------------------------------------


def test_double_cpu_allocation_violates_allocation():
    s = two_devices()
    a = noncooperation_assignment(s)
    bad = check_feasible(s, _with(a, x_cpu=[[1, 1]]))
    assert "cpu_once" in bad


def test_routing_over_missing_hop_breaks_flow_balance():
    # path 0 - 1 - 2; device 2 caches content 0, the task runs on device 0
    K = 1
    devs = [device(0, [0], K), device(1, [], K), device(2, [], K, cache=(0,))]
    s = build(devs, [task(0, 0, K, inp=(0,))], K, pairs=[(0, 1), (1, 2)])
    a = noncooperation_assignment(s)
    x_in = np.zeros((1, 1, 3), int)
    x_in[0, 0, 2] = 1
    z = np.zeros((1, 1, s.E), int)
    # only the 1 -> 0 hop is used, so device 1 forwards a copy it never received
    z[0, 0, s.graph.index[(1, 0)]] = 1
    bad = check_feasible(s, _with(a, x_in=x_in, x_down=np.zeros((1, 1, 3), int), z_in=z))
    assert bad == ["input_flow"]
    z[0, 0, s.graph.index[(2, 1)]] = 1
    assert check_feasible(s, _with(a, x_in=x_in, x_down=np.zeros((1, 1, 3), int), z_in=z)) == []


def test_delay_violation_is_reported_as_eq10():
    # 10 cycles at 10 cycles/s take 1 s against a 0.5 s bound
    s = two_devices(bounds=(math.inf, 0.5, math.inf))
    a = noncooperation_assignment(s)
    assert "delay" in check_feasible(s, a)


# -- times and delays ------------------------------------------------------------------


def test_download_time_sums_content_sizes():
    K = 3
    s = build([device(0, [0], K, q=(9.0, 10.0, 4.0))], [task(0, 0, K, inp=(0, 1, 2))], K, sizes=[1.0, 2.0, 6.0])
    t = subtask_times(s, noncooperation_assignment(s))
    assert t.down[0] == pytest.approx(1.0, rel=1e-15)


def test_empty_assignment_has_zero_times():
    s = owner_only()
    t = subtask_times(s, Assignment.zeros(s))
    assert (t.down[0], t.cpu[0], t.up[0]) == (0.0, 0.0, 0.0)


def test_cpu_time_direct_substitution():
    s = owner_only()
    assert subtask_times(s, noncooperation_assignment(s)).cpu[0] == 1.0


def test_all_cached_inputs_give_zero_download_delay():
    K = 1
    s = build([device(0, [0], K, cache=(0,))], [task(0, 0, K, inp=(0,))], K)
    assert worst_case_delays(s, noncooperation_assignment(s)).down[0] == 0.0


def test_download_delay_is_max_over_downloaders():
    # two helpers download one content each: 1/2.5 = 0.4 s and 1/(10/9) = 0.9 s
    K = 2
    devs = [device(0, [0], K, cache=(0, 1)), device(1, [], K, q=(2.5, 10, 4)), device(2, [], K, q=(10 / 9, 10, 4))]
    s = build(devs, [task(0, 0, K, inp=(0, 1))], K, pairs=[(0, 1), (0, 2)])
    x_in = np.zeros((1, 2, 3), int)
    x_in[0, 0, 1] = x_in[0, 1, 2] = 1
    a = _with(Assignment.zeros(s), x_in=x_in, x_down=x_in, x_cpu=[[1, 0, 0]])
    z = np.zeros((1, 2, s.E), int)
    z[0, 0, s.graph.index[(1, 0)]] = 1
    z[0, 1, s.graph.index[(2, 0)]] = 1
    a = _with(a, z_in=z)
    assert check_feasible(s, a) == []
    assert worst_case_delays(s, a).down[0] == pytest.approx(0.9, rel=1e-12)


# -- energy ------------------------------------------------------------------------


def test_owner_only_energy_breakdown():
    s = owner_only()
    e = assignment_energy(s, noncooperation_assignment(s))
    assert e.down[0] == pytest.approx(0.2) and e.cpu[0] == pytest.approx(1.0) and e.up[0] == pytest.approx(0.5)
    assert e.total == pytest.approx(1.7, rel=1e-15) and e.d2d[0] == 0.0


def test_empty_task_has_zero_energy():
    K = 1
    s = build([device(0, [0], K)], [task(0, 0, K)], K)
    assert assignment_energy(s, noncooperation_assignment(s)).total == 0.0


def test_single_relay_d2d_energy():
    s = two_devices(cost=0.8)
    a = noncooperation_assignment(s)
    z = np.zeros((1, 1, s.E), int)
    z[0, 0, 0] = 1
    e = assignment_energy(s, _with(a, z_in=z))
    assert e.d2d[0] == pytest.approx(0.016, rel=1e-12)


# -- properties ------------------------------------------------------------------------


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10_000), N=st.integers(1, 6))
def test_noncooperation_always_feasible(seed, N):
    s = generate(GenConfig(N=N, K=4, seed=seed))
    assert check_feasible(s, noncooperation_assignment(s)) == []


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_doubling_capacities_halves_times_and_energies(seed):
    s = generate(GenConfig(N=4, K=3, seed=seed))
    a = noncooperation_assignment(s)
    from dataclasses import replace

    fast = s.replace(
        devices=tuple(replace(d, down_cap=2 * d.down_cap, cpu_cap=2 * d.cpu_cap, up_cap=2 * d.up_cap) for d in s.devices)
    )
    t1, t2 = subtask_times(s, a), subtask_times(fast, a)
    for f in ("down", "cpu", "up"):
        np.testing.assert_allclose(getattr(t2, f), getattr(t1, f) / 2, rtol=1e-14)
    e1, e2 = assignment_energy(s, a), assignment_energy(fast, a)
    for f in ("down", "cpu", "up"):
        np.testing.assert_allclose(getattr(e2, f), getattr(e1, f) / 2, rtol=1e-14)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10_000), data=st.data())
def test_energy_invariant_under_device_relabeling(seed, data):
    from dataclasses import replace

    s = generate(GenConfig(N=4, K=3, seed=seed))
    perm = data.draw(st.permutations(range(s.N)))
    inv = np.argsort(perm)  # new id of old device n is inv[n]
    devs = [None] * s.N
    for n, d in enumerate(s.devices):
        devs[inv[n]] = replace(d, id=int(inv[n]))
    tasks = tuple(replace(t, owner=int(inv[t.owner])) for t in s.tasks)
    edges = tuple((int(inv[i]), int(inv[j])) for i, j in s.graph.edges)
    g = replace(s.graph, edges=edges)
    try:
        del g.__dict__["index"]
    except KeyError:
        pass
    s2 = s.replace(devices=tuple(devs), tasks=tasks, graph=g)
    assert validate_scenario(s2) == []
    e1 = assignment_energy(s, noncooperation_assignment(s)).total
    e2 = assignment_energy(s2, noncooperation_assignment(s2)).total
    assert e2 == pytest.approx(e1, rel=1e-13)


def test_cpu_delay_is_the_chosen_device_time():
    s = generate(GenConfig(N=5, K=3, seed=3))
    a = noncooperation_assignment(s)
    t = subtask_times(s, a)
    T = worst_case_delays(s, a)
    for i, task_ in enumerate(s.tasks):
        assert T.cpu[i] == t.cpu[task_.owner]


# -- serialization ------------------------------------------------------------------


def test_scenario_json_round_trip_is_identity():
    s = generate(GenConfig(N=5, K=4, seed=8))
    text = dumps_scenario(s)
    assert loads_scenario(text) == s
    assert dumps_scenario(loads_scenario(text)) == text


def test_infinite_bound_is_encoded_as_string():
    text = dumps_scenario(owner_only())
    assert '"inf"' in text


def test_assignment_dict_round_trip():
    s = generate(GenConfig(N=4, K=3, seed=2))
    a = noncooperation_assignment(s)
    assert assignment_from_dict(s, assignment_to_dict(s, a)) == a
