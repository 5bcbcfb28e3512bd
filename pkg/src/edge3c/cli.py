"""Command line harness: ``edge3c {gen,solve,compare-scaling,compare-3c,theory}``.

CSV output has a header row and 9 significant digits; single runs print
JSON.  ``EDGE3C_THREADS`` caps the number of worker processes used for the
rounds of a sweep; rows are always written in (grid point, round) order.
Exit status 2 means the input could not be parsed or validated, 3 means a
solver limit was hit.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import fields, replace

import numpy as np

from . import analysis
from .bb import NodeLimit, branch_and_bound
from .heuristic import run_heuristic
from .lp import IterationLimit
from .milp import InvalidScenario, build_opt_linear
from .model import (
    assignment_energy,
    assignment_to_dict,
    check_feasible,
    dumps_scenario,
    loads_scenario,
    noncooperation_assignment,
    validate_scenario,
)
from .scengen import GenConfig, load_config, generate, restrict_cooperation

EXIT_INPUT = 2
EXIT_LIMIT = 3
DIGITS = 9


class InputError(Exception):
    pass


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    if isinstance(v, str):
        return v
    v = float(v)
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return f"{v:.{DIGITS}g}"


def write_csv(header, rows, out) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    text = buf.getvalue()
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(out, "w", newline="") as fh:
            fh.write(text)
    return text


def round_seed(seed: int, index: int) -> int:
    """Seed of round ``index``; shared by every grid point of a sweep."""
    return int(np.random.SeedSequence([seed, index]).generate_state(1)[0])


def _threads() -> int:
    raw = os.environ.get("EDGE3C_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise InputError(f"EDGE3C_THREADS must be an integer, got {raw!r}")
    return max(1, n)


def _map(fn, jobs):
    n = _threads()
    if n == 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=n) as ex:
        return list(ex.map(fn, jobs))


def _base_config(args) -> GenConfig:
    cfg = load_config(args.config) if getattr(args, "config", None) else GenConfig()
    over = {}
    for f in fields(GenConfig):
        v = getattr(args, f.name, None)
        if v is not None:
            over[f.name] = v
    return replace(cfg, **over) if over else cfg


def _solve(s, solver: str, node_limit: int):
    if solver == "noncoop":
        a = noncooperation_assignment(s)
        return a, assignment_energy(s, a).total, None
    if solver == "heu":
        r = run_heuristic(s)
        return r.assignment, r.energy, r.iterations
    if solver == "opt":
        r = branch_and_bound(build_opt_linear(s), node_limit=node_limit)
        return r.assignment, assignment_energy(s, r.assignment).total, None
    raise InputError(f"unknown solver {solver!r}")


# ---------------------------------------------------------------------------
# subcommands


def cmd_gen(args) -> int:
    s = generate(_base_config(args))
    text = dumps_scenario(s)
    if args.out in (None, "-"):
        sys.stdout.write(text + "\n")
    else:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    return 0


def cmd_solve(args) -> int:
    try:
        with open(args.scenario) as fh:
            s = loads_scenario(fh.read())
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise InputError(f"cannot read scenario: {exc}")
    bad = validate_scenario(s)
    if bad:
        raise InputError("invalid scenario: " + "; ".join(bad))
    t0 = time.perf_counter()
    a, energy, iterations = _solve(s, args.solver, args.node_limit)
    ms = (time.perf_counter() - t0) * 1e3
    rec = {"solver": args.solver, "objective": energy, "wall_time_ms": ms}
    if iterations is not None:
        rec["iterations"] = iterations
    rec["feasible"] = not check_feasible(s, a)
    if args.assignment_out:
        with open(args.assignment_out, "w") as fh:
            json.dump(assignment_to_dict(s, a), fh, indent=1)
        rec["assignment_file"] = args.assignment_out
    text = json.dumps(rec, indent=1)
    if args.out in (None, "-"):
        print(text)
    else:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    return 0


def _scaling_round(job):
    cfg, node_limit = job
    s = generate(cfg)
    nc = assignment_energy(s, noncooperation_assignment(s)).total
    t0 = time.perf_counter()
    h = run_heuristic(s)
    t_heu = time.perf_counter() - t0
    t0 = time.perf_counter()
    try:
        o = branch_and_bound(build_opt_linear(s), node_limit=node_limit, incumbent=h.assignment)
        e_opt = e_lb = assignment_energy(s, o.assignment).total
        solved = 1.0
    except NodeLimit as exc:
        # out of budget: keep the incumbent and the proven bound
        e_opt = assignment_energy(s, exc.assignment).total
        e_lb = exc.lower_bound
        solved = 0.0
    t_opt = time.perf_counter() - t0
    return solved, e_opt / nc, e_lb / nc, h.energy / nc, t_opt, t_heu


SCALING_HEADER = [
    "N",
    "rounds",
    "solved",
    "energy_opt",
    "energy_opt_lb",
    "energy_heu",
    "gap",
    "gap_bound",
    "time_opt_s",
    "time_heu_s",
]


def scaling_rows(base: GenConfig, n_values, rounds: int, seed: int, node_limit: int, timing: bool = True):
    """One row per device count.

    ``energy_opt`` is the exact optimum when every round finished within
    ``node_limit`` (``solved == 1``); otherwise unfinished rounds contribute
    their best schedule and ``energy_opt_lb`` their proven lower bound, so
    ``gap_bound`` is a guaranteed upper estimate of the true gap.
    """
    jobs = [(replace(base, N=int(n), seed=round_seed(seed, r)), node_limit) for n in n_values for r in range(rounds)]
    res = _map(_scaling_round, jobs)
    rows = []
    for i, n in enumerate(n_values):
        block = np.array(res[i * rounds : (i + 1) * rounds], dtype=float)
        solved, e_opt, e_lb, e_heu, t_opt, t_heu = block.mean(axis=0)
        row = [int(n), rounds, solved, e_opt, e_lb, e_heu, (e_heu - e_opt) / e_opt, (e_heu - e_lb) / e_lb]
        if timing:
            row += [t_opt, t_heu]
        rows.append(row)
    return rows


def cmd_compare_scaling(args) -> int:
    if args.n_values:
        n_values = args.n_values
    else:
        n_values = list(range(args.n_min, args.n_max + 1, args.step))
        if n_values and n_values[-1] != args.n_max:
            n_values.append(args.n_max)
    if not n_values or min(n_values) < 1:
        raise InputError("empty or invalid device-count grid")
    rows = scaling_rows(_base_config(args), n_values, args.rounds, args.seed, args.node_limit, not args.no_timing)
    header = SCALING_HEADER if not args.no_timing else SCALING_HEADER[:8]
    write_csv(header, rows, args.out)
    return 0


def _coop_round(job):
    cfg, solver, node_limit = job
    s = generate(cfg)
    nc = assignment_energy(s, noncooperation_assignment(s)).total
    out = []
    for mode in ("1C2C", "3C"):
        _, e, _ = _solve(restrict_cooperation(s, mode), solver, node_limit)
        out.append(e / nc)
    return tuple(out)


COOP_HEADER = ["grid", "value", "energy_1c2c", "energy_3c", "reduction"]


def coop_rows(base: GenConfig, grid: str, values, rounds: int, seed: int, solver: str = "heu", node_limit: int = 1_000_000):
    if grid not in ("beta", "sigma"):
        raise InputError(f"unknown grid {grid!r}")
    jobs = [
        (replace(base, **{grid: float(v)}, seed=round_seed(seed, r)), solver, node_limit)
        for v in values
        for r in range(rounds)
    ]
    res = _map(_coop_round, jobs)
    rows = []
    for i, v in enumerate(values):
        block = np.array(res[i * rounds : (i + 1) * rounds], dtype=float)
        e1, e3 = block.mean(axis=0)
        rows.append([grid, float(v), e1, e3, (e1 - e3) / e1])
    return rows


def cmd_compare_3c(args) -> int:
    base = _base_config(args)
    if args.grid == "sigma" and args.beta is None and base.beta is None:
        base = replace(base, beta=0.5)
    if args.grid == "beta" and args.sigma is None:
        base = replace(base, sigma=1.0)
    values = args.values or ([0.0, 0.5, 1.0, 1.5, 2.0] if args.grid == "beta" else [0.5, 1.0, 2.0, 4.0])
    rows = coop_rows(base, args.grid, values, args.rounds, args.seed, args.solver, args.node_limit)
    write_csv(COOP_HEADER, rows, args.out)
    return 0


THEORY_HEADER = ["r", "sigma_or_ratio", "normalized_reduction", "lambda_tilde"]


def cmd_theory(args) -> int:
    r_grid = args.r_grid or list(np.round(np.arange(1.0, 5.0001, 0.5), 10))
    if args.curve == "capacity":
        sigmas = args.sigma or [2.0, 4.0, 6.0, 8.0, 10.0]
        params = [(args.mu, sg, args.a, args.b) for sg in sigmas]
    else:
        params = args.ratios or [0.1, 0.5, 0.9]
    rows = analysis.reduction_curve(args.curve, r_grid, params)
    write_csv(THEORY_HEADER, rows, args.out)
    return 0


# ---------------------------------------------------------------------------
# parser


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _ints(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _gen_flags(p):
    p.add_argument("--config", help="GenConfig as JSON or TOML")
    p.add_argument("--p", type=float)
    p.add_argument("--sigma", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--K", type=int)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="edge3c", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="cmd", required=True)

    g = sub.add_parser("gen", help="draw a random scenario")
    _gen_flags(g)
    g.add_argument("--N", type=int)
    g.add_argument("--seed", type=int)
    g.add_argument("--out")
    g.set_defaults(fn=cmd_gen)

    s = sub.add_parser("solve", help="solve one scenario file")
    s.add_argument("scenario")
    s.add_argument("--solver", choices=("opt", "heu", "noncoop"), default="heu")
    s.add_argument("--assignment-out")
    s.add_argument("--node-limit", type=int, default=1_000_000)
    s.add_argument("--out")
    s.set_defaults(fn=cmd_solve)

    c = sub.add_parser("compare-scaling", help="exact vs heuristic over device counts")
    _gen_flags(c)
    c.add_argument("--n-min", type=int, default=6)
    c.add_argument("--n-max", type=int, default=27)
    c.add_argument("--step", type=int, default=6)
    c.add_argument("--n-values", type=_ints)
    c.add_argument("--rounds", type=int, default=100)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--node-limit", type=int, default=1_000_000)
    c.add_argument("--no-timing", action="store_true", help="omit wall-time columns")
    c.add_argument("--out")
    c.set_defaults(fn=cmd_compare_scaling)

    t = sub.add_parser("compare-3c", help="1C/2C vs 3C cooperation over a beta or sigma grid")
    _gen_flags(t)
    t.add_argument("--grid", choices=("beta", "sigma"), default="beta")
    t.add_argument("--values", type=_floats)
    t.add_argument("--N", type=int)
    t.add_argument("--rounds", type=int, default=100)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--solver", choices=("heu", "opt"), default="heu")
    t.add_argument("--node-limit", type=int, default=1_000_000)
    t.add_argument("--out")
    t.set_defaults(fn=cmd_compare_3c)

    th = sub.add_parser("theory", help="largest 3C reduction curves")
    th.add_argument("--curve", choices=("capacity", "caching"), default="capacity")
    th.add_argument("--r-grid", type=_floats)
    th.add_argument("--mu", type=float, default=2.0)
    th.add_argument("--sigma", type=_floats)
    th.add_argument("--a", type=float, default=1.0)
    th.add_argument("--b", type=float, default=100.0)
    th.add_argument("--ratios", type=_floats)
    th.add_argument("--out")
    th.set_defaults(fn=cmd_theory)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    for name in ("rounds",):
        if getattr(args, name, 1) is not None and getattr(args, name, 1) < 1:
            ap.error(f"--{name} must be positive")
    try:
        return args.fn(args)
    except (InputError, InvalidScenario, ValueError) as exc:
        print(f"edge3c: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (NodeLimit, IterationLimit) as exc:
        print(f"edge3c: solver limit: {exc}", file=sys.stderr)
        return EXIT_LIMIT


if __name__ == "__main__":
    sys.exit(main())
