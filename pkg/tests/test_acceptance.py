"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with `pytest tests/test_acceptance.py -v -s` to see the per-criterion
lines as they complete.  Numeric tolerances are fixed here, not configurable.
"""

import cmath
import filecmp
import itertools
import math
import time
import numpy as np

from rephase import baselines as bl
from rephase import cli
from rephase import dbfoa
from rephase import experiments
from rephase import initializer
from rephase import loadflow as lf
from rephase import netmodel as nm
from rephase import objective as obj

from conftest import desk_network, flat_snapshot, random_radial_network


def report(name: str, passed: bool, detail: str = ""):
    print(f"ACCEPTANCE {name}: {'PASS' if passed else 'FAIL'}  {detail}")
    assert passed, f"{name} failed: {detail}"


def test_01_penalty_correctness():
    """Both penalty functions match their piecewise definitions exactly on a
    grid spanning every branch, including the boundary points."""
    vuf_max, v_min, v_max = 1.0, 0.94, 1.06
    vuf_grid = np.concatenate([np.linspace(0.0, 3.0, 994), [vuf_max, 0.0]])
    ok = True
    for v in vuf_grid:
        expected = v - vuf_max if v > vuf_max else 0.0
        ok &= obj.penalty_vuf(float(v), vuf_max) == expected
    v_grid = np.concatenate([np.linspace(0.5, 1.5, 996), [v_min, v_max, 0.94, 1.06]])
    for v in v_grid:
        if v < v_min:
            expected = v_min - v
        elif v > v_max:
            expected = v - v_max
        else:
            expected = 0.0
        ok &= obj.penalty_voltage(float(v), v_min, v_max) == expected
    report("1 penalty-correctness", ok, f"{len(vuf_grid) + len(v_grid)} grid points, exact")


def test_02_sequence_and_vuf():
    balanced = (
        cmath.rect(1, 0), cmath.rect(1, math.radians(-120)), cmath.rect(1, math.radians(120))
    )
    v0, vp, vm = lf.sequence_components(*balanced)
    ok = lf.vuf(vp, vm) <= 1e-12

    reversed_set = (
        cmath.rect(1, 0), cmath.rect(1, math.radians(120)), cmath.rect(1, math.radians(-120))
    )
    _, vp_r, _ = lf.sequence_components(*reversed_set)
    ok &= abs(vp_r) <= 1e-12

    # magnitude-unbalance case, expected value from direct evaluation of the
    # transform: |v-| = |1.05 + 0.95∠120° + 1.00∠-120°| / 3 = 0.0288675,
    # giving VUF = 2.887% (not the 3x value sometimes quoted for this case)
    case = (1.05, cmath.rect(0.95, math.radians(-120)), cmath.rect(1.00, math.radians(120)))
    _, vp_c, vm_c = lf.sequence_components(*case)
    vuf_c = lf.vuf(vp_c, vm_c)
    ok &= abs(vuf_c - 2.8867513) <= 0.01
    ok &= abs(abs(vm_c) - 0.0288675) <= 1e-4

    rng = np.random.default_rng(1)
    for _ in range(200):
        vals = [cmath.rect(rng.uniform(0.2, 2), rng.uniform(-math.pi, math.pi))
                for _ in range(3)]
        back = lf.inverse_sequence_components(*lf.sequence_components(*vals))
        ok &= max(abs(a - b) for a, b in zip(vals, back)) <= 1e-12
    report("2 sequence-vuf", ok, f"magnitude case VUF = {vuf_c:.4f}%")


def test_03_loadflow_oracle_equivalence():
    tight = lf.SolverSettings(tolerance=1e-12, max_iterations=300)
    rng = np.random.default_rng(20240601)
    t0 = time.time()
    worst = 0.0
    for _ in range(100):
        net = random_radial_network(rng)
        snap = flat_snapshot(net)
        assignment = net.default_assignment
        a = lf.solve(snap, assignment, tight)
        b = lf.nodal_oracle(snap, assignment, tight)
        worst = max(worst, float(np.max(np.abs(a.volts - b.volts))) / net.volts_ln)
    elapsed = time.time() - t0
    report(
        "3 oracle-equivalence",
        worst <= 1e-8 and elapsed < 30,
        f"100 networks, max deviation {worst:.2e} pu in {elapsed:.1f}s",
    )


def _cyclic_relabel(net: nm.Network) -> nm.Network:
    """a->b->c->a applied to loads, PV phases and impedance rows/columns."""
    sigma = {"a": "b", "b": "c", "c": "a"}
    inv = [2, 0, 1, 3]  # new index -> old index
    segments = tuple(
        nm.LineSegment(s.from_bus, s.to_bus, s.length_km, s.z_per_km[np.ix_(inv, inv)])
        for s in net.segments
    )
    loads = tuple(
        nm.LoadPoint(l.bus, (l.p_max_kw[2], l.p_max_kw[0], l.p_max_kw[1]), l.power_factor)
        for l in net.loads
    )
    pvs = tuple(
        nm.PVUnit(p.id, p.bus, sigma[p.default_phase], p.capacity_kw) for p in net.pv_units
    )
    return nm.Network(
        buses=net.buses, segments=segments, loads=loads, pv_units=pvs,
        volts_ln=net.volts_ln, base_kva=net.base_kva,
    )


def test_04_phase_relabel_equivariance():
    sigma = {"a": "b", "b": "c", "c": "a"}
    tight = lf.SolverSettings(tolerance=1e-13, max_iterations=300)
    rng = np.random.default_rng(77)
    ok = True
    worst_vuf = 0.0
    for _ in range(20):
        net = random_radial_network(rng)
        perm = _cyclic_relabel(net)
        snap, perm_snap = flat_snapshot(net), flat_snapshot(perm)
        asg = net.default_assignment
        perm_asg = tuple(sigma[p] for p in asg)
        a = lf.solve(snap, asg, tight)
        b = lf.solve(perm_snap, perm_asg, tight)
        worst_vuf = max(worst_vuf, float(np.max(np.abs(a.vuf_percent - b.vuf_percent))))
        ok &= worst_vuf <= 1e-10
        # voltage magnitudes permute: new phase sigma(p) carries old phase p
        ok &= bool(np.allclose(b.v_mag_pu, a.v_mag_pu[:, [2, 0, 1]], atol=1e-10))
    report("4 relabel-equivariance", ok, f"20 networks, max VUF deviation {worst_vuf:.2e}")


def test_05_dbfoa_global_optimum_recovery():
    net = desk_network(n_pv=6)
    snap = flat_snapshot(net)
    ev = obj.Evaluator(snap)
    t0 = time.time()
    optimum = min(ev.evaluate(c).total for c in itertools.product(nm.PHASES, repeat=6))
    hits = 0
    for seed in range(50):
        res = dbfoa.optimize(snap, params=dbfoa.DBFOAParams(rng_seed=seed))
        if res.best_cost.total <= optimum * 1.01:
            hits += 1
    elapsed = time.time() - t0
    report(
        "5 dbfoa-global-optimum",
        hits >= 45 and elapsed < 60,
        f"{hits}/50 seeds within 1% of {optimum:.5f} in {elapsed:.1f}s",
    )


def test_06_monotone_traces_and_budget(desk_snapshot):
    p = dbfoa.DBFOAParams(rng_seed=3)
    res = dbfoa.optimize(desk_snapshot, params=p)
    bound = p.s * p.n_ed * p.n_re * p.n_c * (p.n_r + 1)
    ok = res.n_evaluations <= bound

    def is_monotone(trace):
        bc = trace.best_costs()
        return all(b2 <= b1 + 1e-15 for b1, b2 in zip(bc, bc[1:]))

    ok &= is_monotone(res.trace)
    for fn, params in (
        (bl.dga_optimize, bl.BaselineParams("dga", rng_seed=1, max_epochs=40)),
        (bl.sfla_optimize, bl.BaselineParams("sfla", rng_seed=1, max_epochs=40)),
    ):
        ok &= is_monotone(fn(desk_snapshot, params=params).trace)
    ok &= is_monotone(
        bl.heuristic_search_optimize(
            desk_snapshot, start=desk_snapshot.network.default_assignment
        ).trace
    )
    report(
        "6 monotone-traces-budget",
        ok,
        f"dbfoa used {res.n_evaluations} of <= {bound} evaluations",
    )


def test_07_chemotaxis_locality_and_safety(bundled_net, noon_snapshot):
    ev = obj.Evaluator(noon_snapshot)
    params = dbfoa.DBFOAParams()
    rng = np.random.default_rng(404)
    ok = True
    accepted = rejected = 0
    for _ in range(200):
        start = tuple(nm.PHASES[c] for c in rng.integers(0, 3, bundled_net.n_pv))
        j_last, sol = ev.evaluate_with_solution(start)
        region = dbfoa.highest_unbalance_region(sol, bundled_net, params.k_n)
        vec, cost = dbfoa.d_chemotaxis_step(start, ev, params, rng)
        if vec == start:
            rejected += 1
            ok &= cost.total == j_last.total
        else:
            accepted += 1
            ok &= cost.total < j_last.total
            for pos, (a, b) in enumerate(zip(start, vec)):
                if a != b:
                    ok &= bundled_net.pv_by_id(pos + 1).bus in region
    report(
        "7 chemotaxis-locality",
        ok and accepted + rejected == 200,
        f"{accepted} accepted / {rejected} rejected",
    )


def test_08_initializer_advantage(bundled_net, noon_snapshot):
    t0 = time.time()
    ev = obj.Evaluator(noon_snapshot)
    pb_best, rnd_best = [], []
    for seed in range(20):
        pb = initializer.power_balance_population(
            noon_snapshot, 10, np.random.default_rng(seed)
        )
        rnd = initializer.random_population(bundled_net.n_pv, 10, np.random.default_rng(seed))
        pb_best.append(min(ev.evaluate(v).total for v in pb))
        rnd_best.append(min(ev.evaluate(v).total for v in rnd))
    mean_pb = float(np.mean(pb_best))
    mean_rnd = float(np.mean(rnd_best))
    advantage = 1.0 - mean_pb / mean_rnd
    elapsed = time.time() - t0
    report(
        "8 initializer-advantage",
        advantage >= 0.30 and elapsed < 300,
        f"power-balance {mean_pb:.4f} vs random {mean_rnd:.4f}: "
        f"{advantage * 100:.1f}% lower in {elapsed:.0f}s",
    )


def test_09_rephasing_benefit(bundled_net, bundled_prof):
    t0 = time.time()
    res = experiments.run_sweep(
        bundled_net, bundled_prof, list(range(24)), experiments.RunConfig(seed=0)
    )
    elapsed = time.time() - t0
    day = [r for r in res.summary["per_hour"] if 8 <= r["hour"] <= 17]
    never_worse = all(
        r["optimized_mean_vuf"] <= r["fixed_mean_vuf"] + 1e-12 for r in day
    )
    strict = sum(r["optimized_mean_vuf"] < r["fixed_mean_vuf"] - 1e-12 for r in day)
    below_threshold = all(r["optimized_mean_vuf"] < 1.0 for r in day)
    report(
        "9 rephasing-benefit",
        never_worse and strict >= 8 and elapsed < 600,
        f"strict improvement {strict}/10 daytime hours in {elapsed:.0f}s; "
        f"optimized mean VUF < 1% everywhere: {below_threshold} (reported, not gated)",
    )


def test_10_benchmark_ordering(bundled_net, bundled_prof):
    # equal-evaluation comparison in the early-convergence regime, where the
    # region-guided search differentiates; the budget grants each algorithm
    # roughly ten population updates
    res = experiments.run_benchmark(
        bundled_net, bundled_prof, 12, ["dbfoa", "dga", "sfla", "hs"],
        n_seeds=10, budget=100, cfg=experiments.RunConfig(seed=11),
    )
    med = res.summary["median_final_cost"]
    ok = all(med["dbfoa"] <= med[a] + 1e-12 for a in ("dga", "sfla", "hs"))
    report(
        "10 benchmark-ordering",
        ok,
        "median costs: " + ", ".join(f"{a}={med[a]:.4f}" for a in med),
    )


def test_11_determinism(tmp_path, capsys):
    fast = ["--s", "6", "--nc", "2", "--nr", "3", "--nre", "2", "--ned", "1",
            "--budget", "100", "--seed", "9"]
    commands = {
        "run": ["run", "--hour", "12", *fast],
        "sweep": ["sweep", "--hours", "2,12", *fast],
        "capacity": ["capacity-study", "--steps", "1", "--mc-runs", "2", *fast],
        "benchmark": ["benchmark", "--algos", "dbfoa,hs", "--seeds", "2",
                      "--bench-budget", "60", *fast[:-4]],
    }
    ok = True
    for name, args in commands.items():
        a, b = tmp_path / f"{name}_a", tmp_path / f"{name}_b"
        for out in (a, b):
            code = cli.main(args + ["--out", str(out)])
            ok &= code == 0
        cmp = filecmp.dircmp(a, b)
        ok &= not cmp.left_only and not cmp.right_only
        _, mismatch, errors = filecmp.cmpfiles(a, b, cmp.common_files, shallow=False)
        ok &= not mismatch and not errors
    capsys.readouterr()  # swallow CLI chatter before the verdict line
    report("11 determinism", ok, f"{len(commands)} commands byte-identical on rerun")
