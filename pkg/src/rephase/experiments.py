"""Experiment harnesses: single-hour optimization, daily re-phasing sweep,
hosting-capacity Monte Carlo study and optimizer benchmark.

Each harness returns a summary dict plus a bundle of CSV payloads keyed by
file name; callers (service endpoints, CLI) decide where the files land.
All outputs are deterministic for fixed inputs and seed: per-task RNG
streams are derived from the master seed, and trace timing columns are
zeroed unless timing is explicitly requested.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from . import baselines, dbfoa, initializer, loadflow
from .netmodel import (
    HourlyProfiles,
    Network,
    PhaseVector,
    Snapshot,
    add_random_pv,
    make_snapshot,
)
from .objective import CostBreakdown, Limits

ALGORITHMS = ("dbfoa", "dga", "sfla", "hs")
DAYTIME_HOURS = tuple(range(8, 18))  # 8 am to 5 pm

_ALGO_SEED_TAG = {
    "dbfoa": 1,
    "dga": 2,
    "sfla": 3,
    "hs": 4,
    "dbfoa-classic": 5,
    "dbfoa-randinit": 6,
}


@dataclass(frozen=True)
class RunConfig:
    """Optimizer selection and shared experiment options."""

    algorithm: str = "dbfoa"
    seed: int = 0
    limits: Limits = field(default_factory=Limits)
    dbfoa_params: dbfoa.DBFOAParams = field(default_factory=dbfoa.DBFOAParams)
    baseline_params: baselines.BaselineParams | None = None
    settings: loadflow.SolverSettings = field(default_factory=loadflow.SolverSettings)
    budget: int | None = None
    init: str = "power-balance"  # or "random"
    include_timing: bool = False

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"algorithm must be one of {ALGORITHMS}")
        if self.init not in ("power-balance", "random"):
            raise ValueError("init must be 'power-balance' or 'random'")
        if self.budget is not None and self.budget < 1:
            raise ValueError("budget must be >= 1")


@dataclass
class ExperimentResult:
    summary: dict
    files: dict[str, str]


def _fmt(x) -> str:
    return repr(float(x))


def _task_rng(*key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(list(key)))


def _task_seed(*key: int) -> int:
    return int(np.random.SeedSequence(list(key)).generate_state(1)[0])


def make_initial_population(
    snapshot: Snapshot,
    s: int,
    mode: str,
    rng: np.random.Generator,
    include_fixed: bool = True,
) -> list[PhaseVector]:
    """Build a starting population; the fixed (as-built) configuration is
    seeded in as member 0 so the optimizer can never end up worse than it."""
    if mode == "power-balance":
        pop = initializer.power_balance_population(snapshot, s, rng)
    else:
        pop = initializer.random_population(snapshot.network.n_pv, s, rng)
    if include_fixed and s >= 1:
        pop[0] = snapshot.network.default_assignment
    return pop


def run_optimizer(
    snapshot: Snapshot,
    cfg: RunConfig,
    seed: int,
    algorithm: str | None = None,
    initial_population: list[PhaseVector] | None = None,
) -> dbfoa.OptimizeResult:
    """Dispatch one optimizer run with a task-specific seed."""
    algorithm = algorithm or cfg.algorithm
    classic = algorithm == "dbfoa-classic"
    algo = "dbfoa" if algorithm in ("dbfoa-classic", "dbfoa-randinit") else algorithm
    if initial_population is None:
        rng = _task_rng(seed, 97)
        initial_population = make_initial_population(
            snapshot, _population_size(cfg, algo), cfg.init, rng
        )
    if algo == "dbfoa":
        params = dataclasses.replace(
            cfg.dbfoa_params, rng_seed=seed, classic_chemotaxis=classic
        )
        return dbfoa.optimize(
            snapshot,
            cfg.limits,
            params,
            initial_population,
            settings=cfg.settings,
            budget=cfg.budget,
        )
    bp = cfg.baseline_params or baselines.BaselineParams(algorithm=algo)
    bp = dataclasses.replace(
        bp, algorithm=algo, population_size=len(initial_population), rng_seed=seed
    )
    if algo == "dga":
        return baselines.dga_optimize(
            snapshot, cfg.limits, bp, initial_population,
            settings=cfg.settings, budget=cfg.budget,
        )
    if algo == "sfla":
        return baselines.sfla_optimize(
            snapshot, cfg.limits, bp, initial_population,
            settings=cfg.settings, budget=cfg.budget,
        )
    return baselines.heuristic_search_optimize(
        snapshot, cfg.limits, bp, start=initial_population[0],
        settings=cfg.settings, budget=cfg.budget,
    )


def _population_size(cfg: RunConfig, algorithm: str) -> int:
    if algorithm in ("dbfoa", "dbfoa-classic", "dbfoa-randinit"):
        return cfg.dbfoa_params.s
    if cfg.baseline_params is not None:
        return cfg.baseline_params.population_size
    return baselines.BaselineParams(algorithm=algorithm).population_size


def _cost_row(tag: str, cost: CostBreakdown, assignment: PhaseVector) -> str:
    return (
        f"{tag},{_fmt(cost.mean_vuf)},{_fmt(cost.vuf_penalty_sum)},"
        f"{_fmt(cost.voltage_penalty_sum)},{_fmt(cost.total)},{''.join(assignment)}"
    )


def run_single(
    net: Network, profiles: HourlyProfiles, hour: int, cfg: RunConfig
) -> ExperimentResult:
    """Optimize one hour and report fixed vs optimized operating points."""
    snapshot = make_snapshot(net, profiles, hour)
    fixed = net.default_assignment
    fixed_sol = loadflow.solve(snapshot, fixed, cfg.settings)
    fixed_cost = CostBreakdown.from_solution(fixed_sol, cfg.limits)

    result = run_optimizer(snapshot, cfg, _task_seed(cfg.seed, hour))
    opt_sol = loadflow.solve(snapshot, result.best, cfg.settings)

    per_bus = ["bus,vuf_fixed_pct,vuf_optimized_pct,v_min_fixed_pu,v_min_optimized_pu"]
    for i, bus in enumerate(fixed_sol.bus_ids):
        per_bus.append(
            f"{bus},{_fmt(fixed_sol.vuf_percent[i])},{_fmt(opt_sol.vuf_percent[i])},"
            f"{_fmt(fixed_sol.v_mag_pu[i].min())},{_fmt(opt_sol.v_mag_pu[i].min())}"
        )

    summary_csv = [
        "config,mean_vuf_pct,vuf_penalty_sum,voltage_penalty_sum,total,assignment",
        _cost_row("fixed", fixed_cost, fixed),
        _cost_row("optimized", result.best_cost, result.best),
    ]

    files = {
        "summary.csv": "\n".join(summary_csv) + "\n",
        "per_bus.csv": "\n".join(per_bus) + "\n",
        "solution_fixed.csv": fixed_sol.to_csv(),
        "solution_optimized.csv": opt_sol.to_csv(),
        "trace.csv": result.trace.to_csv(include_timing=cfg.include_timing),
    }
    summary = {
        "hour": hour,
        "algorithm": cfg.algorithm,
        "seed": cfg.seed,
        "fixed_total": fixed_cost.total,
        "optimized_total": result.best_cost.total,
        "fixed_mean_vuf": fixed_cost.mean_vuf,
        "optimized_mean_vuf": result.best_cost.mean_vuf,
        "evaluations": result.n_evaluations,
        "assignment": "".join(result.best),
    }
    return ExperimentResult(summary=summary, files=files)


def run_sweep(
    net: Network, profiles: HourlyProfiles, hours, cfg: RunConfig
) -> ExperimentResult:
    """Optimize each requested hour; emit the hourly phase matrix, hourly
    cost table and the per-bus VUF distributions for box plots."""
    hours = list(hours)
    n_pv = net.n_pv
    phase_rows = ["hour," + ",".join(f"pv_{i}" for i in range(1, n_pv + 1)) + ",unchanged_vs_prev"]
    hourly = [
        "hour,mean_vuf_fixed,mean_vuf_optimized,total_fixed,total_optimized,"
        "max_vuf_fixed,max_vuf_optimized"
    ]
    dist = ["hour,config,bus,vuf_pct"]
    fixed = net.default_assignment
    prev: PhaseVector | None = None
    per_hour = []
    for hour in hours:
        snapshot = make_snapshot(net, profiles, hour)
        fixed_sol = loadflow.solve(snapshot, fixed, cfg.settings)
        fixed_cost = CostBreakdown.from_solution(fixed_sol, cfg.limits)
        result = run_optimizer(snapshot, cfg, _task_seed(cfg.seed, hour))
        opt_sol = loadflow.solve(snapshot, result.best, cfg.settings)

        flags = "" if prev is None else "".join(
            "1" if a == b else "0" for a, b in zip(result.best, prev)
        )
        prev = result.best
        phase_rows.append(f"{hour}," + ",".join(result.best) + f",{flags}")
        hourly.append(
            f"{hour},{_fmt(fixed_cost.mean_vuf)},{_fmt(result.best_cost.mean_vuf)},"
            f"{_fmt(fixed_cost.total)},{_fmt(result.best_cost.total)},"
            f"{_fmt(fixed_sol.vuf_percent.max())},{_fmt(opt_sol.vuf_percent.max())}"
        )
        for i, bus in enumerate(fixed_sol.bus_ids):
            dist.append(f"{hour},fixed,{bus},{_fmt(fixed_sol.vuf_percent[i])}")
        for i, bus in enumerate(opt_sol.bus_ids):
            dist.append(f"{hour},optimized,{bus},{_fmt(opt_sol.vuf_percent[i])}")
        per_hour.append(
            {
                "hour": hour,
                "fixed_mean_vuf": fixed_cost.mean_vuf,
                "optimized_mean_vuf": result.best_cost.mean_vuf,
                "fixed_total": fixed_cost.total,
                "optimized_total": result.best_cost.total,
            }
        )

    files = {
        "phases.csv": "\n".join(phase_rows) + "\n",
        "hourly.csv": "\n".join(hourly) + "\n",
        "vuf_distribution.csv": "\n".join(dist) + "\n",
    }
    summary = {
        "hours": hours,
        "algorithm": cfg.algorithm,
        "seed": cfg.seed,
        "per_hour": per_hour,
    }
    return ExperimentResult(summary=summary, files=files)


def _worst_case_metrics(
    net: Network,
    profiles: HourlyProfiles,
    cfg: RunConfig,
    rephase: bool,
    seed_tag: int,
    hours=DAYTIME_HOURS,
) -> tuple[float, float]:
    """Max VUF (percent) and max |V| (pu) over the given hours, either with
    the as-built assignment or re-optimizing every hour."""
    max_vuf = 0.0
    max_v = 0.0
    for hour in hours:
        snapshot = make_snapshot(net, profiles, hour)
        if rephase:
            result = run_optimizer(snapshot, cfg, _task_seed(cfg.seed, seed_tag, hour))
            assignment = result.best
        else:
            assignment = net.default_assignment
        sol = loadflow.solve(snapshot, assignment, cfg.settings)
        max_vuf = max(max_vuf, float(sol.vuf_percent.max()))
        max_v = max(max_v, float(sol.v_mag_pu.max()))
    return max_vuf, max_v


def run_capacity_study(
    net: Network,
    profiles: HourlyProfiles,
    cfg: RunConfig,
    step_kw: float = 5.4,
    steps: int = 10,
    mc_runs: int = 20,
) -> ExperimentResult:
    """Grow the PV fleet step by step and track worst-case daytime metrics.

    Each Monte Carlo run places the added units at independently random
    buses; rows aggregate the worst case across runs for the fixed and
    re-phased modes.
    """
    if step_kw <= 0:
        raise ValueError("step_kw must be > 0")
    if mc_runs < 1:
        raise ValueError("mc_runs must be >= 1")
    base_capacity = sum(pv.capacity_kw for pv in net.pv_units)
    rows = ["capacity_kw,mode,max_vuf_pct,max_v_pu"]
    usable = {"fixed": None, "rephased": None}
    feasible_so_far = {"fixed": True, "rephased": True}

    def emit(capacity: float, mode: str, vuf: float, v: float):
        rows.append(f"{_fmt(capacity)},{mode},{_fmt(vuf)},{_fmt(v)}")
        ok = vuf <= cfg.limits.vuf_max and v <= cfg.limits.v_max
        if feasible_so_far[mode] and ok:
            usable[mode] = capacity
        else:
            feasible_so_far[mode] = False

    vuf_f, v_f = _worst_case_metrics(net, profiles, cfg, rephase=False, seed_tag=0)
    vuf_r, v_r = _worst_case_metrics(net, profiles, cfg, rephase=True, seed_tag=0)
    emit(base_capacity, "fixed", vuf_f, v_f)
    emit(base_capacity, "rephased", vuf_r, v_r)

    nets = [net] * mc_runs
    for step in range(1, steps + 1):
        capacity = base_capacity + step * step_kw
        worst = {"fixed": (0.0, 0.0), "rephased": (0.0, 0.0)}
        for r in range(mc_runs):
            nets[r] = add_random_pv(nets[r], step_kw, _task_seed(cfg.seed, r, step))
            vuf_f, v_f = _worst_case_metrics(
                nets[r], profiles, cfg, rephase=False, seed_tag=r
            )
            vuf_r, v_r = _worst_case_metrics(
                nets[r], profiles, cfg, rephase=True, seed_tag=r
            )
            worst["fixed"] = (
                max(worst["fixed"][0], vuf_f), max(worst["fixed"][1], v_f)
            )
            worst["rephased"] = (
                max(worst["rephased"][0], vuf_r), max(worst["rephased"][1], v_r)
            )
        emit(capacity, "fixed", *worst["fixed"])
        emit(capacity, "rephased", *worst["rephased"])

    files = {"capacity.csv": "\n".join(rows) + "\n"}
    summary = {
        "base_capacity_kw": base_capacity,
        "step_kw": step_kw,
        "steps": steps,
        "mc_runs": mc_runs,
        "usable_capacity_fixed_kw": usable["fixed"],
        "usable_capacity_rephased_kw": usable["rephased"],
    }
    return ExperimentResult(summary=summary, files=files)


def run_benchmark(
    net: Network,
    profiles: HourlyProfiles,
    hour: int,
    algorithms,
    n_seeds: int,
    budget: int,
    cfg: RunConfig,
    ablations: bool = False,
) -> ExperimentResult:
    """Equal-evaluation-budget comparison from identical initial populations.

    With `ablations`, two extra bacterial-foraging variants run alongside:
    classic (unrestricted) chemotaxis, and a random initial population, so
    the effect of each mechanism is visible in the same table.
    """
    if budget < 1:
        raise ValueError("budget must be >= 1")
    algorithms = list(algorithms)
    for a in algorithms:
        if a not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {a!r}")
    roster = list(algorithms)
    if ablations:
        roster += ["dbfoa-classic", "dbfoa-randinit"]

    snapshot = make_snapshot(net, profiles, hour)
    cfg = dataclasses.replace(cfg, budget=budget)
    files: dict[str, str] = {}
    records: list[dict] = []
    for si in range(n_seeds):
        shared_pop = make_initial_population(
            snapshot, _population_size(cfg, "dbfoa"), cfg.init, _task_rng(cfg.seed, si, 11)
        )
        random_pop = make_initial_population(
            snapshot, _population_size(cfg, "dbfoa"), "random", _task_rng(cfg.seed, si, 13)
        )
        for algo in roster:
            pop = random_pop if algo == "dbfoa-randinit" else shared_pop
            pop = pop[: _population_size(cfg, algo)]
            result = run_optimizer(
                snapshot,
                cfg,
                _task_seed(cfg.seed, si, _ALGO_SEED_TAG[algo]),
                algorithm=algo,
                initial_population=pop,
            )
            best_costs = result.trace.best_costs()
            final = result.best_cost.total
            best_epoch = next(
                (r.epoch for r, c in zip(result.trace.rows, best_costs) if c <= final),
                0,
            )
            records.append(
                {
                    "algorithm": algo,
                    "seed": si,
                    "final_cost": final,
                    "initial_cost": best_costs[0],
                    "best_epoch": best_epoch,
                    "evaluations": result.n_evaluations,
                }
            )
            files[f"trace_{algo}_s{si}.csv"] = result.trace.to_csv(
                include_timing=cfg.include_timing
            )

    summary_rows = ["algorithm,seed,final_cost,initial_cost,best_epoch,evaluations"]
    for r in records:
        summary_rows.append(
            f"{r['algorithm']},{r['seed']},{_fmt(r['final_cost'])},"
            f"{_fmt(r['initial_cost'])},{r['best_epoch']},{r['evaluations']}"
        )
    files["summary.csv"] = "\n".join(summary_rows) + "\n"

    agg_rows = [
        "algorithm,median_final_cost,best_final_cost,median_best_epoch,"
        "median_initial_cost,init_cost_ratio"
    ]
    medians: dict[str, float] = {}
    med_init: dict[str, float] = {}
    for algo in roster:
        finals = [r["final_cost"] for r in records if r["algorithm"] == algo]
        inits = [r["initial_cost"] for r in records if r["algorithm"] == algo]
        medians[algo] = float(np.median(finals))
        med_init[algo] = float(np.median(inits))
    for algo in roster:
        ratio = ""
        if algo == "dbfoa-randinit" and "dbfoa" in medians and med_init[algo] > 0:
            ratio = _fmt(med_init["dbfoa"] / med_init[algo])
        rows_a = [r for r in records if r["algorithm"] == algo]
        finals = [r["final_cost"] for r in rows_a]
        epochs = [r["best_epoch"] for r in rows_a]
        agg_rows.append(
            f"{algo},{_fmt(medians[algo])},{_fmt(min(finals))},"
            f"{_fmt(np.median(epochs))},{_fmt(med_init[algo])},{ratio}"
        )
    files["aggregate.csv"] = "\n".join(agg_rows) + "\n"

    summary = {
        "hour": hour,
        "budget": budget,
        "n_seeds": n_seeds,
        "algorithms": roster,
        "median_final_cost": medians,
    }
    return ExperimentResult(summary=summary, files=files)


def validate_dataset(net: Network, profiles: HourlyProfiles | None) -> dict:
    """Lint a dataset: counts, totals and basic feeder statistics."""
    info = {
        "buses": net.n_buses,
        "segments": len(net.segments),
        "loads": len(net.loads),
        "pv_units": net.n_pv,
        "total_pv_kw": sum(pv.capacity_kw for pv in net.pv_units),
        "total_load_kw": float(sum(sum(lp.p_max_kw) for lp in net.loads)),
        "max_depth": net.tree.max_depth,
        "volts_ln": net.volts_ln,
        "base_kva": net.base_kva,
    }
    if profiles is not None:
        info["pv_peak_hour"] = int(np.argmax(profiles.pv_factor))
        info["load_peak_hour"] = int(np.argmax(profiles.load_factor))
    return info
