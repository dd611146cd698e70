"""Comparison optimizers sharing the phase-assignment objective.

Standard textbook variants, intended for directional benchmarking against
the bacterial foraging optimizer rather than as faithful reproductions of
any particular published implementation:

* dga: generational genetic algorithm (tournament selection, uniform
  crossover, per-gene mutation, single elite);
* sfla: shuffled frog-leaping; the worst frog of each memeplex copies a
  random subset of genes from the memeplex best, then the global best,
  then re-randomizes;
* hs: greedy steepest-descent over the single-PV re-phasing neighborhood.

All three emit the same convergence trace as the bacterial foraging
optimizer and honor the same evaluation budget.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .dbfoa import ConvergenceTrace, OptimizeResult
from .netmodel import PHASES, PhaseVector, Snapshot
from .objective import Evaluator, Limits

_ALGORITHMS = ("dga", "sfla", "hs")


@dataclass(frozen=True)
class BaselineParams:
    algorithm: str = "dga"
    population_size: int = 10
    max_epochs: int = 10_000          # generations; the evaluation budget usually binds first
    crossover_rate: float = 0.8
    mutation_rate: float | None = None  # per gene; default 1/n_pv
    tournament_size: int = 2
    n_memeplexes: int = 5
    copy_prob: float = 0.5            # per-gene probability in SFLA leaps
    rng_seed: int = 0

    def __post_init__(self):
        if self.algorithm not in _ALGORITHMS:
            raise ValueError(f"algorithm must be one of {_ALGORITHMS}")
        if self.population_size < 1 or self.max_epochs < 1:
            raise ValueError("population and epoch budget must be >= 1")
        for p in (self.crossover_rate, self.copy_prob):
            if not 0 <= p <= 1:
                raise ValueError("probabilities must be in [0, 1]")
        if self.mutation_rate is not None and not 0 <= self.mutation_rate <= 1:
            raise ValueError("mutation_rate must be in [0, 1]")
        if self.n_memeplexes < 1 or self.tournament_size < 1:
            raise ValueError("memeplex count and tournament size must be >= 1")


class _Run:
    """Shared bookkeeping: best-so-far, trace and budget accounting."""

    def __init__(self, snapshot, limits, settings, budget):
        self.ev = Evaluator(snapshot, limits, settings)
        self.cap = math.inf if budget is None else budget
        self.trace = ConvergenceTrace()
        self.best_vec = None
        self.best_cost = None

    def exhausted(self) -> bool:
        return self.ev.n_evaluations >= self.cap

    def score(self, vector: PhaseVector):
        cost = self.ev.evaluate(vector)
        if self.best_cost is None or cost.total < self.best_cost.total:
            self.best_vec, self.best_cost = vector, cost
        return cost

    def record(self, epoch: int, costs, t0: float):
        self.trace.record(
            epoch,
            self.best_cost.total,
            float(np.mean([c.total for c in costs])),
            (time.perf_counter() - t0) * 1e3,
        )

    def result(self) -> OptimizeResult:
        return OptimizeResult(
            best=self.best_vec,
            best_cost=self.best_cost,
            trace=self.trace,
            n_evaluations=self.ev.n_evaluations,
            n_solves=self.ev.n_solves,
        )


def _random_vector(n_pv: int, rng: np.random.Generator) -> PhaseVector:
    return tuple(PHASES[c] for c in rng.integers(0, 3, size=n_pv))


def dga_optimize(
    snapshot: Snapshot,
    limits: Limits | None = None,
    params: BaselineParams | None = None,
    initial_population: list[PhaseVector] | None = None,
    settings=None,
    budget: int | None = None,
) -> OptimizeResult:
    """Discrete genetic algorithm over phase strings."""
    params = params or BaselineParams(algorithm="dga")
    rng = np.random.default_rng(params.rng_seed)
    n_pv = snapshot.network.n_pv
    p_mut = params.mutation_rate if params.mutation_rate is not None else 1.0 / max(1, n_pv)
    run = _Run(snapshot, limits, settings, budget)

    pop = list(initial_population) if initial_population is not None else [
        _random_vector(n_pv, rng) for _ in range(params.population_size)
    ]
    t0 = time.perf_counter()
    costs = [run.score(v) for v in pop]
    run.record(0, costs, t0)

    def tournament() -> PhaseVector:
        picks = rng.integers(0, len(pop), size=params.tournament_size)
        winner = min(picks, key=lambda i: costs[i].total)
        return pop[winner]

    for epoch in range(1, params.max_epochs + 1):
        if run.exhausted():
            break
        t0 = time.perf_counter()
        elite = min(range(len(pop)), key=lambda i: costs[i].total)
        new_pop = [pop[elite]]
        new_costs = [costs[elite]]
        while len(new_pop) < len(pop) and not run.exhausted():
            pa, pb = tournament(), tournament()
            if rng.uniform() < params.crossover_rate:
                child = tuple(pa[g] if rng.uniform() < 0.5 else pb[g] for g in range(n_pv))
            else:
                child = pa
            child = tuple(
                PHASES[int(rng.integers(3))] if rng.uniform() < p_mut else ph
                for ph in child
            )
            new_pop.append(child)
            new_costs.append(run.score(child))
        pop, costs = new_pop, new_costs
        run.record(epoch, costs, t0)
    return run.result()


def sfla_optimize(
    snapshot: Snapshot,
    limits: Limits | None = None,
    params: BaselineParams | None = None,
    initial_population: list[PhaseVector] | None = None,
    settings=None,
    budget: int | None = None,
) -> OptimizeResult:
    """Shuffled frog-leaping over phase strings."""
    params = params or BaselineParams(algorithm="sfla")
    rng = np.random.default_rng(params.rng_seed)
    n_pv = snapshot.network.n_pv
    run = _Run(snapshot, limits, settings, budget)

    pop = list(initial_population) if initial_population is not None else [
        _random_vector(n_pv, rng) for _ in range(params.population_size)
    ]
    t0 = time.perf_counter()
    costs = [run.score(v) for v in pop]
    run.record(0, costs, t0)
    n_mplex = min(params.n_memeplexes, len(pop))

    def leap(frog: PhaseVector, target: PhaseVector) -> PhaseVector:
        return tuple(
            t if rng.uniform() < params.copy_prob else f for f, t in zip(frog, target)
        )

    for epoch in range(1, params.max_epochs + 1):
        if run.exhausted():
            break
        t0 = time.perf_counter()
        ranked = sorted(range(len(pop)), key=lambda i: (costs[i].total, i))
        # deal frogs round-robin into memeplexes
        memeplexes = [ranked[m::n_mplex] for m in range(n_mplex)]
        for plex in memeplexes:
            if run.exhausted() or len(plex) < 2:
                continue
            worst = max(plex, key=lambda i: (costs[i].total, -i))
            local_best = min(plex, key=lambda i: (costs[i].total, i))
            moved = leap(pop[worst], pop[local_best])
            cost = run.score(moved)
            if cost.total >= costs[worst].total and not run.exhausted():
                moved = leap(pop[worst], run.best_vec)
                cost = run.score(moved)
            if cost.total >= costs[worst].total and not run.exhausted():
                moved = _random_vector(n_pv, rng)
                cost = run.score(moved)  # accepted unconditionally
            pop[worst], costs[worst] = moved, cost
        run.record(epoch, costs, t0)
    return run.result()


def heuristic_search_optimize(
    snapshot: Snapshot,
    limits: Limits | None = None,
    params: BaselineParams | None = None,
    start: PhaseVector | None = None,
    settings=None,
    budget: int | None = None,
) -> OptimizeResult:
    """Steepest-descent over the one-PV re-phasing neighborhood.

    Stops at a local optimum (no single phase change improves the cost)
    or when the epoch/evaluation budget runs out.
    """
    params = params or BaselineParams(algorithm="hs")
    n_pv = snapshot.network.n_pv
    run = _Run(snapshot, limits, settings, budget)
    current = tuple(start) if start is not None else tuple(
        _random_vector(n_pv, np.random.default_rng(params.rng_seed))
    )
    t0 = time.perf_counter()
    cost = run.score(current)
    run.record(0, [cost], t0)

    for epoch in range(1, params.max_epochs + 1):
        if run.exhausted():
            break
        t0 = time.perf_counter()
        best_nb, best_nb_cost = None, None
        for g in range(n_pv):
            for ph in PHASES:
                if ph == current[g]:
                    continue
                if run.exhausted():
                    break
                neighbor = current[:g] + (ph,) + current[g + 1 :]
                c = run.score(neighbor)
                if best_nb_cost is None or c.total < best_nb_cost.total:
                    best_nb, best_nb_cost = neighbor, c
        if best_nb_cost is not None and best_nb_cost.total < cost.total:
            current, cost = best_nb, best_nb_cost
            run.record(epoch, [cost], t0)
        else:
            run.record(epoch, [cost], t0)
            break  # local optimum
    return run.result()
