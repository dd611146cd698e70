"""Penalized cost of a PV phase assignment.

The cost of an assignment is the network mean voltage unbalance factor plus
weighted penalties for every bus whose VUF exceeds the limit and every
phase voltage magnitude outside the allowed band.  Assignments whose load
flow does not converge get an infinite cost so optimizers can rank them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import loadflow
from .netmodel import PhaseVector, Snapshot


@dataclass(frozen=True)
class Limits:
    vuf_max: float = 1.0   # percent
    v_min: float = 0.94    # pu
    v_max: float = 1.06    # pu
    k1: float = 10.0       # weight per percent of VUF violation
    k2: float = 100.0      # weight per pu of voltage violation

    def __post_init__(self):
        if self.v_min >= self.v_max:
            raise ValueError("v_min must be < v_max")
        if self.vuf_max <= 0:
            raise ValueError("vuf_max must be > 0")
        if self.k1 < 0 or self.k2 < 0:
            raise ValueError("penalty weights must be >= 0")


def penalty_vuf(vuf_n: float, vuf_max: float) -> float:
    """Excess unbalance above the limit; zero inside the feasible region."""
    return max(0.0, vuf_n - vuf_max)


def penalty_voltage(v: float, v_min: float, v_max: float) -> float:
    """Distance of a voltage magnitude from the allowed band, in pu."""
    if v < v_min:
        return v_min - v
    if v > v_max:
        return v - v_max
    return 0.0


@dataclass(frozen=True)
class CostBreakdown:
    mean_vuf: float              # percent
    vuf_penalty_sum: float       # percent, summed over buses
    voltage_penalty_sum: float   # pu, summed over buses and phases
    total: float

    @property
    def feasible(self) -> bool:
        return (
            math.isfinite(self.total)
            and self.vuf_penalty_sum == 0.0
            and self.voltage_penalty_sum == 0.0
        )

    @classmethod
    def infeasible(cls) -> "CostBreakdown":
        return cls(
            mean_vuf=math.inf, vuf_penalty_sum=0.0, voltage_penalty_sum=0.0, total=math.inf
        )

    @classmethod
    def from_solution(cls, solution: loadflow.LoadFlowSolution, limits: Limits) -> "CostBreakdown":
        mean_vuf = float(np.mean(solution.vuf_percent))
        vuf_pen = float(np.maximum(0.0, solution.vuf_percent - limits.vuf_max).sum())
        v = solution.v_mag_pu
        v_pen = float(
            np.maximum(0.0, limits.v_min - v).sum() + np.maximum(0.0, v - limits.v_max).sum()
        )
        total = mean_vuf + limits.k1 * vuf_pen + limits.k2 * v_pen
        return cls(
            mean_vuf=mean_vuf,
            vuf_penalty_sum=vuf_pen,
            voltage_penalty_sum=v_pen,
            total=total,
        )


def evaluate(
    snapshot: Snapshot,
    assignment: PhaseVector,
    limits: Limits | None = None,
    settings: loadflow.SolverSettings | None = None,
) -> CostBreakdown:
    """Run the load flow for one assignment and score it.

    Non-convergent or collapsed operating points yield the infinite-cost
    sentinel instead of raising, so metaheuristics keep a total order.
    """
    limits = limits or Limits()
    try:
        solution = loadflow.solve(snapshot, assignment, settings)
    except loadflow.LoadFlowError:
        return CostBreakdown.infeasible()
    return CostBreakdown.from_solution(solution, limits)


class Evaluator:
    """Caching, counting evaluation context shared by the optimizers.

    ``n_evaluations`` counts every requested assignment evaluation (the
    budget currency used when comparing optimizers); ``n_solves`` counts
    the underlying load flows actually run.  Results are memoized per
    assignment, and when the snapshot has zero PV output every assignment
    maps to the same operating point.
    """

    def __init__(
        self,
        snapshot: Snapshot,
        limits: Limits | None = None,
        settings: loadflow.SolverSettings | None = None,
    ):
        self.snapshot = snapshot
        self.limits = limits or Limits()
        self.settings = settings or loadflow.SolverSettings()
        self.n_evaluations = 0
        self.n_solves = 0
        self._assignment_matters = bool(np.any(snapshot.pv_kw > 0))
        self._cache: dict[PhaseVector, tuple[CostBreakdown, loadflow.LoadFlowSolution | None]] = {}

    def _key(self, assignment: PhaseVector) -> PhaseVector:
        return tuple(assignment) if self._assignment_matters else ()

    def evaluate_with_solution(
        self, assignment: PhaseVector
    ) -> tuple[CostBreakdown, loadflow.LoadFlowSolution | None]:
        self.n_evaluations += 1
        key = self._key(assignment)
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        self.n_solves += 1
        try:
            solution = loadflow.solve(self.snapshot, assignment, self.settings)
            result = (CostBreakdown.from_solution(solution, self.limits), solution)
        except loadflow.LoadFlowError:
            result = (CostBreakdown.infeasible(), None)
        self._cache[key] = result
        return result

    def evaluate(self, assignment: PhaseVector) -> CostBreakdown:
        return self.evaluate_with_solution(assignment)[0]
