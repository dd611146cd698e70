"""Initial population construction by regional active-power balancing.

Instead of seeding the optimizer with uniform random assignments, the
feeder is split into small contiguous regions, every phase combination of
each region's PV units is enumerated, and the combinations that best
balance the region's per-phase net active power are kept.  Random mixes of
those per-region shortlists form the starting population.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .netmodel import PHASES, Network, PhaseVector, Snapshot

DEFAULT_MAX_PV_PER_REGION = 6
DEFAULT_CANDIDATES_PER_REGION = 4


@dataclass(frozen=True)
class Region:
    """A contiguous patch of the feeder and the PV units assigned to it."""

    pv_ids: tuple[int, ...]
    buses: frozenset[int]


def _dfs_order(net: Network) -> list[int]:
    """Preorder bus indices, children visited in ascending bus-id order."""
    tree = net.tree
    order = []
    stack = [tree.index[0]]
    seen = set()
    while stack:
        u = stack.pop()
        if u in seen:
            continue
        seen.add(u)
        order.append(u)
        children = sorted(
            (v for v, _ in tree.adjacency[u] if v not in seen),
            key=lambda v: tree.bus_ids[v],
            reverse=True,
        )
        stack.extend(children)
    return order


def _feeder_roots(net: Network) -> dict[int, int]:
    """Map each non-root bus index to its depth-1 ancestor (its feeder)."""
    tree = net.tree
    out = {}
    for i in range(net.n_buses):
        if tree.depth[i] < 1:
            continue
        a = i
        while tree.depth[a] > 1:
            a = int(tree.parent[a])
        out[i] = a
    return out


def partition_regions(net: Network, w_max: int = DEFAULT_MAX_PV_PER_REGION) -> list[Region]:
    """Split the PV fleet into contiguous regions of at most w_max units.

    PV units are chunked in depth-first feeder order; a chunk never crosses
    from one feeder leaving the source bus into another (balancing power
    across unrelated feeders says nothing about either), and PV units
    sharing a bus stay together unless w_max forces a split.  Every bus of
    a PV-bearing feeder is then attributed to its nearest chunk (tree
    distance, ties to the earlier chunk), which keeps each region's bus
    set connected and its load tally disjoint from its neighbours'.
    """
    if w_max < 1:
        raise ValueError("w_max must be >= 1")
    tree = net.tree
    if 0 < net.n_pv <= w_max:
        # small fleet: no partitioning, balance against the whole feeder
        ids = tuple(pv.id for pv in sorted(net.pv_units, key=lambda p: p.id))
        return [Region(pv_ids=ids, buses=frozenset(net.buses))]
    feeder_of = _feeder_roots(net)
    by_bus: dict[int, list[int]] = {}
    for pv in sorted(net.pv_units, key=lambda p: p.id):
        by_bus.setdefault(pv.bus, []).append(pv.id)

    groups: list[tuple[int, list[int]]] = []  # (feeder, pv ids at one bus)
    for idx in _dfs_order(net):
        bus = tree.bus_ids[idx]
        ids = by_bus.get(bus)
        if not ids:
            continue
        # split oversized same-bus groups (only possible when w_max is tiny)
        for i in range(0, len(ids), w_max):
            groups.append((feeder_of[idx], ids[i : i + w_max]))

    chunks: list[tuple[int, list[int]]] = []  # (feeder, pv ids)
    current: list[int] = []
    current_feeder = None
    for feeder, grp in groups:
        if current and (feeder != current_feeder or len(current) + len(grp) > w_max):
            chunks.append((current_feeder, current))
            current = []
        current_feeder = feeder
        current = current + grp
    if current:
        chunks.append((current_feeder, current))

    # nearest-chunk attribution of each feeder's buses
    hops_cache: dict[int, np.ndarray] = {}

    def hops(bus_idx: int) -> np.ndarray:
        if bus_idx not in hops_cache:
            hops_cache[bus_idx] = tree.hops_from(bus_idx)
        return hops_cache[bus_idx]

    regions: list[Region] = []
    by_feeder: dict[int, list[int]] = {}
    for ci, (feeder, _) in enumerate(chunks):
        by_feeder.setdefault(feeder, []).append(ci)
    members: dict[int, set[int]] = {ci: set() for ci in range(len(chunks))}
    for bus_idx, feeder in feeder_of.items():
        cis = by_feeder.get(feeder)
        if not cis:
            continue  # feeder without PV units: nothing to balance there
        best_ci, best_d = None, None
        for ci in cis:
            d = min(
                int(hops(tree.index[net.pv_by_id(pid).bus])[bus_idx])
                for pid in chunks[ci][1]
            )
            if best_d is None or d < best_d:
                best_ci, best_d = ci, d
        members[best_ci].add(tree.bus_ids[bus_idx])
    for ci, (_, pv_ids) in enumerate(chunks):
        buses = members[ci] | {net.pv_by_id(pid).bus for pid in pv_ids}
        regions.append(Region(pv_ids=tuple(pv_ids), buses=frozenset(buses)))
    return regions


def region_candidates(
    region: Region,
    snapshot: Snapshot,
    k_r: int = DEFAULT_CANDIDATES_PER_REGION,
) -> list[tuple[str, ...]]:
    """Best phase combinations for one region by net-power balance.

    Enumerates all 3^w combinations of the region's w PV units and ranks
    them by the population standard deviation of the region's per-phase
    net active power (load minus assigned PV).  Ties resolve in
    lexicographic phase order, so results are deterministic.
    """
    if k_r < 1:
        raise ValueError("k_r must be >= 1")
    net = snapshot.network
    tree = net.tree
    w = len(region.pv_ids)
    if w > 12:  # 3^w combinations; beyond this the enumeration table explodes
        raise ValueError(f"region with {w} PV units is too large to enumerate")

    load = np.zeros(3)
    for bus in region.buses:
        load += snapshot.load_kw[tree.index[bus]]
    pv_kw = np.array([snapshot.pv_kw[i - 1] for i in region.pv_ids])

    combos = np.array(list(itertools.product(range(3), repeat=w)), dtype=np.int64)
    # per-combo PV power landing on each phase
    onehot = np.eye(3)[combos]                     # (3^w, w, 3)
    pv_per_phase = np.einsum("cwp,w->cp", onehot, pv_kw)
    net_p = load[None, :] - pv_per_phase
    mismatch = net_p.std(axis=1)                   # population std over 3 phases

    order = np.argsort(mismatch, kind="stable")    # stable keeps lexicographic ties
    best = order[: min(k_r, len(order))]
    return [tuple(PHASES[c] for c in combos[i]) for i in best]


def build_population(
    regions: list[Region],
    candidates_per_region: list[list[tuple[str, ...]]],
    s: int,
    rng: np.random.Generator,
) -> list[PhaseVector]:
    """Assemble s full assignments by mixing per-region candidates at random."""
    if len(regions) != len(candidates_per_region):
        raise ValueError("one candidate list per region required")
    n_pv = sum(len(r.pv_ids) for r in regions)
    population: list[PhaseVector] = []
    for _ in range(s):
        phases: list[str | None] = [None] * n_pv
        for region, cands in zip(regions, candidates_per_region):
            pick = cands[int(rng.integers(len(cands)))]
            for pv_id, ph in zip(region.pv_ids, pick):
                phases[pv_id - 1] = ph
        population.append(tuple(phases))
    return population


def power_balance_population(
    snapshot: Snapshot,
    s: int,
    rng: np.random.Generator,
    w_max: int = DEFAULT_MAX_PV_PER_REGION,
    k_r: int = DEFAULT_CANDIDATES_PER_REGION,
) -> list[PhaseVector]:
    """Convenience wrapper: partition, enumerate and mix in one call."""
    regions = partition_regions(snapshot.network, w_max)
    candidates = [region_candidates(r, snapshot, k_r) for r in regions]
    return build_population(regions, candidates, s, rng)


def random_population(n_pv: int, s: int, rng: np.random.Generator) -> list[PhaseVector]:
    """Uniform random assignments, the baseline initialization."""
    return [tuple(PHASES[c] for c in rng.integers(0, 3, size=n_pv)) for _ in range(s)]
