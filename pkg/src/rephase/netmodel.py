"""Feeder data model: buses, line segments, loads, PV units and hourly profiles.

The network is a radial (tree) three-phase four-wire LV feeder rooted at
bus 0 (the transformer secondary).  Everything here is immutable after
construction so snapshots can be shared freely across concurrent
evaluations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from importlib import resources

import numpy as np

PHASES = ("a", "b", "c")
PHASE_INDEX = {"a": 0, "b": 1, "c": 2}

#: type of a PV phase assignment: one phase label per PV unit, ordered by id
PhaseVector = tuple[str, ...]


class NetworkFormatError(ValueError):
    """Raised when a network/profiles file cannot be parsed."""


class NetworkInvariantError(ValueError):
    """Raised when parsed data violates a structural invariant."""


@dataclass(frozen=True, eq=False)
class LineSegment:
    """One feeder span with a full 4x4 (a,b,c,n) series impedance."""

    from_bus: int
    to_bus: int
    length_km: float
    z_per_km: np.ndarray  # (4, 4) complex, ohm/km

    def z_ohm(self) -> np.ndarray:
        return self.z_per_km * self.length_km


@dataclass(frozen=True)
class LoadPoint:
    """A customer connection: per-phase peak demand at a common power factor."""

    bus: int
    p_max_kw: tuple[float, float, float]
    power_factor: float


@dataclass(frozen=True)
class PVUnit:
    id: int
    bus: int
    default_phase: str
    capacity_kw: float


class FeederTree:
    """Compiled traversal structure for a radial network.

    Buses are mapped to dense indices (root first).  Levels group buses by
    depth so the sweep solver can process one depth at a time with
    vectorized operations.
    """

    def __init__(self, net: "Network"):
        ids = sorted(net.buses)
        if 0 not in net.buses:
            raise NetworkInvariantError("root bus 0 is missing")
        self.bus_ids = tuple(ids)
        self.index = {b: i for i, b in enumerate(ids)}
        n = len(ids)
        if len(net.segments) != n - 1:
            raise NetworkInvariantError(
                f"radial network needs {n - 1} segments for {n} buses, "
                f"got {len(net.segments)} (cycle or disconnected feeder)"
            )

        adj: list[list[tuple[int, int]]] = [[] for _ in range(n)]
        for s_i, seg in enumerate(net.segments):
            for end in (seg.from_bus, seg.to_bus):
                if end not in self.index:
                    raise NetworkInvariantError(
                        f"segment {seg.from_bus}-{seg.to_bus} references unknown bus {end}"
                    )
            u, v = self.index[seg.from_bus], self.index[seg.to_bus]
            adj[u].append((v, s_i))
            adj[v].append((u, s_i))
        self.adjacency = adj

        # BFS from the root; any unreached bus breaks radiality.
        parent = np.full(n, -1, dtype=np.int64)
        parent_seg = np.full(n, -1, dtype=np.int64)
        depth = np.full(n, -1, dtype=np.int64)
        depth[self.index[0]] = 0
        order = [self.index[0]]
        head = 0
        while head < len(order):
            u = order[head]
            head += 1
            for v, s_i in adj[u]:
                if depth[v] >= 0:
                    if s_i != parent_seg[u]:
                        raise NetworkInvariantError(
                            f"cycle detected through segment "
                            f"{net.segments[s_i].from_bus}-{net.segments[s_i].to_bus}"
                        )
                    continue
                depth[v] = depth[u] + 1
                parent[v] = u
                parent_seg[v] = s_i
                order.append(v)
        if len(order) < n:
            orphans = [ids[i] for i in range(n) if depth[i] < 0]
            raise NetworkInvariantError(f"orphan buses not reachable from root: {orphans}")

        self.parent = parent
        self.depth = depth
        self.max_depth = int(depth.max())
        # Per-level arrays: bus indices at that depth, their parents and the
        # impedance of the segment feeding each bus.
        self.levels: list[tuple[np.ndarray, np.ndarray, np.ndarray]] = []
        for d in range(1, self.max_depth + 1):
            at = np.flatnonzero(depth == d)
            z = np.stack([net.segments[parent_seg[i]].z_ohm() for i in at])
            self.levels.append((at, parent[at], z))

    def hops_from(self, bus_index: int) -> np.ndarray:
        """Tree distance (hop count) from one bus to every bus."""
        n = len(self.bus_ids)
        dist = np.full(n, -1, dtype=np.int64)
        dist[bus_index] = 0
        queue = [bus_index]
        head = 0
        while head < len(queue):
            u = queue[head]
            head += 1
            for v, _ in self.adjacency[u]:
                if dist[v] < 0:
                    dist[v] = dist[u] + 1
                    queue.append(v)
        return dist


@dataclass(frozen=True, eq=False)
class Network:
    """Immutable LV feeder: topology, loads, PV fleet and voltage base."""

    buses: frozenset[int]
    segments: tuple[LineSegment, ...]
    loads: tuple[LoadPoint, ...]
    pv_units: tuple[PVUnit, ...]
    volts_ln: float
    base_kva: float

    def __post_init__(self):
        if self.volts_ln <= 0 or self.base_kva <= 0:
            raise NetworkInvariantError("voltage and power base must be positive")
        for seg in self.segments:
            z = seg.z_per_km
            if z.shape != (4, 4):
                raise NetworkInvariantError(
                    f"segment {seg.from_bus}-{seg.to_bus}: impedance matrix must be 4x4"
                )
            if seg.length_km <= 0:
                raise NetworkInvariantError(
                    f"segment {seg.from_bus}-{seg.to_bus}: length must be > 0"
                )
            if not np.allclose(z, z.T):
                raise NetworkInvariantError(
                    f"segment {seg.from_bus}-{seg.to_bus}: impedance matrix not symmetric"
                )
            if np.any(z.diagonal().real <= 0):
                raise NetworkInvariantError(
                    f"segment {seg.from_bus}-{seg.to_bus}: non-positive series resistance"
                )
        for lp in self.loads:
            if lp.bus not in self.buses:
                raise NetworkInvariantError(f"load references unknown bus {lp.bus}")
            if not 0 < lp.power_factor <= 1:
                raise NetworkInvariantError(f"load at bus {lp.bus}: pf must be in (0, 1]")
            if any(p < 0 for p in lp.p_max_kw) or not any(p > 0 for p in lp.p_max_kw):
                raise NetworkInvariantError(
                    f"load at bus {lp.bus}: needs non-negative demand with at least one phase > 0"
                )
        seen_ids = set()
        for pv in self.pv_units:
            if pv.bus not in self.buses:
                raise NetworkInvariantError(f"PV {pv.id} references unknown bus {pv.bus}")
            if pv.default_phase not in PHASE_INDEX:
                raise NetworkInvariantError(f"PV {pv.id}: bad phase {pv.default_phase!r}")
            if pv.capacity_kw <= 0:
                raise NetworkInvariantError(f"PV {pv.id}: capacity must be > 0")
            seen_ids.add(pv.id)
        if seen_ids != set(range(1, len(self.pv_units) + 1)):
            raise NetworkInvariantError("PV ids must be unique and contiguous from 1")
        self.tree  # force topology validation at construction time

    @cached_property
    def tree(self) -> FeederTree:
        return FeederTree(self)

    @property
    def n_buses(self) -> int:
        return len(self.buses)

    @property
    def n_pv(self) -> int:
        return len(self.pv_units)

    @property
    def default_assignment(self) -> PhaseVector:
        return tuple(pv.default_phase for pv in sorted(self.pv_units, key=lambda p: p.id))

    def pv_by_id(self, pv_id: int) -> PVUnit:
        return sorted(self.pv_units, key=lambda p: p.id)[pv_id - 1]


@dataclass(frozen=True)
class HourlyProfiles:
    """Per-hour scaling factors for PV output and load demand (24 values each)."""

    pv_factor: tuple[float, ...]
    load_factor: tuple[float, ...]

    def __post_init__(self):
        for name, vals in (("pv_factor", self.pv_factor), ("load_factor", self.load_factor)):
            if len(vals) != 24:
                raise NetworkInvariantError(f"{name} needs exactly 24 entries")
            if any(not 0 <= v <= 1 for v in vals):
                raise NetworkInvariantError(f"{name} entries must lie in [0, 1]")


@dataclass(frozen=True, eq=False)
class Snapshot:
    """One operating point: scaled per-bus demand and per-PV injection.

    ``load_kw``/``load_kvar`` are (n_buses, 3) arrays indexed like
    ``network.tree``; ``pv_kw`` is ordered by PV id.
    """

    network: Network
    hour: int
    load_kw: np.ndarray
    load_kvar: np.ndarray
    pv_kw: np.ndarray

    def __post_init__(self):
        for arr in (self.load_kw, self.load_kvar, self.pv_kw):
            arr.setflags(write=False)


def make_snapshot(net: Network, profiles: HourlyProfiles, hour: int) -> Snapshot:
    """Scale loads and PV output to one hour of the day.

    Load kvar follows from the load point's power factor:
    kvar = kw * tan(acos(pf)).
    """
    if not 0 <= hour <= 23:
        raise ValueError(f"hour must be in 0..23, got {hour}")
    lf = profiles.load_factor[hour]
    pf_pv = profiles.pv_factor[hour]
    n = net.n_buses
    idx = net.tree.index
    load_kw = np.zeros((n, 3))
    load_kvar = np.zeros((n, 3))
    for lp in net.loads:
        i = idx[lp.bus]
        kw = np.asarray(lp.p_max_kw) * lf
        load_kw[i] += kw
        load_kvar[i] += kw * math.tan(math.acos(lp.power_factor))
    pv_kw = np.array(
        [pv.capacity_kw * pf_pv for pv in sorted(net.pv_units, key=lambda p: p.id)]
    )
    return Snapshot(network=net, hour=hour, load_kw=load_kw, load_kvar=load_kvar, pv_kw=pv_kw)


def add_random_pv(net: Network, capacity_kw: float, rng_seed: int) -> Network:
    """Return a copy of the network with one extra PV at a random non-root bus."""
    if capacity_kw <= 0:
        raise ValueError("capacity must be > 0")
    rng = np.random.default_rng(rng_seed)
    candidates = sorted(b for b in net.buses if b != 0)
    bus = candidates[int(rng.integers(len(candidates)))]
    phase = PHASES[int(rng.integers(3))]
    new_pv = PVUnit(id=net.n_pv + 1, bus=bus, default_phase=phase, capacity_kw=capacity_kw)
    return Network(
        buses=net.buses,
        segments=net.segments,
        loads=net.loads,
        pv_units=net.pv_units + (new_pv,),
        volts_ln=net.volts_ln,
        base_kva=net.base_kva,
    )


def validate_assignment(net: Network, assignment: PhaseVector) -> None:
    if len(assignment) != net.n_pv:
        raise ValueError(f"assignment length {len(assignment)} != {net.n_pv} PV units")
    bad = [p for p in assignment if p not in PHASE_INDEX]
    if bad:
        raise ValueError(f"assignment contains invalid phase labels: {bad}")


def phase_indices(assignment: PhaseVector) -> np.ndarray:
    return np.array([PHASE_INDEX[p] for p in assignment], dtype=np.int64)


# ---------------------------------------------------------------------------
# File formats
# ---------------------------------------------------------------------------
#
# Network files are sectioned text.  Sections: [base], [buses], [segments],
# [loads], [pv].  '#' starts a comment.  A segment row is
#   from to length_km  z00re z00im ... z33im     (row-major 4x4, 32 floats)
# a load row is "bus pa pb pc pf" and a PV row is "id bus phase kw".

_SECTIONS = ("base", "buses", "segments", "loads", "pv")


def parse_network(text: str, source: str = "<string>") -> Network:
    """Parse the sectioned network format; raises NetworkFormatError with
    line context, or NetworkInvariantError for structural problems."""
    section = None
    base: dict[str, float] = {}
    buses: set[int] = set()
    segments: list[LineSegment] = []
    loads: list[LoadPoint] = []
    pvs: list[PVUnit] = []

    def fail(lineno, msg):
        raise NetworkFormatError(f"{source}:{lineno}: {msg}")

    seen_any = False
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        seen_any = True
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip().lower()
            if section not in _SECTIONS:
                fail(lineno, f"unknown section [{section}]")
            continue
        if section is None:
            fail(lineno, "data before any section header")
        tok = line.split()
        try:
            if section == "base":
                key, _, val = line.partition("=")
                key = key.strip()
                if key not in ("volts_ln", "kva"):
                    fail(lineno, f"unknown base key {key!r}")
                base[key] = float(val)
            elif section == "buses":
                buses.update(int(t) for t in tok)
            elif section == "segments":
                if len(tok) != 3 + 32:
                    fail(lineno, f"segment row needs 35 fields, got {len(tok)}")
                vals = [float(t) for t in tok[3:]]
                z = np.array(vals[0::2]) + 1j * np.array(vals[1::2])
                segments.append(
                    LineSegment(
                        from_bus=int(tok[0]),
                        to_bus=int(tok[1]),
                        length_km=float(tok[2]),
                        z_per_km=z.reshape(4, 4),
                    )
                )
            elif section == "loads":
                if len(tok) != 5:
                    fail(lineno, f"load row needs 5 fields (bus pa pb pc pf), got {len(tok)}")
                loads.append(
                    LoadPoint(
                        bus=int(tok[0]),
                        p_max_kw=(float(tok[1]), float(tok[2]), float(tok[3])),
                        power_factor=float(tok[4]),
                    )
                )
            elif section == "pv":
                if len(tok) != 4:
                    fail(lineno, f"pv row needs 4 fields (id bus phase kw), got {len(tok)}")
                pvs.append(
                    PVUnit(
                        id=int(tok[0]),
                        bus=int(tok[1]),
                        default_phase=tok[2],
                        capacity_kw=float(tok[3]),
                    )
                )
        except NetworkFormatError:
            raise
        except ValueError as exc:
            fail(lineno, f"bad numeric field: {exc}")

    if not seen_any:
        raise NetworkFormatError(f"{source}: empty network file")
    for key in ("volts_ln", "kva"):
        if key not in base:
            raise NetworkFormatError(f"{source}: [base] section missing {key}")
    return Network(
        buses=frozenset(buses),
        segments=tuple(segments),
        loads=tuple(loads),
        pv_units=tuple(pvs),
        volts_ln=base["volts_ln"],
        base_kva=base["kva"],
    )


def load_network(path) -> Network:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_network(fh.read(), source=str(path))


def network_to_text(net: Network) -> str:
    """Serialize a network in the canonical form that parse_network round-trips."""
    out = ["[base]", f"volts_ln={net.volts_ln!r}", f"kva={net.base_kva!r}", "", "[buses]"]
    ids = sorted(net.buses)
    for i in range(0, len(ids), 16):
        out.append(" ".join(str(b) for b in ids[i : i + 16]))
    out.append("")
    out.append("[segments]")
    for seg in net.segments:
        zvals = " ".join(
            f"{float(c.real)!r} {float(c.imag)!r}" for c in seg.z_per_km.reshape(-1)
        )
        out.append(f"{seg.from_bus} {seg.to_bus} {float(seg.length_km)!r} {zvals}")
    out.append("")
    out.append("[loads]")
    for lp in net.loads:
        pa, pb, pc = lp.p_max_kw
        out.append(f"{lp.bus} {pa!r} {pb!r} {pc!r} {lp.power_factor!r}")
    out.append("")
    out.append("[pv]")
    for pv in sorted(net.pv_units, key=lambda p: p.id):
        out.append(f"{pv.id} {pv.bus} {pv.default_phase} {pv.capacity_kw!r}")
    out.append("")
    return "\n".join(out)


def write_network(net: Network, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(network_to_text(net))


def networks_equal(a: Network, b: Network) -> bool:
    """Structural equality (used by round-trip tests)."""
    if a.buses != b.buses or a.loads != b.loads or a.pv_units != b.pv_units:
        return False
    if (a.volts_ln, a.base_kva) != (b.volts_ln, b.base_kva):
        return False
    if len(a.segments) != len(b.segments):
        return False
    for sa, sb in zip(a.segments, b.segments):
        if (sa.from_bus, sa.to_bus, sa.length_km) != (sb.from_bus, sb.to_bus, sb.length_km):
            return False
        if not np.array_equal(sa.z_per_km, sb.z_per_km):
            return False
    return True


def parse_profiles(text: str, source: str = "<string>") -> HourlyProfiles:
    """Parse 24 rows of `hour,pv_factor,load_factor` (header optional)."""
    pv = [None] * 24
    load = [None] * 24
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = [p.strip() for p in line.split(",")]
        if parts[0].lower() == "hour":
            continue
        if len(parts) != 3:
            raise NetworkFormatError(f"{source}:{lineno}: expected hour,pv_factor,load_factor")
        try:
            hour = int(parts[0])
            pvf, lf = float(parts[1]), float(parts[2])
        except ValueError as exc:
            raise NetworkFormatError(f"{source}:{lineno}: bad numeric field: {exc}") from None
        if not 0 <= hour <= 23:
            raise NetworkFormatError(f"{source}:{lineno}: hour {hour} out of range")
        if pv[hour] is not None:
            raise NetworkFormatError(f"{source}:{lineno}: duplicate hour {hour}")
        pv[hour], load[hour] = pvf, lf
    missing = [h for h in range(24) if pv[h] is None]
    if missing:
        raise NetworkFormatError(f"{source}: missing hours {missing}")
    return HourlyProfiles(pv_factor=tuple(pv), load_factor=tuple(load))


def load_profiles(path) -> HourlyProfiles:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_profiles(fh.read(), source=str(path))


def profiles_to_text(profiles: HourlyProfiles) -> str:
    rows = ["hour,pv_factor,load_factor"]
    for h in range(24):
        rows.append(f"{h},{profiles.pv_factor[h]!r},{profiles.load_factor[h]!r}")
    return "\n".join(rows) + "\n"


# ---------------------------------------------------------------------------
# Bundled dataset
# ---------------------------------------------------------------------------


def bundled_network_text() -> str:
    return resources.files("rephase.data").joinpath("lotus_grove.net").read_text("utf-8")


def bundled_profiles_text() -> str:
    return resources.files("rephase.data").joinpath("profiles.csv").read_text("utf-8")


def bundled_network() -> Network:
    return parse_network(bundled_network_text(), source="lotus_grove.net")


def bundled_profiles() -> HourlyProfiles:
    return parse_profiles(bundled_profiles_text(), source="profiles.csv")
