import numpy as np
import pytest

from rephase import netmodel as nm

#: a realistic overhead-cable impedance used by the synthetic test networks
Z_CABLE = np.array(
    [
        [0.4918 + 0.7888j, 0.0486 + 0.6292j, 0.0487 + 0.6701j, 0.0486 + 0.7000j],
        [0.0486 + 0.6292j, 0.4918 + 0.7888j, 0.0487 + 0.6405j, 0.0486 + 0.6490j],
        [0.0487 + 0.6701j, 0.0487 + 0.6405j, 0.4918 + 0.7888j, 0.0487 + 0.7080j],
        [0.0486 + 0.7000j, 0.0486 + 0.6490j, 0.0487 + 0.7080j, 0.6790 + 0.7910j],
    ]
)

FLAT_PROFILES = nm.HourlyProfiles(pv_factor=(1.0,) * 24, load_factor=(1.0,) * 24)


@pytest.fixture(scope="session")
def bundled_net():
    return nm.bundled_network()


@pytest.fixture(scope="session")
def bundled_prof():
    return nm.bundled_profiles()


@pytest.fixture(scope="session")
def noon_snapshot(bundled_net, bundled_prof):
    return nm.make_snapshot(bundled_net, bundled_prof, 12)


def random_radial_network(
    rng: np.random.Generator,
    max_buses: int = 10,
    max_loads: int = 3,
    max_pv: int = 2,
) -> nm.Network:
    """Small random feeder for solver cross-checks; loading kept light so
    every operating point converges."""
    n = int(rng.integers(3, max_buses + 1))
    segments = []
    for child in range(1, n):
        parent = int(rng.integers(0, child))
        scale = float(rng.uniform(0.6, 1.6))
        jitter = rng.uniform(-0.01, 0.01, size=(4, 4))
        z = Z_CABLE * scale + (jitter + jitter.T) / 2
        segments.append(
            nm.LineSegment(
                from_bus=parent,
                to_bus=child,
                length_km=float(rng.uniform(0.02, 0.15)),
                z_per_km=z,
            )
        )
    loads = []
    for _ in range(int(rng.integers(1, max_loads + 1))):
        p = rng.uniform(0.0, 6.0, size=3)
        p[rng.integers(0, 3)] += 1.0  # ensure at least one loaded phase
        loads.append(
            nm.LoadPoint(
                bus=int(rng.integers(1, n)),
                p_max_kw=tuple(float(x) for x in p),
                power_factor=float(rng.uniform(0.85, 1.0)),
            )
        )
    pvs = []
    for pid in range(1, int(rng.integers(0, max_pv + 1)) + 1):
        pvs.append(
            nm.PVUnit(
                id=pid,
                bus=int(rng.integers(1, n)),
                default_phase=nm.PHASES[int(rng.integers(3))],
                capacity_kw=float(rng.uniform(1.0, 6.0)),
            )
        )
    return nm.Network(
        buses=frozenset(range(n)),
        segments=tuple(segments),
        loads=tuple(loads),
        pv_units=tuple(pvs),
        volts_ln=239.6,
        base_kva=400.0,
    )


def flat_snapshot(net: nm.Network, hour: int = 12) -> nm.Snapshot:
    return nm.make_snapshot(net, FLAT_PROFILES, hour)


def desk_network(n_pv: int = 6) -> nm.Network:
    """Deterministic 8-bus feeder whose small PV fleet admits exhaustive
    enumeration of all 3^n_pv assignments.  Two adjacent hubs with leaf
    spurs keep the tree diameter at three hops."""
    edges = [(0, 1), (0, 2), (0, 3), (0, 4), (1, 5), (1, 6), (1, 7)]
    lengths = [0.10, 0.06, 0.08, 0.12, 0.07, 0.09, 0.11]
    segments = tuple(
        nm.LineSegment(from_bus=u, to_bus=v, length_km=km, z_per_km=Z_CABLE)
        for (u, v), km in zip(edges, lengths)
    )
    loads = (
        nm.LoadPoint(bus=2, p_max_kw=(6.0, 1.5, 2.5), power_factor=0.95),
        nm.LoadPoint(bus=4, p_max_kw=(1.0, 5.0, 2.0), power_factor=0.92),
        nm.LoadPoint(bus=6, p_max_kw=(2.0, 1.0, 6.0), power_factor=0.97),
        nm.LoadPoint(bus=7, p_max_kw=(3.0, 3.0, 1.0), power_factor=0.9),
        nm.LoadPoint(bus=1, p_max_kw=(2.5, 0.5, 1.5), power_factor=0.93),
    )
    pv_spots = [(2, "a", 4.0), (3, "b", 6.0), (4, "c", 3.0), (5, "a", 5.0),
                (6, "b", 4.5), (7, "c", 6.5), (1, "a", 3.5), (3, "b", 2.5)]
    pvs = tuple(
        nm.PVUnit(id=i + 1, bus=bus, default_phase=ph, capacity_kw=kw)
        for i, (bus, ph, kw) in enumerate(pv_spots[:n_pv])
    )
    return nm.Network(
        buses=frozenset(range(8)),
        segments=segments,
        loads=loads,
        pv_units=pvs,
        volts_ln=239.6,
        base_kva=100.0,
    )


@pytest.fixture(scope="session")
def desk_net():
    return desk_network()


@pytest.fixture(scope="session")
def desk_snapshot(desk_net):
    return flat_snapshot(desk_net)
