"""Unbalanced three-phase four-wire power flow for radial feeders.

`solve` is a backward/forward sweep over the feeder tree with an explicit
neutral conductor (no Kron reduction): the backward pass accumulates branch
currents leaf-to-root, the forward pass applies the 4x4 series drops
root-to-leaf.  Constant-power wye loads and unity-pf PV injections hang
between their phase conductor and the neutral; the neutral is solidly
grounded only at the source bus.

`nodal_oracle` solves the identical circuit through the full complex nodal
admittance matrix and shares no code with the sweep.  Both are Picard
iterations of the same current-update map, so they agree to solver
tolerance on any network where both converge.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .netmodel import Network, PhaseVector, Snapshot, phase_indices, validate_assignment

#: rotation operator, 1 at 120 degrees
ALPHA = np.exp(2j * np.pi / 3)

#: balanced positive-sequence source phasors for conductors a, b, c
SOURCE_PHASORS = np.array([1.0 + 0.0j, ALPHA**2, ALPHA])

#: |V| floor below which an operating point is treated as collapsed
COLLAPSE_PU = 0.2


class LoadFlowError(RuntimeError):
    """Base class for solver failures."""


class NotConvergedError(LoadFlowError):
    def __init__(self, mismatch: float, iterations: int):
        super().__init__(
            f"load flow did not converge after {iterations} iterations "
            f"(last mismatch {mismatch:.3e} pu)"
        )
        self.mismatch = mismatch
        self.iterations = iterations


class InfeasibleSnapshotError(LoadFlowError):
    """Voltage collapse or a degenerate positive-sequence voltage."""


@dataclass(frozen=True)
class SolverSettings:
    tolerance: float = 1e-6  # pu voltage mismatch
    max_iterations: int = 100

    def __post_init__(self):
        if self.tolerance <= 0:
            raise ValueError("tolerance must be > 0")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")


@dataclass(frozen=True, eq=False)
class LoadFlowSolution:
    """Converged operating point.  Arrays are indexed like network.tree."""

    bus_ids: tuple[int, ...]
    volts: np.ndarray         # (n, 4) complex, conductors a,b,c,n, volts
    v_pn_pu: np.ndarray       # (n, 3) complex phase-to-neutral voltage, pu
    v_mag_pu: np.ndarray      # (n, 3) float magnitudes of v_pn_pu
    v_zero: np.ndarray        # (n,) complex zero-sequence component, pu
    v_plus: np.ndarray        # (n,) complex positive-sequence component, pu
    v_minus: np.ndarray       # (n,) complex negative-sequence component, pu
    vuf_percent: np.ndarray   # (n,) float
    iterations: int
    mismatch: float
    converged: bool

    def to_csv(self) -> str:
        """Per-bus dump: bus, Va, Vb, Vc, Vn, VUF_percent (complex volts)."""
        rows = ["bus,Va,Vb,Vc,Vn,VUF_percent"]
        for i, bus in enumerate(self.bus_ids):
            va, vb, vc, vn = (complex(v) for v in self.volts[i])
            rows.append(
                f"{bus},{_cfmt(va)},{_cfmt(vb)},{_cfmt(vc)},{_cfmt(vn)},"
                f"{float(self.vuf_percent[i])!r}"
            )
        return "\n".join(rows) + "\n"


def _cfmt(z: complex) -> str:
    # complex() parses this back; avoid the parenthesised repr
    return f"{z.real!r}{z.imag:+}j".replace("+-", "-")


def sequence_components(va, vb, vc):
    """Symmetrical transform of three phase voltages.

    Returns (v0, v_plus, v_minus); accepts scalars or aligned arrays.
    """
    v0 = (va + vb + vc) / 3.0
    v_plus = (va + ALPHA * vb + ALPHA**2 * vc) / 3.0
    v_minus = (va + ALPHA**2 * vb + ALPHA * vc) / 3.0
    return v0, v_plus, v_minus


def inverse_sequence_components(v0, v_plus, v_minus):
    """Inverse of `sequence_components`."""
    va = v0 + v_plus + v_minus
    vb = v0 + ALPHA**2 * v_plus + ALPHA * v_minus
    vc = v0 + ALPHA * v_plus + ALPHA**2 * v_minus
    return va, vb, vc


def vuf(v_plus, v_minus) -> float:
    """Voltage unbalance factor in percent: 100 |V-| / |V+|."""
    mag_plus = abs(v_plus)
    if mag_plus == 0:
        raise InfeasibleSnapshotError("degenerate operating point: |V+| = 0")
    return 100.0 * abs(v_minus) / mag_plus


def _injected_power_va(snapshot: Snapshot, assignment: PhaseVector) -> np.ndarray:
    """Net per-bus per-phase complex power drawn from the network (VA).

    Loads draw P + jQ; PV units inject P at unity pf on their assigned
    phase, i.e. appear as negative load.
    """
    net = snapshot.network
    s_va = (snapshot.load_kw + 1j * snapshot.load_kvar) * 1e3
    s_va = s_va.astype(complex)
    pv_idx = np.array(
        [net.tree.index[pv.bus] for pv in sorted(net.pv_units, key=lambda p: p.id)],
        dtype=np.int64,
    )
    if len(pv_idx):
        p = phase_indices(assignment)
        np.subtract.at(s_va, (pv_idx, p), snapshot.pv_kw * 1e3)
    return s_va


def _device_currents(s_va: np.ndarray, v_pn: np.ndarray) -> np.ndarray:
    """Constant-power phase currents drawn at each bus, (n, 3) complex."""
    out = np.zeros_like(s_va)
    np.divide(s_va, v_pn, out=out, where=s_va != 0)
    return np.conj(out)


def _finish(net: Network, volts: np.ndarray, iterations: int, mismatch: float) -> LoadFlowSolution:
    v_pn = (volts[:, :3] - volts[:, 3:4]) / net.volts_ln
    v_mag = np.abs(v_pn)
    v0, vp, vm = sequence_components(v_pn[:, 0], v_pn[:, 1], v_pn[:, 2])
    mag_plus = np.abs(vp)
    if np.any(mag_plus == 0):
        raise InfeasibleSnapshotError("degenerate operating point: |V+| = 0")
    vuf_pct = 100.0 * np.abs(vm) / mag_plus
    return LoadFlowSolution(
        bus_ids=net.tree.bus_ids,
        volts=volts,
        v_pn_pu=v_pn,
        v_mag_pu=v_mag,
        v_zero=v0,
        v_plus=vp,
        v_minus=vm,
        vuf_percent=vuf_pct,
        iterations=iterations,
        mismatch=mismatch,
        converged=True,
    )


def solve(
    snapshot: Snapshot,
    assignment: PhaseVector,
    settings: SolverSettings | None = None,
) -> LoadFlowSolution:
    """Backward/forward sweep power flow for one snapshot and assignment."""
    settings = settings or SolverSettings()
    net = snapshot.network
    validate_assignment(net, assignment)
    tree = net.tree
    n = net.n_buses
    root = tree.index[0]
    vbase = net.volts_ln

    s_va = _injected_power_va(snapshot, assignment)

    volts = np.zeros((n, 4), dtype=complex)
    volts[:, :3] = SOURCE_PHASORS * vbase  # flat start
    mismatch = np.inf
    for it in range(1, settings.max_iterations + 1):
        v_pn = volts[:, :3] - volts[:, 3:4]
        i_ph = _device_currents(s_va, v_pn)
        # per-bus drawn currents on a,b,c plus the neutral return
        inj = np.empty((n, 4), dtype=complex)
        inj[:, :3] = i_ph
        inj[:, 3] = -i_ph.sum(axis=1)

        # backward: accumulate subtree currents into each feeding branch
        acc = inj.copy()
        branch = [None] * len(tree.levels)
        for li in range(len(tree.levels) - 1, -1, -1):
            at, parents, _ = tree.levels[li]
            cur = acc[at]
            branch[li] = cur
            np.add.at(acc, parents, cur)

        # forward: apply series drops from the balanced source
        new_volts = np.empty_like(volts)
        new_volts[root, :3] = SOURCE_PHASORS * vbase
        new_volts[root, 3] = 0.0
        for li in range(len(tree.levels)):
            at, parents, z = tree.levels[li]
            new_volts[at] = new_volts[parents] - np.einsum("kij,kj->ki", z, branch[li])

        mismatch = float(np.max(np.abs(new_volts - volts)) / vbase)
        volts = new_volts
        v_pn_mag = np.abs(volts[:, :3] - volts[:, 3:4])
        if np.any(v_pn_mag < COLLAPSE_PU * vbase):
            raise InfeasibleSnapshotError(
                f"voltage collapse: |V_pn| fell below {COLLAPSE_PU} pu at iteration {it}"
            )
        if mismatch <= settings.tolerance:
            return _finish(net, volts, it, mismatch)

    raise NotConvergedError(mismatch, settings.max_iterations)


def nodal_oracle(
    snapshot: Snapshot,
    assignment: PhaseVector,
    settings: SolverSettings | None = None,
) -> LoadFlowSolution:
    """Reference solver on the full 4n x 4n nodal admittance system.

    Independent of the sweep implementation; restricted to small networks
    because it is only meant to cross-check `solve`.
    """
    settings = settings or SolverSettings()
    net = snapshot.network
    validate_assignment(net, assignment)
    if net.n_buses > 10:
        raise ValueError("nodal_oracle is a test-scale solver (<= 10 buses)")
    tree = net.tree
    n = net.n_buses
    vbase = net.volts_ln
    root = tree.index[0]

    # node numbering: bus index i, conductor c -> 4 i + c
    y = np.zeros((4 * n, 4 * n), dtype=complex)
    for seg in net.segments:
        u = tree.index[seg.from_bus]
        v = tree.index[seg.to_bus]
        y_seg = np.linalg.inv(seg.z_ohm())
        su, sv = slice(4 * u, 4 * u + 4), slice(4 * v, 4 * v + 4)
        y[su, su] += y_seg
        y[sv, sv] += y_seg
        y[su, sv] -= y_seg
        y[sv, su] -= y_seg

    fixed = [4 * root + c for c in range(4)]
    free = np.array([k for k in range(4 * n) if k not in fixed])
    v_fixed = np.concatenate([SOURCE_PHASORS * vbase, [0.0]])
    y_ff = y[np.ix_(free, free)]
    y_fk = y[np.ix_(free, fixed)]

    s_va = _injected_power_va(snapshot, assignment)

    volts = np.zeros((n, 4), dtype=complex)
    volts[:, :3] = SOURCE_PHASORS * vbase
    mismatch = np.inf
    for it in range(1, settings.max_iterations + 1):
        v_pn = volts[:, :3] - volts[:, 3:4]
        drawn = _device_currents(s_va, v_pn)
        # nodal injections: device current leaves the phase node and
        # returns into the neutral node
        inj = np.zeros((n, 4), dtype=complex)
        inj[:, :3] = -drawn
        inj[:, 3] = drawn.sum(axis=1)
        rhs = inj.reshape(-1)[free] - y_fk @ v_fixed
        v_free = np.linalg.solve(y_ff, rhs)

        new_volts = np.empty(4 * n, dtype=complex)
        new_volts[free] = v_free
        new_volts[fixed] = v_fixed
        new_volts = new_volts.reshape(n, 4)

        mismatch = float(np.max(np.abs(new_volts - volts)) / vbase)
        volts = new_volts
        v_pn_mag = np.abs(volts[:, :3] - volts[:, 3:4])
        if np.any(v_pn_mag < COLLAPSE_PU * vbase):
            raise InfeasibleSnapshotError(
                f"voltage collapse: |V_pn| fell below {COLLAPSE_PU} pu at iteration {it}"
            )
        if mismatch <= settings.tolerance:
            return _finish(net, volts, it, mismatch)

    raise NotConvergedError(mismatch, settings.max_iterations)
