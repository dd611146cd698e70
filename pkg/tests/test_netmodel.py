import numpy as np
import pytest
from hypothesis import given, strategies as st

from rephase import netmodel as nm

from conftest import FLAT_PROFILES, Z_CABLE


class TestBundledDataset:
    def test_counts(self, bundled_net):
        assert bundled_net.n_buses == 63
        assert bundled_net.n_pv == 26
        assert len(bundled_net.loads) == 92
        assert len(bundled_net.segments) == 62

    def test_total_pv_capacity(self, bundled_net):
        assert sum(pv.capacity_kw for pv in bundled_net.pv_units) == pytest.approx(140.4)

    def test_profiles_shape(self, bundled_prof):
        assert len(bundled_prof.pv_factor) == 24
        # night hours produce no PV output
        for h in (0, 1, 2, 3, 4, 23):
            assert bundled_prof.pv_factor[h] == 0.0

    def test_impedance_matches_cable_table(self, bundled_net):
        for seg in bundled_net.segments:
            assert np.allclose(seg.z_per_km, Z_CABLE)
            assert seg.length_km == pytest.approx(0.03)


class TestParsing:
    def test_round_trip(self, bundled_net):
        text = nm.network_to_text(bundled_net)
        again = nm.parse_network(text)
        assert nm.networks_equal(bundled_net, again)
        # serialization is canonical: a second round trip is byte-identical
        assert nm.network_to_text(again) == text

    def test_empty_file_is_parse_error(self):
        with pytest.raises(nm.NetworkFormatError, match="empty"):
            nm.parse_network("")

    def test_data_before_section(self):
        with pytest.raises(nm.NetworkFormatError, match="before any section"):
            nm.parse_network("1 2 3")

    def test_bad_float_reports_line(self):
        text = "[base]\nvolts_ln=240\nkva=400\n[buses]\n0 1\n[loads]\n1 x 0 0 0.9\n"
        with pytest.raises(nm.NetworkFormatError, match=":7"):
            nm.parse_network(text)

    def test_cycle_is_invariant_error(self, bundled_net):
        seg = bundled_net.segments[0]
        extra = nm.LineSegment(1, 2, 0.03, seg.z_per_km)
        with pytest.raises(nm.NetworkInvariantError, match="cycle|segments"):
            nm.Network(
                buses=bundled_net.buses,
                segments=bundled_net.segments + (extra,),
                loads=bundled_net.loads,
                pv_units=bundled_net.pv_units,
                volts_ln=bundled_net.volts_ln,
                base_kva=bundled_net.base_kva,
            )

    def test_orphan_bus_detected(self, bundled_net):
        with pytest.raises(nm.NetworkInvariantError, match="orphan|segments"):
            nm.Network(
                buses=bundled_net.buses | {99},
                segments=bundled_net.segments,
                loads=bundled_net.loads,
                pv_units=bundled_net.pv_units,
                volts_ln=bundled_net.volts_ln,
                base_kva=bundled_net.base_kva,
            )

    def test_duplicate_pv_ids_rejected(self, bundled_net):
        dup = bundled_net.pv_units[:-1] + (
            nm.PVUnit(id=1, bus=3, default_phase="a", capacity_kw=1.0),
        )
        with pytest.raises(nm.NetworkInvariantError, match="unique"):
            nm.Network(
                buses=bundled_net.buses,
                segments=bundled_net.segments,
                loads=bundled_net.loads,
                pv_units=dup,
                volts_ln=bundled_net.volts_ln,
                base_kva=bundled_net.base_kva,
            )

    def test_profiles_round_trip(self, bundled_prof):
        text = nm.profiles_to_text(bundled_prof)
        assert nm.parse_profiles(text) == bundled_prof

    def test_profiles_missing_hour(self):
        rows = "\n".join(f"{h},0.5,0.5" for h in range(23))
        with pytest.raises(nm.NetworkFormatError, match="missing"):
            nm.parse_profiles(rows)


class TestTree:
    def test_tree_property(self, bundled_net):
        tree = bundled_net.tree
        assert len(bundled_net.segments) == bundled_net.n_buses - 1
        assert all(d >= 0 for d in tree.depth)  # every bus reached

    def test_hops_symmetric_chain(self, bundled_net):
        tree = bundled_net.tree
        hops = tree.hops_from(tree.index[0])
        assert hops[tree.index[0]] == 0
        assert np.array_equal(hops, tree.depth)


class TestSnapshot:
    def test_pf_to_kvar(self, bundled_net):
        prof = nm.HourlyProfiles(pv_factor=(0.0,) * 24, load_factor=(1.0,) * 24)
        net = nm.Network(
            buses=frozenset({0, 1}),
            segments=(nm.LineSegment(0, 1, 0.03, Z_CABLE),),
            loads=(nm.LoadPoint(bus=1, p_max_kw=(0.9, 0.0, 0.0), power_factor=0.9),),
            pv_units=(),
            volts_ln=239.6,
            base_kva=400.0,
        )
        snap = nm.make_snapshot(net, prof, 0)
        i = net.tree.index[1]
        assert snap.load_kw[i, 0] == pytest.approx(0.9)
        assert snap.load_kvar[i, 0] == pytest.approx(0.4359, abs=1e-4)

    def test_unity_pf_no_kvar(self, bundled_net):
        prof = nm.HourlyProfiles(pv_factor=(0.0,) * 24, load_factor=(1.0,) * 24)
        net = nm.Network(
            buses=frozenset({0, 1}),
            segments=(nm.LineSegment(0, 1, 0.03, Z_CABLE),),
            loads=(nm.LoadPoint(bus=1, p_max_kw=(2.0, 1.0, 3.0), power_factor=1.0),),
            pv_units=(),
            volts_ln=239.6,
            base_kva=400.0,
        )
        snap = nm.make_snapshot(net, prof, 5)
        assert np.all(snap.load_kvar == 0.0)

    def test_night_hours_zero_pv(self, bundled_net, bundled_prof):
        snap = nm.make_snapshot(bundled_net, bundled_prof, 2)
        assert np.all(snap.pv_kw == 0.0)

    def test_hour_out_of_range(self, bundled_net, bundled_prof):
        with pytest.raises(ValueError):
            nm.make_snapshot(bundled_net, bundled_prof, 24)

    def test_snapshot_deterministic(self, bundled_net, bundled_prof):
        a = nm.make_snapshot(bundled_net, bundled_prof, 12)
        b = nm.make_snapshot(bundled_net, bundled_prof, 12)
        assert np.array_equal(a.load_kw, b.load_kw)
        assert np.array_equal(a.pv_kw, b.pv_kw)

    @given(scale=st.floats(min_value=0.0, max_value=1.0))
    def test_load_scaling_is_linear(self, scale):
        net = nm.Network(
            buses=frozenset({0, 1}),
            segments=(nm.LineSegment(0, 1, 0.03, Z_CABLE),),
            loads=(nm.LoadPoint(bus=1, p_max_kw=(2.0, 1.0, 3.0), power_factor=0.95),),
            pv_units=(),
            volts_ln=239.6,
            base_kva=400.0,
        )
        base = nm.make_snapshot(net, FLAT_PROFILES, 0)
        prof = nm.HourlyProfiles(pv_factor=(0.0,) * 24, load_factor=(scale,) * 24)
        scaled = nm.make_snapshot(net, prof, 0)
        assert np.allclose(scaled.load_kw, base.load_kw * scale)


class TestAddRandomPV:
    def test_increments_count(self, bundled_net):
        net2 = nm.add_random_pv(bundled_net, 5.4, rng_seed=0)
        assert net2.n_pv == bundled_net.n_pv + 1
        assert bundled_net.n_pv == 26  # original untouched

    def test_same_seed_same_placement(self, bundled_net):
        a = nm.add_random_pv(bundled_net, 5.4, rng_seed=123)
        b = nm.add_random_pv(bundled_net, 5.4, rng_seed=123)
        assert a.pv_units[-1] == b.pv_units[-1]

    def test_thirty_additions_total_capacity(self, bundled_net):
        net = bundled_net
        for seed in range(30):
            net = nm.add_random_pv(net, 5.4, rng_seed=seed)
        total = sum(pv.capacity_kw for pv in net.pv_units)
        assert total == pytest.approx(140.4 + 162.0)
        assert total == pytest.approx(302.4)

    def test_never_places_at_root(self, bundled_net):
        for seed in range(40):
            net2 = nm.add_random_pv(bundled_net, 5.4, rng_seed=seed)
            assert net2.pv_units[-1].bus != 0

    def test_rejects_nonpositive_capacity(self, bundled_net):
        with pytest.raises(ValueError):
            nm.add_random_pv(bundled_net, 0.0, rng_seed=0)
