import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fabricbod.errors import (
    CrossOverlayLink,
    DuplicateId,
    InvalidLink,
    InvalidSpeed,
    ParseError,
    PhysicalPortAlreadyDedicated,
    PortInUse,
    TunnelVlanConflict,
    UnknownPort,
    VfcLimitExceeded,
)
from fabricbod.fabric import Fabric, PortBacking
from fabricbod.topology import load_topology


def make_device(fabric, device_id="d0", ports=8, speed=10000):
    return fabric.add_device(device_id, [(f"p{i}", speed) for i in range(ports)])


def tunnel(port, vlan):
    return PortBacking("tunnel", port, vlan)


def physical(port):
    return PortBacking("physical", port)


class TestDevices:
    def test_mixed_port_speeds(self):
        fabric = Fabric()
        specs = [(f"x{i}", 10000) for i in range(4)] + [(f"c{i}", 1000) for i in range(2)]
        device = fabric.add_device("sw-mil", specs)
        assert len(device.ports) == 6
        assert device.vfc_count == 0

    def test_empty_port_list(self):
        device = Fabric().add_device("d0", [])
        assert device.ports == {}

    def test_invalid_speed(self):
        with pytest.raises(InvalidSpeed):
            Fabric().add_device("d0", [("p0", 2500)])

    def test_duplicate_device(self):
        fabric = Fabric()
        make_device(fabric)
        with pytest.raises(DuplicateId):
            make_device(fabric)

    def test_duplicate_port_id(self):
        with pytest.raises(DuplicateId):
            Fabric().add_device("d0", [("p0", 1000), ("p0", 1000)])


class TestCarve:
    def test_256_then_limit(self):
        fabric = Fabric()
        make_device(fabric, ports=1)
        for i in range(256):
            fabric.carve_vfc("d0", "BOD", [("u", tunnel("p0", 2 + i))])
        assert fabric.devices["d0"].vfc_count == 256
        with pytest.raises(VfcLimitExceeded):
            fabric.carve_vfc("d0", "BOD", [("u", tunnel("p0", 300))])

    def test_two_overlays_share_physical_port(self):
        fabric = Fabric()
        make_device(fabric)
        fabric.carve_vfc("d0", "BOD", [("u", tunnel("p0", 101))])
        fabric.carve_vfc("d0", "SDXL2", [("u", tunnel("p0", 102))])
        assert len(fabric.vfcs) == 2

    def test_tunnel_vlan_conflict(self):
        fabric = Fabric()
        make_device(fabric)
        fabric.carve_vfc("d0", "BOD", [("u", tunnel("p0", 101))])
        with pytest.raises(TunnelVlanConflict):
            fabric.carve_vfc("d0", "SDXL2", [("u", tunnel("p0", 101))])

    def test_conflict_within_one_carve(self):
        fabric = Fabric()
        make_device(fabric)
        with pytest.raises(TunnelVlanConflict):
            fabric.carve_vfc("d0", "BOD",
                             [("u", tunnel("p0", 101)), ("v", tunnel("p0", 101))])

    def test_physical_backing_is_exclusive(self):
        fabric = Fabric()
        make_device(fabric)
        fabric.carve_vfc("d0", "BOD", [("u", physical("p0"))])
        with pytest.raises(PhysicalPortAlreadyDedicated):
            fabric.carve_vfc("d0", "BOD", [("u", tunnel("p0", 101))])
        with pytest.raises(PhysicalPortAlreadyDedicated):
            fabric.carve_vfc("d0", "BOD", [("u", physical("p0"))])

    def test_tunnel_then_physical_rejected(self):
        fabric = Fabric()
        make_device(fabric)
        fabric.carve_vfc("d0", "BOD", [("u", tunnel("p0", 101))])
        with pytest.raises(PhysicalPortAlreadyDedicated):
            fabric.carve_vfc("d0", "BOD", [("u", physical("p0"))])

    def test_failed_carve_leaves_no_state(self):
        fabric = Fabric()
        make_device(fabric)
        fabric.carve_vfc("d0", "BOD", [("u", tunnel("p0", 101))])
        with pytest.raises(TunnelVlanConflict):
            fabric.carve_vfc("d0", "BOD",
                             [("a", tunnel("p1", 5)), ("b", tunnel("p0", 101))])
        assert fabric.devices["d0"].vfc_count == 1
        # p1 vlan 5 must not have leaked from the failed carve
        fabric.carve_vfc("d0", "BOD", [("a", tunnel("p1", 5))])


def two_vfc_fabric(overlay_b="BOD"):
    fabric = Fabric()
    make_device(fabric, "d0")
    make_device(fabric, "d1")
    fabric.carve_vfc("d0", "BOD", [("t", tunnel("p0", 101)), ("c", physical("p1"))],
                     vfc_id="A")
    fabric.carve_vfc("d1", overlay_b, [("t", tunnel("p0", 101)), ("c", physical("p1"))],
                     vfc_id="B")
    return fabric


class TestLinks:
    def test_add_link(self):
        fabric = two_vfc_fabric()
        link = fabric.add_link("A-B", ("A", "t"), ("B", "t"), 10000)
        assert link.capacity_mbps == 10000
        assert fabric.link_state("A-B") == "Up"

    def test_port_with_endpoint_rejected(self):
        fabric = two_vfc_fabric()
        fabric.add_endpoint("cl", "A", "t", 1000)
        with pytest.raises(PortInUse):
            fabric.add_link("A-B", ("A", "t"), ("B", "t"), 10000)

    def test_self_link_rejected(self):
        fabric = two_vfc_fabric()
        with pytest.raises(InvalidLink):
            fabric.add_link("A-A", ("A", "t"), ("A", "t"), 10000)

    def test_cross_overlay_rejected(self):
        fabric = two_vfc_fabric(overlay_b="SDXL2")
        with pytest.raises(CrossOverlayLink):
            fabric.add_link("A-B", ("A", "t"), ("B", "t"), 10000)

    def test_unknown_port(self):
        fabric = two_vfc_fabric()
        with pytest.raises(UnknownPort):
            fabric.add_link("A-B", ("A", "nope"), ("B", "t"), 10000)

    def test_endpoint_on_linked_port_rejected(self):
        fabric = two_vfc_fabric()
        fabric.add_link("A-B", ("A", "t"), ("B", "t"), 10000)
        with pytest.raises(PortInUse):
            fabric.add_endpoint("cl", "A", "t", 1000)


class TestPortState:
    def test_port_down_flips_link(self):
        fabric = two_vfc_fabric()
        fabric.add_link("A-B", ("A", "t"), ("B", "t"), 10000)
        events = fabric.set_port_state("A", "t", False)
        assert [e["kind"] for e in events] == ["PortDown", "LinkDown"]
        assert fabric.link_state("A-B") == "Down"

    def test_unlinked_port_down_emits_port_event_only(self):
        fabric = two_vfc_fabric()
        fabric.add_endpoint("cl", "A", "c", 1000)
        events = fabric.set_port_state("A", "c", False)
        assert [e["kind"] for e in events] == ["PortDown"]

    def test_idempotent(self):
        fabric = two_vfc_fabric()
        fabric.add_link("A-B", ("A", "t"), ("B", "t"), 10000)
        fabric.set_port_state("A", "t", False)
        assert fabric.set_port_state("A", "t", False) == []

    def test_link_up_requires_both_ports(self):
        fabric = two_vfc_fabric()
        fabric.add_link("A-B", ("A", "t"), ("B", "t"), 10000)
        fabric.set_port_state("A", "t", False)
        fabric.set_port_state("B", "t", False)
        events = fabric.set_port_state("A", "t", True)
        assert [e["kind"] for e in events] == ["PortUp"]
        assert fabric.link_state("A-B") == "Down"
        events = fabric.set_port_state("B", "t", True)
        assert [e["kind"] for e in events] == ["PortUp", "LinkUp"]

    def test_link_state_is_pure_function_of_ports(self):
        fabric = two_vfc_fabric()
        fabric.add_link("A-B", ("A", "t"), ("B", "t"), 10000)
        for vfc, port, up in [("A", "t", False), ("B", "t", False),
                              ("A", "t", True), ("B", "t", True)]:
            fabric.set_port_state(vfc, port, up)
            a_up = fabric.vfcs["A"].ports["t"].up
            b_up = fabric.vfcs["B"].ports["t"].up
            expected = "Up" if (a_up and b_up) else "Down"
            assert fabric.link_state("A-B") == expected


@settings(max_examples=60, deadline=None)
@given(st.lists(
    st.tuples(st.sampled_from(["p0", "p1", "p2"]),
              st.one_of(st.integers(min_value=2, max_value=12), st.none())),
    max_size=40,
))
def test_backing_isolation_invariant(attempts):
    """No carve sequence may break tunnel disjointness or the 256 cap."""
    fabric = Fabric()
    fabric.add_device("d0", [("p0", 10000), ("p1", 10000), ("p2", 10000)])
    for port, vlan in attempts:
        backing = physical(port) if vlan is None else tunnel(port, vlan)
        try:
            fabric.carve_vfc("d0", "BOD", [("u", backing)])
        except (TunnelVlanConflict, PhysicalPortAlreadyDedicated, VfcLimitExceeded):
            pass
        assert fabric.devices["d0"].vfc_count <= 256
        by_port = {}
        for vfc_id in fabric.devices["d0"].vfcs:
            for lp in fabric.vfcs[vfc_id].ports.values():
                by_port.setdefault(lp.backing.physical_port, []).append(lp.backing)
        for backings in by_port.values():
            kinds = [b.kind for b in backings]
            assert not ("physical" in kinds and len(backings) > 1)
            vlans = [b.tunnel_vlan for b in backings if b.kind == "tunnel"]
            assert len(vlans) == len(set(vlans))


class TestLoadTopology:
    def test_pilot_loads(self, pilot_doc):
        fabric = load_topology(pilot_doc)
        assert len(fabric.vfcs) == 9
        assert len([v for v in fabric.vfcs.values() if v.overlay == "BOD"]) == 5
        assert len([v for v in fabric.vfcs.values() if v.overlay == "SDXL2"]) == 4
        assert all(
            fabric.vfcs[l.a[0]].overlay == fabric.vfcs[l.b[0]].overlay
            for l in fabric.links.values()
        )
        # at least one client per PoP in the BoD overlay
        bod_vfcs = {v.id for v in fabric.vfcs.values() if v.overlay == "BOD"}
        attached = {e.vfc for e in fabric.endpoints.values()}
        assert bod_vfcs <= attached

    def test_empty_document(self):
        fabric = load_topology({})
        assert not fabric.devices and not fabric.vfcs

    def test_unknown_port_reports_entry_index(self, pilot_doc):
        doc = {
            "devices": [{"id": "d0", "ports": [{"id": "p0", "speed_mbps": 1000}]}],
            "vfcs": [{"id": "A", "device": "d0", "overlay": "BOD", "ports": [
                {"id": "u", "backing": {"kind": "physical", "physical_port": "p0"}}]}],
            "links": [],
            "endpoints": [{"id": "e0", "vfc": "A", "port": "missing",
                           "access_mbps": 1000}],
        }
        with pytest.raises(ParseError) as err:
            load_topology(doc)
        assert "endpoints[0]" in str(err.value)

    def test_bad_speed_reports_device_entry(self):
        doc = {"devices": [{"id": "d0", "ports": [{"id": "p0", "speed_mbps": 2500}]}]}
        with pytest.raises(ParseError) as err:
            load_topology(doc)
        assert "devices[0]" in str(err.value)

    def test_round_trip(self, pilot_doc):
        fabric = load_topology(pilot_doc)
        doc = fabric.to_doc()
        again = load_topology({k: doc[k] for k in
                               ("devices", "vfcs", "links", "endpoints")})
        assert again.to_doc() == doc
