import random

import pytest

from fabricbod.errors import DuplicateName, EndpointBusy, Rejected, UnknownCircuit

from conftest import ControllerRig
from oracles import lowest_free_vlan_from


def create(rig, name, ep1, ep2, vlan1=None, vlan2=None):
    return rig.apply({"op": "sdxl2.create", "name": name,
                      "ep1": {"endpoint": ep1, "vlan": vlan1},
                      "ep2": {"endpoint": ep2, "vlan": vlan2}})


@pytest.fixture
def rig(pilot_doc):
    return ControllerRig(pilot_doc)


class TestCreate:
    def test_tagged_translation_both_ways(self, rig):
        out = create(rig, "c1", "sdx-client-mil", "sdx-client-ams", 100, 200)
        assert out.result["ok"]
        fwd = rig.inject("sdx-client-mil", 100)
        assert fwd.delivered and fwd.egress_endpoint == "sdx-client-ams"
        assert fwd.egress_vlan == 200
        rev = rig.inject("sdx-client-ams", 200)
        assert rev.delivered and rev.egress_vlan == 100

    def test_untagged_transparency(self, rig):
        create(rig, "c1", "sdx-client-mil", "sdx-client-lon")
        fwd = rig.inject("sdx-client-mil", None)
        assert fwd.delivered and fwd.egress_vlan is None

    def test_asymmetric_endpoints(self, rig):
        create(rig, "c1", "sdx-client-mil", "sdx-client-ams", 300, None)
        fwd = rig.inject("sdx-client-mil", 300)
        assert fwd.delivered and fwd.egress_vlan is None
        rev = rig.inject("sdx-client-ams", None)
        assert rev.delivered and rev.egress_vlan == 300

    def test_shared_transit_link_distinct_vlans(self, rig):
        out1 = create(rig, "c1", "sdx-client-mil", "sdx-client-ams", 100, 101)
        out2 = create(rig, "c2", "sdx-client-mil", "sdx-client-ams", 200, 201)
        v1 = out1.result["value"]["link_vlans"]
        v2 = out2.result["value"]["link_vlans"]
        assert out1.result["value"]["path"] == out2.result["value"]["path"] == ["SDX-MIL-AMS"]
        assert v1["SDX-MIL-AMS"] == 2
        assert v2["SDX-MIL-AMS"] == 3

    def test_same_endpoint_rejected(self, rig):
        out = create(rig, "c1", "sdx-client-mil", "sdx-client-mil", 1, 2)
        assert out.result["error"]["kind"] == "EndpointBusy"

    def test_endpoint_vlan_pair_busy(self, rig):
        create(rig, "c1", "sdx-client-mil", "sdx-client-ams", 100, 200)
        out = create(rig, "c2", "sdx-client-mil", "sdx-client-lon", 100, 300)
        assert out.result["error"]["kind"] == "EndpointBusy"
        # same endpoint, different client tag is fine
        out = create(rig, "c3", "sdx-client-mil", "sdx-client-lon", 101, 300)
        assert out.result["ok"]

    def test_duplicate_name(self, rig):
        create(rig, "c1", "sdx-client-mil", "sdx-client-ams", 1, 2)
        out = create(rig, "c1", "sdx-client-lon", "sdx-client-par", 3, 4)
        assert out.result["error"]["kind"] == "DuplicateName"

    def test_bod_endpoints_rejected(self, rig):
        out = create(rig, "c1", "client-mil", "client-ams", 1, 2)
        assert out.result["error"]["kind"] == "UnknownEndpoint"

    def test_partitioned_overlay_infeasible(self, rig):
        rig.ok({"op": "topo.link", "link": "SDX-AMS-PAR", "state": "down"})
        out = create(rig, "c1", "sdx-client-mil", "sdx-client-par", 1, 2)
        assert out.result["error"]["kind"] == "Rejected"
        assert out.result["error"]["reason"] == "Infeasible"


class TestRemove:
    def test_remove_then_no_match(self, rig):
        create(rig, "c1", "sdx-client-mil", "sdx-client-ams", 100, 200)
        rig.ok({"op": "sdxl2.remove", "name": "c1"})
        result = rig.inject("sdx-client-mil", 100)
        assert result.drop_reason == "NoMatch"
        assert rig.network.rule_count("ckt:c1") == 0

    def test_vlan_freed_for_next_circuit(self, rig):
        out1 = create(rig, "c1", "sdx-client-mil", "sdx-client-ams", 100, 200)
        assert out1.result["value"]["link_vlans"]["SDX-MIL-AMS"] == 2
        rig.ok({"op": "sdxl2.remove", "name": "c1"})
        out2 = create(rig, "c2", "sdx-client-mil", "sdx-client-ams", 100, 200)
        assert out2.result["value"]["link_vlans"]["SDX-MIL-AMS"] == 2

    def test_remove_unknown(self, rig):
        out = rig.apply({"op": "sdxl2.remove", "name": "ghost"})
        assert out.result["error"]["kind"] == "UnknownCircuit"

    def test_double_remove(self, rig):
        create(rig, "c1", "sdx-client-mil", "sdx-client-ams", 1, 2)
        rig.ok({"op": "sdxl2.remove", "name": "c1"})
        out = rig.apply({"op": "sdxl2.remove", "name": "c1"})
        assert out.result["error"]["kind"] == "UnknownCircuit"


class TestList:
    def test_name_ordering(self, rig):
        create(rig, "zeta", "sdx-client-mil", "sdx-client-ams", 1, 2)
        create(rig, "alpha", "sdx-client-lon", "sdx-client-par", 3, 4)
        docs = rig.controller.sdxl2.list_docs()
        assert [d["name"] for d in docs] == ["alpha", "zeta"]

    def test_empty(self, rig):
        assert rig.controller.sdxl2.list_docs() == []

    def test_after_reroute_shows_new_path(self, rig):
        create(rig, "c1", "sdx-client-mil", "sdx-client-ams", 100, 200)
        rig.ok({"op": "topo.link", "link": "SDX-MIL-AMS", "state": "down"})
        doc = rig.controller.sdxl2.list_docs()[0]
        assert doc["state"] == "Installed"
        assert doc["path"] == ["SDX-MIL-LON", "SDX-LON-AMS"]


class TestInvariants:
    def test_installed_circuits_always_connected(self, rig):
        specs = [("c1", "sdx-client-mil", "sdx-client-ams", 100, 200),
                 ("c2", "sdx-client-lon", "sdx-client-par", 300, 400),
                 ("c3", "sdx-client-mil", "sdx-client-par", 500, 600)]
        for spec in specs:
            create(rig, *spec)
            for name, e1, e2, v1, v2 in specs[:specs.index(spec) + 1]:
                fwd = rig.inject(e1, v1)
                assert fwd.delivered and fwd.egress_vlan == v2
                rev = rig.inject(e2, v2)
                assert rev.delivered and rev.egress_vlan == v1

    def test_no_shared_link_vlan_pairs(self, rig):
        create(rig, "c1", "sdx-client-mil", "sdx-client-ams", 100, 200)
        create(rig, "c2", "sdx-client-mil", "sdx-client-par", 101, 201)
        create(rig, "c3", "sdx-client-lon", "sdx-client-ams", 102, 202)
        seen = set()
        for circuit in rig.controller.sdxl2.circuits.values():
            for link_id, vlan in circuit.link_vlans.items():
                assert (link_id, vlan) not in seen
                seen.add((link_id, vlan))

    def test_withdrawn_leaves_zero_residue(self, rig):
        rng = random.Random(7)
        endpoints = ["sdx-client-mil", "sdx-client-lon", "sdx-client-ams",
                     "sdx-client-par"]
        live = []
        for i in range(40):
            if live and rng.random() < 0.5:
                name = live.pop(rng.randrange(len(live)))
                rig.ok({"op": "sdxl2.remove", "name": name})
            else:
                e1, e2 = rng.sample(endpoints, 2)
                out = create(rig, f"c{i}", e1, e2, 100 + i, 2000 + i)
                if out.result["ok"]:
                    live.append(f"c{i}")
        for name in live:
            rig.ok({"op": "sdxl2.remove", "name": name})
        assert rig.network.rule_count() == 0
        book = rig.controller.book
        for cal in list(book.links.values()) + list(book.endpoints.values()):
            assert cal.owners() == set()

    def test_vlan_choice_matches_lowest_free_oracle(self, rig):
        create(rig, "c1", "sdx-client-mil", "sdx-client-ams", 100, 200)
        cal = rig.controller.book.link("SDX-MIL-AMS")
        # the hold just taken was the oracle's choice before it was taken
        taken = rig.controller.sdxl2.circuits["c1"].link_vlans["SDX-MIL-AMS"]
        cal_without = [h for h in cal.vlan_holds if h.owner != "ckt:c1"]
        class Probe:  # minimal stand-in with the pre-create holds
            vlan_holds = cal_without
        assert taken == lowest_free_vlan_from(Probe, 0)
