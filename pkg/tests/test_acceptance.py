"""Acceptance suite: one test per acceptance criterion, exact tolerances.

Each test prints a PASS line on success; a failed assertion shows up as a
failed test with no PASS line.  Everything here drives the system the way an
operator would (through ServiceNode, which is what both the HTTP API and the
CLI wrap) and checks results against independent oracles where the criterion
derives from one.
"""

import json
import random

from fabricbod.controller import Controller
from fabricbod.errors import NoQuorum, Rejected
from fabricbod.node import NodeConfig, NsiSetup, ServiceNode
from fabricbod.reservations import CalendarBook
from fabricbod.scheduler import BodRequest, BodScheduler, compile_rules
from fabricbod.topology import load_topology

from conftest import bundled, line_topology
from oracles import TokenBucket, oracle_admit, oracle_shortest_path

PASS = "PASS: {}"


def pilot_node(replicas=3, nsi=False):
    return ServiceNode(NodeConfig(
        topology=bundled("pilot.topo"),
        replicas=replicas,
        nsi=NsiSetup(peer_topology=bundled("legacy.topo")) if nsi else None,
    ))


def delivered(node, endpoint, vlan=None, size_bits=1000, count=1):
    out = node.inject({"endpoint": endpoint, "vlan": vlan,
                       "size_bits": size_bits, "count": count})
    assert out["ok"], out
    return out["value"]


def test_scenario1_bod_lifecycle():
    """Timed service: drops before start, delivers in-window, drops after end;
    rule count goes N -> 0 with N from the compiler. Exact match."""
    node = pilot_node()
    out = node.bod_request({"src": "client-mil", "dst": "client-pra",
                            "mbps": 500, "start": 10, "end": 100})
    assert out["ok"]
    service = out["value"]
    controller = node.cluster.controller()
    compiled = compile_rules(service["id"], controller.fabric,
                             "client-mil", "client-pra", None, None,
                             service["path"],
                             {k: int(v) for k, v in service["link_vlans"].items()},
                             rate_mbps=500)
    expected_rules = sum(len(i.rules) for i in compiled)
    assert expected_rules == 4  # 1-link path, 2 VFCs x 2 directions

    node.clock_advance(9)
    before = delivered(node, "client-mil")
    assert before["delivered"] == 0
    assert before["results"][0]["drop_reason"] == "NoMatch"
    assert node.network.rule_count(service["id"]) == 0

    node.clock_advance(1)  # tick 10: window opens
    assert node.network.rule_count(service["id"]) == expected_rules
    in_window = delivered(node, "client-mil")
    assert in_window["delivered"] == 1
    assert in_window["results"][0]["egress_endpoint"] == "client-pra"

    node.clock_advance(90)  # tick 100: window closes
    assert node.network.rule_count(service["id"]) == 0
    after = delivered(node, "client-mil")
    assert after["delivered"] == 0
    assert after["results"][0]["drop_reason"] == "NoMatch"
    print(PASS.format("scenario 1: timed service lifecycle, rules 4 -> 0"))


def test_meter_enforcement():
    """100 Mb/s service: 200 offered frames in one tick -> exactly 100 pass;
    over 10 further ticks at 200 Mb/s offered, delivered = rate*10 + burst."""
    node = pilot_node()
    node.bod_request({"src": "client-mil", "dst": "client-pra",
                      "mbps": 100, "start": 1, "end": 1000})
    node.clock_advance(1)

    result = delivered(node, "client-mil", count=200)
    assert result["delivered"] == 100
    assert result["dropped"] == {"MeterExceeded": 100}

    # Token-bucket oracle over the same offered pattern.
    bucket = TokenBucket(100, 100 * 1000)
    for _ in range(200):
        bucket.offer(1000)

    total_bits = 100 * 1000  # the burst just consumed
    oracle_bits = 100 * 1000
    for _ in range(10):
        node.clock_advance(1)
        bucket.refill()
        round_result = delivered(node, "client-mil", count=200)
        total_bits += round_result["delivered"] * 1000
        oracle_bits += sum(1000 for _ in range(200) if bucket.offer(1000))
    rate_bits_per_tick, burst_bits = 100 * 1000, 100 * 1000
    assert total_bits == rate_bits_per_tick * 10 + burst_bits == 1_100_000
    assert total_bits == oracle_bits
    print(PASS.format("meter enforcement: exact token-bucket arithmetic"))


def test_admission_conservation():
    """Randomized request/cancel sequences: allocations never exceed capacity
    at any breakpoint, and every accept/reject matches the per-tick oracle."""
    decisions = 0
    for seed in (11, 23, 47):
        rng = random.Random(seed)
        names = [f"N{i}" for i in range(rng.randint(4, 8))]
        doc = line_topology(names, capacity=rng.choice([1000, 2000]))
        devices = {d["id"]: d for d in doc["devices"]}
        vfcs = {v["id"]: v for v in doc["vfcs"]}
        for k in range(rng.randint(1, len(names))):
            a, b = rng.sample(names, 2)
            pa, pb = f"x{k}a", f"x{k}b"
            devices[f"dev-{a}"]["ports"].append({"id": pa, "speed_mbps": 10000})
            devices[f"dev-{b}"]["ports"].append({"id": pb, "speed_mbps": 10000})
            vfcs[a]["ports"].append(
                {"id": pa, "backing": {"kind": "physical", "physical_port": pa}})
            vfcs[b]["ports"].append(
                {"id": pb, "backing": {"kind": "physical", "physical_port": pb}})
            doc["links"].append({"id": f"X{k}-{a}-{b}",
                                 "a": {"vfc": a, "port": pa},
                                 "b": {"vfc": b, "port": pb},
                                 "capacity_mbps": rng.choice([1000, 2000])})
        doc["endpoints"] = [{"id": f"cl-{n}", "vfc": n, "port": "cli",
                             "access_mbps": 1000} for n in names]
        fabric = load_topology(doc)
        book = CalendarBook.for_fabric(fabric)
        sched = BodScheduler(fabric, book)
        live = []
        for _ in range(200):
            if live and rng.random() < 0.35:
                sched.cancel_service(live.pop(rng.randrange(len(live))), 0)
            else:
                src, dst = rng.sample(names, 2)
                start = rng.randint(0, 40)
                request = BodRequest(f"cl-{src}", f"cl-{dst}",
                                     rng.choice([100, 300, 600, 900]),
                                     start, start + rng.randint(1, 24))
                feasible, best = oracle_admit(fabric, book, "BOD", request)
                try:
                    service, _, _ = sched.request_service(request, 0)
                    accepted, hops = True, len(service.path)
                    live.append(service.id)
                except Rejected:
                    accepted, hops = False, None
                assert accepted == feasible
                if accepted:
                    assert hops == len(best)  # minimum feasible hop count
                decisions += 1
            for cal in list(book.links.values()) + list(book.endpoints.values()):
                for point in {a.start for a in cal.allocations}:
                    load = sum(a.bandwidth_mbps for a in cal.allocations
                               if a.start <= point < a.end)
                    assert load <= cal.capacity_mbps
    assert decisions >= 300
    print(PASS.format(f"admission conservation: {decisions} decisions, "
                      "100% oracle agreement"))


def test_vlan_translation():
    """Circuit with client tags 100/200 translates both ways; per-link VLANs
    equal the lowest-free scan."""
    node = pilot_node()
    out = node.circuit_create({"name": "x", "ep1": {"endpoint": "sdx-client-mil",
                                                    "vlan": 100},
                               "ep2": {"endpoint": "sdx-client-ams", "vlan": 200}})
    assert out["ok"]
    assert out["value"]["link_vlans"] == {"SDX-MIL-AMS": 2}  # lowest-free on idle

    fwd = delivered(node, "sdx-client-mil", vlan=100)
    assert fwd["results"][0]["egress_endpoint"] == "sdx-client-ams"
    assert fwd["results"][0]["egress_vlan"] == 200
    rev = delivered(node, "sdx-client-ams", vlan=200)
    assert rev["results"][0]["egress_endpoint"] == "sdx-client-mil"
    assert rev["results"][0]["egress_vlan"] == 100

    out2 = node.circuit_create({"name": "y", "ep1": {"endpoint": "sdx-client-mil",
                                                     "vlan": 101},
                                "ep2": {"endpoint": "sdx-client-ams", "vlan": 201}})
    assert out2["value"]["link_vlans"] == {"SDX-MIL-AMS": 3}  # next-lowest
    print(PASS.format("vlan translation: 100<->200 both directions, "
                      "lowest-free link tags"))


def test_failure_recovery():
    """Three services over the chord reroute onto the ring after a port-down;
    a bridge cut fails services and restores residuals exactly."""
    node = pilot_node()
    services = []
    for i in range(3):
        out = node.bod_request({"src": "client-mil", "dst": "client-ams",
                                "mbps": 300, "start": 1, "end": 500,
                                "src_vlan": 100 + i, "dst_vlan": 200 + i})
        assert out["ok"]
        services.append(out["value"])
    node.clock_advance(1)
    assert all(s["path"] == ["MIL-AMS"] for s in services)

    out = node.port_event("MIL", "ams", "down")  # the chord's MIL-side port
    kinds = [e["kind"] for e in out["value"]["events"]]
    assert kinds[:2] == ["PortDown", "LinkDown"]
    report = out["value"]["events"][-1]
    assert report["kind"] == "RecoveryReport"
    assert [o["outcome"] for o in report["outcomes"]] == ["rerouted"] * 3

    controller = node.cluster.controller()
    expected = oracle_shortest_path(controller.fabric, "BOD", "MIL", "AMS")
    assert expected == ["MIL-LON", "LON-AMS"]
    for i, service in enumerate(services):
        record = controller.scheduler.get(service["id"])
        assert record.path == expected
        result = delivered(node, "client-mil", vlan=100 + i)
        assert result["results"][0]["egress_endpoint"] == "client-ams"
        assert result["results"][0]["egress_vlan"] == 200 + i

    # bridge-cut variant: a line topology has no alternative path
    tree = ServiceNode(NodeConfig(topology=line_topology(["A", "B", "C"]),
                                  replicas=1))
    baseline = tree.cluster.controller().book.to_doc()
    out = tree.bod_request({"src": "cl-A", "dst": "cl-C", "mbps": 400,
                            "start": 1, "end": 100})
    tree.clock_advance(1)
    out = tree.link_event("A-B", "down")
    report = out["value"]["events"][-1]
    assert report["outcomes"][0]["outcome"] == "failed"
    assert tree.cluster.controller().scheduler.get("bod-0001").state == "Failed"
    assert tree.cluster.controller().book.to_doc() == baseline
    print(PASS.format("failure recovery: 3 chord services rerouted, "
                      "bridge cut fails and releases exactly"))


def test_cluster_transparency():
    """Leader kill: next-smallest id leads, dataplane hash unchanged, new
    requests still accepted; second kill: no quorum, data plane forwards.
    Cluster results equal a single-node oracle on the same payloads."""
    node = pilot_node()
    node.bod_request({"src": "client-mil", "dst": "client-ams", "mbps": 300,
                      "start": 1, "end": 500})
    node.circuit_create({"name": "c1", "ep1": {"endpoint": "sdx-client-mil",
                                               "vlan": 7},
                         "ep2": {"endpoint": "sdx-client-ams", "vlan": 9}})
    node.clock_advance(1)
    hash_before = node.network.rule_table_hash()
    services_before = node.services_doc()["value"]

    out = node.cluster_kill(0)
    assert out["value"]["leader"] == 1
    assert out["value"]["term"] == 2
    assert node.network.rule_table_hash() == hash_before
    assert node.services_doc()["value"] == services_before
    accepted = node.bod_request({"src": "client-lon", "dst": "client-par",
                                 "mbps": 100, "start": 5, "end": 50})
    assert accepted["ok"]

    node.cluster_kill(1)
    rejected = node.bod_request({"src": "client-lon", "dst": "client-par",
                                 "mbps": 100, "start": 60, "end": 90})
    assert rejected["error"]["kind"] == "NoQuorum"
    assert node.network.rule_table_hash() == hash_before
    still = delivered(node, "sdx-client-mil", vlan=7)
    assert still["results"][0]["egress_endpoint"] == "sdx-client-ams"

    # cluster-vs-singleton oracle
    payloads = [
        {"op": "bod.request", "src": "client-mil", "dst": "client-ams",
         "mbps": 300, "start": 1, "end": 50},
        {"op": "clock.advance", "ticks": 2},
        {"op": "bod.request", "src": "client-mil", "dst": "client-ams",
         "mbps": 900, "start": 1, "end": 50},   # infeasible on the access edge
        {"op": "sdxl2.create", "name": "k",
         "ep1": {"endpoint": "sdx-client-lon", "vlan": 4},
         "ep2": {"endpoint": "sdx-client-par", "vlan": 5}},
        {"op": "topo.link", "link": "MIL-AMS", "state": "down"},
        {"op": "clock.advance", "ticks": 60},
        {"op": "bod.cancel", "id": "bod-0001"},
    ]
    from fabricbod.cluster import Cluster
    cluster = Cluster(3, lambda: Controller(bundled("pilot.topo")))
    singleton = Controller(bundled("pilot.topo"))
    agreements = 0
    for payload in payloads:
        assert cluster.submit(payload).result == singleton.apply(payload).result
        agreements += 1
    assert cluster.controller().state_hash() == singleton.state_hash()
    print(PASS.format(f"cluster transparency: elections leave the data plane "
                      f"untouched; {agreements}/{agreements} oracle agreement"))


def test_nsi_lifecycle():
    """Two-domain reserve -> commit -> provision -> in-window delivery;
    reserve-then-idle-50 auto-fails with calendars byte-identical."""
    node = pilot_node(nsi=True)
    local_snap = json.dumps(node.cluster.controller().book.to_doc(), sort_keys=True)
    peer_snap = json.dumps(node.peer_cluster.controller().book.to_doc(), sort_keys=True)

    out = node.nsi_reserve({"src": "client-mil", "dst": "client-leg",
                            "mbps": 200, "start": 20, "end": 80})
    cid = out["value"]["correlation_id"]
    assert out["value"]["state"] == "Held"
    assert node.nsi_commit(cid)["value"]["state"] == "Committed"
    assert node.nsi_provision(cid)["value"]["state"] == "Provisioned"
    node.clock_advance(20)
    result = delivered(node, "client-mil")
    assert result["results"][0]["egress_endpoint"] == "client-leg"
    back = delivered(node, "client-leg")
    assert back["results"][0]["egress_endpoint"] == "client-mil"

    idle = pilot_node(nsi=True)
    l0 = json.dumps(idle.cluster.controller().book.to_doc(), sort_keys=True)
    p0 = json.dumps(idle.peer_cluster.controller().book.to_doc(), sort_keys=True)
    out = idle.nsi_reserve({"src": "client-mil", "dst": "client-leg",
                            "mbps": 200, "start": 100, "end": 200})
    cid = out["value"]["correlation_id"]
    idle.clock_advance(50)
    assert idle.nsi_doc(cid)["value"]["state"] == "Failed"
    assert json.dumps(idle.cluster.controller().book.to_doc(),
                      sort_keys=True) == l0
    assert json.dumps(idle.peer_cluster.controller().book.to_doc(),
                      sort_keys=True) == p0
    print(PASS.format("nsi lifecycle: cross-domain delivery; hold timeout "
                      "restores calendars byte-identically"))


def test_determinism():
    """Replaying a recorded session reproduces the event stream and state
    hashes exactly, twice."""
    def busy_session(node):
        node.bod_request({"src": "client-mil", "dst": "client-pra", "mbps": 500,
                          "start": 10, "end": 100})
        node.circuit_create({"name": "c1",
                             "ep1": {"endpoint": "sdx-client-mil", "vlan": 100},
                             "ep2": {"endpoint": "sdx-client-ams", "vlan": 200}})
        node.clock_advance(12)
        node.inject({"endpoint": "client-mil", "count": 5})
        node.link_event("MIL-AMS", "down")
        node.link_event("SDX-MIL-AMS", "down")
        node.cluster_kill(0)
        node.bod_request({"src": "client-lon", "dst": "client-ams", "mbps": 100,
                          "start": 20, "end": 40})
        node.nsi_reserve({"src": "client-mil", "dst": "client-leg", "mbps": 100,
                          "start": 30, "end": 60})
        node.clock_advance(25)
        node.cluster_revive(0)
        node.bod_cancel("bod-0001")

    config = lambda: NodeConfig(topology=bundled("pilot.topo"), replicas=3,
                                nsi=NsiSetup(peer_topology=bundled("legacy.topo")))
    original = ServiceNode(config())
    busy_session(original)
    journal = original.journal_doc()["value"]["entries"]

    replay_one = ServiceNode.replay(config(), journal)
    replay_two = ServiceNode.replay(config(), journal)
    for replayed in (replay_one, replay_two):
        assert replayed.events_since(0) == original.events_since(0)
        assert replayed.state_hash() == original.state_hash()
        assert replayed.network.rule_table_hash() == original.network.rule_table_hash()
    print(PASS.format("determinism: journal replay reproduces events and "
                      "state hashes"))
