"""Composition root: one operator-facing node.

A node owns the shared physical network (fabric + dataplane), the local
controller cluster, and optionally an emulated peer domain joined by an
inter-domain link with the NSI coordinator bridging the two.  Every mutating
operation is journaled, then executed; committed commands' effects are run
against the shared network exactly once, and all resulting events flow into
a single totally-ordered feed.
"""

from __future__ import annotations

import copy
import hashlib
import json
import threading
from dataclasses import dataclass, field

from .cluster import Cluster
from .controller import Controller, canonical_json
from .dataplane import Dataplane
from .effects import FlipPort, InstallRules, RemoveRules
from .errors import FabricError, InvalidArgument, NoQuorum, NsiUnavailable, UnknownEndpoint
from .fabric import Fabric
from .nsi import NsiCoordinator
from .topology import build_into, load_topology

MAX_INJECT_COUNT = 10000

DEFAULT_BOUNDARY = {
    "link_id": "PRA-LEG1",
    "capacity_mbps": 10000,
    "local": {"vfc": "PRA", "port": "bdr", "gateway_endpoint": "nsi-gw"},
    "peer": {"vfc": "LEG1", "port": "bdr", "gateway_endpoint": "nsi-gw"},
}


@dataclass
class NsiSetup:
    peer_topology: dict
    boundary: dict = field(default_factory=lambda: copy.deepcopy(DEFAULT_BOUNDARY))


@dataclass
class NodeConfig:
    topology: dict
    replicas: int = 3
    nsi: NsiSetup | None = None
    trace: object = None  # callable(str) for dataplane trace lines


class EventFeed:
    """Append-only feed with dense sequence numbers starting at 1."""

    def __init__(self):
        self.events: list[dict] = []
        self.cond = threading.Condition()

    def publish(self, events: list[dict]) -> None:
        if not events:
            return
        with self.cond:
            for event in events:
                tagged = dict(event)
                tagged["seq"] = len(self.events) + 1
                self.events.append(tagged)
            self.cond.notify_all()

    def since(self, seq: int) -> list[dict]:
        if not isinstance(seq, int) or seq < 0:
            seq = 0  # invalid cursor: full replay
        with self.cond:
            return list(self.events[seq:])

    def last_seq(self) -> int:
        with self.cond:
            return len(self.events)


class DomainPort:
    """Command interface of one domain, as seen by the coordinator."""

    def __init__(self, node: "ServiceNode", cluster: Cluster, name: str):
        self._node = node
        self._cluster = cluster
        self.name = name

    def submit(self, payload: dict) -> dict:
        try:
            outcome = self._cluster.submit(payload)
        except FabricError as e:
            return {"ok": False, "error": e.to_doc()}
        self._node._execute(outcome.effects)
        self._node._publish(outcome.events, domain=self.name)
        return outcome.result

    def now(self) -> int:
        controller = self._cluster.controller()
        return controller.now if controller else 0


class ServiceNode:
    def __init__(self, config: NodeConfig):
        self.config = config
        self.lock = threading.RLock()
        self.closed = False
        self.journal: list[dict] = []
        self.feed = EventFeed()

        physical = load_topology(config.topology)
        local_extra: list[dict] = []
        peer_extra: list[dict] = []
        if config.nsi:
            boundary = config.nsi.boundary
            build_into(physical, config.nsi.peer_topology)
            physical.add_link(
                boundary["link_id"],
                (boundary["local"]["vfc"], boundary["local"]["port"]),
                (boundary["peer"]["vfc"], boundary["peer"]["port"]),
                boundary["capacity_mbps"],
            )
            local_extra = [{
                "id": boundary["local"]["gateway_endpoint"],
                "vfc": boundary["local"]["vfc"],
                "port": boundary["local"]["port"],
                "access_mbps": boundary["capacity_mbps"],
            }]
            peer_extra = [{
                "id": boundary["peer"]["gateway_endpoint"],
                "vfc": boundary["peer"]["vfc"],
                "port": boundary["peer"]["port"],
                "access_mbps": boundary["capacity_mbps"],
            }]
        self.physical = physical
        self.network = Dataplane(physical, trace=config.trace)

        self.cluster = Cluster(
            config.replicas,
            lambda: Controller(config.topology, extra_endpoints=local_extra),
        )
        self.local_port = DomainPort(self, self.cluster, "local")

        self.peer_cluster: Cluster | None = None
        self.peer_port: DomainPort | None = None
        self.nsi: NsiCoordinator | None = None
        if config.nsi:
            boundary = config.nsi.boundary
            self.peer_cluster = Cluster(
                1,
                lambda: Controller(config.nsi.peer_topology,
                                   extra_endpoints=peer_extra),
            )
            self.peer_port = DomainPort(self, self.peer_cluster, "peer")
            self.nsi = NsiCoordinator(
                self.local_port,
                self.peer_port,
                boundary["capacity_mbps"],
                boundary["local"]["gateway_endpoint"],
                boundary["peer"]["gateway_endpoint"],
                boundary_up=lambda: physical.link_up(boundary["link_id"]),
                boundary_link_id=boundary["link_id"],
            )

    # --- mutating operations (journaled) ---

    def bod_request(self, args: dict) -> dict:
        return self._command("bod.request", args, {
            "op": "bod.request", "src": args["src"], "dst": args["dst"],
            "mbps": args["mbps"], "start": args["start"], "end": args["end"],
            "src_vlan": args.get("src_vlan"), "dst_vlan": args.get("dst_vlan"),
        })

    def bod_cancel(self, service_id: str) -> dict:
        return self._command("bod.cancel", {"id": service_id},
                             {"op": "bod.cancel", "id": service_id})

    def circuit_create(self, args: dict) -> dict:
        return self._command("sdxl2.create", args, {
            "op": "sdxl2.create", "name": args["name"],
            "ep1": args["ep1"], "ep2": args["ep2"],
        })

    def circuit_remove(self, name: str) -> dict:
        return self._command("sdxl2.remove", {"name": name},
                             {"op": "sdxl2.remove", "name": name})

    def link_event(self, link_id: str, state: str) -> dict:
        return self._command("link.event", {"link_id": link_id, "state": state},
                             {"op": "topo.link", "link": link_id, "state": state})

    def port_event(self, vfc: str, port: str, state: str) -> dict:
        return self._command(
            "port.event", {"vfc": vfc, "port": port, "state": state},
            {"op": "topo.port", "vfc": vfc, "port": port, "state": state})

    def clock_advance(self, ticks: int) -> dict:
        with self.lock:
            self._journal("clock.advance", {"ticks": ticks})
            if not isinstance(ticks, int) or isinstance(ticks, bool) or ticks < 0:
                return _error(InvalidArgument("ticks must be a non-negative integer"))
            if self.cluster.leader() is None:
                return _error(NoQuorum("cannot advance the clock without quorum"))
            reports = []
            for _ in range(ticks):
                self.network.tick(1)
                out = self.local_port.submit({"op": "clock.advance", "ticks": 1})
                if not out["ok"]:
                    return out
                reports += out["value"]["reports"]
                if self.peer_port is not None:
                    peer_out = self.peer_port.submit(
                        {"op": "clock.advance", "ticks": 1})
                    if not peer_out["ok"]:
                        return peer_out
                if self.nsi is not None:
                    now = self.local_port.now()
                    _expired, events = self.nsi.on_tick(now)
                    self._publish(events, domain="nsi")
            return {"ok": True, "value": {"now": self.local_port.now(),
                                          "reports": reports}}

    def inject(self, args: dict) -> dict:
        with self.lock:
            self._journal("inject", args)
            endpoint = args.get("endpoint")
            vlan = args.get("vlan")
            size_bits = args.get("size_bits", 1000)
            count = args.get("count", 1)
            if endpoint not in self.physical.endpoints:
                return _error(UnknownEndpoint(f"endpoint {endpoint!r}"))
            if vlan is not None and not (1 <= vlan <= 4094):
                return _error(InvalidArgument(f"frame vlan {vlan!r} outside 1..4094"))
            if not isinstance(size_bits, int) or size_bits <= 0:
                return _error(InvalidArgument("size_bits must be a positive integer"))
            if not isinstance(count, int) or not (1 <= count <= MAX_INJECT_COUNT):
                return _error(InvalidArgument(
                    f"count must be in 1..{MAX_INJECT_COUNT}"))
            results = [
                self.network.inject(endpoint, vlan, size_bits).to_doc()
                for _ in range(count)
            ]
            dropped: dict[str, int] = {}
            for r in results:
                if r["outcome"] == "Dropped":
                    dropped[r["drop_reason"]] = dropped.get(r["drop_reason"], 0) + 1
            return {"ok": True, "value": {
                "injected": count,
                "delivered": sum(1 for r in results if r["outcome"] == "Delivered"),
                "dropped": dict(sorted(dropped.items())),
                "results": results,
            }}

    def cluster_kill(self, replica_id: int) -> dict:
        with self.lock:
            self._journal("cluster.kill", {"id": replica_id})
            try:
                events = self.cluster.kill(replica_id)
            except FabricError as e:
                return _error(e)
            self._publish(events)
            return {"ok": True, "value": self.cluster.to_doc()}

    def cluster_revive(self, replica_id: int) -> dict:
        with self.lock:
            self._journal("cluster.revive", {"id": replica_id})
            try:
                events = self.cluster.revive(replica_id)
            except FabricError as e:
                return _error(e)
            self._publish(events)
            return {"ok": True, "value": self.cluster.to_doc()}

    def nsi_reserve(self, args: dict) -> dict:
        return self._nsi_op("nsi.reserve", args, lambda: self.nsi.reserve(
            args["src"], args["dst"], args["mbps"], args["start"], args["end"],
            args.get("src_vlan"), args.get("dst_vlan")))

    def nsi_commit(self, cid: str) -> dict:
        return self._nsi_op("nsi.commit", {"cid": cid},
                            lambda: self.nsi.commit(cid))

    def nsi_provision(self, cid: str) -> dict:
        return self._nsi_op("nsi.provision", {"cid": cid},
                            lambda: self.nsi.provision(cid))

    def nsi_release(self, cid: str) -> dict:
        return self._nsi_op("nsi.release", {"cid": cid},
                            lambda: self.nsi.release(cid))

    # --- reads ---

    def topology_doc(self, at_tick: int | None = None) -> dict:
        with self.lock:
            controller = self.cluster.controller()
            if controller is None:
                return _error(NoQuorum("no alive replica to serve reads"))
            doc = controller.fabric.to_doc()
            tick = controller.now if at_tick is None else at_tick
            for link in doc["links"]:
                cal = controller.book.links.get(link["id"])
                link["committed_mbps"] = cal.peak_load(tick, tick + 1) if cal else 0
            doc["now"] = controller.now
            doc["at_tick"] = tick
            return {"ok": True, "value": doc}

    def services_doc(self) -> dict:
        return self._read(lambda c: {"services": c.scheduler.list_docs()})

    def service_doc(self, service_id: str) -> dict:
        return self._read(lambda c: c.scheduler.get(service_id).to_doc())

    def circuits_doc(self) -> dict:
        return self._read(lambda c: {"circuits": c.sdxl2.list_docs()})

    def circuit_doc(self, name: str) -> dict:
        return self._read(lambda c: c.sdxl2.get(name).to_doc())

    def cluster_doc(self) -> dict:
        with self.lock:
            doc = self.cluster.to_doc()
            controller = self.cluster.controller()
            doc["now"] = controller.now if controller else None
            doc["rule_table_hash"] = self.network.rule_table_hash()
            return {"ok": True, "value": doc}

    def nsi_list_doc(self) -> dict:
        if self.nsi is None:
            return _error(NsiUnavailable("no peer domain configured"))
        with self.lock:
            return {"ok": True, "value": {"reservations": self.nsi.list_docs()}}

    def nsi_doc(self, cid: str) -> dict:
        if self.nsi is None:
            return _error(NsiUnavailable("no peer domain configured"))
        with self.lock:
            try:
                return {"ok": True, "value": self.nsi.get_doc(cid)}
            except FabricError as e:
                return _error(e)

    def nsi_trace_text(self) -> str:
        return self.nsi.trace_text() if self.nsi else ""

    def events_since(self, seq: int) -> list[dict]:
        return self.feed.since(seq)

    def journal_doc(self) -> dict:
        with self.lock:
            return {"ok": True, "value": {"entries": copy.deepcopy(self.journal)}}

    def state_hash(self) -> str:
        with self.lock:
            controller = self.cluster.controller()
            parts = {
                "local": controller.state_hash() if controller else None,
                "dataplane": self.network.rule_table_hash(),
            }
            if self.peer_cluster is not None:
                peer = self.peer_cluster.controller()
                parts["peer"] = peer.state_hash() if peer else None
            if self.nsi is not None:
                parts["nsi"] = hashlib.sha256(
                    canonical_json(self.nsi.to_doc()).encode()).hexdigest()
            return hashlib.sha256(canonical_json(parts).encode()).hexdigest()

    # --- replay ---

    @classmethod
    def replay(cls, config: NodeConfig, journal: list[dict]) -> "ServiceNode":
        node = cls(config)
        for entry in journal:
            api, args = entry["api"], entry["args"]
            node._dispatch_journal(api, args)
        return node

    def _dispatch_journal(self, api: str, args: dict) -> None:
        table = {
            "bod.request": lambda: self.bod_request(args),
            "bod.cancel": lambda: self.bod_cancel(args["id"]),
            "sdxl2.create": lambda: self.circuit_create(args),
            "sdxl2.remove": lambda: self.circuit_remove(args["name"]),
            "link.event": lambda: self.link_event(args["link_id"], args["state"]),
            "port.event": lambda: self.port_event(args["vfc"], args["port"], args["state"]),
            "clock.advance": lambda: self.clock_advance(args["ticks"]),
            "inject": lambda: self.inject(args),
            "cluster.kill": lambda: self.cluster_kill(args["id"]),
            "cluster.revive": lambda: self.cluster_revive(args["id"]),
            "nsi.reserve": lambda: self.nsi_reserve(args),
            "nsi.commit": lambda: self.nsi_commit(args["cid"]),
            "nsi.provision": lambda: self.nsi_provision(args["cid"]),
            "nsi.release": lambda: self.nsi_release(args["cid"]),
        }
        action = table.get(api)
        if action is None:
            raise InvalidArgument(f"unknown journal entry {api!r}")
        action()

    # --- internals ---

    def _command(self, api: str, args: dict, payload: dict) -> dict:
        with self.lock:
            self._journal(api, args)
            return self.local_port.submit(payload)

    def _nsi_op(self, api: str, args: dict, action) -> dict:
        with self.lock:
            self._journal(api, args)
            if self.nsi is None:
                return _error(NsiUnavailable("no peer domain configured"))
            try:
                doc, events = action()
            except FabricError as e:
                return _error(e)
            self._publish(events, domain="nsi")
            return {"ok": True, "value": doc}

    def _journal(self, api: str, args: dict) -> None:
        self.journal.append({"api": api, "args": copy.deepcopy(args)})

    def _execute(self, effects) -> None:
        for effect in effects:
            if isinstance(effect, InstallRules):
                self.network.install_rules(effect.vfc_id, list(effect.rules),
                                           list(effect.meters))
            elif isinstance(effect, RemoveRules):
                self.network.remove_rules(effect.cookie)
            elif isinstance(effect, FlipPort):
                self.physical.set_port_state(effect.vfc_id, effect.port_id,
                                             effect.up)

    def _publish(self, events: list[dict], domain: str | None = None) -> None:
        if domain and domain != "local":
            events = [dict(e, domain=domain) for e in events]
        self.feed.publish(events)

    def _read(self, fn) -> dict:
        with self.lock:
            controller = self.cluster.controller()
            if controller is None:
                return _error(NoQuorum("no alive replica to serve reads"))
            try:
                return {"ok": True, "value": fn(controller)}
            except FabricError as e:
                return _error(e)

    def close(self) -> None:
        with self.feed.cond:
            self.closed = True
            self.feed.cond.notify_all()


def _error(e: FabricError) -> dict:
    return {"ok": False, "error": e.to_doc()}
