"""The controller state machine replicated across cluster instances.

One Controller owns a full model of the fabric plus all service state
(calendars, timed services, circuits, dry holds) and a virtual-clock
position.  Commands are plain JSON-able dicts; applying one returns the
command's result, the events it caused and the southbound effects to run
against the shared dataplane.  Application is deterministic and atomic: a
failed command changes nothing and produces an error result.
"""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass, field

from . import failover
from .effects import Effect, FlipPort
from .errors import FabricError, InvalidArgument, UnknownLink
from .reservations import CalendarBook
from .scheduler import BodRequest, BodScheduler
from .sdxl2 import Sdxl2App
from .topology import load_topology


@dataclass
class ApplyOutcome:
    result: dict
    events: list[dict] = field(default_factory=list)
    effects: list[Effect] = field(default_factory=list)


def canonical_json(doc) -> str:
    return json.dumps(doc, sort_keys=True, separators=(",", ":"))


class Controller:
    def __init__(self, topology_doc: dict, extra_endpoints: list[dict] = (),
                 bod_overlay: str = "BOD", sdx_overlay: str = "SDXL2"):
        self.fabric = load_topology(topology_doc)
        for ep in extra_endpoints:
            self.fabric.add_endpoint(ep["id"], ep["vfc"], ep["port"], ep["access_mbps"])
        self.book = CalendarBook.for_fabric(self.fabric)
        self.scheduler = BodScheduler(self.fabric, self.book, overlay=bod_overlay)
        self.sdxl2 = Sdxl2App(self.fabric, self.book, overlay=sdx_overlay)
        self.now = 0

    # --- command application ---

    def apply(self, payload: dict) -> ApplyOutcome:
        op = payload.get("op")
        handler = _HANDLERS.get(op)
        if handler is None:
            return ApplyOutcome({"ok": False, "error": {
                "kind": "InvalidArgument", "message": f"unknown op {op!r}"}})
        payload = copy.deepcopy(payload)
        try:
            value, events, effects = handler(self, payload)
        except FabricError as e:
            return ApplyOutcome({"ok": False, "error": e.to_doc()})
        for event in events:
            event.setdefault("tick", self.now)
        return ApplyOutcome({"ok": True, "value": value}, events, effects)

    def _op_bod_request(self, p):
        request = BodRequest(
            src=p["src"], dst=p["dst"], bandwidth_mbps=p["mbps"],
            start=p["start"], end=p["end"],
            src_vlan=p.get("src_vlan"), dst_vlan=p.get("dst_vlan"),
        )
        service, events, effects = self.scheduler.request_service(request, self.now)
        return service.to_doc(), events, effects

    def _op_bod_cancel(self, p):
        service, events, effects = self.scheduler.cancel_service(p["id"], self.now)
        return service.to_doc(), events, effects

    def _op_sdxl2_create(self, p):
        ep1 = (p["ep1"]["endpoint"], p["ep1"].get("vlan"))
        ep2 = (p["ep2"]["endpoint"], p["ep2"].get("vlan"))
        circuit, events, effects = self.sdxl2.create_circuit(p["name"], ep1, ep2, self.now)
        return circuit.to_doc(), events, effects

    def _op_sdxl2_remove(self, p):
        circuit, events, effects = self.sdxl2.remove_circuit(p["name"])
        return circuit.to_doc(), events, effects

    def _op_topo_port(self, p):
        up = _parse_state(p["state"])
        return self._flip_port(p["vfc"], p["port"], up)

    def _op_topo_link(self, p):
        link = self.fabric.require_link(p["link"])
        up = _parse_state(p["state"])
        if up:
            # both ends must come up for the link to recover
            value1, events1, effects1 = self._flip_port(*link.a, True)
            value2, events2, effects2 = self._flip_port(*link.b, True)
            return ({"events": value1["events"] + value2["events"]},
                    events1 + events2, effects1 + effects2)
        return self._flip_port(*link.a, False)

    def _flip_port(self, vfc_id, port_id, up):
        events = self.fabric.set_port_state(vfc_id, port_id, up)
        effects: list[Effect] = []
        if events:
            effects.append(FlipPort(vfc_id, port_id, up))
        all_events = list(events)
        for event in events:
            if event["kind"] == "LinkDown":
                report, ev, ef = failover.handle_link_down(
                    event["link"], fabric=self.fabric,
                    scheduler=self.scheduler, sdxl2=self.sdxl2, now=self.now,
                )
                all_events += ev + [report]
                effects += ef
            elif event["kind"] == "LinkUp":
                failover.handle_link_up(event["link"], fabric=self.fabric)
        return {"events": all_events}, all_events, effects

    def _op_clock_advance(self, p):
        ticks = p["ticks"]
        if not isinstance(ticks, int) or isinstance(ticks, bool) or ticks < 0:
            raise InvalidArgument("ticks must be a non-negative integer")
        reports = []
        events, effects = [], []
        for _ in range(ticks):
            self.now += 1
            tick_events, tick_effects = self.scheduler.on_tick(self.now)
            reports.append({"tick": self.now, "events": tick_events})
            events.append({"kind": "TickReport", "tick": self.now,
                           "events": len(tick_events)})
            events += tick_events
            effects += tick_effects
        return {"now": self.now, "reports": reports}, events, effects

    def _op_nsi_hold(self, p):
        request = BodRequest(
            src=p["src"], dst=p["dst"], bandwidth_mbps=p["mbps"],
            start=p["start"], end=p["end"],
            src_vlan=p.get("src_vlan"), dst_vlan=p.get("dst_vlan"),
        )
        hold = self.scheduler.hold_resources(p["hold_id"], request, self.now)
        return {"hold_id": hold.id, "path": list(hold.path),
                "link_vlans": dict(hold.link_vlans)}, [], []

    def _op_nsi_commit_hold(self, p):
        hold = self.scheduler.commit_hold(p["hold_id"])
        return {"hold_id": hold.id, "firm": True}, [], []

    def _op_nsi_release_hold(self, p):
        self.scheduler.release_hold(p["hold_id"])
        return {"hold_id": p["hold_id"], "released": True}, [], []

    def _op_nsi_provision(self, p):
        service, events, effects = self.scheduler.provision_hold(p["hold_id"], self.now)
        return service.to_doc(), events, effects

    # --- introspection ---

    def state_doc(self) -> dict:
        return {
            "now": self.now,
            "fabric": self.fabric.to_doc(),
            "calendars": self.book.to_doc(),
            "bod": self.scheduler.to_doc(),
            "sdxl2": self.sdxl2.to_doc(),
        }

    def state_hash(self) -> str:
        return hashlib.sha256(canonical_json(self.state_doc()).encode()).hexdigest()


def _parse_state(state) -> bool:
    if state in ("up", "Up", True):
        return True
    if state in ("down", "Down", False):
        return False
    raise InvalidArgument(f"state must be 'up' or 'down', got {state!r}")


_HANDLERS = {
    "bod.request": Controller._op_bod_request,
    "bod.cancel": Controller._op_bod_cancel,
    "sdxl2.create": Controller._op_sdxl2_create,
    "sdxl2.remove": Controller._op_sdxl2_remove,
    "topo.port": Controller._op_topo_port,
    "topo.link": Controller._op_topo_link,
    "clock.advance": Controller._op_clock_advance,
    "nsi.hold": Controller._op_nsi_hold,
    "nsi.commit_hold": Controller._op_nsi_commit_hold,
    "nsi.release_hold": Controller._op_nsi_release_hold,
    "nsi.provision": Controller._op_nsi_provision,
}
