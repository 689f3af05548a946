"""Best-effort point-to-point layer-2 circuits between client endpoints.

Circuits are unmetered: bandwidth enforcement belongs to the timed service
only.  A circuit's path is computed with zero demand on the SDXL2 overlay
and holds one VLAN per link from now to forever; plain-Ethernet endpoints
get a transport VLAN pushed at ingress and popped at egress, tagged
endpoints are translated.
"""

from __future__ import annotations

from dataclasses import dataclass

from .effects import RemoveRules
from .errors import DuplicateName, EndpointBusy, Rejected, UnknownCircuit, UnknownEndpoint
from .fabric import Fabric
from .reservations import FOREVER, CalendarBook
from .scheduler import compile_rules, compute_path

INSTALLED = "Installed"
REROUTING = "Rerouting"
FAILED = "Failed"
WITHDRAWN = "Withdrawn"


@dataclass
class L2Circuit:
    name: str
    ep1: tuple[str, int | None]
    ep2: tuple[str, int | None]
    path: list[str]
    link_vlans: dict[str, int]
    state: str = INSTALLED
    rule_count: int = 0

    @property
    def cookie(self) -> str:
        return f"ckt:{self.name}"

    def to_doc(self) -> dict:
        return {
            "name": self.name,
            "ep1": {"endpoint": self.ep1[0], "vlan": self.ep1[1]},
            "ep2": {"endpoint": self.ep2[0], "vlan": self.ep2[1]},
            "state": self.state,
            "path": list(self.path),
            "link_vlans": dict(self.link_vlans),
        }


class Sdxl2App:
    def __init__(self, fabric: Fabric, book: CalendarBook, overlay: str = "SDXL2"):
        self.fabric = fabric
        self.book = book
        self.overlay = overlay
        self.circuits: dict[str, L2Circuit] = {}

    # --- operations ---

    def create_circuit(self, name: str, ep1: tuple[str, int | None],
                       ep2: tuple[str, int | None], now: int):
        if name in self.circuits:
            raise DuplicateName(f"circuit {name!r} already exists")
        if ep1[0] == ep2[0]:
            raise EndpointBusy("a circuit cannot start and end on the same endpoint")
        src = self._require_overlay_endpoint(ep1[0])
        dst = self._require_overlay_endpoint(ep2[0])
        for attachment in (ep1, ep2):
            if self._attachment_busy(attachment):
                raise EndpointBusy(
                    f"endpoint {attachment[0]!r} vlan {attachment[1]} already in use"
                )
        path = compute_path(self.fabric, self.book, self.overlay, src.vfc,
                            dst.vfc, 0, now, FOREVER)
        if path is None:
            raise Rejected("Infeasible", "no connected path in the overlay")
        circuit = L2Circuit(name, ep1, ep2, path, {})
        events, effects = self._install(circuit, now)
        self.circuits[name] = circuit
        return circuit, events, effects

    def remove_circuit(self, name: str):
        circuit = self.circuits.get(name)
        if circuit is None or circuit.state == WITHDRAWN:
            raise UnknownCircuit(f"circuit {name!r}")
        effects = []
        if circuit.state in (INSTALLED, REROUTING):
            effects.append(RemoveRules(circuit.cookie))
        self.book.release_owner(circuit.cookie)
        circuit.state = WITHDRAWN
        events = [{"kind": "CircuitRemoved", "name": name}]
        return circuit, events, effects

    def list_docs(self) -> list[dict]:
        return [self.circuits[k].to_doc() for k in sorted(self.circuits)]

    def get(self, name: str) -> L2Circuit:
        circuit = self.circuits.get(name)
        if circuit is None:
            raise UnknownCircuit(f"circuit {name!r}")
        return circuit

    def installed_circuits_using(self, link_id: str) -> list[L2Circuit]:
        return [
            self.circuits[k] for k in sorted(self.circuits)
            if self.circuits[k].state == INSTALLED and link_id in self.circuits[k].path
        ]

    def reroute_circuit(self, circuit: L2Circuit, now: int, excluded):
        """Recompute around a dead link; Failed when the overlay is split."""
        circuit.state = REROUTING
        effects = [RemoveRules(circuit.cookie)]
        self.book.release_owner(circuit.cookie)
        src = self.fabric.require_endpoint(circuit.ep1[0])
        dst = self.fabric.require_endpoint(circuit.ep2[0])
        path = compute_path(self.fabric, self.book, self.overlay, src.vfc,
                            dst.vfc, 0, now, FOREVER, excluded)
        if path is None:
            circuit.state = FAILED
            return False, [{"kind": "CircuitFailed", "name": circuit.name}], effects
        circuit.path = path
        events, installs = self._install(circuit, now)
        events = [{
            "kind": "CircuitRerouted",
            "name": circuit.name,
            "path": list(circuit.path),
        }] + events[1:]
        return True, events, effects + installs

    # --- internals ---

    def _install(self, circuit: L2Circuit, now: int):
        circuit.link_vlans = {}
        for link_id in circuit.path:
            cal = self.book.link(link_id)
            vlan = cal.lowest_free_vlan(now, FOREVER)
            circuit.link_vlans[link_id] = vlan
            cal.hold_vlan(circuit.cookie, now, FOREVER, vlan)
        installs = compile_rules(
            circuit.cookie, self.fabric, circuit.ep1[0], circuit.ep2[0],
            circuit.ep1[1], circuit.ep2[1], circuit.path, circuit.link_vlans,
            rate_mbps=None,
        )
        circuit.state = INSTALLED
        circuit.rule_count = sum(len(i.rules) for i in installs)
        events = [{"kind": "CircuitInstalled", "name": circuit.name,
                   "path": list(circuit.path)}]
        return events, installs

    def _attachment_busy(self, attachment: tuple[str, int | None]) -> bool:
        return any(
            c.state in (INSTALLED, REROUTING)
            and (c.ep1 == attachment or c.ep2 == attachment)
            for c in self.circuits.values()
        )

    def _require_overlay_endpoint(self, endpoint_id: str):
        ep = self.fabric.require_endpoint(endpoint_id)
        if self.fabric.vfcs[ep.vfc].overlay != self.overlay:
            raise UnknownEndpoint(
                f"endpoint {endpoint_id!r} is not in the {self.overlay} overlay"
            )
        return ep

    def to_doc(self) -> dict:
        return {"circuits": self.list_docs()}
