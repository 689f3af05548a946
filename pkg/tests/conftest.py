import json
from importlib import resources

import pytest

from fabricbod.controller import Controller
from fabricbod.dataplane import Dataplane
from fabricbod.effects import FlipPort, InstallRules, RemoveRules


def bundled(name):
    with resources.files("fabricbod.data").joinpath(name).open("rb") as fh:
        return json.load(fh)


@pytest.fixture
def pilot_doc():
    return bundled("pilot.topo")


@pytest.fixture
def legacy_doc():
    return bundled("legacy.topo")


class ControllerRig:
    """One controller plus a dataplane over the same fabric.

    Effects are executed inline, which is exactly what a single-replica node
    does; FlipPort re-application is an idempotent no-op because the fabric
    is shared.
    """

    def __init__(self, doc, extra_endpoints=()):
        self.controller = Controller(doc, extra_endpoints=list(extra_endpoints))
        self.network = Dataplane(self.controller.fabric)

    def apply(self, payload):
        outcome = self.controller.apply(payload)
        for effect in outcome.effects:
            if isinstance(effect, InstallRules):
                self.network.install_rules(effect.vfc_id, list(effect.rules),
                                           list(effect.meters))
            elif isinstance(effect, RemoveRules):
                self.network.remove_rules(effect.cookie)
            elif isinstance(effect, FlipPort):
                self.controller.fabric.set_port_state(
                    effect.vfc_id, effect.port_id, effect.up)
        return outcome

    def advance(self, ticks):
        outcomes = []
        for _ in range(ticks):
            self.network.tick(1)
            outcomes.append(self.apply({"op": "clock.advance", "ticks": 1}))
        return outcomes

    def ok(self, payload):
        outcome = self.apply(payload)
        assert outcome.result["ok"], outcome.result
        return outcome

    def inject(self, endpoint, vlan=None, size_bits=1000):
        return self.network.inject(endpoint, vlan, size_bits)


@pytest.fixture
def rig(pilot_doc):
    return ControllerRig(pilot_doc)


def topo_doc(devices=(), vfcs=(), links=(), endpoints=()):
    return {"devices": list(devices), "vfcs": list(vfcs),
            "links": list(links), "endpoints": list(endpoints)}


def line_topology(names, capacity=10000, client_mbps=1000, overlay="BOD"):
    """A chain of VFCs, one per device, with a client on each end VFC."""
    devices, vfcs, links, endpoints = [], [], [], []
    for i, name in enumerate(names):
        ports = [{"id": "cli", "speed_mbps": 1000}]
        if i > 0:
            ports.append({"id": "left", "speed_mbps": 10000})
        if i < len(names) - 1:
            ports.append({"id": "right", "speed_mbps": 10000})
        devices.append({"id": f"dev-{name}", "ports": ports})
        vfc_ports = [{"id": p["id"],
                      "backing": {"kind": "physical", "physical_port": p["id"]}}
                     for p in ports]
        vfcs.append({"id": name, "device": f"dev-{name}", "overlay": overlay,
                     "ports": vfc_ports})
    for a, b in zip(names, names[1:]):
        links.append({"id": f"{a}-{b}", "a": {"vfc": a, "port": "right"},
                      "b": {"vfc": b, "port": "left"},
                      "capacity_mbps": capacity})
    for name in (names[0], names[-1]):
        endpoints.append({"id": f"cl-{name}", "vfc": name, "port": "cli",
                          "access_mbps": client_mbps})
    return topo_doc(devices, vfcs, links, endpoints)
