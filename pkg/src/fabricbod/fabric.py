"""Topology substrate: physical devices, carved VFCs, links, client endpoints.

A physical device owns physical ports and can be carved into up to 256
virtual forwarding contexts (VFCs).  Each VFC logical port is backed either
by a dedicated physical port or by a VLAN tunnel on a shared physical port;
tunnel VLANs on one physical port never collide, which is what isolates
overlays sharing the underlay.  Links join logical ports of two VFCs in the
same overlay, and client endpoints attach to otherwise unused logical ports.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import (
    CrossOverlayLink,
    DuplicateId,
    InvalidLink,
    InvalidSpeed,
    InvalidVlan,
    PhysicalPortAlreadyDedicated,
    PortInUse,
    TunnelVlanConflict,
    UnknownDevice,
    UnknownEndpoint,
    UnknownLink,
    UnknownPort,
    UnknownVfc,
    VfcLimitExceeded,
)

PORT_SPEEDS_MBPS = (1000, 10000, 100000)
MAX_VFCS_PER_DEVICE = 256
VLAN_MIN = 2
VLAN_MAX = 4094

LINK_UP = "Up"
LINK_DOWN = "Down"


@dataclass
class PhysicalPort:
    id: str
    speed_mbps: int


@dataclass
class PhysicalDevice:
    id: str
    ports: dict[str, PhysicalPort] = field(default_factory=dict)
    vfcs: list[str] = field(default_factory=list)

    @property
    def vfc_count(self) -> int:
        return len(self.vfcs)


@dataclass(frozen=True)
class PortBacking:
    """Either a dedicated physical port or a VLAN tunnel on one."""

    kind: str  # "physical" | "tunnel"
    physical_port: str
    tunnel_vlan: int | None = None

    def to_doc(self) -> dict:
        doc = {"kind": self.kind, "physical_port": self.physical_port}
        if self.kind == "tunnel":
            doc["tunnel_vlan"] = self.tunnel_vlan
        return doc


@dataclass
class LogicalPort:
    id: str
    backing: PortBacking
    up: bool = True


@dataclass
class Vfc:
    id: str
    device: str
    overlay: str
    ports: dict[str, LogicalPort] = field(default_factory=dict)


@dataclass
class Link:
    """Bidirectional inter-VFC link; state is derived from its port states."""

    id: str
    a: tuple[str, str]  # (vfc_id, logical_port_id)
    b: tuple[str, str]
    capacity_mbps: int


@dataclass
class ClientEndpoint:
    id: str
    vfc: str
    port: str
    access_mbps: int


class Fabric:
    """Mutable topology registry.

    All mutation methods validate first and only then commit, so a raised
    error never leaves partial state behind.  Port/link state changes are
    idempotent and report the events they caused.
    """

    def __init__(self):
        self.devices: dict[str, PhysicalDevice] = {}
        self.vfcs: dict[str, Vfc] = {}
        self.links: dict[str, Link] = {}
        self.endpoints: dict[str, ClientEndpoint] = {}
        self._port_link: dict[tuple[str, str], str] = {}
        self._port_endpoint: dict[tuple[str, str], str] = {}

    # --- construction ---

    def add_device(self, device_id: str, port_specs: list[tuple[str, int]]) -> PhysicalDevice:
        if device_id in self.devices:
            raise DuplicateId(f"device {device_id!r} already exists")
        seen = set()
        for port_id, speed in port_specs:
            if port_id in seen:
                raise DuplicateId(f"device {device_id!r}: duplicate port {port_id!r}")
            seen.add(port_id)
            if speed not in PORT_SPEEDS_MBPS:
                raise InvalidSpeed(
                    f"device {device_id!r} port {port_id!r}: speed {speed} not in {PORT_SPEEDS_MBPS}"
                )
        device = PhysicalDevice(device_id)
        for port_id, speed in port_specs:
            device.ports[port_id] = PhysicalPort(port_id, speed)
        self.devices[device_id] = device
        return device

    def carve_vfc(
        self,
        device_id: str,
        overlay: str,
        port_backings: list[tuple[str, PortBacking]],
        vfc_id: str | None = None,
    ) -> Vfc:
        device = self.devices.get(device_id)
        if device is None:
            raise UnknownDevice(f"device {device_id!r}")
        if device.vfc_count >= MAX_VFCS_PER_DEVICE:
            raise VfcLimitExceeded(
                f"device {device_id!r} already hosts {MAX_VFCS_PER_DEVICE} VFCs"
            )
        if vfc_id is None:
            vfc_id = f"{device_id}-vfc{device.vfc_count}"
        if vfc_id in self.vfcs:
            raise DuplicateId(f"vfc {vfc_id!r} already exists")

        seen_ports = set()
        for port_id, backing in port_backings:
            if port_id in seen_ports:
                raise DuplicateId(f"vfc {vfc_id!r}: duplicate logical port {port_id!r}")
            seen_ports.add(port_id)
            if backing.physical_port not in device.ports:
                raise UnknownPort(
                    f"device {device_id!r} has no port {backing.physical_port!r}"
                )
            if backing.kind == "tunnel":
                vlan = backing.tunnel_vlan
                if vlan is None or not (VLAN_MIN <= vlan <= VLAN_MAX):
                    raise InvalidVlan(
                        f"tunnel vlan {vlan!r} outside {VLAN_MIN}..{VLAN_MAX}"
                    )
            elif backing.kind != "physical":
                raise InvalidVlan(f"unknown backing kind {backing.kind!r}")

        # Isolation against every backing already carved on this device, plus
        # the ones being added now.
        existing = self._device_backings(device_id)
        for port_id, backing in port_backings:
            peers = existing.setdefault(backing.physical_port, [])
            if backing.kind == "physical":
                if peers:
                    raise PhysicalPortAlreadyDedicated(
                        f"physical port {device_id}/{backing.physical_port} already backs a VFC port"
                    )
            else:
                for peer in peers:
                    if peer.kind == "physical":
                        raise PhysicalPortAlreadyDedicated(
                            f"physical port {device_id}/{backing.physical_port} is dedicated"
                        )
                    if peer.tunnel_vlan == backing.tunnel_vlan:
                        raise TunnelVlanConflict(
                            f"tunnel vlan {backing.tunnel_vlan} already used on "
                            f"{device_id}/{backing.physical_port}"
                        )
            peers.append(backing)

        vfc = Vfc(vfc_id, device_id, overlay)
        for port_id, backing in port_backings:
            vfc.ports[port_id] = LogicalPort(port_id, backing)
        self.vfcs[vfc_id] = vfc
        device.vfcs.append(vfc_id)
        return vfc

    def add_link(
        self,
        link_id: str,
        a: tuple[str, str],
        b: tuple[str, str],
        capacity_mbps: int,
    ) -> Link:
        if link_id in self.links:
            raise DuplicateId(f"link {link_id!r} already exists")
        if a == b:
            raise InvalidLink(f"link {link_id!r}: both ends are {a}")
        if capacity_mbps <= 0:
            raise InvalidLink(f"link {link_id!r}: capacity must be positive")
        for end in (a, b):
            self._require_port(*end)
            self._require_port_free(end)
        if self.vfcs[a[0]].overlay != self.vfcs[b[0]].overlay:
            raise CrossOverlayLink(
                f"link {link_id!r} joins overlays "
                f"{self.vfcs[a[0]].overlay!r} and {self.vfcs[b[0]].overlay!r}"
            )
        link = Link(link_id, a, b, capacity_mbps)
        self.links[link_id] = link
        self._port_link[a] = link_id
        self._port_link[b] = link_id
        return link

    def add_endpoint(self, endpoint_id: str, vfc_id: str, port_id: str, access_mbps: int) -> ClientEndpoint:
        if endpoint_id in self.endpoints:
            raise DuplicateId(f"endpoint {endpoint_id!r} already exists")
        self._require_port(vfc_id, port_id)
        self._require_port_free((vfc_id, port_id))
        ep = ClientEndpoint(endpoint_id, vfc_id, port_id, access_mbps)
        self.endpoints[endpoint_id] = ep
        self._port_endpoint[(vfc_id, port_id)] = endpoint_id
        return ep

    # --- state ---

    def set_port_state(self, vfc_id: str, port_id: str, up: bool) -> list[dict]:
        port = self._require_port(vfc_id, port_id)
        if port.up == up:
            return []
        link_id = self._port_link.get((vfc_id, port_id))
        before = self.link_state(link_id) if link_id else None
        port.up = up
        events = [{
            "kind": "PortUp" if up else "PortDown",
            "vfc": vfc_id,
            "port": port_id,
        }]
        if link_id:
            after = self.link_state(link_id)
            if before != after:
                events.append({
                    "kind": "LinkUp" if after == LINK_UP else "LinkDown",
                    "link": link_id,
                })
        return events

    def link_state(self, link_id: str) -> str:
        link = self.links.get(link_id)
        if link is None:
            raise UnknownLink(f"link {link_id!r}")
        a_up = self.vfcs[link.a[0]].ports[link.a[1]].up
        b_up = self.vfcs[link.b[0]].ports[link.b[1]].up
        return LINK_UP if (a_up and b_up) else LINK_DOWN

    def link_up(self, link_id: str) -> bool:
        return self.link_state(link_id) == LINK_UP

    # --- lookups ---

    def require_vfc(self, vfc_id: str) -> Vfc:
        vfc = self.vfcs.get(vfc_id)
        if vfc is None:
            raise UnknownVfc(f"vfc {vfc_id!r}")
        return vfc

    def require_link(self, link_id: str) -> Link:
        link = self.links.get(link_id)
        if link is None:
            raise UnknownLink(f"link {link_id!r}")
        return link

    def require_endpoint(self, endpoint_id: str) -> ClientEndpoint:
        ep = self.endpoints.get(endpoint_id)
        if ep is None:
            raise UnknownEndpoint(f"endpoint {endpoint_id!r}")
        return ep

    def attachment(self, vfc_id: str, port_id: str) -> tuple[str, str] | None:
        """What hangs off a logical port: ("link", id), ("endpoint", id) or None."""
        link_id = self._port_link.get((vfc_id, port_id))
        if link_id:
            return ("link", link_id)
        ep_id = self._port_endpoint.get((vfc_id, port_id))
        if ep_id:
            return ("endpoint", ep_id)
        return None

    def link_peer(self, link: Link, vfc_id: str) -> tuple[str, str]:
        if link.a[0] == vfc_id:
            return link.b
        if link.b[0] == vfc_id:
            return link.a
        raise UnknownLink(f"link {link.id!r} does not touch vfc {vfc_id!r}")

    def links_of_overlay(self, overlay: str) -> list[Link]:
        return [l for l in self.links.values() if self.vfcs[l.a[0]].overlay == overlay]

    def port_is_up(self, vfc_id: str, port_id: str) -> bool:
        return self.vfcs[vfc_id].ports[port_id].up

    # --- serialization ---

    def to_doc(self) -> dict:
        """Round-trippable document, including runtime port/link state."""
        return {
            "devices": [
                {
                    "id": d.id,
                    "ports": [
                        {"id": p.id, "speed_mbps": p.speed_mbps}
                        for p in d.ports.values()
                    ],
                }
                for d in self.devices.values()
            ],
            "vfcs": [
                {
                    "id": v.id,
                    "device": v.device,
                    "overlay": v.overlay,
                    "ports": [
                        {"id": p.id, "backing": p.backing.to_doc(), "up": p.up}
                        for p in v.ports.values()
                    ],
                }
                for v in self.vfcs.values()
            ],
            "links": [
                {
                    "id": l.id,
                    "a": {"vfc": l.a[0], "port": l.a[1]},
                    "b": {"vfc": l.b[0], "port": l.b[1]},
                    "capacity_mbps": l.capacity_mbps,
                    "state": self.link_state(l.id),
                }
                for l in self.links.values()
            ],
            "endpoints": [
                {"id": e.id, "vfc": e.vfc, "port": e.port, "access_mbps": e.access_mbps}
                for e in self.endpoints.values()
            ],
        }

    # --- internals ---

    def _device_backings(self, device_id: str) -> dict[str, list[PortBacking]]:
        by_port: dict[str, list[PortBacking]] = {}
        for vfc_id in self.devices[device_id].vfcs:
            for lp in self.vfcs[vfc_id].ports.values():
                by_port.setdefault(lp.backing.physical_port, []).append(lp.backing)
        return by_port

    def _require_port(self, vfc_id: str, port_id: str) -> LogicalPort:
        vfc = self.vfcs.get(vfc_id)
        if vfc is None:
            raise UnknownPort(f"vfc {vfc_id!r}")
        port = vfc.ports.get(port_id)
        if port is None:
            raise UnknownPort(f"port {vfc_id}/{port_id}")
        return port

    def _require_port_free(self, end: tuple[str, str]) -> None:
        used = self.attachment(*end)
        if used is not None:
            raise PortInUse(f"port {end[0]}/{end[1]} already carries {used[0]} {used[1]!r}")
