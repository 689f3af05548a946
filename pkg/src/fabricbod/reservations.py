"""Per-resource reservation calendars.

Each link (and each client endpoint's access edge) gets a calendar tracking
time-windowed bandwidth allocations and, for links, VLAN holds.  Windows are
half-open [start, end) ticks, so back-to-back reservations share a boundary
tick without conflict.  `FOREVER` stands in for an unbounded end.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import UnknownEndpoint, UnknownLink
from .fabric import Fabric, VLAN_MAX, VLAN_MIN

FOREVER = 1 << 60


@dataclass(frozen=True)
class Allocation:
    start: int
    end: int
    bandwidth_mbps: int
    owner: str


@dataclass(frozen=True)
class VlanHold:
    start: int
    end: int
    vlan: int
    owner: str


def windows_overlap(a_start: int, a_end: int, b_start: int, b_end: int) -> bool:
    return a_start < b_end and b_start < a_end


class ReservationCalendar:
    def __init__(self, capacity_mbps: int):
        self.capacity_mbps = capacity_mbps
        self.allocations: list[Allocation] = []
        self.vlan_holds: list[VlanHold] = []

    # --- bandwidth ---

    def peak_load(self, start: int, end: int) -> int:
        """Maximum summed allocation over [start, end), by breakpoint sweep."""
        if start >= end:
            return 0
        points = {start}
        for a in self.allocations:
            if windows_overlap(a.start, a.end, start, end):
                if start < a.start < end:
                    points.add(a.start)
                if start < a.end < end:
                    points.add(a.end)
        peak = 0
        for p in points:
            load = sum(
                a.bandwidth_mbps for a in self.allocations if a.start <= p < a.end
            )
            peak = max(peak, load)
        return peak

    def residual(self, start: int, end: int) -> int:
        return self.capacity_mbps - self.peak_load(start, end)

    def allocate(self, owner: str, start: int, end: int, bandwidth_mbps: int) -> None:
        self.allocations.append(Allocation(start, end, bandwidth_mbps, owner))

    # --- vlans ---

    def vlan_is_free(self, vlan: int, start: int, end: int) -> bool:
        return not any(
            h.vlan == vlan and windows_overlap(h.start, h.end, start, end)
            for h in self.vlan_holds
        )

    def lowest_free_vlan(self, start: int, end: int) -> int | None:
        taken = sorted(
            {h.vlan for h in self.vlan_holds if windows_overlap(h.start, h.end, start, end)}
        )
        candidate = VLAN_MIN
        for vlan in taken:
            if vlan == candidate:
                candidate += 1
            elif vlan > candidate:
                break
        return candidate if candidate <= VLAN_MAX else None

    def hold_vlan(self, owner: str, start: int, end: int, vlan: int) -> None:
        self.vlan_holds.append(VlanHold(start, end, vlan, owner))

    # --- lifecycle ---

    def release(self, owner: str) -> int:
        before = len(self.allocations) + len(self.vlan_holds)
        self.allocations = [a for a in self.allocations if a.owner != owner]
        self.vlan_holds = [h for h in self.vlan_holds if h.owner != owner]
        return before - (len(self.allocations) + len(self.vlan_holds))

    def owners(self) -> set[str]:
        return {a.owner for a in self.allocations} | {h.owner for h in self.vlan_holds}

    def to_doc(self) -> dict:
        return {
            "capacity_mbps": self.capacity_mbps,
            "allocations": sorted(
                [list(a.__dict__.values()) for a in self.allocations]
            ),
            "vlan_holds": sorted(
                [list(h.__dict__.values()) for h in self.vlan_holds]
            ),
        }


class CalendarBook:
    """All calendars of one controller: per-link and per-endpoint-access."""

    def __init__(self):
        self.links: dict[str, ReservationCalendar] = {}
        self.endpoints: dict[str, ReservationCalendar] = {}

    @classmethod
    def for_fabric(cls, fabric: Fabric) -> "CalendarBook":
        book = cls()
        for link in fabric.links.values():
            book.links[link.id] = ReservationCalendar(link.capacity_mbps)
        for ep in fabric.endpoints.values():
            book.endpoints[ep.id] = ReservationCalendar(ep.access_mbps)
        return book

    def attach_link(self, link_id: str, capacity_mbps: int) -> None:
        self.links[link_id] = ReservationCalendar(capacity_mbps)

    def attach_endpoint(self, endpoint_id: str, access_mbps: int) -> None:
        self.endpoints[endpoint_id] = ReservationCalendar(access_mbps)

    def link(self, link_id: str) -> ReservationCalendar:
        cal = self.links.get(link_id)
        if cal is None:
            raise UnknownLink(f"link {link_id!r}")
        return cal

    def endpoint(self, endpoint_id: str) -> ReservationCalendar:
        cal = self.endpoints.get(endpoint_id)
        if cal is None:
            raise UnknownEndpoint(f"endpoint {endpoint_id!r}")
        return cal

    def release_owner(self, owner: str) -> int:
        removed = 0
        for cal in list(self.links.values()) + list(self.endpoints.values()):
            removed += cal.release(owner)
        return removed

    def retag_owner(self, old: str, new: str) -> None:
        for cal in list(self.links.values()) + list(self.endpoints.values()):
            cal.allocations = [
                Allocation(a.start, a.end, a.bandwidth_mbps, new) if a.owner == old else a
                for a in cal.allocations
            ]
            cal.vlan_holds = [
                VlanHold(h.start, h.end, h.vlan, new) if h.owner == old else h
                for h in cal.vlan_holds
            ]

    def to_doc(self) -> dict:
        return {
            "links": {k: v.to_doc() for k, v in sorted(self.links.items())},
            "endpoints": {k: v.to_doc() for k, v in sorted(self.endpoints.items())},
        }
