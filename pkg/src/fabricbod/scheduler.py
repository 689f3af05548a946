"""Time-windowed bandwidth scheduling over the fabric.

Admission works against the per-link reservation calendars: a request is
feasible if some path of Up links in the service overlay has, on every link,
enough residual bandwidth and at least one free VLAN across the whole
window, and both client access edges can carry the demand.  Paths are
minimum-hop, tie-broken by the lexicographically smallest sequence of link
ids, so admission is fully deterministic.  Every link of an admitted service
gets its own VLAN tag (lowest free), translated hop by hop by the compiled
flow rules; bandwidth is enforced by a token-bucket meter at each
direction's ingress only.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field

from .dataplane import (
    FlowRule,
    Meter,
    MeterSpec,
    Output,
    PopVlan,
    PushVlan,
    SetVlan,
    VLAN_UNTAGGED,
)
from .effects import InstallRules, RemoveRules
from .errors import AlreadyTerminal, Rejected, UnknownEndpoint, UnknownService, UnknownVfc
from .fabric import Fabric
from .reservations import FOREVER, CalendarBook

RULE_PRIORITY = 100
BURST_TICKS = 1  # meter burst = one tick's worth of the service rate

SCHEDULED = "Scheduled"
ACTIVE = "Active"
EXPIRED = "Expired"
CANCELLED = "Cancelled"
FAILED = "Failed"

TERMINAL_STATES = (EXPIRED, CANCELLED, FAILED)


@dataclass(frozen=True)
class BodRequest:
    src: str
    dst: str
    bandwidth_mbps: int
    start: int
    end: int
    src_vlan: int | None = None
    dst_vlan: int | None = None


@dataclass
class BodService:
    id: str
    request: BodRequest
    path: list[str]
    link_vlans: dict[str, int]
    state: str = SCHEDULED
    rule_count: int = 0

    def to_doc(self) -> dict:
        r = self.request
        return {
            "id": self.id,
            "src": r.src,
            "dst": r.dst,
            "bandwidth_mbps": r.bandwidth_mbps,
            "start_tick": r.start,
            "end_tick": r.end,
            "src_vlan": r.src_vlan,
            "dst_vlan": r.dst_vlan,
            "state": self.state,
            "path": list(self.path),
            "link_vlans": dict(self.link_vlans),
            "meter_rate_mbps": r.bandwidth_mbps,
        }


@dataclass
class Hold:
    """Dry-hold of admission resources, used by the inter-domain workflow."""

    id: str
    request: BodRequest
    path: list[str]
    link_vlans: dict[str, int]
    firm: bool = False
    service_id: str | None = None


def compute_path(
    fabric: Fabric,
    book: CalendarBook,
    overlay: str,
    src_vfc: str,
    dst_vfc: str,
    demand_mbps: int,
    start: int,
    end: int,
    excluded: frozenset[str] | set[str] = frozenset(),
) -> list[str] | None:
    """Minimum-hop path through the feasible subgraph, or None.

    Feasible links: right overlay, Up, not excluded, residual >= demand over
    the window and at least one VLAN free over the window.  Ties between
    equal-hop paths go to the lexicographically smallest link-id sequence.
    """
    fabric.require_vfc(src_vfc)
    fabric.require_vfc(dst_vfc)
    if src_vfc == dst_vfc:
        return []
    adjacency: dict[str, list[tuple[str, str]]] = {}
    for link in fabric.links_of_overlay(overlay):
        if link.id in excluded or not fabric.link_up(link.id):
            continue
        cal = book.link(link.id)
        if cal.residual(start, end) < demand_mbps:
            continue
        if cal.lowest_free_vlan(start, end) is None:
            continue
        adjacency.setdefault(link.a[0], []).append((link.id, link.b[0]))
        adjacency.setdefault(link.b[0], []).append((link.id, link.a[0]))

    heap: list[tuple[int, tuple[str, ...], str]] = [(0, (), src_vfc)]
    settled: set[str] = set()
    while heap:
        hops, seq, node = heapq.heappop(heap)
        if node in settled:
            continue
        settled.add(node)
        if node == dst_vfc:
            return list(seq)
        for link_id, peer in sorted(adjacency.get(node, [])):
            if peer not in settled:
                heapq.heappush(heap, (hops + 1, seq + (link_id,), peer))
    return None


def compile_rules(
    cookie: str,
    fabric: Fabric,
    src_endpoint: str,
    dst_endpoint: str,
    src_vlan: int | None,
    dst_vlan: int | None,
    path: list[str],
    link_vlans: dict[str, int],
    rate_mbps: int | None = None,
) -> list[InstallRules]:
    """Flow rules for both directions of a service or circuit.

    Pattern per direction: ingress matches the client port and tag (or
    untagged), meters if a rate is given, rewrites to the first link VLAN;
    transit VFCs translate link VLAN to link VLAN; the egress VFC restores
    the far side's client tag (or pops to untagged).
    """
    src = fabric.require_endpoint(src_endpoint)
    dst = fabric.require_endpoint(dst_endpoint)
    forward = _direction_rules(
        cookie, fabric, src, dst, src_vlan, dst_vlan, path, link_vlans,
        rate_mbps, "fwd",
    )
    reverse = _direction_rules(
        cookie, fabric, dst, src, dst_vlan, src_vlan, list(reversed(path)),
        link_vlans, rate_mbps, "rev",
    )
    return forward + reverse


def _direction_rules(cookie, fabric, from_ep, to_ep, from_vlan, to_vlan,
                     path, link_vlans, rate_mbps, tag) -> list[InstallRules]:
    hops = _resolve_ports(fabric, from_ep.vfc, path)
    installs = []
    meter_actions = []
    meters = ()
    if rate_mbps is not None:
        spec = MeterSpec(f"{cookie}:{tag}", cookie, rate_mbps,
                         rate_mbps * 1000 * BURST_TICKS)
        meter_actions = [Meter(spec.meter_id)]
        meters = (spec,)

    if not path:
        vfc = from_ep.vfc
        actions = meter_actions + _translate(from_vlan, to_vlan) + [Output(to_ep.port)]
        rule = FlowRule(cookie, vfc, RULE_PRIORITY, from_ep.port,
                        from_vlan if from_vlan is not None else VLAN_UNTAGGED,
                        tuple(actions))
        return [InstallRules(vfc, (rule,), meters)]

    vlans = [link_vlans[link_id] for link_id in path]
    for i, (vfc, in_port, out_port) in enumerate(hops):
        if i == 0:
            match_port = from_ep.port
            match_vlan = from_vlan if from_vlan is not None else VLAN_UNTAGGED
            rewrite = [SetVlan(vlans[0])] if from_vlan is not None else [PushVlan(vlans[0])]
            actions = meter_actions + rewrite + [Output(out_port)]
            rule_meters = meters
        elif i < len(hops) - 1:
            match_port, match_vlan = in_port, vlans[i - 1]
            actions = [SetVlan(vlans[i]), Output(out_port)]
            rule_meters = ()
        else:
            match_port, match_vlan = in_port, vlans[-1]
            restore = [SetVlan(to_vlan)] if to_vlan is not None else [PopVlan()]
            actions = restore + [Output(to_ep.port)]
            rule_meters = ()
        rule = FlowRule(cookie, vfc, RULE_PRIORITY, match_port, match_vlan,
                        tuple(actions))
        installs.append(InstallRules(vfc, (rule,), rule_meters))
    return installs


def _translate(from_vlan, to_vlan) -> list:
    if from_vlan is not None and to_vlan is not None:
        return [SetVlan(to_vlan)]
    if from_vlan is not None:
        return [PopVlan()]
    if to_vlan is not None:
        return [PushVlan(to_vlan)]
    return []


def _resolve_ports(fabric: Fabric, start_vfc: str, path: list[str]):
    """(vfc, in_port, out_port) per VFC along a direction of the path."""
    hops = []
    current, in_port = start_vfc, None
    for link_id in path:
        link = fabric.require_link(link_id)
        if link.a[0] == current:
            out_port, nxt = link.a[1], link.b
        elif link.b[0] == current:
            out_port, nxt = link.b[1], link.a
        else:
            raise UnknownVfc(f"path link {link_id!r} does not touch vfc {current!r}")
        hops.append((current, in_port, out_port))
        current, in_port = nxt
    hops.append((current, in_port, None))
    return hops


class BodScheduler:
    """Admission, calendars and lifecycle for timed bandwidth services."""

    def __init__(self, fabric: Fabric, book: CalendarBook, overlay: str = "BOD"):
        self.fabric = fabric
        self.book = book
        self.overlay = overlay
        self.services: dict[str, BodService] = {}
        self.holds: dict[str, Hold] = {}
        self._seq = 0

    # --- reads ---

    def residual(self, link_id: str, start: int, end: int) -> int:
        return self.book.link(link_id).residual(start, end)

    def compute_path(self, src_vfc, dst_vfc, demand_mbps, start, end,
                     excluded=frozenset()):
        return compute_path(self.fabric, self.book, self.overlay, src_vfc,
                            dst_vfc, demand_mbps, start, end, excluded)

    def get(self, service_id: str) -> BodService:
        service = self.services.get(service_id)
        if service is None:
            raise UnknownService(f"service {service_id!r}")
        return service

    def list_docs(self) -> list[dict]:
        return [self.services[k].to_doc() for k in sorted(self.services)]

    # --- admission ---

    def admit(self, request: BodRequest, now: int,
              excluded=frozenset()) -> tuple[list[str], dict[str, int]]:
        """Validate and price a request; returns (path, link_vlans) or raises."""
        if request.start >= request.end:
            raise Rejected("BadWindow", "start must precede end")
        if request.end <= now:
            raise Rejected("BadWindow", f"window ends at {request.end}, now is {now}")
        if request.bandwidth_mbps <= 0:
            raise Rejected("BadRequest", "bandwidth must be positive")
        if request.src == request.dst:
            raise Rejected("BadRequest", "src and dst endpoints must differ")
        src = self._require_overlay_endpoint(request.src)
        dst = self._require_overlay_endpoint(request.dst)
        start, end = request.start, request.end
        for ep in (request.src, request.dst):
            if self.book.endpoint(ep).residual(start, end) < request.bandwidth_mbps:
                raise Rejected("Infeasible", f"access edge {ep!r} cannot carry the demand")
        path = self.compute_path(src.vfc, dst.vfc, request.bandwidth_mbps,
                                 start, end, excluded)
        if path is None:
            raise Rejected("Infeasible", "no feasible path for the window")
        link_vlans = {
            link_id: self.book.link(link_id).lowest_free_vlan(start, end)
            for link_id in path
        }
        return path, link_vlans

    def _allocate(self, owner: str, request: BodRequest, path, link_vlans) -> None:
        start, end = request.start, request.end
        self.book.endpoint(request.src).allocate(owner, start, end, request.bandwidth_mbps)
        self.book.endpoint(request.dst).allocate(owner, start, end, request.bandwidth_mbps)
        for link_id in path:
            cal = self.book.link(link_id)
            cal.allocate(owner, start, end, request.bandwidth_mbps)
            cal.hold_vlan(owner, start, end, link_vlans[link_id])

    # --- service lifecycle ---

    def request_service(self, request: BodRequest, now: int):
        path, link_vlans = self.admit(request, now)
        self._seq += 1
        service = BodService(f"bod-{self._seq:04d}", request, path, link_vlans)
        self._allocate(service.id, request, path, link_vlans)
        self.services[service.id] = service
        events = [{"kind": "ServiceScheduled", "service": service.to_doc()}]
        effects = []
        if request.start <= now < request.end:
            events2, effects = self._activate(service, now)
            events += events2
        return service, events, effects

    def cancel_service(self, service_id: str, now: int):
        service = self.get(service_id)
        if service.state in TERMINAL_STATES:
            raise AlreadyTerminal(f"service {service_id!r} is {service.state}")
        effects = []
        if service.state == ACTIVE:
            effects.append(RemoveRules(service.id))
        self.book.release_owner(service.id)
        service.state = CANCELLED
        events = [{"kind": "ServiceCancelled", "id": service.id}]
        return service, events, effects

    def on_tick(self, now: int):
        """Expire then activate; called once per elapsed tick."""
        events, effects = [], []
        for service in self._in_state(ACTIVE):
            if service.request.end <= now:
                effects.append(RemoveRules(service.id))
                self.book.release_owner(service.id)
                service.state = EXPIRED
                events.append({
                    "kind": "ServiceExpired",
                    "id": service.id,
                    "rules_removed": service.rule_count,
                })
        for service in self._in_state(SCHEDULED):
            r = service.request
            if r.end <= now:  # window skipped entirely; defensive
                self.book.release_owner(service.id)
                service.state = EXPIRED
                events.append({"kind": "ServiceExpired", "id": service.id,
                               "rules_removed": 0})
            elif r.start <= now:
                if self._path_alive(service):
                    ev, ef = self._activate(service, now)
                else:
                    ev, ef = self._replace_path(service, now, frozenset(),
                                                activate=True)
                events += ev
                effects += ef
        return events, effects

    def reroute_service(self, service: BodService, now: int, excluded):
        """Move an Active service off a dead link; Failed if no path remains."""
        effects = [RemoveRules(service.id)]
        events, more = self._replace_path(service, now, excluded, activate=True)
        return service.state == ACTIVE, events, effects + more

    def active_services_using(self, link_id: str) -> list[BodService]:
        return [
            s for s in self._in_state(ACTIVE) if link_id in s.path
        ]

    # --- dry holds (inter-domain reservations) ---

    def hold_resources(self, hold_id: str, request: BodRequest, now: int) -> Hold:
        path, link_vlans = self.admit(request, now)
        hold = Hold(hold_id, request, path, link_vlans)
        self._allocate(hold_id, request, path, link_vlans)
        self.holds[hold_id] = hold
        return hold

    def commit_hold(self, hold_id: str) -> Hold:
        hold = self._require_hold(hold_id)
        hold.firm = True
        return hold

    def release_hold(self, hold_id: str) -> None:
        hold = self._require_hold(hold_id)
        self.book.release_owner(hold_id)
        del self.holds[hold_id]

    def provision_hold(self, hold_id: str, now: int):
        """Create the service that adopts a committed hold's resources."""
        hold = self._require_hold(hold_id)
        self._seq += 1
        service = BodService(f"bod-{self._seq:04d}", hold.request,
                             list(hold.path), dict(hold.link_vlans))
        self.book.retag_owner(hold_id, service.id)
        hold.service_id = service.id
        del self.holds[hold_id]
        self.services[service.id] = service
        events = [{"kind": "ServiceScheduled", "service": service.to_doc()}]
        effects = []
        if hold.request.start <= now < hold.request.end:
            ev, effects = self._activate(service, now)
            events += ev
        return service, events, effects

    # --- internals ---

    def _activate(self, service: BodService, now: int):
        r = service.request
        installs = compile_rules(
            service.id, self.fabric, r.src, r.dst, r.src_vlan, r.dst_vlan,
            service.path, service.link_vlans, rate_mbps=r.bandwidth_mbps,
        )
        service.state = ACTIVE
        service.rule_count = sum(len(i.rules) for i in installs)
        events = [{
            "kind": "ServiceActivated",
            "id": service.id,
            "path": list(service.path),
            "rules_installed": service.rule_count,
        }]
        return events, installs

    def _replace_path(self, service: BodService, now: int, excluded, activate: bool):
        """Re-admit over the remaining window; old holds go first so the
        service does not compete with itself."""
        self.book.release_owner(service.id)
        r = service.request
        remaining = BodRequest(r.src, r.dst, r.bandwidth_mbps,
                               max(r.start, now), r.end, r.src_vlan, r.dst_vlan)
        try:
            path, link_vlans = self.admit(remaining, now, excluded)
        except Rejected:
            service.state = FAILED
            return [{"kind": "ServiceFailed", "id": service.id}], []
        service.path = path
        service.link_vlans = link_vlans
        self._allocate(service.id, remaining, path, link_vlans)
        if activate:
            return self._activate(service, now)
        return [], []

    def _path_alive(self, service: BodService) -> bool:
        return all(self.fabric.link_up(link_id) for link_id in service.path)

    def _in_state(self, state: str) -> list[BodService]:
        return [self.services[k] for k in sorted(self.services)
                if self.services[k].state == state]

    def _require_overlay_endpoint(self, endpoint_id: str):
        ep = self.fabric.require_endpoint(endpoint_id)
        if self.fabric.vfcs[ep.vfc].overlay != self.overlay:
            raise UnknownEndpoint(
                f"endpoint {endpoint_id!r} is not in the {self.overlay} overlay"
            )
        return ep

    def _require_hold(self, hold_id: str) -> Hold:
        hold = self.holds.get(hold_id)
        if hold is None:
            raise UnknownService(f"hold {hold_id!r}")
        return hold

    def to_doc(self) -> dict:
        return {
            "services": self.list_docs(),
            "holds": {
                k: {
                    "request": self.holds[k].request.__dict__,
                    "path": self.holds[k].path,
                    "link_vlans": self.holds[k].link_vlans,
                    "firm": self.holds[k].firm,
                }
                for k in sorted(self.holds)
            },
        }
