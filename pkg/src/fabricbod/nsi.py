"""Simplified two-domain connection lifecycle: reserve, commit, provision,
release, with hold timeouts.

The requesting domain acts as aggregator: it splits a request at the
inter-domain link, picks the stitching VLAN (lowest free on that link over
the window), holds its own segment, then exchanges messages with the peer
domain over a scripted, loss-free bus.  Segment resources stay soft-held for
50 ticks; commit makes them firm, provision turns each segment into a timed
service whose edge VLAN translates to the stitch VLAN at the boundary port,
and release (or a timeout while still Held) returns both domains' calendars
exactly to their pre-reserve contents.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import UnknownCorrelation, WrongState
from .reservations import ReservationCalendar

HOLD_TICKS = 50

CHECKING = "Checking"
HELD = "Held"
COMMITTED = "Committed"
PROVISIONED = "Provisioned"
RELEASED = "Released"
FAILED = "Failed"


@dataclass
class Segment:
    domain: str
    hold_id: str
    state: str = CHECKING
    hold_deadline: int | None = None
    path: list[str] | None = None
    link_vlans: dict[str, int] | None = None
    service_id: str | None = None

    def to_doc(self) -> dict:
        return {
            "domain": self.domain,
            "state": self.state,
            "hold_deadline": self.hold_deadline,
            "path": self.path,
            "link_vlans": self.link_vlans,
            "service": self.service_id,
        }


@dataclass
class Reservation:
    correlation_id: str
    src: str
    dst: str
    bandwidth_mbps: int
    start: int
    end: int
    src_vlan: int | None
    dst_vlan: int | None
    stitch_vlan: int | None = None
    state: str = CHECKING
    segments: dict[str, Segment] = field(default_factory=dict)
    failure: str | None = None

    def to_doc(self) -> dict:
        return {
            "correlation_id": self.correlation_id,
            "src": self.src,
            "dst": self.dst,
            "bandwidth_mbps": self.bandwidth_mbps,
            "start_tick": self.start,
            "end_tick": self.end,
            "src_vlan": self.src_vlan,
            "dst_vlan": self.dst_vlan,
            "stitch_vlan": self.stitch_vlan,
            "state": self.state,
            "failure": self.failure,
            "segments": {k: s.to_doc() for k, s in sorted(self.segments.items())},
        }


class NsiCoordinator:
    """Aggregator-side coordination between the local and the peer domain.

    Domain ports expose submit(payload) -> result-envelope and now();
    boundary_up() reports the inter-domain link's physical state.
    """

    def __init__(self, local, peer, boundary_capacity_mbps: int,
                 local_gateway: str, peer_gateway: str, boundary_up,
                 boundary_link_id: str = "interdomain"):
        self.local = local
        self.peer = peer
        self.local_gateway = local_gateway
        self.peer_gateway = peer_gateway
        self.boundary_up = boundary_up
        self.boundary_link_id = boundary_link_id
        self.boundary = ReservationCalendar(boundary_capacity_mbps)
        self.reservations: dict[str, Reservation] = {}
        self.trace: list[str] = []
        self._seq = 0

    # --- lifecycle operations ---

    def reserve(self, src: str, dst: str, mbps: int, start: int, end: int,
                src_vlan: int | None = None, dst_vlan: int | None = None):
        self._seq += 1
        cid = f"nsi-{self._seq:04d}"
        res = Reservation(cid, src, dst, mbps, start, end, src_vlan, dst_vlan)
        res.segments = {
            "local": Segment("local", f"{cid}:local"),
            "peer": Segment("peer", f"{cid}:peer"),
        }
        self.reservations[cid] = res
        now = self.local.now()

        if not self.boundary_up():
            return self._fail(res, "inter-domain link is down"), self._events(res)
        stitch = self.boundary.lowest_free_vlan(start, end)
        if stitch is None or self.boundary.residual(start, end) < mbps:
            return self._fail(res, "inter-domain link saturated"), self._events(res)

        seg_local = res.segments["local"]
        out = self.local.submit({
            "op": "nsi.hold", "hold_id": seg_local.hold_id,
            "src": src, "dst": self.local_gateway, "mbps": mbps,
            "start": start, "end": end,
            "src_vlan": src_vlan, "dst_vlan": stitch,
        })
        if not out["ok"]:
            seg_local.state = FAILED
            return self._fail(res, f"local segment: {out['error']['message']}"), self._events(res)
        seg_local.state = HELD
        seg_local.hold_deadline = now + HOLD_TICKS
        seg_local.path = out["value"]["path"]
        seg_local.link_vlans = out["value"]["link_vlans"]

        seg_peer = res.segments["peer"]
        self._message("send", "Reserve", cid, res.state)
        out = self.peer.submit({
            "op": "nsi.hold", "hold_id": seg_peer.hold_id,
            "src": self.peer_gateway, "dst": dst, "mbps": mbps,
            "start": start, "end": end,
            "src_vlan": stitch, "dst_vlan": dst_vlan,
        })
        if not out["ok"]:
            seg_peer.state = FAILED
            self.local.submit({"op": "nsi.release_hold",
                               "hold_id": seg_local.hold_id})
            seg_local.state = FAILED
            self._fail(res, f"peer segment: {out['error']['message']}")
            self._message("recv", "ReserveFailed", cid, res.state)
            return res.to_doc(), self._events(res)
        seg_peer.state = HELD
        seg_peer.hold_deadline = now + HOLD_TICKS
        seg_peer.path = out["value"]["path"]
        seg_peer.link_vlans = out["value"]["link_vlans"]

        res.stitch_vlan = stitch
        self.boundary.allocate(cid, start, end, mbps)
        self.boundary.hold_vlan(cid, start, end, stitch)
        res.state = HELD
        self._message("recv", "ReserveConfirmed", cid, res.state)
        return res.to_doc(), self._events(res)

    def commit(self, cid: str):
        res = self._require(cid)
        self._require_segments(res, HELD, "commit")
        self.local.submit({"op": "nsi.commit_hold",
                           "hold_id": res.segments["local"].hold_id})
        res.segments["local"].state = COMMITTED
        self._message("send", "Commit", cid, res.state)
        self.peer.submit({"op": "nsi.commit_hold",
                          "hold_id": res.segments["peer"].hold_id})
        res.segments["peer"].state = COMMITTED
        res.state = COMMITTED
        self._message("recv", "Committed", cid, res.state)
        return res.to_doc(), self._events(res)

    def provision(self, cid: str):
        res = self._require(cid)
        self._require_segments(res, COMMITTED, "provision")
        out = self.local.submit({"op": "nsi.provision",
                                 "hold_id": res.segments["local"].hold_id})
        res.segments["local"].service_id = out["value"]["id"]
        res.segments["local"].state = PROVISIONED
        self._message("send", "Provision", cid, res.state)
        out = self.peer.submit({"op": "nsi.provision",
                                "hold_id": res.segments["peer"].hold_id})
        res.segments["peer"].service_id = out["value"]["id"]
        res.segments["peer"].state = PROVISIONED
        res.state = PROVISIONED
        self._message("recv", "Provisioned", cid, res.state)
        return res.to_doc(), self._events(res)

    def release(self, cid: str):
        res = self._require(cid)
        if res.state == RELEASED:
            raise WrongState(f"{cid} is already Released")
        self._release_segment(self.local, res.segments["local"])
        self._message("send", "Release", cid, res.state)
        self._release_segment(self.peer, res.segments["peer"])
        self.boundary.release(cid)
        res.state = RELEASED
        self._message("recv", "Released", cid, res.state)
        return res.to_doc(), self._events(res)

    def on_tick(self, now: int):
        """Auto-release reservations still Held past their deadline."""
        expired = []
        events = []
        for cid in sorted(self.reservations):
            res = self.reservations[cid]
            if res.state != HELD:
                continue
            deadline = min(
                s.hold_deadline for s in res.segments.values()
                if s.hold_deadline is not None
            )
            if deadline <= now:
                for port, segment in ((self.local, res.segments["local"]),
                                      (self.peer, res.segments["peer"])):
                    self._release_segment(port, segment)
                    segment.state = FAILED
                self.boundary.release(cid)
                res.state = FAILED
                res.failure = "hold deadline expired"
                expired.append(cid)
                events += self._events(res)
        return expired, events

    # --- reads ---

    def get_doc(self, cid: str) -> dict:
        return self._require(cid).to_doc()

    def list_docs(self) -> list[dict]:
        return [self.reservations[k].to_doc() for k in sorted(self.reservations)]

    def trace_text(self) -> str:
        return "\n".join(self.trace) + ("\n" if self.trace else "")

    def to_doc(self) -> dict:
        return {
            "reservations": self.list_docs(),
            "boundary": self.boundary.to_doc(),
        }

    # --- internals ---

    def _release_segment(self, port, segment: Segment) -> None:
        if segment.state == PROVISIONED and segment.service_id:
            out = port.submit({"op": "bod.cancel", "id": segment.service_id})
            if not out["ok"] and out["error"]["kind"] not in ("AlreadyTerminal",):
                return
        elif segment.state in (HELD, COMMITTED):
            port.submit({"op": "nsi.release_hold", "hold_id": segment.hold_id})
        if segment.state != FAILED:
            segment.state = RELEASED

    def _require(self, cid: str) -> Reservation:
        res = self.reservations.get(cid)
        if res is None:
            raise UnknownCorrelation(f"correlation {cid!r}")
        return res

    def _require_segments(self, res: Reservation, state: str, verb: str) -> None:
        if any(s.state != state for s in res.segments.values()):
            states = {k: s.state for k, s in res.segments.items()}
            raise WrongState(f"cannot {verb} {res.correlation_id}: segments are {states}")

    def _fail(self, res: Reservation, reason: str) -> dict:
        res.state = FAILED
        res.failure = reason
        return res.to_doc()

    def _events(self, res: Reservation) -> list[dict]:
        return [{
            "kind": "NsiEvent",
            "correlation_id": res.correlation_id,
            "state": res.state,
            "tick": self.local.now(),
        }]

    def _message(self, direction: str, kind: str, cid: str, state_after: str) -> None:
        self.trace.append(
            f"{self.local.now()}\t{direction}\t{kind}\t{cid}\t{state_after}"
        )
