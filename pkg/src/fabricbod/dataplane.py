"""Forwarding-plane simulation: flow tables, token-bucket meters, frame walks.

One Dataplane instance models the forwarding state of every VFC in a fabric
under a shared discrete clock (1 tick == 1 ms of virtual time, so 1 Mb/s is
exactly 1000 bits per tick).  Frames injected at a client endpoint walk the
fabric hop by hop: at each VFC the highest-priority matching rule fires
(ties broken by earliest installation), its actions run in order, meters
debit tokens, and Output crosses the link to the peer VFC or delivers to a
client endpoint.  The whole simulation is single-threaded and deterministic.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

from .errors import BadRule, DanglingMeterRef, UnknownPort, UnknownVfc
from .fabric import Fabric

VLAN_ANY = "any"
VLAN_UNTAGGED = "untagged"

MAX_HOPS = 32
BITS_PER_MBPS_TICK = 1000  # 1 Mb/s == 1000 bits per 1 ms tick


# --- actions ---

@dataclass(frozen=True)
class Meter:
    meter_id: str


@dataclass(frozen=True)
class PushVlan:
    vlan: int


@dataclass(frozen=True)
class SetVlan:
    vlan: int


@dataclass(frozen=True)
class PopVlan:
    pass


@dataclass(frozen=True)
class Output:
    port: str


Action = Meter | PushVlan | SetVlan | PopVlan | Output


def action_doc(action: Action) -> list:
    if isinstance(action, Meter):
        return ["meter", action.meter_id]
    if isinstance(action, PushVlan):
        return ["push_vlan", action.vlan]
    if isinstance(action, SetVlan):
        return ["set_vlan", action.vlan]
    if isinstance(action, PopVlan):
        return ["pop_vlan"]
    return ["output", action.port]


@dataclass(frozen=True)
class FlowRule:
    """Match-action entry. `match_vlan` is an int tag, "untagged" or "any"."""

    cookie: str
    vfc: str
    priority: int
    match_port: str
    match_vlan: int | str
    actions: tuple[Action, ...]

    def to_doc(self) -> dict:
        return {
            "cookie": self.cookie,
            "vfc": self.vfc,
            "priority": self.priority,
            "match": {"in_port": self.match_port, "vlan": self.match_vlan},
            "actions": [action_doc(a) for a in self.actions],
        }


@dataclass(frozen=True)
class MeterSpec:
    meter_id: str
    cookie: str
    rate_mbps: int
    burst_bits: int

    def to_doc(self) -> dict:
        return {
            "meter_id": self.meter_id,
            "cookie": self.cookie,
            "rate_mbps": self.rate_mbps,
            "burst_bits": self.burst_bits,
        }


@dataclass
class MeterState:
    spec: MeterSpec
    tokens: int


@dataclass(frozen=True)
class Frame:
    id: str
    ingress: str
    vlan: int | None
    size_bits: int
    inject_tick: int


DELIVERED = "Delivered"
DROPPED = "Dropped"

DROP_NO_MATCH = "NoMatch"
DROP_METER = "MeterExceeded"
DROP_PORT_DOWN = "PortDown"
DROP_LOOP = "LoopLimit"


@dataclass
class DeliveryResult:
    frame: Frame
    outcome: str  # Delivered | Dropped
    hops: list[str] = field(default_factory=list)
    egress_endpoint: str | None = None
    egress_vlan: int | None = None
    drop_reason: str | None = None

    @property
    def delivered(self) -> bool:
        return self.outcome == DELIVERED

    def to_doc(self) -> dict:
        doc = {
            "frame": self.frame.id,
            "outcome": self.outcome,
            "hops": list(self.hops),
        }
        if self.delivered:
            doc["egress_endpoint"] = self.egress_endpoint
            doc["egress_vlan"] = self.egress_vlan
        else:
            doc["drop_reason"] = self.drop_reason
        return doc


def _vlan_matches(match_vlan: int | str, frame_vlan: int | None) -> bool:
    if match_vlan == VLAN_ANY:
        return True
    if match_vlan == VLAN_UNTAGGED:
        return frame_vlan is None
    return frame_vlan == match_vlan


def validate_rule(rule: FlowRule) -> None:
    """Static checks: one trailing Output, coherent VLAN action sequence."""
    if rule.priority < 0:
        raise BadRule(f"rule priority must be >= 0, got {rule.priority}")
    outputs = [a for a in rule.actions if isinstance(a, Output)]
    if len(outputs) != 1 or not isinstance(rule.actions[-1], Output):
        raise BadRule("rule must have exactly one Output action, in last position")
    # Track the tag state symbolically through the action list.
    if rule.match_vlan == VLAN_ANY:
        tagged = None  # unknown
    else:
        tagged = rule.match_vlan != VLAN_UNTAGGED
    for action in rule.actions[:-1]:
        if isinstance(action, PushVlan):
            if tagged is not False:
                raise BadRule("PushVlan requires an untagged frame at that point")
            tagged = True
        elif isinstance(action, SetVlan):
            if tagged is not True:
                raise BadRule("SetVlan requires a tagged frame at that point")
        elif isinstance(action, PopVlan):
            if tagged is not True:
                raise BadRule("PopVlan requires a tagged frame at that point")
            tagged = False
        elif isinstance(action, Output):
            raise BadRule("Output must be the last action")


class Dataplane:
    """Flow tables and meters over a fabric, plus the virtual clock."""

    def __init__(self, fabric: Fabric, trace=None):
        self.fabric = fabric
        self.now = 0
        self.tables: dict[str, list[tuple[int, FlowRule]]] = {}
        self.meters: dict[tuple[str, str], MeterState] = {}
        self.trace = trace
        self._rule_seq = 0
        self._frame_seq = 0
        self.drops: list[tuple[int, str, str | None]] = []  # (tick, reason, link)

    # --- table management ---

    def install_rules(
        self,
        vfc_id: str,
        rules: list[FlowRule],
        meters: list[MeterSpec] = (),
    ) -> None:
        if vfc_id not in self.fabric.vfcs:
            raise UnknownVfc(f"vfc {vfc_id!r}")
        vfc = self.fabric.vfcs[vfc_id]
        available = {m.meter_id for m in meters}
        available.update(mid for (v, mid) in self.meters if v == vfc_id)
        for rule in rules:
            if rule.vfc != vfc_id:
                raise BadRule(f"rule targets vfc {rule.vfc!r}, installing into {vfc_id!r}")
            validate_rule(rule)
            if rule.match_port not in vfc.ports:
                raise UnknownPort(f"port {vfc_id}/{rule.match_port}")
            for action in rule.actions:
                if isinstance(action, Output) and action.port not in vfc.ports:
                    raise UnknownPort(f"port {vfc_id}/{action.port}")
                if isinstance(action, Meter) and action.meter_id not in available:
                    raise DanglingMeterRef(
                        f"meter {action.meter_id!r} not supplied or present in {vfc_id!r}"
                    )
        for spec in meters:
            self.meters[(vfc_id, spec.meter_id)] = MeterState(spec, tokens=spec.burst_bits)
        table = self.tables.setdefault(vfc_id, [])
        for rule in rules:
            self._rule_seq += 1
            table.append((self._rule_seq, rule))

    def remove_rules(self, cookie: str) -> int:
        removed = 0
        for vfc_id, table in self.tables.items():
            kept = [(seq, r) for (seq, r) in table if r.cookie != cookie]
            removed += len(table) - len(kept)
            self.tables[vfc_id] = kept
        for key in [k for k, m in self.meters.items() if m.spec.cookie == cookie]:
            del self.meters[key]
        return removed

    def rules_for(self, vfc_id: str) -> list[FlowRule]:
        return [r for (_, r) in self.tables.get(vfc_id, [])]

    def rule_count(self, cookie: str | None = None) -> int:
        total = 0
        for table in self.tables.values():
            for _, rule in table:
                if cookie is None or rule.cookie == cookie:
                    total += 1
        return total

    def lookup(self, vfc_id: str, in_port: str, vlan: int | None) -> tuple[int, FlowRule] | None:
        """Highest priority wins; equal priority goes to the earliest install."""
        best = None
        for seq, rule in self.tables.get(vfc_id, []):
            if rule.match_port != in_port or not _vlan_matches(rule.match_vlan, vlan):
                continue
            if best is None or (rule.priority, -seq) > (best[1].priority, -best[0]):
                best = (seq, rule)
        return best

    # --- clock ---

    def tick(self, ticks: int = 1) -> None:
        for _ in range(ticks):
            self.now += 1
            for meter in self.meters.values():
                meter.tokens = min(
                    meter.spec.burst_bits,
                    meter.tokens + meter.spec.rate_mbps * BITS_PER_MBPS_TICK,
                )

    # --- forwarding ---

    def inject(self, endpoint_id: str, vlan: int | None, size_bits: int) -> DeliveryResult:
        ep = self.fabric.require_endpoint(endpoint_id)
        if size_bits <= 0:
            raise BadRule("frame size must be positive")
        self._frame_seq += 1
        frame = Frame(f"f{self._frame_seq}", endpoint_id, vlan, size_bits, self.now)

        result = DeliveryResult(frame, DROPPED, hops=[ep.vfc])
        if not self.fabric.port_is_up(ep.vfc, ep.port):
            return self._drop(result, DROP_PORT_DOWN, None)

        vfc_id, in_port, current_vlan = ep.vfc, ep.port, vlan
        while True:
            hit = self.lookup(vfc_id, in_port, current_vlan)
            if hit is None:
                return self._drop(result, DROP_NO_MATCH, None, vfc_id)
            seq, rule = hit
            out_port = None
            for action in rule.actions:
                if isinstance(action, Meter):
                    meter = self.meters[(vfc_id, action.meter_id)]
                    if meter.tokens < size_bits:
                        self._trace(frame, vfc_id, seq, "drop:meter")
                        return self._drop(result, DROP_METER, None)
                    meter.tokens -= size_bits
                elif isinstance(action, PushVlan):
                    current_vlan = action.vlan
                elif isinstance(action, SetVlan):
                    current_vlan = action.vlan
                elif isinstance(action, PopVlan):
                    current_vlan = None
                else:
                    out_port = action.port
            self._trace(frame, vfc_id, seq, _summarize(rule.actions, current_vlan))

            if not self.fabric.port_is_up(vfc_id, out_port):
                return self._drop(result, DROP_PORT_DOWN, self._link_at(vfc_id, out_port))
            attachment = self.fabric.attachment(vfc_id, out_port)
            if attachment is None:
                return self._drop(result, DROP_PORT_DOWN, None)
            kind, target = attachment
            if kind == "endpoint":
                result.outcome = DELIVERED
                result.egress_endpoint = target
                result.egress_vlan = current_vlan
                return result
            link = self.fabric.links[target]
            if not self.fabric.link_up(target):
                return self._drop(result, DROP_PORT_DOWN, target)
            peer_vfc, peer_port = self.fabric.link_peer(link, vfc_id)
            if len(result.hops) >= MAX_HOPS:
                return self._drop(result, DROP_LOOP, None)
            result.hops.append(peer_vfc)
            vfc_id, in_port = peer_vfc, peer_port

    # --- introspection ---

    def rule_table_doc(self) -> dict:
        """Canonical dump of installed rules and meter specs (not token levels)."""
        return {
            "rules": {
                vfc: [[seq, r.to_doc()] for seq, r in table]
                for vfc, table in sorted(self.tables.items())
                if table
            },
            "meters": [
                self.meters[key].spec.to_doc() for key in sorted(self.meters)
            ],
        }

    def rule_table_hash(self) -> str:
        blob = json.dumps(self.rule_table_doc(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def drops_at(self, tick: int, link_id: str | None = None) -> int:
        return sum(
            1 for (t, _reason, link) in self.drops
            if t == tick and (link_id is None or link == link_id)
        )

    # --- internals ---

    def _drop(self, result: DeliveryResult, reason: str, link_id: str | None,
              vfc_id: str | None = None) -> DeliveryResult:
        result.outcome = DROPPED
        result.drop_reason = reason
        self.drops.append((self.now, reason, link_id))
        if self.trace and reason == DROP_NO_MATCH:
            self._trace(result.frame, vfc_id or result.hops[-1], -1, "drop:nomatch")
        return result

    def _link_at(self, vfc_id: str, port_id: str) -> str | None:
        attachment = self.fabric.attachment(vfc_id, port_id)
        if attachment and attachment[0] == "link":
            return attachment[1]
        return None

    def _trace(self, frame: Frame, vfc_id: str, seq: int, summary: str) -> None:
        if self.trace:
            self.trace(f"{self.now}\t{frame.id}\t{vfc_id}\t{seq}\t{summary}")


def _summarize(actions: tuple[Action, ...], vlan_after: int | None) -> str:
    parts = []
    for action in actions:
        doc = action_doc(action)
        parts.append(":".join(str(x) for x in doc))
    parts.append(f"vlan={vlan_after if vlan_after is not None else '-'}")
    return ",".join(parts)
