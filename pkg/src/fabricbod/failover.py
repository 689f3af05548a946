"""Link-loss reaction: transparent rerouting of affected services.

Processing order is deterministic (timed services in ascending id order,
then circuits in ascending name order) so recovery reports reproduce
exactly.  Restored links are never reverted onto: existing paths stay put
and only new requests may use a recovered link.
"""

from __future__ import annotations

from .fabric import Fabric
from .scheduler import BodScheduler
from .sdxl2 import Sdxl2App


def handle_link_down(
    link_id: str,
    *,
    fabric: Fabric,
    scheduler: BodScheduler,
    sdxl2: Sdxl2App,
    now: int,
):
    """Reroute every Active service and Installed circuit using the link.

    Returns (report_event, events, effects).  Services with no alternative
    path fail and release their remaining reservation immediately.
    """
    fabric.require_link(link_id)
    excluded = frozenset({link_id})
    outcomes = []
    events, effects = [], []

    for service in scheduler.active_services_using(link_id):
        old_path = list(service.path)
        removed = service.rule_count
        ok, ev, ef = scheduler.reroute_service(service, now, excluded)
        events += ev
        effects += ef
        outcomes.append({
            "kind": "bod",
            "id": service.id,
            "outcome": "rerouted" if ok else "failed",
            "old_path": old_path,
            "new_path": list(service.path) if ok else None,
            "rules_removed": removed,
            "rules_installed": service.rule_count if ok else 0,
        })

    for circuit in sdxl2.installed_circuits_using(link_id):
        old_path = list(circuit.path)
        removed = circuit.rule_count
        ok, ev, ef = sdxl2.reroute_circuit(circuit, now, excluded)
        events += ev
        effects += ef
        outcomes.append({
            "kind": "circuit",
            "id": circuit.name,
            "outcome": "rerouted" if ok else "failed",
            "old_path": old_path,
            "new_path": list(circuit.path) if ok else None,
            "rules_removed": removed,
            "rules_installed": circuit.rule_count if ok else 0,
        })

    report = {
        "kind": "RecoveryReport",
        "link": link_id,
        "tick": now,
        "outcomes": outcomes,
        "rules_removed": sum(o["rules_removed"] for o in outcomes),
        "rules_installed": sum(o["rules_installed"] for o in outcomes),
    }
    return report, events, effects


def handle_link_up(link_id: str, *, fabric: Fabric):
    """No-revert policy: the link only rejoins the feasible pool."""
    fabric.require_link(link_id)
    return [], []
