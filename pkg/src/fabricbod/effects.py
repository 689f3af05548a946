"""Southbound effects produced by command application.

Replica state machines compute these deterministically; the cluster runtime
executes the committed command's effects exactly once against the shared
physical fabric and dataplane, keeping control-plane replication separate
from the forwarding plane.
"""

from __future__ import annotations

from dataclasses import dataclass

from .dataplane import FlowRule, MeterSpec


@dataclass(frozen=True)
class InstallRules:
    vfc_id: str
    rules: tuple[FlowRule, ...]
    meters: tuple[MeterSpec, ...] = ()


@dataclass(frozen=True)
class RemoveRules:
    cookie: str


@dataclass(frozen=True)
class FlipPort:
    vfc_id: str
    port_id: str
    up: bool


Effect = InstallRules | RemoveRules | FlipPort
