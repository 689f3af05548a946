"""Replicated controller state machine with deterministic leadership.

Every state-mutating command goes through the leader: it is appended to the
log, replicated to all Alive replicas, committed on majority acknowledgment
and applied everywhere in the same order.  Election is deterministic (the
smallest Alive id leads, one leader per term) because the control network is
simulated, synchronous and partition-free.  The data plane is external to
the replicas: only the committed command's effects, taken once from the
leader's application, ever touch it, so elections cannot disturb installed
rules or active services.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field

from .controller import ApplyOutcome, Controller
from .errors import NoQuorum, UnknownReplica


@dataclass
class LogEntry:
    index: int
    term: int
    payload: dict


@dataclass
class Replica:
    id: int
    controller: Controller
    alive: bool = True
    log: list[LogEntry] = field(default_factory=list)
    applied_index: int = 0


class Cluster:
    def __init__(self, size: int, controller_factory):
        if size < 1:
            raise ValueError("cluster needs at least one replica")
        self.size = size
        self.replicas = {i: Replica(i, controller_factory()) for i in range(size)}
        self.term = 1
        self.commit_index = 0
        self.committed: list[LogEntry] = []

    # --- membership / leadership ---

    def majority(self) -> int:
        return self.size // 2 + 1

    def alive_ids(self) -> list[int]:
        return sorted(r.id for r in self.replicas.values() if r.alive)

    def has_quorum(self) -> bool:
        return len(self.alive_ids()) >= self.majority()

    def leader(self) -> int | None:
        alive = self.alive_ids()
        if len(alive) < self.majority():
            return None
        return alive[0]

    def kill(self, replica_id: int) -> list[dict]:
        replica = self._require(replica_id)
        if not replica.alive:
            return []
        old_leader = self.leader()
        replica.alive = False
        events = [{"kind": "ClusterEvent", "event": "ReplicaKilled",
                   "replica": replica_id}]
        return events + self._reelect(old_leader)

    def revive(self, replica_id: int) -> list[dict]:
        replica = self._require(replica_id)
        if replica.alive:
            return []
        old_leader = self.leader()
        # Catch up on the committed log before counting toward quorum.
        self._catch_up(replica)
        replica.alive = True
        events = [{"kind": "ClusterEvent", "event": "ReplicaRevived",
                   "replica": replica_id}]
        return events + self._reelect(old_leader)

    # --- command path ---

    def submit(self, payload: dict) -> ApplyOutcome:
        leader_id = self.leader()
        if leader_id is None:
            raise NoQuorum(
                f"{len(self.alive_ids())}/{self.size} replicas alive, "
                f"majority is {self.majority()}"
            )
        entry = LogEntry(self.commit_index + 1, self.term, copy.deepcopy(payload))
        acks = 0
        for rid in self.alive_ids():
            self.replicas[rid].log.append(entry)
            acks += 1
        if acks < self.majority():  # unreachable while leader() is quorum-gated
            raise NoQuorum("insufficient acknowledgments")
        self.commit_index = entry.index
        self.committed.append(entry)

        leader_outcome: ApplyOutcome | None = None
        for rid in self.alive_ids():
            replica = self.replicas[rid]
            outcome = replica.controller.apply(entry.payload)
            replica.applied_index = entry.index
            if rid == leader_id:
                leader_outcome = outcome
        return leader_outcome

    def committed_payloads(self) -> list[dict]:
        return [copy.deepcopy(e.payload) for e in self.committed]

    # --- reads ---

    def read_replica(self) -> Replica | None:
        """Serving replica for reads: the leader, else the smallest Alive."""
        leader_id = self.leader()
        if leader_id is not None:
            return self.replicas[leader_id]
        alive = self.alive_ids()
        return self.replicas[alive[0]] if alive else None

    def controller(self) -> Controller | None:
        replica = self.read_replica()
        return replica.controller if replica else None

    def to_doc(self) -> dict:
        return {
            "size": self.size,
            "term": self.term,
            "leader": self.leader(),
            "quorum": self.has_quorum(),
            "commit_index": self.commit_index,
            "replicas": [
                {
                    "id": r.id,
                    "status": "Alive" if r.alive else "Dead",
                    "applied_index": r.applied_index,
                    "log_length": len(r.log),
                }
                for r in self.replicas.values()
            ],
        }

    def state_hashes(self) -> dict[int, str]:
        return {
            rid: self.replicas[rid].controller.state_hash()
            for rid in self.alive_ids()
        }

    # --- internals ---

    def _reelect(self, old_leader: int | None) -> list[dict]:
        new_leader = self.leader()
        if new_leader == old_leader:
            return []
        if new_leader is None:
            return [{"kind": "ClusterEvent", "event": "QuorumLost"}]
        self.term += 1
        for rid in self.alive_ids():
            self._catch_up(self.replicas[rid])
        events = []
        if old_leader is None:
            events.append({"kind": "ClusterEvent", "event": "QuorumRestored"})
        events.append({"kind": "ClusterEvent", "event": "LeaderChanged",
                       "leader": new_leader, "term": self.term})
        return events

    def _catch_up(self, replica: Replica) -> None:
        """Apply the committed suffix this replica missed; no effects rerun."""
        while replica.applied_index < self.commit_index:
            entry = self.committed[replica.applied_index]
            if len(replica.log) < entry.index:
                replica.log.append(entry)
            replica.controller.apply(entry.payload)
            replica.applied_index = entry.index

    def _require(self, replica_id: int) -> Replica:
        replica = self.replicas.get(replica_id)
        if replica is None:
            raise UnknownReplica(f"replica {replica_id!r}")
        return replica
