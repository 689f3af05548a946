// Console state: the latest API documents plus the event backlog.
//
// The store never computes domain values. An incoming event only (a) updates
// the current tick from the event's own field and (b) marks read models
// dirty; the actual state shown is whatever the next GET returns.

import {
  ApiClient,
  CircuitDoc,
  ClusterDoc,
  NsiDoc,
  ServiceDoc,
  TopologyDoc,
} from "./api.js";
import { StreamEvent } from "./stream.js";

export type Resource = "topology" | "services" | "circuits" | "cluster" | "nsi";

const ALL: Resource[] = ["topology", "services", "circuits", "cluster", "nsi"];

export function dirtyFromEvent(kind: string): Resource[] {
  switch (kind) {
    case "TickReport":
      return ["topology", "services", "cluster"];
    case "ServiceScheduled":
    case "ServiceActivated":
    case "ServiceExpired":
    case "ServiceCancelled":
    case "ServiceFailed":
      return ["services", "topology"];
    case "CircuitInstalled":
    case "CircuitRerouted":
    case "CircuitFailed":
    case "CircuitRemoved":
      return ["circuits", "topology"];
    case "PortUp":
    case "PortDown":
    case "LinkUp":
    case "LinkDown":
    case "RecoveryReport":
      return ["topology", "services", "circuits"];
    case "ClusterEvent":
      return ["cluster"];
    case "NsiEvent":
      return ["nsi", "services"];
    default:
      return [];
  }
}

export interface ConsoleState {
  topology: TopologyDoc | null;
  services: ServiceDoc[];
  circuits: CircuitDoc[];
  cluster: ClusterDoc | null;
  reservations: NsiDoc[];
  nsiAvailable: boolean;
  now: number;
  atTick: number | null; // committed-bandwidth probe tick; null = current
  connected: boolean;
  events: StreamEvent[];
}

export class Store {
  state: ConsoleState = {
    topology: null,
    services: [],
    circuits: [],
    cluster: null,
    reservations: [],
    nsiAvailable: true,
    now: 0,
    atTick: null,
    connected: false,
    events: [],
  };

  private listeners: Array<(state: ConsoleState) => void> = [];
  private pending = new Set<Resource>();
  private flushTimer: ReturnType<typeof setTimeout> | null = null;

  constructor(private api: ApiClient, private debounceMs = 25) {}

  subscribe(listener: (state: ConsoleState) => void): void {
    this.listeners.push(listener);
  }

  private emit(): void {
    for (const listener of this.listeners) listener(this.state);
  }

  setConnected(connected: boolean): void {
    this.state.connected = connected;
    this.emit();
  }

  handleEvent(event: StreamEvent): void {
    this.state.events.push(event);
    if (this.state.events.length > 500) {
      this.state.events.splice(0, this.state.events.length - 500);
    }
    if (event.kind === "TickReport" && !("domain" in event)) {
      this.state.now = event.tick as number;
    }
    for (const resource of dirtyFromEvent(event.kind)) {
      this.pending.add(resource);
    }
    if (this.flushTimer === null) {
      this.flushTimer = setTimeout(() => {
        this.flushTimer = null;
        const resources = [...this.pending];
        this.pending.clear();
        void this.refresh(resources);
      }, this.debounceMs);
    }
    this.emit();
  }

  async refreshAll(): Promise<void> {
    await this.refresh(ALL);
  }

  async refresh(resources: Resource[]): Promise<void> {
    const jobs: Promise<void>[] = [];
    if (resources.includes("topology")) {
      jobs.push(this.api.getTopology(this.state.atTick).then((r) => {
        if (r.ok && r.doc) {
          this.state.topology = r.doc;
          this.state.now = r.doc.now;
        }
      }));
    }
    if (resources.includes("services")) {
      jobs.push(this.api.listServices().then((r) => {
        if (r.ok && r.doc) this.state.services = r.doc.services;
      }));
    }
    if (resources.includes("circuits")) {
      jobs.push(this.api.listCircuits().then((r) => {
        if (r.ok && r.doc) this.state.circuits = r.doc.circuits;
      }));
    }
    if (resources.includes("cluster")) {
      jobs.push(this.api.getCluster().then((r) => {
        if (r.ok && r.doc) this.state.cluster = r.doc;
      }));
    }
    if (resources.includes("nsi")) {
      jobs.push(this.api.nsiList().then((r) => {
        if (r.ok && r.doc) {
          this.state.reservations = r.doc.reservations;
          this.state.nsiAvailable = true;
        } else if (r.status === 503) {
          this.state.nsiAvailable = false;
        }
      }));
    }
    await Promise.all(jobs);
    this.emit();
  }

  async probeCommitted(atTick: number | null): Promise<void> {
    this.state.atTick = atTick;
    await this.refresh(["topology"]);
  }
}
