import { describe, expect, it, vi } from "vitest";

import { ApiClient } from "../src/api.js";
import { Store, dirtyFromEvent } from "../src/store.js";

describe("dirtyFromEvent", () => {
  it("maps service events onto services and topology", () => {
    expect(dirtyFromEvent("ServiceActivated")).toEqual(["services", "topology"]);
  });

  it("maps topology events onto everything path-bearing", () => {
    expect(dirtyFromEvent("LinkDown"))
      .toEqual(["topology", "services", "circuits"]);
  });

  it("maps cluster events onto cluster only", () => {
    expect(dirtyFromEvent("ClusterEvent")).toEqual(["cluster"]);
  });

  it("ignores unknown kinds", () => {
    expect(dirtyFromEvent("Mystery")).toEqual([]);
  });
});

function fakeApi() {
  const calls: string[] = [];
  const api = {
    getTopology: vi.fn(async () => {
      calls.push("topology");
      return { ok: true, status: 200, error: null,
               doc: { devices: [], vfcs: [], links: [], endpoints: [],
                      now: 7, at_tick: 7 } };
    }),
    listServices: vi.fn(async () => {
      calls.push("services");
      return { ok: true, status: 200, error: null, doc: { services: [] } };
    }),
    listCircuits: vi.fn(async () => {
      calls.push("circuits");
      return { ok: true, status: 200, error: null, doc: { circuits: [] } };
    }),
    getCluster: vi.fn(async () => {
      calls.push("cluster");
      return { ok: true, status: 200, error: null,
               doc: { size: 3, term: 1, leader: 0, quorum: true,
                      commit_index: 0, replicas: [], now: 7,
                      rule_table_hash: "x".repeat(64) } };
    }),
    nsiList: vi.fn(async () => {
      calls.push("nsi");
      return { ok: false, status: 503, error: { kind: "NsiUnavailable",
               message: "" }, doc: null };
    }),
  };
  return { api: api as unknown as ApiClient, calls };
}

describe("Store", () => {
  it("updates the clock from local TickReport events only", () => {
    const { api } = fakeApi();
    const store = new Store(api, 5);
    store.handleEvent({ seq: 1, kind: "TickReport", tick: 42 });
    expect(store.state.now).toBe(42);
    store.handleEvent({ seq: 2, kind: "TickReport", tick: 99, domain: "peer" });
    expect(store.state.now).toBe(42);
  });

  it("coalesces a burst of events into one refresh round", async () => {
    const { api, calls } = fakeApi();
    const store = new Store(api, 5);
    for (let i = 0; i < 20; i += 1) {
      store.handleEvent({ seq: i + 1, kind: "ServiceActivated", id: `s${i}` });
    }
    await vi.waitFor(() => expect(calls).toContain("services"));
    await new Promise((resolve) => setTimeout(resolve, 30));
    expect(calls.filter((c) => c === "services").length).toBe(1);
    expect(calls.filter((c) => c === "topology").length).toBe(1);
    expect(calls).not.toContain("cluster");
  });

  it("marks nsi unavailable from a 503", async () => {
    const { api } = fakeApi();
    const store = new Store(api, 5);
    await store.refreshAll();
    expect(store.state.nsiAvailable).toBe(false);
    expect(store.state.now).toBe(7); // from the topology document
  });

  it("keeps a bounded event backlog", () => {
    const { api } = fakeApi();
    const store = new Store(api, 5);
    for (let i = 0; i < 600; i += 1) {
      store.handleEvent({ seq: i + 1, kind: "Mystery" });
    }
    expect(store.state.events.length).toBe(500);
    expect(store.state.events[0].seq).toBe(101);
  });
});
