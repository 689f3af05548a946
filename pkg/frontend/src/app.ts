// Application wiring: skeleton markup, form handlers, store subscriptions.
//
// No optimistic updates anywhere: a mutation only POSTs; tables, badges and
// link styles change when the corresponding event arrives on the stream and
// the store refetches the read models.

import { ApiClient, ApiResponse } from "./api.js";
import {
  renderCircuitsTable,
  renderCluster,
  renderEventLog,
  renderNsi,
  renderServicesTable,
  renderTimeline,
  renderTopology,
} from "./render.js";
import { EventFeed } from "./stream.js";
import { ConsoleState, Store } from "./store.js";

const SKELETON = `
  <div class="banner" id="banner" hidden></div>
  <header>
    <h1>fabric console</h1>
    <span id="clock" class="clock"></span>
    <span id="conn" class="conn"></span>
  </header>
  <main>
    <section class="panel" id="topology-panel">
      <h2>topology</h2>
      <div class="hint">links show committed/capacity Mb/s; click a link to
        fail or restore it</div>
      <div class="probe">
        committed at tick
        <input id="probe-tick" type="number" min="0" placeholder="now">
        <button id="probe-go">view</button>
      </div>
      <div id="topology"></div>
      <div id="link-actions" class="link-actions" hidden></div>
    </section>

    <section class="panel" id="services-panel">
      <h2>timed services</h2>
      <form id="bod-form" class="row-form">
        <input name="src" placeholder="src endpoint" required>
        <input name="dst" placeholder="dst endpoint" required>
        <input name="mbps" type="number" placeholder="Mb/s" required>
        <input name="start" type="number" placeholder="start tick" required>
        <input name="end" type="number" placeholder="end tick" required>
        <input name="src_vlan" type="number" placeholder="src vlan">
        <input name="dst_vlan" type="number" placeholder="dst vlan">
        <button type="submit" class="mutating">request</button>
        <span class="form-error" id="bod-error"></span>
      </form>
      <div id="services"></div>
      <div id="timeline"></div>
      <div class="clock-row">
        <input id="advance-ticks" type="number" min="0" value="1">
        <button id="advance" class="mutating">advance clock</button>
      </div>
    </section>

    <section class="panel" id="circuits-panel">
      <h2>layer-2 circuits</h2>
      <form id="circuit-form" class="row-form">
        <input name="name" placeholder="name" required>
        <input name="ep1" placeholder="endpoint1[:vlan]" required>
        <input name="ep2" placeholder="endpoint2[:vlan]" required>
        <button type="submit" class="mutating">create</button>
        <span class="form-error" id="circuit-error"></span>
      </form>
      <div id="circuits"></div>
      <form id="inject-form" class="row-form">
        <input name="endpoint" placeholder="inject at endpoint" required>
        <input name="vlan" type="number" placeholder="vlan">
        <input name="count" type="number" value="1" min="1">
        <button type="submit">inject frames</button>
        <span id="inject-result" class="inject-result"></span>
      </form>
    </section>

    <section class="panel" id="cluster-panel">
      <h2>controller cluster</h2>
      <div id="cluster"></div>
    </section>

    <section class="panel" id="nsi-panel">
      <h2>inter-domain reservations</h2>
      <form id="nsi-form" class="row-form">
        <input name="src" placeholder="src endpoint" required>
        <input name="dst" placeholder="dst endpoint (peer)" required>
        <input name="mbps" type="number" placeholder="Mb/s" required>
        <input name="start" type="number" placeholder="start tick" required>
        <input name="end" type="number" placeholder="end tick" required>
        <button type="submit" class="mutating">reserve</button>
        <span class="form-error" id="nsi-error"></span>
      </form>
      <div id="nsi"></div>
    </section>

    <section class="panel" id="events-panel">
      <h2>event stream</h2>
      <div id="events"></div>
    </section>
  </main>
`;

function formNumber(value: FormDataEntryValue | null): number | null {
  const text = String(value ?? "").trim();
  return text === "" ? null : Number(text);
}

function parseAttachment(spec: string): { endpoint: string; vlan: number | null } {
  const at = spec.lastIndexOf(":");
  if (at > 0 && /^\d+$/.test(spec.slice(at + 1))) {
    return { endpoint: spec.slice(0, at), vlan: Number(spec.slice(at + 1)) };
  }
  return { endpoint: spec, vlan: null };
}

export class App {
  readonly api: ApiClient;
  readonly store: Store;
  readonly feed: EventFeed;
  private root: HTMLElement;
  private selectedLink: string | null = null;
  private clusterAssertion: string | null = null;
  private servicesSnapshot: string | null = null;

  constructor(root: HTMLElement, base = "", retryMs = 1000) {
    this.root = root;
    this.api = new ApiClient(base);
    this.store = new Store(this.api);
    this.feed = new EventFeed(
      base,
      (event) => this.store.handleEvent(event),
      (status) => this.store.setConnected(status === "connected"),
      retryMs,
    );
  }

  start(): void {
    this.root.innerHTML = SKELETON;
    this.bind();
    this.store.subscribe((state) => this.render(state));
    void this.store.refreshAll();
    this.feed.start();
  }

  stop(): void {
    this.feed.stop();
  }

  private el<T extends HTMLElement>(id: string): T {
    return this.root.querySelector(`#${id}`) as T;
  }

  // --- event wiring ---

  private bind(): void {
    this.el("bod-form").addEventListener("submit", (e) => {
      e.preventDefault();
      void this.submitBod(e.target as HTMLFormElement);
    });
    this.el("circuit-form").addEventListener("submit", (e) => {
      e.preventDefault();
      void this.submitCircuit(e.target as HTMLFormElement);
    });
    this.el("inject-form").addEventListener("submit", (e) => {
      e.preventDefault();
      void this.submitInject(e.target as HTMLFormElement);
    });
    this.el("nsi-form").addEventListener("submit", (e) => {
      e.preventDefault();
      void this.submitNsi(e.target as HTMLFormElement);
    });
    this.el("advance").addEventListener("click", () => {
      const ticks = Number(this.el<HTMLInputElement>("advance-ticks").value || "0");
      void this.api.advanceClock(ticks);
    });
    this.el("probe-go").addEventListener("click", () => {
      const raw = this.el<HTMLInputElement>("probe-tick").value.trim();
      void this.store.probeCommitted(raw === "" ? null : Number(raw));
    });
    this.root.addEventListener("click", (e) => {
      const target = e.target as HTMLElement;
      const linkGroup = target.closest?.("[data-link]") as HTMLElement | null;
      if (linkGroup) {
        this.selectLink(linkGroup.getAttribute("data-link"));
        return;
      }
      if (target.dataset) this.handleAction(target);
    });
  }

  private handleAction(target: HTMLElement): void {
    const data = target.dataset;
    if (data.failLink) void this.api.linkEvent(data.failLink, "down");
    else if (data.restoreLink) void this.api.linkEvent(data.restoreLink, "up");
    else if (data.cancel) void this.api.cancelService(data.cancel);
    else if (data.remove) void this.api.removeCircuit(data.remove);
    else if (data.kill !== undefined && data.kill !== "") {
      this.servicesSnapshot = JSON.stringify(this.store.state.services);
      this.clusterAssertion = null;
      void this.api.killReplica(Number(data.kill));
    } else if (data.revive !== undefined && data.revive !== "") {
      void this.api.reviveReplica(Number(data.revive));
    } else if (data.nsi && data.cid) {
      void this.api.nsiAction(data.cid,
        data.nsi as "commit" | "provision" | "release");
    }
  }

  private async submitBod(form: HTMLFormElement): Promise<void> {
    const fields = new FormData(form);
    const response = await this.api.requestService({
      src: fields.get("src"), dst: fields.get("dst"),
      mbps: formNumber(fields.get("mbps")),
      start: formNumber(fields.get("start")),
      end: formNumber(fields.get("end")),
      src_vlan: formNumber(fields.get("src_vlan")),
      dst_vlan: formNumber(fields.get("dst_vlan")),
    });
    this.showFormError("bod-error", response);
  }

  private async submitCircuit(form: HTMLFormElement): Promise<void> {
    const fields = new FormData(form);
    const response = await this.api.createCircuit({
      name: fields.get("name"),
      ep1: parseAttachment(String(fields.get("ep1"))),
      ep2: parseAttachment(String(fields.get("ep2"))),
    });
    this.showFormError("circuit-error", response);
  }

  private async submitInject(form: HTMLFormElement): Promise<void> {
    const fields = new FormData(form);
    const response = await this.api.inject({
      endpoint: fields.get("endpoint"),
      vlan: formNumber(fields.get("vlan")),
      size_bits: 1000,
      count: formNumber(fields.get("count")) ?? 1,
    });
    const box = this.el("inject-result");
    if (response.ok && response.doc) {
      const drops = Object.entries(response.doc.dropped)
        .map(([reason, count]) => `${reason}=${count}`).join(" ");
      box.textContent = `delivered ${response.doc.delivered}/${response.doc.injected}`
        + (drops ? ` dropped ${drops}` : "");
    } else {
      box.textContent = response.error
        ? `${response.error.kind}: ${response.error.message}` : "failed";
    }
  }

  private async submitNsi(form: HTMLFormElement): Promise<void> {
    const fields = new FormData(form);
    const response = await this.api.nsiReserve({
      src: fields.get("src"), dst: fields.get("dst"),
      mbps: formNumber(fields.get("mbps")),
      start: formNumber(fields.get("start")),
      end: formNumber(fields.get("end")),
    });
    this.showFormError("nsi-error", response);
  }

  private showFormError(id: string, response: ApiResponse<unknown>): void {
    const box = this.el(id);
    if (response.ok) {
      box.textContent = "";
      return;
    }
    const error = response.error!;
    box.textContent = error.reason
      ? `Rejected(${error.reason}): ${error.message}`
      : `${error.kind}: ${error.message}`;
  }

  private selectLink(linkId: string | null): void {
    this.selectedLink = linkId;
    const box = this.el("link-actions");
    if (!linkId || !this.store.state.topology) {
      box.hidden = true;
      return;
    }
    const link = this.store.state.topology.links.find((l) => l.id === linkId);
    if (!link) {
      box.hidden = true;
      return;
    }
    box.hidden = false;
    box.innerHTML = `
      <span>${link.id} is ${link.state}</span>
      <button data-fail-link="${link.id}" class="mutating">fail</button>
      <button data-restore-link="${link.id}" class="mutating">restore</button>`;
    this.applyQuorumLock();
  }

  // --- rendering ---

  private render(state: ConsoleState): void {
    this.el("clock").textContent = `tick ${state.now}`;
    const conn = this.el("conn");
    conn.textContent = state.connected ? "stream: live" : "stream: reconnecting";
    conn.className = state.connected ? "conn live" : "conn down";
    const banner = this.el("banner");
    banner.hidden = state.connected;
    banner.textContent = state.connected
      ? "" : "API unreachable or stream interrupted; retrying";

    this.el("topology").innerHTML = renderTopology(state.topology);
    this.el("services").innerHTML = renderServicesTable(state.services);
    this.el("timeline").innerHTML = renderTimeline(state.services, state.now);
    this.el("circuits").innerHTML = renderCircuitsTable(state.circuits);
    this.updateClusterAssertion(state);
    this.el("cluster").innerHTML = renderCluster(state.cluster, this.clusterAssertion);
    this.el("nsi").innerHTML = renderNsi(state.reservations, state.nsiAvailable);
    this.el("events").innerHTML = renderEventLog(state.events);
    if (this.selectedLink) this.selectLink(this.selectedLink);
    this.applyQuorumLock();
  }

  private updateClusterAssertion(state: ConsoleState): void {
    if (this.servicesSnapshot === null) return;
    const leaderChanged = state.events.some(
      (e) => e.kind === "ClusterEvent" && e["event"] === "LeaderChanged");
    if (!leaderChanged) return;
    const current = JSON.stringify(state.services);
    this.clusterAssertion = current === this.servicesSnapshot
      ? "services unchanged across leader change: yes"
      : "services unchanged across leader change: NO";
  }

  private applyQuorumLock(): void {
    const quorum = this.store.state.cluster?.quorum ?? true;
    for (const button of this.root.querySelectorAll("button.mutating")) {
      (button as HTMLButtonElement).disabled = !quorum;
    }
    for (const button of this.root.querySelectorAll("[data-kill]")) {
      (button as HTMLButtonElement).disabled = false; // revive path must stay open
    }
  }
}

export function createApp(root: HTMLElement, base = "", retryMs = 1000): App {
  const app = new App(root, base, retryMs);
  app.start();
  return app;
}
