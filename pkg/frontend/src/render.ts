// Pure document -> HTML renderers. Every number that appears in the markup
// is copied from an API document or an event; positions and scaling are the
// only client-side arithmetic, and they never surface as displayed values.

import {
  CircuitDoc,
  ClusterDoc,
  LinkDoc,
  NsiDoc,
  ServiceDoc,
  TopologyDoc,
} from "./api.js";
import { StreamEvent } from "./stream.js";

export function escapeHtml(value: unknown): string {
  return String(value)
    .replaceAll("&", "&amp;")
    .replaceAll("<", "&lt;")
    .replaceAll(">", "&gt;")
    .replaceAll('"', "&quot;");
}

interface Point {
  x: number;
  y: number;
}

function ringLayout(ids: string[], cx: number, cy: number,
                    radius: number): Map<string, Point> {
  const sorted = [...ids].sort();
  const points = new Map<string, Point>();
  sorted.forEach((id, index) => {
    const angle = (2 * Math.PI * index) / Math.max(sorted.length, 1) - Math.PI / 2;
    points.set(id, { x: cx + radius * Math.cos(angle),
                     y: cy + radius * Math.sin(angle) });
  });
  return points;
}

export function layoutVfcs(topology: TopologyDoc): Map<string, Point> {
  const byOverlay = new Map<string, string[]>();
  for (const vfc of topology.vfcs) {
    const bucket = byOverlay.get(vfc.overlay) ?? [];
    bucket.push(vfc.id);
    byOverlay.set(vfc.overlay, bucket);
  }
  const overlays = [...byOverlay.keys()].sort();
  const points = new Map<string, Point>();
  overlays.forEach((overlay, index) => {
    const radius = 185 - index * 95;
    for (const [id, pt] of ringLayout(byOverlay.get(overlay)!, 320, 235, radius)) {
      points.set(id, pt);
    }
  });
  return points;
}

function linkLine(link: LinkDoc, points: Map<string, Point>): string {
  const a = points.get(link.a.vfc);
  const b = points.get(link.b.vfc);
  if (!a || !b) return "";
  const mx = (a.x + b.x) / 2;
  const my = (a.y + b.y) / 2;
  return `
    <g class="link-group" data-link="${escapeHtml(link.id)}">
      <line class="link link-${link.state}" x1="${a.x.toFixed(1)}" y1="${a.y.toFixed(1)}"
            x2="${b.x.toFixed(1)}" y2="${b.y.toFixed(1)}"></line>
      <text class="link-label" x="${mx.toFixed(1)}" y="${(my - 4).toFixed(1)}">
        ${escapeHtml(link.committed_mbps)}/${escapeHtml(link.capacity_mbps)}</text>
    </g>`;
}

export function renderTopology(topology: TopologyDoc | null): string {
  if (!topology) {
    return `<svg class="topo" viewBox="0 0 640 470"></svg>`;
  }
  const points = layoutVfcs(topology);
  const links = topology.links.map((link) => linkLine(link, points)).join("");
  const nodes = topology.vfcs.map((vfc) => {
    const pt = points.get(vfc.id)!;
    return `
      <g class="vfc-group" data-vfc="${escapeHtml(vfc.id)}">
        <circle class="vfc overlay-${escapeHtml(vfc.overlay)}"
                cx="${pt.x.toFixed(1)}" cy="${pt.y.toFixed(1)}" r="17"></circle>
        <text class="vfc-label" x="${pt.x.toFixed(1)}"
              y="${(pt.y + 3).toFixed(1)}">${escapeHtml(vfc.id)}</text>
      </g>`;
  }).join("");
  const clients = topology.endpoints.map((endpoint, index) => {
    const pt = points.get(endpoint.vfc);
    if (!pt) return "";
    const dx = pt.x - 320;
    const dy = pt.y - 235;
    const norm = Math.hypot(dx, dy) || 1;
    const x = pt.x + (dx / norm) * 36 + (index % 2) * 6;
    const y = pt.y + (dy / norm) * 36;
    return `
      <g class="client-group">
        <rect class="client" x="${(x - 4).toFixed(1)}" y="${(y - 4).toFixed(1)}"
              width="8" height="8"></rect>
        <text class="client-label" x="${x.toFixed(1)}"
              y="${(y + 14).toFixed(1)}">${escapeHtml(endpoint.id)}</text>
      </g>`;
  }).join("");
  return `<svg class="topo" viewBox="0 0 640 470">${links}${clients}${nodes}</svg>`;
}

export function badge(state: string): string {
  return `<span class="badge state-${escapeHtml(state)}">${escapeHtml(state)}</span>`;
}

function vlanText(vlan: number | null): string {
  return vlan === null ? "untagged" : String(vlan);
}

export function renderServicesTable(services: ServiceDoc[]): string {
  if (services.length === 0) {
    return `<p class="empty">no timed services</p>`;
  }
  const rows = services.map((s) => `
    <tr data-service="${escapeHtml(s.id)}">
      <td>${escapeHtml(s.id)}</td>
      <td>${escapeHtml(s.src)} (${vlanText(s.src_vlan)}) &rarr;
          ${escapeHtml(s.dst)} (${vlanText(s.dst_vlan)})</td>
      <td>${escapeHtml(s.bandwidth_mbps)}</td>
      <td>[${escapeHtml(s.start_tick)},${escapeHtml(s.end_tick)})</td>
      <td>${s.path.map(escapeHtml).join(" ") || "(same vfc)"}</td>
      <td>${badge(s.state)}</td>
      <td>${s.state === "Scheduled" || s.state === "Active"
        ? `<button class="small" data-cancel="${escapeHtml(s.id)}">cancel</button>`
        : ""}</td>
    </tr>`).join("");
  return `
    <table class="grid">
      <thead><tr><th>id</th><th>route</th><th>Mb/s</th><th>window</th>
                 <th>path</th><th>state</th><th></th></tr></thead>
      <tbody>${rows}</tbody>
    </table>`;
}

export function renderTimeline(services: ServiceDoc[], now: number): string {
  if (services.length === 0) return "";
  const horizon = Math.max(now + 1, ...services.map((s) => s.end_tick));
  const lanes = services.map((s) => {
    const left = (s.start_tick / horizon) * 100;
    const width = Math.max(((s.end_tick - s.start_tick) / horizon) * 100, 0.5);
    return `
      <div class="lane">
        <span class="lane-name">${escapeHtml(s.id)}</span>
        <div class="lane-track">
          <div class="lane-bar state-${escapeHtml(s.state)}"
               style="left:${left.toFixed(2)}%;width:${width.toFixed(2)}%"
               title="[${escapeHtml(s.start_tick)},${escapeHtml(s.end_tick)})"></div>
          <div class="now-marker" style="left:${((now / horizon) * 100).toFixed(2)}%"></div>
        </div>
      </div>`;
  }).join("");
  return `<div class="timeline">${lanes}
    <div class="timeline-scale">tick 0 .. ${escapeHtml(horizon)} (now ${escapeHtml(now)})</div>
  </div>`;
}

export function renderCircuitsTable(circuits: CircuitDoc[]): string {
  if (circuits.length === 0) {
    return `<p class="empty">no circuits</p>`;
  }
  const rows = circuits.map((c) => `
    <tr data-circuit="${escapeHtml(c.name)}">
      <td>${escapeHtml(c.name)}</td>
      <td>${escapeHtml(c.ep1.endpoint)} (${vlanText(c.ep1.vlan)}) &harr;
          ${escapeHtml(c.ep2.endpoint)} (${vlanText(c.ep2.vlan)})</td>
      <td>${c.path.map(escapeHtml).join(" ") || "(same vfc)"}</td>
      <td>${badge(c.state)}</td>
      <td>${c.state === "Installed" || c.state === "Failed"
        ? `<button class="small" data-remove="${escapeHtml(c.name)}">remove</button>`
        : ""}</td>
    </tr>`).join("");
  return `
    <table class="grid">
      <thead><tr><th>name</th><th>endpoints</th><th>path</th>
                 <th>state</th><th></th></tr></thead>
      <tbody>${rows}</tbody>
    </table>`;
}

export function renderCluster(cluster: ClusterDoc | null,
                              assertion: string | null): string {
  if (!cluster) return `<p class="empty">cluster state unavailable</p>`;
  const chips = cluster.replicas.map((replica) => {
    const isLeader = cluster.leader === replica.id;
    const action = replica.status === "Alive"
      ? `<button class="small" data-kill="${replica.id}">kill</button>`
      : `<button class="small" data-revive="${replica.id}">revive</button>`;
    return `
      <div class="replica ${replica.status === "Alive" ? "alive" : "dead"}${isLeader ? " leader" : ""}">
        <span class="replica-id">replica ${replica.id}</span>
        ${isLeader ? `<span class="leader-badge">leader</span>` : ""}
        <span class="replica-status">${escapeHtml(replica.status)}</span>
        <span class="replica-applied">applied ${escapeHtml(replica.applied_index)}</span>
        ${action}
      </div>`;
  }).join("");
  const quorum = cluster.quorum
    ? `<span class="quorum ok">quorum ${cluster.replicas.filter((r) => r.status === "Alive").length}/${cluster.size}</span>`
    : `<span class="quorum lost">NO QUORUM &mdash; mutations disabled</span>`;
  return `
    <div class="cluster-head">term ${escapeHtml(cluster.term)} ${quorum}</div>
    <div class="replicas">${chips}</div>
    ${assertion ? `<div class="assertion">${escapeHtml(assertion)}</div>` : ""}
    <div class="hash">rule-table hash <code>${escapeHtml(cluster.rule_table_hash.slice(0, 16))}…</code></div>`;
}

export function renderNsi(reservations: NsiDoc[], available: boolean): string {
  if (!available) {
    return `<p class="empty">no peer domain configured on this node</p>`;
  }
  if (reservations.length === 0) {
    return `<p class="empty">no inter-domain reservations</p>`;
  }
  return reservations.map((r) => {
    const segments = Object.entries(r.segments).map(([name, segment]) => `
      <tr><td>${escapeHtml(name)}</td><td>${badge(segment.state)}</td>
          <td>${segment.path ? segment.path.map(escapeHtml).join(" ") : ""}</td>
          <td>${segment.service ? escapeHtml(segment.service) : ""}</td></tr>`).join("");
    const actions = [
      r.state === "Held"
        ? `<button class="small" data-nsi="commit" data-cid="${escapeHtml(r.correlation_id)}">commit</button>` : "",
      r.state === "Committed"
        ? `<button class="small" data-nsi="provision" data-cid="${escapeHtml(r.correlation_id)}">provision</button>` : "",
      r.state !== "Released"
        ? `<button class="small" data-nsi="release" data-cid="${escapeHtml(r.correlation_id)}">release</button>` : "",
    ].join(" ");
    return `
      <div class="nsi-card" data-nsi-card="${escapeHtml(r.correlation_id)}">
        <div class="nsi-head">${escapeHtml(r.correlation_id)} ${badge(r.state)}
          <span class="nsi-detail">${escapeHtml(r.src)} &rarr; ${escapeHtml(r.dst)},
            ${escapeHtml(r.bandwidth_mbps)} Mb/s,
            [${escapeHtml(r.start_tick)},${escapeHtml(r.end_tick)}),
            stitch ${r.stitch_vlan === null ? "-" : escapeHtml(r.stitch_vlan)}</span>
        </div>
        ${r.failure ? `<div class="nsi-failure">${escapeHtml(r.failure)}</div>` : ""}
        <table class="grid nsi-segments">
          <thead><tr><th>domain</th><th>state</th><th>path</th><th>service</th></tr></thead>
          <tbody>${segments}</tbody>
        </table>
        <div class="nsi-actions">${actions}</div>
      </div>`;
  }).join("");
}

export function renderEventLog(events: StreamEvent[], limit = 14): string {
  const tail = events.slice(-limit).reverse();
  if (tail.length === 0) return `<p class="empty">no events yet</p>`;
  return tail.map((event) =>
    `<div class="event-line">[${escapeHtml(event.seq)}] ${escapeHtml(JSON.stringify(event))}</div>`,
  ).join("");
}
