// Typed client for the controller's JSON API. Every value the console
// displays comes out of these documents or the event stream; the UI never
// derives numbers on its own.

export interface PortDoc {
  id: string;
  up: boolean;
}

export interface VfcDoc {
  id: string;
  device: string;
  overlay: string;
  ports: PortDoc[];
}

export interface LinkEnd {
  vfc: string;
  port: string;
}

export interface LinkDoc {
  id: string;
  a: LinkEnd;
  b: LinkEnd;
  capacity_mbps: number;
  state: "Up" | "Down";
  committed_mbps: number;
}

export interface EndpointDoc {
  id: string;
  vfc: string;
  port: string;
  access_mbps: number;
}

export interface TopologyDoc {
  devices: unknown[];
  vfcs: VfcDoc[];
  links: LinkDoc[];
  endpoints: EndpointDoc[];
  now: number;
  at_tick: number;
}

export interface ServiceDoc {
  id: string;
  src: string;
  dst: string;
  bandwidth_mbps: number;
  start_tick: number;
  end_tick: number;
  src_vlan: number | null;
  dst_vlan: number | null;
  state: string;
  path: string[];
  link_vlans: Record<string, number>;
  meter_rate_mbps: number;
}

export interface CircuitAttachment {
  endpoint: string;
  vlan: number | null;
}

export interface CircuitDoc {
  name: string;
  ep1: CircuitAttachment;
  ep2: CircuitAttachment;
  state: string;
  path: string[];
  link_vlans: Record<string, number>;
}

export interface ReplicaDoc {
  id: number;
  status: "Alive" | "Dead";
  applied_index: number;
  log_length: number;
}

export interface ClusterDoc {
  size: number;
  term: number;
  leader: number | null;
  quorum: boolean;
  commit_index: number;
  replicas: ReplicaDoc[];
  now: number | null;
  rule_table_hash: string;
}

export interface NsiSegmentDoc {
  domain: string;
  state: string;
  hold_deadline: number | null;
  path: string[] | null;
  link_vlans: Record<string, number> | null;
  service: string | null;
}

export interface NsiDoc {
  correlation_id: string;
  src: string;
  dst: string;
  bandwidth_mbps: number;
  start_tick: number;
  end_tick: number;
  stitch_vlan: number | null;
  state: string;
  failure: string | null;
  segments: Record<string, NsiSegmentDoc>;
}

export interface InjectResultDoc {
  frame: string;
  outcome: string;
  hops: string[];
  egress_endpoint?: string;
  egress_vlan?: number | null;
  drop_reason?: string;
}

export interface InjectDoc {
  injected: number;
  delivered: number;
  dropped: Record<string, number>;
  results: InjectResultDoc[];
}

export interface ErrorDoc {
  kind: string;
  message: string;
  reason?: string;
}

export interface ApiResponse<T> {
  ok: boolean;
  status: number;
  doc: T | null;
  error: ErrorDoc | null;
}

export class ApiClient {
  constructor(public base: string = "") {}

  private async request<T>(method: string, path: string,
                           body?: unknown): Promise<ApiResponse<T>> {
    let response: Response;
    try {
      response = await fetch(this.base + path, {
        method,
        headers: body === undefined ? {} : { "Content-Type": "application/json" },
        body: body === undefined ? undefined : JSON.stringify(body),
      });
    } catch (err) {
      return { ok: false, status: 0, doc: null,
               error: { kind: "Unreachable", message: String(err) } };
    }
    const text = await response.text();
    let parsed: unknown = null;
    try {
      parsed = JSON.parse(text);
    } catch {
      parsed = null;
    }
    if (!response.ok) {
      const errorDoc = (parsed as { error?: ErrorDoc } | null)?.error ?? {
        kind: `HTTP${response.status}`, message: text,
      };
      return { ok: false, status: response.status, doc: null, error: errorDoc };
    }
    return { ok: true, status: response.status, doc: parsed as T, error: null };
  }

  getTopology(at?: number | null): Promise<ApiResponse<TopologyDoc>> {
    const suffix = at === null || at === undefined ? "" : `?at=${at}`;
    return this.request("GET", `/topology${suffix}`);
  }

  listServices(): Promise<ApiResponse<{ services: ServiceDoc[] }>> {
    return this.request("GET", "/bod/services");
  }

  requestService(body: Record<string, unknown>): Promise<ApiResponse<ServiceDoc>> {
    return this.request("POST", "/bod/services", body);
  }

  cancelService(id: string): Promise<ApiResponse<ServiceDoc>> {
    return this.request("DELETE", `/bod/services/${encodeURIComponent(id)}`);
  }

  listCircuits(): Promise<ApiResponse<{ circuits: CircuitDoc[] }>> {
    return this.request("GET", "/sdxl2/circuits");
  }

  createCircuit(body: Record<string, unknown>): Promise<ApiResponse<CircuitDoc>> {
    return this.request("POST", "/sdxl2/circuits", body);
  }

  removeCircuit(name: string): Promise<ApiResponse<CircuitDoc>> {
    return this.request("DELETE", `/sdxl2/circuits/${encodeURIComponent(name)}`);
  }

  linkEvent(linkId: string, state: "up" | "down"):
      Promise<ApiResponse<{ events: unknown[] }>> {
    return this.request("POST", "/events/link", { link_id: linkId, state });
  }

  advanceClock(ticks: number): Promise<ApiResponse<{ now: number }>> {
    return this.request("POST", "/clock/advance", { ticks });
  }

  inject(body: Record<string, unknown>): Promise<ApiResponse<InjectDoc>> {
    return this.request("POST", "/dataplane/inject", body);
  }

  getCluster(): Promise<ApiResponse<ClusterDoc>> {
    return this.request("GET", "/cluster");
  }

  killReplica(id: number): Promise<ApiResponse<ClusterDoc>> {
    return this.request("POST", `/cluster/${id}/kill`);
  }

  reviveReplica(id: number): Promise<ApiResponse<ClusterDoc>> {
    return this.request("POST", `/cluster/${id}/revive`);
  }

  nsiList(): Promise<ApiResponse<{ reservations: NsiDoc[] }>> {
    return this.request("GET", "/nsi");
  }

  nsiReserve(body: Record<string, unknown>): Promise<ApiResponse<NsiDoc>> {
    return this.request("POST", "/nsi/reserve", body);
  }

  nsiAction(cid: string, verb: "commit" | "provision" | "release"):
      Promise<ApiResponse<NsiDoc>> {
    return this.request("POST", `/nsi/${encodeURIComponent(cid)}/${verb}`);
  }
}
