"""Command-line client and server launcher.

Every subcommand maps 1:1 onto an HTTP endpoint; `--json` prints the raw
response body (byte-identical to the HTTP response), and `--local TOPO`
runs the same route core against an in-process node instead of a remote
service.  Exit codes: 0 success, 1 usage, 2 rejected operation, 3 transport
failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from importlib import resources
from pathlib import Path

from .api import ApiCore, ApiServer
from .node import DEFAULT_BOUNDARY, NodeConfig, NsiSetup, ServiceNode
from .topology import read_topology_file

DEFAULT_ADDR = os.environ.get("FABRIC_BOD_ADDR", "http://127.0.0.1:8080")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"error: {message}\n")
        sys.exit(1)


def bundled_topology(name: str) -> dict:
    with resources.files("fabricbod.data").joinpath(name).open("rb") as fh:
        return json.load(fh)


class HttpTransport:
    def __init__(self, addr: str):
        self.addr = addr.rstrip("/")

    def request(self, method, path, body=None, params=None):
        import requests
        try:
            response = requests.request(
                method, self.addr + path, json=body, params=params, timeout=60,
            )
        except requests.RequestException as e:
            sys.stderr.write(f"transport failure: {e}\n")
            sys.exit(3)
        return response.status_code, response.content


class LocalTransport:
    def __init__(self, topology_path: str, replicas: int = 3,
                 nsi_peer_path: str | None = None):
        nsi = None
        if nsi_peer_path:
            nsi = NsiSetup(peer_topology=read_topology_file(nsi_peer_path))
        config = NodeConfig(topology=read_topology_file(topology_path),
                            replicas=replicas, nsi=nsi)
        self.core = ApiCore(ServiceNode(config))

    def request(self, method, path, body=None, params=None):
        query = {k: [str(v)] for k, v in (params or {}).items()}
        response = self.core.handle(method, path, query, body)
        return response.status, response.body


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_help()
        return 1
    if args.command == "serve":
        return cmd_serve(args)
    if not hasattr(args, "run"):
        sys.stderr.write(f"error: {args.command} requires a subcommand\n")
        return 1

    if args.local:
        transport = LocalTransport(args.local, nsi_peer_path=args.local_nsi_peer)
    else:
        transport = HttpTransport(args.addr)
    status, body = args.run(transport, args)
    if args.json:
        sys.stdout.write(body.decode())
        return 0 if status < 400 else 2
    render(args, status, body)
    return 0 if status < 400 else 2


def build_parser() -> _Parser:
    parser = _Parser(prog="fabricbod",
                     description="Operate the bandwidth-on-demand / L2-exchange controller")
    parser.add_argument("--addr", default=DEFAULT_ADDR,
                        help="service address (env FABRIC_BOD_ADDR)")
    parser.add_argument("--json", action="store_true",
                        help="print the raw JSON response body")
    parser.add_argument("--local", metavar="TOPO",
                        help="run against an in-process node loaded from this topology file")
    parser.add_argument("--local-nsi-peer", metavar="TOPO",
                        help="with --local: emulate a peer domain from this topology file")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    serve = sub.add_parser("serve", help="run the HTTP service")
    serve.add_argument("--topology", help="topology file (default: bundled pilot)")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8080)
    serve.add_argument("--replicas", type=int, default=3)
    serve.add_argument("--nsi-peer", metavar="TOPO",
                       help="emulate a peer domain ('bundled' for the packaged one)")
    serve.add_argument("--boundary", metavar="JSON",
                       help="inter-domain boundary spec file (default: bundled)")
    serve.add_argument("--ui-dir", help="serve UI assets from this directory under /ui")
    serve.add_argument("--trace", action="store_true",
                       help="write dataplane trace lines to stderr")

    topo = sub.add_parser("topo", help="show the fabric")
    topo.add_argument("--at", type=int, default=None,
                      help="report committed bandwidth at this tick")
    topo.set_defaults(run=lambda t, a: t.request(
        "GET", "/topology", params={"at": a.at} if a.at is not None else None))

    bod = sub.add_parser("bod", help="timed bandwidth services")
    bod_sub = bod.add_subparsers(dest="action", parser_class=_Parser)
    breq = bod_sub.add_parser("request")
    breq.add_argument("--src", required=True)
    breq.add_argument("--dst", required=True)
    breq.add_argument("--mbps", type=int, required=True)
    breq.add_argument("--start", type=int, required=True)
    breq.add_argument("--end", type=int, required=True)
    breq.add_argument("--src-vlan", type=int, default=None)
    breq.add_argument("--dst-vlan", type=int, default=None)
    breq.set_defaults(run=lambda t, a: t.request("POST", "/bod/services", body={
        "src": a.src, "dst": a.dst, "mbps": a.mbps,
        "start": a.start, "end": a.end,
        "src_vlan": a.src_vlan, "dst_vlan": a.dst_vlan,
    }))
    blist = bod_sub.add_parser("list")
    blist.set_defaults(run=lambda t, a: t.request("GET", "/bod/services"))
    bshow = bod_sub.add_parser("show")
    bshow.add_argument("id")
    bshow.set_defaults(run=lambda t, a: t.request("GET", f"/bod/services/{a.id}"))
    bcancel = bod_sub.add_parser("cancel")
    bcancel.add_argument("id")
    bcancel.set_defaults(run=lambda t, a: t.request("DELETE", f"/bod/services/{a.id}"))

    circuits = sub.add_parser("circuits", help="layer-2 circuits")
    c_sub = circuits.add_subparsers(dest="action", parser_class=_Parser)
    ccreate = c_sub.add_parser("create")
    ccreate.add_argument("--name", required=True)
    ccreate.add_argument("--ep1", required=True, metavar="ENDPOINT[:VLAN]")
    ccreate.add_argument("--ep2", required=True, metavar="ENDPOINT[:VLAN]")
    ccreate.set_defaults(run=lambda t, a: t.request("POST", "/sdxl2/circuits", body={
        "name": a.name, "ep1": _parse_attachment(a.ep1),
        "ep2": _parse_attachment(a.ep2),
    }))
    clist = c_sub.add_parser("list")
    clist.set_defaults(run=lambda t, a: t.request("GET", "/sdxl2/circuits"))
    cshow = c_sub.add_parser("show")
    cshow.add_argument("name")
    cshow.set_defaults(run=lambda t, a: t.request("GET", f"/sdxl2/circuits/{a.name}"))
    cremove = c_sub.add_parser("remove")
    cremove.add_argument("name")
    cremove.set_defaults(run=lambda t, a: t.request(
        "DELETE", f"/sdxl2/circuits/{a.name}"))

    fail = sub.add_parser("fail", help="inject topology failures")
    f_sub = fail.add_subparsers(dest="action", parser_class=_Parser)
    flink = f_sub.add_parser("link")
    flink.add_argument("link_id")
    flink.set_defaults(run=lambda t, a: t.request("POST", "/events/link", body={
        "link_id": a.link_id, "state": "down"}))
    frestore = f_sub.add_parser("restore")
    frestore.add_argument("link_id")
    frestore.set_defaults(run=lambda t, a: t.request("POST", "/events/link", body={
        "link_id": a.link_id, "state": "up"}))
    fport = f_sub.add_parser("port")
    fport.add_argument("vfc")
    fport.add_argument("port")
    fport.add_argument("--state", choices=["up", "down"], required=True)
    fport.set_defaults(run=lambda t, a: t.request("POST", "/events/port", body={
        "vfc": a.vfc, "port": a.port, "state": a.state}))

    clock = sub.add_parser("clock", help="drive the virtual clock")
    k_sub = clock.add_subparsers(dest="action", parser_class=_Parser)
    kadv = k_sub.add_parser("advance")
    kadv.add_argument("ticks", type=int)
    kadv.set_defaults(run=lambda t, a: t.request("POST", "/clock/advance",
                                                 body={"ticks": a.ticks}))

    inject = sub.add_parser("inject", help="inject frames at a client endpoint")
    inject.add_argument("--endpoint", required=True)
    inject.add_argument("--vlan", type=int, default=None)
    inject.add_argument("--size-bits", type=int, default=1000)
    inject.add_argument("--count", type=int, default=1)
    inject.set_defaults(run=lambda t, a: t.request("POST", "/dataplane/inject", body={
        "endpoint": a.endpoint, "vlan": a.vlan,
        "size_bits": a.size_bits, "count": a.count,
    }))

    cluster = sub.add_parser("cluster", help="controller cluster management")
    cl_sub = cluster.add_subparsers(dest="action", parser_class=_Parser)
    cstatus = cl_sub.add_parser("status")
    cstatus.set_defaults(run=lambda t, a: t.request("GET", "/cluster"))
    ckill = cl_sub.add_parser("kill")
    ckill.add_argument("id", type=int)
    ckill.set_defaults(run=lambda t, a: t.request("POST", f"/cluster/{a.id}/kill"))
    crevive = cl_sub.add_parser("revive")
    crevive.add_argument("id", type=int)
    crevive.set_defaults(run=lambda t, a: t.request("POST", f"/cluster/{a.id}/revive"))

    nsi = sub.add_parser("nsi", help="inter-domain reservations")
    n_sub = nsi.add_subparsers(dest="action", parser_class=_Parser)
    nreserve = n_sub.add_parser("reserve")
    nreserve.add_argument("--src", required=True)
    nreserve.add_argument("--dst", required=True)
    nreserve.add_argument("--mbps", type=int, required=True)
    nreserve.add_argument("--start", type=int, required=True)
    nreserve.add_argument("--end", type=int, required=True)
    nreserve.add_argument("--src-vlan", type=int, default=None)
    nreserve.add_argument("--dst-vlan", type=int, default=None)
    nreserve.set_defaults(run=lambda t, a: t.request("POST", "/nsi/reserve", body={
        "src": a.src, "dst": a.dst, "mbps": a.mbps,
        "start": a.start, "end": a.end,
        "src_vlan": a.src_vlan, "dst_vlan": a.dst_vlan,
    }))
    for verb in ("commit", "provision", "release"):
        p = n_sub.add_parser(verb)
        p.add_argument("cid")
        p.set_defaults(run=lambda t, a, v=verb: t.request("POST", f"/nsi/{a.cid}/{v}"))
    nlist = n_sub.add_parser("list")
    nlist.set_defaults(run=lambda t, a: t.request("GET", "/nsi"))
    nshow = n_sub.add_parser("show")
    nshow.add_argument("cid")
    nshow.set_defaults(run=lambda t, a: t.request("GET", f"/nsi/{a.cid}"))
    ntrace = n_sub.add_parser("trace")
    ntrace.set_defaults(run=lambda t, a: t.request("GET", "/nsi/trace"))

    events = sub.add_parser("events", help="dump the event feed")
    events.add_argument("--since", type=int, default=0)
    events.set_defaults(run=lambda t, a: t.request(
        "GET", "/events", params={"since": a.since, "follow": 0}))

    return parser


def cmd_serve(args) -> int:
    if args.topology:
        topology = read_topology_file(args.topology)
    else:
        topology = bundled_topology("pilot.topo")
    nsi = None
    if args.nsi_peer:
        if args.nsi_peer == "bundled":
            peer = bundled_topology("legacy.topo")
        else:
            peer = read_topology_file(args.nsi_peer)
        if args.boundary:
            boundary = json.loads(Path(args.boundary).read_text())
            nsi = NsiSetup(peer_topology=peer, boundary=boundary)
        else:
            nsi = NsiSetup(peer_topology=peer)
    trace = (lambda line: sys.stderr.write(line + "\n")) if args.trace else None
    ui_dir = args.ui_dir or os.environ.get("FABRIC_BOD_UI")
    if ui_dir is None:
        candidate = Path.cwd() / "frontend" / "dist"
        ui_dir = candidate if candidate.is_dir() else None
    try:
        config = NodeConfig(topology=topology, replicas=args.replicas,
                            nsi=nsi, trace=trace)
        node = ServiceNode(config)
        server = ApiServer(node, args.host, args.port, ui_dir)
    except Exception as e:
        sys.stderr.write(f"startup failed: {e}\n")
        return 4
    sys.stderr.write(f"listening on {server.address}\n")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        server.close()
    return 0


def _parse_attachment(spec: str) -> dict:
    if ":" in spec:
        endpoint, vlan = spec.rsplit(":", 1)
        return {"endpoint": endpoint, "vlan": int(vlan)}
    return {"endpoint": spec, "vlan": None}


# --- human-readable rendering ---

def render(args, status: int, body: bytes) -> None:
    text = body.decode()
    if args.command == "nsi" and getattr(args, "action", None) == "trace":
        sys.stdout.write(text)
        return
    if args.command == "events":
        for line in text.splitlines():
            if line:
                print(_event_line(json.loads(line)))
        return
    try:
        doc = json.loads(text)
    except json.JSONDecodeError:
        sys.stdout.write(text)
        return
    if status >= 400:
        error = doc.get("error", {})
        reason = f" ({error['reason']})" if "reason" in error else ""
        print(f"error {error.get('kind', status)}{reason}: {error.get('message', '')}")
        return
    renderer = _RENDERERS.get((args.command, getattr(args, "action", None)))
    if renderer is None:
        renderer = _RENDERERS.get((args.command, None))
    if renderer:
        renderer(doc)
    else:
        print(json.dumps(doc, indent=2, sort_keys=True))


def _render_topology(doc):
    for device in doc["devices"]:
        print(f"device {device['id']} ports={len(device['ports'])}")
    for vfc in doc["vfcs"]:
        print(f"vfc {vfc['id']} overlay={vfc['overlay']} device={vfc['device']} "
              f"ports={len(vfc['ports'])}")
    for link in doc["links"]:
        print(f"link {link['id']} {link['a']['vfc']}/{link['a']['port']}"
              f"<->{link['b']['vfc']}/{link['b']['port']} "
              f"{link['capacity_mbps']}Mb/s {link['state']} "
              f"committed={link['committed_mbps']}")
    for ep in doc["endpoints"]:
        print(f"endpoint {ep['id']} {ep['vfc']}/{ep['port']} {ep['access_mbps']}Mb/s")
    print(f"now {doc['now']}")


def _render_service(doc):
    print(f"id {doc['id']}")
    print(f"state {doc['state']}")
    print(f"window [{doc['start_tick']},{doc['end_tick']})")
    print(f"bandwidth {doc['bandwidth_mbps']}Mb/s")
    print(f"path {' '.join(doc['path']) if doc['path'] else '(same vfc)'}")
    vlans = " ".join(f"{k}={v}" for k, v in sorted(doc["link_vlans"].items()))
    print(f"vlans {vlans or '-'}")


def _service_line(doc):
    path = " ".join(doc["path"]) if doc["path"] else "(same vfc)"
    return (f"{doc['id']} {doc['state']} {doc['bandwidth_mbps']}Mb/s "
            f"{doc['src']}->{doc['dst']} [{doc['start_tick']},{doc['end_tick']}) "
            f"path={path}")


def _render_circuit(doc):
    print(f"name {doc['name']}")
    print(f"state {doc['state']}")
    print(f"ep1 {_attachment_str(doc['ep1'])}")
    print(f"ep2 {_attachment_str(doc['ep2'])}")
    print(f"path {' '.join(doc['path']) if doc['path'] else '(same vfc)'}")
    vlans = " ".join(f"{k}={v}" for k, v in sorted(doc["link_vlans"].items()))
    print(f"vlans {vlans or '-'}")


def _circuit_line(doc):
    path = " ".join(doc["path"]) if doc["path"] else "(same vfc)"
    return (f"{doc['name']} {doc['state']} {_attachment_str(doc['ep1'])}"
            f"<->{_attachment_str(doc['ep2'])} path={path}")


def _attachment_str(att):
    return att["endpoint"] + (f":{att['vlan']}" if att["vlan"] is not None else "")


def _event_line(event):
    kind = event.get("kind", "?")
    seq = event.get("seq")
    prefix = f"[{seq}] " if seq is not None else ""
    if "domain" in event:
        prefix += f"({event['domain']}) "
    if kind in ("LinkDown", "LinkUp"):
        return f"{prefix}{kind} {event['link']}"
    if kind in ("PortDown", "PortUp"):
        return f"{prefix}{kind} {event['vfc']}/{event['port']}"
    if kind == "ServiceActivated":
        return f"{prefix}{kind} {event['id']} rules={event['rules_installed']}"
    if kind in ("ServiceExpired", "ServiceFailed", "ServiceCancelled"):
        return f"{prefix}{kind} {event['id']}"
    if kind == "ServiceScheduled":
        return f"{prefix}{kind} {event['service']['id']}"
    if kind in ("CircuitInstalled", "CircuitRerouted", "CircuitFailed",
                "CircuitRemoved"):
        return f"{prefix}{kind} {event['name']}"
    if kind == "RecoveryReport":
        ok = sum(1 for o in event["outcomes"] if o["outcome"] == "rerouted")
        bad = sum(1 for o in event["outcomes"] if o["outcome"] == "failed")
        return f"{prefix}{kind} {event['link']} rerouted={ok} failed={bad}"
    if kind == "ClusterEvent":
        detail = {k: v for k, v in event.items()
                  if k not in ("kind", "event", "seq", "tick", "domain")}
        extra = " ".join(f"{k}={v}" for k, v in sorted(detail.items()))
        return f"{prefix}{kind} {event['event']} {extra}".rstrip()
    if kind == "TickReport":
        return f"{prefix}tick {event['tick']} events={event['events']}"
    if kind == "NsiEvent":
        return f"{prefix}{kind} {event['correlation_id']} {event['state']}"
    return prefix + json.dumps(event, sort_keys=True)


def _render_events_doc(doc):
    for event in doc.get("events", []):
        print(_event_line(event))


def _render_cluster(doc):
    quorum = "yes" if doc["quorum"] else "NO-QUORUM"
    print(f"leader {doc['leader']} term {doc['term']} quorum {quorum}")
    for replica in doc["replicas"]:
        print(f"replica {replica['id']} {replica['status']} "
              f"applied={replica['applied_index']}")


def _render_nsi(doc):
    print(f"correlation {doc['correlation_id']}")
    print(f"state {doc['state']}")
    print(f"stitch_vlan {doc['stitch_vlan']}")
    if doc.get("failure"):
        print(f"failure {doc['failure']}")
    for name, segment in sorted(doc["segments"].items()):
        path = " ".join(segment["path"] or [])
        service = f" service={segment['service']}" if segment["service"] else ""
        print(f"segment {name} {segment['state']} path={path}{service}")


def _render_clock(doc):
    print(f"now {doc['now']}")
    for report in doc["reports"]:
        for event in report["events"]:
            print(f"tick {report['tick']} {_event_line(event)}")


def _render_inject(doc):
    drops = " ".join(f"{k}={v}" for k, v in doc["dropped"].items())
    print(f"injected {doc['injected']} delivered {doc['delivered']}"
          + (f" dropped {drops}" if drops else ""))
    if doc["injected"] == 1:
        result = doc["results"][0]
        if result["outcome"] == "Delivered":
            vlan = result["egress_vlan"]
            print(f"frame {result['frame']} Delivered "
                  f"egress={result['egress_endpoint']} "
                  f"vlan={'untagged' if vlan is None else vlan} "
                  f"hops={'>'.join(result['hops'])}")
        else:
            print(f"frame {result['frame']} Dropped({result['drop_reason']}) "
                  f"hops={'>'.join(result['hops'])}")


_RENDERERS = {
    ("topo", None): _render_topology,
    ("bod", "request"): _render_service,
    ("bod", "show"): _render_service,
    ("bod", "cancel"): lambda doc: print(f"{doc['id']} {doc['state']}"),
    ("bod", "list"): lambda doc: [print(_service_line(s)) for s in doc["services"]],
    ("circuits", "create"): _render_circuit,
    ("circuits", "show"): _render_circuit,
    ("circuits", "remove"): lambda doc: print(f"{doc['name']} {doc['state']}"),
    ("circuits", "list"): lambda doc: [print(_circuit_line(c))
                                       for c in doc["circuits"]],
    ("fail", "link"): _render_events_doc,
    ("fail", "restore"): _render_events_doc,
    ("fail", "port"): _render_events_doc,
    ("clock", "advance"): _render_clock,
    ("inject", None): _render_inject,
    ("cluster", "status"): _render_cluster,
    ("cluster", "kill"): _render_cluster,
    ("cluster", "revive"): _render_cluster,
    ("nsi", "reserve"): _render_nsi,
    ("nsi", "commit"): _render_nsi,
    ("nsi", "provision"): _render_nsi,
    ("nsi", "release"): _render_nsi,
    ("nsi", "show"): _render_nsi,
    ("nsi", "list"): lambda doc: [
        print(f"{r['correlation_id']} {r['state']} {r['src']}->{r['dst']} "
              f"{r['bandwidth_mbps']}Mb/s [{r['start_tick']},{r['end_tick']})")
        for r in doc["reservations"]],
}


if __name__ == "__main__":
    sys.exit(main())
