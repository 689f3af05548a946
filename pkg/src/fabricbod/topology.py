"""Topology document loading.

The document is UTF-8 JSON with four arrays: devices, vfcs, links and
endpoints.  Array order is significant; the fabric is built by replaying the
entries in order, and any validation failure is reported with the path of
the offending entry.
"""

from __future__ import annotations

import json
from pathlib import Path

from .errors import FabricError, ParseError
from .fabric import Fabric, PortBacking


def load_topology(doc: dict) -> Fabric:
    if not isinstance(doc, dict):
        raise ParseError("topology document must be a JSON object")
    fabric = Fabric()
    build_into(fabric, doc)
    return fabric


def build_into(fabric: Fabric, doc: dict) -> None:
    """Replay a topology document onto an existing fabric."""
    for i, entry in enumerate(_array(doc, "devices")):
        with _entry(f"devices[{i}]"):
            ports = [
                (_req(p, "id", str, f"devices[{i}].ports[{j}]"),
                 _req(p, "speed_mbps", int, f"devices[{i}].ports[{j}]"))
                for j, p in enumerate(_req(entry, "ports", list, f"devices[{i}]"))
            ]
            fabric.add_device(_req(entry, "id", str, f"devices[{i}]"), ports)

    for i, entry in enumerate(_array(doc, "vfcs")):
        path = f"vfcs[{i}]"
        with _entry(path):
            backings = []
            for j, p in enumerate(_req(entry, "ports", list, path)):
                ppath = f"{path}.ports[{j}]"
                spec = _req(p, "backing", dict, ppath)
                kind = _req(spec, "kind", str, ppath)
                if kind == "physical":
                    backing = PortBacking("physical", _req(spec, "physical_port", str, ppath))
                elif kind == "tunnel":
                    backing = PortBacking(
                        "tunnel",
                        _req(spec, "physical_port", str, ppath),
                        _req(spec, "tunnel_vlan", int, ppath),
                    )
                else:
                    raise ParseError(f"{ppath}: unknown backing kind {kind!r}")
                backings.append((_req(p, "id", str, ppath), backing))
            fabric.carve_vfc(
                _req(entry, "device", str, path),
                _req(entry, "overlay", str, path),
                backings,
                vfc_id=_req(entry, "id", str, path),
            )

    for i, entry in enumerate(_array(doc, "links")):
        path = f"links[{i}]"
        with _entry(path):
            a = _req(entry, "a", dict, path)
            b = _req(entry, "b", dict, path)
            fabric.add_link(
                _req(entry, "id", str, path),
                (_req(a, "vfc", str, f"{path}.a"), _req(a, "port", str, f"{path}.a")),
                (_req(b, "vfc", str, f"{path}.b"), _req(b, "port", str, f"{path}.b")),
                _req(entry, "capacity_mbps", int, path),
            )

    for i, entry in enumerate(_array(doc, "endpoints")):
        path = f"endpoints[{i}]"
        with _entry(path):
            fabric.add_endpoint(
                _req(entry, "id", str, path),
                _req(entry, "vfc", str, path),
                _req(entry, "port", str, path),
                _req(entry, "access_mbps", int, path),
            )


def load_topology_file(path: str | Path) -> Fabric:
    return load_topology(read_topology_file(path))


def read_topology_file(path: str | Path) -> dict:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ParseError(f"cannot read topology file {path}: {e}") from e
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(f"{path}: invalid JSON: {e}") from e


class _entry:
    """Context manager tagging constructor errors with the entry path."""

    def __init__(self, path: str):
        self.path = path

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc is not None and isinstance(exc, FabricError) and not isinstance(exc, ParseError):
            raise ParseError(f"{self.path}: {exc}") from exc
        return False


def _array(doc: dict, key: str) -> list:
    value = doc.get(key, [])
    if not isinstance(value, list):
        raise ParseError(f"{key} must be an array")
    return value


def _req(obj: dict, key: str, typ: type, path: str):
    if not isinstance(obj, dict) or key not in obj:
        raise ParseError(f"{path}: missing {key!r}")
    value = obj[key]
    if typ is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ParseError(f"{path}: {key!r} must be an integer")
    elif not isinstance(value, typ):
        raise ParseError(f"{path}: {key!r} must be {typ.__name__}")
    return value
