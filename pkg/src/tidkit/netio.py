"""Network text format.

A network document is a JSON object with these sections, emitted in this
order::

    format      "tidkit-network/1"
    name        free text
    variables   [{"id", "name", "states"}, ...]
    tags        {"disease": [...], "finding": [...], "latent": [...]}
    nodes       [{"id", "kind"}, ...]            kind: chance|decision|value
    arcs        [[parent, child], ...]           grouped by child, in parent order
    cpts        {node id: [[row], ...]}          rows in lexicographic parent order
    utilities   {node id: [u, ...]}
    temporal    optional, see below
    kb          optional, {"decision": id, "value": id}

The ``temporal`` section describes a temporal-arc policy and the joint
transition tables of temporal children::

    {"kind": "markov", "order": 1, "scope": null,
     "arcs": [[source, target, lag], ...],           custom policies only
     "transitions": [{"variable": v, "parents": [[source, lag], ...],
                      "rows": [[...], ...]}, ...]}

Transition rows range over the child's within-slice parents followed by its
temporal parents (ordered by lag, then source id), first index slowest.

Emission is canonical: ``emit(parse(text)) == text`` for any emitted text and
``parse(emit(net)) == net`` bit for bit (floats are written with ``repr``).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .exceptions import ConfigError
from .network import TAGS, Network, Node, Variable

FORMAT = "tidkit-network/1"


@dataclass(frozen=True)
class NetworkDocument:
    """A parsed document: the network plus optional temporal/KB sections."""

    network: Network
    temporal: object | None = None  # tidkit.temporal.TemporalSpec
    kb: dict | None = None


def _rows(arr: np.ndarray) -> list:
    return [[float(x) for x in row] for row in arr]


def to_dict(net: Network, temporal=None, kb: dict | None = None) -> dict:
    doc: dict = {"format": FORMAT, "name": net.name}
    doc["variables"] = [
        {"id": n.id, "name": n.variable.name, "states": list(n.variable.states)} for n in net
    ]
    tags: dict[str, list[str]] = {}
    for tag in TAGS:
        if tag == "other":
            continue
        ids = [n.id for n in net if n.variable.tag == tag]
        if ids:
            tags[tag] = ids
    doc["tags"] = tags
    doc["nodes"] = [{"id": n.id, "kind": n.kind} for n in net]
    doc["arcs"] = [[p, n.id] for n in net for p in n.parents]
    doc["cpts"] = {n.id: _rows(net.cpts[n.id]) for n in net if n.id in net.cpts}
    doc["utilities"] = {n.id: [float(u) for u in net.utilities[n.id]] for n in net if n.id in net.utilities}
    if temporal is not None:
        doc["temporal"] = temporal.to_dict()
    if kb:
        doc["kb"] = dict(kb)
    return doc


def from_dict(doc: dict) -> NetworkDocument:
    if not isinstance(doc, dict):
        raise ConfigError("network document must be a JSON object")
    fmt = doc.get("format", FORMAT)
    if fmt != FORMAT:
        raise ConfigError(f"unsupported network format {fmt!r}")
    try:
        tag_of = {}
        for tag, ids in (doc.get("tags") or {}).items():
            if tag not in TAGS:
                raise ConfigError(f"unknown tag {tag!r}")
            for i in ids:
                tag_of[i] = tag
        variables = {}
        for v in doc["variables"]:
            variables[v["id"]] = Variable(v["id"], tuple(v["states"]), v.get("name", ""), tag_of.get(v["id"], "other"))
        parents: dict[str, list[str]] = {}
        for parent, child in doc.get("arcs", []):
            parents.setdefault(child, []).append(parent)
        nodes = []
        for entry in doc["nodes"]:
            node_id = entry["id"]
            if node_id not in variables:
                raise ConfigError(f"node {node_id!r} has no variable entry")
            nodes.append(Node(variables[node_id], entry.get("kind", "chance"), tuple(parents.get(node_id, ()))))
        net = Network(nodes, doc.get("cpts", {}), doc.get("utilities", {}), doc.get("name", ""))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"malformed network document: {exc}") from exc
    temporal = None
    if doc.get("temporal") is not None:
        from .temporal import TemporalSpec

        temporal = TemporalSpec.from_dict(doc["temporal"])
    return NetworkDocument(net, temporal, doc.get("kb"))


def _render(value, depth: int) -> str:
    multiline = isinstance(value, (dict, list)) and value and (
        depth < 2 or (isinstance(value, list) and all(isinstance(v, dict) for v in value))
    )
    if not multiline:
        return json.dumps(value, ensure_ascii=False)
    pad = "  " * (depth + 1)
    if isinstance(value, dict):
        items = [f"{pad}{json.dumps(k, ensure_ascii=False)}: {_render(v, depth + 1)}" for k, v in value.items()]
        open_, close = "{", "}"
    else:
        items = [f"{pad}{_render(v, depth + 1)}" for v in value]
        open_, close = "[", "]"
    return open_ + "\n" + ",\n".join(items) + "\n" + "  " * depth + close


def emit(net: Network, temporal=None, kb: dict | None = None) -> str:
    """Serialize ``net`` (plus optional sections) to canonical text."""
    return _render(to_dict(net, temporal, kb), 0) + "\n"


def parse(text: str) -> NetworkDocument:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"network file is not valid JSON: {exc}") from exc
    return from_dict(doc)


def emit_document(document: NetworkDocument) -> str:
    return emit(document.network, document.temporal, document.kb)


def read_network(path) -> NetworkDocument:
    return parse(Path(path).read_text(encoding="utf-8"))


def write_network(path, net: Network, temporal=None, kb: dict | None = None) -> None:
    Path(path).write_text(emit(net, temporal, kb), encoding="utf-8")
