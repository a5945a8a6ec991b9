"""Graph analytics over an EventWeb and semantic association through a
domain ontology.

Operations are programmatic: selection, path navigation, grouping with
aggregates, centrality and connectivity.
"""
from __future__ import annotations

import json
import numbers
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Optional, Sequence

import networkx as nx

from .errors import (
    CycleError,
    DataError,
    InvalidLabelError,
    MissingEndpointError,
    UnboundConceptError,
)
from .model import FAMILY_LABELS, EventWeb

MISSING_KEY = "∅"
RELATIONS = ("is-a", "can-be", "can-cause", "can-create", "part-of")
# relations that may be followed against their stated direction
SYMMETRIC_RELATIONS = frozenset({"is-a", "can-be", "part-of"})


# ------------------------------------------------------------- selection

def node_value(node, key):
    """Typed field (``event_type``, ``entity_type``, ``node_kind``...) or an
    attribute; None when absent."""
    if key == "type":
        return getattr(node, "event_type", None) or getattr(node, "entity_type", None)
    if key != "attrs" and hasattr(node, key):
        return getattr(node, key)
    return getattr(node, "attrs", {}).get(key)


def select_nodes(g: EventWeb, predicate: Callable) -> list:
    """Ids (ascending) of the nodes for which ``predicate(node)`` holds."""
    return [nid for nid in sorted(g.nodes) if predicate(g.nodes[nid])]


def where(kind: Optional[str] = None, type: Optional[str] = None,
          equals: Optional[Mapping] = None, ranges: Optional[Mapping] = None) -> Callable:
    """Predicate on node kind, event/entity type, exact attribute values and
    closed numeric ranges ``{attr: (lo, hi)}`` (either bound may be None)."""
    equals = dict(equals or {})
    ranges = dict(ranges or {})

    def pred(node):
        if kind is not None and node.node_kind != kind:
            return False
        if type is not None and node_value(node, "type") != type:
            return False
        for k, v in equals.items():
            if node_value(node, k) != v:
                return False
        for k, (lo, hi) in ranges.items():
            v = node_value(node, k)
            if not isinstance(v, numbers.Real) or isinstance(v, bool):
                return False
            if (lo is not None and v < lo) or (hi is not None and v > hi):
                return False
        return True

    return pred


def known_labels(g: EventWeb) -> set:
    labels = set()
    for allowed in FAMILY_LABELS.values():
        if allowed is not None:
            labels |= allowed
    labels |= {e.label for e in g.edges.values()}
    return labels


def navigate(g: EventWeb, start: Iterable[str], path: Sequence) -> list:
    """Follow ``path``, a sequence of ``(label, direction)`` steps with
    direction ``out``, ``in`` or ``both``, from every start node."""
    valid = known_labels(g)
    steps = []
    for step in path:
        label, direction = (step, "out") if isinstance(step, str) else step
        if label not in valid:
            raise InvalidLabelError(f"unknown edge label {label!r}")
        if direction not in ("out", "in", "both"):
            raise DataError(f"bad direction {direction!r}")
        steps.append((label, direction))
    current = set(start)
    for nid in current:
        g.node(nid)
    for label, direction in steps:
        nxt = set()
        for nid in current:
            nxt.update(g.neighbors(nid, label, direction))
        current = nxt
    return sorted(current)


# ----------------------------------------------------------- aggregation

@dataclass
class GroupedAggregate:
    key: str
    members: list
    count: int
    value: Optional[float] = None

    def to_dict(self):
        return {"key": self.key, "members": self.members, "count": self.count,
                "value": self.value}


def composed_closure(g: EventWeb, nodes: Iterable[str]) -> set:
    """The nodes together with all their composed-of descendants."""
    out, stack = set(), list(nodes)
    while stack:
        x = stack.pop()
        if x in out:
            continue
        out.add(x)
        stack.extend(g.neighbors(x, "composed-of", "out"))
    return out


def group_aggregate(g: EventWeb, nodes: Iterable[str], key: str,
                    agg_attr: Optional[str] = None, op: str = "count",
                    rollup: bool = False) -> list:
    """Group ``nodes`` by the value of ``key`` (missing values group under
    ``"∅"``) and aggregate ``agg_attr`` with ``op``. With ``rollup`` the
    composed-of descendants of the input are added first."""
    if not key:
        raise DataError("group key must be non-empty")
    if op not in ("count", "sum", "avg"):
        raise DataError(f"unknown aggregate {op!r}")
    if op != "count" and not agg_attr:
        raise DataError(f"{op} needs an attribute to aggregate")
    members = set(nodes)
    for nid in members:
        g.node(nid)
    if rollup:
        members = composed_closure(g, members)
    groups: dict = {}
    for nid in sorted(members):
        v = node_value(g.nodes[nid], key)
        groups.setdefault(MISSING_KEY if v is None else str(v), []).append(nid)
    out = []
    for k in sorted(groups):
        ids = groups[k]
        value = None
        if op == "count":
            value = float(len(ids))
        else:
            vals = []
            for nid in ids:
                v = node_value(g.nodes[nid], agg_attr)
                if v is None:
                    continue
                if not isinstance(v, numbers.Real) or isinstance(v, bool):
                    raise DataError(f"attribute {agg_attr!r} of {nid} is not numeric: {v!r}")
                vals.append(float(v))
            if vals:
                value = sum(vals) if op == "sum" else sum(vals) / len(vals)
        out.append(GroupedAggregate(k, ids, len(ids), value))
    return out


# -------------------------------------------------- centrality/connectivity

def undirected_projection(g: EventWeb) -> nx.Graph:
    G = nx.Graph()
    G.add_nodes_from(sorted(g.nodes))
    G.add_edges_from((e.src, e.dst) for e in g.edges.values() if e.src != e.dst)
    return G


def centrality(g: EventWeb, measure: str = "degree") -> dict:
    """``degree``: incident edge count; ``betweenness``: unnormalized
    shortest-path betweenness on the undirected projection."""
    if measure == "degree":
        return {nid: len(g._out[nid]) + len(g._in[nid]) for nid in sorted(g.nodes)}
    if measure == "betweenness":
        bc = nx.betweenness_centrality(undirected_projection(g), normalized=False)
        return {nid: float(bc[nid]) for nid in sorted(g.nodes)}
    raise DataError(f"unknown centrality measure {measure!r}")


def connectivity(g: EventWeb, u: str, v: str) -> int:
    """Number of edge-disjoint paths between ``u`` and ``v``."""
    for x in (u, v):
        g.node(x)
    if u == v:
        raise DataError("connectivity needs two distinct nodes")
    G = undirected_projection(g)
    return int(nx.edge_connectivity(G, u, v))


# -------------------------------------------------------------- ontology

@dataclass
class Ontology:
    concepts: set
    links: list
    bindings: dict = field(default_factory=dict)

    def __post_init__(self):
        self.concepts = set(self.concepts)
        self.links = [tuple(link) for link in self.links]
        self.bindings = dict(self.bindings)
        for a, b, rel in self.links:
            if rel not in RELATIONS:
                raise InvalidLabelError(f"unknown ontology relation {rel!r}")
            for c in (a, b):
                if c not in self.concepts:
                    raise MissingEndpointError(f"ontology link endpoint {c!r} is not a concept")
        for t, c in self.bindings.items():
            if c not in self.concepts:
                raise MissingEndpointError(f"binding {t!r} -> {c!r}: unknown concept")
        isa = nx.DiGraph((a, b) for a, b, rel in self.links if rel == "is-a")
        if not nx.is_directed_acyclic_graph(isa):
            raise CycleError("is-a links form a cycle")

    @classmethod
    def from_dict(cls, d):
        links = [(x["from"], x["to"], x["type"]) for x in d.get("links", [])]
        return cls(set(d.get("concepts", [])), links, d.get("bindings", {}))

    def to_dict(self):
        return {
            "concepts": sorted(self.concepts),
            "links": [{"from": a, "to": b, "type": r} for a, b, r in sorted(self.links)],
            "bindings": dict(sorted(self.bindings.items())),
        }

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def steps_from(self, c):
        """``(next concept, relation, inverse)`` moves out of ``c``."""
        out = []
        for a, b, rel in self.links:
            if a == c:
                out.append((b, rel, False))
            if b == c and rel in SYMMETRIC_RELATIONS:
                out.append((a, rel, True))
        return sorted(set(out))

    def concept_of(self, x, g: Optional[EventWeb] = None) -> str:
        """Concept for a node id (via its type), a bound type, or a concept."""
        if g is not None and x in g.nodes:
            t = node_value(g.nodes[x], "type")
            if t in self.bindings:
                return self.bindings[t]
            if t in self.concepts:
                return t
            raise UnboundConceptError(f"node {x!r} (type {t!r}) is not bound to a concept")
        if x in self.bindings:
            return self.bindings[x]
        if x in self.concepts:
            return x
        raise UnboundConceptError(f"{x!r} is neither a bound type nor a concept")


@dataclass(frozen=True)
class AssocPath:
    """Concepts visited in order; ``steps[k] = (concept, relation, inverse)``
    where the relation leads to the next concept (None on the last step)."""
    steps: tuple

    def __len__(self):
        return len(self.steps) - 1

    @property
    def concepts(self):
        return [c for c, _, _ in self.steps]

    def render(self) -> str:
        parts = []
        for c, rel, inv in self.steps:
            parts.append(c)
            if rel is not None:
                parts.append(f"which-{rel}" + ("-inverse" if inv else ""))
        return " ".join(parts)

    def to_dict(self):
        return {"length": len(self), "path": self.render(),
                "steps": [{"concept": c, "relation": r, "inverse": i} for c, r, i in self.steps]}


def semantic_association(o: Ontology, g: Optional[EventWeb], src, dst, max_len: int) -> list:
    """All simple concept paths of at most ``max_len`` links from ``src`` to
    ``dst``, shortest first then lexicographic. ``src == dst`` yields the
    single zero-length path."""
    if max_len < 1:
        raise DataError("max_len must be >= 1")
    a, b = o.concept_of(src, g), o.concept_of(dst, g)
    if a == b:
        return [AssocPath(((a, None, False),))]
    found = []

    def dfs(c, trail, seen):
        if len(trail) > max_len:
            return
        for nxt, rel, inv in o.steps_from(c):
            if nxt in seen:
                continue
            step = trail + [(c, rel, inv)]
            if nxt == b:
                found.append(AssocPath(tuple(step) + ((b, None, False),)))
            elif len(step) < max_len:
                dfs(nxt, step, seen | {nxt})

    dfs(a, [], {a})
    return sorted(set(found), key=lambda p: (len(p), [(c, r or "", i) for c, r, i in p.steps]))
