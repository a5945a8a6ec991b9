"""Event model: reports, events, entities, milieus and the EventWeb graph."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Any, Iterator, Optional, Union

import shapely
from shapely.geometry import LinearRing, Point, Polygon

from .errors import (
    CycleError,
    DataError,
    DegenerateGeometryError,
    DuplicateIdError,
    InvalidLabelError,
    MissingEndpointError,
    UnknownNodeError,
)

MODALITIES = ("text", "audio", "video", "sensor", "other")

FAMILY_LABELS = {
    "event_entity": frozenset({"agentive", "influencing", "mediating", "participant"}),
    "event_milieu": frozenset({"at-time", "during", "at-location", "near-location"}),
    "milieu_milieu": frozenset({
        "before", "begins", "ends", "during", "contains", "overlaps",
        "meets", "equals", "touches", "disjoint", "near",
    }),
    "event_event": frozenset({"causes", "hinders", "composed-of"}),
    "event_report": frozenset({"reported-in"}),
    # free-form
    "entity_entity": None,
}

TEMPORAL_LABELS = ("before", "after", "equals", "begins", "ends",
                   "during", "contains", "overlaps", "meets")
SPATIAL_LABELS = ("contains", "within", "equals", "touches", "overlaps", "disjoint", "near")


@dataclass
class Report:
    id: str
    timestamp: float
    modality: str = "text"
    raw_ref: str = ""
    attrs: dict = field(default_factory=dict)

    node_kind = "report"

    def __post_init__(self):
        if self.modality not in MODALITIES:
            raise DataError(f"unknown modality {self.modality!r}")
        if not math.isfinite(self.timestamp):
            raise DataError(f"report {self.id}: timestamp must be finite")


@dataclass
class Event:
    id: str
    event_type: str
    milieu_time: Optional[str] = None
    milieu_space: Optional[str] = None
    location_pdf: Optional[str] = None
    attrs: dict = field(default_factory=dict)

    node_kind = "event"

    def __post_init__(self):
        if not self.event_type:
            raise DataError(f"event {self.id}: event_type must be non-empty")


@dataclass
class Entity:
    id: str
    entity_type: str
    attrs: dict = field(default_factory=dict)

    node_kind = "entity"


@dataclass
class TemporalMilieu:
    id: str
    kind: str
    start: float
    end: Optional[float] = None
    attrs: dict = field(default_factory=dict)

    node_kind = "temporal_milieu"

    def __post_init__(self):
        if self.end is None:
            self.end = self.start
        if self.kind not in ("point", "interval"):
            raise DataError(f"temporal milieu {self.id}: bad kind {self.kind!r}")
        if self.start > self.end:
            raise DataError(f"temporal milieu {self.id}: start > end")
        if self.kind == "point" and self.start != self.end:
            raise DataError(f"temporal milieu {self.id}: point must have start == end")

    @classmethod
    def point(cls, id, t, **attrs):
        return cls(id, "point", t, t, attrs)

    @classmethod
    def interval(cls, id, start, end, **attrs):
        return cls(id, "interval", start, end, attrs)


@dataclass
class SpatialMilieu:
    """A point, a simple polygon, or a named place with a geometry.

    ``geometry`` is ``(x, y)`` for points and a list of ``(x, y)`` vertices
    for regions; coordinates are planar meters.
    """

    id: str
    kind: str
    geometry: Any
    name: Optional[str] = None
    attrs: dict = field(default_factory=dict)

    node_kind = "spatial_milieu"

    def __post_init__(self):
        if self.kind not in ("point", "region", "named"):
            raise DataError(f"spatial milieu {self.id}: bad kind {self.kind!r}")

    def shape(self):
        return to_shape(self.geometry)


Node = Union[Report, Event, Entity, TemporalMilieu, SpatialMilieu]
Milieu = (TemporalMilieu, SpatialMilieu)
NODE_TYPES = {cls.node_kind: cls for cls in (Report, Event, Entity, TemporalMilieu, SpatialMilieu)}

# endpoint kinds allowed per family (src, dst)
FAMILY_ENDPOINTS = {
    "event_entity": ((Event,), (Entity,)),
    "entity_entity": ((Entity,), (Entity,)),
    "event_milieu": ((Event,), Milieu),
    "milieu_milieu": (Milieu, Milieu),
    "event_event": ((Event,), (Event,)),
    "event_report": ((Event,), (Report,)),
}


@dataclass(frozen=True)
class EdgeType:
    family: str
    label: str
    weight: float = 1.0

    def __post_init__(self):
        if self.family not in FAMILY_LABELS:
            raise InvalidLabelError(f"unknown edge family {self.family!r}")
        allowed = FAMILY_LABELS[self.family]
        if allowed is not None and self.label not in allowed:
            raise InvalidLabelError(
                f"label {self.label!r} is not valid for family {self.family}")
        if not self.label:
            raise InvalidLabelError("empty edge label")
        if not (self.weight >= 0 and math.isfinite(self.weight)):
            raise DataError(f"edge weight must be a nonnegative real, got {self.weight}")


@dataclass
class Edge:
    id: str
    src: str
    dst: str
    etype: EdgeType
    attrs: dict = field(default_factory=dict)

    @property
    def label(self):
        return self.etype.label

    @property
    def family(self):
        return self.etype.family


@dataclass
class ChoiceNode:
    """An unresolved reference from ``owner`` to one of ``candidates`` (or to
    nothing stored, the virtual candidate).

    ``weights`` holds one weight per candidate followed by the virtual
    candidate's weight when ``has_z`` is set.
    """

    id: str
    owner: str
    candidates: list
    weights: list = None
    has_z: bool = True
    role: str = "participant"
    edge_weight: float = 1.0
    description: str = ""
    attrs: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.candidates:
            raise DataError(f"choice node {self.id}: needs at least one candidate")
        if len(set(self.candidates)) != len(self.candidates):
            raise DataError(f"choice node {self.id}: duplicate candidates")
        n = len(self.candidates) + (1 if self.has_z else 0)
        if self.weights is None:
            self.weights = [1.0 / n] * n
        if len(self.weights) != n:
            raise DataError(f"choice node {self.id}: expected {n} weights")
        if any(w < 0 or w > 1 for w in self.weights) or abs(sum(self.weights) - 1.0) > 1e-9:
            raise DataError(f"choice node {self.id}: weights must lie in [0,1] and sum to 1")

    def candidate_weights(self):
        return dict(zip(self.candidates, self.weights))

    @property
    def z_weight(self):
        return self.weights[-1] if self.has_z else 0.0


class EventWeb:
    """Attributed graph of reports, events, entities and milieus.

    Edges are directed and typed; the graph is the single source of truth
    for relationships between nodes.
    """

    def __init__(self):
        self.nodes: dict[str, Node] = {}
        self.edges: dict[str, Edge] = {}
        self.choice_nodes: dict[str, ChoiceNode] = {}
        self._triples: set = set()
        self._out: dict[str, list] = {}
        self._in: dict[str, list] = {}
        self._next_edge = 0

    def __len__(self):
        return len(self.nodes)

    def __contains__(self, node_id):
        return node_id in self.nodes

    @property
    def node_count(self):
        return len(self.nodes)

    @property
    def edge_count(self):
        return len(self.edges)

    def add_node(self, node: Node) -> str:
        if node.id in self.nodes or node.id in self.choice_nodes:
            raise DuplicateIdError(f"duplicate node id {node.id!r}")
        self.nodes[node.id] = node
        self._out[node.id] = []
        self._in[node.id] = []
        return node.id

    def node(self, node_id) -> Node:
        try:
            return self.nodes[node_id]
        except KeyError:
            raise UnknownNodeError(f"unknown node {node_id!r}") from None

    def add_edge(self, src: str, dst: str, etype: EdgeType, attrs=None, edge_id=None) -> str:
        for end in (src, dst):
            if end not in self.nodes:
                raise MissingEndpointError(f"edge endpoint {end!r} does not exist")
        src_kinds, dst_kinds = FAMILY_ENDPOINTS[etype.family]
        if not isinstance(self.nodes[src], src_kinds) or not isinstance(self.nodes[dst], dst_kinds):
            raise InvalidLabelError(
                f"family {etype.family} cannot connect "
                f"{self.nodes[src].node_kind} -> {self.nodes[dst].node_kind}")
        key = (src, dst, etype.label)
        if key in self._triples:
            raise DuplicateIdError(f"duplicate edge {src} -[{etype.label}]-> {dst}")
        if etype.label == "composed-of" and self._reaches(dst, src, "composed-of"):
            raise CycleError(f"composed-of edge {src} -> {dst} would create a cycle")
        if edge_id is None:
            edge_id = f"e{self._next_edge}"
        if edge_id in self.edges:
            raise DuplicateIdError(f"duplicate edge id {edge_id!r}")
        self._next_edge += 1
        edge = Edge(edge_id, src, dst, etype, dict(attrs or {}))
        self.edges[edge_id] = edge
        self._triples.add(key)
        self._out[src].append(edge_id)
        self._in[dst].append(edge_id)
        return edge_id

    def link(self, src, dst, family, label, weight=1.0, **attrs) -> str:
        return self.add_edge(src, dst, EdgeType(family, label, weight), attrs)

    def add_choice_node(self, cn: ChoiceNode) -> str:
        if cn.id in self.nodes or cn.id in self.choice_nodes:
            raise DuplicateIdError(f"duplicate node id {cn.id!r}")
        for ref in [cn.owner, *cn.candidates]:
            if ref not in self.nodes:
                raise MissingEndpointError(f"choice node {cn.id}: unknown node {ref!r}")
        self.choice_nodes[cn.id] = cn
        return cn.id

    def _reaches(self, start, goal, label):
        stack, seen = [start], {start}
        while stack:
            x = stack.pop()
            if x == goal:
                return True
            for eid in self._out[x]:
                e = self.edges[eid]
                if e.label == label and e.dst not in seen:
                    seen.add(e.dst)
                    stack.append(e.dst)
        return False

    def out_edges(self, node_id) -> list[Edge]:
        self.node(node_id)
        return [self.edges[e] for e in self._out[node_id]]

    def in_edges(self, node_id) -> list[Edge]:
        self.node(node_id)
        return [self.edges[e] for e in self._in[node_id]]

    def incident(self, node_id) -> list[Edge]:
        return self.out_edges(node_id) + self.in_edges(node_id)

    def neighbors(self, node_id, label=None, direction="out") -> list[str]:
        """Neighbor ids reached over edges with ``label`` (any when None)."""
        found = []
        if direction in ("out", "both"):
            found += [e.dst for e in self.out_edges(node_id) if label is None or e.label == label]
        if direction in ("in", "both"):
            found += [e.src for e in self.in_edges(node_id) if label is None or e.label == label]
        return sorted(set(found))

    def iter_nodes(self, kind=None) -> Iterator[Node]:
        for nid in sorted(self.nodes):
            node = self.nodes[nid]
            if kind is None or node.node_kind == kind:
                yield node

    def to_dict(self) -> dict:
        nodes = []
        for nid in sorted(self.nodes):
            node = self.nodes[nid]
            nodes.append({"node_kind": node.node_kind, **_jsonable(asdict(node))})
        edges = [{
            "id": e.id, "src": e.src, "dst": e.dst, "family": e.family,
            "label": e.label, "weight": e.etype.weight, "attrs": e.attrs,
        } for e in self.edges.values()]
        choice = [_jsonable(asdict(self.choice_nodes[c])) for c in sorted(self.choice_nodes)]
        return {"nodes": nodes, "edges": edges, "choice_nodes": choice}

    @classmethod
    def from_dict(cls, data: dict) -> "EventWeb":
        g = cls()
        for rec in data.get("nodes", []):
            rec = dict(rec)
            node_cls = NODE_TYPES[rec.pop("node_kind")]
            if node_cls is SpatialMilieu and rec.get("geometry") is not None:
                geom = rec["geometry"]
                rec["geometry"] = tuple(geom) if _is_point(geom) else [tuple(p) for p in geom]
            g.add_node(node_cls(**rec))
        # composed-of edges were acyclic when written; replay in the stored order
        for rec in data.get("edges", []):
            g.add_edge(rec["src"], rec["dst"],
                       EdgeType(rec["family"], rec["label"], rec.get("weight", 1.0)),
                       rec.get("attrs"), edge_id=rec["id"])
        g._next_edge = max([_edge_seq(e) for e in g.edges] + [-1]) + 1
        for rec in data.get("choice_nodes", []):
            g.add_choice_node(ChoiceNode(**rec))
        return g

    def signature(self):
        """Order-independent summary used to compare graphs for isomorphism
        under identity of node ids."""
        nodes = sorted((n.node_kind, n.id) for n in self.nodes.values())
        edges = sorted((e.src, e.dst, e.family, e.label, e.etype.weight) for e in self.edges.values())
        return nodes, edges


def _edge_seq(edge_id):
    try:
        return int(edge_id.lstrip("e"))
    except ValueError:
        return -1


def _is_point(geom):
    return len(geom) == 2 and all(isinstance(v, (int, float)) for v in geom)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj


# ---------------------------------------------------------------- relations

def temporal_relate(a: TemporalMilieu, b: TemporalMilieu) -> set[str]:
    """Relations holding from ``a`` to ``b`` in the nine-label taxonomy.

    ``during``/``contains`` mean proper inclusion (boundaries included);
    ``begins``/``ends`` refine ``during`` when the start/end coincide.
    ``meets`` and ``overlaps`` are read symmetrically.
    """
    (s1, e1), (s2, e2) = (a.start, a.end), (b.start, b.end)
    if s1 == s2 and e1 == e2:
        return {"equals"}
    if e1 < s2:
        return {"before"}
    if s1 > e2:
        return {"after"}
    if s2 <= s1 and e1 <= e2:
        rel = {"during"}
        if s1 == s2:
            rel.add("begins")
        if e1 == e2:
            rel.add("ends")
        return rel
    if s1 <= s2 and e2 <= e1:
        return {"contains"}
    # both have positive length here
    if e1 == s2 or e2 == s1:
        return {"meets"}
    return {"overlaps"}


def to_shape(geometry):
    if geometry is None:
        raise DegenerateGeometryError("missing geometry")
    if _is_point(geometry):
        return Point(geometry)
    pts = [tuple(p) for p in geometry]
    if len(pts) < 3:
        raise DegenerateGeometryError("polygon needs at least 3 vertices")
    ring = LinearRing(pts)
    if not ring.is_simple:
        raise DegenerateGeometryError("polygon is self-intersecting")
    poly = Polygon(ring)
    if poly.area <= 0:
        raise DegenerateGeometryError("polygon has zero area")
    return poly


def spatial_relate(a: SpatialMilieu, b: SpatialMilieu, near_dist: float = 0.0) -> set[str]:
    if near_dist < 0:
        raise DataError("near_dist must be >= 0")
    ga, gb = a.shape(), b.shape()
    rel = set()
    if ga.equals(gb):
        rel.add("equals")
    elif ga.contains(gb):
        rel.add("contains")
    elif ga.within(gb):
        rel.add("within")
    elif ga.touches(gb):
        rel.add("touches")
    elif ga.disjoint(gb):
        rel.add("disjoint")
        if 0 < shapely.distance(ga, gb) <= near_dist:
            rel.add("near")
    else:
        rel.add("overlaps")
    return rel

