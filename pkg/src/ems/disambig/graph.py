"""Undirected weighted view of an EventWeb used by the connection-strength
models.

Every EventWeb edge contributes a base similarity looked up by its label,
then by its family (default 1.0), times the edge's own weight; parallel
edges between a pair collapse by max. Choice nodes add virtual edges from
their owner to each candidate with weight ``edge_weight * p_i``; the
virtual candidate's share ``edge_weight * p_z`` counts towards the owner's
weighted degree but leads nowhere.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Optional

import numpy as np

from ..errors import DataError, UnknownNodeError
from ..model import EventWeb


@dataclass
class BaseSimilarityMatrix:
    nodes: list
    B: np.ndarray

    def __post_init__(self):
        self.index = {n: k for k, n in enumerate(self.nodes)}

    def __getitem__(self, pair):
        x, y = pair
        return float(self.B[self.index[x], self.index[y]])


def edge_similarity(edge, family_weights: Optional[Mapping] = None) -> float:
    fw = family_weights or {}
    w = fw.get(edge.label, fw.get(edge.family, 1.0))
    if w < 0:
        raise DataError(f"negative base weight for {edge.label!r}")
    return float(w) * edge.etype.weight


def base_pairs(g: EventWeb, family_weights=None) -> dict:
    """``{(x, y): w}`` with ``x < y`` for every linked pair (max over edges)."""
    pairs: dict = {}
    for e in g.edges.values():
        if e.src == e.dst:
            continue
        key = (e.src, e.dst) if e.src < e.dst else (e.dst, e.src)
        w = edge_similarity(e, family_weights)
        if w > pairs.get(key, 0.0):
            pairs[key] = w
    return pairs


def base_matrix(g: EventWeb, family_weights: Optional[Mapping] = None) -> BaseSimilarityMatrix:
    """Dense base similarity matrix over all EventWeb nodes (sorted ids)."""
    nodes = sorted(g.nodes)
    idx = {n: k for k, n in enumerate(nodes)}
    B = np.zeros((len(nodes), len(nodes)))
    for (x, y), w in base_pairs(g, family_weights).items():
        B[idx[x], idx[y]] = B[idx[y], idx[x]] = w
    return BaseSimilarityMatrix(nodes, B)


class RelGraph:
    """Sparse adjacency ``{x: {y: w}}`` plus per-node weighted degree.

    Choice edges are kept apart from the base edges so that their weights
    can be refreshed every round and a single choice node can be left out.
    """

    def __init__(self, g: EventWeb, family_weights=None):
        self.g = g
        self.base: dict = {n: {} for n in g.nodes}
        for (x, y), w in base_pairs(g, family_weights).items():
            self.base[x][y] = w
            self.base[y][x] = w

    def adjacency(self, weights: Mapping[str, list], exclude=None):
        """Adjacency and degrees under the given choice weights (choice id ->
        weight list in ``ChoiceNode`` layout); ``exclude`` drops one choice
        node entirely."""
        adj = {x: dict(nb) for x, nb in self.base.items()}
        deg = {x: sum(nb.values()) for x, nb in self.base.items()}
        for cid in sorted(self.g.choice_nodes):
            if cid == exclude:
                continue
            cn = self.g.choice_nodes[cid]
            p = weights[cid]
            u = cn.owner
            for v, pi in zip(cn.candidates, p):
                w = cn.edge_weight * pi
                if w <= 0:
                    continue
                adj[u][v] = adj[u].get(v, 0.0) + w
                adj[v][u] = adj[v].get(u, 0.0) + w
                deg[u] += w
                deg[v] += w
            if cn.has_z:
                deg[u] += cn.edge_weight * p[-1]
        return adj, deg


def check_node(g: EventWeb, node):
    if node not in g.nodes:
        raise UnknownNodeError(f"unknown node {node!r}")


def component(adj, start) -> list:
    """Sorted ids of the connected component containing ``start``."""
    seen, stack = {start}, [start]
    while stack:
        x = stack.pop()
        for y in adj[x]:
            if y not in seen:
                seen.add(y)
                stack.append(y)
    return sorted(seen)
