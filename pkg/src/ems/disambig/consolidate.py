"""Object consolidation: group descriptions that denote the same object."""
from __future__ import annotations

from itertools import combinations
from typing import Iterable, Mapping, Optional

import numpy as np

from ..errors import DataError
from ..model import EventWeb
from .fbs import AttrSpec, fbs_similarity
from .graph import RelGraph, check_node
from .kernels import exp_kernel, von_neumann_kernel
from .walk import walk_strengths


def connection_strengths(g: EventWeb, nodes: list, model="walk", max_len=5, lam=0.1,
                         family_weights=None) -> np.ndarray:
    """Symmetric matrix of pairwise strengths among ``nodes``; the walk model
    averages both directions."""
    rel = RelGraph(g, family_weights)
    weights = {cid: list(cn.weights) for cid, cn in g.choice_nodes.items()}
    adj, deg = rel.adjacency(weights)
    n = len(nodes)
    C = np.zeros((n, n))
    if model == "walk":
        for a, u in enumerate(nodes):
            cs = walk_strengths(adj, deg, u, nodes, max_len)
            for b, v in enumerate(nodes):
                if a != b:
                    C[a, b] = cs[v]
        return (C + C.T) / 2
    if model not in ("vn", "exp"):
        raise DataError(f"unknown model {model!r}")
    order = sorted(adj)
    pos = {x: k for k, x in enumerate(order)}
    B = np.zeros((len(order), len(order)))
    for x, nb in adj.items():
        for y, w in nb.items():
            B[pos[x], pos[y]] = w
    K = (von_neumann_kernel if model == "vn" else exp_kernel)(B, lam)
    sel = [pos[v] for v in nodes]
    C = np.clip(K[np.ix_(sel, sel)], 0.0, None)
    np.fill_diagonal(C, 0.0)
    return C


def _components(n, edges):
    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for a, b in edges:
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)
    groups: dict = {}
    for x in range(n):
        groups.setdefault(find(x), []).append(x)
    return list(groups.values())


def consolidate(g: EventWeb, descriptions: Iterable[str], model: str = "walk",
                alpha: float = 0.5, theta: float = 0.5, gamma: float = 0.05,
                schema: Optional[Mapping[str, AttrSpec]] = None, max_len: int = 5,
                lam: float = 0.1, family_weights=None) -> list:
    """Partition ``descriptions`` into groups of co-referent nodes.

    Pairs scoring ``alpha * fbs + (1 - alpha) * c / (c + gamma)`` at or above
    ``theta`` are linked and the connected components are returned, each
    sorted, ordered by their first id.
    """
    if not 0 <= alpha <= 1:
        raise DataError("alpha must lie in [0, 1]")
    if not 0 < theta <= 1:
        raise DataError("theta must lie in (0, 1]")
    if gamma <= 0:
        raise DataError("gamma must be > 0")
    nodes = sorted(set(descriptions))
    for v in nodes:
        check_node(g, v)
    if not nodes:
        return []
    C = None
    if alpha < 1:
        C = connection_strengths(g, nodes, model, max_len, lam, family_weights)
    attrs = [getattr(g.nodes[v], "attrs", {}) for v in nodes]
    edges = []
    for a, b in combinations(range(len(nodes)), 2):
        s = alpha * fbs_similarity(attrs[a], attrs[b], schema) if alpha > 0 else 0.0
        if C is not None:
            c = C[a, b]
            s += (1 - alpha) * c / (c + gamma)
        if s >= theta - 1e-12:
            edges.append((a, b))
    groups = [sorted(nodes[k] for k in grp) for grp in _components(len(nodes), edges)]
    return sorted(groups)


def _pairs(groups):
    out = set()
    for grp in groups:
        out.update(combinations(sorted(grp), 2))
    return out


def pairwise_f1(predicted, truth) -> float:
    """F1 of the co-reference pairs implied by two groupings. Two all-singleton
    groupings agree perfectly."""
    p, t = _pairs(predicted), _pairs(truth)
    if not p and not t:
        return 1.0
    tp = len(p & t)
    if tp == 0:
        return 0.0
    prec, rec = tp / len(p), tp / len(t)
    return 2 * prec * rec / (prec + rec)
