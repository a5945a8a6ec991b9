"""Random-walk connection strength over bounded simple paths.

The strength of ``u -> v`` sums, over every simple path from ``u`` to ``v``
of at most ``max_len`` steps, the product of the step probabilities
``w(x, y) / deg(x)``. Arrival at ``v`` ends a path.
"""
from __future__ import annotations

from collections import deque
from typing import Mapping, Optional

from ..errors import DataError
from ..model import EventWeb
from .graph import RelGraph, check_node


def _hops_to(adj, targets, limit):
    """Multi-source BFS distance (in steps) to the nearest target."""
    dist = {t: 0 for t in targets}
    queue = deque(targets)
    while queue:
        x = queue.popleft()
        d = dist[x] + 1
        if d > limit:
            continue
        for y in adj[x]:
            if y not in dist:
                dist[y] = d
                queue.append(y)
    return dist


def walk_strengths(adj, deg, u, targets, max_len: int) -> dict:
    """Strengths from ``u`` to each of ``targets`` in one depth-first pass."""
    if max_len < 1:
        raise DataError("max_len must be >= 1")
    targets = [t for t in dict.fromkeys(targets) if t != u]
    out = {t: 0.0 for t in targets}
    if not targets:
        return out
    tset = set(targets)
    dist = _hops_to(adj, targets, max_len)
    on_path = {u}

    def visit(x, prob, depth):
        dx = deg[x]
        if dx <= 0:
            return
        for y, w in adj[x].items():
            if y in on_path or depth + dist.get(y, max_len + 1) > max_len:
                continue
            p = prob * w / dx
            if y in tset:
                out[y] += p
            if depth < max_len:
                on_path.add(y)
                visit(y, p, depth + 1)
                on_path.discard(y)

    visit(u, 1.0, 1)
    return out


def random_walk_cs(g: EventWeb, u: str, v: str, max_len: int = 5,
                   exclude: Optional[str] = None,
                   weights: Optional[Mapping[str, list]] = None,
                   family_weights: Optional[Mapping] = None) -> float:
    """Connection strength of ``v`` as seen from ``u``.

    ``weights`` overrides the stored choice-node weights; ``exclude`` names
    a choice node whose virtual edges are ignored.
    """
    check_node(g, u)
    check_node(g, v)
    if u == v:
        raise DataError("connection strength needs two distinct nodes")
    cur = {cid: list(cn.weights) for cid, cn in g.choice_nodes.items()}
    if weights:
        cur.update(weights)
    adj, deg = RelGraph(g, family_weights).adjacency(cur, exclude)
    return walk_strengths(adj, deg, u, [v], max_len)[v]
