"""Iterative resolution of choice nodes.

All choice nodes are updated together: each round computes, for every
choice node, the connection strength from its owner to each candidate under
the previous round's weights (with the node itself left out), then sets

    p_i = (c_i + c0) / (sum_k (c_k + c0) + (c_z + c0))

where ``c_z`` is a fixed strength for the virtual candidate.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Mapping, Optional

import numpy as np

from ..errors import DataError, NoChoiceNodesError
from ..model import EventWeb
from .fbs import fbs_similarity
from .graph import RelGraph, component
from .kernels import exp_kernel, von_neumann_kernel
from .walk import walk_strengths

log = logging.getLogger(__name__)

MODELS = ("walk", "vn", "exp")


@dataclass(frozen=True)
class ResolveOptions:
    model: str = "walk"
    max_len: int = 5
    lam: float = 0.1
    c_z: float = 0.01
    c0: float = 1e-6
    tol: float = 1e-4
    max_iters: int = 100
    margin_min: float = 0.05

    def __post_init__(self):
        if self.model not in MODELS:
            raise DataError(f"unknown model {self.model!r}; expected one of {MODELS}")
        if self.max_len < 1:
            raise DataError("max_len must be >= 1")
        if self.c_z < 0 or self.c0 < 0:
            raise DataError("c_z and c0 must be >= 0")
        if self.max_iters < 1:
            raise DataError("max_iters must be >= 1")


@dataclass
class ChoiceResult:
    id: str
    candidates: list
    weights: list
    has_z: bool
    selected: Optional[str]
    ambiguous: bool

    def to_dict(self, converged, rounds):
        ws = [{"candidate": c, "p": p} for c, p in zip(self.candidates, self.weights)]
        if self.has_z:
            ws.append({"candidate": None, "p": self.weights[-1]})
        return {"id": self.id, "weights": ws, "selected": self.selected,
                "ambiguous": self.ambiguous, "converged": converged, "rounds": rounds}


@dataclass
class ResolutionResult:
    choices: dict
    converged: bool
    rounds: int
    history: list = field(default_factory=list)

    def __getitem__(self, cid) -> ChoiceResult:
        return self.choices[cid]

    def selected(self) -> dict:
        return {cid: r.selected for cid, r in self.choices.items()}

    def to_json(self) -> list:
        return [self.choices[cid].to_dict(self.converged, self.rounds)
                for cid in sorted(self.choices)]


def _strengths(rel: RelGraph, g: EventWeb, weights, opts: ResolveOptions) -> dict:
    out = {}
    for cid in sorted(g.choice_nodes):
        cn = g.choice_nodes[cid]
        adj, deg = rel.adjacency(weights, exclude=cid)
        if opts.model == "walk":
            cs = walk_strengths(adj, deg, cn.owner, cn.candidates, opts.max_len)
            out[cid] = [cs[v] for v in cn.candidates]
            continue
        nodes = component(adj, cn.owner)
        pos = {n: k for k, n in enumerate(nodes)}
        B = np.zeros((len(nodes), len(nodes)))
        for x in nodes:
            for y, w in adj[x].items():
                B[pos[x], pos[y]] = w
        kern = von_neumann_kernel if opts.model == "vn" else exp_kernel
        K = kern(B, opts.lam)
        ku = pos[cn.owner]
        # candidates outside the owner's component have zero strength
        out[cid] = [max(float(K[ku, pos[v]]), 0.0) if v in pos else 0.0
                    for v in cn.candidates]
    return out


def _update(c, has_z, opts: ResolveOptions):
    vals = [ci + opts.c0 for ci in c]
    if has_z:
        vals.append(opts.c_z + opts.c0)
    s = sum(vals)
    if not s > 0:
        return [1.0 / len(vals)] * len(vals)
    return [v / s for v in vals]


def _select(cn, weights, margin_min):
    entries = [(p, 0, v) for v, p in zip(cn.candidates, weights)]
    if cn.has_z:
        entries.append((weights[-1], 1, None))
    # highest weight first; ties go to the smallest candidate id, then z
    entries.sort(key=lambda t: (-round(t[0], 12), t[1], t[2] or ""))
    top = entries[0]
    second = entries[1][0] if len(entries) > 1 else 0.0
    return top[2], (top[0] - second) < margin_min


def resolve_references(g: EventWeb, opts: ResolveOptions = ResolveOptions(),
                       family_weights: Optional[Mapping] = None,
                       apply: bool = False) -> ResolutionResult:
    """Resolve every choice node of ``g`` simultaneously.

    Weights start uniform. With ``apply`` the final weights are written back
    to the graph's choice nodes.
    """
    if not g.choice_nodes:
        raise NoChoiceNodesError("the graph has no choice nodes")
    rel = RelGraph(g, family_weights)
    weights = {}
    for cid, cn in g.choice_nodes.items():
        n = len(cn.candidates) + (1 if cn.has_z else 0)
        weights[cid] = [1.0 / n] * n
    history = [{cid: list(w) for cid, w in weights.items()}]
    converged, rounds = False, 0
    for rounds in range(1, opts.max_iters + 1):
        strengths = _strengths(rel, g, weights, opts)
        new = {cid: _update(strengths[cid], g.choice_nodes[cid].has_z, opts)
               for cid in sorted(g.choice_nodes)}
        delta = max(abs(a - b) for cid in new for a, b in zip(new[cid], weights[cid]))
        weights = new
        history.append({cid: list(w) for cid, w in weights.items()})
        log.debug("round %d: max weight change %.3g", rounds, delta)
        if delta < opts.tol:
            converged = True
            break
    if not converged:
        log.warning("resolution did not converge after %d rounds", rounds)
    choices = {}
    for cid in sorted(g.choice_nodes):
        cn = g.choice_nodes[cid]
        sel, amb = _select(cn, weights[cid], opts.margin_min)
        choices[cid] = ChoiceResult(cid, list(cn.candidates), weights[cid], cn.has_z, sel, amb)
        if apply:
            cn.weights = list(weights[cid])
    return ResolutionResult(choices, converged, rounds, history)


def resolve_fbs(g: EventWeb, schema=None, descriptions: Optional[Mapping] = None,
                margin_min: float = 0.05) -> ResolutionResult:
    """Attribute-only baseline: each choice node picks the candidate whose
    attributes best match the reference description (its ``attrs``, or the
    ``name`` given by its description string)."""
    if not g.choice_nodes:
        raise NoChoiceNodesError("the graph has no choice nodes")
    choices = {}
    for cid in sorted(g.choice_nodes):
        cn = g.choice_nodes[cid]
        desc = (descriptions or {}).get(cid) or cn.attrs or {"name": cn.description}
        sims = [fbs_similarity(desc, getattr(g.nodes[v], "attrs", {}), schema)
                for v in cn.candidates]
        total = sum(sims)
        n = len(sims)
        w = [x / total for x in sims] if total > 0 else [1.0 / n] * n
        entries = sorted(zip(w, cn.candidates), key=lambda t: (-round(t[0], 12), t[1]))
        second = entries[1][0] if n > 1 else 0.0
        weights = w + ([0.0] if cn.has_z else [])
        choices[cid] = ChoiceResult(cid, list(cn.candidates), weights, cn.has_z,
                                    entries[0][1], entries[0][0] - second < margin_min)
    return ResolutionResult(choices, True, 0)
