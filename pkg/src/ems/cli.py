"""Command-line interface. Every command prints JSON on standard output and
exits with 0 on success, 1 on a usage error and 2 on a data error."""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from .analytics import (
    centrality,
    connectivity,
    group_aggregate,
    select_nodes,
    semantic_association,
    where,
)
from .disambig import ResolveOptions, consolidate, resolve_references
from .errors import DataError, EMSError
from .generate import SyntheticScenario, generate
from .sexpr import parse
from .store import dump_json, ingest, load_store
from .synth import SynthParams

LOG_LEVELS = {"error": logging.ERROR, "warn": logging.WARNING, "warning": logging.WARNING,
              "info": logging.INFO, "debug": logging.DEBUG}


class UsageError(Exception):
    pass


class Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _floats(text, n, what):
    try:
        vals = [float(v) for v in text.split(",")]
    except ValueError:
        raise UsageError(f"{what} must be {n} comma-separated numbers") from None
    if len(vals) != n:
        raise UsageError(f"{what} must be {n} comma-separated numbers")
    return vals


def _value(text):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _emit(obj):
    sys.stdout.write(json.dumps(obj, sort_keys=True, indent=2, ensure_ascii=False) + "\n")


def _scores(pairs):
    return [{"id": i, "score": s} for i, s in pairs]


# ------------------------------------------------------------- commands

def cmd_ingest(a):
    if (a.eps_mass is None) != (a.eps_dev is None):
        raise UsageError("--eps-mass and --eps-dev go together")
    m = ingest(a.landmarks, a.reports, a.out, ontology_path=a.ontology, delta=a.delta,
               eps_mass=a.eps_mass or 0.0, eps_dev=a.eps_dev or 0.0, params=SynthParams())
    return {k: m[k] for k in ("counts", "failures", "records", "format_version")}


def cmd_generate(a):
    sc = SyntheticScenario(seed=a.seed, size_km=a.size, n_landmarks=a.landmarks,
                           n_reports=a.reports, delta=a.delta,
                           duplicate_rate=a.duplicate_rate, choice_rate=a.choice_rate)
    paths = generate(sc, a.out)
    return {k: os.path.basename(v) for k, v in paths.items()}


def _check_threshold(a):
    if a.tau is None and a.topk is None:
        raise UsageError("one of --tau or --topk is required")


def cmd_query_range(a):
    _check_threshold(a)
    loc = load_store(a.store).locations()
    rect = _floats(a.rect, 4, "--rect")
    if a.tau is not None:
        return _scores(loc.range_query(rect, a.tau))
    return _scores(loc.topk_range(rect, a.topk))


def cmd_query_sim(a):
    _check_threshold(a)
    if (a.id is None) == (a.sexpr is None):
        raise UsageError("exactly one of --id or --sexpr is required")
    store = load_store(a.store)
    loc = store.locations()
    q = a.id if a.id is not None else store.synthesizer()(parse(a.sexpr))
    if a.tau is not None:
        return _scores(loc.sim_threshold(q, a.tau))
    return _scores(loc.topk_similar(q, a.topk))


def cmd_disambiguate(a):
    store = load_store(a.store)
    opts = ResolveOptions(model=a.model, max_len=a.max_len, lam=a.lam, c_z=a.cz,
                          tol=a.tol, max_iters=a.max_iters)
    res = resolve_references(store.graph, opts)
    dump_json(res.to_json(), a.out)
    return {"choice_nodes": len(res.choices), "converged": res.converged,
            "rounds": res.rounds, "out": a.out,
            "selected": {cid: r.selected for cid, r in sorted(res.choices.items())}}


def cmd_consolidate(a):
    store = load_store(a.store)
    ents = [e.id for e in store.graph.iter_nodes("entity")]
    groups = consolidate(store.graph, ents, model=a.model, alpha=a.alpha, theta=a.theta,
                         gamma=a.gamma)
    dump_json({"groups": groups}, a.out)
    return {"descriptions": len(ents), "groups": len(groups),
            "merged": sum(1 for grp in groups if len(grp) > 1), "out": a.out}


def _predicate(a):
    equals, ranges = {}, {}
    for item in a.attr or []:
        k, sep, v = item.partition("=")
        if not sep or not k:
            raise UsageError(f"--attr expects KEY=VALUE, got {item!r}")
        equals[k] = _value(v)
    for item in a.range or []:
        parts = item.split(":")
        if len(parts) != 3 or not parts[0]:
            raise UsageError(f"--range expects KEY:LO:HI, got {item!r}")
        lo, hi = (float(p) if p else None for p in parts[1:])
        ranges[parts[0]] = (lo, hi)
    return where(kind=a.kind, type=a.type, equals=equals, ranges=ranges)


def cmd_graph(a):
    g = load_store(a.store).graph
    if a.graph_cmd == "centrality":
        return centrality(g, a.measure)
    if a.graph_cmd == "connectivity":
        return {"from": a.src, "to": a.dst, "connectivity": connectivity(g, a.src, a.dst)}
    nodes = select_nodes(g, _predicate(a))
    if a.graph_cmd == "select":
        return nodes
    groups = group_aggregate(g, nodes, a.key, a.agg, a.op, rollup=a.rollup)
    return [x.to_dict() for x in groups]


def cmd_assoc(a):
    store = load_store(a.store)
    if store.ontology is None:
        raise DataError("the store has no ontology")
    paths = semantic_association(store.ontology, store.graph, a.src, a.dst, a.max_len)
    return [p.to_dict() for p in paths]


# --------------------------------------------------------------- parser

def build_parser() -> Parser:
    p = Parser(prog="ems", description="Event management engine")
    sub = p.add_subparsers(dest="cmd", required=True, parser_class=Parser)

    s = sub.add_parser("ingest", help="build a store from landmark and report files")
    s.add_argument("--landmarks", required=True)
    s.add_argument("--reports", required=True)
    s.add_argument("--ontology")
    s.add_argument("--out", required=True)
    s.add_argument("--delta", type=float)
    s.add_argument("--eps-mass", type=float)
    s.add_argument("--eps-dev", type=float)
    s.set_defaults(func=cmd_ingest)

    s = sub.add_parser("generate", help="write a synthetic dataset")
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--reports", type=int, required=True)
    s.add_argument("--landmarks", type=int, required=True)
    s.add_argument("--size", type=float, required=True, help="domain side in km")
    s.add_argument("--out", required=True)
    s.add_argument("--delta", type=float, default=8.0)
    s.add_argument("--duplicate-rate", type=float, default=0.0)
    s.add_argument("--choice-rate", type=float, default=0.0)
    s.set_defaults(func=cmd_generate)

    q = sub.add_parser("query", help="probabilistic location queries")
    qsub = q.add_subparsers(dest="query_cmd", required=True, parser_class=Parser)
    for name, func in (("range", cmd_query_range), ("sim", cmd_query_sim)):
        s = qsub.add_parser(name)
        s.add_argument("--store", required=True)
        if name == "range":
            s.add_argument("--rect", required=True, help="x1,y1,x2,y2")
        else:
            s.add_argument("--id")
            s.add_argument("--sexpr")
        grp = s.add_mutually_exclusive_group()
        grp.add_argument("--tau", type=float)
        grp.add_argument("--topk", type=int)
        s.set_defaults(func=func)

    s = sub.add_parser("disambiguate", help="resolve choice nodes")
    s.add_argument("--store", required=True)
    s.add_argument("--model", choices=("walk", "vn", "exp"), required=True)
    s.add_argument("--lambda", dest="lam", type=float, default=0.1)
    s.add_argument("--max-len", type=int, default=5)
    s.add_argument("--cz", type=float, default=0.01)
    s.add_argument("--tol", type=float, default=1e-4)
    s.add_argument("--max-iters", type=int, default=100)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_disambiguate)

    s = sub.add_parser("consolidate", help="group entity descriptions")
    s.add_argument("--store", required=True)
    s.add_argument("--alpha", type=float, required=True)
    s.add_argument("--theta", type=float, required=True)
    s.add_argument("--gamma", type=float, default=0.05)
    s.add_argument("--model", choices=("walk", "vn", "exp"), default="walk")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_consolidate)

    gp = sub.add_parser("graph", help="graph analytics")
    gsub = gp.add_subparsers(dest="graph_cmd", required=True, parser_class=Parser)
    s = gsub.add_parser("centrality")
    s.add_argument("--store", required=True)
    s.add_argument("--measure", choices=("degree", "betweenness"), required=True)
    s = gsub.add_parser("connectivity")
    s.add_argument("--store", required=True)
    s.add_argument("--from", dest="src", required=True)
    s.add_argument("--to", dest="dst", required=True)
    for name in ("select", "group"):
        s = gsub.add_parser(name)
        s.add_argument("--store", required=True)
        s.add_argument("--kind")
        s.add_argument("--type")
        s.add_argument("--attr", action="append", help="KEY=VALUE (repeatable)")
        s.add_argument("--range", action="append", help="KEY:LO:HI (repeatable)")
        if name == "group":
            s.add_argument("--key", required=True)
            s.add_argument("--agg")
            s.add_argument("--op", choices=("count", "sum", "avg"), default="count")
            s.add_argument("--rollup", action="store_true")
    gp.set_defaults(func=cmd_graph)

    s = sub.add_parser("assoc", help="semantic association through the ontology")
    s.add_argument("--store", required=True)
    s.add_argument("--from", dest="src", required=True)
    s.add_argument("--to", dest="dst", required=True)
    s.add_argument("--max-len", type=int, required=True)
    s.set_defaults(func=cmd_assoc)
    return p


def main(argv=None) -> int:
    level = os.environ.get("EMS_LOG", "warn").lower()
    logging.basicConfig(level=LOG_LEVELS.get(level, logging.WARNING), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s", force=True)
    try:
        args = build_parser().parse_args(argv)
        result = args.func(args)
    except UsageError as exc:
        sys.stderr.write(f"{exc}\n")
        return 1
    except EMSError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2
    except OSError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2
    _emit(result)
    return 0


if __name__ == "__main__":
    sys.exit(main())
