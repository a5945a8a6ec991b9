"""Persistent store: ingest of landmark/report/ontology files and reload.

Layout of a store directory::

    manifest.json       format version, domain, parameters, counts, checksums
    graph.json          the EventWeb
    landmarks.json      the landmark map used for synthesis
    ontology.json       optional domain ontology
    histograms/*.emsh   one location pdf per located event
"""
from __future__ import annotations

import hashlib
import json
import logging
import os
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional

from .analytics import Ontology
from .disambig.fbs import string_similarity
from .errors import DataError, EMSError, StoreError
from .index.histio import read_histogram, write_histogram
from .model import ChoiceNode, Entity, Event, EventWeb, Report, TemporalMilieu
from .query import LocationStore
from .sexpr import LandmarkResolver, map_template, parse
from .synth import DomainSpec, Landmark, LandmarkMap, SynthParams, Synthesizer

log = logging.getLogger(__name__)

FORMAT_VERSION = 1
MAX_FAILURE_RATE = 0.5
NAME_MATCH = 0.7
ROLES = ("agentive", "influencing", "mediating", "participant")


def dump_json(obj, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, sort_keys=True, indent=1, ensure_ascii=False)
        fh.write("\n")


def _read_json(path, what):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise StoreError(f"cannot read {what} file {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise DataError(f"{what} file {path}: invalid JSON ({exc})") from None


def load_landmarks(path, delta: Optional[float] = None):
    """``(DomainSpec, LandmarkMap)`` from a landmark map file."""
    d = _read_json(path, "landmark")
    try:
        dom = dict(d["domain"])
        if delta is not None:
            dom["delta"] = delta
        domain = DomainSpec(**dom)
        lms = LandmarkMap(Landmark.from_dict(x) for x in d.get("landmarks", []))
    except (KeyError, TypeError) as exc:
        raise DataError(f"landmark file {path}: malformed ({exc})") from None
    return domain, lms


def parse_time(text) -> float:
    if isinstance(text, (int, float)):
        return float(text)
    s = str(text).strip()
    if s.endswith("Z"):
        s = s[:-1] + "+00:00"
    try:
        t = datetime.fromisoformat(s)
    except ValueError:
        raise DataError(f"bad ISO-8601 time {text!r}") from None
    if t.tzinfo is None:
        t = t.replace(tzinfo=timezone.utc)
    return t.timestamp()


def read_reports(path):
    """``[(line number, record or exception)]`` from a JSON Lines file."""
    try:
        fh = open(path, encoding="utf-8")
    except OSError as exc:
        raise StoreError(f"cannot read reports file {path}: {exc.strerror}") from None
    out = []
    with fh:
        for no, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                if not isinstance(rec, dict):
                    raise DataError("record is not a JSON object")
                out.append((no, rec))
            except (json.JSONDecodeError, DataError) as exc:
                out.append((no, DataError(f"line {no}: {exc}")))
    return out


def _name(entity):
    return str(entity.attrs.get("name", entity.id))


def match_candidates(g: EventWeb, ref: str, threshold=NAME_MATCH) -> list:
    """Entities whose name is within ``threshold`` edit similarity of ``ref``."""
    key = ref.casefold()
    return [e.id for e in g.iter_nodes("entity")
            if string_similarity(key, _name(e).casefold()) >= threshold]


@dataclass
class _Plan:
    """Everything one report contributes, validated before the graph is
    touched so that a failing record leaves no trace."""
    rid: str
    report: Report
    event: Event
    tmil: TemporalMilieu
    pdf: object
    sexpr: Optional[str]
    entities: list = field(default_factory=list)
    links: list = field(default_factory=list)


def _plan_record(rec, synth, resolver, g, declared):
    rid = rec.get("id")
    if not isinstance(rid, str) or not rid:
        raise DataError("record needs a non-empty string id")
    if rid in g.nodes:
        raise DataError(f"duplicate report id {rid!r}")
    ts = parse_time(rec.get("time", 0))
    report = Report(rid, ts, rec.get("modality", "text"), rec.get("raw", ""),
                    dict(rec.get("report_attrs", {})))
    event = Event(f"{rid}#event", rec.get("event_type", ""), attrs=dict(rec.get("attrs", {})))
    tmil = TemporalMilieu.point(f"{rid}#time", ts)
    pdf = sexpr = None
    if rec.get("location_sexpr"):
        expr = parse(rec["location_sexpr"])
    elif rec.get("location_text"):
        expr = map_template(rec["location_text"], resolver)
    else:
        expr = None
    if expr is not None:
        pdf = synth(expr)
        sexpr = expr.render()
        event.attrs["sexpr"] = sexpr
    plan = _Plan(rid, report, event, tmil, pdf, sexpr)
    for k, item in enumerate(rec.get("entities", [])):
        role = item.get("role", "participant")
        if role not in ROLES:
            raise DataError(f"unknown entity role {role!r}")
        if "id" in item:
            if not isinstance(g.nodes.get(item["id"]), Entity):
                raise DataError(f"entity id {item['id']!r} clashes with a non-entity node")
            plan.entities.append(("id", item["id"], role, item))
        elif "ref" in item:
            plan.entities.append(("ref", str(item["ref"]), role, item))
        else:
            raise DataError(f"entity {k} needs an id or a ref")
        for rel in item.get("relations", []):
            if "to" not in rel or not rel.get("label"):
                raise DataError("entity relation needs 'to' and 'label'")
    for link in rec.get("links", []):
        if link.get("label") not in ("causes", "hinders", "composed-of"):
            raise DataError(f"bad event link label {link.get('label')!r}")
        plan.links.append((link["to"], link["label"]))
    return plan


def _apply_plan(g: EventWeb, plan: _Plan, declared: dict, hist_name: Optional[str]):
    g.add_node(plan.report)
    if hist_name is not None:
        plan.event.location_pdf = hist_name
    plan.event.milieu_time = plan.tmil.id
    g.add_node(plan.event)
    g.add_node(plan.tmil)
    eid = plan.event.id
    g.link(eid, plan.report.id, "event_report", "reported-in")
    g.link(eid, plan.tmil.id, "event_milieu", "at-time")
    for k, (how, key, role, item) in enumerate(plan.entities):
        if how == "id":
            _link_once(g, eid, key, role)
            continue
        if key in g.nodes and isinstance(g.nodes[key], Entity):
            _link_once(g, eid, key, role)
            continue
        cands = match_candidates(g, key)
        if not cands:
            new_id = f"{plan.rid}#ent{k}"
            attrs = {"name": key, **item.get("attrs", {})}
            g.add_node(Entity(new_id, item.get("type", "entity"), attrs))
            _link_once(g, eid, new_id, role)
            continue
        g.add_choice_node(ChoiceNode(f"{plan.rid}#choice{k}", eid, cands, role=role,
                                     description=key, attrs=dict(item.get("attrs", {}))))


def _link_once(g, src, dst, label):
    if (src, dst, label) not in g._triples:
        g.link(src, dst, "event_entity", label)


def _entity_relations(g, plans):
    for plan in plans:
        for how, key, _, item in plan.entities:
            if how != "id":
                continue
            for rel in item.get("relations", []):
                if rel["to"] not in g.nodes:
                    log.warning("relation %s -> %s: unknown entity, skipped", key, rel["to"])
                    continue
                if (key, rel["to"], rel["label"]) not in g._triples:
                    g.link(key, rel["to"], "entity_entity", rel["label"])
    for plan in plans:
        for to, label in plan.links:
            dst = f"{to}#event"
            if dst not in g.nodes:
                log.warning("event link %s -> %s: unknown report, skipped", plan.rid, to)
                continue
            g.link(plan.event.id, dst, "event_event", label)


def sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def ingest(landmarks_path, reports_path, out_dir, ontology_path=None,
           delta: Optional[float] = None, eps_mass: float = 0.0, eps_dev: float = 0.0,
           params: SynthParams = SynthParams(), dir_cell: Optional[float] = None) -> dict:
    """Build a store directory; returns the manifest."""
    if eps_mass < 0 or eps_dev < 0:
        raise DataError("compression tolerances must be >= 0")
    domain, landmarks = load_landmarks(landmarks_path, delta)
    ontology = Ontology.from_dict(_read_json(ontology_path, "ontology")) if ontology_path else None
    records = read_reports(reports_path)
    synth = Synthesizer(landmarks, domain, params)
    resolver = LandmarkResolver.from_landmarks(landmarks.values())

    # first pass: entities declared anywhere may be referenced anywhere
    declared = {}
    for _, rec in records:
        if isinstance(rec, dict):
            for item in rec.get("entities", []) if isinstance(rec.get("entities"), list) else []:
                if isinstance(item, dict) and "id" in item:
                    declared.setdefault(item["id"], item)

    g = EventWeb()
    for key in sorted(declared):
        item = declared[key]
        try:
            g.add_node(Entity(str(key), item.get("type", "entity"), dict(item.get("attrs", {}))))
        except EMSError as exc:
            log.warning("entity %r not declared: %s", key, exc)
    failures, plans, pdfs = [], [], {}
    for no, rec in records:
        try:
            if isinstance(rec, Exception):
                raise rec
            plan = _plan_record(rec, synth, resolver, g, declared)
            hist = None
            if plan.pdf is not None:
                hist = f"histograms/h{len(pdfs):06d}.emsh"
            _apply_plan(g, plan, declared, hist)
        except (EMSError, KeyError, TypeError, ValueError, AttributeError) as exc:
            msg = str(exc) if isinstance(exc, EMSError) else f"{type(exc).__name__}: {exc}"
            log.warning("record at line %d skipped: %s", no, msg)
            failures.append({"line": no, "error": msg})
            continue
        plans.append(plan)
        if hist is not None:
            pdfs[hist] = plan.pdf
    if records and len(failures) > MAX_FAILURE_RATE * len(records):
        raise DataError(f"{len(failures)} of {len(records)} records failed; aborting ingest")
    _entity_relations(g, plans)

    out = Path(out_dir)
    (out / "histograms").mkdir(parents=True, exist_ok=True)
    for old in (out / "histograms").glob("*.emsh"):
        old.unlink()
    for name, pdf in pdfs.items():
        write_histogram(out / name, pdf)
    dump_json(g.to_dict(), out / "graph.json")
    dump_json({"domain": domain.to_dict(),
               "landmarks": [landmarks[k].to_dict() for k in sorted(landmarks)]},
              out / "landmarks.json")
    files = ["graph.json", "landmarks.json", *sorted(pdfs)]
    if ontology is not None:
        dump_json(ontology.to_dict(), out / "ontology.json")
        files.append("ontology.json")
    elif (out / "ontology.json").exists():
        os.remove(out / "ontology.json")

    counts = {kind: sum(1 for _ in g.iter_nodes(kind))
              for kind in ("report", "event", "entity", "temporal_milieu", "spatial_milieu")}
    counts.update(edges=g.edge_count, choice_nodes=len(g.choice_nodes), histograms=len(pdfs))
    manifest = {
        "format_version": FORMAT_VERSION,
        "domain": domain.to_dict(),
        "synth_params": params.to_dict(),
        "dir_cell": dir_cell if dir_cell is not None else 16 * domain.delta,
        "compression": {"eps_mass": eps_mass, "eps_dev": eps_dev},
        "counts": counts,
        "records": len(records),
        "failures": len(failures),
        "failed_records": failures,
        "files": {f: sha256(out / f) for f in sorted(files)},
    }
    dump_json(manifest, out / "manifest.json")
    log.info("ingested %d of %d records into %s", len(plans), len(records), out)
    return manifest


class Store:
    """A loaded store directory."""

    def __init__(self, path, verify: bool = True):
        self.path = Path(path)
        mpath = self.path / "manifest.json"
        if not mpath.exists():
            raise StoreError(f"{self.path} is not a store (no manifest.json)")
        self.manifest = _read_json(mpath, "manifest")
        version = self.manifest.get("format_version")
        if version != FORMAT_VERSION:
            raise StoreError(f"unsupported store format version {version!r}")
        if verify:
            for name, digest in self.manifest["files"].items():
                f = self.path / name
                if not f.exists():
                    raise StoreError(f"store file {name} is missing")
                if sha256(f) != digest:
                    raise StoreError(f"checksum mismatch for {name}")
        self.domain = DomainSpec(**self.manifest["domain"])
        self.params = SynthParams.from_dict(self.manifest["synth_params"])
        self.graph = EventWeb.from_dict(_read_json(self.path / "graph.json", "graph"))
        lm = _read_json(self.path / "landmarks.json", "landmark")
        self.landmarks = LandmarkMap(Landmark.from_dict(x) for x in lm["landmarks"])
        opath = self.path / "ontology.json"
        self.ontology = Ontology.from_dict(_read_json(opath, "ontology")) if opath.exists() else None
        self._locations = None

    def pdfs(self) -> dict:
        """Event id -> GridPdf for every located event."""
        out = {}
        for ev in self.graph.iter_nodes("event"):
            if ev.location_pdf:
                out[ev.id] = read_histogram(self.path / ev.location_pdf, self.domain)
        return out

    def locations(self) -> LocationStore:
        if self._locations is None:
            comp = self.manifest["compression"]
            self._locations = LocationStore.build(
                sorted(self.pdfs().items()), self.domain, comp["eps_mass"], comp["eps_dev"],
                self.manifest["dir_cell"])
        return self._locations

    def synthesizer(self) -> Synthesizer:
        return Synthesizer(self.landmarks, self.domain, self.params)


def load_store(path, verify: bool = True) -> Store:
    return Store(path, verify)
