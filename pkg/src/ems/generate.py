"""Seeded synthetic data: landmark maps with report streams, and planted
scenarios for reference disambiguation and duplicate consolidation.

Identical seeds give bit-identical output.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .disambig.fbs import AttrSpec
from .errors import DataError
from .model import ChoiceNode, Entity, Event, EventWeb

EVENT_TYPES = ("VEHICLE_OVERTURN", "FOUL_SMELL", "FIRE", "ROAD_BLOCK", "INJURY", "GAS_LEAK")
FIRST = ("John", "Jane", "Maria", "Wei", "Omar", "Lena", "Ravi", "Sofia", "Tom", "Aiko",
         "Pedro", "Nina", "Igor", "Fatima", "Kofi", "Elena")
LAST = ("Smith", "Garcia", "Chen", "Haddad", "Novak", "Patel", "Rossi", "Tanaka",
        "Okafor", "Kowalski", "Silva", "Berg")
CITIES = ("Irvine", "Tustin", "Anaheim", "Orange")
BASE_TIME = 1114941600  # 2005-05-01T10:00:00Z


def _r(x, nd=3):
    return round(float(x), nd)


def _iso(t):
    import datetime as dt
    return dt.datetime.fromtimestamp(int(t), dt.timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def _dumps(obj):
    return json.dumps(obj, sort_keys=True, ensure_ascii=False)


@dataclass(frozen=True)
class SyntheticScenario:
    seed: int = 42
    size_km: float = 4.0
    n_landmarks: int = 40
    n_reports: int = 164
    delta: float = 8.0
    # relative frequencies of the s-expression shapes
    mix: tuple = (("near", 4.0), ("between", 3.0), ("withindist", 1.0),
                  ("directional", 1.0), ("near_outdoor", 1.0))
    duplicate_rate: float = 0.0
    choice_rate: float = 0.0

    def __post_init__(self):
        if self.size_km <= 0 or self.delta <= 0:
            raise DataError("size and delta must be positive")
        if self.n_landmarks < 2:
            raise DataError("need at least two landmarks")
        if self.n_reports < 0:
            raise DataError("report count must be >= 0")
        for r in (self.duplicate_rate, self.choice_rate):
            if not 0 <= r <= 1:
                raise DataError("rates must lie in [0, 1]")
        kinds = {k for k, _ in self.mix}
        if not kinds <= {"near", "between", "withindist", "directional", "near_outdoor"}:
            raise DataError(f"unknown s-expression shapes in mix: {sorted(kinds)}")


def _landmarks(sc: SyntheticScenario, rng):
    size = sc.size_km * 1000.0
    k = math.ceil(math.sqrt(sc.n_landmarks))
    spacing = size / k
    slots = rng.permutation(k * k)[:sc.n_landmarks]
    out = []
    dirs = ((0, 1), (1, 0), (0, -1), (-1, 0))
    for n, slot in enumerate(sorted(slots)):
        gx, gy = divmod(int(slot), k)
        w = rng.uniform(0.05, 0.15) * spacing
        h = rng.uniform(0.05, 0.15) * spacing
        cx = (gx + 0.5) * spacing + rng.uniform(-0.15, 0.15) * spacing
        cy = (gy + 0.5) * spacing + rng.uniform(-0.15, 0.15) * spacing
        poly = [[_r(cx - w / 2), _r(cy - h / 2)], [_r(cx + w / 2), _r(cy - h / 2)],
                [_r(cx + w / 2), _r(cy + h / 2)], [_r(cx - w / 2), _r(cy + h / 2)]]
        out.append({
            "id": f"L{n:03d}", "name": f"Building {n}", "kind": "building",
            "polygon": poly, "height": _r(rng.uniform(5, 40), 1),
            "orientation": list(dirs[int(rng.integers(4))]),
        })
    return out


def _center(lm):
    p = np.asarray(lm["polygon"])
    return p.mean(axis=0)


def _halfsize(lm):
    p = np.asarray(lm["polygon"])
    return (p.max(axis=0) - p.min(axis=0)) / 2


def _neighbors(lms):
    """For each landmark, the nearest other landmark."""
    cs = np.array([_center(lm) for lm in lms])
    d = np.hypot(cs[:, None, 0] - cs[None, :, 0], cs[:, None, 1] - cs[None, :, 1])
    np.fill_diagonal(d, np.inf)
    return d.argmin(axis=1)


def _location(kind, lms, nbr, rng):
    """An s-expression and a point consistent with it."""
    a = int(rng.integers(len(lms)))
    lm = lms[a]
    c, half = _center(lm), _halfsize(lm)
    if kind == "between":
        b = lms[int(nbr[a])]
        cb = _center(b)
        t = rng.uniform(0.3, 0.7)
        seg = cb - c
        normal = np.array([-seg[1], seg[0]]) / (np.hypot(*seg) or 1.0)
        p = c + t * seg + normal * rng.normal(0, 0.1 * np.hypot(*seg))
        first, second = sorted((lm["id"], b["id"]))
        return f"between({first}, {second})", p
    ang = rng.uniform(0, 2 * math.pi)
    if kind == "directional":
        ox, oy = lm["orientation"]
        which = ("infrontof", "behind", "totheleftof", "totherightof")[int(rng.integers(4))]
        vec = {"infrontof": (ox, oy), "behind": (-ox, -oy),
               "totheleftof": (-oy, ox), "totherightof": (oy, -ox)}[which]
        ang = math.atan2(vec[1], vec[0]) + rng.normal(0, 0.3)
        kind_text = f"{which}({lm['id']})"
    elif kind == "withindist":
        dist = float(rng.choice([20.0, 30.0, 50.0]))
        kind_text = f"withindist({lm['id']}, {dist})"
    elif kind == "near_outdoor":
        kind_text = f"near({lm['id']}) & outdoor"
    else:
        kind_text = f"near({lm['id']})"
    reach = float(np.hypot(*half)) + abs(rng.normal(0, 15))
    p = c + reach * np.array([math.cos(ang), math.sin(ang)])
    return kind_text, p


def generate_records(sc: SyntheticScenario):
    """``(landmark map dict, report records, truth dict)``."""
    rng = np.random.default_rng(sc.seed)
    lms = _landmarks(sc, rng)
    nbr = _neighbors(lms)
    size = sc.size_km * 1000.0
    kinds = [k for k, _ in sc.mix]
    w = np.array([v for _, v in sc.mix], dtype=float)
    w = w / w.sum()

    n_people = max(6, sc.n_reports // 8)
    n_people += n_people % 2
    people = []
    for k in range(n_people):
        # consecutive pairs share a name, so name-only references are ambiguous
        first, last = FIRST[(k // 2) % len(FIRST)], LAST[(k // 2 // len(FIRST)) % len(LAST)]
        people.append({"id": f"P{k:04d}", "type": "person",
                       "attrs": {"name": f"{first} {last}"}})

    records, truth_loc, truth_sexpr, groups, answers = [], {}, {}, [], {}
    t = float(BASE_TIME)
    for n in range(sc.n_reports):
        rid = f"R{n:05d}"
        t += float(rng.integers(30, 600))
        if records and rng.random() < sc.duplicate_rate:
            # a second report on an earlier event: same type and point
            src = records[int(rng.integers(len(records)))]
            grp = next(gr for gr in groups if src["id"] in gr)
            grp.append(rid)
            etype, point, sexpr = src["event_type"], truth_loc[src["id"]], truth_sexpr[src["id"]]
        else:
            kind = kinds[int(rng.choice(len(kinds), p=w))]
            sexpr, p = _location(kind, lms, nbr, rng)
            point = [_r(min(max(p[0], 0.0), size)), _r(min(max(p[1], 0.0), size))]
            etype = EVENT_TYPES[int(rng.integers(len(EVENT_TYPES)))]
            groups.append([rid])
        reporter = people[int(rng.integers(n_people))]
        victim = people[int(rng.integers(n_people))]
        entities = [{"id": reporter["id"], "role": "agentive", "type": "person",
                     "attrs": reporter["attrs"]}]
        if rng.random() < sc.choice_rate:
            entities.append({"ref": victim["attrs"]["name"], "role": "participant",
                             "type": "person"})
            answers[rid] = victim["id"]
        else:
            entities.append({"id": victim["id"], "role": "participant", "type": "person",
                             "attrs": victim["attrs"]})
        records.append({
            "id": rid, "time": _iso(t), "event_type": etype, "location_sexpr": sexpr,
            "entities": entities, "attrs": {"severity": int(rng.integers(1, 6))},
        })
        truth_loc[rid] = point
        truth_sexpr[rid] = sexpr
    landmark_map = {"domain": {"xmin": 0.0, "ymin": 0.0, "xmax": size, "ymax": size,
                               "delta": sc.delta}, "landmarks": lms}
    truth = {"scenario": asdict(sc), "locations": truth_loc, "sexpr": truth_sexpr,
             "duplicate_groups": groups, "choice_answers": answers}
    return landmark_map, records, truth


def generate(sc: SyntheticScenario, out_dir) -> dict:
    """Write ``landmarks.json``, ``reports.jsonl`` and ``truth.json``."""
    lm, records, truth = generate_records(sc)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {"landmarks": out / "landmarks.json", "reports": out / "reports.jsonl",
             "truth": out / "truth.json"}
    paths["landmarks"].write_text(_dumps(lm) + "\n", encoding="utf-8")
    paths["reports"].write_text("".join(_dumps(r) + "\n" for r in records), encoding="utf-8")
    paths["truth"].write_text(_dumps(truth) + "\n", encoding="utf-8")
    return {k: str(v) for k, v in paths.items()}


# ------------------------------------------------------ planted scenarios

@dataclass
class ReferenceScenario:
    graph: EventWeb
    truth: dict                      # choice node id -> true candidate
    descriptions: dict = field(default_factory=dict)   # choice node id -> attrs


def reference_scenario(seed: int, n_refs: int = 200, ambiguous_rate: float = 0.2,
                       n_communities: int = 10, community_size: int = 8,
                       colleague_links: int = 2, cross_rate: float = 0.05,
                       refs_per_event: int = 3) -> ReferenceScenario:
    """Communities of people reported together in events; every person has
    a namesake in another community. Ambiguous references name a person
    only, so attributes cannot tell the namesakes apart, while the
    reference's event shares context with the true person."""
    if n_communities % 2:
        raise DataError("n_communities must be even (namesakes pair communities)")
    rng = np.random.default_rng(seed)
    g = EventWeb()
    half = n_communities // 2
    members = []
    for c in range(n_communities):
        ids = []
        for k in range(community_size):
            base = (c % half) * community_size + k
            name = f"{FIRST[base % len(FIRST)]} {LAST[(base // len(FIRST)) % len(LAST)]}"
            pid = f"p{c:02d}_{k:02d}"
            g.add_node(Entity(pid, "person", {"name": name}))
            ids.append(pid)
        members.append(ids)
        for k, pid in enumerate(ids):
            for j in rng.choice([x for x in range(community_size) if x != k],
                                size=colleague_links, replace=False):
                other = ids[int(j)]
                if (other, pid, "colleague") not in g._triples:
                    if (pid, other, "colleague") not in g._triples:
                        g.link(pid, other, "entity_entity", "colleague")

    n_events = max(1, n_refs // refs_per_event)
    refs, slots = [], []
    for e in range(n_events):
        c = int(rng.integers(n_communities))
        eid = f"ev{e:03d}"
        g.add_node(Event(eid, EVENT_TYPES[e % len(EVENT_TYPES)]))
        size = refs_per_event + (1 if e < n_refs - n_events * refs_per_event else 0)
        pick = rng.choice(community_size, size=size, replace=False)
        for n, k in enumerate(pick):
            cc = c
            if n > 0 and rng.random() < cross_rate:
                cc = int(rng.integers(n_communities))
            refs.append((eid, members[cc][int(k)]))
            # the first reference of an event stays resolved so that every
            # event keeps some context; noise references are never ambiguous
            if n > 0 and cc == c:
                slots.append(len(refs) - 1)

    n_amb = int(round(ambiguous_rate * len(refs)))
    if n_amb > len(slots):
        raise DataError("ambiguous_rate too high for the event layout")
    amb = set(rng.choice(slots, size=n_amb, replace=False).tolist())
    sc = ReferenceScenario(g, {})
    for r, (eid, pid) in enumerate(refs):
        if r not in amb:
            if (eid, pid, "participant") not in g._triples:
                g.link(eid, pid, "event_entity", "participant")
            continue
        c, k = int(pid[1:3]), int(pid[4:6])
        twin = members[(c + half) % n_communities][k]
        cid = f"cn{r:03d}"
        name = g.nodes[pid].attrs["name"]
        g.add_choice_node(ChoiceNode(cid, eid, sorted([pid, twin]), description=name,
                                     attrs={"name": name}))
        sc.truth[cid] = pid
        sc.descriptions[cid] = {"name": name}
    return sc


@dataclass
class DuplicateScenario:
    graph: EventWeb
    descriptions: list
    truth: list
    schema: dict


def _typo(name, rng):
    k = int(rng.integers(len(name)))
    op = int(rng.integers(3))
    letter = "abcdefghijklmnopqrstuvwxyz"[int(rng.integers(26))]
    if op == 0:
        return name[:k] + name[k + 1:]
    if op == 1:
        return name[:k] + letter + name[k + 1:]
    return name[:k] + letter + name[k:]


def duplicate_scenario(seed: int, n_objects: int = 20, per_object: int = 3,
                       typo_rate: float = 0.5, age_sd: float = 2.0, city_flip: float = 0.15,
                       links_per_desc: int = 2, noise_links: float = 0.2) -> DuplicateScenario:
    """``n_objects`` people each described ``per_object`` times with noisy
    attributes. Names are drawn from a small pool so different people often
    look alike; every description is linked to events of its own object."""
    rng = np.random.default_rng(seed)
    g = EventWeb()
    first, last = FIRST[:6], LAST[:4]
    objs, seen = [], set()
    while len(objs) < n_objects:
        name = f"{first[int(rng.integers(len(first)))]} {last[int(rng.integers(len(last)))]}"
        if name in seen and len(seen) < len(first) * len(last):
            continue
        seen.add(name)
        objs.append({"name": name, "age": int(rng.integers(20, 70)),
                     "city": CITIES[int(rng.integers(len(CITIES)))]})
    contexts = []
    for o in range(n_objects):
        ctx = []
        for k in range(2):
            eid = f"ctx{o:02d}_{k}"
            g.add_node(Event(eid, "MEETING"))
            ctx.append(eid)
        contexts.append(ctx)
    truth, descs = [], []
    for o, obj in enumerate(objs):
        grp = []
        for d in range(per_object):
            did = f"d{o:02d}_{d}"
            name = _typo(obj["name"], rng) if rng.random() < typo_rate else obj["name"]
            city = obj["city"]
            if rng.random() < city_flip:
                city = CITIES[int(rng.integers(len(CITIES)))]
            attrs = {"name": name, "age": int(round(obj["age"] + rng.normal(0, age_sd))),
                     "city": city}
            g.add_node(Entity(did, "person", attrs))
            for eid in rng.choice(contexts[o], size=min(links_per_desc, 2), replace=False):
                g.link(str(eid), did, "event_entity", "participant")
            if rng.random() < noise_links:
                other = int(rng.integers(n_objects))
                eid = contexts[other][int(rng.integers(2))]
                if (eid, did, "participant") not in g._triples:
                    g.link(eid, did, "event_entity", "participant")
            grp.append(did)
            descs.append(did)
        truth.append(grp)
    schema = {"name": AttrSpec("string", 1.0), "age": AttrSpec("numeric", 1.0, 50.0),
              "city": AttrSpec("enum", 1.0)}
    return DuplicateScenario(g, descs, truth, schema)
