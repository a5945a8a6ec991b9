import json
import os
import shutil
import subprocess
import sys

import numpy as np
import pytest

from ems.cli import main
from ems.errors import DataError, StoreError
from ems.generate import SyntheticScenario, generate, generate_records
from ems.sexpr import parse
from ems.store import ingest, load_store

OC_SIM = "within(NI5) & between(SandCanyon, AltonPkwy)"


def run_cli(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture(scope="module")
def oc_store(tmp_path_factory, request):
    from conftest import DATA
    out = tmp_path_factory.mktemp("oc") / "store"
    ingest(DATA / "oc_landmarks.json", DATA / "oc_reports.jsonl", out,
           ontology_path=DATA / "ontology.json")
    return out


def test_oc_store_contents(oc_store):
    store = load_store(oc_store)
    m = store.manifest
    assert m["counts"]["event"] == 2 and m["counts"]["histograms"] == 2
    assert m["failures"] == 0
    assert sorted(os.listdir(oc_store / "histograms")) == ["h000000.emsh", "h000001.emsh"]
    for name in ("manifest.json", "graph.json", "ontology.json"):
        assert (oc_store / name).exists()
    assert store.graph.nodes["R1#event"].attrs["sexpr"] == (
        "within(NI5) & between(SandCanyon, AltonPkwy)")


def test_oc_similarity_matches_cell_min(oc_store):
    store = load_store(oc_store)
    pdfs = store.pdfs()
    a, b = pdfs["R1#event"].to_dense(), pdfs["R2#event"].to_dense()
    oracle = float(np.minimum(a, b).sum())
    sim = store.locations().similarity("R1#event", "R2#event")
    assert oracle > 0
    assert sim == pytest.approx(oracle, abs=1e-12)
    # the two road segments share support only around the N-I5 / Rt133 crossing
    overlap = (a > 0) & (b > 0)
    i, j = np.nonzero(overlap)
    d = store.domain
    x, y = d.centers(i, j)
    assert np.all(np.abs(x - 2000) <= 20) and np.all(np.abs(y - 2000) <= 20)


def test_oc_navigation_and_assoc(oc_store, capsys):
    from ems.analytics import navigate
    g = load_store(oc_store).graph
    assert navigate(g, ["R2#event"], ["agentive", "colleague"]) == ["victim1"]
    code, out, _ = run_cli(capsys, "assoc", "--store", oc_store, "--from", "R1#event",
                           "--to", "R2#event", "--max-len", 4)
    assert code == 0
    paths = json.loads(out)
    assert paths[0]["path"] == (
        "OVERTURNED VEHICLES which-can-be OVERTURNED-CHEMICAL-TRUCKS which-can-cause "
        "CHEMICAL-DISPERSIONS which-can-create FOUL SMELLs")
    code, out, _ = run_cli(capsys, "assoc", "--store", oc_store, "--from", "R1#event",
                           "--to", "R2#event", "--max-len", 2)
    assert code == 0 and json.loads(out) == []


def test_empty_reports(tmp_path, data_dir):
    empty = tmp_path / "empty.jsonl"
    empty.write_text("")
    m = ingest(data_dir / "oc_landmarks.json", empty, tmp_path / "s")
    assert m["records"] == 0 and m["counts"]["event"] == 0
    store = load_store(tmp_path / "s")
    assert len(store.locations()) == 0
    assert store.locations().range_query((0, 0, 100, 100), 0.5) == []


def write_reports(path, records):
    path.write_text("".join(json.dumps(r) + "\n" for r in records))


def test_bad_record_skipped(tmp_path, data_dir):
    recs = [
        {"id": "a", "time": "2005-05-01T10:00:00Z", "event_type": "X",
         "location_sexpr": "near(FireStation)"},
        {"id": "b", "time": "2005-05-01T10:00:00Z", "event_type": "X",
         "location_sexpr": "near(FireStation, NI5)"},
        {"id": "c", "time": "2005-05-01T10:00:00Z", "event_type": "X",
         "location_sexpr": "within(I405)"},
    ]
    write_reports(tmp_path / "r.jsonl", recs)
    m = ingest(data_dir / "oc_landmarks.json", tmp_path / "r.jsonl", tmp_path / "s")
    assert m["failures"] == 1 and m["failed_records"][0]["line"] == 2
    g = load_store(tmp_path / "s").graph
    assert "b" not in g.nodes and "b#event" not in g.nodes
    assert m["counts"]["histograms"] == 2


def test_too_many_failures(tmp_path, data_dir):
    recs = [{"id": f"r{k}", "event_type": "X", "location_sexpr": "near(Nowhere)"}
            for k in range(3)] + [{"id": "ok", "event_type": "X"}]
    write_reports(tmp_path / "r.jsonl", recs)
    with pytest.raises(DataError):
        ingest(data_dir / "oc_landmarks.json", tmp_path / "r.jsonl", tmp_path / "s")


def test_entity_refs_create_choice_nodes(tmp_path, data_dir):
    recs = [
        {"id": "a", "event_type": "X", "entities": [
            {"id": "js1", "attrs": {"name": "John Smith"}, "role": "agentive"},
            {"id": "js2", "attrs": {"name": "Jon Smith"}, "role": "participant"}]},
        {"id": "b", "event_type": "X", "entities": [
            {"ref": "John Smith"}, {"ref": "js1", "role": "agentive"},
            {"ref": "Zed Quux"}]},
    ]
    write_reports(tmp_path / "r.jsonl", recs)
    ingest(data_dir / "oc_landmarks.json", tmp_path / "r.jsonl", tmp_path / "s")
    g = load_store(tmp_path / "s").graph
    cn = g.choice_nodes["b#choice0"]
    assert cn.owner == "b#event" and cn.candidates == ["js1", "js2"] and cn.has_z
    assert g.neighbors("b#event", "agentive") == ["js1"]
    assert g.nodes["b#ent2"].attrs["name"] == "Zed Quux"


def test_checksum_and_version(tmp_path, oc_store):
    copy = tmp_path / "copy"
    shutil.copytree(oc_store, copy)
    with open(copy / "histograms" / "h000000.emsh", "ab") as fh:
        fh.write(b"\0")
    with pytest.raises(StoreError):
        load_store(copy)
    with pytest.raises(StoreError):
        load_store(tmp_path / "missing")
    m = json.loads((oc_store / "manifest.json").read_text())
    m["format_version"] = 99
    shutil.rmtree(copy)
    shutil.copytree(oc_store, copy)
    (copy / "manifest.json").write_text(json.dumps(m))
    with pytest.raises(StoreError):
        load_store(copy)


def test_generate_deterministic(tmp_path):
    sc = SyntheticScenario(seed=42, n_reports=50, n_landmarks=12, size_km=1.0)
    a, b = generate(sc, tmp_path / "a"), generate(sc, tmp_path / "b")
    for key in a:
        with open(a[key], "rb") as fa, open(b[key], "rb") as fb:
            assert fa.read() == fb.read()
    other = generate(SyntheticScenario(seed=43, n_reports=50, n_landmarks=12, size_km=1.0),
                     tmp_path / "c")
    assert open(other["reports"], "rb").read() != open(a["reports"], "rb").read()


def test_no_duplicates_means_singletons():
    _, recs, truth = generate_records(SyntheticScenario(n_reports=40, n_landmarks=10))
    assert all(len(grp) == 1 for grp in truth["duplicate_groups"])
    assert len(truth["duplicate_groups"]) == 40


def test_paper_scale_store(tmp_path):
    paths = generate(SyntheticScenario(seed=7), tmp_path / "gen")
    m = ingest(paths["landmarks"], paths["reports"], tmp_path / "s")
    assert m["counts"]["histograms"] == 164
    store = load_store(tmp_path / "s")
    assert store.domain.n == 512
    assert len(store.locations()) == 164


def test_round_trip_bit_identical(tmp_path):
    sc = SyntheticScenario(seed=5, n_reports=60, n_landmarks=15, size_km=1.5,
                           choice_rate=0.3, duplicate_rate=0.2)
    paths = generate(sc, tmp_path / "gen")
    ingest(paths["landmarks"], paths["reports"], tmp_path / "s1")
    store = load_store(tmp_path / "s1")
    # graph reload preserves every node and edge
    g2 = type(store.graph).from_dict(json.loads((tmp_path / "s1" / "graph.json").read_text()))
    assert g2.signature() == store.graph.signature()
    assert g2.to_dict() == store.graph.to_dict()
    # histograms equal a fresh synthesis byte for byte
    syn = store.synthesizer()
    truth = json.loads(open(paths["truth"]).read())
    for eid, pdf in store.pdfs().items():
        fresh = syn(parse(truth["sexpr"][eid.split("#")[0]]))
        assert np.array_equal(fresh.idx, pdf.idx)
        assert fresh.mass.tobytes() == pdf.mass.tobytes()
    # a second ingest writes the same bytes
    ingest(paths["landmarks"], paths["reports"], tmp_path / "s2")
    for name in store.manifest["files"]:
        assert (tmp_path / "s1" / name).read_bytes() == (tmp_path / "s2" / name).read_bytes()
    assert (tmp_path / "s1" / "manifest.json").read_bytes() == (
        tmp_path / "s2" / "manifest.json").read_bytes()


# ------------------------------------------------------------------- CLI

def test_cli_exit_codes(capsys, tmp_path, oc_store):
    code, _, err = run_cli(capsys, "query", "range", "--store", oc_store)
    assert code == 1 and "error" in err
    code, _, _ = run_cli(capsys, "frobnicate")
    assert code == 1
    code, _, _ = run_cli(capsys, "query", "range", "--store", oc_store, "--rect", "1,2,3")
    assert code == 1
    code, _, _ = run_cli(capsys, "query", "range", "--store", oc_store, "--rect", "0,0,1,1")
    assert code == 1
    code, _, err = run_cli(capsys, "query", "range", "--store", tmp_path / "nostore",
                           "--rect", "0,0,1,1", "--tau", "0.5")
    assert code == 2 and "error" in err
    code, _, _ = run_cli(capsys, "query", "range", "--store", oc_store,
                         "--rect", "0,0,1,1", "--tau", "1.5")
    assert code == 2
    code, _, _ = run_cli(capsys, "disambiguate", "--store", oc_store, "--model", "walk",
                         "--out", tmp_path / "d.json")
    assert code == 2  # no choice nodes
    code, _, _ = run_cli(capsys, "ingest", "--landmarks", tmp_path / "none.json",
                         "--reports", tmp_path / "none.jsonl", "--out", tmp_path / "x")
    assert code == 2


def test_cli_queries(capsys, oc_store):
    code, out, _ = run_cli(capsys, "query", "range", "--store", oc_store,
                           "--rect", "1900,1900,2100,2100", "--topk", 5)
    assert code == 0
    res = json.loads(out)
    assert [r["id"] for r in res] == sorted(r["id"] for r in res) or len(res) <= 2
    assert {r["id"] for r in res} <= {"R1#event", "R2#event"}
    code, out, _ = run_cli(capsys, "query", "sim", "--store", oc_store, "--id", "R1#event",
                           "--topk", 3)
    assert code == 0 and json.loads(out)[0]["id"] == "R2#event"
    code, out, _ = run_cli(capsys, "query", "sim", "--store", oc_store, "--sexpr", OC_SIM,
                           "--tau", 0.99)
    assert code == 0 and [r["id"] for r in json.loads(out)] == ["R1#event"]


def test_cli_graph(capsys, oc_store):
    code, out, _ = run_cli(capsys, "graph", "centrality", "--store", oc_store,
                           "--measure", "degree")
    assert code == 0 and json.loads(out)["R2#event"] == 4
    code, out, _ = run_cli(capsys, "graph", "connectivity", "--store", oc_store,
                           "--from", "R2#event", "--to", "victim1")
    # direct participant edge plus the caller2 colleague path
    assert code == 0 and json.loads(out)["connectivity"] == 2
    code, out, _ = run_cli(capsys, "graph", "select", "--store", oc_store, "--kind", "event",
                           "--range", "severity:3:")
    assert code == 0 and json.loads(out) == ["R1#event"]
    code, out, _ = run_cli(capsys, "graph", "group", "--store", oc_store, "--kind", "event",
                           "--key", "event_type", "--agg", "severity", "--op", "sum")
    assert code == 0
    assert [(x["key"], x["value"]) for x in json.loads(out)] == [
        ("FOUL_SMELL", 2.0), ("VEHICLE_OVERTURN", 4.0)]


def cli_outputs(tmp_path, tag):
    """Run every command once and collect stdout plus written files."""
    base = tmp_path / tag
    outs = {}

    def call(*argv):
        proc = subprocess.run([sys.executable, "-m", "ems.cli", *map(str, argv)],
                              capture_output=True, env={**os.environ, "EMS_LOG": "error"})
        assert proc.returncode == 0, proc.stderr.decode()
        outs[" ".join(map(str, argv[:2]))] = proc.stdout.replace(str(base).encode(), b"BASE")

    call("generate", "--seed", 9, "--reports", 40, "--landmarks", 10, "--size", 1,
         "--out", base / "gen", "--choice-rate", 0.5, "--duplicate-rate", 0.2)
    call("ingest", "--landmarks", base / "gen" / "landmarks.json",
         "--reports", base / "gen" / "reports.jsonl", "--out", base / "s",
         "--eps-mass", 1e-5, "--eps-dev", 1e-5)
    s = base / "s"
    call("query", "range", "--store", s, "--rect", "0,0,500,500", "--tau", 0.1)
    call("query", "sim", "--store", s, "--id", "R00001#event", "--topk", 5)
    call("disambiguate", "--store", s, "--model", "walk", "--out", base / "d.json")
    call("consolidate", "--store", s, "--alpha", 0.5, "--theta", 0.7, "--out", base / "c.json")
    call("graph", "centrality", "--store", s, "--measure", "betweenness")
    call("graph", "group", "--store", s, "--kind", "event", "--key", "event_type")
    for f in sorted(base.rglob("*")):
        if f.is_file():
            outs[str(f.relative_to(base))] = f.read_bytes()
    return outs


def test_cli_byte_stable(tmp_path):
    a, b = cli_outputs(tmp_path, "one"), cli_outputs(tmp_path, "two")
    assert a.keys() == b.keys()
    for key in a:
        assert a[key] == b[key], key


def test_ems_log(tmp_path, oc_store):
    env = {**os.environ, "EMS_LOG": "debug"}
    proc = subprocess.run([sys.executable, "-m", "ems.cli", "ingest",
                           "--landmarks", str(oc_store / "landmarks.json"),
                           "--reports", str(oc_store.parent / "missing.jsonl"),
                           "--out", str(tmp_path / "s")], capture_output=True, env=env)
    assert proc.returncode == 2
    env["EMS_LOG"] = "info"
    from conftest import DATA
    proc = subprocess.run([sys.executable, "-m", "ems.cli", "ingest",
                           "--landmarks", str(DATA / "oc_landmarks.json"),
                           "--reports", str(DATA / "oc_reports.jsonl"),
                           "--out", str(tmp_path / "s")], capture_output=True, env=env)
    assert proc.returncode == 0 and b"INFO" in proc.stderr
    env["EMS_LOG"] = "error"
    proc = subprocess.run([sys.executable, "-m", "ems.cli", "ingest",
                           "--landmarks", str(DATA / "oc_landmarks.json"),
                           "--reports", str(DATA / "oc_reports.jsonl"),
                           "--out", str(tmp_path / "s")], capture_output=True, env=env)
    assert proc.returncode == 0 and proc.stderr == b""
