import itertools
import logging
import math

import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ems.disambig import (
    AttrSpec,
    ChoiceNode,
    ResolveOptions,
    base_matrix,
    consolidate,
    exp_kernel,
    fbs_compare,
    fbs_similarity,
    levenshtein,
    pairwise_f1,
    path_sum_similarity,
    random_walk_cs,
    resolve_fbs,
    resolve_references,
    spectral_radius,
    von_neumann_kernel,
)
from ems.disambig.graph import RelGraph
from ems.disambig.walk import walk_strengths
from ems.errors import (
    DataError,
    DivergenceError,
    NoChoiceNodesError,
    NonSymmetricError,
    UnknownNodeError,
)
from ems.generate import duplicate_scenario, reference_scenario
from ems.model import Entity, Event, EventWeb


def people(g, *ids):
    for i in ids:
        g.add_node(Entity(i, "person", {"name": i}))


def path_abc():
    g = EventWeb()
    people(g, "a", "b", "c")
    g.link("a", "b", "entity_entity", "knows")
    g.link("b", "c", "entity_entity", "knows")
    return g


def star():
    g = EventWeb()
    g.add_node(Event("u", "X"))
    people(g, "l1", "l2", "l3", "l4")
    for leaf in ("l1", "l2", "l3", "l4"):
        g.link("u", leaf, "event_entity", "participant")
    return g


# ------------------------------------------------------------ base matrix

def test_base_matrix_triangle_and_empty():
    g = EventWeb()
    people(g, "x", "y", "z")
    bm = base_matrix(g)
    assert not bm.B.any()
    for a, b in [("x", "y"), ("y", "z"), ("x", "z")]:
        g.link(a, b, "entity_entity", "knows")
    np.testing.assert_array_equal(base_matrix(g).B, np.ones((3, 3)) - np.eye(3))


def test_base_matrix_max_rule():
    g = EventWeb()
    people(g, "x", "y")
    g.link("x", "y", "entity_entity", "colleague")
    g.link("y", "x", "entity_entity", "friend")
    bm = base_matrix(g, {"colleague": 0.5, "friend": 0.2})
    assert bm["x", "y"] == 0.5 and bm["y", "x"] == 0.5
    assert bm["x", "x"] == 0.0


def test_family_weight_lookup():
    g = EventWeb()
    g.add_node(Event("e", "X"))
    people(g, "p")
    g.link("e", "p", "event_entity", "agentive", weight=2.0)
    assert base_matrix(g, {"event_entity": 0.25})["e", "p"] == 0.5
    assert base_matrix(g, {"event_entity": 0.25, "agentive": 1.5})["e", "p"] == 3.0


# ---------------------------------------------------------------- kernels

def walk_enumeration(B, k):
    n = len(B)
    out = np.zeros_like(B)
    for x in range(n):
        for y in range(n):
            s = 0.0
            for mid in itertools.product(range(n), repeat=k - 1):
                seq = (x, *mid, y)
                s += math.prod(B[seq[t], seq[t + 1]] for t in range(k))
            out[x, y] = s
    return out


def test_path_sum_examples():
    B = base_matrix(path_abc()).B
    t2 = path_sum_similarity(B, 2)
    assert t2[0, 2] == 1.0 and t2[0, 0] == 1.0
    np.testing.assert_array_equal(path_sum_similarity(B, 1), B)
    with pytest.raises(DataError):
        path_sum_similarity(B, 0)


def random_symmetric(rng, n, density=0.6):
    A = rng.random((n, n)) * (rng.random((n, n)) < density)
    A = np.triu(A, 1)
    return A + A.T


@pytest.mark.parametrize("seed", range(5))
def test_path_sum_equals_walk_enumeration(seed):
    rng = np.random.default_rng(seed)
    B = random_symmetric(rng, int(rng.integers(2, 7)))
    for k in range(1, 5):
        np.testing.assert_allclose(path_sum_similarity(B, k), walk_enumeration(B, k),
                                   rtol=0, atol=1e-9)


def test_von_neumann_2x2():
    B = np.array([[0.0, 1.0], [1.0, 0.0]])
    np.testing.assert_allclose(von_neumann_kernel(B, 0.5), [[4 / 3, 2 / 3], [2 / 3, 4 / 3]],
                               atol=1e-12)


def test_lambda_zero_identity(rng):
    B = random_symmetric(rng, 5)
    np.testing.assert_allclose(exp_kernel(B, 0.0), np.eye(5), atol=1e-12)
    np.testing.assert_allclose(von_neumann_kernel(B, 0.0), np.eye(5), atol=1e-12)


def test_kernel_errors():
    B = np.array([[0.0, 1.0], [1.0, 0.0]])
    with pytest.raises(DivergenceError):
        von_neumann_kernel(B, 1.0)
    with pytest.raises(NonSymmetricError):
        exp_kernel(np.array([[0.0, 1.0], [0.0, 0.0]]), 0.1)


def series(B, lam, exponential):
    term = np.eye(len(B))
    total = term.copy()
    for k in range(1, 51):
        term = term @ B * lam
        if exponential:
            term = term / k
        total += term
    return total


@pytest.mark.parametrize("seed", range(10))
def test_kernels_match_series(seed):
    rng = np.random.default_rng(100 + seed)
    B = random_symmetric(rng, int(rng.integers(2, 9)))
    rho = spectral_radius(B)
    if rho == 0:
        return
    lam = rng.uniform(0.1, 0.9) / rho
    np.testing.assert_allclose(exp_kernel(B, lam), series(B, lam, True), atol=1e-6)
    # a 50-term von Neumann series needs a safety margin below rho = 1/lam
    lam_vn = min(lam, 0.7 / rho)
    np.testing.assert_allclose(von_neumann_kernel(B, lam_vn), series(B, lam_vn, False), atol=1e-6)


# ------------------------------------------------------------ random walk

def test_star_leaf():
    assert random_walk_cs(star(), "u", "l1", max_len=1) == 0.25


def test_path_half():
    assert random_walk_cs(path_abc(), "a", "c", max_len=2) == 0.5
    assert random_walk_cs(path_abc(), "a", "c", max_len=1) == 0.0


def test_disconnected_and_errors():
    g = path_abc()
    people(g, "d")
    assert random_walk_cs(g, "a", "d") == 0.0
    with pytest.raises(UnknownNodeError):
        random_walk_cs(g, "a", "zz")
    with pytest.raises(DataError):
        random_walk_cs(g, "a", "a")


def brute_walk(G, u, v, L):
    deg = {x: sum(d["weight"] for _, _, d in G.edges(x, data=True)) for x in G}
    total = 0.0
    for path in nx.all_simple_paths(G, u, v, cutoff=L):
        total += math.prod(G[path[t]][path[t + 1]]["weight"] / deg[path[t]]
                           for t in range(len(path) - 1))
    return total


@pytest.mark.parametrize("seed", range(8))
def test_walk_matches_simple_path_enumeration(seed):
    rng = np.random.default_rng(seed)
    n = 9
    B = random_symmetric(rng, n, 0.35)
    G = nx.Graph()
    G.add_nodes_from(range(n))
    adj = {x: {} for x in range(n)}
    for x in range(n):
        for y in range(x + 1, n):
            if B[x, y] > 0:
                G.add_edge(x, y, weight=B[x, y])
                adj[x][y] = adj[y][x] = B[x, y]
    deg = {x: sum(adj[x].values()) for x in range(n)}
    for L in (1, 3, 5):
        got = walk_strengths(adj, deg, 0, list(range(1, n)), L)
        for v in range(1, n):
            # v absorbs: only paths that avoid the other targets count, so
            # compare one target at a time
            single = walk_strengths(adj, deg, 0, [v], L)[v]
            assert single == pytest.approx(brute_walk(G, 0, v, L), abs=1e-12)
            assert got[v] == pytest.approx(single, abs=1e-12)


def test_choice_edges_scale_walk():
    g = path_abc()
    g.add_node(Event("e", "X"))
    g.link("e", "a", "event_entity", "participant")
    g.add_choice_node(ChoiceNode("cn", "e", ["c"], weights=[0.5, 0.5]))
    # e: base edge 1 to a, choice edge 0.5 to c, z share 0.5 -> degree 2
    assert random_walk_cs(g, "e", "c", max_len=1) == pytest.approx(0.25)
    assert random_walk_cs(g, "e", "c", max_len=1, exclude="cn") == 0.0
    assert random_walk_cs(g, "e", "c", max_len=1, weights={"cn": [1.0, 0.0]}) == pytest.approx(0.5)


# -------------------------------------------------------------- resolution

def two_candidate_graph():
    g = EventWeb()
    g.add_node(Event("u", "X"))
    people(g, "x", "v1", "v2")
    g.link("u", "x", "event_entity", "participant")
    g.link("x", "v1", "entity_entity", "knows")
    g.add_choice_node(ChoiceNode("cn", "u", ["v1", "v2"]))
    return g


def test_single_candidate_no_z():
    g = two_candidate_graph()
    g.choice_nodes.clear()
    g.add_choice_node(ChoiceNode("cn", "u", ["v2"], has_z=False))
    res = resolve_references(g)
    assert res["cn"].weights == [1.0] and res["cn"].selected == "v2"


def test_two_candidates_path_vs_disconnected():
    res = resolve_references(two_candidate_graph(), ResolveOptions(c_z=0, c0=0))
    assert res["cn"].weights == pytest.approx([1.0, 0.0, 0.0])
    assert res["cn"].selected == "v1" and not res["cn"].ambiguous
    assert res.converged


def j_smith_graph():
    """Report about an event naming 'J. Smith'; one J. Smith shares an
    earlier event with a participant of this one, the other does not."""
    g = EventWeb()
    for e in ("E1", "E2", "E3"):
        g.add_node(Event(e, "INCIDENT"))
    g.add_node(Entity("alice", "person", {"name": "Alice Wong"}))
    g.add_node(Entity("bob", "person", {"name": "Bob Ray"}))
    g.add_node(Entity("js1", "person", {"name": "J. Smith"}))
    g.add_node(Entity("js2", "person", {"name": "J. Smith"}))
    g.link("E1", "alice", "event_entity", "participant")
    g.link("E2", "alice", "event_entity", "participant")
    g.link("E2", "js1", "event_entity", "participant")
    g.link("E3", "js2", "event_entity", "participant")
    g.link("E3", "bob", "event_entity", "participant")
    g.add_choice_node(ChoiceNode("cn", "E1", ["js1", "js2"], description="J. Smith",
                                 attrs={"name": "J. Smith"}))
    return g


def test_j_smith():
    res = resolve_references(j_smith_graph())
    # E1 -> alice (1) -> E2 (1/2) -> js1 (1/2): c1 = 1/4, c2 = 0
    c1, c0, cz = 0.25, 1e-6, 0.01
    denom = (c1 + c0) + c0 + (cz + c0)
    assert res["cn"].weights == pytest.approx([(c1 + c0) / denom, c0 / denom, (cz + c0) / denom],
                                              abs=1e-12)
    assert res["cn"].selected == "js1"
    assert res.converged and res.rounds == 2
    # kernel strengths scale like lam ** hops, far below the default c_z
    for model in ("vn", "exp"):
        opts = ResolveOptions(model=model, c_z=0.0)
        assert resolve_references(j_smith_graph(), opts).selected() == {"cn": "js1"}
    assert resolve_references(j_smith_graph(), ResolveOptions(model="vn")).selected() == {
        "cn": None}
    # attributes alone cannot separate the namesakes
    assert resolve_fbs(j_smith_graph())["cn"].ambiguous


def test_z_selected_when_nothing_connects():
    g = two_candidate_graph()
    g.edges.clear()
    g = EventWeb.from_dict(g.to_dict())
    res = resolve_references(g)
    assert res["cn"].selected is None
    d = res.to_json()[0]
    assert d["selected"] is None and d["weights"][-1]["candidate"] is None


def test_no_choice_nodes():
    with pytest.raises(NoChoiceNodesError):
        resolve_references(path_abc())


def test_apply_writes_weights():
    g = j_smith_graph()
    res = resolve_references(g, apply=True)
    assert g.choice_nodes["cn"].weights == res["cn"].weights


def test_options_validation():
    with pytest.raises(DataError):
        ResolveOptions(model="nope")
    with pytest.raises(DataError):
        ResolveOptions(max_len=0)


@pytest.fixture(scope="module")
def ref_scenario():
    return reference_scenario(seed=3, n_refs=90, n_communities=6, community_size=6)


def test_weight_simplex_every_round(ref_scenario):
    res = resolve_references(ref_scenario.graph)
    assert len(res.history) == res.rounds + 1
    for snapshot in res.history:
        for w in snapshot.values():
            assert all(p >= 0 for p in w)
            assert abs(sum(w) - 1) <= 1e-9


def test_reference_scenario_accuracy(ref_scenario):
    sel = resolve_references(ref_scenario.graph).selected()
    acc = np.mean([sel[c] == t for c, t in ref_scenario.truth.items()])
    assert acc >= 0.9


def test_cap_on_planted_scenario(ref_scenario):
    g = ref_scenario.graph
    same, other = [], []
    for cid, true in ref_scenario.truth.items():
        cn = g.choice_nodes[cid]
        for v in cn.candidates:
            cs = random_walk_cs(g, cn.owner, v, exclude=cid)
            (same if v == true else other).append(cs)
    assert np.mean(same) > np.mean(other)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.1, 10))
def test_walk_argmax_scale_invariant(seed, scale):
    rng = np.random.default_rng(seed)
    g = EventWeb()
    n = 8
    for k in range(n):
        g.add_node(Event(f"e{k}", "X"))
    people(g, *[f"p{k}" for k in range(n)])
    for k in range(n):
        for j in rng.choice(n, 2, replace=False):
            g.link(f"e{k}", f"p{int(j)}", "event_entity", "participant",
                   weight=float(rng.uniform(0.2, 2)))
    g.add_choice_node(ChoiceNode("c1", "e0", ["p5", "p6"]))
    g.add_choice_node(ChoiceNode("c2", "e3", ["p1", "p7"]))
    opts = ResolveOptions(c_z=0, c0=0, max_iters=20)
    a = resolve_references(g, opts)
    h = EventWeb.from_dict(g.to_dict())
    for cn in h.choice_nodes.values():
        cn.edge_weight *= scale
    b = resolve_references(h, opts, family_weights={"event_entity": scale})
    for cid in a.choices:
        np.testing.assert_allclose(a[cid].weights, b[cid].weights, atol=1e-9)
        assert a[cid].selected == b[cid].selected


def test_relgraph_excludes_choice_node():
    g = j_smith_graph()
    rel = RelGraph(g)
    w = {"cn": [0.5, 0.25, 0.25]}
    adj, deg = rel.adjacency(w)
    assert adj["E1"]["js1"] == 0.5 and deg["E1"] == 2.0
    adj, deg = rel.adjacency(w, exclude="cn")
    assert "js1" not in adj["E1"] and deg["E1"] == 1.0


# --------------------------------------------------------------------- FBS

def test_levenshtein():
    assert levenshtein("kitten", "sitting") == 3
    assert levenshtein("", "abc") == 3
    assert levenshtein("JSmith", "J.Smith") == 1


def test_fbs_examples(caplog):
    a = {"name": "Ann", "age": 30, "city": "Irvine"}
    assert fbs_similarity(a, dict(a)) == 1.0
    schema = {"city": AttrSpec("enum")}
    assert fbs_similarity({"city": "Irvine"}, {"city": "Tustin"}, schema) == 0.0
    assert fbs_similarity({"name": "JSmith"}, {"name": "J.Smith"}) == pytest.approx(6 / 7)
    with caplog.at_level(logging.WARNING):
        assert fbs_compare({"x": 1}, {"y": 2}) == (0.0, 0)
    assert "no attribute" in caplog.text


def test_fbs_weights_and_numeric():
    schema = {"age": AttrSpec("numeric", weight=3, range=50), "name": AttrSpec("string")}
    s, n = fbs_compare({"age": 30, "name": "ab"}, {"age": 40, "name": "ab"}, schema)
    assert n == 2 and s == pytest.approx((3 * 0.8 + 1) / 4)
    # missing attributes are skipped with renormalization
    assert fbs_similarity({"age": 30}, {"age": 40, "name": "x"}, schema) == pytest.approx(0.8)
    assert fbs_similarity({"age": 10}, {"age": 20}) == pytest.approx(0.5)


names = st.text(alphabet="abcde .", max_size=8)


@given(names, names)
def test_string_similarity_bounds(a, b):
    s = fbs_similarity({"n": a}, {"n": b})
    assert 0 <= s <= 1
    assert s == fbs_similarity({"n": b}, {"n": a})
    assert (s == 1) == (a == b)


# ------------------------------------------------------------ consolidation

def dup_graph():
    g = EventWeb()
    g.add_node(Entity("d1", "person", {"name": "Ann Lee", "age": 30}))
    g.add_node(Entity("d2", "person", {"name": "Ann Lee", "age": 30}))
    g.add_node(Entity("d3", "person", {"name": "Bo Chan", "age": 61}))
    return g


def test_consolidate_examples():
    g = dup_graph()
    ids = ["d1", "d2", "d3"]
    assert consolidate(g, ids, alpha=1, theta=0.99) == [["d1", "d2"], ["d3"]]
    with pytest.raises(DataError):
        consolidate(g, ids, theta=1.5)
    with pytest.raises(DataError):
        consolidate(g, ids, theta=0)
    g.nodes["d2"].attrs["age"] = 31
    assert consolidate(g, ids, alpha=1, theta=1.0) == [["d1"], ["d2"], ["d3"]]
    with pytest.raises(UnknownNodeError):
        consolidate(g, ["d1", "zz"])
    assert consolidate(g, []) == []


def test_consolidate_uses_relations():
    g = dup_graph()
    g.add_node(Event("m", "MEETING"))
    g.link("m", "d1", "event_entity", "participant")
    g.link("m", "d3", "event_entity", "participant")
    # d1 - m - d3: walk strength 1/2 both ways, normalized 0.5 / 0.55
    groups = consolidate(g, ["d1", "d3"], alpha=0.0, theta=0.9)
    assert groups == [["d1", "d3"]]
    assert consolidate(g, ["d1", "d3"], alpha=0.0, theta=0.95) == [["d1"], ["d3"]]


def test_pairwise_f1():
    assert pairwise_f1([["a", "b"], ["c"]], [["a", "b"], ["c"]]) == 1.0
    assert pairwise_f1([["a"], ["b"]], [["a"], ["b"]]) == 1.0
    assert pairwise_f1([["a", "b", "c"]], [["a", "b"], ["c"]]) == pytest.approx(0.5)
    assert pairwise_f1([["a"], ["b"]], [["a", "b"]]) == 0.0


def test_duplicate_scenario_beats_fbs():
    sc = duplicate_scenario(seed=1)
    red = consolidate(sc.graph, sc.descriptions, alpha=0.5, theta=0.7, schema=sc.schema)
    fbs = consolidate(sc.graph, sc.descriptions, alpha=1.0, theta=0.7, schema=sc.schema)
    assert pairwise_f1(red, sc.truth) >= 0.9
    assert pairwise_f1(red, sc.truth) >= pairwise_f1(fbs, sc.truth)
