import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ems.errors import (
    CycleError,
    DataError,
    DegenerateGeometryError,
    DuplicateIdError,
    InvalidLabelError,
    MissingEndpointError,
)
from ems.model import (
    FAMILY_LABELS,
    ChoiceNode,
    EdgeType,
    Entity,
    Event,
    EventWeb,
    Report,
    SpatialMilieu,
    TemporalMilieu,
    spatial_relate,
    temporal_relate,
)

T0 = 1114942500.0  # 2005-05-01 10:15 UTC


def unit_square(x0, y0, side=1.0):
    return [(x0, y0), (x0 + side, y0), (x0 + side, y0 + side), (x0, y0 + side)]


def small_web():
    g = EventWeb()
    g.add_node(Event("E1", "VEHICLE_OVERTURN"))
    g.add_node(Event("E2", "FOUL_SMELL"))
    g.add_node(Entity("V", "VEHICLE"))
    g.add_node(Report("R1", T0))
    g.add_node(TemporalMilieu.point("T1", T0))
    return g


def test_add_node_round_trip():
    g = EventWeb()
    assert g.add_node(Event("E1", "VEHICLE_OVERTURN")) == "E1"
    assert g.node("E1").event_type == "VEHICLE_OVERTURN"


def test_duplicate_node_rejected():
    g = EventWeb()
    g.add_node(Event("E1", "X"))
    with pytest.raises(DuplicateIdError):
        g.add_node(Event("E1", "Y"))


def test_thousand_nodes_counted():
    g = EventWeb()
    for k in range(1000):
        g.add_node(Entity(f"n{k}", "thing"))
    assert g.node_count == 1000


def test_empty_event_type_rejected():
    with pytest.raises(DataError):
        Event("E", "")


def test_edges_valid_and_invalid():
    g = small_web()
    g.link("E1", "V", "event_entity", "participant")
    g.link("E1", "T1", "event_milieu", "at-time")
    g.link("E1", "R1", "event_report", "reported-in")
    with pytest.raises(InvalidLabelError):
        g.link("E1", "E2", "event_milieu", "causes")
    with pytest.raises(MissingEndpointError):
        g.link("E1", "nope", "event_event", "causes")
    with pytest.raises(DuplicateIdError):
        g.link("E1", "V", "event_entity", "participant")
    # wrong endpoint kinds for the family
    with pytest.raises(InvalidLabelError):
        g.link("V", "E1", "event_entity", "agentive")
    assert g.edge_count == 3


def test_entity_entity_labels_are_free():
    g = EventWeb()
    g.add_node(Entity("a", "person"))
    g.add_node(Entity("b", "person"))
    g.link("a", "b", "entity_entity", "colleague")
    assert g.neighbors("a", "colleague") == ["b"]


@pytest.mark.parametrize("family", sorted(f for f, v in FAMILY_LABELS.items() if v is not None))
def test_closed_vocabulary(family):
    with pytest.raises(InvalidLabelError):
        EdgeType(family, "not-a-label")


def test_composed_of_cycle_rejected():
    g = EventWeb()
    for e in ("a", "b", "c"):
        g.add_node(Event(e, "X"))
    g.link("a", "b", "event_event", "composed-of")
    g.link("b", "c", "event_event", "composed-of")
    with pytest.raises(CycleError):
        g.link("c", "a", "event_event", "composed-of")
    # causes edges may close a loop
    g.link("c", "a", "event_event", "causes")


def test_choice_node_weights():
    g = small_web()
    g.add_node(Entity("V2", "VEHICLE"))
    cn = ChoiceNode("cn", "E1", ["V", "V2"])
    assert cn.weights == pytest.approx([1 / 3] * 3)
    g.add_choice_node(cn)
    with pytest.raises(DataError):
        ChoiceNode("bad", "E1", ["V"], weights=[0.5, 0.6])
    with pytest.raises(MissingEndpointError):
        g.add_choice_node(ChoiceNode("cn2", "E1", ["ghost"]))


def test_temporal_examples():
    a = TemporalMilieu.point("a", T0)
    b = TemporalMilieu.point("b", T0 + 45 * 60)
    assert temporal_relate(a, b) == {"before"}
    assert temporal_relate(b, a) == {"after"}
    iv = TemporalMilieu.interval("i", T0, T0 + 3600)
    assert temporal_relate(a, iv) == {"begins", "during"}
    x = TemporalMilieu.interval("x", 0, 10)
    y = TemporalMilieu.interval("y", 0, 10)
    assert temporal_relate(x, y) == {"equals"}


def test_temporal_invariants():
    with pytest.raises(DataError):
        TemporalMilieu.interval("bad", 5, 1)
    with pytest.raises(DataError):
        TemporalMilieu("bad", "point", 1, 2)


def test_temporal_other_labels():
    iv = lambda s, e: TemporalMilieu.interval("t", s, e)  # noqa: E731
    assert temporal_relate(iv(0, 10), iv(2, 4)) == {"contains"}
    assert temporal_relate(iv(0, 5), iv(5, 9)) == {"meets"}
    assert temporal_relate(iv(5, 9), iv(0, 5)) == {"meets"}
    assert temporal_relate(iv(0, 6), iv(4, 9)) == {"overlaps"}
    assert temporal_relate(iv(4, 10), iv(0, 10)) == {"during", "ends"}


def region(nid, geom):
    return SpatialMilieu(nid, "region", geom)


def test_spatial_examples():
    big = region("a", unit_square(0, 0, 10))
    small = region("b", unit_square(2, 2, 2))
    assert spatial_relate(big, small) == {"contains"}
    assert spatial_relate(small, big) == {"within"}
    assert spatial_relate(region("p", unit_square(0, 0)), region("q", unit_square(1, 0))) == {"touches"}
    # 5 m gap: the closest vertex/edge distance is 5, under near_dist 10
    p, q = region("p", unit_square(0, 0)), region("q", unit_square(6, 0))
    assert spatial_relate(p, q, near_dist=10) == {"disjoint", "near"}
    assert spatial_relate(p, q, near_dist=4) == {"disjoint"}


def test_degenerate_geometry():
    with pytest.raises(DegenerateGeometryError):
        region("x", [(0, 0), (1, 1)]).shape()
    with pytest.raises(DegenerateGeometryError):
        # bow tie
        region("x", [(0, 0), (1, 1), (1, 0), (0, 1)]).shape()


def test_point_milieu_relates():
    pt = SpatialMilieu("p", "point", (1.0, 1.0))
    sq = region("s", unit_square(0, 0, 2))
    assert spatial_relate(sq, pt) == {"contains"}


def test_serialization_round_trip():
    g = small_web()
    g.add_node(SpatialMilieu("S", "region", unit_square(0, 0, 5), name="lot"))
    g.add_node(Entity("V2", "VEHICLE", {"plate": "X1"}))
    g.link("E1", "V", "event_entity", "participant")
    g.link("E1", "E2", "event_event", "causes", weight=0.5)
    g.link("E1", "S", "event_milieu", "at-location")
    g.add_choice_node(ChoiceNode("cn", "E2", ["V", "V2"], description="a van"))
    h = EventWeb.from_dict(g.to_dict())
    assert h.signature() == g.signature()
    assert h.to_dict() == g.to_dict()
    # new edges keep fresh ids after reload
    eid = h.link("E2", "V", "event_entity", "participant")
    assert eid not in g.edges


times = st.floats(min_value=-1e6, max_value=1e6, allow_nan=False)


@given(times, times, times, times)
def test_before_after_antisymmetry(a, b, c, d):
    x = TemporalMilieu.interval("x", min(a, b), max(a, b))
    y = TemporalMilieu.interval("y", min(c, d), max(c, d))
    rxy, ryx = temporal_relate(x, y), temporal_relate(y, x)
    assert ("before" in rxy) == ("after" in ryx)
    assert ("contains" in rxy) == ("during" in ryx)


coords = st.integers(min_value=-20, max_value=20)


@settings(max_examples=60, deadline=None)
@given(coords, coords, st.integers(1, 10), coords, coords, st.integers(1, 10))
def test_spatial_symmetry(x0, y0, s0, x1, y1, s1):
    a = region("a", unit_square(x0, y0, s0))
    b = region("b", unit_square(x1, y1, s1))
    rab, rba = spatial_relate(a, b, 3.0), spatial_relate(b, a, 3.0)
    sym = {"equals", "touches", "overlaps", "disjoint", "near"}
    assert rab & sym == rba & sym
    assert ("contains" in rab) == ("within" in rba)
