import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from surftrap import (DegeneratePolygon, DuplicateName, Electrode, FiveWireParams, InvalidParams,
                      Kind, OverlapError, Polygon, TrapLayout, UnknownElectrode, mirror_x,
                      reference_layout, validate_layout)
from surftrap.geometry import min_clearance, strip_area

um = 1e-6


def _two(rf_poly, dc_poly, names=("RF", "DC")):
    return TrapLayout([Electrode(names[0], Kind.RF, [rf_poly]),
                       Electrode(names[1], Kind.CONTROL, [dc_poly])])


def test_reference_layout_names_and_kinds(layout):
    assert layout.names == ["DC1", "DC2", "DC3", "DC4", "DC5", "RF"]
    assert layout.rf_names == ["RF"]
    assert layout.validated


def test_reference_clearance_equals_gap(layout):
    assert min_clearance(layout) == pytest.approx(8 * um, rel=1e-9)


def test_area_conservation(layout):
    # polygon areas against the closed-form strip bookkeeping
    total = sum(e.area for e in layout.electrodes)
    assert total == pytest.approx(strip_area(FiveWireParams()), rel=1e-12)


@pytest.mark.parametrize("topology", ["ring", "rails", "u"])
def test_topologies_validate(topology):
    p = FiveWireParams(rf_topology=topology)
    lay = reference_layout(p)
    assert sum(e.area for e in lay.electrodes) == pytest.approx(strip_area(p), rel=1e-12)


def test_mirror_is_involution(layout):
    twice = mirror_x(mirror_x(layout))
    for a, b in zip(layout.electrodes, twice.electrodes):
        for pa, pb in zip(a.polygons, b.polygons):
            assert np.allclose(pa.array, pb.array)


def test_mirror_preserves_areas(layout):
    m = mirror_x(layout)
    for a, b in zip(layout.electrodes, m.electrodes):
        assert b.area == pytest.approx(a.area, rel=1e-12)
        assert sum(p.signed_area for p in b.polygons) > 0


def test_cw_polygon_is_reoriented():
    cw = Polygon([(0, 0), (0, 1e-4), (1e-4, 1e-4), (1e-4, 0)])
    lay = validate_layout(_two(cw, Polygon.rectangle(2e-4, 3e-4, 0, 1e-4)))
    assert lay["RF"].polygons[0].signed_area > 0


def test_overlap_rejected():
    with pytest.raises(OverlapError):
        validate_layout(_two(Polygon.rectangle(0, 2e-4, 0, 1e-4),
                             Polygon.rectangle(1e-4, 3e-4, 0, 1e-4)))


def test_touching_is_allowed():
    validate_layout(_two(Polygon.rectangle(0, 1e-4, 0, 1e-4),
                         Polygon.rectangle(1e-4, 2e-4, 0, 1e-4)))


def test_duplicate_names_rejected():
    with pytest.raises(DuplicateName):
        validate_layout(_two(Polygon.rectangle(0, 1e-4, 0, 1e-4),
                             Polygon.rectangle(2e-4, 3e-4, 0, 1e-4), names=("A", "A")))


@pytest.mark.parametrize("verts", [
    [(0, 0), (1e-4, 0)],
    [(0, 0), (1e-4, 0), (2e-4, 0)],
    [(0, 0), (1e-4, 1e-4), (1e-4, 0), (0, 1e-4)],  # bow tie
])
def test_degenerate_polygons(verts):
    with pytest.raises(DegeneratePolygon):
        validate_layout(_two(Polygon(verts), Polygon.rectangle(3e-4, 4e-4, 0, 1e-4)))


def test_unknown_electrode_lookup(layout):
    with pytest.raises(UnknownElectrode):
        layout["DC9"]


@pytest.mark.parametrize("kw", [
    {"inner_edge": 60e-6},                  # inner beyond outer edge
    {"gap": -1e-6},
    {"rf_topology": "star"},
    {"segment_lengths": (983e-6, 0.0, 983e-6)},
])
def test_invalid_params(kw):
    with pytest.raises(InvalidParams):
        reference_layout(FiveWireParams(**kw))


@settings(max_examples=25, deadline=None)
@given(a=st.floats(15, 40), w=st.floats(10, 60), g=st.floats(2, 10))
def test_property_area_and_clearance(a, w, g):
    p = FiveWireParams(inner_edge=a * um, outer_edge=(a + w) * um, gap=g * um,
                       center_width=2 * (a - g) * um, rf_topology="rails")
    try:
        lay = reference_layout(p)
    except InvalidParams:
        return
    assert sum(e.area for e in lay.electrodes) == pytest.approx(strip_area(p), rel=1e-10)
    assert min_clearance(lay) >= g * um * (1 - 1e-9)
