import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from surftrap import (Electrode, EvaluationBelowPlane, FieldModel, Kind, Polygon, TrapLayout,
                      UnknownElectrode, mirror_x, validate_layout)
from surftrap.fields import gapless_regions, laplacian_fd

um = 1e-6


def _quad_rect(x1, x2, y1, y2, p):
    """Potential of a unit-voltage rectangle by direct quadrature of the plane Green function."""
    x, y, z = p
    f = lambda yy, xx: z / (2 * np.pi * ((x - xx) ** 2 + (y - yy) ** 2 + z * z) ** 1.5)
    val, _ = integrate.dblquad(f, x1, x2, y1, y2, epsabs=1e-13, epsrel=1e-11)
    return val


def _single(polys, gap=0.0):
    lay = TrapLayout([Electrode("E", Kind.RF, polys),
                      Electrode("G", Kind.CONTROL, [Polygon.rectangle(5e-3, 6e-3, 5e-3, 6e-3)])],
                     {"gap_m": gap})
    return FieldModel(validate_layout(lay))


def test_rectangle_matches_quadrature():
    m = _single([Polygon.rectangle(-50 * um, 70 * um, -20 * um, 30 * um)])
    for p in [(0, 0, 10 * um), (60 * um, -25 * um, 5 * um), (200 * um, 100 * um, 80 * um)]:
        assert m.basis("E").potential(np.array(p)) == pytest.approx(
            _quad_rect(-50 * um, 70 * um, -20 * um, 30 * um, p), rel=1e-8, abs=1e-12)


def test_polygon_with_hole_equals_rect_difference():
    outer = [(-100 * um, -100 * um), (100 * um, -100 * um), (100 * um, 100 * um), (-100 * um, 100 * um)]
    ring = _single([Polygon(outer)]).basis("E")
    frame = TrapLayout([Electrode("E", Kind.RF, [
        Polygon.rectangle(-100 * um, 100 * um, -100 * um, -40 * um),
        Polygon.rectangle(-100 * um, 100 * um, 40 * um, 100 * um),
        Polygon.rectangle(-100 * um, -40 * um, -40 * um, 40 * um),
        Polygon.rectangle(40 * um, 100 * um, -40 * um, 40 * um)]),
        Electrode("G", Kind.CONTROL, [Polygon.rectangle(5e-3, 6e-3, 5e-3, 6e-3)])])
    f = FieldModel(validate_layout(frame)).basis("E")
    pts = np.array([[0, 0, 20 * um], [30 * um, -70 * um, 15 * um], [150 * um, 0, 40 * um]])
    big = np.array([_quad_rect(-100 * um, 100 * um, -100 * um, 100 * um, p) for p in pts])
    hole = np.array([_quad_rect(-40 * um, 40 * um, -40 * um, 40 * um, p) for p in pts])
    assert np.allclose(f.potential(pts), big - hole, rtol=1e-8, atol=1e-12)
    assert np.allclose(ring.potential(pts), big, rtol=1e-8)


def test_far_field_dipole_limit():
    m = _single([Polygon.rectangle(-10 * um, 10 * um, -10 * um, 10 * um)])
    R = 5e-3
    for d in ([0, 0, 1], [0.6, 0, 0.8], [0, -0.28, 0.96]):
        p = R * np.array(d)
        assert m.basis("E").potential(p) == pytest.approx((20 * um) ** 2 * p[2] / (2 * np.pi * R**3),
                                                          rel=1e-5)


def test_boundary_values(model):
    z = 1e-10
    over_rf = np.array([0.0, 40 * um, z])
    over_dc5 = np.array([0.0, 150 * um, z])
    assert model.basis("RF").potential(over_rf) == pytest.approx(1.0, abs=1e-5)
    assert model.basis("DC5").potential(over_rf) == pytest.approx(0.0, abs=1e-5)
    assert model.basis("DC5").potential(over_dc5) == pytest.approx(1.0, abs=1e-5)


def test_gap_midline_splits_evenly(model, layout):
    # the gap between the +y RF rail and DC5 is straight and long
    y_mid = 0.5 * (max(v[1] for p in layout["RF"].polygons for v in p.vertices)
                   + min(v[1] for p in layout["DC5"].polygons for v in p.vertices))
    p = np.array([0.0, y_mid, 1e-10])
    assert model.basis("RF").potential(p) == pytest.approx(0.5, abs=1e-5)
    assert model.basis("DC5").potential(p) == pytest.approx(0.5, abs=1e-5)


def test_gapless_regions_tile_without_overlap(layout):
    regions = gapless_regions(layout)
    names = list(regions)
    for i, a in enumerate(names):
        for b in names[i + 1:]:
            assert regions[a].intersection(regions[b]).area < 1e-20
    for e in layout.electrodes:
        assert regions[e.name].area > e.area


def test_sum_of_bases_is_one_inside(model, layout):
    pts = np.array([[0, 0, 1e-10], [100 * um, -60 * um, 1e-10], [-300 * um, 20 * um, 1e-10]])
    total = sum(model.basis(n).potential(pts) for n in layout.names)
    assert np.allclose(total, 1.0, atol=1e-5)


def test_gradient_and_hessian_against_differences(model, rng):
    pts = np.column_stack([rng.uniform(-100, 100, 20), rng.uniform(-100, 100, 20),
                           rng.uniform(10, 120, 20)]) * um
    h = 1e-9
    for name in model.layout.names:
        b = model.basis(name)
        g, H = b.gradient(pts), b.hessian(pts)
        for k in range(3):
            d = np.zeros(3)
            d[k] = h
            fd_g = (b.potential(pts + d) - b.potential(pts - d)) / (2 * h)
            fd_H = (b.gradient(pts + d) - b.gradient(pts - d)) / (2 * h)
            assert np.allclose(g[:, k], fd_g, rtol=1e-5, atol=1e-6 * np.abs(g).max())
            assert np.allclose(H[:, k], fd_H, rtol=1e-5, atol=1e-6 * np.abs(H).max())
        assert np.allclose(H, np.swapaxes(H, 1, 2), atol=1e-9 * np.abs(H).max())


def test_analytic_laplacian_vanishes(model, rng):
    pts = np.column_stack([rng.uniform(-200, 200, 500), rng.uniform(-200, 200, 500),
                           rng.uniform(5, 200, 500)]) * um
    for name in model.layout.names:
        H = model.basis(name).hessian(pts)
        tr = np.trace(H, axis1=1, axis2=2)
        scale = np.abs(np.diagonal(H, axis1=1, axis2=2)).sum(axis=1)
        assert np.all(np.abs(tr) <= 1e-9 * scale)


def test_fd_laplacian_helper(model):
    pts = np.array([[0.0, -12 * um, 38 * um], [50 * um, 30 * um, 70 * um]])
    lap = laplacian_fd(model.basis("RF").potential, pts)
    diag = np.abs(np.diagonal(model.basis("RF").hessian(pts), axis1=1, axis2=2)).sum(axis=1)
    assert np.all(np.abs(lap) < 1e-3 * diag)


def test_superposition(model, layout):
    pts = np.array([[0.0, -10 * um, 40 * um], [20 * um, 5 * um, 25 * um]])
    v = {"DC1": 1.5, "DC4": -2.0, "DC5": 3.0}
    s = model.static(v)
    expect = sum(val * model.basis(n).potential(pts) for n, val in v.items())
    assert np.allclose(s.potential(pts), expect, rtol=1e-13)
    assert np.allclose(s.scaled(2.5).gradient(pts), 2.5 * s.gradient(pts), rtol=1e-13)
    assert np.allclose(s.field(pts), -s.gradient(pts))


def test_mirror_symmetry_of_reference(model):
    p = np.array([[13 * um, -20 * um, 30 * um], [70 * um, 10 * um, 55 * um]])
    q = p * np.array([-1, 1, 1])
    for n in ("RF", "DC1", "DC4", "DC5"):
        assert np.allclose(model.basis(n).potential(p), model.basis(n).potential(q), rtol=1e-10)
    assert np.allclose(model.basis("DC2").potential(p), model.basis("DC3").potential(q), rtol=1e-10)


@settings(max_examples=20, deadline=None)
@given(x=st.floats(-150, 150), y=st.floats(-150, 150), z=st.floats(3, 150),
       dx=st.floats(10, 80))
def test_property_mirror_layout_reflects_field(x, y, z, dx):
    lay = validate_layout(TrapLayout([
        Electrode("A", Kind.RF, [Polygon([(0, 0), (dx * um, 0), (dx * um, 30 * um), (0, 60 * um)])]),
        Electrode("B", Kind.CONTROL, [Polygon.rectangle(-90 * um, -20 * um, -40 * um, 10 * um)])]))
    m, mm = FieldModel(lay), FieldModel(mirror_x(lay))
    p = np.array([x, y, z]) * um
    q = p * np.array([-1, 1, 1])
    for n in ("A", "B"):
        assert m.basis(n).potential(p) == pytest.approx(mm.basis(n).potential(q), rel=1e-9, abs=1e-14)
        g, gm = m.basis(n).gradient(p), mm.basis(n).gradient(q)
        assert np.allclose(g * np.array([-1, 1, 1]), gm, rtol=1e-8, atol=1e-9 * np.abs(g).max())


@settings(max_examples=30, deadline=None)
@given(a=st.floats(-5, 5), b=st.floats(-5, 5))
def test_property_linearity(model, a, b):
    p = np.array([5 * um, -15 * um, 35 * um])
    lhs = model.static({"DC1": a, "DC5": b}).gradient(p)
    rhs = a * model.basis("DC1").gradient(p) + b * model.basis("DC5").gradient(p)
    assert np.allclose(lhs, rhs, rtol=1e-12, atol=1e-12)


def test_below_plane_rejected(model):
    with pytest.raises(EvaluationBelowPlane):
        model.basis("RF").potential(np.array([0.0, 0.0, 0.0]))
    with pytest.raises(EvaluationBelowPlane):
        model.static({"DC1": 1.0}).gradient(np.array([0.0, 0.0, -1e-6]))


def test_unknown_electrode(model):
    with pytest.raises(UnknownElectrode):
        model.basis("nope")
    with pytest.raises(UnknownElectrode):
        model.static({"DC7": 1.0})
