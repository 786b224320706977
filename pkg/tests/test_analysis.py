import numpy as np
import pytest

from surftrap import (Electrode, FieldModel, Kind, NegativeCurvature, NoMinimumFound, Polygon,
                      TrapLayout, Unbounded, find_minimum, find_rf_null, find_static_null,
                      micromotion_residual, modes_from_hessian, normal_modes, trap_depth,
                      validate_layout)
from surftrap.constants import meV

um = 1e-6
MASS = 24 * 1.66053906660e-27


class Quadratic:
    """U = 1/2 (r - c)^T K (r - c) + u0."""

    def __init__(self, K, c, u0=0.0):
        self.K, self.c, self.u0 = np.asarray(K, float), np.asarray(c, float), u0

    def energy(self, p):
        d = np.atleast_2d(p) - self.c
        out = 0.5 * np.einsum("ni,ij,nj->n", d, self.K, d) + self.u0
        return out[0] if np.ndim(p) == 1 else out

    def gradient(self, p):
        out = (np.atleast_2d(p) - self.c) @ self.K
        return out[0] if np.ndim(p) == 1 else out

    def hessian(self, p):
        return self.K.copy() if np.ndim(p) == 1 else np.broadcast_to(self.K, (len(p), 3, 3))


class CubicBarrier:
    """E0 (t^3 - 3t) + k/2 (y^2 + (z - z0)^2), t = x / a: barrier of exactly 4 E0 at t = -1."""

    def __init__(self, E0=10 * meV, a=10 * um, k=1e-9, z0=50 * um):
        self.E0, self.a, self.k, self.z0 = E0, a, k, z0

    def energy(self, p):
        p = np.atleast_2d(p)
        t = p[:, 0] / self.a
        out = self.E0 * (t**3 - 3 * t) + 0.5 * self.k * (p[:, 1] ** 2 + (p[:, 2] - self.z0) ** 2)
        return out[0] if len(out) == 1 else out

    def gradient(self, p):
        t = p[0] / self.a
        return np.array([self.E0 * (3 * t * t - 3) / self.a, self.k * p[1], self.k * (p[2] - self.z0)])

    def hessian(self, p):
        t = p[0] / self.a
        return np.diag([6 * self.E0 * t / self.a**2, self.k, self.k])


def _rotation(a, b):
    ca, sa, cb, sb = np.cos(a), np.sin(a), np.cos(b), np.sin(b)
    return np.array([[ca, -sa, 0], [sa, ca, 0], [0, 0, 1]]) @ np.array([[1, 0, 0], [0, cb, -sb], [0, sb, cb]])


def test_quadratic_minimum_and_modes():
    R = _rotation(0.1, 0.7)
    f = np.array([1.0, 4.0, 5.0]) * 1e6
    K = R @ np.diag(MASS * (2 * np.pi * f) ** 2) @ R.T
    c = np.array([3 * um, -7 * um, 40 * um])
    pot = Quadratic(K, c)
    res = find_minimum(pot, c + np.array([2, 3, -4]) * um)
    assert np.allclose(res.r0, c, atol=1e-12)
    assert res.grad_norm < 1e-22

    class Ion:
        mass = MASS
    m = normal_modes(pot, res.r0, Ion)
    assert np.allclose(m.frequencies, f, rtol=1e-10)
    assert abs(m.axes[0] @ R[:, 0]) == pytest.approx(1.0, abs=1e-10)
    assert np.allclose(m.axes @ m.axes.T, np.eye(3), atol=1e-12)


def test_modes_sorting_and_negative_curvature():
    H = np.diag([5.0, 1.0, 3.0]) * MASS
    m = modes_from_hessian(H, MASS)
    assert m.f_axial == pytest.approx(np.sqrt(5) / (2 * np.pi))
    assert m.f_perp1 < m.f_perp2
    with pytest.raises(NegativeCurvature):
        modes_from_hessian(np.diag([1.0, -1.0, 2.0]), MASS)


def test_no_minimum_for_saddle():
    pot = Quadratic(np.diag([1.0, -1.0, 1.0]) * 1e-9, [0, 0, 50 * um])
    with pytest.raises(NoMinimumFound):
        find_minimum(pot, np.array([0.0, 1e-6, 50 * um]))


def test_depth_of_cubic_barrier():
    pot = CubicBarrier()
    r0 = np.array([10 * um, 0.0, 50 * um])
    box = ((-30 * um, 30 * um), (-20 * um, 20 * um), (30 * um, 70 * um))
    d = trap_depth(pot, r0, spacing=1 * um, box=box)
    assert d.depth == pytest.approx(40 * meV, rel=1e-9)
    assert np.allclose(d.saddle, [-10 * um, 0, 50 * um], atol=1e-12)
    assert abs(d.grid_depth - d.depth) < 0.05 * d.depth


def test_depth_unbounded_for_closed_bowl():
    pot = Quadratic(np.eye(3) * 1e-9, [0, 0, 50 * um])
    with pytest.raises(Unbounded):
        trap_depth(pot, np.array([0, 0, 50 * um]), spacing=2 * um,
                   box=((-10 * um, 10 * um),) * 2 + ((40 * um, 60 * um),), cap=1e-3 * meV)


def _two_strip(a, b, g, L=20e-3):
    lay = TrapLayout([
        Electrode("RF", Kind.RF, [Polygon.rectangle(-L / 2, L / 2, a, b),
                                  Polygon.rectangle(-L / 2, L / 2, -b, -a)]),
        Electrode("C", Kind.CONTROL, [Polygon.rectangle(-L / 2, L / 2, -(a - g), a - g)])],
        {"gap_m": g})
    return FieldModel(validate_layout(lay))


@pytest.mark.parametrize("a,b", [(30, 55), (20, 80)])
def test_two_strip_null_height(a, b):
    # two infinite strips: the field null sits at sqrt(a b) above the centre line
    m = _two_strip(a * um, b * um, 1e-4 * um)
    r = find_rf_null(m)
    assert r[1] == pytest.approx(0.0, abs=1e-12)
    assert r[2] == pytest.approx(np.sqrt(a * b) * um, rel=1e-4)


def test_two_strip_null_height_with_gap_fill():
    a, b, g = 30 * um, 55 * um, 8 * um
    r = find_rf_null(_two_strip(a, b, g))
    assert r[2] == pytest.approx(np.sqrt((a - g / 2) * (b + g / 2)), rel=1e-4)


def test_reference_rf_null(rf_null, model):
    assert np.linalg.norm(model.rf_basis().gradient(rf_null)) * rf_null[2] < 1e-8
    assert rf_null[0] == pytest.approx(0.0, abs=1e-9)


def test_static_null_of_single_electrode_is_absent_or_valid(model, rf_null, statics):
    mm = micromotion_residual(model, statics, rf_null=rf_null, require_static_null=False)
    assert mm.residual > 0
    if mm.static_null is not None:
        assert np.linalg.norm(model.static(statics).gradient(mm.static_null)) < 1e-6


def test_static_null_zero_voltages(model, rf_null):
    from surftrap import NullNotFound
    with pytest.raises(NullNotFound):
        find_static_null(model.static({}), rf_null)


def test_reference_minimum_near_rf_null(potential, rf_null):
    res = find_minimum(potential, rf_null)
    assert np.linalg.norm(res.r0 - rf_null) < 3 * um
    assert res.grad_norm < 1e-22
