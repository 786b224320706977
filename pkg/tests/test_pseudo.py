import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from surftrap import (DriveConfig, EffectivePotential, InvalidParams, IonSpecies, UnstableDrive,
                      mathieu_q, modes_from_hessian, pseudopotential)
from surftrap.pseudo import pseudo_coefficient

um = 1e-6


def _probe(rng, n):
    return np.column_stack([rng.uniform(-300, 300, n), rng.uniform(-250, 250, n),
                            rng.uniform(2, 300, n)]) * um


def test_pseudopotential_nonnegative(layout, model, drive, ion, rng):
    u = pseudopotential(layout, drive, ion, _probe(rng, 10_000), model=model)
    assert np.all(u >= 0)


def test_vanishes_at_rf_null(layout, model, drive, ion, rf_null):
    u = pseudopotential(layout, drive, ion, rf_null, model=model)
    ref = pseudopotential(layout, drive, ion, rf_null + np.array([0, 1 * um, 0]), model=model)
    assert u < 1e-12 * ref


def test_coefficient_formula(drive, ion):
    c = pseudo_coefficient(drive, ion)
    assert c == pytest.approx(ion.charge**2 * drive.vrf**2 / (4 * ion.mass * drive.omega**2), rel=1e-15)


@settings(max_examples=20, deadline=None)
@given(k=st.floats(0.1, 10))
def test_property_scaling_identities(layout, model, drive, ion, k):
    p = np.array([[3 * um, -20 * um, 45 * um], [-40 * um, 10 * um, 20 * um]])
    base = pseudopotential(layout, drive, ion, p, model=model)
    v = pseudopotential(layout, drive.with_vrf(k * drive.vrf), ion, p, model=model)
    w = pseudopotential(layout, DriveConfig(drive.vrf, k * drive.omega), ion, p, model=model)
    assert np.allclose(v, k**2 * base, rtol=1e-12)
    assert np.allclose(w, base / k**2, rtol=1e-12)


def test_gradient_and_hessian_consistent(potential):
    p = np.array([4 * um, -15 * um, 42 * um])
    g, H = potential.gradient(p), potential.hessian(p)
    h = 2e-9
    for k in range(3):
        d = np.zeros(3)
        d[k] = h
        fd = (potential.energy(p + d) - potential.energy(p - d)) / (2 * h)
        assert g[k] == pytest.approx(fd, rel=1e-5, abs=1e-6 * np.abs(g).max())
        fdH = (potential.gradient(p + d) - potential.gradient(p - d)) / (2 * h)
        assert np.allclose(H[k], fdH, rtol=1e-4, atol=1e-5 * np.abs(H).max())


def test_hessian_matches_mathieu_secular_frequencies(layout, model, drive, ion, rf_null):
    # at the null U_ps = c |H r|^2, so the secular frequencies are |q| Omega / (2 sqrt 2)
    ep = EffectivePotential(model, model.static({}), drive, ion)
    lam = np.sort(np.linalg.eigvalsh(ep.pseudo_hessian(rf_null)))
    with pytest.warns(RuntimeWarning):
        q = mathieu_q(layout, drive, ion, rf_null, model=model)
    w_q = np.sort(np.abs(q)) * drive.omega / (2 * np.sqrt(2))
    w_h = np.sqrt(np.clip(lam, 0, None) / ion.mass)
    assert np.allclose(w_h[1:], w_q[1:], rtol=1e-6)
    assert w_h[0] < 1e-3 * w_h[2]


def test_mathieu_q_traceless_and_linear(layout, model, drive, ion, rf_null):
    q = mathieu_q(layout, drive.with_vrf(40.0), ion, rf_null, model=model)
    assert abs(q.sum()) < 1e-6 * np.abs(q).max()
    q2 = mathieu_q(layout, drive.with_vrf(20.0), ion, rf_null, model=model)
    assert np.allclose(q2, q / 2, rtol=1e-12)


def test_mathieu_warning_and_instability(layout, model, drive, ion, rf_null):
    with pytest.warns(RuntimeWarning):
        mathieu_q(layout, drive.with_vrf(100.0), ion, rf_null, model=model)
    with pytest.raises(UnstableDrive):
        mathieu_q(layout, drive.with_vrf(300.0), ion, rf_null, model=model)


def test_static_hessian_linear_in_scale(model, drive, ion, statics):
    p = np.array([0.0, -12 * um, 38 * um])
    a = EffectivePotential(model, model.static(statics), drive, ion).static_hessian(p)
    b = EffectivePotential(model, model.static(statics).scaled(0.4), drive, ion).static_hessian(p)
    assert np.allclose(b, 0.4 * a, rtol=1e-12, atol=0)


@pytest.mark.parametrize("kw", [dict(mass=-1.0, charge=1e-19), dict(mass=1e-26, charge=0.0)])
def test_invalid_species(kw):
    with pytest.raises(InvalidParams):
        IonSpecies(**kw)


def test_invalid_drive():
    with pytest.raises(InvalidParams):
        DriveConfig(-1.0, 1e8)
    with pytest.raises(InvalidParams):
        DriveConfig(10.0, 0.0)
