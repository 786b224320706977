"""Ponderomotive pseudopotential and total effective potential energy."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .constants import MG24_AMU, amu, e
from .errors import InvalidParams, UnstableDrive
from .fields import FieldModel, StaticField, as_points
from .geometry import TrapLayout

Q_WARN = 0.4
Q_UNSTABLE = 0.9


@dataclass(frozen=True)
class IonSpecies:
    """Ion mass (kg) and charge (C)."""

    mass: float
    charge: float

    def __post_init__(self):
        if not self.mass > 0:
            raise InvalidParams("ion mass must be positive")
        if self.charge == 0 or not np.isfinite(self.charge):
            raise InvalidParams("ion charge must be nonzero")

    @classmethod
    def from_amu(cls, mass_amu: float, charge_e: float = 1.0):
        return cls(mass_amu * amu, charge_e * e)

    @classmethod
    def mg24(cls):
        return cls.from_amu(MG24_AMU, 1.0)


@dataclass(frozen=True)
class DriveConfig:
    """RF drive: peak amplitude ``vrf`` (V) and angular frequency ``omega`` (rad/s)."""

    vrf: float
    omega: float

    def __post_init__(self):
        if not self.vrf >= 0:
            raise InvalidParams("V_RF must be >= 0")
        if not self.omega > 0:
            raise InvalidParams("drive frequency must be positive")

    @classmethod
    def from_hz(cls, vrf: float, f_hz: float):
        return cls(vrf, 2 * np.pi * f_hz)

    @property
    def f_hz(self):
        return self.omega / (2 * np.pi)

    def with_vrf(self, vrf):
        return DriveConfig(vrf, self.omega)


def pseudo_coefficient(drive: DriveConfig, ion: IonSpecies) -> float:
    """(q V_RF)^2 / (4 m Omega^2), in J m^2, multiplying |grad phi_RF|^2."""
    return (ion.charge * drive.vrf) ** 2 / (4.0 * ion.mass * drive.omega**2)


class EffectivePotential:
    """U_total = q Phi_static + (q V_RF)^2 |grad phi_RF|^2 / (4 m Omega^2), in joules.

    Parameters
    ----------
    model : FieldModel
    static : StaticField
    drive : DriveConfig
    ion : IonSpecies
    """

    def __init__(self, model: FieldModel, static: StaticField, drive: DriveConfig,
                 ion: IonSpecies):
        self.model = model
        self.static = static
        self.drive = drive
        self.ion = ion
        self.rf = model.rf_basis()
        self.c = pseudo_coefficient(drive, ion)

    @property
    def layout(self):
        return self.model.layout

    # energies -------------------------------------------------------------
    def static_energy(self, points):
        return self.ion.charge * self.static.potential(points)

    def pseudo_energy(self, points):
        g = self.rf.gradient(points)
        return self.c * np.sum(g * g, axis=-1)

    def energy(self, points):
        return self.static_energy(points) + self.pseudo_energy(points)

    __call__ = energy

    # gradients --------------------------------------------------------------
    def static_gradient(self, points):
        return self.ion.charge * self.static.gradient(points)

    def pseudo_gradient(self, points):
        p, single = as_points(points)
        g = self.rf.gradient(p)
        H = self.rf.hessian(p)
        out = 2 * self.c * np.einsum("nij,ni->nj", H, g)
        return out[0] if single else out

    def gradient(self, points):
        return self.static_gradient(points) + self.pseudo_gradient(points)

    # Hessians -------------------------------------------------------------
    def static_hessian(self, points):
        return self.ion.charge * self.static.hessian(points)

    def pseudo_hessian(self, points):
        """2c (H H + sum_k g_k dH/dx_k); the third derivatives are differenced."""
        p, single = as_points(points)
        g = self.rf.gradient(p)
        H = self.rf.hessian(p)
        T = self.rf.third_derivatives(p)
        out = 2 * self.c * (np.einsum("nik,nij->nkj", H, H) + np.einsum("ni,nkij->nkj", g, T))
        out = 0.5 * (out + np.swapaxes(out, -1, -2))
        return out[0] if single else out

    def hessian(self, points):
        return self.static_hessian(points) + self.pseudo_hessian(points)

    def with_drive(self, drive):
        return EffectivePotential(self.model, self.static, drive, self.ion)

    def with_static(self, static):
        return EffectivePotential(self.model, static, self.drive, self.ion)


def pseudopotential(layout: TrapLayout, drive: DriveConfig, ion: IonSpecies, point,
                    model: FieldModel | None = None):
    """Pseudopotential energy (J) at ``point``."""
    model = model or FieldModel(layout)
    g = model.rf_basis().gradient(point)
    return pseudo_coefficient(drive, ion) * np.sum(g * g, axis=-1)


def total_potential(layout: TrapLayout, drive: DriveConfig, statics, ion: IonSpecies,
                    model: FieldModel | None = None) -> EffectivePotential:
    """Effective potential for control voltages ``statics`` (name -> volts)."""
    model = model or FieldModel(layout)
    return EffectivePotential(model, model.static(statics), drive, ion)


def mathieu_q(layout: TrapLayout, drive: DriveConfig, ion: IonSpecies, at,
              model: FieldModel | None = None):
    """Per-axis Mathieu q from the RF Hessian eigenvalues at ``at``.

    Returns
    -------
    q : ndarray, shape (3,)
        Signed values, ordered like the ascending Hessian eigenvalues.

    Raises
    ------
    UnstableDrive
        If max |q| exceeds 0.9.
    """
    model = model or FieldModel(layout)
    lam = np.linalg.eigvalsh(model.rf_basis().hessian(np.asarray(at, dtype=float)))
    q = 2 * ion.charge * drive.vrf * lam / (ion.mass * drive.omega**2)
    qmax = float(np.max(np.abs(q)))
    if qmax > Q_UNSTABLE:
        raise UnstableDrive(f"max |q| = {qmax:.3f} exceeds {Q_UNSTABLE}")
    if qmax > Q_WARN:
        warnings.warn(f"max |q| = {qmax:.3f} > {Q_WARN}: pseudopotential approximation degrading",
                      RuntimeWarning, stacklevel=2)
    return q
