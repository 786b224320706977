"""Heating-rate estimates.

Two estimators live here. The escape estimator assumes a constant heating
rate that carries the ion from the bottom of the well over the barrier
during the mean survival time. The Johnson-noise estimator sums thermal
voltage noise of the RC-filtered control lines, converted to field noise at
the ion through each electrode's effective distance.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .constants import h, hbar, k_B, meV
from .errors import NonPositiveInput, ZeroField
from .fields import FieldModel

#: thermal energy scale above which the escape estimator is biased (J)
THERMAL_WARN = 25 * meV


@dataclass(frozen=True)
class EscapeEstimate:
    """Rate (quanta/s) = U_T / (tau_s h f) with first-order uncertainty."""

    U_T: float
    tau_s: float
    f_perp1: float
    rate: float
    sigma_rate: float

    @property
    def relative_sigma(self):
        return self.sigma_rate / self.rate


def escape_heating_rate(U_T: float, tau_s: float, f_perp1: float, sigma_U: float = 0.0,
                        sigma_tau: float = 0.0) -> EscapeEstimate:
    """Mean heating rate implied by the survival time of a shallow well.

    Parameters
    ----------
    U_T : float
        Trap depth (J).
    tau_s : float
        Mean survival time (s).
    f_perp1 : float
        Frequency (Hz) of the mode whose quanta are counted.
    sigma_U, sigma_tau : float
        Standard uncertainties of U_T and tau_s.

    Raises
    ------
    NonPositiveInput
    """
    for name, v in (("U_T", U_T), ("tau_s", tau_s), ("f_perp1", f_perp1)):
        if not v > 0:
            raise NonPositiveInput(f"{name} must be positive, got {v}")
    if sigma_U < 0 or sigma_tau < 0:
        raise NonPositiveInput("uncertainties must be non-negative")
    if U_T > THERMAL_WARN:
        warnings.warn("U_T exceeds the ~25 meV room-temperature scale; the escape estimate "
                      "may be biased by thermalization", RuntimeWarning, stacklevel=2)
    rate = U_T / (tau_s * h * f_perp1)
    rel = np.hypot(sigma_U / U_T, sigma_tau / tau_s)
    return EscapeEstimate(U_T, tau_s, f_perp1, rate, rate * rel)


@dataclass(frozen=True)
class FilterNoiseModel:
    """RC-filtered Johnson noise on control electrodes.

    Parameters
    ----------
    R : float
        Series resistance (ohm).
    C : float
        Shunt capacitance (F).
    T : float
        Temperature (K).
    d_eff : dict or sequence
        Effective distance (m) per electrode.
    f_mode : float
        Mode frequency (Hz).
    """

    R: float
    C: float
    T: float
    d_eff: object
    f_mode: float

    def __post_init__(self):
        if self.R < 0 or self.C < 0 or self.T < 0:
            raise NonPositiveInput("R, C and T must be non-negative")
        if not self.f_mode > 0:
            raise NonPositiveInput("mode frequency must be positive")
        d = list(self.distances.values())
        if not d or min(d) <= 0:
            raise NonPositiveInput("effective distances must be positive")

    @property
    def distances(self):
        if isinstance(self.d_eff, dict):
            return {k: float(v) for k, v in self.d_eff.items()}
        return {str(i): float(v) for i, v in enumerate(np.atleast_1d(self.d_eff))}

    @property
    def omega(self):
        return 2 * np.pi * self.f_mode

    def voltage_psd(self):
        """Single-sided voltage noise density at the electrode (V^2/Hz)."""
        x = self.omega * self.R * self.C
        return 4 * k_B * self.T * self.R / (1 + x * x)


def johnson_heating_rate(model: FilterNoiseModel, ion, per_electrode: bool = False):
    """Heating rate (quanta/s) from Johnson noise, summed incoherently.

    rate = q^2 S_E / (4 m hbar w) with S_E = S_V / d_eff^2 for each electrode.
    """
    sv = model.voltage_psd()
    pref = ion.charge**2 / (4 * ion.mass * hbar * model.omega)
    rates = {k: pref * sv / d**2 for k, d in model.distances.items()}
    total = float(sum(rates.values()))
    return (total, rates) if per_electrode else total


def effective_distance(model: FieldModel, electrode: str, r0, axis=None) -> float:
    """d_eff = 1 / |grad phi| for 1 V on ``electrode`` at ``r0`` (m).

    With ``axis`` the field is projected on that unit vector first, which is
    the coupling relevant to a single motional mode.

    Raises
    ------
    ZeroField
    """
    g = model.basis(electrode).gradient(np.asarray(r0, dtype=float))
    if axis is not None:
        a = np.asarray(axis, dtype=float)
        g = np.array([g @ a / np.linalg.norm(a)])
    mag = float(np.linalg.norm(g))
    if mag == 0 or not np.isfinite(mag):
        raise ZeroField(f"electrode {electrode!r} produces no field at the ion")
    return 1.0 / mag
