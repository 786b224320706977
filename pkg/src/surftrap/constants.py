"""Physical constants (CODATA, via scipy) and unit helpers."""

from scipy import constants as _ct

e = _ct.e
epsilon_0 = _ct.epsilon_0
h = _ct.h
hbar = _ct.hbar
k_B = _ct.k
amu = _ct.atomic_mass

um = 1e-6
MHz = 1e6
meV = 1e-3 * _ct.e

#: 24Mg+ isotope mass in atomic mass units
MG24_AMU = 23.985041697


def to_meV(energy_J):
    return energy_J / meV


def from_meV(energy_meV):
    return energy_meV * meV
