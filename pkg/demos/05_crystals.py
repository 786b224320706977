# %% [markdown]
# # Ion chains and the zig-zag transition

# %%
import numpy as np

from surftrap import HarmonicModel, IonSpecies, equilibrium, two_ion_separation, zigzag_analysis
from surftrap.crystal import separations

ion = IonSpecies.mg24()
f = (1.84e6, 15.87e6, 16.93e6)

# %%
cfg = equilibrium(HarmonicModel(f), 2, ion)
print(f"two ions: {separations(cfg)[0] * 1e6:.4f} um "
      f"(closed form {two_ion_separation(ion.charge, ion.mass, f[0]) * 1e6:.4f} um)")

cfg = equilibrium(HarmonicModel(f), 12, ion)
print("12-ion spacings (um):", np.round(separations(cfg) * 1e6, 2))
print("zig-zag:", cfg.is_zigzag)

# %% [markdown]
# Smallest ion number that buckles, against the transverse-to-axial ratio.

# %%
rep = zigzag_analysis(f, ion, (2, 30))
print(f"reference frequencies: first zig-zag at N = {rep.n_crit} ({rep.soft_axis} plane)")
for ratio in (2, 3, 5, 7, 9):
    r = zigzag_analysis((1e6, ratio * 1e6, 1.067 * ratio * 1e6), ion, (2, 40))
    print(f"f_perp/f_ax = {ratio}: N_crit = {r.n_crit}")
