# %% [markdown]
# # Trap minimum, modes and depth
#
# Control voltages follow the reference ratios scaled to V5 = 5 V, with a
# 103.5 V, 87 MHz drive.

# %%
import numpy as np

from surftrap import (DriveConfig, EffectivePotential, FieldModel, IonSpecies, characterize,
                      find_rf_null, mathieu_q, micromotion_residual, reference_config,
                      reference_layout)
from surftrap.constants import MHz, meV, um

layout = reference_layout()
model = FieldModel(layout)
ion = IonSpecies.mg24()
ratios = reference_config()["statics"]["ratios"]
statics = {k: 5.0 * v for k, v in ratios.items()}
drive = DriveConfig.from_hz(103.5, 87e6)
ep = EffectivePotential(model, model.static(statics), drive, ion)

# %%
c = characterize(ep)
print("minimum (um):", np.round(c.r0 / um, 2))
print("modes (MHz):", np.round(c.frequencies / MHz, 3))
print("mode axes:\n", np.round(c.modes.axes, 3))
print(f"depth: {c.U_T / meV:.1f} meV, escape near {np.round(c.depth.escape_point / um, 1)} um")

# %% [markdown]
# The reference ratios leave a small static field at the RF null; the
# ion sits about a micron off the null along the axis.

# %%
mm = micromotion_residual(model, statics, require_static_null=False)
print(f"static field at RF null: {mm.residual:.1f} V/m")
print("Mathieu q:", np.round(mathieu_q(layout, drive, ion, c.r0, model=model), 3))

# %% [markdown]
# Transverse cross-section with 5 meV contour levels, printed as a coarse
# character map (digits count contour levels above the minimum).

# %%
y = np.linspace(-60, 35, 39) * um
z = np.linspace(10, 90, 21) * um
Y, Z = np.meshgrid(y, z)
P = np.column_stack([np.full(Y.size, c.r0[0]), Y.ravel(), Z.ravel()])
U = (ep.energy(P) - ep.energy(c.r0)) / meV
levels = np.clip(U // 5, 0, 35).astype(int).reshape(Z.shape)
chars = "0123456789abcdefghijklmnopqrstuvwxyz"
for row in levels[::-1]:
    print("".join(chars[v] for v in row))
