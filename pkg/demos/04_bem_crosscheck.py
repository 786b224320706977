# %% [markdown]
# # Boundary-element cross-check of the gapless model
#
# The oracle meshes the real electrodes with their gaps and a grounded
# frame. A 6 um panel size keeps this demo under a minute; the acceptance
# test uses 3 um.

# %%
import time

import numpy as np

from surftrap import FieldModel, bem_potential, bem_solve, find_rf_null, reference_layout

um = 1e-6
layout = reference_layout()
model = FieldModel(layout)
r = find_rf_null(model)

t0 = time.perf_counter()
sol = bem_solve(layout, 6 * um, focus=((-60 * um, 60 * um), (-80 * um, 70 * um)))
print(f"{len(sol.panels)} panels, {time.perf_counter() - t0:.0f} s, residual {sol.residual:.1e}")

# %%
z = np.array([16, 24, 32, 48, 64]) * um
pts = np.column_stack([np.zeros_like(z), np.full_like(z, r[1]), z])
print("z (um):", z / um)
for name in layout.names:
    d = bem_potential(sol, pts, {name: 1.0})[0] - model.basis(name).potential(pts)
    print(f"{name:4s}", np.round(d, 4))
