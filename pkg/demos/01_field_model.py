# %% [markdown]
# # Electrode basis potentials
#
# Build the five-wire reference layout, look at the gap-filled regions and
# locate the RF null.

# %%
import numpy as np

from surftrap import FieldModel, find_rf_null, reference_layout
from surftrap.fields import gapless_regions
from surftrap.geometry import min_clearance

um = 1e-6
layout = reference_layout()
for e in layout.electrodes:
    print(f"{e.name:4s} {e.kind.value:8s} {e.area / um**2:10.1f} um^2")
print("smallest gap:", min_clearance(layout) / um, "um")

# %% [markdown]
# Each electrode grows into half of the surrounding gaps. The union then
# tiles the plane inside the layout, which is what the solid-angle formula
# assumes.

# %%
regions = gapless_regions(layout)
for name, r in regions.items():
    print(f"{name:4s} filled area {r.area / um**2:10.1f} um^2")

# %%
model = FieldModel(layout)
r = find_rf_null(model)
print("RF null (um):", np.round(r / um, 3))

# %% [markdown]
# Unit potentials along a vertical line through the null.

# %%
z = np.linspace(5, 150, 8) * um
pts = np.column_stack([np.zeros_like(z), np.full_like(z, r[1]), z])
for name in layout.names:
    print(name, np.round(model.basis(name).potential(pts), 4))
