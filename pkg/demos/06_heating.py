# %% [markdown]
# # Heating-rate estimates

# %%
import numpy as np

from surftrap import (DriveConfig, EffectivePotential, FieldModel, FilterNoiseModel, IonSpecies,
                      effective_distance, escape_heating_rate, find_minimum, find_rf_null,
                      johnson_heating_rate, normal_modes, reference_config, reference_layout)
from surftrap.constants import meV

est = escape_heating_rate(6 * meV, 53.0, 5.3e6, sigma_U=1 * meV, sigma_tau=10.0)
print(f"escape estimate: {est.rate / 1e3:.2f} +/- {est.sigma_rate / 1e3:.2f} quanta/ms")

# %% [markdown]
# Johnson noise of the 1 kOhm / 820 pF filters, coupled through the
# geometry of the shallow (46.2 V) configuration.

# %%
layout = reference_layout()
model = FieldModel(layout)
ion = IonSpecies.mg24()
ratios = reference_config()["statics"]["ratios"]
ep = EffectivePotential(model, model.static({k: 5 * v for k, v in ratios.items()}),
                        DriveConfig.from_hz(46.2, 87e6), ion)
r0 = find_minimum(ep, find_rf_null(model)).r0
modes = normal_modes(ep, r0, ion)

for label, axis in (("|E|", None), ("perp1 mode", modes.axes[1])):
    d = {n: effective_distance(model, n, r0, axis=axis) for n in layout.control_names}
    total, per = johnson_heating_rate(FilterNoiseModel(1e3, 820e-12, 300.0, d, 5.3e6), ion,
                                      per_electrode=True)
    print(f"{label:10s} total {total:7.2f} quanta/s;",
          ", ".join(f"{n} {v:.2f}" for n, v in per.items()))
