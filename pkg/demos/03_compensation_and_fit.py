# %% [markdown]
# # Control voltages, drive calibration and the frequency table

# %%
import numpy as np

from surftrap import (CompensationTarget, DriveConfig, FieldModel, IonSpecies, VrfFitInput,
                      fit_vrf, format_table, predict_table, reference_config, reference_layout,
                      solve_static_voltages)

layout = reference_layout()
model = FieldModel(layout)
ion = IonSpecies.mg24()
drive = DriveConfig.from_hz(103.5, 87e6)

# %% [markdown]
# Null the static field at the RF null and set a 2.83 MHz axial mode with
# DC5 held at 5 V. The four remaining electrodes are then fixed by four
# linear conditions.

# %%
res = solve_static_voltages(layout, drive, ion,
                            CompensationTarget(f_axial=2.83e6, normalization_volts=5.0),
                            model=model)
for n, v in res.voltages.items():
    print(f"{n}: {v:+.4f} V   ratio {res.fractions[n]:+.3f}")
print("reference ratios:", reference_config()["statics"]["ratios"])
print(f"residual field {res.residual_field:.2e} V/m")

# %% [markdown]
# Fit the RF amplitude to the three measured frequencies of the first
# configuration, 0.1 MHz uncertainty each.

# %%
ratios = reference_config()["statics"]["ratios"]
statics = {k: 5.0 * v for k, v in ratios.items()}
fit = fit_vrf(layout, VrfFitInput((2.83e6, 15.78e6, 17.13e6), statics, drive.omega, (1e5,) * 3),
              ion, model=model)
print(f"V_RF = {fit.vrf:.2f} +/- {fit.sigma_vrf:.2f} V, chi2 = {fit.chi2:.2f}")

# %%
rows = predict_table(layout, [(5.0, fit.vrf), (2.0, fit.vrf), (5.0, 46.2 * fit.vrf / 103.5)],
                     ion, drive.omega, ratios, model=model)
print(format_table(rows))
