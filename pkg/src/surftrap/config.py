"""JSON run configuration.

Keys carry their unit as a suffix (``_um``, ``_volts``, ``_hz``, ``_amu``
...). The schema lives in ``data/config.schema.json``; unknown keys are
rejected.
"""

from __future__ import annotations

import copy
import dataclasses
import json
from dataclasses import dataclass
from importlib import resources

import jsonschema

from .constants import um
from .geometry import Electrode, FiveWireParams, Polygon, TrapLayout, reference_layout, validate_layout
from .pseudo import DriveConfig, IonSpecies

SOLVER_DEFAULTS = {"depth_spacing_um": 3.0, "grad_tol_N": 1e-22, "panel_size_um": 4.0,
                   "max_panels": 20000}


class ConfigError(Exception):
    """Configuration file missing, malformed or violating the schema."""


def schema() -> dict:
    return json.loads(resources.files("surftrap.data").joinpath("config.schema.json").read_text())


def reference_config() -> dict:
    """The bundled reference configuration as a dict."""
    return json.loads(resources.files("surftrap.data").joinpath("reference.json").read_text())


def _describe(err: jsonschema.ValidationError) -> str:
    where = "/".join(str(p) for p in err.absolute_path) or "<root>"
    return f"{where}: {err.message}"


@dataclass(frozen=True)
class RunConfig:
    raw: dict

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        validator = jsonschema.Draft202012Validator(schema())
        errors = sorted(validator.iter_errors(data), key=lambda e: list(e.absolute_path))
        if errors:
            raise ConfigError("; ".join(_describe(e) for e in errors))
        return cls(copy.deepcopy(data))

    @classmethod
    def load(cls, path) -> "RunConfig":
        try:
            with open(path, encoding="utf-8") as fh:
                data = json.load(fh)
        except FileNotFoundError as exc:
            raise ConfigError(f"config file not found: {path}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON in {path}: {exc}") from exc
        return cls.from_dict(data)

    def section(self, name, default=None):
        return self.raw.get(name, default)

    # builders ------------------------------------------------------------
    def layout(self) -> TrapLayout:
        spec = self.raw["layout"]
        if "reference" in spec:
            r = spec["reference"]
            kw = {}
            for key, attr in (("inner_edge_um", "inner_edge"), ("outer_edge_um", "outer_edge"),
                              ("outer_edge_opposite_um", "outer_edge_opposite"),
                              ("center_width_um", "center_width"), ("gap_um", "gap"),
                              ("rf_length_um", "rf_length"), ("bridge_width_um", "bridge_width")):
                if key in r:
                    kw[attr] = None if r[key] is None else r[key] * um
            for key, attr in (("segment_lengths_um", "segment_lengths"),
                              ("control_widths_um", "control_widths")):
                if key in r:
                    kw[attr] = tuple(v * um for v in r[key])
            if "rf_topology" in r:
                kw["rf_topology"] = r["rf_topology"]
            params = dataclasses.replace(FiveWireParams(), **kw)
            return reference_layout(params)
        electrodes = [Electrode(e["name"], e["kind"],
                                [Polygon([(x * um, y * um) for x, y in poly])
                                 for poly in e["polygons_um"]])
                      for e in spec["electrodes"]]
        meta = {"gap_m": spec.get("gap_um", 0.0) * um, "source": "config"}
        return validate_layout(TrapLayout(electrodes, meta))

    def drive(self) -> DriveConfig:
        d = self.raw["drive"]
        return DriveConfig.from_hz(d["vrf_volts"], d["f_rf_hz"])

    def ion(self) -> IonSpecies:
        i = self.raw["ion"]
        return IonSpecies.from_amu(i["mass_amu"], i["charge_e"])

    def statics(self) -> dict:
        s = self.raw["statics"]
        if "volts" in s:
            return dict(s["volts"])
        return {k: s["scale_volts"] * v for k, v in s["ratios"].items()}

    def solver(self) -> dict:
        return {**SOLVER_DEFAULTS, **self.raw.get("solver", {})}

    def with_statics_volts(self, volts: dict) -> "RunConfig":
        data = copy.deepcopy(self.raw)
        data["statics"] = {"volts": dict(volts)}
        return RunConfig.from_dict(data)
