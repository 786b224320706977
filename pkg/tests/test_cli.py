import csv
import json

import numpy as np
import pytest

from surftrap import reference_config
from surftrap.cli import CRYSTAL_HEADER, FIELDMAP_HEADER, main


def _write(tmp_path, raw, name="c.json"):
    p = tmp_path / name
    p.write_text(json.dumps(raw))
    return str(p)


@pytest.fixture(scope="module")
def outdir(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    for cmd in ("validate", "fieldmap", "characterize", "crystal", "compensate"):
        assert main([cmd, "--out", str(d)]) == 0
    return d


def _report(outdir, cmd):
    return json.loads((outdir / f"{cmd}.json").read_text())


def test_validate_report(outdir):
    r = _report(outdir, "validate")
    assert r["valid"] is True
    assert r["min_clearance_um"] == pytest.approx(8.0)
    assert (outdir / "validate.txt").read_text().startswith("layout valid")


def test_characterize_regression(outdir):
    # pinned after the first computation on the bundled configuration
    r = _report(outdir, "characterize")
    assert r["f_axial_MHz"] == pytest.approx(2.8407, rel=1e-3)
    assert r["f_perp1_MHz"] == pytest.approx(15.442, rel=1e-3)
    assert r["f_perp2_MHz"] == pytest.approx(17.147, rel=1e-3)
    assert r["U_T_meV"] == pytest.approx(161.27, rel=2e-3)
    assert r["height_um"] == pytest.approx(38.15, rel=1e-3)


def test_fieldmap_csv(outdir):
    with open(outdir / "fieldmap.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == FIELDMAP_HEADER
    data = np.array(rows[1:], dtype=float)
    spec = reference_config()["fieldmap"]
    nu, nv = spec["resolution"]
    assert len(data) == nu * nv
    # row-major: u (here y) runs fastest
    assert np.all(np.diff(data[:nu, 1]) > 0) and np.all(data[:nu, 2] == data[0, 2])
    k = np.argmin(data[:, -1])
    r0 = np.array(_report(outdir, "characterize")["r0_um"])
    du = (spec["u_range_um"][1] - spec["u_range_um"][0]) / (nu - 1)
    dv = (spec["v_range_um"][1] - spec["v_range_um"][0]) / (nv - 1)
    assert abs(data[k, 1] - r0[1]) <= du and abs(data[k, 2] - r0[2]) <= dv
    # total = static energy + pseudo energy, and both pseudo columns are in meV
    assert np.allclose(data[:, 8], data[:, 3] * 1e3 + data[:, 7], rtol=1e-9, atol=1e-9)


def test_fieldmap_contains_escape_saddle(outdir):
    # 5 meV contours: the sublevel set of the minimum cell opens up below the depth
    with open(outdir / "fieldmap.csv") as fh:
        data = np.array(list(csv.reader(fh))[1:], dtype=float)
    nu, nv = reference_config()["fieldmap"]["resolution"]
    U = data[:, 8].reshape(nv, nu)
    depth = _report(outdir, "characterize")["U_T_meV"]
    from scipy import ndimage
    k = np.unravel_index(np.argmin(U), U.shape)
    levels = np.arange(5.0, 400.0, 5.0)
    open_at = None
    for lv in levels:
        lab, _ = ndimage.label(U < U[k] + lv)
        comp = lab == lab[k]
        if comp[0].any() or comp[-1].any() or comp[:, 0].any() or comp[:, -1].any():
            open_at = lv
            break
    assert open_at is not None
    assert open_at >= depth - 5.0


def test_crystal_csv(outdir):
    with open(outdir / "crystal.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == CRYSTAL_HEADER
    assert len(rows) == 1 + reference_config()["crystal"]["n_ions"]
    assert [int(r[0]) for r in rows[1:]] == list(range(len(rows) - 1))


def test_compensate_round_trip(outdir, tmp_path):
    comp = _report(outdir, "compensate")
    raw = reference_config()
    raw["statics"] = comp["statics"]
    cfg = _write(tmp_path, raw)
    assert main(["characterize", "--config", cfg, "--out", str(tmp_path), "--no-depth"]) == 0
    r = json.loads((tmp_path / "characterize.json").read_text())
    assert r["f_axial_MHz"] == pytest.approx(raw["compensate"]["f_axial_hz"] / 1e6, rel=1e-3)
    assert r["static_field_at_rf_null_V_per_m"] < 1e-3


def test_heating_from_report(outdir, tmp_path):
    rc = main(["heating", "--out", str(tmp_path), "--report", str(outdir / "characterize.json"),
               "--U-T-meV", "6", "--f-hz", "5.3e6"])
    assert rc == 0
    r = json.loads((tmp_path / "heating.json").read_text())
    assert 5.0e3 <= r["escape"]["rate_per_s"] <= 5.4e3
    assert set(r["johnson"]) == {"field_magnitude", "mode_projected"}


def test_missing_drive_exits_2(tmp_path, capsys):
    raw = reference_config()
    del raw["drive"]
    assert main(["validate", "--config", _write(tmp_path, raw), "--out", str(tmp_path)]) == 2
    assert "drive" in capsys.readouterr().err


def test_zero_resolution_exits_2(tmp_path):
    assert main(["fieldmap", "--resolution", "0", "0", "--out", str(tmp_path)]) == 2


def test_plane_below_surface_exits_1(tmp_path, capsys):
    assert main(["fieldmap", "--normal", "z", "--offset-um", "0", "--out", str(tmp_path)]) == 1
    assert "PlaneBelowSurface" in capsys.readouterr().err


def test_domain_error_is_module_qualified(tmp_path, capsys):
    raw = reference_config()
    raw["compensate"]["bounds_volts"] = [-3.0, 3.0]
    assert main(["compensate", "--config", _write(tmp_path, raw), "--out", str(tmp_path)]) == 1
    assert capsys.readouterr().err.startswith("compensation: InfeasibleTarget")


def test_bad_invocations_exit_2(tmp_path):
    assert main(["nonsense"]) == 2
    assert main(["validate", "--config", str(tmp_path / "missing.json")]) == 2
    assert main(["validate", "--seed", "-1", "--out", str(tmp_path)]) == 2


def test_threads_flag(tmp_path):
    assert main(["validate", "--threads", "1", "--out", str(tmp_path)]) == 0
