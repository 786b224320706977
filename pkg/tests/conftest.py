import numpy as np
import pytest

from surftrap import (DriveConfig, EffectivePotential, FieldModel, IonSpecies, find_rf_null,
                      reference_config, reference_layout)

RATIOS = reference_config()["statics"]["ratios"]


@pytest.fixture(scope="session")
def layout():
    return reference_layout()


@pytest.fixture(scope="session")
def model(layout):
    return FieldModel(layout)


@pytest.fixture(scope="session")
def ion():
    return IonSpecies.mg24()


@pytest.fixture(scope="session")
def drive():
    return DriveConfig.from_hz(103.5, 87e6)


@pytest.fixture(scope="session")
def rf_null(model):
    return find_rf_null(model)


@pytest.fixture(scope="session")
def statics():
    return {k: 5.0 * v for k, v in RATIOS.items()}


@pytest.fixture(scope="session")
def potential(model, statics, drive, ion):
    return EffectivePotential(model, model.static(statics), drive, ion)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# acceptance summary lines, one per criterion
ACCEPTANCE = {}


def record(number, ok, detail):
    ACCEPTANCE[number] = (bool(ok), detail)
    print(f"criterion {number}: {'PASS' if ok else 'FAIL'} - {detail}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'} - {detail}")
