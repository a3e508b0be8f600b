import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from coupledlns import irp, mrmupmp  # noqa: E402

DATA = Path(irp.__file__).parent / "data"


@pytest.fixture(scope="session")
def data_dir():
    return DATA


@pytest.fixture(scope="session")
def irp_toy1():
    return irp.load_instance(DATA / "irp_toy1.txt")


@pytest.fixture(scope="session")
def irp_toy6():
    return irp.load_instance(DATA / "irp_toy6.txt")


@pytest.fixture(scope="session")
def irp_25():
    return irp.load_instance(DATA / "irp_25_18_6.txt")


@pytest.fixture(scope="session")
def mup3():
    return mrmupmp.load_warehouse(DATA / "mup_toy3x3.txt")


@pytest.fixture(scope="session")
def mup4():
    return mrmupmp.load_warehouse(DATA / "mup_toy4x4.txt")


@pytest.fixture(scope="session")
def irp_toy12():
    return irp.load_instance(DATA / "irp_toy12.txt")
