from pathlib import Path

import pytest

from spongedim.specfile import load_spec

DATA = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def data_dir():
    return DATA


@pytest.fixture(scope="session")
def gl_a():
    return load_spec(DATA / "gl_a.json")


@pytest.fixture(scope="session")
def gl_u():
    return load_spec(DATA / "gl_u.json")


@pytest.fixture(scope="session")
def gl_3():
    return load_spec(DATA / "gl_3.json")


@pytest.fixture(scope="session")
def bar_a():
    return load_spec(DATA / "bar_a.json")
