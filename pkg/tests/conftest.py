import pytest

from eulerprim.fields import get_field, make_bump_testfn


@pytest.fixture(scope="session")
def two_bump():
    return get_field("two_bump")


@pytest.fixture(scope="session")
def radial():
    return get_field("radial_exp")


@pytest.fixture(scope="session")
def bump_h():
    return make_bump_testfn(0.2, 0.8)
