import pytest

from bdgke.group import schnorr_256, toy_group


@pytest.fixture(scope="session")
def toy():
    return toy_group()


@pytest.fixture(scope="session")
def big():
    return schnorr_256()


@pytest.fixture(params=["toy", "schnorr-256"], scope="session")
def any_group(request):
    return toy_group() if request.param == "toy" else schnorr_256()
