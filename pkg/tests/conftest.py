import pytest

from context import momentdet  # noqa: F401
from momentdet import DeterminacyClient


@pytest.fixture(scope="session")
def client():
    return DeterminacyClient()
